#pragma once

#include <stdexcept>
#include <string>

namespace feffect {

// Invalid generator/train/CLI configuration; message names the violated bound.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed JSONL input; message carries the 1-based line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid JSON that does not match the corpus schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Generated corpus violates a postcondition (e.g. an empty (Y,T) group).
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Document does not match the feature spec it is being edited against.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training failure: divergence, or degenerate inputs (single treatment class).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested label-flip fraction or subsample target cannot be met.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace feffect
