#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/errors.hpp"

namespace feffect {

// Feature realized as a prepended marker token: exactly one of the pair is
// present, and which one encodes T.
struct PrefixPairSpec {
  std::string treated_token;
  std::string untreated_token;
};

// Feature realized as token presence: T == (trigger_token in tokens).
// Counterfactual edits delete all occurrences (1 -> 0) or insert at the
// front (0 -> 1).
struct PresenceSpec {
  std::string trigger_token;
};

struct FeatureSpec {
  int feature_id = 0;
  std::variant<PrefixPairSpec, PresenceSpec> kind;

  bool is_prefix() const { return std::holds_alternative<PrefixPairSpec>(kind); }
  const PrefixPairSpec& prefix() const { return std::get<PrefixPairSpec>(kind); }
  const PresenceSpec& presence() const { return std::get<PresenceSpec>(kind); }

  static FeatureSpec make_prefix(int id, std::string treated, std::string untreated);
  static FeatureSpec make_presence(int id, std::string trigger);

  // CLI form: "prefix:<treated>,<untreated>" or "presence:<token>".
  static FeatureSpec parse(int id, const std::string& text);
  std::string to_string() const;
};

struct SparseVec {
  std::uint32_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted, unique indices
};

struct FeaturizerConfig {
  std::uint32_t dim = 65536;  // power of two
  std::uint64_t hash_seed = 0;
  enum class TfMode { binary, counts };
  TfMode tf_mode = TfMode::binary;

  void validate() const;
};

// Seeded FNV-1a, masked to dim. Not std::hash: the index assignment is part
// of the reproducibility contract.
std::uint32_t hash_token(const std::string& token, std::uint64_t hash_seed, std::uint32_t dim);

SparseVec featurize(const Document& doc, const FeaturizerConfig& cfg);

// Flip the feature in the text and in the treatment bit. Labels and all
// other tokens carry over; relabeling is the augmentation step's job.
Document apply_counterfactual(const Document& doc, const FeatureSpec& spec);

// Identity when doc.treatment == t, else apply_counterfactual.
Document with_feature_forced(const Document& doc, const FeatureSpec& spec, int t);

// Covariate-only view: all treatment-indicating tokens removed, treatment
// bit kept as metadata.
Document strip_feature_tokens(const Document& doc, const FeatureSpec& spec);

// Group1 (Y=0,T=0), Group2 (Y=0,T=1), Group3 (Y=1,T=0), Group4 (Y=1,T=1).
int group_of(const Document& doc);

}  // namespace feffect
