#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "feffect/errors.hpp"

namespace feffect {

// One example: token sequence, binary treatment T, binary label Y, optional
// confounder property W (recorded by the synthetic generators).
struct Document {
  std::vector<std::string> tokens;
  int treatment = 0;
  int label = 0;
  std::optional<int> confounder;
  std::int64_t doc_id = 0;
};

enum class Generator { ss, subsampled, external };

std::string generator_name(Generator g);
Generator generator_from_name(const std::string& name);

struct CorpusMeta {
  std::optional<double> true_tau;
  std::optional<double> overlap_eps;
  Generator generator = Generator::external;
  std::int64_t seed = 0;
};

struct Corpus {
  std::vector<Document> docs;
  CorpusMeta meta;

  std::size_t size() const { return docs.size(); }
  bool empty() const { return docs.empty(); }
};

struct VocabConfig {
  std::vector<std::string> w1_pool;
  std::vector<std::string> w0_pool;
  std::vector<std::string> neutral_pool;
  std::string treated_token = "treated";
  std::string untreated_token = "untreated";
};

// Eight tokens per pool; enough vocabulary that no single covariate token
// pins down W by itself.
VocabConfig default_vocab();

// Optional label hook: a token inserted independently of W whose presence H
// shifts the label probability, P(Y'=1) = (1-tau-delta)*Y + tau*T + delta*H.
// The prefix feature keeps effect exactly tau and the hook token has effect
// exactly delta, which gives the bias scan a planted ground truth.
struct EffectTokenConfig {
  std::string token;
  double delta = 0.0;
  double p_present = 0.5;
};

struct GenConfigSS {
  std::size_t n = 0;
  double tau = 0.0;
  double eps = 0.05;
  double signal_strength = 0.9;   // P(covariate token drawn from the W-matching pool)
  double base_label_acc = 0.78;   // P(base label agrees with W)
  std::size_t tokens_per_doc = 12;
  VocabConfig vocab = default_vocab();
  std::optional<EffectTokenConfig> effect_token;

  void validate() const;  // throws ConfigError naming the violated bound
};

struct GenConfigSub {
  std::size_t n_raw = 0;
  std::string trigger_token = "kill";
  double keep_t1_w0 = 0.05;
  double keep_t0 = 0.10;
  // Trigger insertion rates by W; the trigger is rare and W-correlated.
  double p_trigger_w1 = 0.6;
  double p_trigger_w0 = 0.1;
  // Covariate generation, as in GenConfigSS.
  double signal_strength = 0.9;
  double base_label_acc = 0.78;
  std::size_t tokens_per_doc = 12;
  VocabConfig vocab = default_vocab();

  void validate() const;
};

// Semi-synthetic corpus: W ~ Bern(0.5); covariate tokens pool-drawn by W;
// base label = W with prob base_label_acc; T = W flipped with prob eps;
// label ~ Bern((1-tau)*Y + tau*T); treated/untreated token prepended.
// Per-document RNG streams make generation order-independent.
Corpus generate_ss(const GenConfigSS& cfg, std::int64_t seed);

// Subsampled-correlation corpus: treatment is the presence of trigger_token
// (inserted W-dependently), labels are the base labels (the trigger has zero
// causal effect, so meta.true_tau = 0), and the (T,W) cells are subsampled to
// exaggerate the T-Y correlation.
Corpus generate_subsampled(const GenConfigSub& cfg, std::int64_t seed);

// JSONL codec. Header line {"_meta":{...}}, then one document object per
// line with byte-stable field order tokens, t, y, w.
void write_jsonl(const Corpus& corpus, std::ostream& out);
void write_jsonl(const Corpus& corpus, const std::string& path);
Corpus read_jsonl(std::istream& in);
Corpus read_jsonl(const std::string& path);

struct SplitResult {
  Corpus train;
  Corpus heldout;
  Corpus test;
};

// Deterministic seeded shuffle; heldout/test get floor(n*f) docs, the
// remainder goes to train. doc_ids are re-densified per part.
SplitResult split(const Corpus& corpus, double f_train, double f_heldout, double f_test,
                  std::int64_t seed);

// Two-way variant used by the estimation pipeline (50/50 by default).
std::pair<Corpus, Corpus> split_two(const Corpus& corpus, double f_first, std::int64_t seed);

}  // namespace feffect
