#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/features.hpp"
#include "feffect/models.hpp"

namespace feffect {

struct CfProvenance {
  std::int64_t src_doc_id = 0;
  bool flipped = false;
  int feature_id = 0;
};

// Counterfactual inputs with effect-consistent labels. Every doc's treatment
// bit is the complement of its source doc's.
struct CounterfactualCorpus {
  std::vector<Document> docs;
  std::vector<CfProvenance> provenance;                  // parallel to docs
  std::vector<std::pair<int, double>> taus_by_feature;   // feature_id -> tau used

  std::size_t size() const { return docs.size(); }
};

struct FlipOptions {
  // Appendix-G-literal treated->untreated fraction tau/p2; the default uses
  // tau/p1, which is the fraction that actually meets the stated conditional
  // shift target.
  bool literal_fraction = false;
};

// Counterfactual relabeling: untreated->treated counterfactuals flip exactly
// round(eta0 * N00) labels 0->1 with eta0 = tau / P(Y=0|T=0); treated->
// untreated flip round(eta1 * N11) labels 1->0 with eta1 = tau / P(Y=1|T=1).
// tau < 0 is reduced to the positive case on T' = 1-T. Flip sets are chosen
// by seeded shuffle; infeasible fractions (eta > 1) raise InfeasibleError.
CounterfactualCorpus flip_labels(const Corpus& corpus, const FeatureSpec& spec, double tau,
                                 std::int64_t seed, const FlipOptions& opts = {});

// Union of per-feature counterfactual corpora, one flip_labels run per
// feature with a derived seed stream.
CounterfactualCorpus build_augmented(const Corpus& corpus, const std::vector<FeatureSpec>& specs,
                                     const std::vector<double>& taus, std::int64_t seed,
                                     const FlipOptions& opts = {});

// Minimize E[BCE] over train plus lambda-weighted BCE over the augmented
// samples. Originals are shuffled with the same seeded stream as plain
// training and the augmented block follows them, so lambda = 0 reproduces
// train_classifier bit for bit.
Classifier train_feag(const Corpus& train, const CounterfactualCorpus& aug, double lambda,
                      const TrainConfig& cfg, const FeaturizerConfig& fcfg = {});

// BCE plus lambda * batch-mean effect penalty (see effect_penalty); gradients
// flow through both counterfactual evaluations.
Classifier train_regularized(const Corpus& train, const std::vector<FeatureSpec>& specs,
                             const std::vector<double>& taus, double lambda,
                             const TrainConfig& cfg, const FeaturizerConfig& fcfg = {});

// Subsample the four (Y,T) cells to the independence targets implied by the
// corpus marginals, scaled to the largest feasible total.
Corpus subsample_baseline(const Corpus& corpus, std::int64_t seed);

// Strip the treatment-indicating tokens from every doc, then plain training.
// The returned classifier also strips at inference time.
Classifier remove_token_baseline(const Corpus& train, const FeatureSpec& spec,
                                 const TrainConfig& cfg, const FeaturizerConfig& fcfg = {});

// Same JSONL schema as Corpus with extra per-doc fields
// {src_doc_id, flipped, feature_id}.
void write_jsonl(const CounterfactualCorpus& aug, const std::string& path);

}  // namespace feffect
