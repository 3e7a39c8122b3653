#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/features.hpp"
#include "feffect/models.hpp"

namespace feffect {

enum class EstimatorMethod { direct, dr_propensity, dr_riesz };

std::string method_name(EstimatorMethod m);

struct EffectEstimate {
  int feature_id = 0;
  EstimatorMethod method = EstimatorMethod::direct;
  double value = 0.0;  // mean of per_seed_values
  std::vector<double> per_seed_values;
  std::optional<double> mae_vs_truth;  // x1 scale; CLI reports x100

  double std_error() const;  // sample sd / sqrt(n_seeds); 0 for a single seed
};

using OutcomeFn = std::function<double(const Document&)>;     // probability
using MultiplierFn = std::function<double(const Document&)>;  // alpha weight

// (1/n) sum_i g(X_i,1) - g(X_i,0), g evaluated on feature-forced documents.
double ate_direct(const OutcomeFn& outcome, const Corpus& eval, const FeatureSpec& spec);
double ate_direct(const TwoHeadModel& model, const Corpus& eval, const FeatureSpec& spec);

// alpha_0(Z) = T/P(X) - (1-T)/(1-P(X)) with the propensity clipped to
// [eps_clip, 1 - eps_clip].
double multiplier_propensity(const PropensityModel& pmodel, const Document& doc,
                             double eps_clip);

// Direct estimate plus the multiplier-weighted residual correction
// (1/n) sum_i alpha(Z_i) (Y_i - g(Z_i)). Both DR estimators are this with a
// different alpha; tests feed closed-form alphas through the same path.
double ate_dr(const OutcomeFn& outcome, const MultiplierFn& multiplier, const Corpus& eval,
              const FeatureSpec& spec);

double ate_dr_propensity(const TwoHeadModel& g, const PropensityModel& pmodel,
                         const Corpus& eval, const FeatureSpec& spec, double eps_clip,
                         bool self_normalize = false);

double ate_dr_riesz(const TwoHeadModel& two_head, const Corpus& eval, const FeatureSpec& spec);

// Exact enumeration over the finite (W, base Y, hook) joint of the SS
// generator; returns the ATE of the prefix feature, which is tau by
// construction. Independent of the sampling path.
double oracle_ate_enumerated(const GenConfigSS& cfg);

struct EstimateOptions {
  TrainConfig train;
  FeaturizerConfig featurizer;
  double heldout_frac = 0.5;  // estimation split: train | heldout
  int kfold = 0;              // >= 2 enables cross-fitting (average of fold estimates)
  bool self_normalize = false;
};

struct EffectEstimateSet {
  EffectEstimate direct;
  EffectEstimate dr_propensity;
  EffectEstimate dr_riesz;

  const EffectEstimate& by_method(EstimatorMethod m) const;
};

// Per seed: split train/heldout, fit the two-head and propensity models on
// train, evaluate all three estimators on heldout; aggregate across seeds.
// MAE vs corpus.meta.true_tau is attached when the truth is known.
EffectEstimateSet estimate_feature_effect(const Corpus& corpus, const FeatureSpec& spec,
                                          const EstimateOptions& opts,
                                          const std::vector<std::int64_t>& seeds,
                                          int threads = 1);

// CSV: feature_id,method,estimate,std_error,mae_x100,n_seeds
std::string effect_estimates_csv(const std::vector<EffectEstimateSet>& sets);

}  // namespace feffect
