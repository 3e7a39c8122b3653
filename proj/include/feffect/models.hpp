#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/features.hpp"

namespace feffect {

enum class ModelMode { linear, mlp };

std::string mode_name(ModelMode m);
ModelMode mode_from_name(const std::string& name);

struct TrainConfig {
  double lr = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lambda_rr = 1.0;
  double weight_decay = 1e-4;
  std::int64_t seed = 0;
  double eps_clip = 0.01;
  ModelMode mode = ModelMode::linear;
  std::size_t hidden = 64;
  // Per-epoch best-model selection by heldout BCE; off by default so a run
  // is a pure function of (data, config, seed).
  bool select_best = false;

  void validate() const;
};

// Dense weight vector with deferred multiplicative weight decay: the decay
// factor accumulates in `scale` instead of touching every coordinate each
// step, so sparse updates stay O(active features).
struct WeightBlock {
  std::vector<double> v;
  double scale = 1.0;

  explicit WeightBlock(std::size_t n = 0) : v(n, 0.0) {}

  std::size_t size() const { return v.size(); }
  double get(std::size_t i) const { return scale * v[i]; }
  void set(std::size_t i, double x) { v[i] = x / scale; }
  void decay(double factor);
  void fold();  // multiply scale through and reset it to 1
  std::vector<double> dense() const;
};

struct TwoHeadModel {
  ModelMode mode = ModelMode::linear;
  std::size_t hidden = 0;  // 0 in linear mode
  FeaturizerConfig featurizer;
  std::optional<FeatureSpec> spec;  // feature the model was trained against

  WeightBlock shared_w;  // hidden x dim, row-major by hidden unit (mlp only)
  std::vector<double> shared_b;
  WeightBlock g_w;  // over hidden units (mlp) or raw feature indices (linear)
  double g_b = 0.0;
  WeightBlock a_w;
  double a_b = 0.0;

  std::size_t head_width() const { return mode == ModelMode::mlp ? hidden : featurizer.dim; }
  std::size_t param_count() const;
};

TwoHeadModel init_two_head(const FeaturizerConfig& fcfg, const TrainConfig& cfg);

double outcome_logit(const TwoHeadModel& m, const SparseVec& x);
double predict_outcome(const TwoHeadModel& m, const Document& doc);  // sigmoid, in (0,1)
double predict_riesz(const TwoHeadModel& m, const Document& doc);

struct PropensityModel {
  FeaturizerConfig featurizer;
  FeatureSpec spec;
  double eps_clip = 0.01;
  WeightBlock w;
  double b = 0.0;
};

// P(T=1 | covariates), clipped to [eps_clip, 1 - eps_clip].
double predict_propensity(const PropensityModel& m, const Document& doc);
// Unclipped value, for callers that apply their own clip.
double predict_propensity_raw(const PropensityModel& m, const Document& doc);

// mean over the batch of -2*(alpha(X,1) - alpha(X,0)) + alpha(Z)^2.
double riesz_loss(const TwoHeadModel& m, const std::vector<Document>& batch,
                  const FeatureSpec& spec);

// Mean BCE of the outcome head.
double bce_loss(const TwoHeadModel& m, const std::vector<Document>& batch);

// Batch-mean effect penalty: (1/m) sum_j (mean_i[f(X_i^j,1) - f(X_i^j,0)] - tau_j)^2
// with f on the probability scale.
double effect_penalty(const TwoHeadModel& m, const std::vector<Document>& batch,
                      const std::vector<FeatureSpec>& specs, const std::vector<double>& taus);

// Loss value plus dense gradient over the flat parameter vector; feeds both
// the finite-difference tests and nothing else (training uses sparse paths).
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};
LossGrad bce_loss_grad(const TwoHeadModel& m, const std::vector<Document>& batch);
LossGrad riesz_loss_grad(const TwoHeadModel& m, const std::vector<Document>& batch,
                         const FeatureSpec& spec);
LossGrad effect_penalty_grad(const TwoHeadModel& m, const std::vector<Document>& batch,
                             const std::vector<FeatureSpec>& specs,
                             const std::vector<double>& taus);

// Flat parameter view, layout: [shared_w | shared_b] (mlp) + [g_w | g_b | a_w | a_b].
std::vector<double> flat_params(const TwoHeadModel& m);
void set_flat_params(TwoHeadModel& m, const std::vector<double>& p);

// Joint training of outcome and Riesz heads: BCE(Y, g) + lambda_rr * riesz_loss,
// mini-batch SGD with seeded shuffling, linearly decaying lr and decoupled
// weight decay. heldout is only consulted when cfg.select_best is set.
TwoHeadModel train_two_head(const Corpus& train, const FeatureSpec& spec, const TrainConfig& cfg,
                            const FeaturizerConfig& fcfg = {}, const Corpus* heldout = nullptr);

// BCE(T, P(X)) on covariate-only features.
PropensityModel train_propensity(const Corpus& train, const FeatureSpec& spec,
                                 const TrainConfig& cfg, const FeaturizerConfig& fcfg = {});

// Trained predictor; remove-token training sets input_strip so that the
// treatment tokens are also removed at inference time.
struct Classifier {
  TwoHeadModel model;
  std::optional<FeatureSpec> input_strip;

  double predict(const Document& doc) const;
};

Classifier train_classifier(const Corpus& train, const TrainConfig& cfg,
                            const FeaturizerConfig& fcfg = {}, const Corpus* heldout = nullptr);

void save_classifier(const Classifier& c, const std::string& path);
Classifier load_classifier(const std::string& path);

// Internal hooks for the feag trainers; they reuse the SGD machinery here so
// the lambda = 0 reduction to plain training is exact.
namespace detail {

TwoHeadModel train_weighted_bce_impl(const std::vector<const SparseVec*>& orig_x,
                                     const std::vector<int>& orig_y,
                                     const std::vector<const SparseVec*>& aug_x,
                                     const std::vector<int>& aug_y, double aug_weight,
                                     const TrainConfig& cfg, const FeaturizerConfig& fcfg);

TwoHeadModel train_regularized_impl(const Corpus& train, const std::vector<FeatureSpec>& specs,
                                    const std::vector<double>& taus, double lambda,
                                    const TrainConfig& cfg, const FeaturizerConfig& fcfg);

}  // namespace detail

}  // namespace feffect
