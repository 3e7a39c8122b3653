#include "feffect/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feffect/rng.hpp"
#include "feffect/util.hpp"

namespace feffect {

std::string method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::direct: return "direct";
    case EstimatorMethod::dr_propensity: return "dr_propensity";
    case EstimatorMethod::dr_riesz: return "dr_riesz";
  }
  return "direct";
}

double EffectEstimate::std_error() const {
  if (per_seed_values.size() < 2) return 0.0;
  return sample_std(per_seed_values) / std::sqrt(static_cast<double>(per_seed_values.size()));
}

double ate_direct(const OutcomeFn& outcome, const Corpus& eval, const FeatureSpec& spec) {
  if (eval.empty()) throw TrainingError("ate_direct needs a non-empty eval corpus");
  double s = 0.0;
  for (const auto& doc : eval.docs) {
    s += outcome(with_feature_forced(doc, spec, 1)) - outcome(with_feature_forced(doc, spec, 0));
  }
  return s / static_cast<double>(eval.size());
}

double ate_direct(const TwoHeadModel& model, const Corpus& eval, const FeatureSpec& spec) {
  return ate_direct([&model](const Document& d) { return predict_outcome(model, d); }, eval, spec);
}

double multiplier_propensity(const PropensityModel& pmodel, const Document& doc,
                             double eps_clip) {
  const double p = std::clamp(predict_propensity_raw(pmodel, doc), eps_clip, 1.0 - eps_clip);
  return doc.treatment == 1 ? 1.0 / p : -1.0 / (1.0 - p);
}

double ate_dr(const OutcomeFn& outcome, const MultiplierFn& multiplier, const Corpus& eval,
              const FeatureSpec& spec) {
  if (eval.empty()) throw TrainingError("ate_dr needs a non-empty eval corpus");
  const double direct = ate_direct(outcome, eval, spec);
  double corr = 0.0;
  for (const auto& doc : eval.docs) {
    corr += multiplier(doc) * (static_cast<double>(doc.label) - outcome(doc));
  }
  return direct + corr / static_cast<double>(eval.size());
}

double ate_dr_propensity(const TwoHeadModel& g, const PropensityModel& pmodel,
                         const Corpus& eval, const FeatureSpec& spec, double eps_clip,
                         bool self_normalize) {
  OutcomeFn outcome = [&g](const Document& d) { return predict_outcome(g, d); };
  if (!self_normalize) {
    MultiplierFn mult = [&pmodel, eps_clip](const Document& d) {
      return multiplier_propensity(pmodel, d, eps_clip);
    };
    return ate_dr(outcome, mult, eval, spec);
  }
  // Self-normalized variant: each arm's weights rescaled to unit mean.
  double sum1 = 0.0, sum0 = 0.0;
  for (const auto& doc : eval.docs) {
    const double a = multiplier_propensity(pmodel, doc, eps_clip);
    if (doc.treatment == 1) sum1 += a;
    else sum0 += -a;
  }
  const double n = static_cast<double>(eval.size());
  const double m1 = sum1 / n, m0 = sum0 / n;
  MultiplierFn mult = [&pmodel, eps_clip, m1, m0](const Document& d) {
    const double a = multiplier_propensity(pmodel, d, eps_clip);
    return d.treatment == 1 ? (m1 > 0.0 ? a / m1 : a) : (m0 > 0.0 ? a / m0 : a);
  };
  return ate_dr(outcome, mult, eval, spec);
}

double ate_dr_riesz(const TwoHeadModel& two_head, const Corpus& eval, const FeatureSpec& spec) {
  OutcomeFn outcome = [&two_head](const Document& d) { return predict_outcome(two_head, d); };
  MultiplierFn mult = [&two_head](const Document& d) { return predict_riesz(two_head, d); };
  return ate_dr(outcome, mult, eval, spec);
}

double oracle_ate_enumerated(const GenConfigSS& cfg) {
  cfg.validate();
  const double delta = cfg.effect_token ? cfg.effect_token->delta : 0.0;
  const double p_hook = cfg.effect_token ? cfg.effect_token->p_present : 0.0;
  double ate = 0.0;
  for (int w = 0; w <= 1; ++w) {
    const double pw = 0.5;
    for (int base_y = 0; base_y <= 1; ++base_y) {
      const double py = base_y == w ? cfg.base_label_acc : 1.0 - cfg.base_label_acc;
      for (int hook = 0; hook <= 1; ++hook) {
        const double ph = hook == 1 ? p_hook : 1.0 - p_hook;
        const double q1 = (1.0 - cfg.tau - delta) * base_y + cfg.tau * 1.0 + delta * hook;
        const double q0 = (1.0 - cfg.tau - delta) * base_y + cfg.tau * 0.0 + delta * hook;
        ate += pw * py * ph * (q1 - q0);
      }
    }
  }
  return ate;
}

const EffectEstimate& EffectEstimateSet::by_method(EstimatorMethod m) const {
  switch (m) {
    case EstimatorMethod::direct: return direct;
    case EstimatorMethod::dr_propensity: return dr_propensity;
    case EstimatorMethod::dr_riesz: return dr_riesz;
  }
  return direct;
}

namespace {

struct SeedEstimates {
  double direct = 0.0;
  double dr_propensity = 0.0;
  double dr_riesz = 0.0;
};

SeedEstimates estimate_on(const Corpus& train, const Corpus& heldout, const FeatureSpec& spec,
                          const EstimateOptions& opts, std::int64_t seed) {
  TrainConfig tcfg = opts.train;
  tcfg.seed = seed;
  const TwoHeadModel two_head = train_two_head(train, spec, tcfg, opts.featurizer);
  TrainConfig pcfg = tcfg;
  pcfg.seed = static_cast<std::int64_t>(Rng::mix(static_cast<std::uint64_t>(seed), 0x70726f70ULL));
  const PropensityModel pmodel = train_propensity(train, spec, pcfg, opts.featurizer);

  SeedEstimates e;
  e.direct = ate_direct(two_head, heldout, spec);
  e.dr_propensity = ate_dr_propensity(two_head, pmodel, heldout, spec, tcfg.eps_clip,
                                      opts.self_normalize);
  e.dr_riesz = ate_dr_riesz(two_head, heldout, spec);
  return e;
}

SeedEstimates estimate_for_seed(const Corpus& corpus, const FeatureSpec& spec,
                                const EstimateOptions& opts, std::int64_t seed) {
  if (opts.kfold >= 2) {
    // Cross-fitting: average of per-fold estimates, each fold scored by
    // models trained on its complement.
    const std::size_t n = corpus.size();
    const auto k = static_cast<std::size_t>(opts.kfold);
    if (n < k) throw SplitError("kfold exceeds corpus size");
    Rng rng = Rng::stream(static_cast<std::uint64_t>(seed), 0x6b666f6c64ULL);
    const auto perm = permutation(n, rng);
    SeedEstimates acc;
    for (std::size_t f = 0; f < k; ++f) {
      Corpus fit, score;
      fit.meta = corpus.meta;
      score.meta = corpus.meta;
      for (std::size_t i = 0; i < n; ++i) {
        Document d = corpus.docs[perm[i]];
        auto& dest = (i % k == f) ? score : fit;
        d.doc_id = static_cast<std::int64_t>(dest.docs.size());
        dest.docs.push_back(std::move(d));
      }
      const SeedEstimates e = estimate_on(fit, score, spec, opts, seed);
      acc.direct += e.direct / static_cast<double>(k);
      acc.dr_propensity += e.dr_propensity / static_cast<double>(k);
      acc.dr_riesz += e.dr_riesz / static_cast<double>(k);
    }
    return acc;
  }
  const auto parts = split_two(corpus, opts.heldout_frac, seed);
  return estimate_on(parts.first, parts.second, spec, opts, seed);
}

EffectEstimate aggregate(int feature_id, EstimatorMethod method, std::vector<double> values,
                         const std::optional<double>& truth) {
  EffectEstimate e;
  e.feature_id = feature_id;
  e.method = method;
  e.per_seed_values = std::move(values);
  e.value = mean(e.per_seed_values);
  if (truth.has_value()) {
    double s = 0.0;
    for (double v : e.per_seed_values) s += std::abs(v - *truth);
    e.mae_vs_truth = s / static_cast<double>(e.per_seed_values.size());
  }
  return e;
}

}  // namespace

EffectEstimateSet estimate_feature_effect(const Corpus& corpus, const FeatureSpec& spec,
                                          const EstimateOptions& opts,
                                          const std::vector<std::int64_t>& seeds, int threads) {
  if (seeds.empty()) throw ConfigError("estimate_feature_effect needs at least one seed");
  std::vector<SeedEstimates> per_seed(seeds.size());
  std::vector<std::string> errors(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    try {
      per_seed[i] = estimate_for_seed(corpus, spec, opts, seeds[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!errors[i].empty()) {
      throw TrainingError("seed " + std::to_string(seeds[i]) + ": " + errors[i]);
    }
  }

  std::vector<double> vd, vp, vr;
  for (const auto& e : per_seed) {
    vd.push_back(e.direct);
    vp.push_back(e.dr_propensity);
    vr.push_back(e.dr_riesz);
  }
  EffectEstimateSet set;
  set.direct = aggregate(spec.feature_id, EstimatorMethod::direct, std::move(vd),
                         corpus.meta.true_tau);
  set.dr_propensity = aggregate(spec.feature_id, EstimatorMethod::dr_propensity, std::move(vp),
                                corpus.meta.true_tau);
  set.dr_riesz = aggregate(spec.feature_id, EstimatorMethod::dr_riesz, std::move(vr),
                           corpus.meta.true_tau);
  return set;
}

std::string effect_estimates_csv(const std::vector<EffectEstimateSet>& sets) {
  std::ostringstream out;
  out << "feature_id,method,estimate,std_error,mae_x100,n_seeds\n";
  for (const auto& set : sets) {
    for (const auto* e : {&set.direct, &set.dr_propensity, &set.dr_riesz}) {
      out << e->feature_id << ',' << method_name(e->method) << ',' << fmt_fixed(e->value, 6)
          << ',' << fmt_fixed(e->std_error(), 6) << ',';
      if (e->mae_vs_truth.has_value()) out << fmt_fixed(*e->mae_vs_truth * 100.0, 4);
      out << ',' << e->per_seed_values.size() << '\n';
    }
  }
  return out.str();
}

}  // namespace feffect
