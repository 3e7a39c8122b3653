#include "feffect/feag.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "feffect/rng.hpp"
#include "json.hpp"

namespace feffect {

namespace {

constexpr std::uint64_t kFlipStreamTag = 0x666c6970ULL;
constexpr std::uint64_t kSubsampleTag = 0x737562ULL;
constexpr std::uint64_t kFeatureTag = 0x66656174ULL;

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

}  // namespace

CounterfactualCorpus flip_labels(const Corpus& corpus, const FeatureSpec& spec, double tau,
                                 std::int64_t seed, const FlipOptions& opts) {
  if (corpus.empty()) throw TrainingError("flip_labels needs a non-empty corpus");
  if (std::abs(tau) > 1.0) throw ConfigError("tau must lie in [-1, 1]");

  // tau < 0 reduces to the positive case on T' = 1 - T.
  const bool swapped = tau < 0.0;
  const double eff_tau = std::abs(tau);
  auto tx = [swapped](const Document& d) { return swapped ? 1 - d.treatment : d.treatment; };

  std::size_t n1 = 0, n11 = 0, n0 = 0, n00 = 0;
  for (const auto& d : corpus.docs) {
    if (tx(d) == 1) {
      ++n1;
      if (d.label == 1) ++n11;
    } else {
      ++n0;
      if (d.label == 0) ++n00;
    }
  }
  if (n1 == 0 || n0 == 0) throw TrainingError("flip_labels needs both treatment groups");

  const double p1 = static_cast<double>(n11) / static_cast<double>(n1);  // P(Y=1|T=1)
  const double p2 = static_cast<double>(n00) / static_cast<double>(n0);  // P(Y=0|T=0)

  double eta0 = 0.0, eta1 = 0.0;
  if (eff_tau > 0.0) {
    eta0 = p2 > 0.0 ? eff_tau / p2 : std::numeric_limits<double>::infinity();
    const double denom1 = opts.literal_fraction ? p2 : p1;
    eta1 = denom1 > 0.0 ? eff_tau / denom1 : std::numeric_limits<double>::infinity();
    if (eta0 > 1.0 || eta1 > 1.0) {
      throw InfeasibleError("label flip fraction exceeds 1 (tau=" + fmt3(tau) +
                            ", p1=" + fmt3(p1) + ", p2=" + fmt3(p2) + ")");
    }
  }

  // Candidate pools per direction, flipped counts fixed by rounding so the
  // post-flip conditional shift hits tau up to integer resolution.
  std::vector<std::size_t> cand0, cand1;  // (T=0, Y=0) and (T=1, Y=1) under tx
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& d = corpus.docs[i];
    if (tx(d) == 0 && d.label == 0) cand0.push_back(i);
    if (tx(d) == 1 && d.label == 1) cand1.push_back(i);
  }
  const auto k0 = static_cast<std::size_t>(
      std::llround(eta0 * static_cast<double>(cand0.size())));
  const auto k1 = static_cast<std::size_t>(
      std::llround(eta1 * static_cast<double>(cand1.size())));

  Rng rng = Rng::stream(static_cast<std::uint64_t>(seed), kFlipStreamTag);
  shuffle(cand0, rng);
  shuffle(cand1, rng);
  std::vector<char> flip(corpus.size(), 0);
  for (std::size_t k = 0; k < k0; ++k) flip[cand0[k]] = 1;
  for (std::size_t k = 0; k < k1; ++k) flip[cand1[k]] = 1;

  CounterfactualCorpus out;
  out.docs.reserve(corpus.size());
  out.provenance.reserve(corpus.size());
  out.taus_by_feature.emplace_back(spec.feature_id, tau);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& src = corpus.docs[i];
    Document cf = apply_counterfactual(src, spec);
    if (flip[i]) cf.label = 1 - cf.label;
    cf.doc_id = static_cast<std::int64_t>(out.docs.size());
    out.docs.push_back(std::move(cf));
    out.provenance.push_back({src.doc_id, flip[i] != 0, spec.feature_id});
  }
  return out;
}

CounterfactualCorpus build_augmented(const Corpus& corpus, const std::vector<FeatureSpec>& specs,
                                     const std::vector<double>& taus, std::int64_t seed,
                                     const FlipOptions& opts) {
  if (specs.empty() || specs.size() != taus.size()) {
    throw ConfigError("build_augmented needs matching non-empty spec and tau lists");
  }
  CounterfactualCorpus out;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto feature_seed = static_cast<std::int64_t>(
        Rng::mix(static_cast<std::uint64_t>(seed), Rng::mix(kFeatureTag, j)));
    CounterfactualCorpus part;
    try {
      part = flip_labels(corpus, specs[j], taus[j], feature_seed, opts);
    } catch (const std::exception& e) {
      throw InfeasibleError("feature " + std::to_string(specs[j].feature_id) + ": " + e.what());
    }
    for (std::size_t i = 0; i < part.docs.size(); ++i) {
      part.docs[i].doc_id = static_cast<std::int64_t>(out.docs.size());
      out.docs.push_back(std::move(part.docs[i]));
      out.provenance.push_back(part.provenance[i]);
    }
    out.taus_by_feature.emplace_back(specs[j].feature_id, taus[j]);
  }
  return out;
}

Classifier train_feag(const Corpus& train, const CounterfactualCorpus& aug, double lambda,
                      const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  // lambda = 0: the augmented samples carry no gradient, so this is plain
  // training over the originals, bit for bit.
  if (lambda == 0.0 || aug.docs.empty()) {
    return train_classifier(train, cfg, fcfg);
  }
  std::vector<SparseVec> orig_store(train.size()), aug_store(aug.docs.size());
  std::vector<const SparseVec*> orig_x(train.size()), aug_x(aug.docs.size());
  std::vector<int> orig_y(train.size()), aug_y(aug.docs.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    orig_store[i] = featurize(train.docs[i], fcfg);
    orig_x[i] = &orig_store[i];
    orig_y[i] = train.docs[i].label;
  }
  for (std::size_t i = 0; i < aug.docs.size(); ++i) {
    aug_store[i] = featurize(aug.docs[i], fcfg);
    aug_x[i] = &aug_store[i];
    aug_y[i] = aug.docs[i].label;
  }
  Classifier c;
  c.model = detail::train_weighted_bce_impl(orig_x, orig_y, aug_x, aug_y, lambda, cfg, fcfg);
  return c;
}

Classifier train_regularized(const Corpus& train, const std::vector<FeatureSpec>& specs,
                             const std::vector<double>& taus, double lambda,
                             const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (lambda == 0.0) return train_classifier(train, cfg, fcfg);
  Classifier c;
  c.model = detail::train_regularized_impl(train, specs, taus, lambda, cfg, fcfg);
  if (specs.size() == 1) c.model.spec = specs[0];
  return c;
}

Corpus subsample_baseline(const Corpus& corpus, std::int64_t seed) {
  const std::size_t n = corpus.size();
  std::array<std::vector<std::size_t>, 4> cells;  // [y*2 + t]
  for (std::size_t i = 0; i < n; ++i) {
    cells[corpus.docs[i].label * 2 + corpus.docs[i].treatment].push_back(i);
  }
  for (int c = 0; c < 4; ++c) {
    if (cells[c].empty()) {
      throw InfeasibleError("subsample baseline needs all four (Y,T) cells non-empty");
    }
  }

  const double r_t = static_cast<double>(cells[1].size() + cells[3].size()) /
                     static_cast<double>(n);  // P(T=1)
  const double r_y = static_cast<double>(cells[2].size() + cells[3].size()) /
                     static_cast<double>(n);  // P(Y=1)

  // Largest total N whose independence-target cell counts fit inside the
  // observed cells. N is scanned downward; targets use round-to-nearest so
  // the realized joint matches the product of marginals within 1/N.
  std::array<std::size_t, 4> target{};
  std::size_t chosen = 0;
  for (std::size_t cand = n; cand >= 4; --cand) {
    const double nd = static_cast<double>(cand);
    const auto a = static_cast<std::size_t>(std::llround(nd * r_t));  // #T=1
    const auto b = static_cast<std::size_t>(std::llround(nd * r_y));  // #Y=1
    if (a == 0 || b == 0 || a >= cand || b >= cand) continue;
    const auto c11 = static_cast<std::size_t>(
        std::llround(static_cast<double>(a) * static_cast<double>(b) / nd));
    if (c11 > a || c11 > b) continue;
    const std::size_t c10 = b - c11;        // Y=1, T=0
    const std::size_t c01 = a - c11;        // Y=0, T=1
    if (cand + c11 < a + b) continue;       // c00 would go negative
    const std::size_t c00 = cand - a - b + c11;
    const std::array<std::size_t, 4> t{c00, c01, c10, c11};
    bool fits = true;
    for (int c = 0; c < 4; ++c) fits = fits && t[c] <= cells[c].size() && t[c] > 0;
    if (fits) {
      target = t;
      chosen = cand;
      break;
    }
  }
  if (chosen == 0) throw InfeasibleError("no feasible independence-preserving subsample exists");

  Rng rng = Rng::stream(static_cast<std::uint64_t>(seed), kSubsampleTag);
  std::vector<std::size_t> keep;
  keep.reserve(chosen);
  for (int c = 0; c < 4; ++c) {
    shuffle(cells[c], rng);
    keep.insert(keep.end(), cells[c].begin(),
                cells[c].begin() + static_cast<std::ptrdiff_t>(target[c]));
  }
  std::sort(keep.begin(), keep.end());  // preserve original document order

  Corpus out;
  out.meta = corpus.meta;
  out.docs.reserve(keep.size());
  for (std::size_t idx : keep) {
    Document d = corpus.docs[idx];
    d.doc_id = static_cast<std::int64_t>(out.docs.size());
    out.docs.push_back(std::move(d));
  }
  return out;
}

Classifier remove_token_baseline(const Corpus& train, const FeatureSpec& spec,
                                 const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  Corpus stripped;
  stripped.meta = train.meta;
  stripped.docs.reserve(train.size());
  for (const auto& doc : train.docs) {
    stripped.docs.push_back(strip_feature_tokens(doc, spec));
  }
  Classifier c = train_classifier(stripped, cfg, fcfg);
  c.input_strip = spec;
  c.model.spec = spec;
  return c;
}

void write_jsonl(const CounterfactualCorpus& aug, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  nlohmann::ordered_json meta;
  meta["generator"] = "external";
  meta["kind"] = "counterfactual";
  nlohmann::ordered_json taus = nlohmann::ordered_json::array();
  for (const auto& [fid, tau] : aug.taus_by_feature) {
    nlohmann::ordered_json t;
    t["feature_id"] = fid;
    t["tau"] = tau;
    taus.push_back(std::move(t));
  }
  meta["taus"] = std::move(taus);
  nlohmann::ordered_json header;
  header["_meta"] = std::move(meta);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < aug.docs.size(); ++i) {
    const Document& d = aug.docs[i];
    nlohmann::ordered_json j;
    j["tokens"] = d.tokens;
    j["t"] = d.treatment;
    j["y"] = d.label;
    if (d.confounder.has_value()) j["w"] = *d.confounder;
    j["src_doc_id"] = aug.provenance[i].src_doc_id;
    j["flipped"] = aug.provenance[i].flipped;
    j["feature_id"] = aug.provenance[i].feature_id;
    out << j.dump() << '\n';
  }
}

}  // namespace feffect
