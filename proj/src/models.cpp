#include "feffect/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "feffect/rng.hpp"
#include "feffect/util.hpp"
#include "json.hpp"

namespace feffect {

namespace {

constexpr std::uint64_t kShuffleTag = 0x7368756666ULL;
constexpr std::uint64_t kShuffleAugTag = 0x61756773685fULL;
constexpr std::uint64_t kInitTag = 0x696e6974ULL;

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) - y*z, stable for large |z|.
double bce_from_logit(double logit, int y) {
  const double softplus = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                      : std::log1p(std::exp(logit));
  return softplus - static_cast<double>(y) * logit;
}

double sparse_dot(const WeightBlock& w, const SparseVec& x) {
  double s = 0.0;
  for (const auto& [idx, val] : x.entries) s += w.v[idx] * val;
  return w.scale * s;
}

}  // namespace

std::string mode_name(ModelMode m) { return m == ModelMode::linear ? "linear" : "mlp"; }

ModelMode mode_from_name(const std::string& name) {
  if (name == "linear") return ModelMode::linear;
  if (name == "mlp") return ModelMode::mlp;
  throw ConfigError("unknown model mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lambda_rr < 0.0) throw ConfigError("lambda_rr must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (eps_clip <= 0.0 || eps_clip > 0.1) throw ConfigError("eps_clip must lie in (0, 0.1]");
  if (mode == ModelMode::mlp && hidden < 1) throw ConfigError("hidden must be >= 1 in mlp mode");
}

void WeightBlock::decay(double factor) {
  scale *= factor;
  if (scale < 1e-8) fold();
}

void WeightBlock::fold() {
  for (double& x : v) x *= scale;
  scale = 1.0;
}

std::vector<double> WeightBlock::dense() const {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
  return out;
}

std::size_t TwoHeadModel::param_count() const {
  const std::size_t k = head_width();
  std::size_t n = 2 * k + 2;  // both heads
  if (mode == ModelMode::mlp) n += shared_w.size() + shared_b.size();
  return n;
}

TwoHeadModel init_two_head(const FeaturizerConfig& fcfg, const TrainConfig& cfg) {
  fcfg.validate();
  cfg.validate();
  TwoHeadModel m;
  m.mode = cfg.mode;
  m.hidden = cfg.mode == ModelMode::mlp ? cfg.hidden : 0;
  m.featurizer = fcfg;
  if (cfg.mode == ModelMode::mlp) {
    m.shared_w = WeightBlock(cfg.hidden * fcfg.dim);
    m.shared_b.assign(cfg.hidden, 0.0);
    Rng rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kInitTag);
    constexpr double r = 0.1;
    for (double& x : m.shared_w.v) x = (rng.next_double() * 2.0 - 1.0) * r;
  }
  m.g_w = WeightBlock(m.head_width());
  m.a_w = WeightBlock(m.head_width());
  return m;
}

namespace {

std::vector<double> hidden_forward(const TwoHeadModel& m, const SparseVec& x) {
  const std::size_t dim = m.featurizer.dim;
  std::vector<double> h(m.hidden);
  for (std::size_t t = 0; t < m.hidden; ++t) {
    double pre = m.shared_b[t];
    double s = 0.0;
    const std::size_t base = t * dim;
    for (const auto& [idx, val] : x.entries) s += m.shared_w.v[base + idx] * val;
    pre += m.shared_w.scale * s;
    h[t] = std::tanh(pre);
  }
  return h;
}

double head_value(const TwoHeadModel& m, const WeightBlock& w, double b, const SparseVec& x,
                  const std::vector<double>* h) {
  if (m.mode == ModelMode::linear) return sparse_dot(w, x) + b;
  double s = 0.0;
  for (std::size_t t = 0; t < m.hidden; ++t) s += w.v[t] * (*h)[t];
  return w.scale * s + b;
}

// Forward state for one document pass; h is empty in linear mode.
struct Pass {
  const SparseVec* x = nullptr;
  std::vector<double> h;
};

Pass make_pass(const TwoHeadModel& m, const SparseVec& x) {
  Pass p;
  p.x = &x;
  if (m.mode == ModelMode::mlp) p.h = hidden_forward(m, x);
  return p;
}

double g_value(const TwoHeadModel& m, const Pass& p) {
  return head_value(m, m.g_w, m.g_b, *p.x, &p.h);
}
double a_value(const TwoHeadModel& m, const Pass& p) {
  return head_value(m, m.a_w, m.a_b, *p.x, &p.h);
}

// Gradient accumulation. Sparse entries are stable-sorted by index and summed
// in that order before the update, so the arithmetic is order-independent of
// how documents landed in the batch buffer.
struct SparseSink {
  std::vector<std::pair<std::uint32_t, double>> shared_w, g_w, a_w;
  std::vector<double> shared_b;
  double g_b = 0.0, a_b = 0.0;

  void reset(std::size_t hidden) {
    shared_w.clear();
    g_w.clear();
    a_w.clear();
    shared_b.assign(hidden, 0.0);
    g_b = 0.0;
    a_b = 0.0;
  }
};

void backward_pass(const TwoHeadModel& m, const Pass& p, double cg, double ca,
                   SparseSink& sink) {
  if (cg == 0.0 && ca == 0.0) return;
  if (m.mode == ModelMode::linear) {
    for (const auto& [idx, val] : p.x->entries) {
      if (cg != 0.0) sink.g_w.emplace_back(idx, cg * val);
      if (ca != 0.0) sink.a_w.emplace_back(idx, ca * val);
    }
    sink.g_b += cg;
    sink.a_b += ca;
    return;
  }
  const std::size_t dim = m.featurizer.dim;
  for (std::size_t t = 0; t < m.hidden; ++t) {
    const double ht = p.h[t];
    if (cg != 0.0) sink.g_w.emplace_back(static_cast<std::uint32_t>(t), cg * ht);
    if (ca != 0.0) sink.a_w.emplace_back(static_cast<std::uint32_t>(t), ca * ht);
    const double dh = cg * m.g_w.scale * m.g_w.v[t] + ca * m.a_w.scale * m.a_w.v[t];
    const double dpre = dh * (1.0 - ht * ht);
    if (dpre == 0.0) continue;
    sink.shared_b[t] += dpre;
    const std::size_t base = t * dim;
    for (const auto& [idx, val] : p.x->entries) {
      sink.shared_w.emplace_back(static_cast<std::uint32_t>(base + idx), dpre * val);
    }
  }
  sink.g_b += cg;
  sink.a_b += ca;
}

void apply_entries(std::vector<std::pair<std::uint32_t, double>>& entries, WeightBlock& w,
                   double lr) {
  if (entries.empty()) return;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t i = 0;
  while (i < entries.size()) {
    const std::uint32_t idx = entries[i].first;
    double g = 0.0;
    while (i < entries.size() && entries[i].first == idx) g += entries[i++].second;
    w.v[idx] -= lr * g / w.scale;
  }
}

void sgd_step(TwoHeadModel& m, SparseSink& sink, double lr, double weight_decay) {
  if (weight_decay > 0.0) {
    const double f = 1.0 - lr * weight_decay;
    if (m.mode == ModelMode::mlp) m.shared_w.decay(f);
    m.g_w.decay(f);
    m.a_w.decay(f);
  }
  if (m.mode == ModelMode::mlp) {
    apply_entries(sink.shared_w, m.shared_w, lr);
    for (std::size_t t = 0; t < m.hidden; ++t) m.shared_b[t] -= lr * sink.shared_b[t];
  }
  apply_entries(sink.g_w, m.g_w, lr);
  apply_entries(sink.a_w, m.a_w, lr);
  m.g_b -= lr * sink.g_b;
  m.a_b -= lr * sink.a_b;
}

struct Snapshot {
  std::vector<double> shared_w, shared_b, g_w, a_w;
  double g_b = 0.0, a_b = 0.0;
};

Snapshot take_snapshot(const TwoHeadModel& m) {
  Snapshot s;
  if (m.mode == ModelMode::mlp) {
    s.shared_w = m.shared_w.dense();
    s.shared_b = m.shared_b;
  }
  s.g_w = m.g_w.dense();
  s.a_w = m.a_w.dense();
  s.g_b = m.g_b;
  s.a_b = m.a_b;
  return s;
}

void restore_snapshot(TwoHeadModel& m, const Snapshot& s) {
  if (m.mode == ModelMode::mlp) {
    m.shared_w.v = s.shared_w;
    m.shared_w.scale = 1.0;
    m.shared_b = s.shared_b;
  }
  m.g_w.v = s.g_w;
  m.g_w.scale = 1.0;
  m.a_w.v = s.a_w;
  m.a_w.scale = 1.0;
  m.g_b = s.g_b;
  m.a_b = s.a_b;
}

double mean_heldout_bce(const TwoHeadModel& m, const Corpus& corpus) {
  double s = 0.0;
  for (const auto& doc : corpus.docs) {
    const SparseVec x = featurize(doc, m.featurizer);
    const Pass p = make_pass(m, x);
    s += bce_from_logit(g_value(m, p), doc.label);
  }
  return s / static_cast<double>(corpus.size());
}

void check_treatment_groups(const Corpus& corpus) {
  if (corpus.empty()) throw TrainingError("training corpus is empty");
  bool has0 = false, has1 = false;
  for (const auto& d : corpus.docs) {
    (d.treatment == 1 ? has1 : has0) = true;
    if (has0 && has1) return;
  }
  throw TrainingError("both treatment values required in the training corpus");
}

std::size_t batch_count(std::size_t n, std::size_t batch_size) {
  return (n + batch_size - 1) / batch_size;
}

}  // namespace

double outcome_logit(const TwoHeadModel& m, const SparseVec& x) {
  const Pass p = make_pass(m, x);
  return g_value(m, p);
}

double predict_outcome(const TwoHeadModel& m, const Document& doc) {
  return sigmoid(outcome_logit(m, featurize(doc, m.featurizer)));
}

double predict_riesz(const TwoHeadModel& m, const Document& doc) {
  const SparseVec x = featurize(doc, m.featurizer);
  const Pass p = make_pass(m, x);
  return a_value(m, p);
}

double predict_propensity_raw(const PropensityModel& m, const Document& doc) {
  const SparseVec x = featurize(strip_feature_tokens(doc, m.spec), m.featurizer);
  return sigmoid(sparse_dot(m.w, x) + m.b);
}

double predict_propensity(const PropensityModel& m, const Document& doc) {
  return std::clamp(predict_propensity_raw(m, doc), m.eps_clip, 1.0 - m.eps_clip);
}

double riesz_loss(const TwoHeadModel& m, const std::vector<Document>& batch,
                  const FeatureSpec& spec) {
  if (batch.empty()) throw TrainingError("riesz_loss needs a non-empty batch");
  double s = 0.0;
  for (const auto& doc : batch) {
    const double af = predict_riesz(m, doc);
    const double a1 = predict_riesz(m, with_feature_forced(doc, spec, 1));
    const double a0 = predict_riesz(m, with_feature_forced(doc, spec, 0));
    s += -2.0 * (a1 - a0) + af * af;
  }
  return s / static_cast<double>(batch.size());
}

double bce_loss(const TwoHeadModel& m, const std::vector<Document>& batch) {
  if (batch.empty()) throw TrainingError("bce_loss needs a non-empty batch");
  double s = 0.0;
  for (const auto& doc : batch) {
    s += bce_from_logit(outcome_logit(m, featurize(doc, m.featurizer)), doc.label);
  }
  return s / static_cast<double>(batch.size());
}

double effect_penalty(const TwoHeadModel& m, const std::vector<Document>& batch,
                      const std::vector<FeatureSpec>& specs, const std::vector<double>& taus) {
  if (batch.empty()) throw TrainingError("effect_penalty needs a non-empty batch");
  if (specs.size() != taus.size() || specs.empty()) {
    throw ConfigError("effect_penalty needs matching non-empty spec and tau lists");
  }
  const double b = static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    double s = 0.0;
    for (const auto& doc : batch) {
      const double p1 = predict_outcome(m, with_feature_forced(doc, specs[j], 1));
      const double p0 = predict_outcome(m, with_feature_forced(doc, specs[j], 0));
      s += p1 - p0;
    }
    const double d = s / b - taus[j];
    total += d * d;
  }
  return total / static_cast<double>(specs.size());
}

// --------------------------------------------------------------------------
// Flat-parameter view and dense loss gradients (finite-difference oracle).

std::vector<double> flat_params(const TwoHeadModel& m) {
  std::vector<double> p;
  p.reserve(m.param_count());
  if (m.mode == ModelMode::mlp) {
    const auto sw = m.shared_w.dense();
    p.insert(p.end(), sw.begin(), sw.end());
    p.insert(p.end(), m.shared_b.begin(), m.shared_b.end());
  }
  const auto gw = m.g_w.dense();
  p.insert(p.end(), gw.begin(), gw.end());
  p.push_back(m.g_b);
  const auto aw = m.a_w.dense();
  p.insert(p.end(), aw.begin(), aw.end());
  p.push_back(m.a_b);
  return p;
}

void set_flat_params(TwoHeadModel& m, const std::vector<double>& p) {
  if (p.size() != m.param_count()) throw ConfigError("flat parameter vector has the wrong size");
  std::size_t off = 0;
  if (m.mode == ModelMode::mlp) {
    m.shared_w.scale = 1.0;
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(m.shared_w.size()),
              m.shared_w.v.begin());
    off += m.shared_w.size();
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(off),
              p.begin() + static_cast<std::ptrdiff_t>(off + m.shared_b.size()),
              m.shared_b.begin());
    off += m.shared_b.size();
  }
  const std::size_t k = m.head_width();
  m.g_w.scale = 1.0;
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(off),
            p.begin() + static_cast<std::ptrdiff_t>(off + k), m.g_w.v.begin());
  off += k;
  m.g_b = p[off++];
  m.a_w.scale = 1.0;
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(off),
            p.begin() + static_cast<std::ptrdiff_t>(off + k), m.a_w.v.begin());
  off += k;
  m.a_b = p[off];
}

namespace {

// Adapter writing sparse backward contributions into the flat dense layout.
struct DenseLayout {
  const TwoHeadModel* m;
  std::size_t off_shared_w = 0, off_shared_b = 0, off_g_w = 0, off_g_b = 0, off_a_w = 0,
              off_a_b = 0;

  explicit DenseLayout(const TwoHeadModel& model) : m(&model) {
    std::size_t off = 0;
    if (m->mode == ModelMode::mlp) {
      off_shared_w = off;
      off += m->shared_w.size();
      off_shared_b = off;
      off += m->shared_b.size();
    }
    const std::size_t k = m->head_width();
    off_g_w = off;
    off += k;
    off_g_b = off++;
    off_a_w = off;
    off += k;
    off_a_b = off;
  }

  void scatter(const SparseSink& sink, std::vector<double>& grad) const {
    for (const auto& [idx, g] : sink.shared_w) grad[off_shared_w + idx] += g;
    for (std::size_t t = 0; t < sink.shared_b.size(); ++t) grad[off_shared_b + t] += sink.shared_b[t];
    for (const auto& [idx, g] : sink.g_w) grad[off_g_w + idx] += g;
    for (const auto& [idx, g] : sink.a_w) grad[off_a_w + idx] += g;
    grad[off_g_b] += sink.g_b;
    grad[off_a_b] += sink.a_b;
  }
};

}  // namespace

LossGrad bce_loss_grad(const TwoHeadModel& m, const std::vector<Document>& batch) {
  LossGrad out;
  out.grad.assign(m.param_count(), 0.0);
  SparseSink sink;
  sink.reset(m.hidden);
  const double b = static_cast<double>(batch.size());
  for (const auto& doc : batch) {
    const SparseVec x = featurize(doc, m.featurizer);
    const Pass p = make_pass(m, x);
    const double logit = g_value(m, p);
    out.value += bce_from_logit(logit, doc.label) / b;
    backward_pass(m, p, (sigmoid(logit) - doc.label) / b, 0.0, sink);
  }
  DenseLayout(m).scatter(sink, out.grad);
  return out;
}

LossGrad riesz_loss_grad(const TwoHeadModel& m, const std::vector<Document>& batch,
                         const FeatureSpec& spec) {
  LossGrad out;
  out.grad.assign(m.param_count(), 0.0);
  SparseSink sink;
  sink.reset(m.hidden);
  const double b = static_cast<double>(batch.size());
  for (const auto& doc : batch) {
    const SparseVec xf = featurize(doc, m.featurizer);
    const SparseVec x1 = featurize(with_feature_forced(doc, spec, 1), m.featurizer);
    const SparseVec x0 = featurize(with_feature_forced(doc, spec, 0), m.featurizer);
    const Pass pf = make_pass(m, xf);
    const Pass p1 = make_pass(m, x1);
    const Pass p0 = make_pass(m, x0);
    const double af = a_value(m, pf);
    const double a1 = a_value(m, p1);
    const double a0 = a_value(m, p0);
    out.value += (-2.0 * (a1 - a0) + af * af) / b;
    backward_pass(m, pf, 0.0, 2.0 * af / b, sink);
    backward_pass(m, p1, 0.0, -2.0 / b, sink);
    backward_pass(m, p0, 0.0, 2.0 / b, sink);
  }
  DenseLayout(m).scatter(sink, out.grad);
  return out;
}

LossGrad effect_penalty_grad(const TwoHeadModel& m, const std::vector<Document>& batch,
                             const std::vector<FeatureSpec>& specs,
                             const std::vector<double>& taus) {
  if (specs.size() != taus.size() || specs.empty()) {
    throw ConfigError("effect_penalty needs matching non-empty spec and tau lists");
  }
  LossGrad out;
  out.grad.assign(m.param_count(), 0.0);
  SparseSink sink;
  sink.reset(m.hidden);
  const double b = static_cast<double>(batch.size());
  const double mm = static_cast<double>(specs.size());
  for (std::size_t j = 0; j < specs.size(); ++j) {
    std::vector<Pass> p1(batch.size()), p0(batch.size());
    std::vector<SparseVec> x1(batch.size()), x0(batch.size());
    std::vector<double> prob1(batch.size()), prob0(batch.size());
    double s = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      x1[i] = featurize(with_feature_forced(batch[i], specs[j], 1), m.featurizer);
      x0[i] = featurize(with_feature_forced(batch[i], specs[j], 0), m.featurizer);
      p1[i] = make_pass(m, x1[i]);
      p0[i] = make_pass(m, x0[i]);
      prob1[i] = sigmoid(g_value(m, p1[i]));
      prob0[i] = sigmoid(g_value(m, p0[i]));
      s += prob1[i] - prob0[i];
    }
    const double d = s / b - taus[j];
    out.value += d * d / mm;
    const double c = 2.0 * d / (mm * b);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      backward_pass(m, p1[i], c * prob1[i] * (1.0 - prob1[i]), 0.0, sink);
      backward_pass(m, p0[i], -c * prob0[i] * (1.0 - prob0[i]), 0.0, sink);
    }
  }
  DenseLayout(m).scatter(sink, out.grad);
  return out;
}

// --------------------------------------------------------------------------
// Training loops.

TwoHeadModel train_two_head(const Corpus& train, const FeatureSpec& spec, const TrainConfig& cfg,
                            const FeaturizerConfig& fcfg, const Corpus* heldout) {
  cfg.validate();
  check_treatment_groups(train);
  TwoHeadModel m = init_two_head(fcfg, cfg);
  m.spec = spec;

  const std::size_t n = train.size();
  std::vector<SparseVec> xf(n), x1(n), x0(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Document& doc = train.docs[i];
    xf[i] = featurize(doc, fcfg);
    x1[i] = featurize(with_feature_forced(doc, spec, 1), fcfg);
    x0[i] = featurize(with_feature_forced(doc, spec, 0), fcfg);
    y[i] = doc.label;
  }

  Rng order_rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kShuffleTag);
  const std::size_t batches = batch_count(n, cfg.batch_size);
  const double total_iters = static_cast<double>(cfg.epochs * batches);
  std::size_t iter = 0;
  SparseSink sink;
  Snapshot best;
  double best_bce = std::numeric_limits<double>::infinity();

  Corpus internal_heldout;
  const Corpus* sel = heldout;
  if (cfg.select_best && sel == nullptr) {
    // Carve a 10% selection set so the paper-style rule stays self-contained.
    auto parts = split_two(train, 0.9, cfg.seed);
    internal_heldout = std::move(parts.second);
    sel = &internal_heldout;
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = permutation(n, order_rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const double bsz = static_cast<double>(hi - lo);
      const double lr_t = cfg.lr * (1.0 - static_cast<double>(iter) / total_iters);
      sink.reset(m.hidden);
      double loss = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = perm[k];
        const Pass pf = make_pass(m, xf[i]);
        const double logit = g_value(m, pf);
        loss += bce_from_logit(logit, y[i]) / bsz;
        const double cg = (sigmoid(logit) - y[i]) / bsz;
        if (cfg.lambda_rr > 0.0) {
          const Pass p1 = make_pass(m, x1[i]);
          const Pass p0 = make_pass(m, x0[i]);
          const double af = a_value(m, pf);
          const double a1 = a_value(m, p1);
          const double a0 = a_value(m, p0);
          loss += cfg.lambda_rr * (-2.0 * (a1 - a0) + af * af) / bsz;
          backward_pass(m, pf, cg, cfg.lambda_rr * 2.0 * af / bsz, sink);
          backward_pass(m, p1, 0.0, -cfg.lambda_rr * 2.0 / bsz, sink);
          backward_pass(m, p0, 0.0, cfg.lambda_rr * 2.0 / bsz, sink);
        } else {
          backward_pass(m, pf, cg, 0.0, sink);
        }
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(b));
      }
      sgd_step(m, sink, lr_t, cfg.weight_decay);
      ++iter;
    }
    if (cfg.select_best && sel != nullptr) {
      const double h = mean_heldout_bce(m, *sel);
      if (h < best_bce) {
        best_bce = h;
        best = take_snapshot(m);
      }
    }
  }
  if (cfg.select_best && std::isfinite(best_bce)) restore_snapshot(m, best);
  return m;
}

PropensityModel train_propensity(const Corpus& train, const FeatureSpec& spec,
                                 const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  cfg.validate();
  fcfg.validate();
  check_treatment_groups(train);

  PropensityModel m;
  m.featurizer = fcfg;
  m.spec = spec;
  m.eps_clip = cfg.eps_clip;
  m.w = WeightBlock(fcfg.dim);

  const std::size_t n = train.size();
  std::vector<SparseVec> xc(n);
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    xc[i] = featurize(strip_feature_tokens(train.docs[i], spec), fcfg);
    t[i] = train.docs[i].treatment;
  }

  Rng order_rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kShuffleTag);
  const std::size_t batches = batch_count(n, cfg.batch_size);
  const double total_iters = static_cast<double>(cfg.epochs * batches);
  std::size_t iter = 0;
  std::vector<std::pair<std::uint32_t, double>> grads;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = permutation(n, order_rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const double bsz = static_cast<double>(hi - lo);
      const double lr_t = cfg.lr * (1.0 - static_cast<double>(iter) / total_iters);
      grads.clear();
      double bias_grad = 0.0;
      double loss = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = perm[k];
        const double logit = sparse_dot(m.w, xc[i]) + m.b;
        loss += bce_from_logit(logit, t[i]) / bsz;
        const double c = (sigmoid(logit) - t[i]) / bsz;
        for (const auto& [idx, val] : xc[i].entries) grads.emplace_back(idx, c * val);
        bias_grad += c;
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("propensity training diverged at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(b));
      }
      if (cfg.weight_decay > 0.0) m.w.decay(1.0 - lr_t * cfg.weight_decay);
      apply_entries(grads, m.w, lr_t);
      m.b -= lr_t * bias_grad;
      ++iter;
    }
  }
  return m;
}

namespace {

struct WeightedSample {
  const SparseVec* x;
  int y;
  double weight;
};

// BCE trainer over originals plus an optional weighted augmented block.
// Originals are shuffled with the plain-training stream; the augmented block
// is shuffled with its own stream and appended after them each epoch.
TwoHeadModel train_weighted_bce(const std::vector<WeightedSample>& originals,
                                const std::vector<WeightedSample>& augmented,
                                const TrainConfig& cfg, const FeaturizerConfig& fcfg,
                                const Corpus* heldout) {
  cfg.validate();
  TwoHeadModel m = init_two_head(fcfg, cfg);

  const std::size_t n = originals.size();
  const std::size_t n_aug = augmented.size();
  const std::size_t total = n + n_aug;
  Rng order_rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kShuffleTag);
  Rng aug_rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kShuffleAugTag);
  const std::size_t batches = batch_count(total, cfg.batch_size);
  const double total_iters = static_cast<double>(cfg.epochs * batches);
  std::size_t iter = 0;
  SparseSink sink;
  Snapshot best;
  double best_bce = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(total);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = permutation(n, order_rng);
    std::copy(perm.begin(), perm.end(), order.begin());
    if (n_aug > 0) {
      auto aug_perm = permutation(n_aug, aug_rng);
      for (std::size_t k = 0; k < n_aug; ++k) order[n + k] = n + aug_perm[k];
    }
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(total, lo + cfg.batch_size);
      const double bsz = static_cast<double>(hi - lo);
      const double lr_t = cfg.lr * (1.0 - static_cast<double>(iter) / total_iters);
      sink.reset(m.hidden);
      double loss = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = order[k];
        const WeightedSample& s = i < n ? originals[i] : augmented[i - n];
        const Pass p = make_pass(m, *s.x);
        const double logit = g_value(m, p);
        loss += s.weight * bce_from_logit(logit, s.y) / bsz;
        backward_pass(m, p, s.weight * (sigmoid(logit) - s.y) / bsz, 0.0, sink);
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(b));
      }
      sgd_step(m, sink, lr_t, cfg.weight_decay);
      ++iter;
    }
    if (cfg.select_best && heldout != nullptr) {
      const double h = mean_heldout_bce(m, *heldout);
      if (h < best_bce) {
        best_bce = h;
        best = take_snapshot(m);
      }
    }
  }
  if (cfg.select_best && std::isfinite(best_bce)) restore_snapshot(m, best);
  return m;
}

}  // namespace

double Classifier::predict(const Document& doc) const {
  if (input_strip.has_value()) {
    return predict_outcome(model, strip_feature_tokens(doc, *input_strip));
  }
  return predict_outcome(model, doc);
}

Classifier train_classifier(const Corpus& train, const TrainConfig& cfg,
                            const FeaturizerConfig& fcfg, const Corpus* heldout) {
  if (train.empty()) throw TrainingError("training corpus is empty");
  const std::size_t n = train.size();
  std::vector<SparseVec> xs(n);
  std::vector<WeightedSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = featurize(train.docs[i], fcfg);
    samples[i] = {&xs[i], train.docs[i].label, 1.0};
  }
  Classifier c;
  c.model = train_weighted_bce(samples, {}, cfg, fcfg, heldout);
  return c;
}

// train_feag and train_regularized live in feag.cpp; they reuse the weighted
// trainer through this internal hook.
namespace detail {

TwoHeadModel train_weighted_bce_impl(const std::vector<const SparseVec*>& orig_x,
                                     const std::vector<int>& orig_y,
                                     const std::vector<const SparseVec*>& aug_x,
                                     const std::vector<int>& aug_y, double aug_weight,
                                     const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  std::vector<WeightedSample> originals(orig_x.size());
  for (std::size_t i = 0; i < orig_x.size(); ++i) originals[i] = {orig_x[i], orig_y[i], 1.0};
  std::vector<WeightedSample> augmented(aug_x.size());
  for (std::size_t i = 0; i < aug_x.size(); ++i) augmented[i] = {aug_x[i], aug_y[i], aug_weight};
  return train_weighted_bce(originals, augmented, cfg, fcfg, nullptr);
}

TwoHeadModel train_regularized_impl(const Corpus& train, const std::vector<FeatureSpec>& specs,
                                    const std::vector<double>& taus, double lambda,
                                    const TrainConfig& cfg, const FeaturizerConfig& fcfg) {
  cfg.validate();
  if (train.empty()) throw TrainingError("training corpus is empty");
  if (specs.size() != taus.size() || specs.empty()) {
    throw ConfigError("regularized training needs matching non-empty spec and tau lists");
  }
  TwoHeadModel m = init_two_head(fcfg, cfg);

  const std::size_t n = train.size();
  const std::size_t nf = specs.size();
  std::vector<SparseVec> xf(n);
  std::vector<int> y(n);
  // Counterfactual feature caches, one (forced-1, forced-0) pair per feature.
  std::vector<std::vector<SparseVec>> cx1(nf, std::vector<SparseVec>(n));
  std::vector<std::vector<SparseVec>> cx0(nf, std::vector<SparseVec>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Document& doc = train.docs[i];
    xf[i] = featurize(doc, fcfg);
    y[i] = doc.label;
    for (std::size_t j = 0; j < nf; ++j) {
      cx1[j][i] = featurize(with_feature_forced(doc, specs[j], 1), fcfg);
      cx0[j][i] = featurize(with_feature_forced(doc, specs[j], 0), fcfg);
    }
  }

  Rng order_rng = Rng::stream(static_cast<std::uint64_t>(cfg.seed), kShuffleTag);
  const std::size_t batches = batch_count(n, cfg.batch_size);
  const double total_iters = static_cast<double>(cfg.epochs * batches);
  std::size_t iter = 0;
  SparseSink sink;
  std::vector<Pass> p1, p0;
  std::vector<double> prob1, prob0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = permutation(n, order_rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const double bsz = static_cast<double>(hi - lo);
      const double lr_t = cfg.lr * (1.0 - static_cast<double>(iter) / total_iters);
      sink.reset(m.hidden);
      double loss = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = perm[k];
        const Pass pf = make_pass(m, xf[i]);
        const double logit = g_value(m, pf);
        loss += bce_from_logit(logit, y[i]) / bsz;
        backward_pass(m, pf, (sigmoid(logit) - y[i]) / bsz, 0.0, sink);
      }
      if (lambda > 0.0) {
        const double mm = static_cast<double>(nf);
        for (std::size_t j = 0; j < nf; ++j) {
          p1.clear();
          p0.clear();
          prob1.clear();
          prob0.clear();
          double s = 0.0;
          for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t i = perm[k];
            p1.push_back(make_pass(m, cx1[j][i]));
            p0.push_back(make_pass(m, cx0[j][i]));
            prob1.push_back(sigmoid(g_value(m, p1.back())));
            prob0.push_back(sigmoid(g_value(m, p0.back())));
            s += prob1.back() - prob0.back();
          }
          const double d = s / bsz - taus[j];
          loss += lambda * d * d / mm;
          const double c = lambda * 2.0 * d / (mm * bsz);
          for (std::size_t k = 0; k < p1.size(); ++k) {
            backward_pass(m, p1[k], c * prob1[k] * (1.0 - prob1[k]), 0.0, sink);
            backward_pass(m, p0[k], -c * prob0[k] * (1.0 - prob0[k]), 0.0, sink);
          }
        }
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(b));
      }
      sgd_step(m, sink, lr_t, cfg.weight_decay);
      ++iter;
    }
  }
  return m;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Serialization. JSON with a version field; weights stored scale-folded.

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json spec_to_json(const FeatureSpec& spec) {
  ordered_json j;
  j["feature_id"] = spec.feature_id;
  j["spec"] = spec.to_string();
  return j;
}

FeatureSpec spec_from_json(const ordered_json& j) {
  return FeatureSpec::parse(j.at("feature_id").get<int>(), j.at("spec").get<std::string>());
}

}  // namespace

void save_classifier(const Classifier& c, const std::string& path) {
  const TwoHeadModel& m = c.model;
  ordered_json j;
  j["format"] = "feffect-model";
  j["version"] = 1;
  j["mode"] = mode_name(m.mode);
  j["dim"] = m.featurizer.dim;
  j["hidden"] = m.hidden;
  j["hash_seed"] = m.featurizer.hash_seed;
  j["tf_mode"] = m.featurizer.tf_mode == FeaturizerConfig::TfMode::binary ? "binary" : "counts";
  if (m.spec.has_value()) j["feature"] = spec_to_json(*m.spec);
  if (c.input_strip.has_value()) j["input_strip"] = spec_to_json(*c.input_strip);
  ordered_json w;
  if (m.mode == ModelMode::mlp) {
    w["shared_w"] = m.shared_w.dense();
    w["shared_b"] = m.shared_b;
  }
  w["g_w"] = m.g_w.dense();
  w["g_b"] = m.g_b;
  w["a_w"] = m.a_w.dense();
  w["a_b"] = m.a_b;
  j["weights"] = std::move(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

Classifier load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file parse error: ") + e.what());
  }
  if (!j.contains("format") || j.at("format").get<std::string>() != "feffect-model") {
    throw SchemaError("not a feffect model file: " + path);
  }
  if (j.at("version").get<int>() != 1) {
    throw SchemaError("unsupported model file version");
  }
  Classifier c;
  TwoHeadModel& m = c.model;
  m.mode = mode_from_name(j.at("mode").get<std::string>());
  m.hidden = j.at("hidden").get<std::size_t>();
  m.featurizer.dim = j.at("dim").get<std::uint32_t>();
  m.featurizer.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  m.featurizer.tf_mode = j.at("tf_mode").get<std::string>() == "counts"
                             ? FeaturizerConfig::TfMode::counts
                             : FeaturizerConfig::TfMode::binary;
  if (j.contains("feature")) m.spec = spec_from_json(j.at("feature"));
  if (j.contains("input_strip")) c.input_strip = spec_from_json(j.at("input_strip"));
  const auto& w = j.at("weights");
  if (m.mode == ModelMode::mlp) {
    m.shared_w.v = w.at("shared_w").get<std::vector<double>>();
    m.shared_w.scale = 1.0;
    m.shared_b = w.at("shared_b").get<std::vector<double>>();
    if (m.shared_w.size() != m.hidden * m.featurizer.dim || m.shared_b.size() != m.hidden) {
      throw SchemaError("model weight shapes do not match the header");
    }
  }
  m.g_w.v = w.at("g_w").get<std::vector<double>>();
  m.g_w.scale = 1.0;
  m.g_b = w.at("g_b").get<double>();
  m.a_w.v = w.at("a_w").get<std::vector<double>>();
  m.a_w.scale = 1.0;
  m.a_b = w.at("a_b").get<double>();
  if (m.g_w.size() != m.head_width() || m.a_w.size() != m.head_width()) {
    throw SchemaError("model weight shapes do not match the header");
  }
  return c;
}

}  // namespace feffect
