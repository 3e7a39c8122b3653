#include "feffect/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "feffect/rng.hpp"
#include "json.hpp"

namespace feffect {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDocStreamTag = 0x5353646f63ULL;    // per-document draws
constexpr std::uint64_t kSplitStreamTag = 0x73706c6974ULL;  // split shuffles

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate_vocab(const VocabConfig& v) {
  require(!v.w1_pool.empty(), "vocab.w1_pool must be non-empty");
  require(!v.w0_pool.empty(), "vocab.w0_pool must be non-empty");
  require(!v.neutral_pool.empty(), "vocab.neutral_pool must be non-empty");
  require(!v.treated_token.empty() && !v.untreated_token.empty(),
          "vocab treated/untreated tokens must be non-empty");
  require(v.treated_token != v.untreated_token,
          "vocab.treated_token must differ from vocab.untreated_token");

  std::set<std::string> seen;
  for (const auto* pool : {&v.w1_pool, &v.w0_pool, &v.neutral_pool}) {
    for (const auto& tok : *pool) {
      require(seen.insert(tok).second, "vocab pools must be pairwise disjoint (duplicate: " + tok + ")");
      require(tok != v.treated_token && tok != v.untreated_token,
              "treated/untreated tokens must appear in no pool (found: " + tok + ")");
    }
  }
}

struct RawDoc {
  Document doc;
  int w = 0;
};

// Covariate side shared by both generators: W, pool-drawn tokens, base label.
RawDoc draw_covariates(Rng& rng, const VocabConfig& vocab, double signal_strength,
                       double base_label_acc, std::size_t tokens_per_doc) {
  RawDoc r;
  r.w = rng.bernoulli(0.5) ? 1 : 0;
  r.doc.tokens.reserve(tokens_per_doc + 2);
  for (std::size_t k = 0; k < tokens_per_doc; ++k) {
    const bool use_signal = rng.bernoulli(signal_strength);
    const auto& pool =
        use_signal ? (r.w == 1 ? vocab.w1_pool : vocab.w0_pool) : vocab.neutral_pool;
    r.doc.tokens.push_back(pool[rng.below(pool.size())]);
  }
  const int base_y = rng.bernoulli(base_label_acc) ? r.w : 1 - r.w;
  r.doc.label = base_y;
  r.doc.confounder = r.w;
  return r;
}

ordered_json doc_to_json(const Document& d) {
  ordered_json j;
  j["tokens"] = d.tokens;
  j["t"] = d.treatment;
  j["y"] = d.label;
  if (d.confounder.has_value()) j["w"] = *d.confounder;
  return j;
}

int read_bit(const ordered_json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key)) {
    throw SchemaError("line " + std::to_string(line_no) + ": missing required key '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
    throw SchemaError("line " + std::to_string(line_no) + ": key '" + key + "' must be 0 or 1");
  }
  return v.get<int>();
}

}  // namespace

std::string generator_name(Generator g) {
  switch (g) {
    case Generator::ss: return "ss";
    case Generator::subsampled: return "subsampled";
    case Generator::external: return "external";
  }
  return "external";
}

Generator generator_from_name(const std::string& name) {
  if (name == "ss") return Generator::ss;
  if (name == "subsampled") return Generator::subsampled;
  if (name == "external") return Generator::external;
  throw SchemaError("unknown generator '" + name + "'");
}

VocabConfig default_vocab() {
  VocabConfig v;
  for (char c = 'a'; c <= 'h'; ++c) {
    v.w1_pool.push_back(std::string("w1") + c);
    v.w0_pool.push_back(std::string("w0") + c);
    v.neutral_pool.push_back(std::string("n") + c);
  }
  return v;
}

void GenConfigSS::validate() const {
  require(n >= 1, "n must be >= 1");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(eps > 0.0 && eps <= 0.5, "eps must lie in (0, 0.5]");
  require(signal_strength > 0.5 && signal_strength <= 1.0,
          "signal_strength must lie in (0.5, 1]");
  require(base_label_acc > 0.5 && base_label_acc <= 1.0,
          "base_label_acc must lie in (0.5, 1]");
  require(tokens_per_doc >= 1, "tokens_per_doc must be >= 1");
  validate_vocab(vocab);
  if (effect_token.has_value()) {
    require(!effect_token->token.empty(), "effect_token.token must be non-empty");
    require(effect_token->delta >= 0.0, "effect_token.delta must be >= 0");
    require(tau + effect_token->delta <= 1.0, "tau + effect_token.delta must be <= 1");
    require(effect_token->p_present > 0.0 && effect_token->p_present <= 1.0,
            "effect_token.p_present must lie in (0, 1]");
    require(effect_token->token != vocab.treated_token && effect_token->token != vocab.untreated_token,
            "effect_token.token must differ from the treatment tokens");
  }
}

void GenConfigSub::validate() const {
  require(n_raw >= 1, "n_raw must be >= 1");
  require(!trigger_token.empty(), "trigger_token must be non-empty");
  require(keep_t1_w0 > 0.0 && keep_t1_w0 <= 1.0, "keep_t1_w0 must lie in (0, 1]");
  require(keep_t0 > 0.0 && keep_t0 <= 1.0, "keep_t0 must lie in (0, 1]");
  require(p_trigger_w1 > 0.0 && p_trigger_w1 < 1.0, "p_trigger_w1 must lie in (0, 1)");
  require(p_trigger_w0 > 0.0 && p_trigger_w0 < 1.0, "p_trigger_w0 must lie in (0, 1)");
  require(signal_strength > 0.5 && signal_strength <= 1.0,
          "signal_strength must lie in (0.5, 1]");
  require(base_label_acc > 0.5 && base_label_acc <= 1.0,
          "base_label_acc must lie in (0.5, 1]");
  require(tokens_per_doc >= 1, "tokens_per_doc must be >= 1");
  validate_vocab(vocab);
  for (const auto* pool : {&vocab.w1_pool, &vocab.w0_pool, &vocab.neutral_pool}) {
    for (const auto& tok : *pool) {
      require(tok != trigger_token, "trigger_token must appear in no pool");
    }
  }
}

Corpus generate_ss(const GenConfigSS& cfg, std::int64_t seed) {
  cfg.validate();
  Corpus corpus;
  corpus.docs.reserve(cfg.n);
  corpus.meta.generator = Generator::ss;
  corpus.meta.true_tau = cfg.tau;
  corpus.meta.overlap_eps = cfg.eps;
  corpus.meta.seed = seed;

  const double delta = cfg.effect_token ? cfg.effect_token->delta : 0.0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng = Rng::stream(Rng::mix(static_cast<std::uint64_t>(seed), kDocStreamTag), i);
    RawDoc r = draw_covariates(rng, cfg.vocab, cfg.signal_strength, cfg.base_label_acc,
                               cfg.tokens_per_doc);
    const int base_y = r.doc.label;
    const bool flip = rng.bernoulli(cfg.eps);
    const int t = flip ? 1 - r.w : r.w;

    int hook = 0;
    if (cfg.effect_token && rng.bernoulli(cfg.effect_token->p_present)) {
      hook = 1;
      r.doc.tokens.push_back(cfg.effect_token->token);
    }

    const double q = (1.0 - cfg.tau - delta) * base_y + cfg.tau * t + delta * hook;
    r.doc.label = rng.bernoulli(q) ? 1 : 0;
    r.doc.treatment = t;
    r.doc.tokens.insert(r.doc.tokens.begin(),
                        t == 1 ? cfg.vocab.treated_token : cfg.vocab.untreated_token);
    r.doc.doc_id = static_cast<std::int64_t>(i);
    corpus.docs.push_back(std::move(r.doc));
  }
  return corpus;
}

Corpus generate_subsampled(const GenConfigSub& cfg, std::int64_t seed) {
  cfg.validate();
  Corpus corpus;
  corpus.meta.generator = Generator::subsampled;
  // Labels are the base labels: the trigger token has zero causal effect.
  corpus.meta.true_tau = 0.0;
  corpus.meta.seed = seed;

  for (std::size_t i = 0; i < cfg.n_raw; ++i) {
    Rng rng = Rng::stream(Rng::mix(static_cast<std::uint64_t>(seed), kDocStreamTag), i);
    RawDoc r = draw_covariates(rng, cfg.vocab, cfg.signal_strength, cfg.base_label_acc,
                               cfg.tokens_per_doc);
    const double p_trigger = r.w == 1 ? cfg.p_trigger_w1 : cfg.p_trigger_w0;
    const int t = rng.bernoulli(p_trigger) ? 1 : 0;
    if (t == 1) r.doc.tokens.insert(r.doc.tokens.begin(), cfg.trigger_token);
    r.doc.treatment = t;

    double keep_p = 1.0;
    if (t == 1 && r.w == 0) keep_p = cfg.keep_t1_w0;
    if (t == 0) keep_p = cfg.keep_t0;
    if (!rng.bernoulli(keep_p)) continue;

    r.doc.doc_id = static_cast<std::int64_t>(corpus.docs.size());
    corpus.docs.push_back(std::move(r.doc));
  }

  std::array<std::size_t, 4> cells{};
  for (const auto& d : corpus.docs) cells[d.label * 2 + d.treatment]++;
  for (int y = 0; y < 2; ++y) {
    for (int t = 0; t < 2; ++t) {
      if (cells[y * 2 + t] == 0) {
        throw GenerationError("subsampled corpus has an empty (Y=" + std::to_string(y) +
                              ",T=" + std::to_string(t) + ") group; increase n_raw or keep fractions");
      }
    }
  }
  return corpus;
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  ordered_json meta;
  if (corpus.meta.true_tau.has_value()) meta["true_tau"] = *corpus.meta.true_tau;
  if (corpus.meta.overlap_eps.has_value()) meta["overlap_eps"] = *corpus.meta.overlap_eps;
  meta["generator"] = generator_name(corpus.meta.generator);
  meta["seed"] = corpus.meta.seed;
  ordered_json header;
  header["_meta"] = meta;
  out << header.dump() << '\n';
  for (const auto& d : corpus.docs) {
    out << doc_to_json(d).dump() << '\n';
  }
}

void write_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  write_jsonl(corpus, out);
}

Corpus read_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected a JSON object");
    }
    if (line_no == 1 && j.contains("_meta")) {
      const auto& m = j.at("_meta");
      if (m.contains("true_tau")) corpus.meta.true_tau = m.at("true_tau").get<double>();
      if (m.contains("overlap_eps")) corpus.meta.overlap_eps = m.at("overlap_eps").get<double>();
      if (m.contains("generator")) {
        corpus.meta.generator = generator_from_name(m.at("generator").get<std::string>());
      }
      if (m.contains("seed")) corpus.meta.seed = m.at("seed").get<std::int64_t>();
      saw_header = true;
      continue;
    }
    Document d;
    if (!j.contains("tokens")) {
      throw SchemaError("line " + std::to_string(line_no) + ": missing required key 'tokens'");
    }
    if (!j.at("tokens").is_array()) {
      throw SchemaError("line " + std::to_string(line_no) + ": 'tokens' must be an array of strings");
    }
    for (const auto& tok : j.at("tokens")) {
      if (!tok.is_string()) {
        throw SchemaError("line " + std::to_string(line_no) + ": 'tokens' must contain only strings");
      }
      d.tokens.push_back(tok.get<std::string>());
    }
    if (d.tokens.empty()) {
      throw SchemaError("line " + std::to_string(line_no) + ": 'tokens' must be non-empty");
    }
    d.treatment = read_bit(j, "t", line_no);
    d.label = read_bit(j, "y", line_no);
    if (j.contains("w")) d.confounder = read_bit(j, "w", line_no);
    d.doc_id = static_cast<std::int64_t>(corpus.docs.size());
    corpus.docs.push_back(std::move(d));
  }
  if (corpus.meta.generator != Generator::external && !corpus.meta.true_tau.has_value()) {
    throw SchemaError("synthetic corpus header must carry true_tau");
  }
  (void)saw_header;
  return corpus;
}

Corpus read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  return read_jsonl(in);
}

namespace {

Corpus take_indices(const Corpus& corpus, const std::vector<std::size_t>& perm,
                    std::size_t begin, std::size_t count) {
  Corpus part;
  part.meta = corpus.meta;
  part.docs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Document d = corpus.docs[perm[begin + k]];
    d.doc_id = static_cast<std::int64_t>(k);
    part.docs.push_back(std::move(d));
  }
  return part;
}

}  // namespace

SplitResult split(const Corpus& corpus, double f_train, double f_heldout, double f_test,
                  std::int64_t seed) {
  if (f_train <= 0.0 || f_heldout <= 0.0 || f_test <= 0.0) {
    throw SplitError("split fractions must be positive");
  }
  if (std::abs(f_train + f_heldout + f_test - 1.0) > 1e-9) {
    throw SplitError("split fractions must sum to 1");
  }
  const std::size_t n = corpus.size();
  const auto n_heldout = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f_heldout));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f_test));
  if (n_heldout + n_test > n) throw SplitError("split produced an oversized partition");
  const std::size_t n_train = n - n_heldout - n_test;
  if (n_train == 0 || n_heldout == 0 || n_test == 0) {
    throw SplitError("split produced an empty part (n=" + std::to_string(n) + ")");
  }
  Rng rng = Rng::stream(static_cast<std::uint64_t>(seed), kSplitStreamTag);
  const auto perm = permutation(n, rng);
  SplitResult r;
  r.train = take_indices(corpus, perm, 0, n_train);
  r.heldout = take_indices(corpus, perm, n_train, n_heldout);
  r.test = take_indices(corpus, perm, n_train + n_heldout, n_test);
  return r;
}

std::pair<Corpus, Corpus> split_two(const Corpus& corpus, double f_first, std::int64_t seed) {
  if (f_first <= 0.0 || f_first >= 1.0) throw SplitError("two-way split fraction must lie in (0, 1)");
  const std::size_t n = corpus.size();
  const auto n_second =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - f_first)));
  const std::size_t n_first = n - n_second;
  if (n_first == 0 || n_second == 0) {
    throw SplitError("two-way split produced an empty part (n=" + std::to_string(n) + ")");
  }
  Rng rng = Rng::stream(static_cast<std::uint64_t>(seed), kSplitStreamTag);
  const auto perm = permutation(n, rng);
  return {take_indices(corpus, perm, 0, n_first), take_indices(corpus, perm, n_first, n_second)};
}

}  // namespace feffect
