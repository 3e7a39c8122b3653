#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "feffect/corpus.hpp"
#include "feffect/estimators.hpp"

using namespace feffect;

namespace {

GenConfigSS small_ss(std::size_t n, double tau, double eps) {
  GenConfigSS cfg;
  cfg.n = n;
  cfg.tau = tau;
  cfg.eps = eps;
  return cfg;
}

// Multiset signature of a document, for partition checks across reindexing.
std::string doc_key(const Document& d) {
  std::string k;
  for (const auto& t : d.tokens) k += t + "|";
  k += ":" + std::to_string(d.treatment) + std::to_string(d.label);
  return k;
}

}  // namespace

TEST_CASE("generate_ss: tau=0 labels equal base labels") {
  // With base_label_acc = 1 the base label is W itself, so tau=0 forces
  // label == confounder elementwise.
  GenConfigSS cfg = small_ss(1000, 0.0, 0.05);
  cfg.base_label_acc = 1.0;
  const Corpus c = generate_ss(cfg, 3);
  for (const auto& d : c.docs) {
    REQUIRE(d.confounder.has_value());
    CHECK(d.label == *d.confounder);
  }
}

TEST_CASE("generate_ss: tau=1 labels equal treatments") {
  const Corpus c = generate_ss(small_ss(1000, 1.0, 0.05), 4);
  for (const auto& d : c.docs) CHECK(d.label == d.treatment);
}

TEST_CASE("generate_ss: flip rate and enumerated truth at tau=0.5") {
  GenConfigSS cfg = small_ss(20000, 0.5, 0.05);
  const Corpus c = generate_ss(cfg, 0);
  std::size_t flipped = 0;
  for (const auto& d : c.docs) {
    if (d.treatment != *d.confounder) ++flipped;
  }
  const double rate = static_cast<double>(flipped) / static_cast<double>(c.size());
  CHECK(rate == doctest::Approx(0.05).epsilon(0.1));
  CHECK(std::abs(rate - 0.05) < 0.005);
  CHECK(oracle_ate_enumerated(cfg) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("generate_ss: empirical flip rate within 3 binomial sd for varied eps") {
  for (double eps : {0.01, 0.10, 0.35}) {
    GenConfigSS cfg = small_ss(20000, 0.3, eps);
    const Corpus c = generate_ss(cfg, 9);
    std::size_t flipped = 0;
    for (const auto& d : c.docs) {
      if (d.treatment != *d.confounder) ++flipped;
    }
    const double rate = static_cast<double>(flipped) / static_cast<double>(c.size());
    const double sd = std::sqrt(eps * (1 - eps) / static_cast<double>(c.size()));
    CHECK(std::abs(rate - eps) < 3 * sd);
  }
}

TEST_CASE("generate_ss: documents are well formed") {
  GenConfigSS cfg = small_ss(500, 0.3, 0.1);
  cfg.effect_token = EffectTokenConfig{"boost", 0.2, 0.5};
  const Corpus c = generate_ss(cfg, 1);
  CHECK(c.meta.generator == Generator::ss);
  CHECK(*c.meta.true_tau == 0.3);
  CHECK(*c.meta.overlap_eps == 0.1);
  std::set<std::int64_t> ids;
  for (const auto& d : c.docs) {
    CHECK(!d.tokens.empty());
    const std::string& first = d.tokens.front();
    CHECK(first == (d.treatment == 1 ? "treated" : "untreated"));
    ids.insert(d.doc_id);
  }
  CHECK(ids.size() == c.size());
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == static_cast<std::int64_t>(c.size()) - 1);
}

TEST_CASE("generate_ss: same seed is byte-identical, different seeds differ") {
  GenConfigSS cfg = small_ss(200, 0.4, 0.05);
  std::ostringstream a, b, c;
  write_jsonl(generate_ss(cfg, 42), a);
  write_jsonl(generate_ss(cfg, 42), b);
  write_jsonl(generate_ss(cfg, 43), c);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("generate_ss: config errors name the violated bound") {
  GenConfigSS cfg = small_ss(100, 0.5, 0.0);
  CHECK_THROWS_WITH_AS(generate_ss(cfg, 0), doctest::Contains("eps"), ConfigError);
  cfg.eps = 0.05;
  cfg.signal_strength = 0.5;
  CHECK_THROWS_WITH_AS(generate_ss(cfg, 0), doctest::Contains("signal_strength"), ConfigError);
  cfg.signal_strength = 0.9;
  cfg.tau = 1.5;
  CHECK_THROWS_WITH_AS(generate_ss(cfg, 0), doctest::Contains("tau"), ConfigError);
  cfg.tau = 0.5;
  cfg.vocab.w1_pool.push_back("treated");
  CHECK_THROWS_AS(generate_ss(cfg, 0), ConfigError);
}

TEST_CASE("generate_subsampled: keep-all drops nothing") {
  GenConfigSub cfg;
  cfg.n_raw = 2000;
  cfg.keep_t1_w0 = 1.0;
  cfg.keep_t0 = 1.0;
  const Corpus c = generate_subsampled(cfg, 0);
  CHECK(c.size() == cfg.n_raw);
  CHECK(c.meta.generator == Generator::subsampled);
  CHECK(*c.meta.true_tau == 0.0);
}

TEST_CASE("generate_subsampled: subsampling shrinks the (T=1,W=0) share and raises corr(T,Y)") {
  GenConfigSub keep_all;
  keep_all.n_raw = 50000;
  keep_all.keep_t1_w0 = 1.0;
  keep_all.keep_t0 = 1.0;
  GenConfigSub cfg = keep_all;
  cfg.keep_t1_w0 = 0.05;
  cfg.keep_t0 = 0.10;
  const Corpus raw = generate_subsampled(keep_all, 0);
  const Corpus sub = generate_subsampled(cfg, 0);
  CHECK(sub.size() < raw.size());

  auto share_t1w0 = [](const Corpus& c) {
    std::size_t t1 = 0, t1w0 = 0;
    for (const auto& d : c.docs) {
      if (d.treatment == 1) {
        ++t1;
        if (*d.confounder == 0) ++t1w0;
      }
    }
    return static_cast<double>(t1w0) / static_cast<double>(t1);
  };
  CHECK(share_t1w0(sub) < share_t1w0(raw));

  auto corr_ty = [](const Corpus& c) {
    double mt = 0, my = 0;
    for (const auto& d : c.docs) {
      mt += d.treatment;
      my += d.label;
    }
    mt /= static_cast<double>(c.size());
    my /= static_cast<double>(c.size());
    double num = 0, vt = 0, vy = 0;
    for (const auto& d : c.docs) {
      num += (d.treatment - mt) * (d.label - my);
      vt += (d.treatment - mt) * (d.treatment - mt);
      vy += (d.label - my) * (d.label - my);
    }
    return num / std::sqrt(vt * vy);
  };
  CHECK(corr_ty(sub) > corr_ty(raw));
}

TEST_CASE("generate_subsampled: treatment equals trigger presence") {
  GenConfigSub cfg;
  cfg.n_raw = 3000;
  const Corpus c = generate_subsampled(cfg, 2);
  for (const auto& d : c.docs) {
    const bool present = std::find(d.tokens.begin(), d.tokens.end(), "kill") != d.tokens.end();
    CHECK(d.treatment == (present ? 1 : 0));
  }
}

TEST_CASE("codec: empty corpus writes only the header line") {
  Corpus c;
  c.meta.generator = Generator::external;
  std::ostringstream out;
  write_jsonl(c, out);
  const std::string s = out.str();
  CHECK(s.rfind("{\"_meta\":", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1);
}

TEST_CASE("codec: round trip preserves docs and meta") {
  Corpus c;
  c.meta.generator = Generator::ss;
  c.meta.true_tau = 0.3;
  c.meta.overlap_eps = 0.05;
  c.meta.seed = 17;
  c.docs.push_back({{"treated", "a"}, 1, 1, 1, 0});
  c.docs.push_back({{"untreated", "b", "b"}, 0, 0, 0, 1});
  c.docs.push_back({{"untreated", "c"}, 0, 1, std::nullopt, 2});
  std::ostringstream out;
  write_jsonl(c, out);
  std::istringstream in(out.str());
  const Corpus r = read_jsonl(in);
  REQUIRE(r.size() == 3);
  CHECK(*r.meta.true_tau == 0.3);
  CHECK(*r.meta.overlap_eps == 0.05);
  CHECK(r.meta.generator == Generator::ss);
  CHECK(r.meta.seed == 17);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.docs[i].tokens == c.docs[i].tokens);
    CHECK(r.docs[i].treatment == c.docs[i].treatment);
    CHECK(r.docs[i].label == c.docs[i].label);
    CHECK(r.docs[i].confounder == c.docs[i].confounder);
    CHECK(r.docs[i].doc_id == static_cast<std::int64_t>(i));
  }
  // write-read-write is byte stable
  std::ostringstream out2;
  write_jsonl(r, out2);
  CHECK(out.str() == out2.str());
}

TEST_CASE("codec: absent w reads back as no confounder") {
  std::istringstream in(
      "{\"_meta\":{\"generator\":\"external\",\"seed\":0}}\n"
      "{\"tokens\":[\"x\"],\"t\":0,\"y\":1}\n");
  const Corpus c = read_jsonl(in);
  REQUIRE(c.size() == 1);
  CHECK(!c.docs[0].confounder.has_value());
}

TEST_CASE("codec: malformed line reports the line number") {
  std::istringstream in(
      "{\"_meta\":{\"generator\":\"external\",\"seed\":0}}\n"
      "{\"tokens\":[\"x\"],\"t\":0,\"y\":1}\n"
      "this is not json\n");
  CHECK_THROWS_WITH_AS(read_jsonl(in), doctest::Contains("line 3"), ParseError);
}

TEST_CASE("codec: missing required key is a schema error") {
  std::istringstream in(
      "{\"_meta\":{\"generator\":\"external\",\"seed\":0}}\n"
      "{\"tokens\":[\"x\"],\"t\":0}\n");
  CHECK_THROWS_WITH_AS(read_jsonl(in), doctest::Contains("'y'"), SchemaError);
  std::istringstream in2("{\"tokens\":[\"x\"],\"t\":2,\"y\":0}\n");
  CHECK_THROWS_AS(read_jsonl(in2), SchemaError);
}

TEST_CASE("split: remainder goes to train") {
  GenConfigSS cfg = small_ss(10, 0.5, 0.1);
  const Corpus c = generate_ss(cfg, 0);
  const SplitResult r = split(c, 0.5, 0.25, 0.25, 7);
  CHECK(r.train.size() == 6);
  CHECK(r.heldout.size() == 2);
  CHECK(r.test.size() == 2);
}

TEST_CASE("split: deterministic, seed-sensitive, and a partition") {
  const Corpus c = generate_ss(small_ss(100, 0.5, 0.1), 1);
  const SplitResult a = split(c, 0.6, 0.2, 0.2, 1);
  const SplitResult b = split(c, 0.6, 0.2, 0.2, 1);
  const SplitResult d = split(c, 0.6, 0.2, 0.2, 2);

  auto keys = [](const Corpus& part) {
    std::multiset<std::string> k;
    for (const auto& doc : part.docs) k.insert(doc_key(doc));
    return k;
  };
  CHECK(keys(a.train) == keys(b.train));
  CHECK(keys(a.heldout) == keys(b.heldout));
  CHECK(keys(a.test) == keys(b.test));
  CHECK(keys(a.train) != keys(d.train));

  // disjoint and exhaustive
  std::multiset<std::string> all = keys(c);
  std::multiset<std::string> parts;
  for (const Corpus* p : {&a.train, &a.heldout, &a.test}) {
    for (const auto& doc : p->docs) parts.insert(doc_key(doc));
  }
  CHECK(parts == all);
}

TEST_CASE("split: errors") {
  const Corpus c = generate_ss(small_ss(10, 0.5, 0.1), 1);
  CHECK_THROWS_AS(split(c, 0.5, 0.3, 0.3, 0), SplitError);     // sums to 1.1
  CHECK_THROWS_AS(split(c, 0.98, 0.01, 0.01, 0), SplitError);  // empty parts
  const Corpus tiny = generate_ss(small_ss(2, 0.5, 0.1), 1);
  CHECK_THROWS_AS(split(tiny, 0.4, 0.3, 0.3, 0), SplitError);
}
