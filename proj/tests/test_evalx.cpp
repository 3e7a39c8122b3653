#include <cmath>

#include "doctest.h"
#include "feffect/corpus.hpp"
#include "feffect/evalx.hpp"
#include "feffect/feag.hpp"
#include "feffect/models.hpp"

using namespace feffect;

namespace {

const FeatureSpec kPrefix = FeatureSpec::make_prefix(0, "treated", "untreated");

Classifier zero_classifier() {
  TrainConfig cfg;
  FeaturizerConfig fcfg;
  fcfg.dim = 1024;
  Classifier c;
  c.model = init_two_head(fcfg, cfg);
  return c;
}

// Classifier that reads the label off a revealing token.
Classifier oracle_classifier() {
  Classifier c = zero_classifier();
  const auto idx_pos = hash_token("pos", c.model.featurizer.hash_seed, c.model.featurizer.dim);
  const auto idx_neg = hash_token("neg", c.model.featurizer.hash_seed, c.model.featurizer.dim);
  c.model.g_w.set(idx_pos, 10.0);
  c.model.g_w.set(idx_neg, -10.0);
  return c;
}

Corpus labeled_corpus() {
  Corpus c;
  auto add = [&c](int t, int y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      Document d;
      d.tokens = {t ? "treated" : "untreated", y ? "pos" : "neg"};
      d.treatment = t;
      d.label = y;
      d.doc_id = static_cast<std::int64_t>(c.docs.size());
      c.docs.push_back(std::move(d));
    }
  };
  add(0, 0, 40);  // Group1
  add(1, 0, 10);  // Group2
  add(0, 1, 20);  // Group3
  add(1, 1, 30);  // Group4
  return c;
}

}  // namespace

TEST_CASE("group_metrics: perfect classifier") {
  const Corpus c = labeled_corpus();
  const GroupMetrics gm = group_metrics(oracle_classifier(), c, kPrefix);
  for (int g = 0; g < 4; ++g) {
    REQUIRE(gm.acc[g].has_value());
    CHECK(*gm.acc[g] == 1.0);
  }
  CHECK(gm.total == 1.0);
  CHECK(gm.avg_group == 1.0);
  CHECK(gm.n_per_group[0] == 40);
  CHECK(gm.n_per_group[1] == 10);
  CHECK(gm.n_per_group[2] == 20);
  CHECK(gm.n_per_group[3] == 30);
}

TEST_CASE("group_metrics: constant 0.5 ties break to class 0") {
  const Corpus c = labeled_corpus();
  const GroupMetrics gm = group_metrics(zero_classifier(), c, kPrefix);
  CHECK(*gm.acc[0] == 1.0);  // Y=0 groups correct
  CHECK(*gm.acc[1] == 1.0);
  CHECK(*gm.acc[2] == 0.0);  // Y=1 groups wrong
  CHECK(*gm.acc[3] == 0.0);
  CHECK(gm.total == doctest::Approx(0.5));
  CHECK(gm.learned_effect == 0.0);
}

TEST_CASE("group_metrics: weighted accuracies recompose to total exactly") {
  GenConfigSS gen;
  gen.n = 2000;
  gen.tau = 0.4;
  gen.eps = 0.1;
  const Corpus c = generate_ss(gen, 3);
  TrainConfig cfg;
  cfg.epochs = 6;
  const Classifier clf = train_classifier(c, cfg);
  const GroupMetrics gm = group_metrics(clf, c, kPrefix);
  double recomposed = 0.0;
  double acc_sum = 0.0;
  for (int g = 0; g < 4; ++g) {
    recomposed += *gm.acc[g] * static_cast<double>(gm.n_per_group[g]);
    acc_sum += *gm.acc[g];
  }
  recomposed /= static_cast<double>(c.size());
  CHECK(recomposed == doctest::Approx(gm.total).epsilon(1e-12));
  CHECK(gm.avg_group == doctest::Approx(acc_sum / 4.0).epsilon(1e-12));
}

TEST_CASE("group_metrics: empty group excluded with a warning flag") {
  Corpus c;
  for (int i = 0; i < 10; ++i) {
    Document d;
    d.tokens = {i % 2 ? "treated" : "untreated", "pos"};
    d.treatment = i % 2;
    d.label = 1;  // only groups 3 and 4 present
    d.doc_id = i;
    c.docs.push_back(std::move(d));
  }
  const GroupMetrics gm = group_metrics(oracle_classifier(), c, kPrefix);
  CHECK(gm.has_empty_group);
  CHECK(!gm.acc[0].has_value());
  CHECK(!gm.acc[1].has_value());
  CHECK(gm.avg_group == 1.0);  // mean over the two present groups
}

TEST_CASE("group_metrics: erm on a confounded corpus shows the majority/minority gap") {
  GenConfigSS gen;
  gen.n = 5000;
  gen.tau = 0.5;
  gen.eps = 0.05;
  const Corpus train = generate_ss(gen, 4);
  const Corpus test = generate_ss(gen, 1004);
  TrainConfig cfg;
  cfg.epochs = 60;
  const Classifier clf = train_classifier(train, cfg);
  const GroupMetrics gm = group_metrics(clf, test, kPrefix);
  CHECK(*gm.acc[0] > 0.9);
  CHECK(*gm.acc[3] > 0.9);
  CHECK(*gm.acc[1] < 0.3);
  CHECK(*gm.acc[2] < 0.3);
}

TEST_CASE("learned_effect: treatment-blind classifier scores zero") {
  const Corpus c = labeled_corpus();
  CHECK(learned_effect(oracle_classifier(), c, kPrefix) == 0.0);
}

TEST_CASE("bias_scan: empty token list gives an empty report") {
  GenConfigSS gen;
  gen.n = 300;
  gen.tau = 0.2;
  gen.eps = 0.2;
  const Corpus c = generate_ss(gen, 5);
  BiasScanOptions opts;
  const BiasReport r = bias_scan(c, {}, opts, {0});
  CHECK(r.rows.empty());
}

TEST_CASE("bias_scan: under-frequent and saturated tokens are skipped with reasons") {
  GenConfigSS gen;
  gen.n = 400;
  gen.tau = 0.2;
  gen.eps = 0.2;
  const Corpus c = generate_ss(gen, 6);
  BiasScanOptions opts;
  opts.min_count = 50;
  opts.est.train.epochs = 3;
  const BiasReport r = bias_scan(c, {"unseen_token"}, opts, {0});
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].skipped);
  CHECK(r.rows[0].skip_reason.find("min_count") != std::string::npos);
}

TEST_CASE("bias_scan: rows sorted by absolute riesz effect, skipped last") {
  GenConfigSS gen;
  gen.n = 4000;
  gen.tau = 0.3;
  gen.eps = 0.1;
  gen.effect_token = EffectTokenConfig{"boost", 0.2, 0.5};
  const Corpus c = generate_ss(gen, 7);
  BiasScanOptions opts;
  opts.est.train.epochs = 8;
  opts.threads = 3;
  const BiasReport r = bias_scan(c, {"na", "boost", "unseen_token"}, opts, {0});
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].token == "boost");  // largest effect first
  CHECK(r.rows[2].token == "unseen_token");
  CHECK(r.rows[2].skipped);
  CHECK(std::abs(r.rows[0].riesz_dr_effect) >= std::abs(r.rows[1].riesz_dr_effect));
}

TEST_CASE("report emitters produce the documented shapes") {
  const Corpus c = labeled_corpus();
  const GroupMetrics gm = group_metrics(oracle_classifier(), c, kPrefix);
  CHECK(group_metrics_json(gm).find("\"avg_group\"") != std::string::npos);
  CHECK(group_metrics_csv(gm).rfind("metric,value,n\n", 0) == 0);
  CHECK(group_metrics_table(gm).find("AvgGroup") != std::string::npos);

  BiasReport r;
  r.rows.push_back({"tok", 0.1, 0.2, 0.6, 100, false, ""});
  CHECK(bias_report_csv(r).find("riesz_dr_effect_x100") != std::string::npos);
  CHECK(bias_report_json(r).find("\"tok\"") != std::string::npos);
  CHECK(bias_report_table(r).find("tok") != std::string::npos);
}
