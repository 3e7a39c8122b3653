#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "feffect/corpus.hpp"
#include "feffect/evalx.hpp"
#include "feffect/feag.hpp"
#include "feffect/models.hpp"

using namespace feffect;

namespace {

const FeatureSpec kPrefix = FeatureSpec::make_prefix(0, "treated", "untreated");

Corpus ss_corpus(std::size_t n, double tau, double eps, std::int64_t seed) {
  GenConfigSS cfg;
  cfg.n = n;
  cfg.tau = tau;
  cfg.eps = eps;
  return generate_ss(cfg, seed);
}

// Fixed-count corpus: n11 of (T=1,Y=1), n10 of (T=1,Y=0), etc.
Corpus cell_corpus(std::size_t n11, std::size_t n10, std::size_t n01, std::size_t n00) {
  Corpus c;
  auto add = [&c](std::size_t n, int t, int y) {
    for (std::size_t i = 0; i < n; ++i) {
      Document d;
      d.tokens = {t ? "treated" : "untreated", "x"};
      d.treatment = t;
      d.label = y;
      d.doc_id = static_cast<std::int64_t>(c.docs.size());
      c.docs.push_back(std::move(d));
    }
  };
  add(n11, 1, 1);
  add(n10, 1, 0);
  add(n01, 0, 1);
  add(n00, 0, 0);
  return c;
}

struct Shift {
  double untreated;  // P(Y^C=1|T_src=0) - P(Y=1|T_src=0)
  double treated;    // P(Y^C=1|T_src=1) - P(Y=1|T_src=1)
};

Shift conditional_shift(const Corpus& src, const CounterfactualCorpus& aug) {
  double y0 = 0, y1 = 0, c0 = 0, c1 = 0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src.docs[i].treatment == 0) {
      ++n0;
      y0 += src.docs[i].label;
      c0 += aug.docs[i].label;
    } else {
      ++n1;
      y1 += src.docs[i].label;
      c1 += aug.docs[i].label;
    }
  }
  return {(c0 - y0) / static_cast<double>(n0), (c1 - y1) / static_cast<double>(n1)};
}

}  // namespace

TEST_CASE("flip_labels: tau=0 flips nothing") {
  const Corpus c = ss_corpus(500, 0.4, 0.1, 1);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.0, 3);
  REQUIRE(aug.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(aug.docs[i].label == c.docs[i].label);
    CHECK(aug.docs[i].treatment == 1 - c.docs[i].treatment);
    CHECK(!aug.provenance[i].flipped);
    CHECK(aug.provenance[i].src_doc_id == c.docs[i].doc_id);
  }
}

TEST_CASE("flip_labels: eta arithmetic on fixed cell counts") {
  // p2 = P(Y=0|T=0) = 60/100 = 0.6; tau = 0.3 -> eta0 = 0.5 -> 30 flips 0->1.
  // p1 = P(Y=1|T=1) = 50/100 = 0.5 -> eta1 = 0.6 -> 30 flips 1->0.
  const Corpus c = cell_corpus(50, 50, 40, 60);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.3, 0);
  std::size_t flips01 = 0, flips10 = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!aug.provenance[i].flipped) {
      CHECK(aug.docs[i].label == c.docs[i].label);
      continue;
    }
    if (c.docs[i].treatment == 0) {
      CHECK(c.docs[i].label == 0);
      CHECK(aug.docs[i].label == 1);
      ++flips01;
    } else {
      CHECK(c.docs[i].label == 1);
      CHECK(aug.docs[i].label == 0);
      ++flips10;
    }
  }
  CHECK(flips01 == 30);
  CHECK(flips10 == 30);
}

TEST_CASE("flip_labels: literal appendix fraction differs") {
  const Corpus c = cell_corpus(50, 50, 40, 60);
  FlipOptions literal;
  literal.literal_fraction = true;
  // literal: eta1 = tau/p2 = 0.5 -> 25 flips in the treated direction
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.3, 0, literal);
  std::size_t flips10 = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (aug.provenance[i].flipped && c.docs[i].treatment == 1) ++flips10;
  }
  CHECK(flips10 == 25);
}

TEST_CASE("flip_labels: conditional shift hits tau on a generated corpus") {
  const Corpus c = ss_corpus(20000, 0.5, 0.1, 0);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.5, 7);
  const Shift s = conditional_shift(c, aug);
  CHECK(std::abs(s.untreated - 0.5) < 0.02);
  CHECK(std::abs(s.treated + 0.5) < 0.02);
}

TEST_CASE("flip_labels: negative tau reduction swaps directions") {
  // Balanced conditionals so a -0.2 shift is feasible in both directions.
  const Corpus c = cell_corpus(4000, 6000, 6000, 4000);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, -0.2, 7);
  const Shift s = conditional_shift(c, aug);
  // effect -0.2: counterfactuals of untreated docs lose labels, treated gain
  CHECK(std::abs(s.untreated + 0.2) < 0.02);
  CHECK(std::abs(s.treated - 0.2) < 0.02);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!aug.provenance[i].flipped) continue;
    if (c.docs[i].treatment == 0) {
      CHECK(c.docs[i].label == 1);  // 1 -> 0 only
    } else {
      CHECK(c.docs[i].label == 0);  // 0 -> 1 only
    }
  }
}

TEST_CASE("flip_labels: negative tau that cannot be met is infeasible") {
  // P(Y=1|T=0) = 0.14 cannot drop by 0.2
  const Corpus c = ss_corpus(20000, 0.5, 0.1, 0);
  CHECK_THROWS_AS(flip_labels(c, kPrefix, -0.2, 7), InfeasibleError);
}

TEST_CASE("flip_labels: infeasible fraction raises with diagnostics") {
  // p1 = 10/100 -> eta1 = tau/p1 > 1 for tau = 0.3
  const Corpus c = cell_corpus(10, 90, 50, 50);
  CHECK_THROWS_WITH_AS(flip_labels(c, kPrefix, 0.3, 0), doctest::Contains("p1"),
                       InfeasibleError);
}

TEST_CASE("build_augmented: single feature equals flip_labels, two features double") {
  const Corpus c = ss_corpus(400, 0.3, 0.1, 2);
  const CounterfactualCorpus one = build_augmented(c, {kPrefix}, {0.3}, 5);
  REQUIRE(one.size() == c.size());
  CHECK(one.taus_by_feature.size() == 1);

  // the same spec twice still gets independent per-feature seed streams
  const CounterfactualCorpus two = build_augmented(c, {kPrefix, kPrefix}, {0.3, 0.3}, 5);
  CHECK(two.size() == 2 * c.size());
  CHECK(two.taus_by_feature.size() == 2);

  // same spec under different per-feature seed streams: flip logs differ
  std::vector<bool> log_a, log_b;
  for (std::size_t i = 0; i < c.size(); ++i) {
    log_a.push_back(two.provenance[i].flipped);
    log_b.push_back(two.provenance[c.size() + i].flipped);
  }
  CHECK(log_a != log_b);
}

TEST_CASE("train_feag: lambda=0 reproduces plain training bit for bit") {
  const Corpus c = ss_corpus(600, 0.4, 0.1, 3);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.4, 5);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 11;
  const Classifier erm = train_classifier(c, cfg);
  const Classifier feag0 = train_feag(c, aug, 0.0, cfg);
  CHECK(flat_params(erm.model) == flat_params(feag0.model));
  // and a nonzero lambda changes the trajectory
  const Classifier feag = train_feag(c, aug, 0.1, cfg);
  CHECK(flat_params(erm.model) != flat_params(feag.model));
}

TEST_CASE("train_feag: steers the learned effect toward the target") {
  const Corpus train = ss_corpus(4000, 0.5, 0.05, 0);
  const Corpus test = ss_corpus(4000, 0.5, 0.05, 1000);
  const CounterfactualCorpus aug = flip_labels(train, kPrefix, 0.5, 3);
  TrainConfig cfg;
  const Classifier erm = train_classifier(train, cfg);
  const Classifier feag = train_feag(train, aug, 0.1, cfg);
  const double le_erm = learned_effect(erm, test, kPrefix);
  const double le_feag = learned_effect(feag, test, kPrefix);
  CHECK(std::abs(le_feag - 0.5) < std::abs(le_erm - 0.5));
}

TEST_CASE("train_feag: tau target 0 shrinks the learned effect") {
  const Corpus train = ss_corpus(4000, 0.5, 0.05, 4);
  const CounterfactualCorpus aug = flip_labels(train, kPrefix, 0.0, 3);
  TrainConfig cfg;
  const Classifier erm = train_classifier(train, cfg);
  const Classifier feag0 = train_feag(train, aug, 1.0, cfg);
  CHECK(std::abs(learned_effect(feag0, train, kPrefix)) <
        std::abs(learned_effect(erm, train, kPrefix)));
}

TEST_CASE("train_regularized: lambda=0 reduces to plain training") {
  const Corpus c = ss_corpus(600, 0.4, 0.1, 6);
  TrainConfig cfg;
  cfg.epochs = 4;
  const Classifier erm = train_classifier(c, cfg);
  const Classifier reg = train_regularized(c, {kPrefix}, {0.4}, 0.0, cfg);
  CHECK(flat_params(erm.model) == flat_params(reg.model));
}

TEST_CASE("train_regularized: large lambda with tau=0 kills the treatment weight") {
  const Corpus c = ss_corpus(3000, 0.5, 0.05, 7);
  TrainConfig cfg;
  cfg.epochs = 30;
  const Classifier reg = train_regularized(c, {kPrefix}, {0.0}, 50.0, cfg);
  CHECK(std::abs(learned_effect(reg, c, kPrefix)) < 0.05);
}

TEST_CASE("subsample_baseline: near-independent corpus keeps almost everything") {
  // counts already close to independence
  const Corpus c = cell_corpus(250, 250, 250, 250);
  const Corpus sub = subsample_baseline(c, 1);
  CHECK(sub.size() >= c.size() - 4);
}

TEST_CASE("subsample_baseline: output satisfies the independence target") {
  const Corpus c = ss_corpus(8000, 0.5, 0.05, 8);
  const Corpus sub = subsample_baseline(c, 2);
  double pt = 0, py = 0, pty = 0;
  for (const auto& d : sub.docs) {
    pt += d.treatment;
    py += d.label;
    pty += d.treatment * d.label;
  }
  const double n = static_cast<double>(sub.size());
  pt /= n;
  py /= n;
  pty /= n;
  CHECK(std::abs(pty - pt * py) < 2.0 / n);
}

TEST_CASE("subsample_baseline: erm on the subsample stops leaning on the treatment") {
  // Breaking the marginal T-Y correlation collapses the learned effect far
  // below plain training's, and the minority groups benefit.
  GenConfigSS gen;
  gen.n = 8000;
  gen.tau = 0.5;
  gen.eps = 0.05;
  gen.signal_strength = 0.65;
  gen.tokens_per_doc = 6;
  const Corpus c = generate_ss(gen, 9);
  const Corpus test = generate_ss(gen, 1009);
  const Corpus sub = subsample_baseline(c, 3);
  TrainConfig cfg;
  cfg.epochs = 60;
  const Classifier erm = train_classifier(c, cfg);
  const Classifier erm_sub = train_classifier(sub, cfg);
  CHECK(std::abs(learned_effect(erm_sub, test, kPrefix)) <
        std::abs(learned_effect(erm, test, kPrefix)));
  const GroupMetrics gm_erm = group_metrics(erm, test, kPrefix);
  const GroupMetrics gm_sub = group_metrics(erm_sub, test, kPrefix);
  CHECK(gm_sub.avg_group > gm_erm.avg_group);
}

TEST_CASE("subsample_baseline: empty cell is infeasible") {
  const Corpus c = cell_corpus(100, 100, 0, 100);
  CHECK_THROWS_AS(subsample_baseline(c, 0), InfeasibleError);
}

TEST_CASE("remove_token_baseline: learned effect is exactly zero") {
  const Corpus train = ss_corpus(1500, 0.5, 0.05, 10);
  TrainConfig cfg;
  cfg.epochs = 8;
  const Classifier clf = remove_token_baseline(train, kPrefix, cfg);
  CHECK(learned_effect(clf, train, kPrefix) == 0.0);
  // group metrics remain computable on the unmodified test set
  const GroupMetrics gm = group_metrics(clf, train, kPrefix);
  CHECK(gm.total > 0.5);
}

TEST_CASE("remove_token_baseline: improves minority groups over erm") {
  GenConfigSS gen;
  gen.n = 5000;
  gen.tau = 0.5;
  gen.eps = 0.05;
  const Corpus train = generate_ss(gen, 11);
  const Corpus test = generate_ss(gen, 1011);
  TrainConfig cfg;
  cfg.epochs = 60;
  const Classifier erm = train_classifier(train, cfg);
  const Classifier rmtok = remove_token_baseline(train, kPrefix, cfg);
  const GroupMetrics gm_erm = group_metrics(erm, test, kPrefix);
  const GroupMetrics gm_rm = group_metrics(rmtok, test, kPrefix);
  CHECK(*gm_rm.acc[1] > *gm_erm.acc[1]);  // Group2
  CHECK(*gm_rm.acc[2] > *gm_erm.acc[2]);  // Group3
}

TEST_CASE("counterfactual corpus serializes with provenance fields") {
  const Corpus c = ss_corpus(50, 0.3, 0.1, 12);
  const CounterfactualCorpus aug = flip_labels(c, kPrefix, 0.3, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "feffect_aug_test.jsonl").string();
  write_jsonl(aug, path);
  std::ifstream in(path);
  std::string header, line1;
  std::getline(in, header);
  std::getline(in, line1);
  CHECK(header.find("counterfactual") != std::string::npos);
  CHECK(line1.find("src_doc_id") != std::string::npos);
  CHECK(line1.find("flipped") != std::string::npos);
  CHECK(line1.find("feature_id") != std::string::npos);
  // the schema remains readable as a plain corpus
  const Corpus back = read_jsonl(path);
  CHECK(back.size() == aug.size());
  std::filesystem::remove(path);
}
