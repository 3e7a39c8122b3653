#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/estimators.hpp"
#include "feffect/models.hpp"

namespace feffect {

struct GroupMetrics {
  std::array<std::optional<double>, 4> acc;  // index 0 = Group1
  std::array<std::size_t, 4> n_per_group{};
  double total = 0.0;
  double avg_group = 0.0;  // unweighted mean over non-empty groups
  bool has_empty_group = false;
  double learned_effect = 0.0;
};

// Threshold 0.5, ties predicted as class 0.
GroupMetrics group_metrics(const Classifier& clf, const Corpus& test, const FeatureSpec& spec);

// ate_direct applied to the trained classifier.
double learned_effect(const Classifier& clf, const Corpus& test, const FeatureSpec& spec);

std::string group_metrics_json(const GroupMetrics& gm);
std::string group_metrics_csv(const GroupMetrics& gm);
std::string group_metrics_table(const GroupMetrics& gm);  // aligned columns, effects x100

struct BiasRow {
  std::string token;
  double riesz_dr_effect = 0.0;
  double direct_effect = 0.0;
  double p_y_given_t1 = 0.0;
  std::size_t n_treated = 0;
  bool skipped = false;
  std::string skip_reason;
};

struct BiasReport {
  std::vector<BiasRow> rows;  // sorted by |riesz_dr_effect| descending, skipped rows last
};

struct BiasScanOptions {
  EstimateOptions est;
  std::size_t min_count = 50;
  int threads = 1;
};

// Per token: treat its presence as the feature, estimate effects, and report
// them next to the naive conditional P(Y=1|T=1).
BiasReport bias_scan(const Corpus& corpus, const std::vector<std::string>& tokens,
                     const BiasScanOptions& opts, const std::vector<std::int64_t>& seeds);

std::string bias_report_json(const BiasReport& report);
std::string bias_report_csv(const BiasReport& report);
std::string bias_report_table(const BiasReport& report);  // effects x100

}  // namespace feffect
