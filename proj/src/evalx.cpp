#include "feffect/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feffect/util.hpp"
#include "json.hpp"

namespace feffect {

double learned_effect(const Classifier& clf, const Corpus& test, const FeatureSpec& spec) {
  return ate_direct([&clf](const Document& d) { return clf.predict(d); }, test, spec);
}

GroupMetrics group_metrics(const Classifier& clf, const Corpus& test, const FeatureSpec& spec) {
  if (test.empty()) throw TrainingError("group_metrics needs a non-empty test corpus");
  GroupMetrics gm;
  std::array<std::size_t, 4> correct{};
  std::size_t total_correct = 0;
  for (const auto& doc : test.docs) {
    const int g = group_of(doc) - 1;
    gm.n_per_group[g]++;
    // Ties at exactly 0.5 predict class 0.
    const int pred = clf.predict(doc) > 0.5 ? 1 : 0;
    if (pred == doc.label) {
      correct[g]++;
      total_correct++;
    }
  }
  gm.total = static_cast<double>(total_correct) / static_cast<double>(test.size());
  double acc_sum = 0.0;
  std::size_t groups_present = 0;
  for (int g = 0; g < 4; ++g) {
    if (gm.n_per_group[g] == 0) {
      gm.has_empty_group = true;
      continue;
    }
    gm.acc[g] = static_cast<double>(correct[g]) / static_cast<double>(gm.n_per_group[g]);
    acc_sum += *gm.acc[g];
    groups_present++;
  }
  gm.avg_group = groups_present > 0 ? acc_sum / static_cast<double>(groups_present) : 0.0;
  gm.learned_effect = learned_effect(clf, test, spec);
  return gm;
}

std::string group_metrics_json(const GroupMetrics& gm) {
  nlohmann::ordered_json j;
  for (int g = 0; g < 4; ++g) {
    const std::string key = "group" + std::to_string(g + 1);
    if (gm.acc[g].has_value()) {
      j[key + "_acc"] = *gm.acc[g];
    } else {
      j[key + "_acc"] = nullptr;
    }
    j[key + "_n"] = gm.n_per_group[g];
  }
  j["total"] = gm.total;
  j["avg_group"] = gm.avg_group;
  j["learned_effect"] = gm.learned_effect;
  j["has_empty_group"] = gm.has_empty_group;
  return j.dump(2) + "\n";
}

std::string group_metrics_csv(const GroupMetrics& gm) {
  std::ostringstream out;
  out << "metric,value,n\n";
  for (int g = 0; g < 4; ++g) {
    out << "group" << g + 1 << "_acc,";
    if (gm.acc[g].has_value()) out << fmt_fixed(*gm.acc[g], 6);
    out << ',' << gm.n_per_group[g] << '\n';
  }
  out << "total," << fmt_fixed(gm.total, 6) << ",\n";
  out << "avg_group," << fmt_fixed(gm.avg_group, 6) << ",\n";
  out << "learned_effect," << fmt_fixed(gm.learned_effect, 6) << ",\n";
  return out.str();
}

std::string group_metrics_table(const GroupMetrics& gm) {
  std::ostringstream out;
  out << "Group1  Group2  Group3  Group4  Total   AvgGroup  Direct(x100)\n";
  for (int g = 0; g < 4; ++g) {
    if (gm.acc[g].has_value()) {
      out << fmt_fixed(*gm.acc[g] * 100.0, 2);
    } else {
      out << "  --  ";
    }
    out << "  ";
  }
  out << fmt_fixed(gm.total * 100.0, 2) << "   " << fmt_fixed(gm.avg_group * 100.0, 2) << "     "
      << fmt_fixed(gm.learned_effect * 100.0, 2) << '\n';
  if (gm.has_empty_group) {
    out << "warning: empty group(s) excluded from avg_group\n";
  }
  return out.str();
}

BiasReport bias_scan(const Corpus& corpus, const std::vector<std::string>& tokens,
                     const BiasScanOptions& opts, const std::vector<std::int64_t>& seeds) {
  BiasReport report;
  report.rows.resize(tokens.size());
  parallel_for(tokens.size(), opts.threads, [&](std::size_t ti) {
    BiasRow& row = report.rows[ti];
    row.token = tokens[ti];

    // Rebind treatment to the scanned token's presence; the original prefix
    // tokens become ordinary covariates for this analysis.
    Corpus rebound;
    rebound.meta = corpus.meta;
    rebound.meta.true_tau.reset();
    rebound.meta.generator = Generator::external;
    rebound.docs.reserve(corpus.size());
    std::size_t n_treated = 0, y1_treated = 0;
    for (const auto& doc : corpus.docs) {
      Document d = doc;
      const bool present =
          std::find(d.tokens.begin(), d.tokens.end(), row.token) != d.tokens.end();
      d.treatment = present ? 1 : 0;
      if (present) {
        ++n_treated;
        if (d.label == 1) ++y1_treated;
      }
      rebound.docs.push_back(std::move(d));
    }
    row.n_treated = n_treated;
    if (n_treated < opts.min_count) {
      row.skipped = true;
      row.skip_reason = "token occurs in " + std::to_string(n_treated) +
                        " docs, below min_count " + std::to_string(opts.min_count);
      return;
    }
    if (n_treated == corpus.size()) {
      row.skipped = true;
      row.skip_reason = "token occurs in every doc; no untreated group";
      return;
    }
    row.p_y_given_t1 = static_cast<double>(y1_treated) / static_cast<double>(n_treated);

    const FeatureSpec spec = FeatureSpec::make_presence(static_cast<int>(ti), row.token);
    try {
      const EffectEstimateSet est = estimate_feature_effect(rebound, spec, opts.est, seeds, 1);
      row.riesz_dr_effect = est.dr_riesz.value;
      row.direct_effect = est.direct.value;
    } catch (const std::exception& e) {
      row.skipped = true;
      row.skip_reason = e.what();
    }
  });

  std::stable_sort(report.rows.begin(), report.rows.end(), [](const BiasRow& a, const BiasRow& b) {
    if (a.skipped != b.skipped) return !a.skipped;
    return std::abs(a.riesz_dr_effect) > std::abs(b.riesz_dr_effect);
  });
  return report;
}

std::string bias_report_json(const BiasReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json j;
    j["token"] = r.token;
    if (r.skipped) {
      j["skipped"] = r.skip_reason;
      j["n_treated"] = r.n_treated;
    } else {
      j["riesz_dr_effect"] = r.riesz_dr_effect;
      j["direct_effect"] = r.direct_effect;
      j["p_y_given_t1"] = r.p_y_given_t1;
      j["n_treated"] = r.n_treated;
    }
    rows.push_back(std::move(j));
  }
  return rows.dump(2) + "\n";
}

std::string bias_report_csv(const BiasReport& report) {
  std::ostringstream out;
  out << "token,riesz_dr_effect_x100,direct_effect_x100,p_y_given_t1,n_treated,skipped_reason\n";
  for (const auto& r : report.rows) {
    out << r.token << ',';
    if (!r.skipped) {
      out << fmt_fixed(r.riesz_dr_effect * 100.0, 4) << ',' << fmt_fixed(r.direct_effect * 100.0, 4)
          << ',' << fmt_fixed(r.p_y_given_t1, 4);
    } else {
      out << ",,";
    }
    out << ',' << r.n_treated << ',' << (r.skipped ? r.skip_reason : "") << '\n';
  }
  return out.str();
}

std::string bias_report_table(const BiasReport& report) {
  std::ostringstream out;
  out << "token            riesz_dr(x100)  direct(x100)  P(Y|T=1)  n_treated\n";
  for (const auto& r : report.rows) {
    std::string tok = r.token;
    tok.resize(16, ' ');
    out << tok << ' ';
    if (r.skipped) {
      out << "skipped: " << r.skip_reason << '\n';
      continue;
    }
    std::string c1 = fmt_fixed(r.riesz_dr_effect * 100.0, 2);
    std::string c2 = fmt_fixed(r.direct_effect * 100.0, 2);
    c1.insert(0, c1.size() < 14 ? 14 - c1.size() : 0, ' ');
    c2.insert(0, c2.size() < 13 ? 13 - c2.size() : 0, ' ');
    out << c1 << ' ' << c2 << "  " << fmt_fixed(r.p_y_given_t1, 4) << "  " << r.n_treated << '\n';
  }
  return out.str();
}

}  // namespace feffect
