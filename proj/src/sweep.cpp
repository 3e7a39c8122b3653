#include "feffect/sweep.hpp"

#include <cmath>
#include <sstream>

#include "feffect/util.hpp"

namespace feffect {

const std::vector<double>& SweepCellResult::by_method(EstimatorMethod m) const {
  switch (m) {
    case EstimatorMethod::direct: return direct;
    case EstimatorMethod::dr_propensity: return dr_propensity;
    case EstimatorMethod::dr_riesz: return dr_riesz;
  }
  return direct;
}

double SweepCellResult::mae(EstimatorMethod m) const {
  const auto& v = by_method(m);
  double s = 0.0;
  for (double x : v) s += std::abs(x - tau);
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double SweepCellResult::std_dev(EstimatorMethod m) const { return sample_std(by_method(m)); }

double SweepCellResult::variance(EstimatorMethod m) const { return sample_variance(by_method(m)); }

std::vector<SweepCellResult> run_sweep(const SweepConfig& cfg) {
  if (cfg.taus.empty() || cfg.epss.empty() || cfg.seeds.empty()) {
    throw ConfigError("sweep needs non-empty tau, eps and seed lists");
  }
  struct Unit {
    std::size_t cell;
    std::size_t seed_idx;
  };
  std::vector<SweepCellResult> cells(cfg.taus.size() * cfg.epss.size());
  std::vector<Unit> units;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    cells[ci].tau = cfg.taus[ci / cfg.epss.size()];
    cells[ci].eps = cfg.epss[ci % cfg.epss.size()];
    cells[ci].direct.resize(cfg.seeds.size());
    cells[ci].dr_propensity.resize(cfg.seeds.size());
    cells[ci].dr_riesz.resize(cfg.seeds.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) units.push_back({ci, si});
  }

  parallel_for(units.size(), cfg.threads, [&](std::size_t ui) {
    const Unit u = units[ui];
    SweepCellResult& cell = cells[u.cell];
    const std::int64_t seed = cfg.seeds[u.seed_idx];
    GenConfigSS gen = cfg.base;
    gen.tau = cell.tau;
    gen.eps = cell.eps;
    const Corpus corpus = generate_ss(gen, seed);
    const FeatureSpec spec =
        FeatureSpec::make_prefix(0, gen.vocab.treated_token, gen.vocab.untreated_token);
    const EffectEstimateSet est =
        estimate_feature_effect(corpus, spec, cfg.est, {seed}, 1);
    cell.direct[u.seed_idx] = est.direct.value;
    cell.dr_propensity[u.seed_idx] = est.dr_propensity.value;
    cell.dr_riesz[u.seed_idx] = est.dr_riesz.value;
  });
  return cells;
}

namespace {

constexpr EstimatorMethod kMethods[] = {EstimatorMethod::direct, EstimatorMethod::dr_propensity,
                                        EstimatorMethod::dr_riesz};

const SweepCellResult& cell_at(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells,
                               std::size_t ti, std::size_t ei) {
  return cells[ti * cfg.epss.size() + ei];
}

}  // namespace

std::string sweep_mae_csv(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells) {
  std::ostringstream out;
  out << "tau,method";
  for (double eps : cfg.epss) {
    out << ",mae_x100@eps=" << fmt_fixed(eps, 2) << ",std_x100@eps=" << fmt_fixed(eps, 2);
  }
  out << '\n';
  for (std::size_t ti = 0; ti < cfg.taus.size(); ++ti) {
    for (EstimatorMethod m : kMethods) {
      out << fmt_fixed(cfg.taus[ti], 2) << ',' << method_name(m);
      for (std::size_t ei = 0; ei < cfg.epss.size(); ++ei) {
        const auto& cell = cell_at(cfg, cells, ti, ei);
        out << ',' << fmt_fixed(cell.mae(m) * 100.0, 4) << ','
            << fmt_fixed(cell.std_dev(m) * 100.0, 4);
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string sweep_cells_csv(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells) {
  std::ostringstream out;
  out << "tau,eps,method,seed,estimate\n";
  for (const auto& cell : cells) {
    for (EstimatorMethod m : kMethods) {
      const auto& v = cell.by_method(m);
      for (std::size_t si = 0; si < v.size(); ++si) {
        out << fmt_fixed(cell.tau, 2) << ',' << fmt_fixed(cell.eps, 2) << ',' << method_name(m)
            << ',' << cfg.seeds[si] << ',' << fmt_fixed(v[si], 6) << '\n';
      }
    }
  }
  return out.str();
}

std::string sweep_table(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells) {
  std::ostringstream out;
  out << "MAE (x100) of feature effect estimates, mean +- sd over seeds\n";
  out << "tau    method         ";
  for (double eps : cfg.epss) {
    std::string h = "eps=" + fmt_fixed(eps, 2);
    h.resize(18, ' ');
    out << h;
  }
  out << '\n';
  for (std::size_t ti = 0; ti < cfg.taus.size(); ++ti) {
    for (EstimatorMethod m : kMethods) {
      std::string name = method_name(m);
      name.resize(15, ' ');
      out << fmt_fixed(cfg.taus[ti], 2) << "   " << name;
      for (std::size_t ei = 0; ei < cfg.epss.size(); ++ei) {
        const auto& cell = cell_at(cfg, cells, ti, ei);
        std::string v = fmt_fixed(cell.mae(m) * 100.0, 2) + " +- " +
                        fmt_fixed(cell.std_dev(m) * 100.0, 2);
        v.resize(18, ' ');
        out << v;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace feffect
