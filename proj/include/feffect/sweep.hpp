#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feffect/corpus.hpp"
#include "feffect/estimators.hpp"

namespace feffect {

struct SweepConfig {
  std::vector<double> taus{0.1, 0.3, 0.5};
  std::vector<double> epss{0.01, 0.05, 0.10};
  std::vector<std::int64_t> seeds{0, 11, 44};
  GenConfigSS base;  // n and covariate settings; tau/eps overwritten per cell
  EstimateOptions est;
  int threads = 1;
};

struct SweepCellResult {
  double tau = 0.0;
  double eps = 0.0;
  // One estimate per seed and method; the corpus is regenerated per seed.
  std::vector<double> direct;
  std::vector<double> dr_propensity;
  std::vector<double> dr_riesz;

  const std::vector<double>& by_method(EstimatorMethod m) const;
  double mae(EstimatorMethod m) const;      // x1 scale, vs the cell's tau
  double std_dev(EstimatorMethod m) const;  // sample sd of per-seed estimates
  double variance(EstimatorMethod m) const;
};

// One cell per (tau, eps): per seed, generate an SS corpus with that seed and
// run the estimation pipeline on it with the same seed.
std::vector<SweepCellResult> run_sweep(const SweepConfig& cfg);

// MAE (x100) grid with tau x method rows and one column pair per overlap.
std::string sweep_mae_csv(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells);
// Per-seed estimates, long format.
std::string sweep_cells_csv(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells);
std::string sweep_table(const SweepConfig& cfg, const std::vector<SweepCellResult>& cells);

}  // namespace feffect
