#pragma once

#include "fsprobe/core.hpp"
#include "fsprobe/degeneracy.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fsprobe::app {

struct DemoConfig {
  TrainConfig train{.epochs = 2000};
  std::vector<double> lambdas = default_lambda_grid();
  double ce_tolerance = 1e-3;
};

struct DemoResult {
  SeparatingHyperplane hyperplane;
  std::vector<SweepRow> sweep;
  SweepCheck check;
  bool mahalanobis_inequality = false;
  TrainTrace free_opt;
  TrainTrace quadratic;
  TrainTrace free_opt_reg;
};

/// Sweep plus the three training trajectories on one separable support.
DemoResult run_degeneracy_demo(const SupportView& support, const DemoConfig& config);

std::string sweep_csv(const std::vector<SweepRow>& rows);
/// One row per record; the initial state is epoch 0.
std::string trajectory_csv(const TrainTrace& trace);

/// Writes sweep.csv and trajectory_{free_opt,q_probe,free_opt_reg}.csv.
void write_demo_tables(const std::filesystem::path& dir, const DemoResult& result);

}  // namespace fsprobe::app
