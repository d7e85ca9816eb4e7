#include "fsprobe/app/demo.hpp"

#include "fsprobe/app/formats.hpp"
#include "fsprobe/probes/free_opt.hpp"

#include <sstream>

namespace fsprobe::app {

DemoResult run_degeneracy_demo(const SupportView& support, const DemoConfig& config) {
  config.train.validate();
  DemoResult out;
  out.hyperplane = find_separator(support);
  const DegenerateFamily family(out.hyperplane);
  out.mahalanobis_inequality = wrong_prototype_farther_along_normal(family, support);
  out.sweep = divergence_sweep(support, config.lambdas);
  out.check = check_sweep(out.sweep, config.ce_tolerance);

  auto cmp = eigenvalue_trajectory_compare(support, config.train);
  out.free_opt = std::move(cmp.free_opt);
  out.quadratic = std::move(cmp.quadratic);
  out.free_opt_reg = free_opt_fit(support, config.train, true).second;
  return out;
}

namespace {

constexpr const char* kHeader =
    "lambda_or_epoch,ce,f1,f2,f2_tilde,fro_norm_M0,fro_norm_M1,max_eig_M0,max_eig_M1\n";

void row(std::ostream& out, double key, double ce, double f1, double f2, double f2t,
         const std::array<double, 2>& fro, const std::array<double, 2>& eig) {
  out << format_double(key) << ',' << format_double(ce) << ',' << format_double(f1) << ','
      << format_double(f2) << ',' << format_double(f2t) << ',' << format_double(fro[0]) << ','
      << format_double(fro[1]) << ',' << format_double(eig[0]) << ',' << format_double(eig[1]) << '\n';
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kHeader;
  for (const auto& r : rows) row(out, r.lambda, r.ce, r.f1, r.f2, r.f2_tilde, r.fro_norm, r.max_eig);
  return out.str();
}

std::string trajectory_csv(const TrainTrace& trace) {
  std::ostringstream out;
  out << kHeader;
  auto emit = [&](const TraceRecord& r) {
    row(out, static_cast<double>(r.epoch), r.ce, r.f1, r.f2, r.f2_tilde, r.fro_norm, r.max_eig);
  };
  emit(trace.initial);
  for (const auto& r : trace.epochs) emit(r);
  return out.str();
}

void write_demo_tables(const std::filesystem::path& dir, const DemoResult& result) {
  std::filesystem::create_directories(dir);
  write_file(dir / "sweep.csv", sweep_csv(result.sweep));
  write_file(dir / "trajectory_free_opt.csv", trajectory_csv(result.free_opt));
  write_file(dir / "trajectory_q_probe.csv", trajectory_csv(result.quadratic));
  write_file(dir / "trajectory_free_opt_reg.csv", trajectory_csv(result.free_opt_reg));
}

}  // namespace fsprobe::app
