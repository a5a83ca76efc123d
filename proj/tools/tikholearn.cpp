#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tikholearn/tikholearn.hpp"

namespace {

using namespace tikholearn;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    values.push_back(std::stoi(cell));
  }
  if (values.empty()) throw ConfigError("empty list: " + text);
  return values;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    values.push_back(std::stod(cell));
  }
  if (values.empty()) throw ConfigError("empty list: " + text);
  return values;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  const ExperimentResult result = run_experiment(cfg);
  emit_outputs(result.records, out_dir);
  std::printf("wrote %zu records to %s\n", result.records.size(), out_dir.c_str());
  std::printf("mean t* = %.6f  mean t_hat = %.6f  median |t_hat - t*| = %.6f\n",
              result.summary.mean_t_star, result.summary.mean_t_hat,
              result.summary.median_abs_t_gap);
  return 0;
}

int cmd_convergence(const std::string& config_path, const std::string& n_text,
                    const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  const std::vector<int> n_list = parse_int_list(n_text);
  const auto rows = convergence_study(cfg, n_list);

  std::filesystem::create_directories(out_dir);
  std::ofstream out(std::filesystem::path(out_dir) / "convergence.csv");
  if (!out) throw std::runtime_error("unwritable directory: " + out_dir);
  out << "n,median_proj_dist,median_param_gap,bound_b\n";
  std::printf("%8s %18s %18s %12s\n", "n", "median ||P-P_hat||", "median |dt|", "bound");
  for (const auto& row : rows) {
    out << row.n << ',' << detail::format_double(row.median_proj_dist) << ','
        << detail::format_double(row.median_param_gap) << ','
        << detail::format_double(row.bound_b) << '\n';
    std::printf("%8d %18.6g %18.6g %12.6g\n", row.n, row.median_proj_dist,
                row.median_param_gap, row.bound_b);
  }
  return 0;
}

/// Sweeps the two-dimensional toy model over the noise level for a list of
/// alignment factors c (noise component along the first operator column is
/// c * sigma), emitting one CSV per factor.
int cmd_toy_sweep(const std::string& out_dir, int points,
                  const std::string& factor_text, int n_train,
                  std::uint64_t seed) {
  const std::vector<double> factors = parse_double_list(factor_text);
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  const double sigma_max = 1.0 / std::sqrt(2.0);

  for (double c : factors) {
    char name[64];
    std::snprintf(name, sizeof(name), "toy_sweep_c%.2f.csv", c);
    std::ofstream out(std::filesystem::path(out_dir) / name);
    if (!out) throw std::runtime_error("unwritable directory: " + out_dir);
    out << "sigma,sigma1,sigma2,t_star,t_bar,t_hat_n,err_xbar,r_tstar,r_tbar,"
           "r_that_n,rpi_tstar,rpi_tbar\n";
    for (int k = 0; k < points; ++k) {
      const double sigma = -sigma_max + 2.0 * sigma_max * k / (points - 1);
      ToyInstance inst;
      inst.sigma = sigma;
      inst.sigma1 = c * sigma;
      const double rest = 2.0 * sigma * sigma - inst.sigma1 * inst.sigma1;
      inst.sigma2 = rest > 0.0 ? std::sqrt(rest) : 0.0;
      // Projection errors at the scale the sample-size analysis predicts.
      const double eps_scale =
          (1.0 + std::sqrt(2.0) * std::abs(sigma)) / std::sqrt(static_cast<double>(n_train));
      inst.eps1 = eps_scale * rng.normal() / std::sqrt(2.0);
      inst.eps2 = eps_scale * rng.normal() / std::sqrt(2.0);

      const double t_star = exact_t_star(inst);
      const double t_bar = exact_t_bar(inst);
      const double t_hat_n = exact_t_hat_n(inst);
      const ToyErrors errs = exact_errors(inst);
      const ToyProjectedErrors perrs = exact_projected_errors(inst);
      const double u = 1.0 + inst.sigma1;
      const double r_that_n = std::sqrt((t_hat_n * u - 1.0) * (t_hat_n * u - 1.0) +
                                        t_hat_n * t_hat_n * inst.sigma2 * inst.sigma2);
      out << detail::format_double(sigma) << ',' << detail::format_double(inst.sigma1)
          << ',' << detail::format_double(inst.sigma2) << ','
          << detail::format_double(t_star) << ',' << detail::format_double(t_bar)
          << ',' << detail::format_double(t_hat_n) << ','
          << detail::format_double(errs.err_xbar) << ','
          << detail::format_double(errs.r_tstar) << ','
          << detail::format_double(errs.r_tbar) << ','
          << detail::format_double(r_that_n) << ','
          << detail::format_double(perrs.r_pi_tstar) << ','
          << detail::format_double(perrs.r_pi_tbar) << '\n';
    }
    std::printf("wrote %s\n", name);
  }
  return 0;
}

int cmd_spectrum(const std::string& dataset_path, const std::string& out_path,
                 std::optional<int> h_override) {
  const Eigen::MatrixXd ys = load_dataset_observations(dataset_path);
  Dataset ds;
  ds.ys = ys;
  const Eigen::MatrixXd cov = empirical_covariance(ds);
  const SubspaceEstimate est =
      detect_rank_and_project(cov, h_override, GapPolicy::max_ratio, 0.0, ys.cols());
  std::printf("samples: %ld, dimension: %ld\n", static_cast<long>(ys.cols()),
              static_cast<long>(ys.rows()));
  std::printf("detected rank: %d (gap ratio %.4g, lambda_min_hat %.6g)\n",
              est.h_detected, est.gap_ratio, est.lambda_min_hat);
  const Eigen::Index show = std::min<Eigen::Index>(est.eigenvalues.size(), 12);
  for (Eigen::Index i = 0; i < show; ++i)
    std::printf("  lambda_%ld = %.8g%s\n", static_cast<long>(i + 1), est.eigenvalues[i],
                (i + 1 == est.h_detected) ? "   <- cut" : "");
  if (!out_path.empty()) {
    write_spectrum_csv(out_path, est);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning near-optimal Tikhonov regularization parameters "
               "from noisy samples"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string n_text = "100,400,1600";
  std::string dataset_path;
  std::string spectrum_out;
  std::string factor_text = "1.0,1.2,0.7";
  int toy_points = 281;
  int toy_n = 100;
  std::uint64_t toy_seed = 7;
  int h_override = 0;
  bool toy_sweep = false;

  auto* run = app.add_subcommand("run", "run a batch experiment from a config file");
  run->add_option("--config", config_path, "config file (key=value or JSON)")->required();
  run->add_option("--out", out_dir, "output directory");

  auto* conv = app.add_subcommand("convergence", "summary table over training-set sizes");
  conv->add_option("--config", config_path, "config file (key=value or JSON)")->required();
  conv->add_option("--n", n_text, "comma-separated increasing list of n");
  conv->add_option("--out", out_dir, "output directory");

  auto* toy = app.add_subcommand("toy", "two-dimensional toy-model sweeps");
  toy->add_flag("--sweep", toy_sweep, "emit noise-level sweeps of the closed forms");
  toy->add_option("--out", out_dir, "output directory");
  toy->add_option("--points", toy_points, "sweep resolution");
  toy->add_option("--factor", factor_text, "alignment factors sigma1 = c * sigma");
  toy->add_option("--n", toy_n, "sample count behind the projection errors");
  toy->add_option("--seed", toy_seed, "seed for the projection-error draws");

  auto* spec = app.add_subcommand("spectrum", "covariance spectrum of a dataset CSV");
  spec->add_option("--dataset", dataset_path, "dataset CSV, one observation per row")
      ->required();
  spec->add_option("--out", spectrum_out, "spectrum CSV output path");
  spec->add_option("--h", h_override, "rank override instead of gap detection");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (conv->parsed()) return cmd_convergence(config_path, n_text, out_dir);
    if (toy->parsed()) {
      if (!toy_sweep) {
        std::fprintf(stderr, "toy: nothing to do (pass --sweep)\n");
        return 2;
      }
      return cmd_toy_sweep(out_dir, toy_points, factor_text, toy_n, toy_seed);
    }
    if (spec->parsed())
      return cmd_spectrum(dataset_path, spectrum_out,
                          h_override > 0 ? std::optional<int>(h_override) : std::nullopt);
  } catch (const tikholearn::ConfigError& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "numerical failure: %s\n", ex.what());
    return 3;
  }
  return 0;
}
