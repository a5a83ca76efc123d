#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tikholearn/io.hpp"
#include "tikholearn/model.hpp"
#include "tikholearn/param_learn.hpp"
#include "tikholearn/rng.hpp"
#include "tikholearn/sampling.hpp"
#include "tikholearn/subspace.hpp"
#include "tikholearn/svg.hpp"
#include "tikholearn/tikhonov.hpp"

namespace tikholearn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MatrixKind { identity, orthogonal, geometric_decay, vanishing_spectrum, csv };
enum class BasisKind { canonical, singular };

/// Full description of a batch experiment.
struct ExperimentConfig {
  int d = 100;
  int m = 100;
  int h = 5;
  int n = 1000;
  double sigma = 0.1;
  int n_trials = 1;
  int n_eval = 50;
  MatrixKind matrix_kind = MatrixKind::identity;
  double decay_ratio = 0.0;     // per-step ratio q of a geometric spectrum
  double sigma_d_target = 0.0;  // alternatively, the smallest singular value
  std::string matrix_csv;
  SignalDist signal_dist = SignalDist::gaussian_coefficients;
  NoiseDist noise_dist = NoiseDist::gaussian_isotropic;
  BasisKind signal_basis = BasisKind::canonical;
  int basis_offset = 0;  // first singular index used by BasisKind::singular
  std::uint64_t seed = 1;
  int grid_points = 512;
  double refine_tol = 1e-10;
  double tau = 1.0;
  MethodRequest method = MethodRequest::automatic;
  bool detect_rank = false;  // detect h for the projection instead of using `h`

  void validate() const {
    if (d < 1 || m < 1) throw ConfigError("dimensions must be positive");
    if (h < 1 || h > std::min(d, m)) throw ConfigError("h must satisfy 1 <= h <= min(d, m)");
    if (n < 1) throw ConfigError("n must be at least 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
    if (n_trials < 1 || n_eval < 1) throw ConfigError("n_trials and n_eval must be >= 1");
    if (grid_points < 16) throw ConfigError("grid_points must be >= 16");
    if (!(refine_tol > 0.0)) throw ConfigError("refine_tol must be > 0");
    if (tau < 0.0) throw ConfigError("tau must be >= 0");
    if ((matrix_kind == MatrixKind::identity || matrix_kind == MatrixKind::orthogonal) &&
        m != d)
      throw ConfigError("identity/orthogonal operators require m == d");
    if (matrix_kind == MatrixKind::csv && matrix_csv.empty())
      throw ConfigError("matrix_kind=csv requires matrix_csv");
    if (matrix_kind == MatrixKind::geometric_decay && decay_ratio <= 0.0 &&
        sigma_d_target <= 0.0)
      throw ConfigError("geometric_decay requires decay_ratio or sigma_d_target");
    if (basis_offset < 0) throw ConfigError("basis_offset must be >= 0");
  }
};

/// One evaluation instance: the unit of every experiment CSV.
struct TrialRecord {
  long trial_id = 0;
  std::uint64_t seed = 0;
  double t_star = 0.0;
  double t_hat = 0.0;
  double t_lin = std::numeric_limits<double>::quiet_NaN();
  double err_opt = 0.0;
  double err_hat = 0.0;
  double err_xhat = 0.0;
  double proj_dist = std::numeric_limits<double>::quiet_NaN();
  int h_detected = 0;
  double bound_b = 0.0;
};

struct ExperimentSummary {
  std::size_t n_records = 0;
  double mean_t_star = 0.0;
  double mean_t_hat = 0.0;
  double median_abs_t_gap = 0.0;
  double median_proj_dist = 0.0;
  double mean_err_opt = 0.0;
  double mean_err_hat = 0.0;
  double mean_err_xhat = 0.0;
  double bound_b = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialRecord> records;
  ExperimentSummary summary;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return (v.size() % 2) ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Sub-stream constants; trial indices keep the plain XOR derivation.
constexpr std::uint64_t kOperatorStream = 0x6f70657261746f72ULL;
constexpr std::uint64_t kEvalStream = 0x6576616c00000000ULL;

inline int worker_count(int n_trials) {
  int workers = 0;
  if (const char* env = std::getenv("TIKHOLEARN_THREADS")) {
    workers = std::atoi(env);
  }
  if (workers <= 0)
    workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;
  return std::min(workers, n_trials);
}

}  // namespace detail

/// Builds the forward operator described by the config, deterministically
/// from the config seed.
inline ForwardModel build_operator(const ExperimentConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, detail::kOperatorStream));
  switch (cfg.matrix_kind) {
    case MatrixKind::identity:
      return build_forward_model(Eigen::MatrixXd::Identity(cfg.m, cfg.d));
    case MatrixKind::orthogonal:
      return build_forward_model(random_orthonormal(cfg.d, cfg.d, rng));
    case MatrixKind::geometric_decay:
    case MatrixKind::vanishing_spectrum: {
      const Eigen::Index rank = std::min(cfg.m, cfg.d);
      double q = cfg.decay_ratio;
      if (cfg.matrix_kind == MatrixKind::vanishing_spectrum)
        q = (rank > 1) ? std::pow(1e-3, 1.0 / static_cast<double>(rank - 1)) : 1.0;
      else if (q <= 0.0)
        q = (rank > 1)
                ? std::pow(cfg.sigma_d_target, 1.0 / static_cast<double>(rank - 1))
                : 1.0;
      Eigen::VectorXd s(rank);
      for (Eigen::Index i = 0; i < rank; ++i) s[i] = std::pow(q, static_cast<double>(i));
      const Eigen::MatrixXd u = random_orthonormal(cfg.m, rank, rng);
      const Eigen::MatrixXd v = random_orthonormal(cfg.d, rank, rng);
      return build_forward_model(u * s.asDiagonal() * v.transpose());
    }
    case MatrixKind::csv:
      return build_forward_model(load_matrix_csv(cfg.matrix_csv));
  }
  throw std::logic_error("unreachable");
}

/// Signal/noise distributions for the config: the canonical basis spans
/// the first h coordinate directions, the singular basis the right
/// singular vectors starting at basis_offset.
inline SamplingSpec build_sampling_spec(const ExperimentConfig& cfg,
                                        const ForwardModel& model) {
  SamplingSpec spec;
  spec.h = cfg.h;
  spec.signal_dist = cfg.signal_dist;
  spec.noise_dist = cfg.noise_dist;
  spec.sigma = cfg.sigma;
  if (cfg.signal_basis == BasisKind::canonical) {
    spec.subspace_basis =
        Eigen::MatrixXd::Identity(model.signal_dim(), model.signal_dim())
            .leftCols(cfg.h);
  } else {
    if (cfg.basis_offset + cfg.h > model.d)
      throw ConfigError("basis_offset + h exceeds the operator rank");
    spec.subspace_basis = model.svd_v.middleCols(cfg.basis_offset, cfg.h);
  }
  spec.validate();
  return spec;
}

/**
 * Runs the batch: per trial, a fresh training set fits the empirical
 * projection, then n_eval fresh instances are scored.  Deterministic for a
 * given seed, also under any worker count: every trial derives its own
 * stream and records are sorted by trial_id before returning.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ForwardModel model = build_operator(cfg);
  const SamplingSpec spec = build_sampling_spec(cfg, model);
  const PopulationCovariance pop = population_covariance(model, spec);
  const double bound = theoretical_bound({cfg.n, cfg.m, cfg.h, cfg.tau, cfg.sigma,
                                          pop.lambda_min});

  std::vector<std::vector<TrialRecord>> per_trial(
      static_cast<std::size_t>(cfg.n_trials));
  std::atomic<int> next_trial{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const int trial = next_trial.fetch_add(1);
      if (trial >= cfg.n_trials || failed.load()) break;
      try {
        const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
        const Dataset train = generate_dataset(model, spec, cfg.n, trial_seed);
        const SubspaceEstimate est = estimate_subspace(
            train, cfg.detect_rank ? std::nullopt : std::optional<int>(cfg.h));

        int h_diag = 0;
        {
          const double eps = 1e-15 * std::max(est.eigenvalues.sum(), 1e-300);
          if (est.eigenvalues[0] - est.eigenvalues[est.eigenvalues.size() - 1] > eps)
            h_diag = detail::max_ratio_cut(est.eigenvalues, eps).first;
        }
        double proj = std::numeric_limits<double>::quiet_NaN();
        if (est.h_detected == cfg.h)
          proj = projection_distance(est.basis, pop.pi_basis);

        Rng eval_rng(derive_seed(trial_seed, detail::kEvalStream));
        auto& records = per_trial[static_cast<std::size_t>(trial)];
        records.reserve(static_cast<std::size_t>(cfg.n_eval));
        for (int e = 0; e < cfg.n_eval; ++e) {
          const Eigen::VectorXd x = sample_signal(spec, eval_rng);
          const Eigen::VectorXd w = sample_noise(spec, model.m, eval_rng);
          const Eigen::VectorXd y = model.a * x + cfg.sigma * w;

          TrialRecord rec;
          rec.trial_id = static_cast<long>(trial) * cfg.n_eval + e;
          rec.seed = trial_seed;
          rec.t_star = oracle_parameter(model, y, x, cfg.grid_points, cfg.refine_tol);
          rec.err_opt = reconstruction_error(model, y, x, rec.t_star);
          const ParamResult learned = regression_map(
              model, est, y, cfg.method, cfg.grid_points, cfg.refine_tol);
          rec.t_hat = learned.t_hat;
          rec.err_hat = reconstruction_error(model, y, x, rec.t_hat);
          rec.err_xhat = (estimate_signal_and_noise(model, est, y).first - x).norm();
          try {
            rec.t_lin = linearized_parameter(model, est, y).t_hat;
          } catch (const std::runtime_error&) {
            // degenerate linearization: leave t_lin unset
          }
          rec.proj_dist = proj;
          rec.h_detected = h_diag;
          rec.bound_b = bound;

          if (!std::isfinite(rec.err_hat) || !std::isfinite(rec.err_opt) ||
              rec.err_hat < rec.err_opt - 1e-10)
            throw NumericalError("optimality violated in trial record");
          const bool minimizing_method = learned.method != LearnMethod::linearized;
          if (minimizing_method &&
              rec.err_hat - rec.err_opt > 2.0 * rec.err_xhat + 1e-8)
            throw NumericalError("oracle excess bound violated in trial record");
          records.push_back(rec);
        }
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure_message.empty()) failure_message = ex.what();
      }
    }
  };

  const int workers = detail::worker_count(cfg.n_trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw NumericalError(failure_message);

  ExperimentResult result;
  result.config = cfg;
  for (auto& block : per_trial)
    result.records.insert(result.records.end(), block.begin(), block.end());
  std::sort(result.records.begin(), result.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              return a.trial_id < b.trial_id;
            });

  ExperimentSummary& s = result.summary;
  s.n_records = result.records.size();
  std::vector<double> gaps, projs;
  for (const auto& r : result.records) {
    s.mean_t_star += r.t_star;
    s.mean_t_hat += r.t_hat;
    s.mean_err_opt += r.err_opt;
    s.mean_err_hat += r.err_hat;
    s.mean_err_xhat += r.err_xhat;
    gaps.push_back(std::abs(r.t_hat - r.t_star));
    if (std::isfinite(r.proj_dist)) projs.push_back(r.proj_dist);
  }
  const double count = std::max<double>(1.0, static_cast<double>(s.n_records));
  s.mean_t_star /= count;
  s.mean_t_hat /= count;
  s.mean_err_opt /= count;
  s.mean_err_hat /= count;
  s.mean_err_xhat /= count;
  s.median_abs_t_gap = detail::median(gaps);
  s.median_proj_dist = detail::median(projs);
  s.bound_b = bound;
  return result;
}

struct ConvergenceRow {
  int n = 0;
  double median_proj_dist = 0.0;
  double median_param_gap = 0.0;
  double bound_b = 0.0;
};

/// One summary row per training-set size.
inline std::vector<ConvergenceRow> convergence_study(ExperimentConfig cfg,
                                                     const std::vector<int>& n_list) {
  if (n_list.empty()) throw ConfigError("empty n list");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw ConfigError("n list must be increasing");
  std::vector<ConvergenceRow> rows;
  rows.reserve(n_list.size());
  for (int n : n_list) {
    cfg.n = n;
    const ExperimentResult res = run_experiment(cfg);
    ConvergenceRow row;
    row.n = n;
    row.median_proj_dist = res.summary.median_proj_dist;
    row.median_param_gap = res.summary.median_abs_t_gap;
    row.bound_b = res.summary.bound_b;
    rows.push_back(row);
  }
  return rows;
}

namespace detail {

inline std::string csv_field(double v) {
  if (!std::isfinite(v)) return "";
  return format_double(v);
}

}  // namespace detail

/// Writes trials.csv, summary.txt and the three SVG plots.
inline void emit_outputs(const std::vector<TrialRecord>& records,
                         const std::string& out_dir) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  {
    std::ofstream out(dir / "trials.csv");
    if (!out) throw std::runtime_error("unwritable directory: " + out_dir);
    out << "trial_id,seed,t_star,t_hat,t_lin,err_opt,err_hat,err_xhat,"
           "proj_dist,h_detected,bound_b\n";
    for (const auto& r : records) {
      out << r.trial_id << ',' << r.seed << ',' << detail::csv_field(r.t_star)
          << ',' << detail::csv_field(r.t_hat) << ',' << detail::csv_field(r.t_lin)
          << ',' << detail::csv_field(r.err_opt) << ','
          << detail::csv_field(r.err_hat) << ',' << detail::csv_field(r.err_xhat)
          << ',' << detail::csv_field(r.proj_dist) << ',' << r.h_detected << ','
          << detail::csv_field(r.bound_b) << '\n';
    }
  }

  std::vector<double> t_star, t_hat, gaps;
  double mean_star = 0.0, mean_hat = 0.0;
  for (const auto& r : records) {
    t_star.push_back(r.t_star);
    t_hat.push_back(r.t_hat);
    gaps.push_back(std::abs(r.t_hat - r.t_star));
    mean_star += r.t_star;
    mean_hat += r.t_hat;
  }
  mean_star /= static_cast<double>(records.size());
  mean_hat /= static_cast<double>(records.size());

  {
    std::ofstream out(dir / "summary.txt");
    if (!out) throw std::runtime_error("unwritable directory: " + out_dir);
    out << "records=" << records.size() << '\n'
        << "mean_t_star=" << detail::format_double(mean_star) << '\n'
        << "mean_t_hat=" << detail::format_double(mean_hat) << '\n'
        << "median_abs_t_gap=" << detail::format_double(detail::median(gaps)) << '\n'
        << "bound_b=" << detail::format_double(records.front().bound_b) << '\n';
  }

  detail::write_scatter_svg((dir / "scatter.svg").string(), t_star, t_hat,
                            "optimal and learned parameters", "optimal", "learned");
  detail::write_histogram_svg((dir / "hist_tstar.svg").string(), t_star,
                              "distribution of the optimal parameter", "t");
  detail::write_histogram_svg((dir / "hist_that.svg").string(), t_hat,
                              "distribution of the learned parameter", "t");
}

/// Spectrum dump: eigenvalue per line with the detected cut marked.
inline void write_spectrum_csv(const std::string& path, const SubspaceEstimate& est) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "index,eigenvalue,cut\n";
  for (Eigen::Index i = 0; i < est.eigenvalues.size(); ++i)
    out << (i + 1) << ',' << detail::format_double(est.eigenvalues[i]) << ','
        << ((i + 1 == est.h_detected) ? 1 : 0) << '\n';
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline MatrixKind parse_matrix_kind(const std::string& s) {
  const std::string v = lower(s);
  if (v == "identity") return MatrixKind::identity;
  if (v == "orthogonal") return MatrixKind::orthogonal;
  if (v == "geometric_decay" || v == "geometric") return MatrixKind::geometric_decay;
  if (v == "vanishing_spectrum" || v == "vanishing") return MatrixKind::vanishing_spectrum;
  if (v == "csv") return MatrixKind::csv;
  throw ConfigError("unknown matrix_kind: " + s);
}

inline SignalDist parse_signal_dist(const std::string& s) {
  const std::string v = lower(s);
  if (v == "gaussian" || v == "gaussian_coefficients") return SignalDist::gaussian_coefficients;
  if (v == "rademacher" || v == "rademacher_coefficients")
    return SignalDist::rademacher_coefficients;
  if (v == "deterministic") return SignalDist::deterministic;
  throw ConfigError("unknown signal_dist: " + s);
}

inline NoiseDist parse_noise_dist(const std::string& s) {
  const std::string v = lower(s);
  if (v == "gaussian" || v == "gaussian_isotropic") return NoiseDist::gaussian_isotropic;
  if (v == "rademacher") return NoiseDist::rademacher;
  throw ConfigError("unknown noise_dist: " + s);
}

inline MethodRequest parse_method(const std::string& s) {
  const std::string v = lower(s);
  if (v == "auto" || v == "automatic") return MethodRequest::automatic;
  if (v == "grid_refine" || v == "grid") return MethodRequest::grid_refine;
  if (v == "linearized") return MethodRequest::linearized;
  if (v == "closed_form" || v == "closed") return MethodRequest::closed_form;
  throw ConfigError("unknown method: " + s);
}

inline BasisKind parse_basis_kind(const std::string& s) {
  const std::string v = lower(s);
  if (v == "canonical") return BasisKind::canonical;
  if (v == "singular") return BasisKind::singular;
  throw ConfigError("unknown signal_basis: " + s);
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  try {
    if (key == "d") cfg.d = std::stoi(value);
    else if (key == "m") cfg.m = std::stoi(value);
    else if (key == "h") cfg.h = std::stoi(value);
    else if (key == "n") cfg.n = std::stoi(value);
    else if (key == "sigma") cfg.sigma = std::stod(value);
    else if (key == "n_trials") cfg.n_trials = std::stoi(value);
    else if (key == "n_eval") cfg.n_eval = std::stoi(value);
    else if (key == "matrix_kind") cfg.matrix_kind = parse_matrix_kind(value);
    else if (key == "decay_ratio") cfg.decay_ratio = std::stod(value);
    else if (key == "sigma_d_target") cfg.sigma_d_target = std::stod(value);
    else if (key == "matrix_csv") cfg.matrix_csv = value;
    else if (key == "signal_dist") cfg.signal_dist = parse_signal_dist(value);
    else if (key == "noise_dist") cfg.noise_dist = parse_noise_dist(value);
    else if (key == "signal_basis") cfg.signal_basis = parse_basis_kind(value);
    else if (key == "basis_offset") cfg.basis_offset = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "grid_points") cfg.grid_points = std::stoi(value);
    else if (key == "refine_tol") cfg.refine_tol = std::stod(value);
    else if (key == "tau") cfg.tau = std::stod(value);
    else if (key == "method") cfg.method = parse_method(value);
    else if (key == "detect_rank") cfg.detect_rank = (value == "1" || lower(value) == "true");
    else throw ConfigError("unknown config key: " + key);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": " + value);
  }
}

}  // namespace detail

/// Loads a config from a JSON file ('{' first) or key=value lines.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  ExperimentConfig cfg;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(content);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("invalid JSON config: ") + ex.what());
    }
    for (const auto& [key, value] : j.items()) {
      std::string text;
      if (value.is_string()) text = value.get<std::string>();
      else if (value.is_boolean()) text = value.get<bool>() ? "1" : "0";
      else text = value.dump();
      detail::apply_config_entry(cfg, key, text);
    }
  } else {
    for (const auto& [key, value] : load_key_values(path))
      detail::apply_config_entry(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

}  // namespace tikholearn
