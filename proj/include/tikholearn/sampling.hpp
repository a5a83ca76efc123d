#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tikholearn/io.hpp"
#include "tikholearn/model.hpp"
#include "tikholearn/rng.hpp"

namespace tikholearn {

enum class SignalDist { gaussian_coefficients, rademacher_coefficients, deterministic };
enum class NoiseDist { gaussian_isotropic, rademacher };

inline const char* to_string(SignalDist s) {
  switch (s) {
    case SignalDist::gaussian_coefficients: return "gaussian_coefficients";
    case SignalDist::rademacher_coefficients: return "rademacher_coefficients";
    case SignalDist::deterministic: return "deterministic";
  }
  return "?";
}

inline const char* to_string(NoiseDist n) {
  return n == NoiseDist::gaussian_isotropic ? "gaussian_isotropic" : "rademacher";
}

/// Distributions of the signal (supported on an h-dimensional subspace)
/// and of the noise.  Generators produce unit-variance components; the
/// noise level `sigma` is interpreted in that scale.
struct SamplingSpec {
  Eigen::MatrixXd subspace_basis;  // d x h, orthonormal columns
  int h = 0;
  SignalDist signal_dist = SignalDist::gaussian_coefficients;
  std::vector<Eigen::VectorXd> deterministic_signals;
  NoiseDist noise_dist = NoiseDist::gaussian_isotropic;
  double sigma = 0.0;

  Eigen::Index signal_dim() const { return subspace_basis.rows(); }

  void validate() const {
    if (h < 1 || h > subspace_basis.rows() || h != subspace_basis.cols())
      throw std::invalid_argument("invalid subspace dimension");
    const Eigen::MatrixXd gram =
        subspace_basis.transpose() * subspace_basis -
        Eigen::MatrixXd::Identity(h, h);
    if (gram.cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("subspace basis not orthonormal");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("invalid noise level");
    if (signal_dist == SignalDist::deterministic) {
      if (deterministic_signals.empty())
        throw std::invalid_argument("deterministic signal list empty");
      for (const auto& x : deterministic_signals)
        if (x.size() != subspace_basis.rows())
          throw std::invalid_argument("deterministic signal has wrong length");
    }
  }
};

/// A batch of observations y_i = A x_i + sigma w_i with the seed that
/// produced it.  Ground truth (xs, ws) is kept when generated locally.
struct Dataset {
  Eigen::MatrixXd ys;                 // m x n, column i = Y_i
  std::optional<Eigen::MatrixXd> xs;  // d x n
  std::optional<Eigen::MatrixXd> ws;  // m x n
  std::uint64_t seed = 0;
  SamplingSpec spec;

  Eigen::Index n() const { return ys.cols(); }
};

inline Eigen::VectorXd sample_signal(const SamplingSpec& spec, Rng& rng) {
  switch (spec.signal_dist) {
    case SignalDist::gaussian_coefficients:
      return spec.subspace_basis * gaussian_vector(spec.h, rng);
    case SignalDist::rademacher_coefficients: {
      Eigen::VectorXd c(spec.h);
      for (int i = 0; i < spec.h; ++i) c[i] = rng.rademacher();
      return spec.subspace_basis * c;
    }
    case SignalDist::deterministic:
      return spec.deterministic_signals[rng.index(spec.deterministic_signals.size())];
  }
  throw std::logic_error("unreachable");
}

inline Eigen::VectorXd sample_noise(const SamplingSpec& spec, Eigen::Index m, Rng& rng) {
  Eigen::VectorXd w(m);
  if (spec.noise_dist == NoiseDist::gaussian_isotropic) {
    for (Eigen::Index i = 0; i < m; ++i) w[i] = rng.normal();
  } else {
    for (Eigen::Index i = 0; i < m; ++i) w[i] = rng.rademacher();
  }
  return w;
}

inline Dataset generate_dataset(const ForwardModel& model, const SamplingSpec& spec,
                                Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("empty dataset");
  if (spec.signal_dim() != model.signal_dim())
    throw std::invalid_argument("shape error");

  Dataset ds;
  ds.seed = seed;
  ds.spec = spec;
  ds.ys.resize(model.m, n);
  ds.xs.emplace(model.signal_dim(), n);
  ds.ws.emplace(model.m, n);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sample_signal(spec, rng);
    const Eigen::VectorXd w = sample_noise(spec, model.m, rng);
    ds.xs->col(i) = x;
    ds.ws->col(i) = w;
    ds.ys.col(i) = model.a * x + spec.sigma * w;
  }
  return ds;
}

/// Monte-Carlo estimate of the sub-gaussian norm: the sup over random unit
/// directions v and moment orders q of q^{-1/2} (mean |<xi, v>|^q)^{1/q}.
inline double estimate_subgaussian_norm(const std::vector<Eigen::VectorXd>& samples,
                                        int n_directions, int q_max, Rng& rng) {
  if (samples.empty()) throw std::invalid_argument("no data");
  if (n_directions < 1 || q_max < 1)
    throw std::invalid_argument("invalid estimator parameters");
  const Eigen::Index dim = samples.front().size();
  const double n = static_cast<double>(samples.size());
  double best = 0.0;
  for (int k = 0; k < n_directions; ++k) {
    const Eigen::VectorXd v = random_unit_vector(dim, rng);
    std::vector<double> abs_dots;
    abs_dots.reserve(samples.size());
    for (const auto& s : samples) abs_dots.push_back(std::abs(s.dot(v)));
    for (int q = 1; q <= q_max; ++q) {
      double acc = 0.0;
      for (double a : abs_dots) acc += std::pow(a, q);
      const double moment = std::pow(acc / n, 1.0 / q);
      best = std::max(best, moment / std::sqrt(static_cast<double>(q)));
    }
  }
  return best;
}

/// Dataset persistence: <stem>.csv holds one observation per row, optional
/// <stem>_x.csv / <stem>_w.csv hold the ground truth, <stem>_meta.txt the
/// generator parameters as key=value lines.
inline void save_dataset(const std::string& stem, const Dataset& ds) {
  save_matrix_csv(stem + ".csv", ds.ys.transpose());
  if (ds.xs) save_matrix_csv(stem + "_x.csv", ds.xs->transpose());
  if (ds.ws) save_matrix_csv(stem + "_w.csv", ds.ws->transpose());
  save_key_values(stem + "_meta.txt",
                  {{"d", std::to_string(ds.spec.signal_dim())},
                   {"m", std::to_string(ds.ys.rows())},
                   {"h", std::to_string(ds.spec.h)},
                   {"n", std::to_string(ds.n())},
                   {"sigma", detail::format_double(ds.spec.sigma)},
                   {"seed", std::to_string(ds.seed)},
                   {"signal_dist", to_string(ds.spec.signal_dist)},
                   {"noise_dist", to_string(ds.spec.noise_dist)}});
}

/// Loads the observations of a persisted dataset (rows = Y_i).
inline Eigen::MatrixXd load_dataset_observations(const std::string& path) {
  return load_matrix_csv(path).transpose();
}

}  // namespace tikholearn
