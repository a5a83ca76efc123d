#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tikholearn/model.hpp"
#include "tikholearn/sampling.hpp"

namespace tikholearn {

/// Spectrum of the empirical covariance with the detected signal subspace.
struct SubspaceEstimate {
  Eigen::VectorXd eigenvalues;  // length m, nonincreasing, >= 0
  Eigen::MatrixXd basis;        // m x h_detected, orthonormal columns
  int h_detected = 0;
  double gap_ratio = 1.0;       // eigenvalue ratio at the chosen cut
  Eigen::Index n = 0;           // sample count behind the covariance
  double lambda_min_hat = 0.0;  // h_detected-th eigenvalue
  int p_index = 0;              // ground-truth diagnostic, 0 when unknown

  Eigen::VectorXd project(const Eigen::VectorXd& y) const {
    return basis * (basis.transpose() * y);
  }
};

enum class GapPolicy { max_ratio, threshold };

/// Noncentered empirical covariance (1/n) sum_i Y_i Y_i^T.
inline Eigen::MatrixXd empirical_covariance(const Dataset& dataset) {
  if (dataset.n() < 1) throw std::invalid_argument("empty dataset");
  Eigen::MatrixXd cov =
      (dataset.ys * dataset.ys.transpose()) / static_cast<double>(dataset.n());
  return 0.5 * (cov + cov.transpose());
}

namespace detail {

/// Rank pick by maximal consecutive eigenvalue ratio, with an additive
/// regularizer so zero tails do not divide by zero.
inline std::pair<int, double> max_ratio_cut(const Eigen::VectorXd& eigs,
                                            double eps) {
  const Eigen::Index m = eigs.size();
  int best_i = 1;
  double best_ratio = 0.0;
  for (Eigen::Index i = 1; i < m; ++i) {
    const double ratio = (eigs[i - 1] + eps) / (eigs[i] + eps);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_i = static_cast<int>(i);
    }
  }
  return {best_i, best_ratio};
}

}  // namespace detail

/**
 * Eigendecomposition of a covariance with rank detection.  The default
 * policy cuts at the largest consecutive-eigenvalue ratio; a threshold
 * policy keeps every eigenvalue above the given value; an explicit
 * h_override bypasses detection.
 */
inline SubspaceEstimate detect_rank_and_project(
    const Eigen::MatrixXd& cov, std::optional<int> h_override = std::nullopt,
    GapPolicy policy = GapPolicy::max_ratio, double threshold_value = 0.0,
    Eigen::Index n_samples = 0) {
  if (cov.rows() != cov.cols() || cov.rows() < 1)
    throw std::invalid_argument("shape error");
  const Eigen::Index m = cov.rows();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("decomposition failed");

  SubspaceEstimate est;
  est.eigenvalues.resize(m);
  Eigen::MatrixXd vectors(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    est.eigenvalues[i] = std::max(eig.eigenvalues()[m - 1 - i], 0.0);
    vectors.col(i) = eig.eigenvectors().col(m - 1 - i);
  }
  const double eps = 1e-15 * std::max(est.eigenvalues.sum(), 1e-300);

  int h = 0;
  if (h_override) {
    if (*h_override < 1 || *h_override > m)
      throw std::invalid_argument("rank out of range");
    h = *h_override;
  } else if (policy == GapPolicy::max_ratio) {
    if (est.eigenvalues[0] - est.eigenvalues[m - 1] <= eps)
      throw std::runtime_error("no spectral gap");
    h = detail::max_ratio_cut(est.eigenvalues, eps).first;
  } else {
    // Eigenvalues are sorted, so h counts the leading block above threshold.
    while (h < m && est.eigenvalues[h] > threshold_value) ++h;
    if (h == 0) throw std::runtime_error("no spectral gap");
  }

  est.h_detected = h;
  est.basis = vectors.leftCols(h);
  est.gap_ratio = (h < m) ? (est.eigenvalues[h - 1] + eps) / (est.eigenvalues[h] + eps)
                          : (est.eigenvalues[h - 1] + eps) / eps;
  est.lambda_min_hat = est.eigenvalues[h - 1];
  est.n = n_samples;
  return est;
}

/// Convenience: covariance plus detection in one call.
inline SubspaceEstimate estimate_subspace(const Dataset& dataset,
                                          std::optional<int> h_override = std::nullopt,
                                          GapPolicy policy = GapPolicy::max_ratio,
                                          double threshold_value = 0.0) {
  return detect_rank_and_project(empirical_covariance(dataset), h_override, policy,
                                 threshold_value, dataset.n());
}

/// Empirical estimators x_hat = A^dagger P y and eta_hat = y - P y, where
/// P projects onto the detected subspace.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> estimate_signal_and_noise(
    const ForwardModel& model, const SubspaceEstimate& est,
    const Eigen::VectorXd& y) {
  if (y.size() != model.m || est.basis.rows() != model.m)
    throw std::invalid_argument("shape error");
  const Eigen::VectorXd py = est.project(y);
  return {pseudo_inverse_apply(model, py), y - py};
}

/// Spectral norm of the difference of the orthogonal projections spanned
/// by two orthonormal bases of equal rank.
inline double projection_distance(const Eigen::MatrixXd& p_basis,
                                  const Eigen::MatrixXd& q_basis) {
  if (p_basis.rows() != q_basis.rows())
    throw std::invalid_argument("shape error");
  if (p_basis.cols() != q_basis.cols())
    throw std::invalid_argument("incomparable projections");
  const Eigen::MatrixXd diff = p_basis * p_basis.transpose() -
                               q_basis * q_basis.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(diff);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// Arguments for the finite-sample projection error bound.
struct BoundInputs {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index h = 0;
  double tau = 0.0;
  double sigma = 0.0;
  double lambda_min = 0.0;
};

/// Shape of the finite-sample bound with all absolute constants set to 1.
/// This is a scale diagnostic for rate checks, not a certified bound.
inline double theoretical_bound(const BoundInputs& in) {
  if (in.n < 1 || in.m < 1 || in.h < 1)
    throw std::invalid_argument("invalid dimensions");
  if (!(in.lambda_min > 0.0)) throw std::invalid_argument("invalid spectrum");
  if (in.tau < 0.0 || in.sigma < 0.0)
    throw std::invalid_argument("invalid bound inputs");
  const double n = static_cast<double>(in.n);
  const double m = static_cast<double>(in.m);
  const double h = static_cast<double>(in.h);
  const double il = 1.0 / in.lambda_min;
  const double s = in.sigma;
  const double sqrt_mn = std::sqrt(m / n);
  return il * std::sqrt(h * m / n) + s * (std::sqrt(h) + il * m / std::sqrt(n)) +
         s * s * il * std::sqrt(h) + s * s * s * il * std::sqrt(m) +
         in.tau * (il * sqrt_mn + s * (1.0 + il * sqrt_mn) + s * s * il) +
         in.tau * in.tau * il / std::sqrt(n);
}

/// Population covariance of the observations together with the true signal
/// subspace in data space and the smallest nonzero signal eigenvalue.
struct PopulationCovariance {
  Eigen::MatrixXd sigma_y;   // m x m
  Eigen::MatrixXd pi_basis;  // m x h, orthonormal
  double lambda_min = 0.0;   // smallest nonzero eigenvalue of the signal part
};

inline PopulationCovariance population_covariance(const ForwardModel& model,
                                                  const SamplingSpec& spec) {
  spec.validate();
  if (spec.signal_dim() != model.signal_dim())
    throw std::invalid_argument("shape error");

  Eigen::MatrixXd sigma_ax;
  if (spec.signal_dist == SignalDist::deterministic) {
    if (static_cast<int>(spec.deterministic_signals.size()) < spec.h)
      throw std::invalid_argument("rank-deficient signal model");
    sigma_ax = Eigen::MatrixXd::Zero(model.m, model.m);
    for (const auto& x : spec.deterministic_signals) {
      const Eigen::VectorXd ax = model.a * x;
      sigma_ax.noalias() += ax * ax.transpose();
    }
    sigma_ax /= static_cast<double>(spec.deterministic_signals.size());
  } else {
    // Unit-variance coefficients on an orthonormal basis give Sigma_X = B B^T.
    const Eigen::MatrixXd ab = model.a * spec.subspace_basis;
    sigma_ax = ab * ab.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_ax);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("decomposition failed");

  PopulationCovariance pop;
  pop.sigma_y = sigma_ax + spec.sigma * spec.sigma *
                               Eigen::MatrixXd::Identity(model.m, model.m);
  pop.pi_basis.resize(model.m, spec.h);
  for (int i = 0; i < spec.h; ++i) {
    const Eigen::Index k = model.m - 1 - i;
    pop.pi_basis.col(i) = eig.eigenvectors().col(k);
    pop.lambda_min = eig.eigenvalues()[k];
  }
  if (!(pop.lambda_min > 0.0))
    throw std::invalid_argument("rank-deficient signal model");
  return pop;
}

/// Both sides of the spectral projection perturbation inequality for a
/// pair of symmetric PSD matrices at the j-th distinct positive eigenvalue
/// of the first matrix (0-based, descending).
struct PerturbationCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool applicable = false;  // hypothesis ||A - B|| < gap/4 held
  bool holds = false;
};

inline PerturbationCheck perturbation_bound_check(const Eigen::MatrixXd& mat_a,
                                                  const Eigen::MatrixXd& mat_b,
                                                  int j) {
  if (mat_a.rows() != mat_a.cols() || mat_b.rows() != mat_b.cols() ||
      mat_a.rows() != mat_b.rows())
    throw std::invalid_argument("shape error");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(mat_a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(mat_b);
  if (ea.info() != Eigen::Success || eb.info() != Eigen::Success)
    throw std::runtime_error("decomposition failed");

  const Eigen::Index m = mat_a.rows();
  std::vector<double> desc_a(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    desc_a[static_cast<std::size_t>(i)] = ea.eigenvalues()[m - 1 - i];

  const double scale = std::max(std::abs(desc_a.front()), 1.0);
  const double group_tol = 1e-9 * scale;
  std::vector<double> distinct;
  std::vector<int> cum_counts;  // eigenvectors with eigenvalue >= distinct[k]
  for (double v : desc_a) {
    if (v <= group_tol) break;  // strictly positive eigenvalues only
    if (distinct.empty() || distinct.back() - v > group_tol) {
      distinct.push_back(v);
      cum_counts.push_back(cum_counts.empty() ? 1 : cum_counts.back() + 1);
    } else {
      ++cum_counts.back();
    }
  }
  if (j < 0 || j >= static_cast<int>(distinct.size()))
    throw std::invalid_argument("index out of range");

  const double alpha_j = distinct[static_cast<std::size_t>(j)];
  const double alpha_next =
      (j + 1 < static_cast<int>(distinct.size())) ? distinct[static_cast<std::size_t>(j) + 1] : 0.0;
  const double gap = alpha_j - alpha_next;
  const int dim_p = cum_counts[static_cast<std::size_t>(j)];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(mat_a - mat_b);
  const double perturbation = ed.eigenvalues().cwiseAbs().maxCoeff();

  PerturbationCheck check;
  check.rhs = (gap > 0.0) ? 2.0 * perturbation / gap : 0.0;
  check.applicable = perturbation < gap / 4.0;

  Eigen::MatrixXd p_basis(m, dim_p);
  Eigen::MatrixXd q_basis(m, dim_p);
  for (int i = 0; i < dim_p; ++i) {
    p_basis.col(i) = ea.eigenvectors().col(m - 1 - i);
    q_basis.col(i) = eb.eigenvectors().col(m - 1 - i);
  }
  check.lhs = projection_distance(p_basis, q_basis);
  check.holds = check.applicable && check.lhs <= check.rhs + 1e-12 * (1.0 + check.rhs);
  return check;
}

/// Ground-truth diagnostic: the largest singular index whose left singular
/// vector has a component in the signal subspace (threshold 1e-8); 0 when
/// no component exceeds the threshold.
inline int ground_truth_p_index(const ForwardModel& model,
                                const Eigen::MatrixXd& pi_basis,
                                double tol = 1e-8) {
  if (pi_basis.rows() != model.m) throw std::invalid_argument("shape error");
  int p = 0;
  for (Eigen::Index i = 0; i < model.d; ++i) {
    const double norm = (pi_basis.transpose() * model.svd_u.col(i)).norm();
    if (norm > tol) p = static_cast<int>(i) + 1;
  }
  return p;
}

}  // namespace tikholearn
