#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tikholearn {

/**
 * A forward operator together with its singular value decomposition.
 *
 * The builder normalizes the operator so the largest singular value is 1
 * and drops singular triplets below a relative rank tolerance, which
 * restricts the problem to the orthogonal complement of the null space.
 * After construction `d` is the retained rank; solutions returned by the
 * solvers live in the ambient signal space (length `signal_dim()`) but are
 * supported on the span of the retained right singular vectors.
 */
struct ForwardModel {
  Eigen::MatrixXd a;       // normalized operator, spectral norm 1
  Eigen::Index m = 0;      // data dimension (rows)
  Eigen::Index d = 0;      // retained rank
  Eigen::MatrixXd svd_u;   // m x d, orthonormal columns
  Eigen::VectorXd svd_s;   // length d, nonincreasing, svd_s[0] == 1
  Eigen::MatrixXd svd_v;   // signal_dim x d, orthonormal columns
  double rescale_factor = 1.0;  // division applied to enforce unit norm

  Eigen::Index signal_dim() const { return a.cols(); }

  /// True when every retained singular value equals 1 within `tol`
  /// (orthogonal columns); the closed-form parameter rule applies then.
  bool identity_like(double tol = 1e-12) const {
    for (Eigen::Index i = 0; i < d; ++i)
      if (std::abs(svd_s[i] - 1.0) > tol) return false;
    return d > 0;
  }
};

inline ForwardModel build_forward_model(const Eigen::MatrixXd& a,
                                        double rank_tolerance = 1e-10) {
  if (a.rows() < 1 || a.cols() < 1 || !a.allFinite() || a.norm() == 0.0)
    throw std::invalid_argument("degenerate operator");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw std::runtime_error("decomposition failed");

  const Eigen::VectorXd& s = svd.singularValues();
  const double top = s[0];
  if (!(top > 0.0) || !std::isfinite(top))
    throw std::invalid_argument("degenerate operator");

  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > rank_tolerance * top) ++rank;
  if (rank == 0) throw std::invalid_argument("degenerate operator");

  ForwardModel model;
  model.a = a / top;
  model.m = a.rows();
  model.d = rank;
  model.svd_u = svd.matrixU().leftCols(rank);
  model.svd_s = s.head(rank) / top;
  model.svd_v = svd.matrixV().leftCols(rank);
  model.rescale_factor = top;
  return model;
}

/// Spectral pseudo-inverse: sum of sigma_i^{-1} <y, u_i> v_i.
inline Eigen::VectorXd pseudo_inverse_apply(const ForwardModel& model,
                                            const Eigen::VectorXd& y) {
  if (y.size() != model.m) throw std::invalid_argument("shape error");
  const Eigen::VectorXd coeffs =
      (model.svd_u.transpose() * y).cwiseQuotient(model.svd_s);
  return model.svd_v * coeffs;
}

/// Projection onto the range of the operator, Q = A A^dagger.
inline Eigen::VectorXd range_projection(const ForwardModel& model,
                                        const Eigen::VectorXd& y) {
  if (y.size() != model.m) throw std::invalid_argument("shape error");
  return model.svd_u * (model.svd_u.transpose() * y);
}

}  // namespace tikholearn
