#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "tikholearn/model.hpp"

namespace tikholearn {

/// Coefficients of a problem instance in the singular bases:
/// xi_i = <x, v_i> and nu_i = <eta, u_i> with eta = y - A x.
struct CoefficientFrame {
  Eigen::VectorXd xi;
  Eigen::VectorXd nu;
};

inline CoefficientFrame coefficient_frame(const ForwardModel& model,
                                          const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y) {
  if (x.size() != model.signal_dim() || y.size() != model.m)
    throw std::invalid_argument("shape error");
  CoefficientFrame f;
  f.xi = model.svd_v.transpose() * x;
  f.nu = model.svd_u.transpose() * (y - model.a * x);
  return f;
}

namespace detail {

/// Spectral filter factor t*s / (t*s^2 + 1 - t).
inline double filter_factor(double s, double t) {
  return t * s / (t * s * s + (1.0 - t));
}

/// d/dt of the filter factor: s / (t*s^2 + 1 - t)^2.
inline double filter_factor_dt(double s, double t) {
  const double den = t * s * s + (1.0 - t);
  return s / (den * den);
}

struct LineSearchResult {
  double t = 0.0;
  double value = 0.0;
  bool boundary = false;
};

/**
 * Globally minimizes a smooth objective on [0,1]: a uniform grid scan
 * locates the best bracket, golden-section refines it to `refine_tol`,
 * and when the derivative changes sign near the refined point a bisection
 * on the derivative sharpens the critical point to machine width.  The
 * best grid value (including the exact endpoints 0 and 1) always remains
 * a candidate, so endpoint minima are returned exactly.
 */
template <class F, class G>
LineSearchResult minimize_unit_interval(F&& f, G&& g, int grid_points,
                                        double refine_tol) {
  const int n = std::max(grid_points, 16);
  const double step = 1.0 / static_cast<double>(n - 1);

  double best_t = 0.0;
  double best_f = f(0.0);
  for (int i = 1; i < n; ++i) {
    const double t = (i == n - 1) ? 1.0 : i * step;
    const double ft = f(t);
    if (ft < best_f) {
      best_f = ft;
      best_t = t;
    }
  }

  const double lo = std::max(0.0, best_t - step);
  const double hi = std::min(1.0, best_t + step);

  const double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > refine_tol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double t_best = 0.5 * (a + b);
  double v_best = f(t_best);
  if (best_f < v_best) {
    t_best = best_t;
    v_best = best_f;
  }

  // Near the minimum the objective flattens below float resolution, so the
  // golden bracket can drift by ~sqrt(eps).  The analytic derivative does
  // not: when it changes sign across the original grid bracket, bisect it
  // down to machine width.
  double pa = lo;
  double pb = hi;
  if (pa < pb && g(pa) < 0.0 && g(pb) > 0.0) {
    for (int it = 0; it < 200 && (pb - pa) > 1e-16; ++it) {
      const double mid = 0.5 * (pa + pb);
      if (g(mid) < 0.0)
        pa = mid;
      else
        pb = mid;
    }
    const double t_root = 0.5 * (pa + pb);
    const double v_root = f(t_root);
    if (v_root <= v_best) {
      t_best = t_root;
      v_best = v_root;
    }
  }

  LineSearchResult out;
  out.t = t_best;
  out.value = v_best;
  out.boundary = (t_best == 0.0 || t_best == 1.0);
  return out;
}

/// Minimizes t -> || Z^t - target ||^2 given the data and target expressed
/// in the singular bases (yu = U^T y, xv = V^T target).
inline LineSearchResult minimize_reconstruction(const Eigen::VectorXd& s,
                                                const Eigen::VectorXd& yu,
                                                const Eigen::VectorXd& xv,
                                                int grid_points,
                                                double refine_tol) {
  const Eigen::Index r = s.size();
  auto obj = [&](double t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double res = filter_factor(s[i], t) * yu[i] - xv[i];
      acc += res * res;
    }
    return acc;
  };
  auto dobj = [&](double t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double res = filter_factor(s[i], t) * yu[i] - xv[i];
      acc += res * filter_factor_dt(s[i], t) * yu[i];
    }
    return 2.0 * acc;
  };
  return minimize_unit_interval(obj, dobj, grid_points, refine_tol);
}

}  // namespace detail

/// Tikhonov solution for the convex combination weight t in [0,1]:
/// Z^t = sum_i [t s_i / (t s_i^2 + 1 - t)] <y, u_i> v_i, with Z^0 = 0 and
/// Z^1 evaluated through the pseudo-inverse.
inline Eigen::VectorXd solve(const ForwardModel& model, const Eigen::VectorXd& y,
                             double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("parameter out of range");
  if (y.size() != model.m) throw std::invalid_argument("shape error");
  if (t == 0.0) return Eigen::VectorXd::Zero(model.signal_dim());
  if (t == 1.0) return pseudo_inverse_apply(model, y);
  Eigen::VectorXd coeffs = model.svd_u.transpose() * y;
  for (Eigen::Index i = 0; i < model.d; ++i)
    coeffs[i] *= detail::filter_factor(model.svd_s[i], t);
  return model.svd_v * coeffs;
}

/// || Z^t - x ||.
inline double reconstruction_error(const ForwardModel& model,
                                   const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& x, double t) {
  if (x.size() != model.signal_dim()) throw std::invalid_argument("shape error");
  return (solve(model, y, t) - x).norm();
}

/// Derivative of half the squared reconstruction error,
/// H(t) = <R(t), R'(t)>, evaluated by the coefficient sum.
inline double error_derivative(const ForwardModel& model, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& x, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("parameter out of range");
  const CoefficientFrame f = coefficient_frame(model, x, y);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < model.d; ++i) {
    const double s = model.svd_s[i];
    const double den = t * s * s + (1.0 - t);
    const double num = -(1.0 - t) * f.xi[i] + t * s * f.nu[i];
    acc += s * num * (s * f.xi[i] + f.nu[i]) / (den * den * den);
  }
  return acc;
}

/// Global minimizer of t -> || Z^t - x ||^2 over [0,1] by grid scan plus
/// golden-section refinement; returns 0 for zero data.
inline double oracle_parameter(const ForwardModel& model, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& x, int grid_points = 512,
                               double refine_tol = 1e-10) {
  if (y.size() != model.m || x.size() != model.signal_dim())
    throw std::invalid_argument("shape error");
  if (grid_points < 16) throw std::invalid_argument("grid too coarse");
  if (y.norm() == 0.0) return 0.0;
  const Eigen::VectorXd yu = model.svd_u.transpose() * y;
  const Eigen::VectorXd xv = model.svd_v.transpose() * x;
  return detail::minimize_reconstruction(model.svd_s, yu, xv, grid_points,
                                         refine_tol)
      .t;
}

/// Closed-form optimal weight for the pure denoising problem (A = I):
/// clamp(<y, x> / <y, y>, 0, 1); 0 for zero data.
inline double denoising_closed_form(const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& x) {
  if (y.size() != x.size()) throw std::invalid_argument("shape error");
  const double yy = y.squaredNorm();
  if (yy == 0.0) return 0.0;
  return std::clamp(y.dot(x) / yy, 0.0, 1.0);
}

/// alpha = (1 - t) / t, mapping the weight t in (0,1] to the classical
/// regularization parameter.
inline double t_to_alpha(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("alpha infinite");
  if (t > 1.0) throw std::invalid_argument("parameter out of range");
  return (1.0 - t) / t;
}

inline double alpha_to_t(double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("parameter out of range");
  if (std::isinf(alpha)) return 0.0;
  return 1.0 / (1.0 + alpha);
}

}  // namespace tikholearn
