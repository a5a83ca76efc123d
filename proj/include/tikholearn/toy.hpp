#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "tikholearn/model.hpp"

namespace tikholearn {

/**
 * Two-dimensional toy problem with an orthogonal operator, the fixed
 * signal x = (1, 0) and a single noise draw.  sigma1 and sigma2 are the
 * noise components along the operator columns; eps1 and eps2 the errors
 * of the empirical projection.  All closed forms below are exact.
 */
struct ToyInstance {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double sigma = 0.0;  // underlying noise level, informational
};

namespace detail {

inline double toy_denominator(const ToyInstance& inst) {
  const double u = 1.0 + inst.sigma1;
  const double den = u * u + inst.sigma2 * inst.sigma2;
  if (!(den > 1e-300)) throw std::invalid_argument("degenerate denominator");
  return den;
}

}  // namespace detail

/// Optimal weight for the true signal: (1+s1) / ((1+s1)^2 + s2^2), clamped.
inline double exact_t_star(const ToyInstance& inst) {
  const double den = detail::toy_denominator(inst);
  return std::clamp((1.0 + inst.sigma1) / den, 0.0, 1.0);
}

/// Optimal weight for the projected proxy: (1+s1)^2 / ((1+s1)^2 + s2^2).
inline double exact_t_bar(const ToyInstance& inst) {
  const double den = detail::toy_denominator(inst);
  const double u = 1.0 + inst.sigma1;
  return std::clamp(u * u / den, 0.0, 1.0);
}

struct ToyErrors {
  double err_xbar = 0.0;  // || x_bar - x ||
  double r_tstar = 0.0;   // reconstruction error at the optimal weight
  double r_tbar = 0.0;    // reconstruction error at the proxy weight
};

inline ToyErrors exact_errors(const ToyInstance& inst) {
  const double den = detail::toy_denominator(inst);
  const double u = 1.0 + inst.sigma1;
  ToyErrors e;
  e.err_xbar = std::abs(inst.sigma1);
  e.r_tstar = std::abs(inst.sigma2) / std::sqrt(den);
  e.r_tbar = std::sqrt(inst.sigma1 * inst.sigma1 * u * u +
                       inst.sigma2 * inst.sigma2) /
             std::sqrt(den);
  return e;
}

/// Minimizer of the empirical objective as printed; the companion grid
/// oracle in the tests arbitrates the cases where the printed display is
/// internally inconsistent.
inline double exact_t_hat_n(const ToyInstance& inst) {
  const double den = detail::toy_denominator(inst);
  const double u = 1.0 + inst.sigma1;
  const double e1 = 1.0 + inst.eps1;
  const double num = inst.sigma2 * inst.eps2 + u * inst.eps1 + e1 * e1;
  return std::clamp(num / den, 0.0, 1.0);
}

struct ToyProjectedErrors {
  double r_pi_tstar = 0.0;
  double r_pi_tbar = 0.0;
};

/// Projected reconstruction errors evaluated from the quadratic
/// R_pi(t)^2 = (1+s1)^2 t^2 - 2 t (1+s1) + 1 (pure denoising geometry).
inline ToyProjectedErrors exact_projected_errors(const ToyInstance& inst) {
  const double u = 1.0 + inst.sigma1;
  auto r_pi = [u](double t) {
    return std::sqrt(std::max(u * u * t * t - 2.0 * t * u + 1.0, 0.0));
  };
  ToyProjectedErrors e;
  e.r_pi_tstar = r_pi(exact_t_star(inst));
  e.r_pi_tbar = r_pi(exact_t_bar(inst));
  return e;
}

/// 2x2 rotation operator for cross-checking the closed forms against the
/// generic spectral pipeline.
inline ForwardModel toy_rotation_model(double angle) {
  Eigen::MatrixXd a(2, 2);
  a << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return build_forward_model(a);
}

/// The vectors realizing a toy instance in standard coordinates:
/// y = (1+s1) A_1 + s2 A_2, x = e_1, x_bar = (1+s1) e_1 and
/// x_hat = (1+s1+e1, e2).
struct ToyVectors {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  Eigen::VectorXd x_bar;
  Eigen::VectorXd x_hat;
};

inline ToyVectors toy_vectors(const ForwardModel& model, const ToyInstance& inst) {
  if (model.m != 2 || model.signal_dim() != 2)
    throw std::invalid_argument("shape error");
  ToyVectors v;
  v.y = (1.0 + inst.sigma1) * model.a.col(0) + inst.sigma2 * model.a.col(1);
  v.x = Eigen::Vector2d(1.0, 0.0);
  v.x_bar = Eigen::Vector2d(1.0 + inst.sigma1, 0.0);
  v.x_hat = Eigen::Vector2d(1.0 + inst.sigma1 + inst.eps1, inst.eps2);
  return v;
}

/// Noise components sigma_i = sigma <w, A_i> for an explicit noise draw.
inline ToyInstance toy_from_noise(const ForwardModel& model, double sigma,
                                  const Eigen::Vector2d& w) {
  ToyInstance inst;
  inst.sigma = sigma;
  inst.sigma1 = sigma * w.dot(model.a.col(0));
  inst.sigma2 = sigma * w.dot(model.a.col(1));
  return inst;
}

}  // namespace tikholearn
