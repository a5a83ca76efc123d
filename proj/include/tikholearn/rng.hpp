#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace tikholearn {

/// Counter-style 64-bit generator (SplitMix64).  The state advances by a
/// fixed increment and every output is a bijective mix of the counter, so
/// the stream is fully determined by the seed and is identical across
/// platforms and standard-library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1); never 0, safe under log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the sine partner is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double phi = 2.0 * kPi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  double rademacher() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return std::min(k, n - 1);
  }

private:
  static constexpr double kPi = 3.14159265358979323846;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Per-trial stream derivation: base_seed XOR trial_index.  Distinct trials
/// get distinct seeds and may run in any order or concurrently.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ index;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Eigen::VectorXd random_unit_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v = gaussian_vector(n, rng);
  double nv = v.norm();
  while (nv < 1e-12) {
    v = gaussian_vector(n, rng);
    nv = v.norm();
  }
  return v / nv;
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd mat(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mat(i, j) = rng.normal();
  return mat;
}

/// Orthonormal rows x cols factor (cols <= rows) via QR of a gaussian
/// matrix, with the sign fix that makes the distribution Haar.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace tikholearn
