#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "tikholearn/model.hpp"
#include "tikholearn/sampling.hpp"

using namespace tikholearn;
using Catch::Approx;

namespace {

SamplingSpec canonical_spec(Eigen::Index d, int h, double sigma,
                            SignalDist sd = SignalDist::gaussian_coefficients,
                            NoiseDist nd = NoiseDist::gaussian_isotropic) {
  SamplingSpec spec;
  spec.subspace_basis = Eigen::MatrixXd::Identity(d, d).leftCols(h);
  spec.h = h;
  spec.sigma = sigma;
  spec.signal_dist = sd;
  spec.noise_dist = nd;
  return spec;
}

}  // namespace

TEST_CASE("signals stay on the subspace") {
  Rng rng(11);
  SamplingSpec spec = canonical_spec(6, 1, 0.0);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd x = sample_signal(spec, rng);
    CHECK(x.tail(5).norm() == 0.0);  // h = 1, basis e1
  }
}

TEST_CASE("deterministic signal list is honored") {
  Rng rng(12);
  SamplingSpec spec = canonical_spec(2, 1, 0.0, SignalDist::deterministic);
  spec.deterministic_signals = {Eigen::Vector2d(1.0, 0.0)};
  for (int k = 0; k < 10; ++k)
    CHECK((sample_signal(spec, rng) - Eigen::Vector2d(1, 0)).norm() == 0.0);
}

TEST_CASE("gaussian signal covariance has the intrinsic rank") {
  const Eigen::Index d = 20;
  const int h = 5, n = 100000;
  Rng rng(13);
  SamplingSpec spec = canonical_spec(d, h, 0.0);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sample_signal(spec, rng);
    cov.noalias() += x * x.transpose();
  }
  cov /= double(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd lam = eig.eigenvalues().reverse();
  CHECK(lam[h - 1] > 0.5);           // populated directions near unit variance
  CHECK(lam[h] <= 1e-12 * lam[0]);   // numerical rank h
}

TEST_CASE("rademacher noise in two dimensions") {
  Rng rng(14);
  SamplingSpec spec = canonical_spec(2, 1, 0.1,
                                     SignalDist::gaussian_coefficients,
                                     NoiseDist::rademacher);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd w = sample_noise(spec, 2, rng);
    CHECK(std::abs(w[0]) == 1.0);
    CHECK(std::abs(w[1]) == 1.0);
    CHECK(w.norm() == Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("gaussian noise is centered and isotropic") {
  const Eigen::Index m = 10;
  const int n = 100000;
  Rng rng(15);
  SamplingSpec spec = canonical_spec(m, 2, 0.1);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd w = sample_noise(spec, m, rng);
    mean += w;
    cov.noalias() += w * w.transpose();
  }
  mean /= double(n);
  cov /= double(n);
  CHECK(mean.norm() <= 4.0 * std::sqrt(double(m) / n));
  CHECK((cov - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() <= 5e-2);
}

TEST_CASE("dataset generation is reproducible and consistent") {
  Rng mrng(16);
  const auto model = build_forward_model(gaussian_matrix(8, 6, mrng));
  SamplingSpec spec = canonical_spec(6, 2, 0.3);

  const Dataset a = generate_dataset(model, spec, 40, 777);
  const Dataset b = generate_dataset(model, spec, 40, 777);
  CHECK((a.ys - b.ys).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(a.xs.has_value());
  REQUIRE(a.ws.has_value());
  for (Eigen::Index i = 0; i < a.n(); ++i)
    CHECK((a.ys.col(i) - model.a * a.xs->col(i) - spec.sigma * a.ws->col(i)).norm() <=
          1e-12);

  CHECK_THROWS_WITH(generate_dataset(model, spec, 0, 1), "empty dataset");
}

TEST_CASE("noiseless observations live in the mapped subspace") {
  Rng mrng(17);
  const auto model = build_forward_model(gaussian_matrix(9, 5, mrng));
  SamplingSpec spec = canonical_spec(5, 2, 0.0);
  const Dataset ds = generate_dataset(model, spec, 30, 5);

  const Eigen::MatrixXd ab = model.a * spec.subspace_basis;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(ab);
  const Eigen::MatrixXd basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(9, 2);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const Eigen::VectorXd y = ds.ys.col(i);
    CHECK((y - basis * (basis.transpose() * y)).norm() <= 1e-10 * (1.0 + y.norm()));
  }
}

TEST_CASE("sub-gaussian norm estimator") {
  Rng rng(18);
  std::vector<Eigen::VectorXd> zeros(100, Eigen::VectorXd::Zero(3));
  CHECK(estimate_subgaussian_norm(zeros, 8, 4, rng) == 0.0);

  std::vector<Eigen::VectorXd> rad;
  for (int i = 0; i < 20000; ++i)
    rad.push_back(Eigen::VectorXd::Constant(1, rng.rademacher()));
  const double k_rad = estimate_subgaussian_norm(rad, 4, 2, rng);
  CHECK(k_rad >= 0.5);
  CHECK(k_rad <= 1.1);

  std::vector<Eigen::VectorXd> gauss;
  for (int i = 0; i < 20000; ++i)
    gauss.push_back(Eigen::VectorXd::Constant(1, rng.normal()));
  const double k_gauss = estimate_subgaussian_norm(gauss, 4, 6, rng);
  CHECK(k_gauss >= 0.75);
  CHECK(k_gauss <= 1.35);

  CHECK_THROWS_WITH(estimate_subgaussian_norm({}, 4, 2, rng), "no data");
}

namespace {

struct TailCheck {
  double freq;
  double budget;
};

TailCheck tail_frequency(const std::vector<Eigen::VectorXd>& samples, double k_hat,
                         double tau, Rng& rng) {
  const Eigen::Index dim = samples.front().size();
  const Eigen::VectorXd v = random_unit_vector(dim, rng);
  std::size_t exceed = 0;
  for (const auto& s : samples)
    if (std::abs(s.dot(v)) > 3.0 * k_hat * tau) ++exceed;
  const double n = static_cast<double>(samples.size());
  const double p = std::min(1.0, 2.0 * std::exp(-tau * tau));
  const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
  return {static_cast<double>(exceed) / n, p + 3.0 * se};
}

}  // namespace

TEST_CASE("tail and norm bounds hold empirically for every generator") {
  const int n = 100000;
  const Eigen::Index dim = 12;
  Rng rng(19);

  SamplingSpec gspec = canonical_spec(dim, 4, 0.1);
  SamplingSpec rspec = canonical_spec(dim, 4, 0.1,
                                      SignalDist::rademacher_coefficients,
                                      NoiseDist::rademacher);

  std::vector<std::vector<Eigen::VectorXd>> generators(4);
  for (int i = 0; i < n; ++i) {
    generators[0].push_back(sample_signal(gspec, rng));
    generators[1].push_back(sample_signal(rspec, rng));
    generators[2].push_back(sample_noise(gspec, dim, rng));
    generators[3].push_back(sample_noise(rspec, dim, rng));
  }

  for (const auto& samples : generators) {
    const double k_hat = estimate_subgaussian_norm(samples, 16, 4, rng);
    REQUIRE(k_hat > 0.0);
    for (double tau : {1.0, 1.5, 2.0}) {
      const TailCheck tc = tail_frequency(samples, k_hat, tau, rng);
      CHECK(tc.freq <= tc.budget);

      std::size_t exceed = 0;
      const double cut = 9.0 * k_hat * (std::sqrt(double(dim)) + tau);
      for (const auto& s : samples)
        if (s.norm() > cut) ++exceed;
      const double p = std::min(1.0, 2.0 * std::exp(-tau * tau));
      const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
      CHECK(static_cast<double>(exceed) / n <= p + 3.0 * se);
    }
  }
}

TEST_CASE("signal and noise draws are uncorrelated") {
  const int n = 100000;
  const Eigen::Index d = 10, m = 8;
  Rng rng(20);
  SamplingSpec spec = canonical_spec(d, 3, 0.2);

  std::vector<double> xs(n), ws(n);
  for (int pair = 0; pair < 10; ++pair) {
    const Eigen::VectorXd v = random_unit_vector(d, rng);
    const Eigen::VectorXd u = random_unit_vector(m, rng);
    Rng draw(1000 + pair);
    double sx = 0, sw = 0, sxx = 0, sww = 0, sxw = 0;
    for (int i = 0; i < n; ++i) {
      const double a = sample_signal(spec, draw).dot(v);
      const double b = sample_noise(spec, m, draw).dot(u);
      sx += a;
      sw += b;
      sxx += a * a;
      sww += b * b;
      sxw += a * b;
    }
    const double cov = sxw / n - (sx / n) * (sw / n);
    const double var_x = sxx / n - (sx / n) * (sx / n);
    const double var_w = sww / n - (sw / n) * (sw / n);
    const double corr = cov / std::sqrt(var_x * var_w);
    CHECK(std::abs(corr) <= 0.02);
  }
  (void)xs;
  (void)ws;
}

TEST_CASE("small-norm signals match the lower-tail assumption") {
  // P[||X|| < r] <= 2 exp(-1/r^2) for the gaussian generator, checked on
  // moderate radii.  For r -> 0 the small-ball probability of a
  // fixed-dimension gaussian decays only polynomially, so the
  // super-exponential bound cannot hold there and is not asserted.
  const int n = 100000;
  Rng rng(21);
  SamplingSpec spec = canonical_spec(10, 5, 0.0);
  for (double r : {0.5, 0.75, 1.0}) {
    std::size_t below = 0;
    Rng draw(22);
    for (int i = 0; i < n; ++i)
      if (sample_signal(spec, draw).norm() < r) ++below;
    const double bound = 2.0 * std::exp(-1.0 / (r * r));
    const double se = std::sqrt(bound * (1.0 - bound) / n + 1e-12);
    CHECK(static_cast<double>(below) / n <= bound + 3.0 * se + 1e-6);
  }
}

TEST_CASE("dataset persistence round trip") {
  Rng mrng(23);
  const auto model = build_forward_model(gaussian_matrix(5, 4, mrng));
  SamplingSpec spec = canonical_spec(4, 2, 0.2);
  const Dataset ds = generate_dataset(model, spec, 12, 99);

  const auto stem =
      (std::filesystem::temp_directory_path() / "tikholearn_ds").string();
  save_dataset(stem, ds);
  const Eigen::MatrixXd ys = load_dataset_observations(stem + ".csv");
  CHECK((ys - ds.ys).cwiseAbs().maxCoeff() == 0.0);

  const auto meta = load_key_values(stem + "_meta.txt");
  CHECK(meta.at("n") == "12");
  CHECK(meta.at("seed") == "99");
  CHECK(meta.at("signal_dist") == "gaussian_coefficients");
  for (const char* suffix : {".csv", "_x.csv", "_w.csv", "_meta.txt"})
    std::filesystem::remove(stem + suffix);
}
