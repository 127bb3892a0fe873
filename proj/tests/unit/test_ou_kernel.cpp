#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdiff/errors.hpp"
#include "cdiff/ou_kernel.hpp"

#include <cmath>
#include <numbers>

using namespace cdiff;

namespace {

double log_normal_density(const Vec& y, const Vec& mean, double var) {
  const double d = static_cast<double>(y.size());
  return -0.5 * (y - mean).squaredNorm() / var - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

// Composite Simpson on [0, t]; independent of the library's Gauss-Legendre path.
template <class F>
double simpson(F f, double t, int panels = 2000) {
  const double h = t / panels;
  double s = f(0.0) + f(t);
  for (int i = 1; i < panels; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("mean_coeff examples") {
  const OUSchedule ou;
  CHECK(ou.mean_coeff(0.0) == 1.0);
  CHECK(ou.mean_coeff(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ou.mean_coeff(50.0) == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
  CHECK(std::abs(ou.noise_var(50.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(ou.mean_coeff(-1e-9), DomainError);
}

TEST_CASE("noise_var examples and monotonicity") {
  const OUSchedule ou;
  CHECK(ou.noise_var(0.0) == 0.0);
  CHECK(ou.noise_var(std::log(2.0)) == doctest::Approx(0.75).epsilon(1e-14));
  double prev = ou.noise_var(0.0);
  for (double t = 1e-4; t < 20.0; t *= 1.3) {
    const double v = ou.noise_var(t);
    CHECK(v > prev);
    CHECK(v < 1.0);
    prev = v;
  }
}

TEST_CASE("constant drift closed form") {
  const OUSchedule ou = OUSchedule::constant(1.7);
  for (double t : {0.0, 0.01, 0.3, 1.0, 4.0})
    CHECK(std::abs(ou.mean_coeff(t) - std::exp(-1.7 * t)) <= 1e-12);
}

TEST_CASE("tabulated drift against independent quadrature") {
  SUBCASE("linear data is reproduced exactly") {
    const OUSchedule ou = OUSchedule::tabulated({0.0, 1.0, 2.5, 4.0, 10.0}, {1.0, 1.1, 1.25, 1.4, 2.0});
    for (double t : {0.0, 0.2, 1.0, 3.3, 7.1, 10.0}) {
      const double exact = t + 0.05 * t * t;
      CHECK(std::abs(ou.integrated_drift(t) - exact) <= 1e-10);
      CHECK(std::abs(ou.mean_coeff(t) - std::exp(-exact)) <= 1e-10);
    }
  }
  SUBCASE("curved data against Simpson on the interpolant") {
    const OUSchedule ou = OUSchedule::tabulated({0.0, 0.5, 1.0, 2.0, 3.0}, {0.5, 0.9, 1.5, 1.6, 1.0});
    for (double t : {0.25, 0.8, 1.7, 2.9, 3.0, 4.5}) {
      const double oracle = simpson([&](double s) { return ou.delta(s); }, t);
      CHECK(std::abs(ou.mean_coeff(t) - std::exp(-oracle)) <= 1e-10);
    }
    const auto [lo, hi] = ou.drift_bounds(6.0);
    CHECK(lo > 0.0);
    CHECK(hi < 2.0);
  }
  CHECK_THROWS(OUSchedule::tabulated({0.0, 1.0}, {1.0, -1.0}));
  CHECK_THROWS(OUSchedule::tabulated({0.5, 1.0}, {1.0, 1.0}));
}

TEST_CASE("perturb") {
  const OUSchedule ou;
  SUBCASE("large t approaches the stationary law") {
    Rng rng(11);
    const Vec y0 = Vec::Constant(2, 3.0);
    const int draws = 100000;
    Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
    for (int i = 0; i < draws; ++i) {
      const Vec y = perturb(ou, y0, 30.0, rng);
      sum += y;
      sq += y.cwiseProduct(y);
    }
    const Vec mean = sum / draws;
    const Vec var = sq / draws - mean.cwiseProduct(mean);
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(mean[j]) <= 0.02);
      CHECK(std::abs(var[j] - 1.0) <= 0.03);
    }
  }
  SUBCASE("moments within 3 sigma bands") {
    Rng rng(12);
    const double t = 0.4;
    const Vec y0 = (Vec(3) << 1.0, -0.5, 0.25).finished();
    const double m = ou.mean_coeff(t), v = ou.noise_var(t);
    const int draws = 40000;
    Vec sum = Vec::Zero(3), sq = Vec::Zero(3);
    for (int i = 0; i < draws; ++i) {
      const Vec y = perturb(ou, y0, t, rng);
      sum += y;
      sq += (y - m * y0).cwiseProduct(y - m * y0);
    }
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(sum[j] / draws - m * y0[j]) <= 3.0 * std::sqrt(v / draws));
      CHECK(std::abs(sq[j] / draws - v) <= 3.0 * v * std::sqrt(2.0 / draws));
    }
  }
  SUBCASE("deterministic and domain checked") {
    Rng a(5), b(5);
    const Vec y0 = Vec::Ones(4);
    const Vec ya = perturb(ou, y0, 0.3, a), yb = perturb(ou, y0, 0.3, b);
    CHECK((ya.array() == yb.array()).all());
    CHECK_THROWS_AS(perturb(ou, y0, 0.0, a), DomainError);
  }
}

TEST_CASE("kernel_score") {
  const OUSchedule ou;
  const Vec y0 = Vec::Ones(1);
  const Vec zero = Vec::Zero(1);
  CHECK(kernel_score(ou, zero, y0, std::log(2.0))[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  const Vec mode = ou.mean_coeff(0.7) * (Vec(2) << 0.3, -1.1).finished();
  CHECK(kernel_score(ou, mode, (Vec(2) << 0.3, -1.1).finished(), 0.7).norm() <= 1e-15);
  CHECK_THROWS_AS(kernel_score(ou, zero, y0, 0.0), DomainError);
  CHECK_THROWS_AS(kernel_score(ou, zero, y0, 1e-14), DomainError);

  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + trial % 3;
    const Vec base = normal_vector(d, rng);
    const Vec yt = normal_vector(d, rng);
    const double t = 0.05 + 2.0 * uniform01(rng);
    const double m = ou.mean_coeff(t), v = ou.noise_var(t);
    const Vec s = kernel_score(ou, yt, base, t);
    Vec fd(d);
    const double h = 1e-5;
    for (int j = 0; j < d; ++j) {
      Vec p = yt, q = yt;
      p[j] += h;
      q[j] -= h;
      fd[j] = (log_normal_density(p, m * base, v) - log_normal_density(q, m * base, v)) / (2 * h);
    }
    CHECK((s - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("gaussian_marginal_score") {
  const OUSchedule ou;
  const Vec f = Vec::Zero(1);
  const Vec y = Vec::Constant(1, 0.3);
  for (double t : {0.01, 0.5, 3.0}) CHECK(gaussian_marginal_score(ou, f, 1.0, y, t)[0] == doctest::Approx(-0.3));
  const Vec fx = (Vec(2) << 0.4, -0.2).finished();
  CHECK(gaussian_marginal_score(ou, fx, 0.5, ou.mean_coeff(0.2) * fx, 0.2).norm() <= 1e-15);
  CHECK_THROWS_AS(gaussian_marginal_score(ou, fx, 0.0, fx, 0.2), DomainError);

  // Posterior mean of the kernel score over Y0 | y_t equals the marginal score:
  // E[kernel_score(y, Y0, t) | y] with Y0 weighted by p_t(y | Y0) under the prior N(f, s^2).
  Rng rng(31);
  const double s = 0.5, t = 0.3;
  const Vec fx1 = Vec::Constant(1, 0.4);
  const Vec q = Vec::Constant(1, 0.1);
  const double m = ou.mean_coeff(t), v = ou.noise_var(t);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const Vec y0 = fx1 + s * normal_vector(1, rng);
    const double w = std::exp(log_normal_density(q, m * y0, v));
    num += w * kernel_score(ou, q, y0, t)[0];
    den += w;
  }
  CHECK(std::abs(num / den - gaussian_marginal_score(ou, fx1, s, q, t)[0]) <= 1e-2);
}
