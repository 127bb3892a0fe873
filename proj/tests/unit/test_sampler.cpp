#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdiff/errors.hpp"
#include "cdiff/metrics.hpp"
#include "cdiff/sampler.hpp"

#include <cmath>
#include <limits>

using namespace cdiff;

namespace {

SamplerConfig config(int substeps, Integrator integ, double L, std::uint64_t seed = 1, int workers = 1) {
  SamplerConfig c;
  c.substeps = substeps;
  c.integrator = integ;
  c.truncation = L;
  c.seed = seed;
  c.workers = workers;
  return c;
}

BatchScore gaussian_score(const OUSchedule& ou, double mean, double s) {
  return [ou, mean, s](const Mat& ys, const Vec&, double t) {
    const double m = ou.mean_coeff(t), v = ou.noise_var(t);
    return Mat(((m * mean) - ys.array()) / (m * m * s * s + v));
  };
}

}  // namespace

TEST_CASE("backward grid") {
  const TimePartition p = TimePartition::dyadic(8.0, 6);
  const auto g1 = backward_grid(p, 1);
  REQUIRE(g1.size() == 7u);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == p.knots()[p.knots().size() - 1 - i]);

  const auto g = backward_grid(p, 5);
  CHECK(g.size() == 31u);
  CHECK(g.front() == p.horizon());
  CHECK(g.back() == p.tau());
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
  for (int b = 0; b < 6; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * 5;
    const double r0 = g[start + 1] / g[start];
    for (std::size_t k = 1; k < 5; ++k) CHECK(g[start + k + 1] / g[start + k] == doctest::Approx(r0).epsilon(1e-13));
  }
  CHECK(backward_grid(TimePartition::dyadic(9.21, 17), 8).size() == 137u);
}

TEST_CASE("truncation") {
  Mat y(3, 2);
  y << 3.0, 0.1, 1.9, -1.9, 0.0, -2.5;
  Mat z = y;
  CHECK(truncate_rows(z, 2.0) == 2);
  CHECK(z.row(0).norm() == 0.0);
  CHECK(z.row(1) == y.row(1));
  CHECK(z.row(2).norm() == 0.0);
}

TEST_CASE("step formulas") {
  const OUSchedule ou = OUSchedule::constant(1.3);
  const double from = 0.4, to = 0.35;
  const double A = 1.3 * (from - to);
  const Mat one = Mat::Ones(1, 1), zero = Mat::Zero(1, 1);

  const double mean_coef = exponential_step(one, zero, from, to, ou, zero)(0, 0);
  const double noise_coef = exponential_step(zero, zero, from, to, ou, one)(0, 0);
  CHECK(std::abs(mean_coef - std::exp(A)) <= 1e-12);
  CHECK(std::abs(mean_coef * mean_coef + noise_coef * noise_coef - (2 * std::exp(2 * A) - 1)) <= 1e-10);
  const double score_coef = exponential_step(zero, one, from, to, ou, zero)(0, 0);
  CHECK(std::abs(score_coef - 2 * std::expm1(A)) <= 1e-12);

  const double h = from - to;
  Mat y(2, 1), s(2, 1), e(2, 1);
  y << 0.3, -1.0;
  s << 2.0, 0.5;
  e << -0.7, 1.1;
  const Mat eu = euler_step(y, s, from, to, ou, e);
  for (int r = 0; r < 2; ++r)
    CHECK(eu(r, 0) == doctest::Approx(y(r, 0) + h * 1.3 * (y(r, 0) + 2 * s(r, 0)) + std::sqrt(2 * 1.3 * h) * e(r, 0)));
}

TEST_CASE("exponential and Euler steps agree to second order") {
  const OUSchedule ou;
  Mat y(1, 1), s(1, 1), e = Mat::Zero(1, 1);
  y << 0.8;
  s << -0.3;
  double prev = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double h = 0.1 / std::pow(2.0, k);
    const double diff =
        std::abs(exponential_step(y, s, 1.0, 1.0 - h, ou, e)(0, 0) - euler_step(y, s, 1.0, 1.0 - h, ou, e)(0, 0));
    if (k > 0) CHECK(prev / diff == doctest::Approx(4.0).epsilon(0.08));
    prev = diff;
  }
}

TEST_CASE("sampler determinism, ordering and support") {
  const OUSchedule ou;
  const TimePartition p = TimePartition::dyadic(6.0, 10);
  const auto grid = backward_grid(p, 2);
  const BatchScore score = gaussian_score(ou, 0.7, 0.3);
  const Vec x = Vec::Zero(1);
  const SampleResult a = sample(score, x, 300, 1, ou, grid, config(2, Integrator::euler_maruyama, 1.0, 3, 1));
  const SampleResult b = sample(score, x, 300, 1, ou, grid, config(2, Integrator::euler_maruyama, 1.0, 3, 4));
  CHECK((a.points.array() == b.points.array()).all());
  CHECK(a.points.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(a.truncated > 0);
  CHECK(a.truncation_rate() == doctest::Approx(a.truncated / 300.0));

  // First 100 chains do not depend on how many chains run.
  const SampleResult c = sample(score, x, 100, 1, ou, grid, config(2, Integrator::euler_maruyama, 1.0, 3, 1));
  CHECK((c.points.array() == a.points.topRows(100).array()).all());

  const SampleResult other = sample(score, x, 300, 1, ou, grid, config(2, Integrator::euler_maruyama, 1.0, 4, 1));
  CHECK((other.points.array() != a.points.array()).any());

  int prev_truncated = std::numeric_limits<int>::max();
  Mat wide;
  for (double L : {0.9, 1.2, 1.6, 5.0}) {
    const SampleResult r = sample(score, x, 300, 1, ou, grid, config(2, Integrator::euler_maruyama, L, 3, 1));
    CHECK(r.truncated <= prev_truncated);
    CHECK(r.points.cwiseAbs().maxCoeff() <= L);
    if (wide.size()) {
      for (Eigen::Index i = 0; i < r.points.rows(); ++i)
        if (wide(i, 0) != 0.0) CHECK(r.points(i, 0) == wide(i, 0));
    }
    wide = r.points;
    prev_truncated = r.truncated;
  }
}

TEST_CASE("non-finite score aborts with a diagnostic") {
  const OUSchedule ou;
  const TimePartition p = TimePartition::dyadic(4.0, 4);
  const BatchScore bad = [](const Mat& ys, const Vec&, double t) {
    Mat out = Mat::Zero(ys.rows(), ys.cols());
    if (t < 1.0) out(ys.rows() - 1, 0) = std::numeric_limits<double>::quiet_NaN();
    return out;
  };
  CHECK_THROWS_AS(sample(bad, Vec::Zero(1), 10, 1, ou, backward_grid(p, 2), config(2, Integrator::exponential, 3.0)),
                  NumericError);
}

TEST_CASE("discretization error shrinks with substeps") {
  const OUSchedule ou;
  const double mean = 0.5, s = 0.2;
  const TimePartition p = TimePartition::dyadic(std::log(4096.0), 14);
  const BatchScore score = gaussian_score(ou, mean, s);
  const int k = 4096;
  Rng rng(17);
  const double tau = p.tau();
  const double sd = std::sqrt(ou.mean_coeff(tau) * ou.mean_coeff(tau) * s * s + ou.noise_var(tau));
  Mat truth(k, 1);
  for (int i = 0; i < k; ++i) truth(i, 0) = ou.mean_coeff(tau) * mean + sd * standard_normal(rng);
  Mat truth2(k, 1);
  for (int i = 0; i < k; ++i) truth2(i, 0) = ou.mean_coeff(tau) * mean + sd * standard_normal(rng);
  const double floor = w1_1d(Vec(truth.col(0)), Vec(truth2.col(0)));
  for (Integrator integ : {Integrator::euler_maruyama, Integrator::exponential}) {
    std::vector<double> errs;
    for (int sub : {1, 2, 4, 8, 16}) {
      const SampleResult r = sample(score, Vec::Zero(1), k, 1, ou, backward_grid(p, sub), config(sub, integ, 4.0, 5));
      errs.push_back(w1_1d(Vec(r.points.col(0)), Vec(truth.col(0))));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] <= errs[i - 1] + 2 * floor);
    CHECK(errs.back() <= 3 * floor);
  }
}

TEST_CASE("config round trip and validation") {
  const SamplerConfig c = config(7, Integrator::exponential, 2.5, 11, 2);
  CHECK(SamplerConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(integrator_from_string(to_string(Integrator::euler_maruyama)) == Integrator::euler_maruyama);
  CHECK_THROWS(integrator_from_string("rk4"));
  CHECK_THROWS(config(0, Integrator::exponential, 1.0).validate());
  CHECK_THROWS(config(2, Integrator::exponential, 0.0).validate());
}
