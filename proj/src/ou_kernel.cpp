#include "cdiff/ou_kernel.hpp"

#include "cdiff/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace cdiff {

namespace {

constexpr double kSigmaFloor = 16.0 * std::numeric_limits<double>::epsilon();
constexpr double kMinKernelVar = 1e-12;

void require_nonneg(double t) {
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative, got " + std::to_string(t));
}

void require_positive(double t) {
  if (!(t > 0.0)) throw DomainError("time must be positive, got " + std::to_string(t));
}

// 4-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 4> kGLNodes = {-0.8611363115940526, -0.3399810435848563,
                                            0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGLWeights = {0.3478548451374538, 0.6521451548625461,
                                              0.6521451548625461, 0.3478548451374538};

}  // namespace

OUSchedule OUSchedule::constant(double delta0) {
  if (!(delta0 > 0.0) || !std::isfinite(delta0))
    throw SpecError("constant drift must be positive and finite");
  OUSchedule s;
  s.kind_ = Kind::constant;
  s.delta0_ = delta0;
  return s;
}

OUSchedule OUSchedule::tabulated(std::vector<double> times, std::vector<double> deltas) {
  if (times.size() != deltas.size() || times.size() < 2)
    throw SpecError("tabulated drift needs at least two (time, delta) pairs");
  if (times.front() != 0.0) throw SpecError("tabulated drift must start at t = 0");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(deltas[i] > 0.0) || !std::isfinite(deltas[i]))
      throw SpecError("tabulated drift values must be positive and finite");
    if (i > 0 && !(times[i] > times[i - 1])) throw SpecError("tabulated times must increase");
  }

  OUSchedule s;
  s.kind_ = Kind::tabulated;
  s.delta0_ = deltas.front();
  s.times_ = std::move(times);
  s.deltas_ = std::move(deltas);

  // Fritsch-Carlson tangents: the interpolant stays within neighbouring knot values,
  // so delta stays inside [min, max] of the table and the drift bounds carry over.
  const std::size_t n = s.times_.size();
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    secant[i] = (s.deltas_[i + 1] - s.deltas_[i]) / (s.times_[i + 1] - s.times_[i]);
  s.slopes_.assign(n, 0.0);
  s.slopes_.front() = secant.front();
  s.slopes_.back() = secant.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (secant[i - 1] * secant[i] <= 0.0) {
      s.slopes_[i] = 0.0;
    } else {
      const double h0 = s.times_[i] - s.times_[i - 1];
      const double h1 = s.times_[i + 1] - s.times_[i];
      const double w0 = 2.0 * h1 + h0;
      const double w1 = h1 + 2.0 * h0;
      s.slopes_[i] = (w0 + w1) / (w0 / secant[i - 1] + w1 / secant[i]);
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (secant[i] == 0.0) {
      s.slopes_[i] = s.slopes_[i + 1] = 0.0;
      continue;
    }
    const double a = s.slopes_[i] / secant[i];
    const double b = s.slopes_[i + 1] / secant[i];
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double k = 3.0 / std::sqrt(r);
      s.slopes_[i] = k * a * secant[i];
      s.slopes_[i + 1] = k * b * secant[i];
    }
    if (s.slopes_[i] * secant[i] < 0.0) s.slopes_[i] = 0.0;
    if (s.slopes_[i + 1] * secant[i] < 0.0) s.slopes_[i + 1] = 0.0;
  }

  s.cumulative_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    s.cumulative_[i + 1] = s.cumulative_[i] + s.segment_integral(s.times_[i], s.times_[i + 1]);
  return s;
}

double OUSchedule::delta(double t) const {
  require_nonneg(t);
  if (kind_ == Kind::constant) return delta0_;
  if (t >= times_.back()) return deltas_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double h = times_[i + 1] - times_[i];
  const double u = (t - times_[i]) / h;
  const double u2 = u * u;
  const double u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * deltas_[i] + (u3 - 2 * u2 + u) * h * slopes_[i] +
         (-2 * u3 + 3 * u2) * deltas_[i + 1] + (u3 - u2) * h * slopes_[i + 1];
}

double OUSchedule::segment_integral(double a, double b) const {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t k = 0; k < kGLNodes.size(); ++k) acc += kGLWeights[k] * delta(mid + half * kGLNodes[k]);
  return acc * half;
}

double OUSchedule::integrated_drift(double t) const {
  require_nonneg(t);
  if (kind_ == Kind::constant) return delta0_ * t;
  if (t >= times_.back()) return cumulative_.back() + deltas_.back() * (t - times_.back());
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  return cumulative_[i] + segment_integral(times_[i], t);
}

double OUSchedule::mean_coeff(double t) const { return std::exp(-integrated_drift(t)); }

double OUSchedule::noise_var(double t) const { return -std::expm1(-2.0 * integrated_drift(t)); }

double OUSchedule::noise_std(double t) const { return std::sqrt(std::max(noise_var(t), kSigmaFloor)); }

std::pair<double, double> OUSchedule::drift_bounds(double horizon, int grid) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i <= grid; ++i) {
    const double d = delta(horizon * i / grid);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

Vec perturb(const OUSchedule& schedule, const Vec& y0, double t, Rng& rng) {
  require_positive(t);
  const double m = schedule.mean_coeff(t);
  const double sd = schedule.noise_std(t);
  return m * y0 + sd * normal_vector(y0.size(), rng);
}

Vec kernel_score(const OUSchedule& schedule, const Vec& y_t, const Vec& y0, double t) {
  require_positive(t);
  const double var = schedule.noise_var(t);
  if (var < kMinKernelVar)
    throw DomainError("kernel score undefined: sigma_t^2 below 1e-12 at t = " + std::to_string(t));
  return (schedule.mean_coeff(t) * y0 - y_t) / var;
}

Vec gaussian_marginal_score(const OUSchedule& schedule, const Vec& f_x, double s, const Vec& y,
                            double t) {
  require_positive(t);
  if (!(s > 0.0)) throw DomainError("gaussian scale must be positive");
  const double m = schedule.mean_coeff(t);
  return (m * f_x - y) / (m * m * s * s + schedule.noise_var(t));
}

}  // namespace cdiff
