#pragma once

// Closed-form quantities of the forward Ornstein-Uhlenbeck process
//   dY_t = -delta_t Y_t dt + sqrt(2 delta_t) dB_t
// whose transition kernel is N(m_t y0, sigma_t^2 I) with
//   m_t = exp(-int_0^t delta_s ds),  sigma_t^2 = 1 - m_t^2.

#include "cdiff/types.hpp"

#include <vector>

namespace cdiff {

class OUSchedule {
 public:
  enum class Kind : std::uint8_t { constant = 0, tabulated = 1 };

  OUSchedule() = default;  // delta == 1

  static OUSchedule constant(double delta0 = 1.0);
  // Monotone cubic (Fritsch-Carlson) interpolation through (times[i], deltas[i]);
  // held constant outside the table. times must start at 0 and be strictly increasing.
  static OUSchedule tabulated(std::vector<double> times, std::vector<double> deltas);

  Kind kind() const { return kind_; }
  double delta0() const { return delta0_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& deltas() const { return deltas_; }

  double delta(double t) const;
  // int_0^t delta_s ds. Exact for constant drift; Gauss-Legendre per interpolation
  // segment otherwise (exact up to rounding, the interpolant is piecewise cubic).
  double integrated_drift(double t) const;

  double mean_coeff(double t) const;
  double noise_var(double t) const;
  // sqrt(max(sigma_t^2, 16 eps)).
  double noise_std(double t) const;

  // min/max of delta on a dense grid over [0, horizon].
  std::pair<double, double> drift_bounds(double horizon, int grid = 4096) const;

 private:
  double segment_integral(double a, double b) const;

  Kind kind_ = Kind::constant;
  double delta0_ = 1.0;
  std::vector<double> times_;
  std::vector<double> deltas_;
  std::vector<double> slopes_;      // Hermite tangents at knots
  std::vector<double> cumulative_;  // int_0^{times_[i]} delta
};

// m_t y0 + sigma_t eps, eps ~ N(0, I). Requires t > 0.
Vec perturb(const OUSchedule& schedule, const Vec& y0, double t, Rng& rng);

// grad_{y_t} log N(y_t; m_t y0, sigma_t^2 I) = (m_t y0 - y_t) / sigma_t^2.
// Throws DomainError for t <= 0 or sigma_t^2 < 1e-12.
Vec kernel_score(const OUSchedule& schedule, const Vec& y_t, const Vec& y0, double t);

// Score of p_t(.|x) when mu*_{Y|x} = N(f_x, s^2 I):
// (m_t f_x - y) / (m_t^2 s^2 + sigma_t^2).
Vec gaussian_marginal_score(const OUSchedule& schedule, const Vec& f_x, double s, const Vec& y,
                            double t);

}  // namespace cdiff
