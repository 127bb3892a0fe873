#pragma once

// Two-sample distances between equal-size point sets (rows are points) and the
// Monte-Carlo estimate of E_x[ d(mu_hat_{Y|x}, mu*_{Y|x}) ].

#include "cdiff/datagen.hpp"
#include "cdiff/ou_kernel.hpp"
#include "cdiff/types.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdiff {

inline constexpr int kExactCap = 512;

double w1_1d(std::span<const double> a, std::span<const double> b);
double w1_1d(const Vec& a, const Vec& b);
// Optimal assignment cost / k with Euclidean ground cost. Throws UsageError above cap.
double w1_exact(const Mat& a, const Mat& b, int cap = kExactCap);
// Minimum-cost perfect matching; assignment[i] is the column matched to row i.
std::vector<int> hungarian(const Mat& cost);
double w1_sliced(const Mat& a, const Mat& b, int projections, Rng& rng);

struct HistogramBox {
  double lo = -1.0;
  double hi = 1.0;
};
// 1/2 sum |p - q| over bins^D equal cells of [lo, hi]^D plus one sink cell for
// points outside the box. D <= 3.
double tv_histogram(const Mat& a, const Mat& b, int bins, HistogramBox box);

enum class MetricKind { automatic, w1_1d, w1_exact, w1_sliced, tv };
MetricKind metric_from_string(const std::string& name);
std::string to_string(MetricKind kind);
// Resolves automatic: w1_1d for D = 1, w1_exact for D <= 8 and k <= cap, else sliced.
MetricKind resolve_metric(MetricKind kind, int dim, int k);

struct EvalConfig {
  int covariates = 16;  // m
  int samples = 512;    // k per covariate
  MetricKind metric = MetricKind::automatic;
  int projections = 128;
  int tv_bins = 16;
  std::uint64_t seed = 0;
  int workers = 0;

  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

// Draws k points from an estimate of mu_{Y|x}; `stream` separates covariates.
struct ConditionalDraw {
  Mat points;
  int truncated = 0;
};
using ConditionalSampler = std::function<ConditionalDraw(const Vec& x, int k, std::uint64_t stream)>;

ConditionalSampler truth_sampler(const GeneratorSpec& gen, std::uint64_t seed);

struct EvalReport {
  std::string metric;
  Mat covariates;  // m x D_X
  std::vector<double> errors;
  std::vector<double> floors;
  double mean = 0.0;
  double stderr_ = 0.0;  // NaN when m = 1
  double noise_floor = 0.0;
  double noise_floor_stderr = 0.0;
  double truncation_rate = 0.0;
  std::optional<double> tv_mean;  // D_Y <= 2 only
  nlohmann::json config;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Mean and sample-stddev / sqrt(m) of xs; stderr is NaN for a single value.
std::pair<double, double> mean_stderr(std::span<const double> xs);

EvalReport expected_conditional_error(const ConditionalSampler& model, const GeneratorSpec& gen,
                                      const EvalConfig& config);

// sqrt( E[t ||s_hat - s*||^2] / E[t ||s*||^2] ) with x ~ mu*_X, y0 ~ mu*_{Y|x},
// t uniform on [t_lo, t_hi], y_t ~ p_t(.|y0), s* the analytic marginal score.
using PointScore = std::function<Vec(const Vec& y, const Vec& x, double t)>;
double relative_score_error(const PointScore& score, const GeneratorSpec& gen, const OUSchedule& schedule,
                            double t_lo, double t_hi, int draws, Rng& rng);

}  // namespace cdiff
