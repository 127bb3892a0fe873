#pragma once

// Multi-step experiments: rate-vs-n study, piecewise vs monolithic ablation and
// the analytic-score sampler check.

#include "cdiff/experiments/config.hpp"
#include "cdiff/metrics.hpp"
#include "cdiff/sampler.hpp"
#include "cdiff/score_family.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdiff::exp {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
// Ordinary least squares y = intercept + slope x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// max(-1/(2 + d_X/a_X), -(1 + 1/a_Y)/(2 + d_X/a_X + d_Y/a_Y)).
double theoretical_exponent(double d_x, double alpha_x, double d_y, double alpha_y);
double theoretical_exponent(const Pipeline& p);

Dataset generate(const Pipeline& p, std::int64_t n);
Schedule schedule_for(const Pipeline& p, std::int64_t n);
TrainResult train_pipeline(const Pipeline& p, const Dataset& data);

ConditionalSampler score_sampler(BatchScore score, const TimePartition& partition, const OUSchedule& ou, int dim_y,
                                 const SamplerConfig& config);
// The model must outlive the returned sampler.
ConditionalSampler model_sampler(const ScoreModel& model, const SamplerConfig& config);
ConditionalSampler constant_sampler(Vec value);
ConditionalSampler cond_mean_sampler(const GeneratorSpec& gen);
BatchScore analytic_batch_score(const GeneratorSpec& gen, const OUSchedule& ou);

struct RateRow {
  std::int64_t n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double noise_floor = 0.0;
  double truncation_rate = 0.0;
};

struct RateStudyResult {
  std::vector<RateRow> rows;
  LineFit fit;
  double theoretical = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string to_svg() const;
};

using ArmCallback = std::function<void(std::int64_t n, const Dataset&, const TrainResult&, const EvalReport&)>;
RateStudyResult run_rate_study(const Pipeline& p, const std::vector<std::int64_t>& ns, const ArmCallback& on_arm = {});

struct AblationResult {
  EvalReport piecewise;
  EvalReport monolithic;
  std::int64_t piecewise_params = 0;
  std::int64_t monolithic_params = 0;
  int monolithic_steps = 0;
  std::vector<double> piecewise_output_bounds;
  double monolithic_output_bound = 0.0;
  std::optional<std::string> warning;

  double ratio() const { return monolithic.mean / piecewise.mean; }
  nlohmann::json to_json() const;
  std::string to_svg() const;
};

struct AblationSettings {
  double budget_tolerance = 0.1;
  std::optional<int> monolithic_height;  // defaults to the per-bin height
  std::optional<int> monolithic_steps;   // defaults to a compute-matched count
};

// Width of an H-layer net whose parameter count is closest to target.
NetSpec matched_monolithic_spec(int input_dim, int output_dim, int height, std::int64_t target, double output_bound);

AblationResult run_ablation(const Pipeline& p, const AblationSettings& settings);

struct OracleRow {
  int substeps = 0;
  double error = 0.0;
  double noise_floor = 0.0;
  double mean_norm = 0.0;  // mean of sample coordinates averaged over axes
  double stddev = 0.0;     // pooled per-axis standard deviation
  double truncation_rate = 0.0;
};

struct OracleResult {
  std::vector<OracleRow> rows;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Samples with the analytic score at covariate x for each substep count and
// compares k draws against k exact draws (sliced W1, 128 projections).
OracleResult run_oracle_check(const GeneratorSpec& gen, const OUSchedule& ou, const TimePartition& partition,
                              const SamplerConfig& config, const std::vector<int>& substeps, const Vec& x, int k);

}  // namespace cdiff::exp
