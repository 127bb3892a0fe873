#pragma once

// Plug-in conditional backward SDE, integrated in forward time s from T down to tau:
//   dY = delta_s (Y + 2 score(Y, x, s)) ds + sqrt(2 delta_s) dW   (s decreasing),
// started at N(0, I) and truncated to the sup-norm ball of radius L at s = tau.

#include "cdiff/ou_kernel.hpp"
#include "cdiff/score_family.hpp"
#include "cdiff/types.hpp"

#include "json.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cdiff {

enum class Integrator { euler_maruyama, exponential };

Integrator integrator_from_string(const std::string& name);
std::string to_string(Integrator integrator);

struct SamplerConfig {
  int substeps = 8;
  Integrator integrator = Integrator::euler_maruyama;
  double truncation = 0.0;  // L; must be positive
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

// Decreasing grid T = s_0 > ... > s_K = tau, geometric within each dyadic bin.
std::vector<double> backward_grid(const TimePartition& partition, int substeps);

// Scores for rows of ys sharing covariate x at forward time s.
using BatchScore = std::function<Mat(const Mat& ys, const Vec& x, double s)>;

BatchScore model_score(const ScoreModel& model);

// One step from s_from to s_to < s_from, score frozen at its s_from value.
// Rows of y, score and noise are chains; noise holds standard normals.
Mat euler_step(const Mat& y, const Mat& score, double s_from, double s_to, const OUSchedule& schedule,
               const Mat& noise);
Mat exponential_step(const Mat& y, const Mat& score, double s_from, double s_to, const OUSchedule& schedule,
                     const Mat& noise);

// Rows with ||y||_inf > L become zero. Returns the number of rows replaced.
int truncate_rows(Mat& y, double L);

struct SampleResult {
  Mat points;  // k x D_Y, ordered by chain index
  int truncated = 0;
  double truncation_rate() const {
    return points.rows() ? static_cast<double>(truncated) / static_cast<double>(points.rows()) : 0.0;
  }
};

// k chains; chain c draws its own noise stream keyed by (config.seed, stream, c).
// Throws NumericError naming the chain and time if the score is non-finite.
SampleResult sample(const BatchScore& score, const Vec& x, int k, int dim_y, const OUSchedule& schedule,
                    const std::vector<double>& grid, const SamplerConfig& config, std::uint64_t stream = 0);

std::string samples_to_csv(const Mat& points);

}  // namespace cdiff
