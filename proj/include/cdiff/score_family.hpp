#pragma once

// Piecewise-in-time conditional score model: one bounded ReLU network per dyadic
// time bin [t_{i-1}, t_i), trained by lambda(t) = t weighted denoising conditional
// score matching.

#include "cdiff/datagen.hpp"
#include "cdiff/network.hpp"
#include "cdiff/ou_kernel.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cdiff {

struct ProblemSpec {
  int dim_x = 1;
  int dim_y = 1;
  int intrinsic_x = 1;
  int intrinsic_y = 1;
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  std::int64_t n = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ProblemSpec from_json(const nlohmann::json& j);
  bool operator==(const ProblemSpec&) const = default;
};

// Problem spec matching a generator's declared dimensions and smoothness.
ProblemSpec problem_for(const GeneratorSpec& gen, std::int64_t n);

enum class ScheduleMode { euclidean, manifold };

// Multipliers for the Theta(.) expressions.
struct ScheduleConstants {
  double c_tau = 1.0;
  double c_horizon = 1.0;
  double c_height = 1.0;
  double c_width = 1.0;
  double c_sparsity = 1.0;
  double c_output = 1.0;
};

// Practical ceilings applied after the theoretical sizes are evaluated.
struct ScheduleCaps {
  int max_height = 6;
  int max_width = 256;
  int min_width = 8;  // raised to 2 * (D_Y + D_X + 1) when larger
  double weight_bound = kUnbounded;
  bool enforce_sparsity = false;
};

class TimePartition {
 public:
  TimePartition() = default;
  // tau = horizon / 2^bins, knots t_i = tau 2^i.
  static TimePartition dyadic(double horizon, int bins);

  double tau() const { return knots_.front(); }
  double horizon() const { return knots_.back(); }
  int bins() const { return static_cast<int>(knots_.size()) - 1; }
  const std::vector<double>& knots() const { return knots_; }
  double lower(int bin) const { return knots_[static_cast<std::size_t>(bin)]; }
  double upper(int bin) const { return knots_[static_cast<std::size_t>(bin) + 1]; }

  // 0-based bin b with knots[b] <= t < knots[b+1]; t = T maps to the last bin.
  // Throws DomainError outside [tau, T].
  int bin_of(double t) const;

 private:
  std::vector<double> knots_;
};

struct BinSchedule {
  double t_lo = 0.0;
  double t_hi = 0.0;
  NetSpec net;
  double raw_height = 0.0;
  double raw_width = 0.0;
  double raw_sparsity = 0.0;
};

struct Schedule {
  ScheduleMode mode = ScheduleMode::euclidean;
  double rate_denominator = 0.0;  // 2 a_Y + dim_Y + (a_Y / a_X) dim_X
  double eps1 = 0.0;
  double tau_raw = 0.0;
  TimePartition partition;
  std::vector<BinSchedule> bins;
  // log B under the two readings of exp(Theta(log n^4)): 4 log n and (log n)^4.
  double log_weight_bound_linear = 0.0;
  double log_weight_bound_quartic = 0.0;

  nlohmann::json to_json() const;
};

Schedule schedule_from_theory(const ProblemSpec& spec, ScheduleMode mode, const ScheduleConstants& constants = {},
                              const ScheduleCaps& caps = {});

// c_V sqrt(log n / min(t, 1)).
double output_bound_at(std::int64_t n, double t, double c_output = 1.0);

// Inverse-CDF draw with density proportional to t on [a, b]: sqrt(a^2 + u (b^2 - a^2)).
double time_from_uniform(double a, double b, double u);
double sample_time(double a, double b, Rng& rng);

class ScoreModel {
 public:
  ScoreModel() = default;
  ScoreModel(ProblemSpec problem, OUSchedule schedule, TimePartition partition, std::vector<Mlp> nets);

  const ProblemSpec& problem() const { return problem_; }
  const OUSchedule& schedule() const { return schedule_; }
  const TimePartition& partition() const { return partition_; }
  const std::vector<Mlp>& nets() const { return nets_; }
  std::vector<Mlp>& nets() { return nets_; }

  // Throws DomainError for t outside [tau, T].
  Vec eval(const Vec& y, const Vec& x, double t) const;
  // Rows of ys share the covariate x and time t.
  Mat eval_batch(const Mat& ys, const Vec& x, double t) const;

 private:
  ProblemSpec problem_;
  OUSchedule schedule_;
  TimePartition partition_;
  std::vector<Mlp> nets_;
};

// CDSM: magic, u16 version, ProblemSpec, OUSchedule descriptor, TimePartition, nets (CDNN).
std::vector<std::uint8_t> serialize_model(const ScoreModel& model);
ScoreModel deserialize_model(std::span<const std::uint8_t> bytes);

// Network input rows [y; x; t / time_scale]. Bin networks use time_scale = t_hi of their bin,
// the monolithic network uses T.
Mat score_inputs(const Mat& ys, const Vec& x, double t, double time_scale);

struct DsmBatch {
  Mat inputs;                 // rows [y_t; x; t / t_hi]
  Mat targets;                // kernel scores
  std::vector<double> times;  // per-row t
  double normalizer = 1.0;    // (t_hi^2 - t_lo^2) / 2
};

// One perturbation per (row, draw): t ~ density prop. to t on [t_lo, t_hi], y_t ~ p_t(.|y).
DsmBatch make_dsm_batch(const Dataset& data, std::span<const Eigen::Index> rows, int draws, double t_lo,
                        double t_hi, const OUSchedule& schedule, Rng& rng);
// normalizer * mean_r ||outputs_r - targets_r||^2.
double dsm_loss_value(const Mat& outputs, const DsmBatch& batch);
// Loss of net on batch; fills gradients when non-null.
double dsm_loss(const Mlp& net, const DsmBatch& batch, ParamSet* gradients);

struct TrainConfig {
  int steps_per_bin = 6000;
  int batch_size = 256;
  int draws_per_point = 1;
  AdamConfig adam{};
  double final_lr_ratio = 0.1;  // cosine decay to lr * ratio
  int prune_every = 500;        // when sparsity is enforced
  int log_every = 50;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = hardware concurrency

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossTracePoint {
  int bin = 0;
  int step = 0;
  double loss = 0.0;  // mean over the logging window
  double wall_ms = 0.0;
};

// Trains one network on [t_lo, t_hi]. `stream` identifies the rng substream so
// independent networks never share randomness. Throws NumericError on non-finite loss.
Mlp train_network(Mlp net, const Dataset& data, double t_lo, double t_hi, const OUSchedule& schedule,
                  const TrainConfig& config, std::uint64_t stream, std::int64_t step_offset,
                  std::vector<LossTracePoint>* trace, int bin_label);

struct TrainResult {
  ScoreModel model;
  std::vector<LossTracePoint> trace;
};

// Fresh per-bin networks, each trained independently on its own time range.
TrainResult train(const Dataset& data, const ProblemSpec& problem, const Schedule& schedule,
                  const OUSchedule& ou, const TrainConfig& config);
// Continues training an existing model for config.steps_per_bin more steps per bin.
TrainResult resume_training(const Dataset& data, ScoreModel model, const TrainConfig& config,
                            std::int64_t step_offset);

// Single network over all of [tau, T]; baseline for the architecture ablation.
class MonolithicScore {
 public:
  MonolithicScore(Mlp net, OUSchedule schedule, double tau, double horizon)
      : net_(std::move(net)), schedule_(std::move(schedule)), tau_(tau), horizon_(horizon) {}
  Mat eval_batch(const Mat& ys, const Vec& x, double t) const;
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  OUSchedule schedule_;
  double tau_;
  double horizon_;
};

}  // namespace cdiff
