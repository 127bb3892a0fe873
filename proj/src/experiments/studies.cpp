#include "cdiff/experiments/studies.hpp"

#include "cdiff/errors.hpp"
#include "cdiff/experiments/svg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cdiff::exp {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("line fit needs at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw UsageError("line fit needs distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

double theoretical_exponent(double d_x, double alpha_x, double d_y, double alpha_y) {
  const double a = -1.0 / (2.0 + d_x / alpha_x);
  const double b = -(1.0 + 1.0 / alpha_y) / (2.0 + d_x / alpha_x + d_y / alpha_y);
  return std::max(a, b);
}

double theoretical_exponent(const Pipeline& p) {
  const bool manifold = p.mode == ScheduleMode::manifold;
  const auto& g = p.generator;
  return theoretical_exponent(manifold ? g.intrinsic_x : g.dim_x, g.alpha_x, manifold ? g.intrinsic_y : g.dim_y,
                              g.alpha_y);
}

Dataset generate(const Pipeline& p, std::int64_t n) {
  Rng rng = substream(p.seed, {0xDA7A, static_cast<std::uint64_t>(n)});
  return sample_joint(p.generator, static_cast<std::size_t>(n), rng);
}

Schedule schedule_for(const Pipeline& p, std::int64_t n) {
  return schedule_from_theory(problem_for(p.generator, n), p.mode, p.constants, p.caps);
}

TrainResult train_pipeline(const Pipeline& p, const Dataset& data) {
  const auto n = static_cast<std::int64_t>(data.size());
  return train(data, problem_for(p.generator, n), schedule_for(p, n), p.ou, p.train);
}

ConditionalSampler score_sampler(BatchScore score, const TimePartition& partition, const OUSchedule& ou, int dim_y,
                                 const SamplerConfig& config) {
  auto grid = backward_grid(partition, config.substeps);
  return [score = std::move(score), grid = std::move(grid), ou, dim_y, config](const Vec& x, int k,
                                                                             std::uint64_t stream) {
    SampleResult r = sample(score, x, k, dim_y, ou, grid, config, stream);
    return ConditionalDraw{std::move(r.points), r.truncated};
  };
}

ConditionalSampler model_sampler(const ScoreModel& model, const SamplerConfig& config) {
  return score_sampler(model_score(model), model.partition(), model.schedule(), model.problem().dim_y, config);
}

ConditionalSampler constant_sampler(Vec value) {
  return [value = std::move(value)](const Vec&, int k, std::uint64_t) {
    Mat pts(k, value.size());
    for (int r = 0; r < k; ++r) pts.row(r) = value.transpose();
    return ConditionalDraw{std::move(pts), 0};
  };
}

ConditionalSampler cond_mean_sampler(const GeneratorSpec& gen) {
  return [gen](const Vec& x, int k, std::uint64_t) {
    const Vec mean = conditional_mean(gen, x);
    Mat pts(k, mean.size());
    for (int r = 0; r < k; ++r) pts.row(r) = mean.transpose();
    return ConditionalDraw{std::move(pts), 0};
  };
}

BatchScore analytic_batch_score(const GeneratorSpec& gen, const OUSchedule& ou) {
  if (!supports_analytic_score(gen)) throw UsageError("generator " + gen.name() + " has no analytic score");
  return [gen, ou](const Mat& ys, const Vec& x, double s) {
    Mat out(ys.rows(), ys.cols());
    for (Eigen::Index r = 0; r < ys.rows(); ++r) out.row(r) = analytic_score(gen, ou, x, ys.row(r).transpose(), s)->transpose();
    return out;
  };
}

nlohmann::json RateStudyResult::to_json() const {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"n", r.n},
                   {"mean", r.mean},
                   {"stderr", std::isfinite(r.stderr_) ? nlohmann::json(r.stderr_) : nlohmann::json(nullptr)},
                   {"noise_floor", r.noise_floor},
                   {"truncation_rate", r.truncation_rate}});
  }
  j["rows"] = arr;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["theoretical_exponent"] = theoretical;
  return j;
}

std::string RateStudyResult::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "n,mean,stderr,noise_floor,truncation_rate\n";
  for (const auto& r : rows) os << r.n << ',' << r.mean << ',' << r.stderr_ << ',' << r.noise_floor << ',' << r.truncation_rate << '\n';
  return os.str();
}

std::string RateStudyResult::to_svg() const {
  Series err{"mean error", {}, {}, {}, true};
  Series floor{"noise floor", {}, {}, {}, true};
  Series line{"fit slope " + std::to_string(fit.slope).substr(0, 6), {}, {}, {}, false};
  for (const auto& r : rows) {
    err.x.push_back(static_cast<double>(r.n));
    err.y.push_back(r.mean);
    err.err.push_back(std::isfinite(r.stderr_) ? r.stderr_ : 0.0);
    floor.x.push_back(static_cast<double>(r.n));
    floor.y.push_back(r.noise_floor);
    line.x.push_back(static_cast<double>(r.n));
    line.y.push_back(std::exp(fit.intercept + fit.slope * std::log(static_cast<double>(r.n))));
  }
  return svg_plot({err, floor, line}, "error vs n", "n", "E_x[distance]", true, true);
}

RateStudyResult run_rate_study(const Pipeline& p, const std::vector<std::int64_t>& ns, const ArmCallback& on_arm) {
  if (ns.size() < 2) throw UsageError("rate study needs at least two sample sizes");
  RateStudyResult result;
  std::vector<double> lx, ly;
  for (const auto n : ns) {
    const Dataset data = generate(p, n);
    const TrainResult trained = train_pipeline(p, data);
    const EvalReport report = expected_conditional_error(model_sampler(trained.model, p.sampler), p.generator, p.eval);
    result.rows.push_back({n, report.mean, report.stderr_, report.noise_floor, report.truncation_rate});
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(report.mean));
    if (on_arm) on_arm(n, data, trained, report);
  }
  result.fit = fit_line(lx, ly);
  result.theoretical = theoretical_exponent(p);
  return result;
}

NetSpec matched_monolithic_spec(int input_dim, int output_dim, int height, std::int64_t target, double output_bound) {
  if (height < 1) throw SpecError("monolithic height must be >= 1");
  NetSpec best;
  std::int64_t best_gap = -1;
  for (int w = 1; w <= 8192; ++w) {
    NetSpec s;
    s.height = height;
    s.widths.assign(static_cast<std::size_t>(height) + 1, w);
    s.widths.front() = input_dim;
    s.widths.back() = output_dim;
    s.output_bound = output_bound;
    const std::int64_t gap = std::llabs(s.param_count() - target);
    if (best_gap < 0 || gap < best_gap) {
      best = s;
      best_gap = gap;
    }
    if (height == 1 || s.param_count() > target) break;
  }
  return best;
}

namespace {

Mlp train_monolithic(Mlp net, const Dataset& data, const TimePartition& partition, const OUSchedule& ou,
                     const TrainConfig& config, int steps) {
  Rng rng = substream(config.seed, {0x3030});
  std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(data.size()) - 1);
  std::uniform_int_distribution<int> bin(0, partition.bins() - 1);
  AdamState adam(net, config.adam);
  ParamSet gradients = zeros_like(net);
  const Eigen::Index dy = data.y.cols();
  const Eigen::Index dx = data.x.cols();
  const double lr0 = config.adam.learning_rate;
  const double lr1 = lr0 * config.final_lr_ratio;
  DsmBatch batch;
  batch.inputs.resize(config.batch_size, dy + dx + 1);
  batch.targets.resize(config.batch_size, dy);
  batch.times.resize(static_cast<std::size_t>(config.batch_size));
  batch.normalizer = 1.0;
  for (int step = 0; step < steps; ++step) {
    for (Eigen::Index r = 0; r < config.batch_size; ++r) {
      const Eigen::Index row = pick(rng);
      const int b = bin(rng);
      const double t = sample_time(partition.lower(b), partition.upper(b), rng);
      const Vec y0 = data.y.row(row).transpose();
      const Vec yt = perturb(ou, y0, t, rng);
      batch.inputs.block(r, 0, 1, dy) = yt.transpose();
      batch.inputs.block(r, dy, 1, dx) = data.x.row(row);
      batch.inputs(r, dy + dx) = t / partition.horizon();
      batch.targets.row(r) = kernel_score(ou, yt, y0, t).transpose();
      batch.times[static_cast<std::size_t>(r)] = t;
    }
    adam.set_learning_rate(lr1 + (lr0 - lr1) * 0.5 * (1.0 + std::cos(std::numbers::pi * step / steps)));
    const double loss = dsm_loss(net, batch, &gradients);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss in monolithic network at step " + std::to_string(step));
    adam.step(net, gradients);
  }
  return net;
}

}  // namespace

nlohmann::json AblationResult::to_json() const {
  nlohmann::json j;
  j["piecewise"] = piecewise.to_json();
  j["monolithic"] = monolithic.to_json();
  j["piecewise_params"] = piecewise_params;
  j["monolithic_params"] = monolithic_params;
  j["monolithic_steps"] = monolithic_steps;
  j["piecewise_output_bounds"] = piecewise_output_bounds;
  j["monolithic_output_bound"] = monolithic_output_bound;
  j["ratio_monolithic_over_piecewise"] = ratio();
  j["warning"] = warning ? nlohmann::json(*warning) : nlohmann::json(nullptr);
  return j;
}

std::string AblationResult::to_svg() const {
  auto se = [](double v) { return std::isfinite(v) ? v : 0.0; };
  return svg_bars({"piecewise", "monolithic", "noise floor"}, {piecewise.mean, monolithic.mean, piecewise.noise_floor},
                  {se(piecewise.stderr_), se(monolithic.stderr_), se(piecewise.noise_floor_stderr)},
                  "architecture ablation", "E_x[distance]");
}

AblationResult run_ablation(const Pipeline& p, const AblationSettings& settings) {
  const Dataset data = generate(p, p.n);
  const Schedule schedule = schedule_for(p, p.n);
  const TrainResult piecewise = train(data, problem_for(p.generator, p.n), schedule, p.ou, p.train);

  AblationResult result;
  for (const auto& b : schedule.bins) {
    result.piecewise_params += b.net.param_count();
    result.piecewise_output_bounds.push_back(b.net.output_bound);
  }
  result.monolithic_output_bound =
      *std::max_element(result.piecewise_output_bounds.begin(), result.piecewise_output_bounds.end());
  const int height = settings.monolithic_height.value_or(schedule.bins.front().net.height);
  const NetSpec spec = matched_monolithic_spec(p.generator.dim_y + p.generator.dim_x + 1, p.generator.dim_y, height,
                                               result.piecewise_params, result.monolithic_output_bound);
  result.monolithic_params = spec.param_count();
  const double gap = std::abs(static_cast<double>(result.monolithic_params - result.piecewise_params)) /
                     static_cast<double>(result.piecewise_params);
  if (gap > settings.budget_tolerance) {
    result.warning = "parameter budget not matched: piecewise " + std::to_string(result.piecewise_params) +
                     ", monolithic " + std::to_string(result.monolithic_params);
  }
  result.monolithic_steps = settings.monolithic_steps.value_or(static_cast<int>(
      std::ceil(static_cast<double>(p.train.steps_per_bin) * static_cast<double>(result.piecewise_params) /
                static_cast<double>(result.monolithic_params))));

  Rng init = substream(p.train.seed, {0x3031});
  Mlp mono = train_monolithic(Mlp::init(spec, init), data, schedule.partition, p.ou, p.train, result.monolithic_steps);
  const MonolithicScore mono_score(std::move(mono), p.ou, schedule.partition.tau(), schedule.partition.horizon());

  result.piecewise = expected_conditional_error(model_sampler(piecewise.model, p.sampler), p.generator, p.eval);
  result.monolithic = expected_conditional_error(
      score_sampler([&mono_score](const Mat& ys, const Vec& x, double s) { return mono_score.eval_batch(ys, x, s); },
                    schedule.partition, p.ou, p.generator.dim_y, p.sampler),
      p.generator, p.eval);
  return result;
}

nlohmann::json OracleResult::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"substeps", r.substeps},
                   {"sliced_w1", r.error},
                   {"noise_floor", r.noise_floor},
                   {"mean", r.mean_norm},
                   {"stddev", r.stddev},
                   {"truncation_rate", r.truncation_rate}});
  }
  return {{"rows", arr}};
}

std::string OracleResult::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "substeps,sliced_w1,noise_floor,mean,stddev,truncation_rate\n";
  for (const auto& r : rows)
    os << r.substeps << ',' << r.error << ',' << r.noise_floor << ',' << r.mean_norm << ',' << r.stddev << ','
       << r.truncation_rate << '\n';
  return os.str();
}

OracleResult run_oracle_check(const GeneratorSpec& gen, const OUSchedule& ou, const TimePartition& partition,
                              const SamplerConfig& config, const std::vector<int>& substeps, const Vec& x, int k) {
  const BatchScore score = analytic_batch_score(gen, ou);
  Rng r1 = substream(config.seed, {0x0AC1});
  Rng r2 = substream(config.seed, {0x0AC2});
  const Mat truth = sample_conditional(gen, x, k, r1);
  const Mat truth2 = sample_conditional(gen, x, k, r2);
  OracleResult result;
  for (int s : substeps) {
    SamplerConfig c = config;
    c.substeps = s;
    const SampleResult out = sample(score, x, k, gen.dim_y, ou, backward_grid(partition, s), c);
    OracleRow row;
    row.substeps = s;
    Rng proj = substream(config.seed, {0x511C});
    row.error = w1_sliced(out.points, truth, 128, proj);
    Rng proj2 = substream(config.seed, {0x511C});
    row.noise_floor = w1_sliced(truth2, truth, 128, proj2);
    const RowVec mean = out.points.colwise().mean();
    row.mean_norm = mean.mean();
    row.stddev = std::sqrt((out.points.rowwise() - mean).squaredNorm() / (static_cast<double>(k - 1) * gen.dim_y));
    row.truncation_rate = out.truncation_rate();
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace cdiff::exp
