#include "cdiff/score_family.hpp"

#include "cdiff/binary_io.hpp"
#include "cdiff/errors.hpp"
#include "cdiff/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cdiff {

namespace {

constexpr std::uint16_t kModelVersion = 1;

std::string describe_t(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

}  // namespace

void ProblemSpec::validate() const {
  if (dim_x < 1 || dim_y < 1) throw SpecError("ambient dimensions must be positive");
  if (intrinsic_x < 1 || intrinsic_y < 1) throw SpecError("intrinsic dimensions must be positive");
  if (intrinsic_x > dim_x || intrinsic_y > dim_y) throw SpecError("intrinsic dimension exceeds ambient");
  if (!(alpha_x > 0.0) || !(alpha_y > 0.0)) throw SpecError("smoothness must be positive");
  if (n < 2) throw SpecError("sample size must be >= 2");
}

nlohmann::json ProblemSpec::to_json() const {
  return {{"dim_x", dim_x},           {"dim_y", dim_y},     {"intrinsic_x", intrinsic_x},
          {"intrinsic_y", intrinsic_y}, {"alpha_x", alpha_x}, {"alpha_y", alpha_y},
          {"n", n}};
}

ProblemSpec ProblemSpec::from_json(const nlohmann::json& j) {
  ProblemSpec p;
  p.dim_x = j.value("dim_x", p.dim_x);
  p.dim_y = j.value("dim_y", p.dim_y);
  p.intrinsic_x = j.value("intrinsic_x", p.dim_x);
  p.intrinsic_y = j.value("intrinsic_y", p.dim_y);
  p.alpha_x = j.value("alpha_x", p.alpha_x);
  p.alpha_y = j.value("alpha_y", p.alpha_y);
  p.n = j.value("n", p.n);
  return p;
}

ProblemSpec problem_for(const GeneratorSpec& gen, std::int64_t n) {
  ProblemSpec p;
  p.dim_x = gen.dim_x;
  p.dim_y = gen.dim_y;
  p.intrinsic_x = gen.intrinsic_x;
  p.intrinsic_y = gen.intrinsic_y;
  p.alpha_x = gen.alpha_x;
  p.alpha_y = gen.alpha_y;
  p.n = n;
  return p;
}

TimePartition TimePartition::dyadic(double horizon, int bins) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw SpecError("horizon must be positive");
  if (bins < 1 || bins > 60) throw SpecError("bin count must be in [1, 60]");
  TimePartition p;
  p.knots_.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) p.knots_[static_cast<std::size_t>(i)] = std::ldexp(horizon, i - bins);
  return p;
}

int TimePartition::bin_of(double t) const {
  if (!(t >= tau() && t <= horizon()))
    throw DomainError("time " + describe_t(t) + " outside [tau, T] = [" + describe_t(tau()) + ", " +
                      describe_t(horizon()) + "]");
  if (t == horizon()) return bins() - 1;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

double output_bound_at(std::int64_t n, double t, double c_output) {
  return c_output * std::sqrt(std::log(static_cast<double>(n)) / std::min(t, 1.0));
}

Schedule schedule_from_theory(const ProblemSpec& spec, ScheduleMode mode, const ScheduleConstants& k,
                              const ScheduleCaps& caps) {
  spec.validate();
  if (caps.max_height < 1 || caps.max_width < 1 || caps.min_width < 1 || caps.min_width > caps.max_width)
    throw SpecError("invalid schedule caps");

  const double ax = spec.alpha_x;
  const double ay = spec.alpha_y;
  const double dx = mode == ScheduleMode::euclidean ? spec.dim_x : spec.intrinsic_x;
  const double dy = mode == ScheduleMode::euclidean ? spec.dim_y : spec.intrinsic_y;
  const double n = static_cast<double>(spec.n);
  const double log_n = std::log(n);

  Schedule s;
  s.mode = mode;
  s.rate_denominator = 2.0 * ay + dy + (ay / ax) * dx;
  s.eps1 = std::pow(n, -1.0 / s.rate_denominator);
  s.tau_raw = k.c_tau * std::pow(s.eps1, 2.0 * (ay + 1.0));
  const double horizon = k.c_horizon * log_n;
  if (!(horizon > s.tau_raw)) throw SpecError("horizon must exceed the early-stopping time");
  const int bins = std::max(1, static_cast<int>(std::ceil(std::log2(horizon / s.tau_raw))));
  s.partition = TimePartition::dyadic(horizon, bins);
  s.log_weight_bound_linear = 4.0 * log_n;
  s.log_weight_bound_quartic = std::pow(log_n, 4.0);

  const double raw_height = k.c_height * std::ceil(std::pow(log_n, 4.0));
  const int height = std::clamp(static_cast<int>(std::min(raw_height, 1e6)), 1, caps.max_height);
  const double width_cap_term = std::pow(s.eps1, -dy - ay * dx / ax);
  const int input_dim = spec.dim_y + spec.dim_x + 1;
  // Width 2 * input_dim lets hidden layers carry the input through (v = ReLU(v) - ReLU(-v)).
  const int min_width = std::min(caps.max_width, std::max(caps.min_width, 2 * input_dim));

  for (int b = 0; b < bins; ++b) {
    BinSchedule bin;
    bin.t_lo = s.partition.lower(b);
    bin.t_hi = s.partition.upper(b);
    const double size_term = std::min(std::pow(n, dx / (2.0 * ax + dx)) *
                                          std::pow(bin.t_hi, -ax * dy / (2.0 * ax + dx)),
                                      width_cap_term);
    bin.raw_height = raw_height;
    bin.raw_width = k.c_width * size_term;
    bin.raw_sparsity = k.c_sparsity * size_term;
    const int width = std::clamp(static_cast<int>(std::ceil(std::min(bin.raw_width, 1e9))), min_width,
                                 caps.max_width);

    NetSpec& net = bin.net;
    net.height = height;
    net.widths.assign(static_cast<std::size_t>(height) + 1, width);
    net.widths.front() = input_dim;
    net.widths.back() = spec.dim_y;
    if (caps.enforce_sparsity)
      net.sparsity = std::max<std::int64_t>(spec.dim_y, static_cast<std::int64_t>(std::ceil(bin.raw_sparsity)));
    net.weight_bound = caps.weight_bound;
    net.output_bound = output_bound_at(spec.n, bin.t_hi, k.c_output);
    s.bins.push_back(std::move(bin));
  }
  return s;
}

nlohmann::json Schedule::to_json() const {
  nlohmann::json j;
  j["mode"] = mode == ScheduleMode::euclidean ? "euclidean" : "manifold";
  j["rate_denominator"] = rate_denominator;
  j["eps1"] = eps1;
  j["tau_raw"] = tau_raw;
  j["tau"] = partition.tau();
  j["horizon"] = partition.horizon();
  j["bins"] = partition.bins();
  j["log_weight_bound"] = {{"4_log_n", log_weight_bound_linear}, {"log_n_pow4", log_weight_bound_quartic}};
  auto arr = nlohmann::json::array();
  for (const auto& b : bins) {
    nlohmann::json e;
    e["t_lo"] = b.t_lo;
    e["t_hi"] = b.t_hi;
    e["raw"] = {{"height", b.raw_height}, {"width", b.raw_width}, {"sparsity", b.raw_sparsity}};
    e["applied"] = {{"height", b.net.height},
                    {"widths", b.net.widths},
                    {"sparsity", b.net.sparsity ? nlohmann::json(*b.net.sparsity) : nlohmann::json("unbounded")},
                    {"weight_bound", std::isfinite(b.net.weight_bound) ? nlohmann::json(b.net.weight_bound)
                                                                        : nlohmann::json("unbounded")},
                    {"output_bound", b.net.output_bound},
                    {"params", b.net.param_count()}};
    arr.push_back(e);
  }
  j["per_bin"] = arr;
  return j;
}

double time_from_uniform(double a, double b, double u) {
  if (!(a >= 0.0) || !(b > a)) throw DomainError("time range needs 0 <= a < b");
  return std::sqrt(a * a + u * (b * b - a * a));
}

double sample_time(double a, double b, Rng& rng) { return time_from_uniform(a, b, uniform01(rng)); }

ScoreModel::ScoreModel(ProblemSpec problem, OUSchedule schedule, TimePartition partition, std::vector<Mlp> nets)
    : problem_(problem), schedule_(std::move(schedule)), partition_(std::move(partition)), nets_(std::move(nets)) {
  if (static_cast<int>(nets_.size()) != partition_.bins())
    throw SpecError("score model needs one network per time bin");
  for (const auto& net : nets_) {
    if (net.spec().input_dim() != problem_.dim_y + problem_.dim_x + 1 || net.spec().output_dim() != problem_.dim_y)
      throw SpecError("bin network shape does not match the problem dimensions");
  }
}

Mat score_inputs(const Mat& ys, const Vec& x, double t, double time_scale) {
  Mat in(ys.rows(), ys.cols() + x.size() + 1);
  in.leftCols(ys.cols()) = ys;
  for (Eigen::Index r = 0; r < ys.rows(); ++r) in.block(r, ys.cols(), 1, x.size()) = x.transpose();
  in.col(in.cols() - 1).setConstant(t / time_scale);
  return in;
}

Mat ScoreModel::eval_batch(const Mat& ys, const Vec& x, double t) const {
  if (ys.cols() != problem_.dim_y || x.size() != problem_.dim_x) throw UsageError("score query dimension mismatch");
  const int b = partition_.bin_of(t);
  return nets_[static_cast<std::size_t>(b)].forward_batch(score_inputs(ys, x, t, partition_.upper(b)));
}

Vec ScoreModel::eval(const Vec& y, const Vec& x, double t) const {
  Mat ys = y.transpose();
  return eval_batch(ys, x, t).row(0).transpose();
}

Mat MonolithicScore::eval_batch(const Mat& ys, const Vec& x, double t) const {
  if (!(t >= tau_ && t <= horizon_)) throw DomainError("time outside [tau, T]");
  return net_.forward_batch(score_inputs(ys, x, t, horizon_));
}

std::vector<std::uint8_t> serialize_model(const ScoreModel& model) {
  io::Writer w;
  w.magic("CDSM");
  w.u16(kModelVersion);
  const ProblemSpec& p = model.problem();
  w.u32(static_cast<std::uint32_t>(p.dim_x));
  w.u32(static_cast<std::uint32_t>(p.dim_y));
  w.u32(static_cast<std::uint32_t>(p.intrinsic_x));
  w.u32(static_cast<std::uint32_t>(p.intrinsic_y));
  w.f64(p.alpha_x);
  w.f64(p.alpha_y);
  w.u64(static_cast<std::uint64_t>(p.n));
  const OUSchedule& ou = model.schedule();
  w.u8(static_cast<std::uint8_t>(ou.kind()));
  w.f64(ou.delta0());
  w.u32(static_cast<std::uint32_t>(ou.times().size()));
  for (std::size_t i = 0; i < ou.times().size(); ++i) {
    w.f64(ou.times()[i]);
    w.f64(ou.deltas()[i]);
  }
  w.f64(model.partition().horizon());
  w.u32(static_cast<std::uint32_t>(model.partition().bins()));
  w.f64(model.partition().tau());
  w.u32(static_cast<std::uint32_t>(model.nets().size()));
  for (const auto& net : model.nets()) write_net(w, net);
  return w.take();
}

ScoreModel deserialize_model(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes);
  r.expect_magic("CDSM");
  const auto version = r.u16();
  if (version != kModelVersion) throw FormatError("unsupported CDSM version " + std::to_string(version));
  ProblemSpec p;
  p.dim_x = static_cast<int>(r.u32());
  p.dim_y = static_cast<int>(r.u32());
  p.intrinsic_x = static_cast<int>(r.u32());
  p.intrinsic_y = static_cast<int>(r.u32());
  p.alpha_x = r.f64();
  p.alpha_y = r.f64();
  p.n = static_cast<std::int64_t>(r.u64());
  const auto kind = r.u8();
  const double delta0 = r.f64();
  const std::uint32_t count = r.u32();
  if (count > (1u << 20)) throw FormatError("implausible drift table size");
  std::vector<double> times, deltas;
  for (std::uint32_t i = 0; i < count; ++i) {
    times.push_back(r.f64());
    deltas.push_back(r.f64());
  }
  const double horizon = r.f64();
  const std::uint32_t bins = r.u32();
  const double tau = r.f64();
  const std::uint32_t nets = r.u32();
  if (nets != bins) throw FormatError("network count does not match bin count");
  try {
    p.validate();
    OUSchedule ou = kind == 0 ? OUSchedule::constant(delta0) : OUSchedule::tabulated(times, deltas);
    if (kind > 1) throw FormatError("unknown drift schedule kind");
    TimePartition part = TimePartition::dyadic(horizon, static_cast<int>(bins));
    if (part.tau() != tau) throw FormatError("partition tau mismatch");
    std::vector<Mlp> list;
    for (std::uint32_t i = 0; i < nets; ++i) list.push_back(read_net(r));
    if (r.remaining() != 0) throw FormatError("trailing bytes after model");
    return ScoreModel(p, std::move(ou), std::move(part), std::move(list));
  } catch (const SpecError& e) {
    throw FormatError(std::string("invalid model in stream: ") + e.what());
  }
}

DsmBatch make_dsm_batch(const Dataset& data, std::span<const Eigen::Index> rows, int draws, double t_lo,
                        double t_hi, const OUSchedule& schedule, Rng& rng) {
  if (rows.empty()) throw UsageError("empty minibatch");
  if (draws < 1) throw UsageError("draws per point must be >= 1");
  const Eigen::Index dy = data.y.cols();
  const Eigen::Index dx = data.x.cols();
  const Eigen::Index total = static_cast<Eigen::Index>(rows.size()) * draws;
  DsmBatch b;
  b.inputs.resize(total, dy + dx + 1);
  b.targets.resize(total, dy);
  b.times.resize(static_cast<std::size_t>(total));
  b.normalizer = 0.5 * (t_hi * t_hi - t_lo * t_lo);
  Eigen::Index k = 0;
  for (const Eigen::Index row : rows) {
    const Vec y0 = data.y.row(row).transpose();
    for (int d = 0; d < draws; ++d, ++k) {
      const double t = sample_time(t_lo, t_hi, rng);
      const Vec yt = perturb(schedule, y0, t, rng);
      b.inputs.block(k, 0, 1, dy) = yt.transpose();
      b.inputs.block(k, dy, 1, dx) = data.x.row(row);
      b.inputs(k, dy + dx) = t / t_hi;
      b.targets.row(k) = kernel_score(schedule, yt, y0, t).transpose();
      b.times[static_cast<std::size_t>(k)] = t;
    }
  }
  return b;
}

double dsm_loss_value(const Mat& outputs, const DsmBatch& batch) {
  if (outputs.rows() != batch.targets.rows() || outputs.cols() != batch.targets.cols())
    throw UsageError("output/target shape mismatch");
  return batch.normalizer * (outputs - batch.targets).squaredNorm() / static_cast<double>(outputs.rows());
}

double dsm_loss(const Mlp& net, const DsmBatch& batch, ParamSet* gradients) {
  if (!gradients) return dsm_loss_value(net.forward_batch(batch.inputs), batch);
  const double scale = 2.0 * batch.normalizer / static_cast<double>(batch.targets.rows());
  return grad(
      net, batch.inputs,
      [&](const Mat& out, Mat& g) {
        g = scale * (out - batch.targets);
        return dsm_loss_value(out, batch);
      },
      *gradients);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps_per_bin", steps_per_bin},
          {"batch_size", batch_size},
          {"draws_per_point", draws_per_point},
          {"learning_rate", adam.learning_rate},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"adam_epsilon", adam.epsilon},
          {"final_lr_ratio", final_lr_ratio},
          {"prune_every", prune_every},
          {"log_every", log_every},
          {"seed", seed},
          {"workers", workers}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps_per_bin = j.value("steps_per_bin", c.steps_per_bin);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.draws_per_point = j.value("draws_per_point", c.draws_per_point);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("adam_epsilon", c.adam.epsilon);
  c.final_lr_ratio = j.value("final_lr_ratio", c.final_lr_ratio);
  c.prune_every = j.value("prune_every", c.prune_every);
  c.log_every = j.value("log_every", c.log_every);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (c.steps_per_bin < 1 || c.batch_size < 1 || c.draws_per_point < 1 || c.prune_every < 1 || c.log_every < 1)
    throw SpecError("training counts must be positive");
  return c;
}

Mlp train_network(Mlp net, const Dataset& data, double t_lo, double t_hi, const OUSchedule& schedule,
                  const TrainConfig& config, std::uint64_t stream, std::int64_t step_offset,
                  std::vector<LossTracePoint>* trace, int bin_label) {
  if (data.size() == 0) throw UsageError("empty dataset");
  if (data.y.cols() + data.x.cols() + 1 != net.spec().input_dim() || data.y.cols() != net.spec().output_dim())
    throw UsageError("dataset dimensions do not match the network");

  Rng rng = substream(config.seed, {stream, static_cast<std::uint64_t>(step_offset)});
  std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(data.size()) - 1);
  AdamState adam(net, config.adam);
  ParamSet gradients = zeros_like(net);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(config.batch_size));
  const auto start = std::chrono::steady_clock::now();
  const double lr0 = config.adam.learning_rate;
  const double lr1 = lr0 * config.final_lr_ratio;
  const int steps = config.steps_per_bin;
  double window = 0.0;
  int window_count = 0;

  for (int step = 0; step < steps; ++step) {
    for (auto& r : rows) r = pick(rng);
    const DsmBatch batch = make_dsm_batch(data, rows, config.draws_per_point, t_lo, t_hi, schedule, rng);
    adam.set_learning_rate(lr1 + (lr0 - lr1) * 0.5 * (1.0 + std::cos(std::numbers::pi * step / steps)));
    const double loss = dsm_loss(net, batch, &gradients);
    if (!std::isfinite(loss)) {
      const Mat out = net.forward_batch(batch.inputs);
      std::size_t bad = 0;
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        if (!out.row(r).allFinite() || !batch.targets.row(r).allFinite()) {
          bad = static_cast<std::size_t>(r);
          break;
        }
      }
      throw NumericError("non-finite loss in bin " + std::to_string(bin_label) + " at step " +
                         std::to_string(step_offset + step) + " (t draw " + describe_t(batch.times[bad]) + ")");
    }
    adam.step(net, gradients);
    if (net.spec().sparsity && (step + 1) % config.prune_every == 0) prune_to_sparsity(net, *net.spec().sparsity);

    window += loss;
    ++window_count;
    if (trace && ((step + 1) % config.log_every == 0 || step + 1 == steps)) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      trace->push_back({bin_label, static_cast<int>(step_offset + step + 1), window / window_count, ms});
      window = 0.0;
      window_count = 0;
    }
  }
  if (net.spec().sparsity) prune_to_sparsity(net, *net.spec().sparsity);
  return net;
}

namespace {

TrainResult train_bins(const Dataset& data, const ProblemSpec& problem, const OUSchedule& ou,
                       const TimePartition& partition, std::vector<Mlp> nets, const TrainConfig& config,
                       std::int64_t step_offset) {
  const int bins = partition.bins();
  std::vector<std::vector<LossTracePoint>> traces(static_cast<std::size_t>(bins));
  parallel_for(static_cast<std::size_t>(bins), config.workers, [&](std::size_t b) {
    const int bin = static_cast<int>(b);
    nets[b] = train_network(std::move(nets[b]), data, partition.lower(bin), partition.upper(bin), ou, config,
                            static_cast<std::uint64_t>(b), step_offset, &traces[b], bin);
  });
  TrainResult result{ScoreModel(problem, ou, partition, std::move(nets)), {}};
  for (auto& t : traces) result.trace.insert(result.trace.end(), t.begin(), t.end());
  return result;
}

}  // namespace

TrainResult train(const Dataset& data, const ProblemSpec& problem, const Schedule& schedule, const OUSchedule& ou,
                  const TrainConfig& config) {
  problem.validate();
  if (data.size() == 0) throw UsageError("empty dataset");
  if (data.x.cols() != problem.dim_x || data.y.cols() != problem.dim_y)
    throw UsageError("dataset dimensions do not match the problem spec");
  std::vector<Mlp> nets;
  for (std::size_t b = 0; b < schedule.bins.size(); ++b) {
    // Initialisation stream is keyed by bin so bins are independent of training order.
    Rng init_rng = substream(config.seed, {0x1A17, b});
    nets.push_back(Mlp::init(schedule.bins[b].net, init_rng));
  }
  return train_bins(data, problem, ou, schedule.partition, std::move(nets), config, 0);
}

TrainResult resume_training(const Dataset& data, ScoreModel model, const TrainConfig& config,
                            std::int64_t step_offset) {
  if (data.x.cols() != model.problem().dim_x || data.y.cols() != model.problem().dim_y)
    throw UsageError("dataset dimensions do not match the checkpoint");
  return train_bins(data, model.problem(), model.schedule(), model.partition(), std::move(model.nets()), config,
                    step_offset);
}

}  // namespace cdiff
