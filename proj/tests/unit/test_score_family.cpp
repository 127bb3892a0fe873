#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdiff/errors.hpp"
#include "cdiff/score_family.hpp"

#include <cmath>
#include <numeric>

using namespace cdiff;

namespace {

ProblemSpec problem(std::int64_t n, int dx = 1, int dy = 1, double ax = 1.0, double ay = 1.0, int ix = 1,
                    int iy = 1) {
  ProblemSpec p;
  p.n = n;
  p.dim_x = dx;
  p.dim_y = dy;
  p.intrinsic_x = ix;
  p.intrinsic_y = iy;
  p.alpha_x = ax;
  p.alpha_y = ay;
  return p;
}

Dataset small_gaussian_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_joint(make_generator("cond_gaussian"), n, rng);
}

}  // namespace

TEST_CASE("problem spec validation") {
  CHECK_NOTHROW(problem(100).validate());
  CHECK_THROWS_AS(problem(100, 1, 1, 0.0).validate(), SpecError);
  CHECK_THROWS_AS(problem(100, 1, 1, 1.0, -1.0).validate(), SpecError);
  CHECK_THROWS_AS(problem(100, 1, 2, 1.0, 1.0, 1, 3).validate(), SpecError);
  CHECK_THROWS_AS(problem(100, 0).validate(), SpecError);
  const ProblemSpec p = problem(777, 3, 2, 1.5, 2.0, 2, 1);
  CHECK(ProblemSpec::from_json(p.to_json()) == p);
}

TEST_CASE("dyadic partition") {
  const TimePartition p = TimePartition::dyadic(9.0, 5);
  CHECK(p.bins() == 5);
  CHECK(p.horizon() / p.tau() == 32.0);
  for (int i = 0; i < p.bins(); ++i) CHECK(p.upper(i) == 2.0 * p.lower(i));
  CHECK(p.bin_of(p.tau()) == 0);
  for (int i = 1; i < p.bins(); ++i) {
    CHECK(p.bin_of(p.knots()[static_cast<std::size_t>(i)]) == i);
    CHECK(p.bin_of(std::nextafter(p.knots()[static_cast<std::size_t>(i)], 0.0)) == i - 1);
  }
  CHECK(p.bin_of(p.horizon()) == 4);
  CHECK_THROWS_AS(p.bin_of(std::nextafter(p.tau(), 0.0)), DomainError);
  CHECK_THROWS_AS(p.bin_of(std::nextafter(p.horizon(), 100.0)), DomainError);
}

TEST_CASE("golden schedule") {
  const Schedule s = schedule_from_theory(problem(10000), ScheduleMode::euclidean);
  CHECK(s.rate_denominator == 4.0);
  CHECK(s.eps1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.tau_raw == doctest::Approx(1e-4).epsilon(1e-10));
  CHECK(s.partition.horizon() == doctest::Approx(9.2103404).epsilon(1e-7));
  CHECK(s.partition.bins() == 17);
  CHECK(s.partition.tau() == doctest::Approx(7.0270e-5).epsilon(1e-4));
  CHECK(output_bound_at(10000, 1.0) == doctest::Approx(3.0349).epsilon(1e-4));
  CHECK(output_bound_at(10000, 4.0) == output_bound_at(10000, 1.0));
  CHECK(output_bound_at(10000, 0.25) == doctest::Approx(2.0 * 3.0349).epsilon(1e-4));
  CHECK(s.bins.size() == 17u);
  for (const auto& b : s.bins) {
    CHECK(b.net.output_bound == output_bound_at(10000, b.t_hi));
    CHECK(b.net.height == 6);
    CHECK(b.net.widths.front() == 3);
    CHECK(b.net.widths.back() == 1);
    CHECK(b.net.widths[1] >= 8);
    CHECK(b.net.widths[1] <= 256);
  }
}

TEST_CASE("schedule grid against hand evaluation") {
  struct Case {
    std::int64_t n;
    double ax, ay;
    int dx, dy, ix, iy;
  };
  const Case cases[] = {{512, 1, 1, 1, 1, 1, 1},  {8192, 2, 1, 3, 2, 1, 1}, {1000, 0.5, 1.5, 2, 4, 1, 2},
                        {4096, 1, 2, 8, 16, 1, 1}, {100000, 3, 3, 1, 1, 1, 1}};
  for (const auto& c : cases) {
    for (ScheduleMode mode : {ScheduleMode::euclidean, ScheduleMode::manifold}) {
      const ProblemSpec p = problem(c.n, c.dx, c.dy, c.ax, c.ay, c.ix, c.iy);
      const Schedule s = schedule_from_theory(p, mode);
      const double dx = mode == ScheduleMode::euclidean ? c.dx : c.ix;
      const double dy = mode == ScheduleMode::euclidean ? c.dy : c.iy;
      const double denom = 2 * c.ay + dy + c.ay / c.ax * dx;
      const double eps = std::pow(static_cast<double>(c.n), -1.0 / denom);
      const double tau_raw = std::pow(eps, 2 * (c.ay + 1));
      const double horizon = std::log(static_cast<double>(c.n));
      const int bins = static_cast<int>(std::ceil(std::log2(horizon / tau_raw)));
      CHECK(s.rate_denominator == doctest::Approx(denom).epsilon(1e-14));
      CHECK(s.eps1 == doctest::Approx(eps).epsilon(1e-12));
      CHECK(s.partition.bins() == bins);
      CHECK(s.partition.tau() == doctest::Approx(horizon / std::pow(2.0, bins)).epsilon(1e-12));
      CHECK(s.partition.tau() <= tau_raw);
      CHECK(s.partition.tau() > tau_raw / 2);
      const Schedule again = schedule_from_theory(p, mode);
      CHECK(again.to_json() == s.to_json());
    }
  }
  CHECK_THROWS_AS(schedule_from_theory(problem(100, 1, 1, 0.0), ScheduleMode::euclidean), SpecError);
}

TEST_CASE("sample_time") {
  CHECK(time_from_uniform(0.2, 3.0, 0.0) == 0.2);
  CHECK(time_from_uniform(0.2, 3.0, 1.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(time_from_uniform(0.0, 1.0, 0.5) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  Rng rng(1);
  CHECK_THROWS_AS(sample_time(1.0, 1.0, rng), DomainError);
  CHECK_THROWS_AS(sample_time(2.0, 1.0, rng), DomainError);

  double sum = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) sum += sample_time(1e-300, 1.0, rng);
  CHECK(std::abs(sum / draws - 2.0 / 3.0) <= 1e-3);

  // E_{t ~ t}[g] (b^2 - a^2)/2 = int_a^b t g(t) dt with g = 1/t^2: log(b/a).
  const double a = 0.125, b = 0.25;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double t = sample_time(a, b, rng);
    acc += 1.0 / (t * t);
  }
  CHECK(std::abs(acc / draws * 0.5 * (b * b - a * a) - std::log(b / a)) <= 2e-3);
}

TEST_CASE("dsm loss at the population minimizer") {
  const GeneratorSpec gen = make_generator("cond_gaussian");
  const OUSchedule ou;
  Rng rng(2);
  const Dataset data = sample_joint(gen, 4000, rng);
  std::vector<Eigen::Index> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  const double lo = 0.125, hi = 0.25, s = gen.noise_scale;

  const DsmBatch batch = make_dsm_batch(data, rows, 8, lo, hi, ou, rng);
  CHECK(batch.normalizer == 0.5 * (hi * hi - lo * lo));
  Mat marginal(batch.targets.rows(), 1);
  std::vector<double> terms(static_cast<std::size_t>(marginal.rows()));
  for (Eigen::Index r = 0; r < marginal.rows(); ++r) {
    const Vec x = batch.inputs.block(r, 1, 1, 1).transpose();
    const Vec y = batch.inputs.block(r, 0, 1, 1).transpose();
    const double t = batch.times[static_cast<std::size_t>(r)];
    CHECK(batch.inputs(r, 2) == t / hi);
    CHECK(t >= lo);
    CHECK(t <= hi);
    marginal(r, 0) = gaussian_marginal_score(ou, Vec::Constant(1, 0.5 * x[0]), s, y, t)[0];
    terms[static_cast<std::size_t>(r)] = std::pow(marginal(r, 0) - batch.targets(r, 0), 2);
  }
  const double loss = dsm_loss_value(marginal, batch);
  CHECK(loss > 0.0);

  // Irreducible term: E||kernel||^2 - E||marginal||^2 = 1/sigma^2 - 1/(m^2 s^2 + sigma^2) at each t,
  // averaged over the t-proportional draw (Simpson).
  auto irreducible = [&](double t) {
    const double m = ou.mean_coeff(t), v = ou.noise_var(t);
    return 1.0 / v - 1.0 / (m * m * s * s + v);
  };
  const int panels = 2000;
  const double h = (hi - lo) / panels;
  double integral = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = lo + i * h;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * t * irreducible(t);
  }
  integral *= h / 3.0;
  const double expected = integral;  // normalizer * E_t[...] = int t g(t) dt
  double mean = 0.0, sq = 0.0;
  for (double v : terms) mean += v;
  mean /= static_cast<double>(terms.size());
  for (double v : terms) sq += (v - mean) * (v - mean);
  const double se = batch.normalizer * std::sqrt(sq / (terms.size() - 1.0) / terms.size());
  CHECK(std::abs(loss - expected) <= 3.0 * se);
}

TEST_CASE("doubling draws halves the loss variance") {
  const Dataset data = small_gaussian_data(64, 3);
  const OUSchedule ou;
  std::vector<Eigen::Index> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  auto variance = [&](int draws, std::uint64_t seed) {
    Rng rng(seed);
    const int reps = 3000;
    std::vector<double> v;
    for (int r = 0; r < reps; ++r) {
      const DsmBatch b = make_dsm_batch(data, rows, draws, 0.5, 1.0, ou, rng);
      v.push_back(dsm_loss_value(Mat::Zero(b.targets.rows(), 1), b));
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / reps;
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (reps - 1);
  };
  const double ratio = variance(1, 10) / variance(2, 11);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
  Rng rng(1);
  CHECK_THROWS_AS(make_dsm_batch(data, std::span<const Eigen::Index>{}, 1, 0.5, 1.0, ou, rng), UsageError);
}

TEST_CASE("score model routing, bounds and checkpoint") {
  const ProblemSpec p = problem(2048);
  ScheduleCaps caps;
  caps.max_height = 2;
  caps.max_width = 8;
  const Schedule sch = schedule_from_theory(p, ScheduleMode::euclidean, {}, caps);
  Rng rng(4);
  std::vector<Mlp> nets;
  for (std::size_t b = 0; b < sch.bins.size(); ++b) {
    Mlp net = Mlp::zeros(sch.bins[b].net);
    net.layers().back().bias[0] = 0.125 * static_cast<double>(b);  // constant output tags the bin
    nets.push_back(net);
  }
  const ScoreModel tagged(p, OUSchedule(), sch.partition, nets);
  const auto& knots = sch.partition.knots();
  const Vec y = Vec::Zero(1), x = Vec::Zero(1);
  CHECK(tagged.eval(y, x, knots[0])[0] == 0.0);
  CHECK(tagged.eval(y, x, knots[3])[0] == 0.375);
  CHECK(tagged.eval(y, x, sch.partition.horizon())[0] == 0.125 * static_cast<double>(knots.size() - 2));
  CHECK_THROWS_AS(tagged.eval(y, x, knots[0] * 0.5), DomainError);
  CHECK_THROWS_AS(tagged.eval(y, x, sch.partition.horizon() * 1.01), DomainError);

  std::vector<Mlp> random_nets;
  for (const auto& b : sch.bins) {
    Mlp net = Mlp::init(b.net, rng);
    for (auto& l : net.layers()) l.weight *= 40.0;
    random_nets.push_back(net);
  }
  const ScoreModel model(p, OUSchedule(), sch.partition, random_nets);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    const double t = sch.partition.tau() * std::pow(2.0, u * sch.partition.bins());
    const Vec yy = 3.0 * normal_vector(1, rng), xx = normal_vector(1, rng);
    const int b = sch.partition.bin_of(std::min(t, sch.partition.horizon()));
    const double v = sch.bins[static_cast<std::size_t>(b)].net.output_bound;
    REQUIRE(std::abs(model.eval(yy, xx, std::min(t, sch.partition.horizon()))[0]) <= v);
  }

  const auto bytes = serialize_model(model);
  const ScoreModel back = deserialize_model(bytes);
  CHECK(serialize_model(back) == bytes);
  CHECK(back.problem() == p);
  const Mat ys = normal_vector(20, rng);
  CHECK((back.eval_batch(ys, x, 0.3).array() == model.eval_batch(ys, x, 0.3).array()).all());
  auto cut = bytes;
  cut.resize(cut.size() - 5);
  CHECK_THROWS_AS(deserialize_model(cut), FormatError);
  auto magic = bytes;
  magic[1] = 'Z';
  CHECK_THROWS_AS(deserialize_model(magic), FormatError);
}

TEST_CASE("training determinism and bin independence") {
  const Dataset data = small_gaussian_data(256, 5);
  const ProblemSpec p = problem(256);
  ScheduleCaps caps;
  caps.max_height = 2;
  caps.max_width = 8;
  ScheduleConstants k;
  k.c_tau = 1000.0;  // few bins
  const Schedule sch = schedule_from_theory(p, ScheduleMode::euclidean, k, caps);
  TrainConfig cfg;
  cfg.steps_per_bin = 30;
  cfg.batch_size = 32;
  cfg.log_every = 10;
  cfg.seed = 99;
  cfg.workers = 1;
  const OUSchedule ou;
  const TrainResult a = train(data, p, sch, ou, cfg);
  const TrainResult b = train(data, p, sch, ou, cfg);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(a.trace.size() == sch.bins.size() * 3);
  for (const auto& pt : a.trace) CHECK(std::isfinite(pt.loss));

  // Training bins one at a time in reverse order gives the same networks.
  for (int bin = sch.partition.bins() - 1; bin >= 0; --bin) {
    Rng init = substream(cfg.seed, {0x1A17, static_cast<std::uint64_t>(bin)});
    const Mlp net = train_network(Mlp::init(sch.bins[static_cast<std::size_t>(bin)].net, init), data,
                                  sch.partition.lower(bin), sch.partition.upper(bin), ou, cfg,
                                  static_cast<std::uint64_t>(bin), 0, nullptr, bin);
    CHECK(net.flat_params() == a.model.nets()[static_cast<std::size_t>(bin)].flat_params());
  }

  const TrainResult r1 = resume_training(data, a.model, cfg, 30);
  const TrainResult r2 = resume_training(data, a.model, cfg, 30);
  CHECK(serialize_model(r1.model) == serialize_model(r2.model));
  CHECK(serialize_model(r1.model) != serialize_model(a.model));

  const TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  Dataset wrong = data;
  wrong.y = Mat::Zero(wrong.y.rows(), 2);
  CHECK_THROWS_AS(train(wrong, p, sch, ou, cfg), UsageError);
}
