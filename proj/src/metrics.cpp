#include "cdiff/metrics.hpp"

#include "cdiff/errors.hpp"
#include "cdiff/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace cdiff {

double w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("w1_1d needs equal sample sizes");
  if (a.empty()) throw UsageError("w1_1d needs at least one sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return total / static_cast<double>(sa.size());
}

double w1_1d(const Vec& a, const Vec& b) {
  return w1_1d(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
               std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

std::vector<int> hungarian(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw UsageError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double w1_exact(const Mat& a, const Mat& b, int cap) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("w1_exact needs equal-size sets of one dimension");
  if (a.rows() < 1) throw UsageError("w1_exact needs at least one sample");
  if (a.rows() > cap)
    throw UsageError("w1_exact limited to k <= " + std::to_string(cap) + " points; use w1_sliced for larger sets");
  const Eigen::Index k = a.rows();
  Mat cost(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) cost(i, j) = (a.row(i) - b.row(j)).norm();
  const auto match = hungarian(cost);
  // Summing in sorted order keeps D = 1 results bitwise close to the sorted coupling.
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) terms[static_cast<std::size_t>(i)] = cost(i, match[static_cast<std::size_t>(i)]);
  std::sort(terms.begin(), terms.end());
  return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(k);
}

double w1_sliced(const Mat& a, const Mat& b, int projections, Rng& rng) {
  if (a.cols() != b.cols()) throw UsageError("w1_sliced needs sets of one dimension");
  if (projections < 1) throw UsageError("w1_sliced needs at least one projection");
  if (a.cols() == 1) return w1_1d(Vec(a.col(0)), Vec(b.col(0)));
  double total = 0.0;
  for (int p = 0; p < projections; ++p) {
    Vec u = normal_vector(a.cols(), rng);
    u /= u.norm();
    total += w1_1d(Vec(a * u), Vec(b * u));
  }
  return total / projections;
}

double tv_histogram(const Mat& a, const Mat& b, int bins, HistogramBox box) {
  const Eigen::Index dim = a.cols();
  if (b.cols() != dim) throw UsageError("tv_histogram needs sets of one dimension");
  if (dim > 3) throw UsageError("tv_histogram supports dimension <= 3");
  if (bins < 1) throw UsageError("tv_histogram needs at least one bin per axis");
  if (!(box.hi > box.lo)) throw UsageError("tv_histogram box must have hi > lo");
  if (a.rows() < 1 || b.rows() < 1) throw UsageError("tv_histogram needs nonempty sets");
  const std::int64_t sink = -1;
  auto cell = [&](const auto& row) -> std::int64_t {
    std::int64_t index = 0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double v = row(j);
      if (!(v >= box.lo && v <= box.hi)) return sink;
      auto c = static_cast<std::int64_t>(std::floor((v - box.lo) / (box.hi - box.lo) * bins));
      c = std::min<std::int64_t>(c, bins - 1);
      index = index * bins + c;
    }
    return index;
  };
  // Integer cell counts scaled to a common denominator ka * kb.
  const std::int64_t ka = a.rows(), kb = b.rows();
  std::unordered_map<std::int64_t, std::int64_t> diff;
  for (Eigen::Index r = 0; r < a.rows(); ++r) diff[cell(a.row(r))] += kb;
  for (Eigen::Index r = 0; r < b.rows(); ++r) diff[cell(b.row(r))] -= ka;
  std::int64_t total = 0;
  for (const auto& [key, v] : diff) total += v < 0 ? -v : v;
  return std::clamp(0.5 * static_cast<double>(total) / (static_cast<double>(ka) * static_cast<double>(kb)), 0.0, 1.0);
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "auto") return MetricKind::automatic;
  if (name == "w1_1d") return MetricKind::w1_1d;
  if (name == "w1_exact") return MetricKind::w1_exact;
  if (name == "w1_sliced") return MetricKind::w1_sliced;
  if (name == "tv") return MetricKind::tv;
  throw SpecError("unknown metric '" + name + "' (auto | w1_1d | w1_exact | w1_sliced | tv)");
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::automatic: return "auto";
    case MetricKind::w1_1d: return "w1_1d";
    case MetricKind::w1_exact: return "w1_exact";
    case MetricKind::w1_sliced: return "w1_sliced";
    case MetricKind::tv: return "tv";
  }
  return "auto";
}

MetricKind resolve_metric(MetricKind kind, int dim, int k) {
  if (kind != MetricKind::automatic) return kind;
  if (dim == 1) return MetricKind::w1_1d;
  if (dim <= 8 && k <= kExactCap) return MetricKind::w1_exact;
  return MetricKind::w1_sliced;
}

nlohmann::json EvalConfig::to_json() const {
  return {{"covariates", covariates}, {"samples", samples},   {"metric", to_string(metric)},
          {"projections", projections}, {"tv_bins", tv_bins}, {"seed", seed},
          {"workers", workers}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
  EvalConfig c;
  c.covariates = j.value("covariates", c.covariates);
  c.samples = j.value("samples", c.samples);
  if (j.contains("metric")) c.metric = metric_from_string(j.at("metric").get<std::string>());
  c.projections = j.value("projections", c.projections);
  c.tv_bins = j.value("tv_bins", c.tv_bins);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (c.covariates < 1 || c.samples < 1 || c.projections < 1 || c.tv_bins < 1)
    throw SpecError("evaluation counts must be positive");
  return c;
}

ConditionalSampler truth_sampler(const GeneratorSpec& gen, std::uint64_t seed) {
  return [gen, seed](const Vec& x, int k, std::uint64_t stream) {
    Rng rng = substream(seed, {0x7AB1, stream});
    return ConditionalDraw{sample_conditional(gen, x, k, rng), 0};
  };
}

std::pair<double, double> mean_stderr(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("mean of an empty list");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() == 1) return {mean, std::numeric_limits<double>::quiet_NaN()};
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["metric"] = metric;
  j["mean"] = mean;
  j["stderr"] = finite_or_null(stderr_);
  j["stderr_defined"] = std::isfinite(stderr_);
  j["noise_floor"] = noise_floor;
  j["noise_floor_stderr"] = finite_or_null(noise_floor_stderr);
  j["truncation_rate"] = truncation_rate;
  if (tv_mean) j["tv_mean"] = *tv_mean;
  j["per_covariate"] = errors;
  j["per_covariate_floor"] = floors;
  j["config"] = config;
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "index";
  for (Eigen::Index d = 0; d < covariates.cols(); ++d) os << ",x" << d;
  os << ",error,noise_floor\n";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    os << i;
    for (Eigen::Index d = 0; d < covariates.cols(); ++d) os << ',' << covariates(static_cast<Eigen::Index>(i), d);
    os << ',' << errors[i] << ',' << floors[i] << '\n';
  }
  return os.str();
}

EvalReport expected_conditional_error(const ConditionalSampler& model, const GeneratorSpec& gen,
                                      const EvalConfig& config) {
  if (config.covariates < 1 || config.samples < 1) throw UsageError("evaluation needs m >= 1 and k >= 1");
  const int m = config.covariates;
  const int k = config.samples;
  const MetricKind metric = resolve_metric(config.metric, gen.dim_y, k);
  if (metric == MetricKind::w1_1d && gen.dim_y != 1) throw UsageError("w1_1d requires a 1-D response");
  if (metric == MetricKind::w1_exact && k > kExactCap)
    throw UsageError("w1_exact limited to k <= " + std::to_string(kExactCap) + "; use w1_sliced");
  if (metric == MetricKind::tv && gen.dim_y > 3) throw UsageError("tv requires response dimension <= 3");

  EvalReport report;
  report.metric = to_string(metric);
  Rng cov_rng = substream(config.seed, {0xC0F});
  report.covariates = sample_covariates_stratified(gen, m, cov_rng);
  report.errors.assign(static_cast<std::size_t>(m), 0.0);
  report.floors.assign(static_cast<std::size_t>(m), 0.0);
  std::vector<double> tvs(static_cast<std::size_t>(m), 0.0);
  std::vector<int> truncated(static_cast<std::size_t>(m), 0);
  const bool with_tv = gen.dim_y <= 2;
  const HistogramBox box{-gen.radius, gen.radius};

  auto distance = [&](const Mat& a, const Mat& b, std::uint64_t j) {
    switch (metric) {
      case MetricKind::w1_1d: return w1_1d(Vec(a.col(0)), Vec(b.col(0)));
      case MetricKind::w1_exact: return w1_exact(a, b);
      case MetricKind::tv: return tv_histogram(a, b, config.tv_bins, box);
      default: {
        Rng proj = substream(config.seed, {0x511C, j});
        return w1_sliced(a, b, config.projections, proj);
      }
    }
  };

  parallel_for(static_cast<std::size_t>(m), config.workers, [&](std::size_t j) {
    const Vec x = report.covariates.row(static_cast<Eigen::Index>(j)).transpose();
    const ConditionalDraw draw = model(x, k, j);
    if (draw.points.rows() != k || draw.points.cols() != gen.dim_y)
      throw UsageError("model sampler returned the wrong shape");
    Rng r1 = substream(config.seed, {0x7121, j});
    Rng r2 = substream(config.seed, {0x7122, j});
    const Mat truth = sample_conditional(gen, x, k, r1);
    const Mat truth2 = sample_conditional(gen, x, k, r2);
    report.errors[j] = distance(draw.points, truth, j);
    report.floors[j] = distance(truth2, truth, j);
    truncated[j] = draw.truncated;
    if (with_tv) tvs[j] = tv_histogram(draw.points, truth, config.tv_bins, box);
  });

  std::tie(report.mean, report.stderr_) = mean_stderr(report.errors);
  std::tie(report.noise_floor, report.noise_floor_stderr) = mean_stderr(report.floors);
  report.truncation_rate = static_cast<double>(std::accumulate(truncated.begin(), truncated.end(), 0)) /
                           (static_cast<double>(m) * k);
  if (with_tv) report.tv_mean = mean_stderr(tvs).first;
  report.config = config.to_json();
  report.config["metric_resolved"] = report.metric;
  return report;
}

double relative_score_error(const PointScore& score, const GeneratorSpec& gen, const OUSchedule& schedule,
                            double t_lo, double t_hi, int draws, Rng& rng) {
  if (!supports_analytic_score(gen)) throw UsageError("generator has no analytic score");
  if (!(t_hi > t_lo) || !(t_lo > 0.0) || draws < 1) throw UsageError("invalid score-error settings");
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Vec x = sample_covariate(gen, rng);
    const Vec y0 = sample_conditional(gen, x, 1, rng).row(0).transpose();
    const double t = t_lo + (t_hi - t_lo) * uniform01(rng);
    const Vec yt = perturb(schedule, y0, t, rng);
    const Vec truth = *analytic_score(gen, schedule, x, yt, t);
    num += t * (score(yt, x, t) - truth).squaredNorm();
    den += t * truth.squaredNorm();
  }
  return std::sqrt(num / den);
}

}  // namespace cdiff
