#include "cdiff/sampler.hpp"

#include "cdiff/errors.hpp"
#include "cdiff/parallel.hpp"

#include <cmath>
#include <sstream>

namespace cdiff {

namespace {

constexpr Eigen::Index kChunk = 128;

}  // namespace

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler_maruyama" || name == "euler") return Integrator::euler_maruyama;
  if (name == "exponential") return Integrator::exponential;
  throw SpecError("unknown integrator '" + name + "' (euler_maruyama | exponential)");
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::exponential ? "exponential" : "euler_maruyama";
}

void SamplerConfig::validate() const {
  if (substeps < 1) throw SpecError("substeps must be >= 1");
  if (!(truncation > 0.0)) throw SpecError("truncation radius L must be positive");
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"substeps", substeps},
          {"integrator", to_string(integrator)},
          {"truncation", truncation},
          {"seed", seed},
          {"workers", workers}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.substeps = j.value("substeps", c.substeps);
  if (j.contains("integrator")) c.integrator = integrator_from_string(j.at("integrator").get<std::string>());
  c.truncation = j.value("truncation", c.truncation);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  return c;
}

std::vector<double> backward_grid(const TimePartition& partition, int substeps) {
  if (substeps < 1) throw SpecError("substeps must be >= 1");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(partition.bins() * substeps) + 1);
  grid.push_back(partition.horizon());
  for (int b = partition.bins() - 1; b >= 0; --b) {
    const double hi = partition.upper(b);
    const double lo = partition.lower(b);
    for (int j = 1; j < substeps; ++j) grid.push_back(hi * std::pow(lo / hi, static_cast<double>(j) / substeps));
    grid.push_back(lo);
  }
  return grid;
}

BatchScore model_score(const ScoreModel& model) {
  return [&model](const Mat& ys, const Vec& x, double s) { return model.eval_batch(ys, x, s); };
}

Mat euler_step(const Mat& y, const Mat& score, double s_from, double s_to, const OUSchedule& schedule,
               const Mat& noise) {
  const double h = s_from - s_to;
  const double d = schedule.delta(s_from);
  return y + (h * d) * (y + 2.0 * score) + std::sqrt(2.0 * d * h) * noise;
}

Mat exponential_step(const Mat& y, const Mat& score, double s_from, double s_to, const OUSchedule& schedule,
                     const Mat& noise) {
  const double a = schedule.integrated_drift(s_from) - schedule.integrated_drift(s_to);
  return y + std::expm1(a) * (y + 2.0 * score) + std::sqrt(std::expm1(2.0 * a)) * noise;
}

int truncate_rows(Mat& y, double L) {
  int count = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (y.row(r).cwiseAbs().maxCoeff() > L) {
      y.row(r).setZero();
      ++count;
    }
  }
  return count;
}

SampleResult sample(const BatchScore& score, const Vec& x, int k, int dim_y, const OUSchedule& schedule,
                    const std::vector<double>& grid, const SamplerConfig& config, std::uint64_t stream) {
  config.validate();
  if (k < 1) throw UsageError("sample count must be >= 1");
  if (dim_y < 1) throw UsageError("response dimension must be >= 1");
  if (grid.size() < 2) throw UsageError("backward grid needs at least two knots");

  SampleResult result;
  result.points.resize(k, dim_y);
  const std::size_t chunks = static_cast<std::size_t>((k + kChunk - 1) / kChunk);
  std::vector<int> truncated(chunks, 0);

  parallel_for(chunks, config.workers, [&](std::size_t chunk) {
    const Eigen::Index first = static_cast<Eigen::Index>(chunk) * kChunk;
    const Eigen::Index rows = std::min<Eigen::Index>(kChunk, k - first);
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(rows));
    for (Eigen::Index c = 0; c < rows; ++c)
      rngs.push_back(substream(config.seed, {0x5A3B, stream, static_cast<std::uint64_t>(first + c)}));

    auto draw = [&](Mat& m) {
      for (Eigen::Index c = 0; c < rows; ++c)
        for (Eigen::Index j = 0; j < dim_y; ++j) m(c, j) = standard_normal(rngs[static_cast<std::size_t>(c)]);
    };

    Mat y(rows, dim_y);
    Mat noise(rows, dim_y);
    draw(y);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double s_from = grid[i];
      const double s_to = grid[i + 1];
      const Mat sc = score(y, x, s_from);
      if (sc.rows() != rows || sc.cols() != dim_y) throw NumericError("score returned the wrong shape");
      if (!sc.allFinite()) {
        Eigen::Index bad = 0;
        while (bad < rows && sc.row(bad).allFinite()) ++bad;
        std::ostringstream os;
        os.precision(17);
        os << "non-finite score for chain " << first + bad << " at s = " << s_from;
        throw NumericError(os.str());
      }
      draw(noise);
      y = config.integrator == Integrator::exponential ? exponential_step(y, sc, s_from, s_to, schedule, noise)
                                                      : euler_step(y, sc, s_from, s_to, schedule, noise);
    }
    if (!y.allFinite()) throw NumericError("sampler diverged before truncation");
    truncated[chunk] = truncate_rows(y, config.truncation);
    result.points.middleRows(first, rows) = y;
  });

  for (int t : truncated) result.truncated += t;
  return result;
}

std::string samples_to_csv(const Mat& points) {
  std::ostringstream os;
  os.precision(17);
  os << "chain";
  for (Eigen::Index j = 0; j < points.cols(); ++j) os << ",y" << j;
  os << '\n';
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    os << r;
    for (Eigen::Index j = 0; j < points.cols(); ++j) os << ',' << points(r, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace cdiff
