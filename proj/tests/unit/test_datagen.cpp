#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdiff/datagen.hpp"
#include "cdiff/errors.hpp"
#include "cdiff/metrics.hpp"

#include <cmath>
#include <filesystem>

using namespace cdiff;

TEST_CASE("dataset format") {
  Rng rng(1);
  const GeneratorSpec gen = make_generator("bimodal1d");
  const Dataset d = sample_joint(gen, 8192, rng);
  const auto bytes = encode_dataset(d);
  CHECK(bytes.size() == kDatasetHeaderBytes + 8u * 8192u * 2u);
  const Dataset back = decode_dataset(bytes);
  CHECK((back.x.array() == d.x.array()).all());
  CHECK((back.y.array() == d.y.array()).all());

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad), FormatError);
  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS_AS(decode_dataset(cut), FormatError);

  const auto path = (std::filesystem::temp_directory_path() / "cdiff_unit_dataset.cdrg").string();
  save_dataset(d, path);
  CHECK(std::filesystem::file_size(path) == bytes.size());
  const Dataset loaded = load_dataset(path);
  CHECK((loaded.y.array() == d.y.array()).all());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), IoError);

  Dataset small;
  small.x = d.x.topRows(20);
  small.y = d.y.topRows(20);
  const Dataset csv = dataset_from_csv(dataset_to_csv(small));
  CHECK((csv.x.array() == small.x.array()).all());
  CHECK((csv.y.array() == small.y.array()).all());
}

TEST_CASE("generators: determinism, radii, unknown names") {
  for (const auto& name : generator_names()) {
    const GeneratorSpec gen = make_generator(name, {{"dim_y", name == "bimodal1d" || name == "curve_X" ? 1 : 4}});
    Rng a(2), b(2);
    const Dataset da = sample_joint(gen, 2000, a), db = sample_joint(gen, 2000, b);
    CHECK((da.y.array() == db.y.array()).all());
    CHECK((da.x.array() == db.x.array()).all());
    CHECK(da.y.cwiseAbs().maxCoeff() <= gen.radius);
    CHECK(da.x.cwiseAbs().maxCoeff() <= gen.covariate_radius + 1e-12);
    CHECK(da.y.allFinite());
    CHECK(generator_from_json(gen.to_json()).to_json() == gen.to_json());
  }
  CHECK_THROWS_AS(make_generator("swiss_roll"), SpecError);
  CHECK_THROWS_AS(make_generator("cond_gaussian", {{"s", -1.0}}), SpecError);
}

TEST_CASE("cond_gaussian correlation") {
  Rng rng(3);
  const GeneratorSpec gen = make_generator("cond_gaussian", {{"s", 0.25}});
  const std::size_t n = 100000;
  const Dataset d = sample_joint(gen, n, rng);
  const Vec x = d.x.col(0), y = d.y.col(0);
  const double mx = x.mean(), my = y.mean();
  const double cov = ((x.array() - mx) * (y.array() - my)).mean();
  const double sx = std::sqrt((x.array() - mx).square().mean()), sy = std::sqrt((y.array() - my).square().mean());
  const double rho = std::sqrt(1.0 / 3.0) * 0.5 / std::sqrt(0.25 / 3.0 + 0.0625);
  CHECK(std::abs(cov / (sx * sy) - rho) <= 3.0 * (1 - rho * rho) / std::sqrt(double(n)));
}

TEST_CASE("conditional samplers") {
  Rng rng(4);
  const int k = 20000;
  SUBCASE("cond_gaussian at zero") {
    const GeneratorSpec gen = make_generator("cond_gaussian", {{"s", 0.25}});
    const Mat y = sample_conditional(gen, Vec::Zero(1), k, rng);
    CHECK(std::abs(y.mean()) <= 3 * 0.25 / std::sqrt(double(k)));
    const double var = (y.array() - y.mean()).square().mean();
    CHECK(std::abs(var - 0.0625) <= 3 * 0.0625 * std::sqrt(2.0 / k));
  }
  SUBCASE("bimodal symmetric at w = 0.5") {
    const GeneratorSpec gen = make_generator("bimodal1d");
    const Mat y = sample_conditional(gen, Vec::Zero(1), k, rng);
    const double sd = std::sqrt((y.array() - y.mean()).square().mean());
    CHECK(std::abs(y.mean()) <= 3 * sd / std::sqrt(double(k)));
    const double trough = (y.array().abs() <= 0.15).cast<double>().mean();
    const double side = (y.array() > 0.35 && y.array() < 0.65).cast<double>().mean();
    CHECK(trough < side);
    CHECK_THROWS_AS(sample_conditional(gen, Vec::Constant(1, 1.5), 4, rng), DomainError);
  }
  SUBCASE("section manifolds") {
    for (const char* name : {"circle_section", "plane_section"}) {
      const GeneratorSpec gen = make_generator(name, {{"dim_y", 8}, {"intrinsic_y", 2}});
      for (int i = 0; i < 10; ++i) {
        const Vec x = sample_covariate(gen, rng);
        const Mat y = sample_conditional(gen, x, 200, rng);
        for (Eigen::Index r = 0; r < y.rows(); ++r)
          CHECK(*distance_to_section(gen, x, y.row(r).transpose()) <= 1e-12);
        CHECK(*distance_to_section(gen, x, y.row(0).transpose() + 0.3 * Vec::Ones(8)) > 0.01);
      }
    }
  }
  SUBCASE("curve covariates") {
    const GeneratorSpec gen = make_generator("curve_X", {{"dim_x", 5}});
    CHECK(gen.intrinsic_x == 1);
    for (int i = 0; i < 50; ++i) {
      const Vec x = sample_covariate(gen, rng);
      const Vec c = effective_covariate(gen, x);
      CHECK(c.size() == 1);
      CHECK(std::abs(c[0]) <= 1.0);
    }
    CHECK_THROWS_AS(sample_conditional(gen, Vec::Constant(5, 3.0), 2, rng), DomainError);
  }
}

TEST_CASE("two-sample self test") {
  Rng rng(5);
  const GeneratorSpec gen = make_generator("bimodal1d");
  const Vec x = Vec::Constant(1, 0.3);
  const Mat a = sample_conditional(gen, x, 512, rng), b = sample_conditional(gen, x, 512, rng);
  CHECK(w1_1d(Vec(a.col(0)), Vec(b.col(0))) <= 0.1);
}

TEST_CASE("analytic score") {
  const OUSchedule ou;
  Rng rng(6);
  SUBCASE("single component equals the Gaussian marginal score") {
    const GeneratorSpec gen = make_generator("cond_gaussian", {{"s", 0.3}});
    for (int i = 0; i < 20; ++i) {
      const Vec x = sample_covariate(gen, rng);
      const Vec y = normal_vector(1, rng);
      const double t = 0.01 + uniform01(rng);
      const Vec want = gaussian_marginal_score(ou, conditional_mean(gen, x), 0.3, y, t);
      CHECK((*analytic_score(gen, ou, x, y, t) - want).norm() <= 1e-12 * std::max(1.0, want.norm()));
    }
  }
  SUBCASE("finite differences of the log density") {
    for (const char* name : {"cond_gaussian", "bimodal1d"}) {
      const GeneratorSpec gen = make_generator(name, {{"dim_y", 1}});
      for (int i = 0; i < 20; ++i) {
        const Vec x = sample_covariate(gen, rng);
        const Vec y = 1.5 * normal_vector(1, rng);
        const double t = 0.02 + 2.0 * uniform01(rng);
        const double h = 1e-5;
        const double fd = (*log_density(gen, ou, x, y.array() + h, t) - *log_density(gen, ou, x, y.array() - h, t)) / (2 * h);
        const double s = (*analytic_score(gen, ou, x, y, t))[0];
        CHECK(std::abs(s - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
  SUBCASE("large t tends to the stationary score") {
    const GeneratorSpec gen = make_generator("bimodal1d");
    const double t = 12.0;
    for (double yv : {-2.0, -0.5, 0.0, 1.3}) {
      const Vec y = Vec::Constant(1, yv);
      CHECK(std::abs((*analytic_score(gen, ou, Vec::Zero(1), y, t))[0] + yv) <= 10 * ou.mean_coeff(t));
    }
  }
  SUBCASE("unsupported variants") {
    const GeneratorSpec gen = make_generator("circle_section");
    CHECK_FALSE(supports_analytic_score(gen));
    CHECK_FALSE(analytic_score(gen, ou, Vec::Zero(1), Vec::Zero(2), 0.5).has_value());
  }
  CHECK_THROWS_AS(analytic_score(make_generator("bimodal1d"), ou, Vec::Zero(1), Vec::Zero(1), 0.0), DomainError);
}

TEST_CASE("density floor on the core") {
  const OUSchedule ou;
  const GeneratorSpec gen = make_generator("bimodal1d");
  CHECK(gen.density_floor > 0.0);
  for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0})
    for (int i = 0; i <= 400; ++i) {
      const double y = -1.0 + i / 200.0;
      CHECK(std::exp(*log_density(gen, ou, Vec::Constant(1, c), Vec::Constant(1, y), 0.0)) >= gen.density_floor);
    }
}
