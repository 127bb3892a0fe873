#include "cdiff/datagen.hpp"

#include "cdiff/binary_io.hpp"
#include "cdiff/errors.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace cdiff {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint16_t kDatasetVersion = 1;
// Gaussian draws are redrawn beyond this many standard deviations so every sample
// stays inside the declared radius. The discarded mass (~2e-9) is ignored by the
// closed-form scores and densities.
constexpr double kGaussTail = 6.0;
constexpr double kMembershipTol = 1e-9;

double bump_unnormalized(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

// int_{-1}^{1} exp(-1/(1-u^2)) du
double bump_mass() {
  static const double z = detail::gauss_legendre16().integrate(bump_unnormalized, -1.0, 1.0, 64);
  return z;
}

double bump_density(double y, double halfwidth) {
  return bump_unnormalized(y / halfwidth) / (halfwidth * bump_mass());
}

double log_normal_pdf(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * kPi * var);
}

Mat orthonormal_frame(int rows, int cols, std::uint64_t seed, std::uint64_t tag) {
  if (cols > rows) throw SpecError("embedding frame needs ambient dimension >= intrinsic dimension");
  Rng rng = substream(seed, {tag, static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols)});
  Eigen::MatrixXd g(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) g(r, c) = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

double bimodal_weight(double c) { return 0.5 * (1.0 + std::sin(kPi * c)); }

Eigen::Vector2d circle_center(double c) { return {0.3 * c, 0.2 * std::sin(kPi * c)}; }
double circle_radius(double c) { return 0.6 + 0.2 * c; }
double circle_skew(double c) { return 0.8 * std::sin(0.5 * kPi * c); }

Vec plane_offset(const GeneratorSpec& spec, double c) {
  Vec b(spec.dim_y);
  for (int j = 0; j < spec.dim_y; ++j) b[j] = 0.3 * std::sin(kPi * c + j);
  return b;
}

double truncated_normal(Rng& rng) {
  for (;;) {
    const double z = standard_normal(rng);
    if (std::abs(z) <= kGaussTail) return z;
  }
}

// Density (1 + 0.5 cos(pi z)) / 2 on [-1, 1].
double plane_latent(Rng& rng) {
  for (;;) {
    const double z = 2.0 * uniform01(rng) - 1.0;
    if (uniform01(rng) * 1.5 <= 1.0 + 0.5 * std::cos(kPi * z)) return z;
  }
}

double bump_draw(double halfwidth, Rng& rng) {
  // max of exp(-1/(1-u^2)) is e^{-1}
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    if (uniform01(rng) * std::exp(-1.0) <= bump_unnormalized(u)) return halfwidth * u;
  }
}

// log q(y) and q'(y)/q(y) for q = bump convolved with N(0, sigma^2) after scaling by m.
std::pair<double, double> noised_bump(double y, double m, double var, double halfwidth) {
  const double sd = std::sqrt(var);
  double lo = std::max(-halfwidth, (y - 12.0 * sd) / m);
  double hi = std::min(halfwidth, (y + 12.0 * sd) / m);
  if (!(hi > lo)) return {-std::numeric_limits<double>::infinity(), 0.0};
  const auto& gl = detail::gauss_legendre16();
  const double norm = 1.0 / std::sqrt(2.0 * kPi * var);
  const double q = gl.integrate(
      [&](double z) {
        const double d = y - m * z;
        return bump_density(z, halfwidth) * norm * std::exp(-0.5 * d * d / var);
      },
      lo, hi, 16);
  const double dq = gl.integrate(
      [&](double z) {
        const double d = y - m * z;
        return bump_density(z, halfwidth) * norm * std::exp(-0.5 * d * d / var) * (-d / var);
      },
      lo, hi, 16);
  if (!(q > 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0};
  return {std::log(q), dq / q};
}

struct MixtureTerm {
  double log_weighted;  // log pi_j + log q_j(y)
  double dlog;          // q_j'(y) / q_j(y)
};

std::vector<MixtureTerm> bimodal_terms(const GeneratorSpec& spec, double c, double y, double m,
                                       double var_noise) {
  const double w = bimodal_weight(c);
  const double rho = spec.floor_weight;
  const double s2 = spec.noise_scale * spec.noise_scale;
  const double v = m * m * s2 + var_noise;
  std::vector<MixtureTerm> terms;
  const double mus[2] = {-spec.mode_offset, spec.mode_offset};
  const double pis[2] = {(1.0 - rho) * w, (1.0 - rho) * (1.0 - w)};
  for (int j = 0; j < 2; ++j) {
    if (pis[j] <= 0.0) continue;
    terms.push_back({std::log(pis[j]) + log_normal_pdf(y, m * mus[j], v), (m * mus[j] - y) / v});
  }
  if (rho > 0.0) {
    if (var_noise > 0.0) {
      const auto [lq, dl] = noised_bump(y, m, var_noise, spec.bump_halfwidth);
      terms.push_back({std::log(rho) + lq, dl});
    } else {
      const double b = bump_density(y, spec.bump_halfwidth);
      terms.push_back({b > 0.0 ? std::log(rho * b) : -std::numeric_limits<double>::infinity(), 0.0});
    }
  }
  return terms;
}

std::pair<double, double> mixture_log_and_score(const std::vector<MixtureTerm>& terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) mx = std::max(mx, t.log_weighted);
  double z = 0.0, g = 0.0;
  for (const auto& t : terms) {
    if (!std::isfinite(t.log_weighted)) continue;
    const double e = std::exp(t.log_weighted - mx);
    z += e;
    g += e * t.dlog;
  }
  return {mx + std::log(z), g / z};
}

Variant parse_variant(const std::string& s) {
  if (s == "cond_gaussian") return Variant::cond_gaussian;
  if (s == "bimodal1d") return Variant::bimodal1d;
  if (s == "circle_section") return Variant::circle_section;
  if (s == "plane_section") return Variant::plane_section;
  std::string msg = "unknown generator '" + s + "'; variants:";
  for (const auto& n : generator_names()) msg += " " + n;
  throw SpecError(msg);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::cond_gaussian: return "cond_gaussian";
    case Variant::bimodal1d: return "bimodal1d";
    case Variant::circle_section: return "circle_section";
    case Variant::plane_section: return "plane_section";
  }
  return "?";
}

}  // namespace

double LinkFn::operator()(double c) const { return offset + slope * c + amp * std::sin(kPi * freq * c); }

double LinkFn::sup_abs() const { return std::abs(offset) + std::abs(slope) + std::abs(amp); }

const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names = {"cond_gaussian", "bimodal1d", "circle_section",
                                                 "plane_section", "curve_X"};
  return names;
}

std::string GeneratorSpec::name() const { return variant_name(variant); }

nlohmann::json GeneratorSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name();
  j["covariate"] = covariate == CovariateLaw::curve ? "curve" : "cube";
  j["dim_x"] = dim_x;
  j["dim_y"] = dim_y;
  j["intrinsic_x"] = intrinsic_x;
  j["intrinsic_y"] = intrinsic_y;
  j["alpha_x"] = alpha_x;
  j["alpha_y"] = alpha_y;
  j["beta_x"] = beta_x;
  j["beta_y"] = beta_y;
  j["density_floor"] = density_floor;
  j["radius"] = radius;
  j["covariate_radius"] = covariate_radius;
  j["embed_seed"] = embed_seed;
  if (variant == Variant::cond_gaussian || variant == Variant::bimodal1d) j["s"] = noise_scale;
  if (variant == Variant::cond_gaussian) {
    auto links = nlohmann::json::array();
    for (const auto& l : mean_links)
      links.push_back({{"offset", l.offset}, {"slope", l.slope}, {"amp", l.amp}, {"freq", l.freq}});
    j["links"] = links;
  }
  if (variant == Variant::bimodal1d) {
    j["mode_offset"] = mode_offset;
    j["floor_weight"] = floor_weight;
    j["bump_halfwidth"] = bump_halfwidth;
  }
  return j;
}

GeneratorSpec make_generator(const std::string& name, const nlohmann::json& params) {
  const nlohmann::json p = params.is_object() ? params : nlohmann::json::object();
  auto get = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    return p.contains(key) ? p.at(key).get<T>() : fallback;
  };

  GeneratorSpec g;
  std::string variant = name;
  std::string covariate = get("covariate", std::string("cube"));
  if (name == "curve_X" || name == "curve_x") {
    variant = get("y_variant", std::string("bimodal1d"));
    covariate = "curve";
  }
  g.variant = parse_variant(variant);
  if (covariate != "cube" && covariate != "curve") throw SpecError("covariate law must be cube or curve");
  g.covariate = covariate == "curve" ? CovariateLaw::curve : CovariateLaw::cube;

  g.embed_seed = get("embed_seed", std::uint64_t{7});
  g.alpha_x = get("alpha_x", 1.0);
  g.alpha_y = get("alpha_y", 1.0);
  g.beta_x = get("beta_x", 2.0);
  g.beta_y = get("beta_y", 2.0);
  g.dim_x = get("dim_x", g.covariate == CovariateLaw::curve ? 2 : 1);
  if (!(g.alpha_x > 0.0) || !(g.alpha_y > 0.0)) throw SpecError("smoothness must be positive");

  if (g.covariate == CovariateLaw::curve) {
    if (g.dim_x < 2) throw SpecError("curve covariates need dim_x >= 2");
    g.intrinsic_x = 1;
    g.x_frame = orthonormal_frame(g.dim_x, 2, g.embed_seed, 0xC0FFEE);
    g.covariate_radius = std::sqrt(1.0 + 0.16);
  } else {
    if (g.dim_x < 1) throw SpecError("dim_x must be >= 1");
    g.intrinsic_x = g.dim_x;
    g.covariate_radius = 1.0;
  }

  switch (g.variant) {
    case Variant::cond_gaussian: {
      g.dim_y = get("dim_y", 1);
      if (g.dim_y < 1) throw SpecError("dim_y must be >= 1");
      g.intrinsic_y = g.dim_y;
      g.noise_scale = get("s", 0.25);
      if (p.contains("links")) {
        for (const auto& l : p.at("links")) {
          g.mean_links.push_back({l.value("offset", 0.0), l.value("slope", 0.0), l.value("amp", 0.0),
                                  l.value("freq", 1.0)});
        }
        if (static_cast<int>(g.mean_links.size()) != g.dim_y)
          throw SpecError("cond_gaussian needs one link per output coordinate");
      } else {
        g.mean_links.assign(static_cast<std::size_t>(g.dim_y), LinkFn{0.0, 0.5, 0.0, 1.0});
      }
      double sup = 0.0;
      for (const auto& l : g.mean_links) sup = std::max(sup, l.sup_abs());
      g.radius = sup + kGaussTail * g.noise_scale;
      g.density_floor = 0.0;
      break;
    }
    case Variant::bimodal1d: {
      g.dim_y = get("dim_y", 1);
      if (g.dim_y != 1) throw SpecError("bimodal1d is one-dimensional");
      g.intrinsic_y = 1;
      g.noise_scale = get("s", 0.35);
      g.mode_offset = get("mode_offset", 0.5);
      g.floor_weight = get("floor_weight", 0.1);
      g.bump_halfwidth = get("bump_halfwidth", 1.5);
      if (g.floor_weight < 0.0 || g.floor_weight >= 1.0) throw SpecError("floor_weight must be in [0, 1)");
      if (!(g.bump_halfwidth >= 1.0)) throw SpecError("bump_halfwidth must be >= 1");
      g.radius = std::max(g.mode_offset + kGaussTail * g.noise_scale, g.bump_halfwidth);
      // floor weight times the bump density at |y| = 1
      g.density_floor = 0.8 * g.floor_weight * bump_density(1.0, g.bump_halfwidth);
      break;
    }
    case Variant::circle_section: {
      g.dim_y = get("dim_y", 2);
      g.intrinsic_y = 1;
      g.y_frame = orthonormal_frame(g.dim_y, 2, g.embed_seed, 0xC12C1E);
      g.radius = 1.2;
      // (1 - 0.8) / (2 pi r_max) w.r.t. arc length
      g.density_floor = 0.2 / (2.0 * kPi * 0.8);
      break;
    }
    case Variant::plane_section: {
      g.dim_y = get("dim_y", 3);
      g.intrinsic_y = get("intrinsic_y", 1);
      if (g.intrinsic_y < 1 || g.intrinsic_y > g.dim_y) throw SpecError("plane_section needs 1 <= d_Y <= D_Y");
      g.y_frame = orthonormal_frame(g.dim_y, g.intrinsic_y, g.embed_seed, 0x9A1E);
      g.radius = std::sqrt(static_cast<double>(g.intrinsic_y)) + 0.3;
      g.density_floor = std::pow(0.25, g.intrinsic_y);
      break;
    }
  }
  if (!(g.noise_scale > 0.0)) throw SpecError("noise scale s must be positive");
  return g;
}

GeneratorSpec generator_from_json(const nlohmann::json& j) {
  if (!j.contains("name")) throw SpecError("generator json lacks 'name'");
  return make_generator(j.at("name").get<std::string>(), j);
}

Vec sample_covariate(const GeneratorSpec& spec, Rng& rng) {
  if (spec.covariate == CovariateLaw::cube) {
    Vec x(spec.dim_x);
    for (int j = 0; j < spec.dim_x; ++j) x[j] = 2.0 * uniform01(rng) - 1.0;
    return x;
  }
  const double u = uniform01(rng);
  const Eigen::Vector2d latent(2.0 * u - 1.0, 0.4 * std::sin(2.0 * kPi * u));
  return spec.x_frame * latent;
}

Mat sample_covariates_stratified(const GeneratorSpec& spec, int m, Rng& rng) {
  if (m < 1) throw UsageError("need at least one covariate");
  Mat xs(m, spec.dim_x);
  for (int i = 0; i < m; ++i) {
    const double u = (i + uniform01(rng)) / m;
    if (spec.covariate == CovariateLaw::cube) {
      xs(i, 0) = 2.0 * u - 1.0;
      for (int j = 1; j < spec.dim_x; ++j) xs(i, j) = 2.0 * uniform01(rng) - 1.0;
    } else {
      const Eigen::Vector2d latent(2.0 * u - 1.0, 0.4 * std::sin(2.0 * kPi * u));
      xs.row(i) = (spec.x_frame * latent).transpose();
    }
  }
  return xs;
}

Vec effective_covariate(const GeneratorSpec& spec, const Vec& x) {
  if (x.size() != spec.dim_x)
    throw DomainError("covariate has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(spec.dim_x));
  if (spec.covariate == CovariateLaw::cube) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1.0 + kMembershipTol)
      throw DomainError("covariate outside [-1, 1]^D_X");
    return x.cwiseMax(-1.0).cwiseMin(1.0);
  }
  const Eigen::Vector2d z = spec.x_frame.transpose() * x;
  const double u = 0.5 * (z[0] + 1.0);
  if (!(u >= -kMembershipTol && u <= 1.0 + kMembershipTol)) throw DomainError("covariate off the curve");
  const double uc = std::clamp(u, 0.0, 1.0);
  const Eigen::Vector2d latent(2.0 * uc - 1.0, 0.4 * std::sin(2.0 * kPi * uc));
  if ((spec.x_frame * latent - x).norm() > kMembershipTol * (1.0 + x.norm()))
    throw DomainError("covariate off the curve");
  Vec c(1);
  c[0] = 2.0 * uc - 1.0;
  return c;
}

Mat sample_conditional(const GeneratorSpec& spec, const Vec& x, int k, Rng& rng) {
  if (k < 0) throw UsageError("sample count must be nonnegative");
  const Vec c = effective_covariate(spec, x);
  const double c0 = c[0];
  Mat out(k, spec.dim_y);
  switch (spec.variant) {
    case Variant::cond_gaussian: {
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < spec.dim_y; ++j)
          out(i, j) = spec.mean_links[j](c[j % c.size()]) + spec.noise_scale * truncated_normal(rng);
      break;
    }
    case Variant::bimodal1d: {
      const double w = bimodal_weight(c0);
      for (int i = 0; i < k; ++i) {
        const double u = uniform01(rng);
        if (u < spec.floor_weight) {
          out(i, 0) = bump_draw(spec.bump_halfwidth, rng);
        } else {
          const bool left = uniform01(rng) < w;
          out(i, 0) = (left ? -spec.mode_offset : spec.mode_offset) + spec.noise_scale * truncated_normal(rng);
        }
      }
      break;
    }
    case Variant::circle_section: {
      const Eigen::Vector2d center = circle_center(c0);
      const double r = circle_radius(c0);
      const double a = circle_skew(c0);
      for (int i = 0; i < k; ++i) {
        double theta;
        for (;;) {
          theta = 2.0 * kPi * uniform01(rng);
          if (uniform01(rng) * (1.0 + std::abs(a)) <= 1.0 + a * std::cos(theta)) break;
        }
        const Eigen::Vector2d p = center + r * Eigen::Vector2d(std::cos(theta), std::sin(theta));
        out.row(i) = (spec.y_frame * p).transpose();
      }
      break;
    }
    case Variant::plane_section: {
      const Vec b = plane_offset(spec, c0);
      Vec z(spec.intrinsic_y);
      for (int i = 0; i < k; ++i) {
        for (int d = 0; d < spec.intrinsic_y; ++d) z[d] = plane_latent(rng);
        out.row(i) = (spec.y_frame * z + b).transpose();
      }
      break;
    }
  }
  return out;
}

Dataset sample_joint(const GeneratorSpec& spec, std::size_t n, Rng& rng) {
  if (n < 1) throw UsageError("dataset size must be >= 1");
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), spec.dim_x);
  d.y.resize(static_cast<Eigen::Index>(n), spec.dim_y);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = sample_covariate(spec, rng);
    d.x.row(static_cast<Eigen::Index>(i)) = x.transpose();
    d.y.row(static_cast<Eigen::Index>(i)) = sample_conditional(spec, x, 1, rng).row(0);
  }
  return d;
}

bool supports_analytic_score(const GeneratorSpec& spec) {
  return spec.variant == Variant::cond_gaussian || spec.variant == Variant::bimodal1d;
}

std::optional<Vec> analytic_score(const GeneratorSpec& spec, const OUSchedule& schedule, const Vec& x,
                                  const Vec& y, double t) {
  if (!supports_analytic_score(spec)) return std::nullopt;
  if (!(t > 0.0)) throw DomainError("analytic score needs t > 0");
  if (y.size() != spec.dim_y) throw UsageError("response dimension mismatch");
  const Vec c = effective_covariate(spec, x);
  const double m = schedule.mean_coeff(t);
  const double var = schedule.noise_var(t);
  if (spec.variant == Variant::cond_gaussian) {
    Vec f(spec.dim_y);
    for (int j = 0; j < spec.dim_y; ++j) f[j] = spec.mean_links[j](c[j % c.size()]);
    return gaussian_marginal_score(schedule, f, spec.noise_scale, y, t);
  }
  Vec out(1);
  out[0] = mixture_log_and_score(bimodal_terms(spec, c[0], y[0], m, var)).second;
  return out;
}

std::optional<double> log_density(const GeneratorSpec& spec, const OUSchedule& schedule, const Vec& x,
                                  const Vec& y, double t) {
  if (!supports_analytic_score(spec)) return std::nullopt;
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative");
  const Vec c = effective_covariate(spec, x);
  const double m = schedule.mean_coeff(t);
  const double var = t > 0.0 ? schedule.noise_var(t) : 0.0;
  if (spec.variant == Variant::cond_gaussian) {
    const double v = m * m * spec.noise_scale * spec.noise_scale + var;
    double acc = 0.0;
    for (int j = 0; j < spec.dim_y; ++j) acc += log_normal_pdf(y[j], m * spec.mean_links[j](c[j % c.size()]), v);
    return acc;
  }
  return mixture_log_and_score(bimodal_terms(spec, c[0], y[0], m, var)).first;
}

Vec conditional_mean(const GeneratorSpec& spec, const Vec& x) {
  const Vec c = effective_covariate(spec, x);
  switch (spec.variant) {
    case Variant::cond_gaussian: {
      Vec f(spec.dim_y);
      for (int j = 0; j < spec.dim_y; ++j) f[j] = spec.mean_links[j](c[j % c.size()]);
      return f;
    }
    case Variant::bimodal1d: {
      const double w = bimodal_weight(c[0]);
      Vec f(1);
      f[0] = (1.0 - spec.floor_weight) * spec.mode_offset * (1.0 - 2.0 * w);
      return f;
    }
    case Variant::circle_section: {
      // E[cos th] = a/2, E[sin th] = 0 under density (1 + a cos th) / (2 pi)
      const Eigen::Vector2d p =
          circle_center(c[0]) + circle_radius(c[0]) * Eigen::Vector2d(0.5 * circle_skew(c[0]), 0.0);
      return spec.y_frame * p;
    }
    case Variant::plane_section:
      return plane_offset(spec, c[0]);
  }
  return Vec();
}

std::optional<double> distance_to_section(const GeneratorSpec& spec, const Vec& x, const Vec& y) {
  const Vec c = effective_covariate(spec, x);
  if (spec.variant == Variant::circle_section) {
    const Eigen::Vector2d z = spec.y_frame.transpose() * y;
    const double perp = (y - spec.y_frame * z).norm();
    const double in_plane = std::abs((z - circle_center(c[0])).norm() - circle_radius(c[0]));
    return std::hypot(perp, in_plane);
  }
  if (spec.variant == Variant::plane_section) {
    const Vec w = y - plane_offset(spec, c[0]);
    const Vec z = spec.y_frame.transpose() * w;
    const double perp = (w - spec.y_frame * z).norm();
    const double outside = (z.cwiseAbs().array() - 1.0).cwiseMax(0.0).matrix().norm();
    return std::hypot(perp, outside);
  }
  return std::nullopt;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  if (data.x.rows() != data.y.rows()) throw UsageError("dataset row counts differ");
  io::Writer w;
  w.magic("CDRG");
  w.u16(kDatasetVersion);
  w.u64(static_cast<std::uint64_t>(data.x.rows()));
  w.u32(static_cast<std::uint32_t>(data.x.cols()));
  w.u32(static_cast<std::uint32_t>(data.y.cols()));
  for (Eigen::Index i = 0; i < data.x.size(); ++i) w.f64(data.x.data()[i]);
  for (Eigen::Index i = 0; i < data.y.size(); ++i) w.f64(data.y.data()[i]);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes);
  r.expect_magic("CDRG");
  const auto version = r.u16();
  if (version != kDatasetVersion) throw FormatError("unsupported CDRG version " + std::to_string(version));
  const std::uint64_t n = r.u64();
  const std::uint32_t dx = r.u32();
  const std::uint32_t dy = r.u32();
  const long double expected = static_cast<long double>(n) * (dx + dy) * 8.0L;
  if (expected != static_cast<long double>(r.remaining()))
    throw FormatError("dataset length mismatch: header declares " + std::to_string(n) + " rows");
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), dx);
  d.y.resize(static_cast<Eigen::Index>(n), dy);
  for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x.data()[i] = r.f64();
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y.data()[i] = r.f64();
  return d;
}

void save_dataset(const Dataset& data, const std::string& path) {
  io::write_file_atomic(path, encode_dataset(data));
}

Dataset load_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) os << (j ? "," : "") << "x" << j;
  for (Eigen::Index j = 0; j < data.y.cols(); ++j) os << (data.x.cols() + j ? "," : "") << "y" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) os << (j ? "," : "") << data.x(i, j);
    for (Eigen::Index j = 0; j < data.y.cols(); ++j) os << (data.x.cols() + j ? "," : "") << data.y(i, j);
    os << "\n";
  }
  return os.str();
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty CSV");
  int dx = 0, dy = 0;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (!cell.empty() && cell[0] == 'x') {
        if (dy > 0) throw FormatError("CSV header: x columns must precede y columns");
        ++dx;
      } else if (!cell.empty() && cell[0] == 'y') {
        ++dy;
      } else {
        throw FormatError("CSV header cell '" + cell + "' is neither x* nor y*");
      }
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("CSV row " + std::to_string(rows + 1) + ": bad number '" + cell + "'");
      }
      ++cols;
    }
    if (cols != dx + dy) throw FormatError("CSV row " + std::to_string(rows + 1) + " has wrong column count");
    ++rows;
  }
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows), dx);
  d.y.resize(static_cast<Eigen::Index>(rows), dy);
  for (std::size_t i = 0; i < rows; ++i) {
    for (int j = 0; j < dx; ++j) d.x(static_cast<Eigen::Index>(i), j) = values[i * (dx + dy) + j];
    for (int j = 0; j < dy; ++j) d.y(static_cast<Eigen::Index>(i), j) = values[i * (dx + dy) + dx + j];
  }
  return d;
}

}  // namespace cdiff
