#pragma once

// Synthetic joint laws mu*_{X,Y} with exact conditional sampling.
//
// Variants (Y given the effective covariate c in [-1, 1]^k):
//   cond_gaussian   Y = f(c) + s Z, f coordinatewise offset + slope*c + amp*sin(pi*freq*c)
//   bimodal1d       (1-rho)[w N(-0.5, s^2) + (1-w) N(0.5, s^2)] + rho * bump,
//                   w(c) = (1 + sin(pi c))/2, bump = smooth compact density on [-a, a]
//   circle_section  Y = E (center(c) + r(c)(cos th, sin th)), th ~ 1 + a(c) cos th
//   plane_section   Y = E z + b(c), z ~ prod (1 + 0.5 cos(pi z_k))/2 on [-1, 1]^{d_Y}
// Covariates are uniform on [-1, 1]^{D_X} ("cube") or the pushforward of Unif[0, 1]
// through a smooth closed-form curve in R^{D_X} ("curve"), in which case c = 2u - 1.

#include "cdiff/ou_kernel.hpp"
#include "cdiff/types.hpp"

#include "json.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdiff {

enum class Variant { cond_gaussian, bimodal1d, circle_section, plane_section };
enum class CovariateLaw { cube, curve };

struct LinkFn {
  double offset = 0.0;
  double slope = 0.0;
  double amp = 0.0;
  double freq = 1.0;

  double operator()(double c) const;
  double sup_abs() const;  // bound on |f| over c in [-1, 1]
};

struct GeneratorSpec {
  Variant variant = Variant::cond_gaussian;
  CovariateLaw covariate = CovariateLaw::cube;
  int dim_x = 1;
  int dim_y = 1;
  int intrinsic_x = 1;
  int intrinsic_y = 1;

  // Declared metadata (not verified numerically).
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  double beta_x = 2.0;
  double beta_y = 2.0;
  double density_floor = 0.0;
  double radius = 1.0;            // sup-norm radius of M_Y
  double covariate_radius = 1.0;  // sup-norm radius of M_X

  double noise_scale = 0.25;  // s for cond_gaussian and bimodal1d
  std::vector<LinkFn> mean_links;
  double mode_offset = 0.5;
  double floor_weight = 0.1;
  double bump_halfwidth = 1.5;

  std::uint64_t embed_seed = 7;
  Mat y_frame;  // D_Y x k orthonormal columns (circle: k = 2, plane: k = d_Y)
  Mat x_frame;  // D_X x 2 orthonormal columns (curve covariates)

  std::string name() const;
  int covariate_dim() const { return covariate == CovariateLaw::curve ? 1 : dim_x; }
  nlohmann::json to_json() const;
};

// name: cond_gaussian | bimodal1d | circle_section | plane_section | curve_X.
// curve_X composes curve covariates with params["y_variant"] (default bimodal1d);
// any variant accepts params["covariate"] = "curve". Throws SpecError.
GeneratorSpec make_generator(const std::string& name, const nlohmann::json& params = {});
GeneratorSpec generator_from_json(const nlohmann::json& j);
const std::vector<std::string>& generator_names();

struct Dataset {
  Mat x;  // n x D_X
  Mat y;  // n x D_Y
  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

Dataset sample_joint(const GeneratorSpec& spec, std::size_t n, Rng& rng);
Vec sample_covariate(const GeneratorSpec& spec, Rng& rng);
// m covariates with the latent uniform coordinate stratified into m equal cells.
Mat sample_covariates_stratified(const GeneratorSpec& spec, int m, Rng& rng);
// Exact i.i.d. draws from mu*_{Y|x}; k rows. Throws DomainError if x is off M_X.
Mat sample_conditional(const GeneratorSpec& spec, const Vec& x, int k, Rng& rng);

// Effective covariate c for x in M_X (inverts the curve for curve covariates).
Vec effective_covariate(const GeneratorSpec& spec, const Vec& x);

bool supports_analytic_score(const GeneratorSpec& spec);
// grad_y log p_t(y | x); nullopt for variants without a closed form.
std::optional<Vec> analytic_score(const GeneratorSpec& spec, const OUSchedule& schedule,
                                  const Vec& x, const Vec& y, double t);
// log p_t(y | x); t = 0 gives the conditional density itself. nullopt as above.
std::optional<double> log_density(const GeneratorSpec& spec, const OUSchedule& schedule,
                                  const Vec& x, const Vec& y, double t);

Vec conditional_mean(const GeneratorSpec& spec, const Vec& x);
// Euclidean distance from y to the section manifold M_{Y|x}; nullopt for full-dimensional variants.
std::optional<double> distance_to_section(const GeneratorSpec& spec, const Vec& x, const Vec& y);

// CDRG: magic, u16 version, u64 n, u32 D_X, u32 D_Y, X then Y as little-endian f64 row-major.
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 2 + 8 + 4 + 4;
std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

}  // namespace cdiff
