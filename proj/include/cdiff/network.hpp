#pragma once

// Bounded sparse ReLU multilayer perceptrons
//   f = (A_H ReLU(.) + b_H) o ... o (A_2 ReLU(.) + b_2) o (A_1 x + b_1),
// with elementwise weight bound B, nonzero budget R and output clamp [-V, V].

#include "cdiff/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace cdiff {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct NetSpec {
  int height = 1;           // number of affine layers H
  std::vector<int> widths;  // H + 1 entries: input, hidden..., output
  std::optional<std::int64_t> sparsity;  // R; nullopt = unbounded
  double weight_bound = kUnbounded;      // B
  double output_bound = kUnbounded;      // V

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::int64_t param_count() const;
  // Throws SpecError.
  void validate() const;

  bool operator==(const NetSpec&) const = default;
};

// A is stored as (fan_in x fan_out) so a batch (rows = samples) maps as X * A + b.
struct Layer {
  Mat weight;
  RowVec bias;
};

// Parameter-shaped container used for gradients and optimizer moments.
using ParamSet = std::vector<Layer>;

class Mlp {
 public:
  Mlp() = default;
  // He initialisation: N(0, 2 / fan_in) weights, zero biases.
  static Mlp init(const NetSpec& spec, Rng& rng);
  // Zero-valued network with the given shape.
  static Mlp zeros(const NetSpec& spec);

  const NetSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::int64_t param_count() const { return spec_.param_count(); }
  std::int64_t nonzero_count() const;

  // Clamped to [-V, V] coordinatewise.
  Vec forward(const Vec& input) const;
  Mat forward_batch(const Mat& inputs) const;

  // Layer order, weights row-major then biases.
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> values);

  void set_output_bound(double v) { spec_.output_bound = v; }

 private:
  NetSpec spec_;
  std::vector<Layer> layers_;
};

ParamSet zeros_like(const Mlp& net);

// Loss over a batch of network outputs. Writes dLoss/dOutput into grad_out
// (same shape as outputs) and returns the loss value.
using LossFn = std::function<double(const Mat& outputs, Mat& grad_out)>;

// Reverse-mode gradient of the loss at the unclamped network output: the output clamp
// acts as the identity during training. Returns the loss; gradients are overwritten.
double grad(const Mlp& net, const Mat& inputs, const LossFn& loss, ParamSet& gradients);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::int64_t step_count() const { return steps_; }

  // Bias-corrected Adam update, followed by enforce_bounds when B is finite.
  void step(Mlp& net, const ParamSet& gradients);

 private:
  AdamConfig config_;
  ParamSet first_;
  ParamSet second_;
  std::int64_t steps_ = 0;
};

// Clip every weight and bias to [-bound, bound]. Infinite bound is a no-op.
void enforce_bounds(Mlp& net, double bound);
// Zero the smallest-magnitude parameters until at most `budget` remain nonzero.
// Throws SpecError if budget < output width.
void prune_to_sparsity(Mlp& net, std::int64_t budget);

// CDNN checkpoint: magic "CDNN", u16 version, spec, then little-endian f64 parameters.
std::vector<std::uint8_t> serialize(const Mlp& net);
Mlp deserialize(std::span<const std::uint8_t> bytes);

namespace io {
class Writer;
class Reader;
}  // namespace io
void write_net(io::Writer& w, const Mlp& net);
Mlp read_net(io::Reader& r);

}  // namespace cdiff
