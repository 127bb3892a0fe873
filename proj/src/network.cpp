#include "cdiff/network.hpp"

#include "cdiff/binary_io.hpp"
#include "cdiff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cdiff {

namespace {

constexpr std::uint16_t kNetVersion = 1;

void check_shapes(const Mlp& net, const ParamSet& p) {
  if (p.size() != net.layers().size()) throw UsageError("parameter set has wrong layer count");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].weight.rows() != net.layers()[i].weight.rows() ||
        p[i].weight.cols() != net.layers()[i].weight.cols() ||
        p[i].bias.size() != net.layers()[i].bias.size())
      throw UsageError("parameter set shape mismatch at layer " + std::to_string(i));
  }
}

}  // namespace

std::int64_t NetSpec::param_count() const {
  std::int64_t total = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    total += static_cast<std::int64_t>(widths[i]) * widths[i + 1] + widths[i + 1];
  return total;
}

void NetSpec::validate() const {
  if (height < 1) throw SpecError("network height must be >= 1");
  if (widths.size() != static_cast<std::size_t>(height) + 1)
    throw SpecError("width vector must have height + 1 entries");
  for (int w : widths)
    if (w < 1) throw SpecError("all widths must be >= 1");
  if (sparsity && *sparsity < 1) throw SpecError("sparsity budget must be positive");
  if (!(weight_bound > 0.0)) throw SpecError("weight bound must be positive");
  if (!(output_bound > 0.0)) throw SpecError("output bound must be positive");
}

Mlp Mlp::zeros(const NetSpec& spec) {
  spec.validate();
  Mlp net;
  net.spec_ = spec;
  for (int i = 0; i < spec.height; ++i) {
    net.layers_.push_back({Mat::Zero(spec.widths[i], spec.widths[i + 1]),
                           RowVec::Zero(spec.widths[i + 1])});
  }
  return net;
}

Mlp Mlp::init(const NetSpec& spec, Rng& rng) {
  Mlp net = zeros(spec);
  for (auto& layer : net.layers_) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.weight.rows())));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
  }
  return net;
}

std::int64_t Mlp::nonzero_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers_) {
    n += (l.weight.array() != 0.0).count();
    n += (l.bias.array() != 0.0).count();
  }
  return n;
}

Mat Mlp::forward_batch(const Mat& inputs) const {
  if (inputs.cols() != spec_.input_dim())
    throw UsageError("input dimension " + std::to_string(inputs.cols()) + " != " +
                     std::to_string(spec_.input_dim()));
  Mat h = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i > 0) h = h.cwiseMax(0.0);
    Mat z = h * layers_[i].weight;
    z.rowwise() += layers_[i].bias;
    h = std::move(z);
  }
  if (std::isfinite(spec_.output_bound))
    h = h.cwiseMax(-spec_.output_bound).cwiseMin(spec_.output_bound);
  return h;
}

Vec Mlp::forward(const Vec& input) const {
  Mat in = input.transpose();
  return forward_batch(in).row(0).transpose();
}

std::vector<double> Mlp::flat_params() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(param_count()));
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void Mlp::set_flat_params(std::span<const double> values) {
  if (static_cast<std::int64_t>(values.size()) != param_count())
    throw UsageError("flat parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& l : layers_) {
    std::copy_n(values.begin() + k, l.weight.size(), l.weight.data());
    k += static_cast<std::size_t>(l.weight.size());
    std::copy_n(values.begin() + k, l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

ParamSet zeros_like(const Mlp& net) {
  ParamSet p;
  for (const auto& l : net.layers())
    p.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), RowVec::Zero(l.bias.size())});
  return p;
}

double grad(const Mlp& net, const Mat& inputs, const LossFn& loss, ParamSet& gradients) {
  const auto& layers = net.layers();
  if (inputs.cols() != net.spec().input_dim()) throw UsageError("input dimension mismatch");
  if (gradients.size() != layers.size()) gradients = zeros_like(net);

  // acts[i] is the input fed to layer i (post-ReLU for i > 0); pre[i] its affine output.
  std::vector<Mat> acts(layers.size());
  std::vector<Mat> pre(layers.size());
  acts[0] = inputs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    pre[i] = acts[i] * layers[i].weight;
    pre[i].rowwise() += layers[i].bias;
    if (i + 1 < layers.size()) acts[i + 1] = pre[i].cwiseMax(0.0);
  }
  // The clamp is the identity while training; only inference applies [-V, V].
  const Mat& out = pre.back();
  Mat delta = Mat::Zero(out.rows(), out.cols());
  const double value = loss(out, delta);

  for (std::size_t i = layers.size(); i-- > 0;) {
    gradients[i].weight.noalias() = acts[i].transpose() * delta;
    gradients[i].bias = delta.colwise().sum();
    if (i > 0) {
      Mat back = delta * layers[i].weight.transpose();
      delta = (pre[i - 1].array() > 0.0).select(back, 0.0);
    }
  }
  return value;
}

AdamState::AdamState(const Mlp& net, AdamConfig config)
    : config_(config), first_(zeros_like(net)), second_(zeros_like(net)) {}

void AdamState::step(Mlp& net, const ParamSet& gradients) {
  check_shapes(net, gradients);
  if (first_.size() != gradients.size()) {
    first_ = zeros_like(net);
    second_ = zeros_like(net);
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;

  auto update = [&](auto& param, auto& m, auto& s, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    s = b2 * s + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((s.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    auto& layer = net.layers()[i];
    update(layer.weight, first_[i].weight, second_[i].weight, gradients[i].weight);
    update(layer.bias, first_[i].bias, second_[i].bias, gradients[i].bias);
  }
  if (std::isfinite(net.spec().weight_bound)) enforce_bounds(net, net.spec().weight_bound);
}

void enforce_bounds(Mlp& net, double bound) {
  if (!std::isfinite(bound)) return;
  if (!(bound > 0.0)) throw SpecError("weight bound must be positive");
  for (auto& l : net.layers()) {
    l.weight = l.weight.cwiseMax(-bound).cwiseMin(bound);
    l.bias = l.bias.cwiseMax(-bound).cwiseMin(bound);
  }
}

void prune_to_sparsity(Mlp& net, std::int64_t budget) {
  if (budget < net.spec().output_dim())
    throw SpecError("sparsity budget " + std::to_string(budget) +
                    " is smaller than the number of output biases");
  std::vector<double> flat = net.flat_params();
  const auto n = static_cast<std::int64_t>(flat.size());
  if (budget >= n) return;
  // Rank by (|value| desc, index asc) so ties break deterministically.
  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), 0);
  auto keep_first = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(flat[a]);
    const double fb = std::abs(flat[b]);
    return fa != fb ? fa > fb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + budget, order.end(), keep_first);
  for (auto it = order.begin() + budget; it != order.end(); ++it) flat[*it] = 0.0;
  net.set_flat_params(flat);
}

void write_net(io::Writer& w, const Mlp& net) {
  const NetSpec& s = net.spec();
  w.magic("CDNN");
  w.u16(kNetVersion);
  w.u32(static_cast<std::uint32_t>(s.height));
  for (int width : s.widths) w.u32(static_cast<std::uint32_t>(width));
  w.i64(s.sparsity ? *s.sparsity : -1);
  w.f64(s.weight_bound);
  w.f64(s.output_bound);
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) w.f64(l.bias[c]);
  }
}

Mlp read_net(io::Reader& r) {
  r.expect_magic("CDNN");
  const std::uint16_t version = r.u16();
  if (version != kNetVersion) throw FormatError("unsupported CDNN version " + std::to_string(version));
  NetSpec s;
  const std::uint32_t height = r.u32();
  if (height == 0 || height > 1024) throw FormatError("implausible network height");
  s.height = static_cast<int>(height);
  for (std::uint32_t i = 0; i <= height; ++i) {
    const std::uint32_t w = r.u32();
    if (w == 0 || w > (1u << 20)) throw FormatError("implausible layer width");
    s.widths.push_back(static_cast<int>(w));
  }
  const std::int64_t sparsity = r.i64();
  if (sparsity >= 0) s.sparsity = sparsity;
  s.weight_bound = r.f64();
  s.output_bound = r.f64();
  try {
    s.validate();
  } catch (const SpecError& e) {
    throw FormatError(std::string("invalid network spec in stream: ") + e.what());
  }
  if (r.remaining() < static_cast<std::size_t>(s.param_count()) * 8) throw FormatError("truncated stream");
  Mlp net = Mlp::zeros(s);
  for (auto& l : net.layers()) {
    for (Eigen::Index row = 0; row < l.weight.rows(); ++row)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(row, c) = r.f64();
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias[c] = r.f64();
  }
  return net;
}

std::vector<std::uint8_t> serialize(const Mlp& net) {
  io::Writer w;
  write_net(w, net);
  return w.take();
}

Mlp deserialize(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes);
  Mlp net = read_net(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes after network");
  return net;
}

}  // namespace cdiff
