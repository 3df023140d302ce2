#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mmhash/numkernel.hpp"

namespace mmhash {

enum class Modality { X, Y };

// One fully connected layer with activation tanh(beta * (W x + b)).
// beta == +inf selects the hard sign (ties to +1), used by linear baselines.
struct Layer {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim
  double beta = 1.0;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
  bool hard_sign() const noexcept;

  bool operator==(const Layer&) const = default;
};

class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  explicit EmbeddingNet(std::vector<Layer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  // Mutable access for optimizers; shapes must not be changed through it.
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }

  bool operator==(const EmbeddingNet&) const = default;

 private:
  std::vector<Layer> layers_;
};

// Two embedding networks sharing the output (hash) width.
struct CoupledModel {
  EmbeddingNet net_x;
  EmbeddingNet net_y;

  CoupledModel() = default;
  CoupledModel(EmbeddingNet x, EmbeddingNet y);

  std::size_t bits() const { return net_x.output_dim(); }
  const EmbeddingNet& net(Modality m) const { return m == Modality::X ? net_x : net_y; }
  std::size_t parameter_count() const noexcept {
    return net_x.parameter_count() + net_y.parameter_count();
  }

  bool operator==(const CoupledModel&) const = default;
};

// Gradient with the exact shape of an EmbeddingNet's parameters.
struct LayerGradient {
  Matrix weights;
  Vector bias;
};

struct ParameterGradient {
  std::vector<LayerGradient> layers;

  static ParameterGradient zeros_like(const EmbeddingNet& net);
  void add(const ParameterGradient& other);
  void scale(double factor);
  // Flattened in the same order as copy_parameters().
  std::vector<double> flatten() const;
};

// Per-layer outputs of one forward pass; outputs[l] is the activation of
// layer l.
struct ForwardTrace {
  std::vector<Vector> outputs;
};

Vector forward(const EmbeddingNet& net, std::span<const double> x);
// Writes each layer's activation into caller-provided storage.
void forward_into(const EmbeddingNet& net, std::span<const double> x,
                  std::span<const std::span<double>> layer_outputs);
void forward(const EmbeddingNet& net, std::span<const double> x, ForwardTrace& trace);

// grad += d(upstream . net(x)) / d(theta), given the per-layer outputs of
// net(x).
void accumulate_backward(const EmbeddingNet& net, std::span<const double> x,
                         std::span<const std::span<const double>> layer_outputs,
                         std::span<const double> upstream, ParameterGradient& grad);
void accumulate_backward(const EmbeddingNet& net, std::span<const double> x,
                         const ForwardTrace& trace, std::span<const double> upstream,
                         ParameterGradient& grad);

ParameterGradient backward(const EmbeddingNet& net, std::span<const double> x,
                           std::span<const double> upstream);

// dims = (input, hidden..., output). Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)],
// biases zero.
EmbeddingNet init_random(std::span<const std::size_t> dims, double beta,
                         std::uint64_t seed);

// Layer widths for an L-layer net: (in, out) or (in, hidden, out).
std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t bits,
                                    std::size_t num_layers, std::size_t hidden);

// Flat parameter views: layer by layer, weights row-major then bias.
void copy_parameters(const EmbeddingNet& net, std::span<double> out);
void set_parameters(EmbeddingNet& net, std::span<const double> values);
std::vector<double> flatten(const CoupledModel& model);
void unflatten(CoupledModel& model, std::span<const double> values);

// MMHM1 text serialization.
void write_model(std::ostream& os, const CoupledModel& model);
CoupledModel read_model(std::istream& is);
void save_model(const std::string& path, const CoupledModel& model);
CoupledModel load_model(const std::string& path);

}  // namespace mmhash
