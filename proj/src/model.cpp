#include "mmhash/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "mmhash/error.hpp"
#include "mmhash/format.hpp"

namespace mmhash {

bool Layer::hard_sign() const noexcept { return std::isinf(beta); }

EmbeddingNet::EmbeddingNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty())
    throw Error(ErrorCode::InvalidArgument, "EmbeddingNet: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weights.rows() != layer.bias.size())
      throw Error(ErrorCode::DimensionMismatch,
                  "EmbeddingNet: layer " + std::to_string(l) + " bias length " +
                      std::to_string(layer.bias.size()) + " != rows " +
                      std::to_string(layer.weights.rows()));
    if (!(layer.beta > 0.0))
      throw Error(ErrorCode::InvalidArgument,
                  "EmbeddingNet: layer " + std::to_string(l) + " beta must be > 0");
    if (layer.out_dim() == 0 || layer.in_dim() == 0)
      throw Error(ErrorCode::InvalidArgument, "EmbeddingNet: empty layer");
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim())
      throw Error(ErrorCode::DimensionMismatch,
                  "EmbeddingNet: layer " + std::to_string(l) + " input width " +
                      std::to_string(layer.in_dim()) + " != previous output " +
                      std::to_string(layers_[l - 1].out_dim()));
  }
}

std::size_t EmbeddingNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t EmbeddingNet::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t EmbeddingNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

CoupledModel::CoupledModel(EmbeddingNet x, EmbeddingNet y)
    : net_x(std::move(x)), net_y(std::move(y)) {
  if (net_x.output_dim() != net_y.output_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "CoupledModel: output widths differ (" +
                    std::to_string(net_x.output_dim()) + " vs " +
                    std::to_string(net_y.output_dim()) + ")");
}

ParameterGradient ParameterGradient::zeros_like(const EmbeddingNet& net) {
  ParameterGradient g;
  g.layers.reserve(net.num_layers());
  for (const auto& l : net.layers())
    g.layers.push_back({Matrix(l.out_dim(), l.in_dim()), Vector(l.out_dim())});
  return g;
}

void ParameterGradient::add(const ParameterGradient& other) {
  if (other.layers.size() != layers.size())
    throw Error(ErrorCode::DimensionMismatch, "ParameterGradient::add: layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    axpy(1.0, other.layers[l].weights.span(), layers[l].weights.span());
    axpy(1.0, other.layers[l].bias.span(), layers[l].bias.span());
  }
}

void ParameterGradient::scale(double factor) {
  for (auto& l : layers) {
    for (auto& w : l.weights.span()) w *= factor;
    for (auto& b : l.bias) b *= factor;
  }
}

std::vector<double> ParameterGradient::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.span().begin(), l.weights.span().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

namespace {

void check_input(const EmbeddingNet& net, std::size_t len) {
  if (net.num_layers() == 0)
    throw Error(ErrorCode::InvalidArgument, "forward: empty network");
  if (len != net.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "forward: input length " + std::to_string(len) + " != " +
                    std::to_string(net.input_dim()));
}

void apply_layer(const Layer& layer, std::span<const double> in, std::span<double> out) {
  const std::size_t rows = layer.out_dim();
  const bool hard = layer.hard_sign();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto w = layer.weights.row(r);
    double z = layer.bias[r];
    for (std::size_t c = 0; c < w.size(); ++c) z += w[c] * in[c];
    out[r] = hard ? (z >= 0.0 ? 1.0 : -1.0) : std::tanh(layer.beta * z);
  }
}

}  // namespace

void forward_into(const EmbeddingNet& net, std::span<const double> x,
                  std::span<const std::span<double>> layer_outputs) {
  check_input(net, x.size());
  const auto& layers = net.layers();
  std::span<const double> in = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layer_outputs[l].size() != layers[l].out_dim())
      throw Error(ErrorCode::DimensionMismatch, "forward_into: output storage width");
    apply_layer(layers[l], in, layer_outputs[l]);
    in = layer_outputs[l];
  }
}

void forward(const EmbeddingNet& net, std::span<const double> x, ForwardTrace& trace) {
  const auto& layers = net.layers();
  trace.outputs.resize(layers.size());
  std::vector<std::span<double>> outs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (trace.outputs[l].size() != layers[l].out_dim())
      trace.outputs[l] = Vector(layers[l].out_dim());
    outs.push_back(trace.outputs[l].span());
  }
  forward_into(net, x, outs);
}

Vector forward(const EmbeddingNet& net, std::span<const double> x) {
  ForwardTrace trace;
  forward(net, x, trace);
  return std::move(trace.outputs.back());
}

void accumulate_backward(const EmbeddingNet& net, std::span<const double> x,
                         const ForwardTrace& trace, std::span<const double> upstream,
                         ParameterGradient& grad) {
  std::vector<std::span<const double>> outputs;
  outputs.reserve(trace.outputs.size());
  for (const auto& v : trace.outputs) outputs.push_back(v.span());
  accumulate_backward(net, x, outputs, upstream, grad);
}

void accumulate_backward(const EmbeddingNet& net, std::span<const double> x,
                         std::span<const std::span<const double>> layer_outputs,
                         std::span<const double> upstream, ParameterGradient& grad) {
  if (upstream.size() != net.output_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "backward: upstream length " + std::to_string(upstream.size()) +
                    " != output width " + std::to_string(net.output_dim()));
  const auto& layers = net.layers();
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> next;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const std::span<const double> y = layer_outputs[l];
    // d tanh(beta z)/dz = beta (1 - y^2); the hard sign has zero derivative.
    for (std::size_t r = 0; r < delta.size(); ++r)
      delta[r] *= layer.hard_sign() ? 0.0 : layer.beta * (1.0 - y[r] * y[r]);
    const std::span<const double> in = l == 0 ? x : layer_outputs[l - 1];
    LayerGradient& g = grad.layers[l];
    add_outer(g.weights, 1.0, delta, in);
    axpy(1.0, delta, g.bias.span());
    if (l > 0) {
      next.assign(layer.in_dim(), 0.0);
      for (std::size_t r = 0; r < delta.size(); ++r) {
        if (delta[r] == 0.0) continue;
        const auto w = layer.weights.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) next[c] += w[c] * delta[r];
      }
      delta.swap(next);
    }
  }
}

ParameterGradient backward(const EmbeddingNet& net, std::span<const double> x,
                           std::span<const double> upstream) {
  ForwardTrace trace;
  forward(net, x, trace);
  ParameterGradient grad = ParameterGradient::zeros_like(net);
  accumulate_backward(net, x, trace, upstream, grad);
  return grad;
}

EmbeddingNet init_random(std::span<const std::size_t> dims, double beta,
                         std::uint64_t seed) {
  if (dims.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "init_random: need at least two widths");
  for (std::size_t d : dims)
    if (d == 0) throw Error(ErrorCode::InvalidArgument, "init_random: zero width");
  if (!(beta > 0.0))
    throw Error(ErrorCode::InvalidArgument, "init_random: beta must be > 0");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(out, in);
    for (auto& v : w.span()) v = dist(rng);
    layers.push_back({std::move(w), Vector(out), beta});
  }
  return EmbeddingNet(std::move(layers));
}

std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t bits,
                                    std::size_t num_layers, std::size_t hidden) {
  if (num_layers == 1) return {input_dim, bits};
  if (num_layers == 2) return {input_dim, hidden, bits};
  throw Error(ErrorCode::InvalidArgument,
              "layer_dims: only 1 or 2 layers are supported, got " +
                  std::to_string(num_layers));
}

void copy_parameters(const EmbeddingNet& net, std::span<double> out) {
  if (out.size() != net.parameter_count())
    throw Error(ErrorCode::DimensionMismatch, "copy_parameters: size mismatch");
  std::size_t k = 0;
  for (const auto& l : net.layers()) {
    for (double w : l.weights.span()) out[k++] = w;
    for (double b : l.bias) out[k++] = b;
  }
}

void set_parameters(EmbeddingNet& net, std::span<const double> values) {
  if (values.size() != net.parameter_count())
    throw Error(ErrorCode::DimensionMismatch, "set_parameters: size mismatch");
  std::size_t k = 0;
  for (auto& l : net.mutable_layers()) {
    for (double& w : l.weights.span()) w = values[k++];
    for (double& b : l.bias) b = values[k++];
  }
}

std::vector<double> flatten(const CoupledModel& model) {
  const std::size_t nx = model.net_x.parameter_count();
  std::vector<double> out(nx + model.net_y.parameter_count());
  copy_parameters(model.net_x, std::span(out).first(nx));
  copy_parameters(model.net_y, std::span(out).subspan(nx));
  return out;
}

void unflatten(CoupledModel& model, std::span<const double> values) {
  const std::size_t nx = model.net_x.parameter_count();
  if (values.size() != nx + model.net_y.parameter_count())
    throw Error(ErrorCode::DimensionMismatch, "unflatten: size mismatch");
  set_parameters(model.net_x, values.first(nx));
  set_parameters(model.net_y, values.subspan(nx));
}

// ---------------------------------------------------------------------------
// MMHM1

namespace {

void write_net(std::ostream& os, const EmbeddingNet& net) {
  for (const auto& layer : net.layers()) {
    os << "LAYER " << layer.out_dim() << ' ' << layer.in_dim() << ' '
       << format_double(layer.beta) << '\n';
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      const auto row = layer.weights.row(r);
      for (std::size_t c = 0; c < row.size(); ++c)
        os << (c ? " " : "") << format_double(row[c]);
      os << '\n';
    }
    for (std::size_t r = 0; r < layer.out_dim(); ++r)
      os << (r ? " " : "") << format_double(layer.bias[r]);
    os << '\n';
  }
}

EmbeddingNet read_net(TokenReader& in, std::size_t num_layers) {
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < num_layers; ++l) {
    in.expect("LAYER");
    const std::size_t out = in.next_count();
    const std::size_t inw = in.next_count();
    const double beta = in.next_double(/*allow_inf=*/true);
    std::vector<double> w(out * inw);
    for (auto& v : w) v = in.next_double();
    std::vector<double> b(out);
    for (auto& v : b) v = in.next_double();
    layers.push_back({Matrix(out, inw, std::move(w)), Vector(std::move(b)), beta});
  }
  return EmbeddingNet(std::move(layers));
}

}  // namespace

void write_model(std::ostream& os, const CoupledModel& model) {
  os << "MMHM1 " << model.net_x.num_layers() << ' ' << model.net_y.num_layers() << ' '
     << model.bits() << '\n';
  write_net(os, model.net_x);
  write_net(os, model.net_y);
}

CoupledModel read_model(std::istream& is) {
  TokenReader in(is, "MMHM1");
  in.expect("MMHM1");
  const std::size_t lx = in.next_count();
  const std::size_t ly = in.next_count();
  const std::size_t m = in.next_count();
  if (lx == 0 || ly == 0) in.fail("model needs at least one layer per net");
  EmbeddingNet net_x = read_net(in, lx);  // sequenced: the stream order matters
  EmbeddingNet net_y = read_net(in, ly);
  CoupledModel model(std::move(net_x), std::move(net_y));
  if (model.bits() != m)
    in.fail("header declares m=" + std::to_string(m) + " but nets output " +
            std::to_string(model.bits()));
  return model;
}

void save_model(const std::string& path, const CoupledModel& model) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_model(os, model);
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path);
}

CoupledModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_model(is);
}

}  // namespace mmhash
