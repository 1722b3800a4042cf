#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idlab/tensor.hpp"

namespace idlab {

enum class LayerKind { dense, conv2d, relu, residual_fc_block };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // dense: widths; conv2d: channel counts; residual block: in == out == width.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  bool has_bias = true;
  bool trainable = true;

  static LayerSpec dense(std::size_t in, std::size_t out, bool bias = true);
  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t k, bool bias = true);
  static LayerSpec relu();
  static LayerSpec residual(std::size_t width, bool bias = true);

  bool has_params() const { return kind != LayerKind::relu; }
};

enum class InitScheme {
  default_scheme,
  xavier_normal,
  xavier_uniform,
  kaiming_normal,
  kaiming_uniform,
  orthogonal,
};

std::string_view init_name(InitScheme s);
InitScheme parse_init(std::string_view text);

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  InitScheme init = InitScheme::default_scheme;
  std::uint64_t seed = 0;
  // Data geometry (C x H x W). Dense networks flatten it row-major with
  // channels outermost; conv networks only depend on C.
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;

  bool convolutional() const;
  Tensor::Shape input_shape() const { return {channels, height, width}; }
};

// Throws SpecError describing the first violated invariant.
void validate(const NetworkSpec& spec);

// Plain conv stack: depth conv layers (channels -> width -> ... -> channels)
// with ReLU between them and none at the output.
NetworkSpec conv_stack(std::size_t depth, std::size_t width, std::size_t kernel,
                       std::size_t channels = 1, bool bias = true);
// Dense stack on flattened d-dimensional inputs; relu selects ReLU between
// layers. hidden is ignored for depth 1.
NetworkSpec dense_stack(std::size_t depth, std::size_t d, std::size_t hidden, bool relu,
                        bool bias = true);
// Residual FCN: `blocks` residual blocks of width d.
NetworkSpec residual_stack(std::size_t blocks, std::size_t d, bool bias = true);

// Per layer: [W, b] (dense/conv), [W1, b1, W2, b2] (residual), [] (relu).
// Absent biases are omitted. Dense W is out x in; conv W is Co x Ci x KH x KW.
using ParamList = std::vector<std::vector<Tensor>>;

struct Network {
  NetworkSpec spec;
  ParamList params;
  ParamList initial_params;  // snapshot at construction; never updated
};

Network build_network(const NetworkSpec& spec);

struct ForwardResult {
  Tensor output;
  std::vector<Tensor> intermediates;  // per layer output, when captured
};

// input is a C x H x W image. Conv networks accept any spatial size.
ForwardResult forward(const Network& net, const Tensor& input, bool capture = false);
Tensor predict(const Network& net, const Tensor& input);
// Runs layers [first, last) on an input already shaped for layer `first`.
Tensor forward_range(const Network& net, std::size_t first, std::size_t last, const Tensor& input);

double loss_mse(const Tensor& pred, const Tensor& target);

struct BackwardResult {
  double loss = 0.0;
  Tensor output;
  ParamList grads;  // empty entry for frozen and parameter-free layers
};

BackwardResult backward(const Network& net, const Tensor& input, const Tensor& target);
// Mean loss and gradient over several (input, target) pairs.
BackwardResult backward_batch(const Network& net, const std::vector<Tensor>& inputs,
                              const std::vector<Tensor>& targets);

struct ParamCount {
  std::size_t weights_only = 0;
  std::size_t with_bias = 0;
};
ParamCount count_params(const NetworkSpec& spec);

// Indices into spec.layers of the parameterised layers, in order.
std::vector<std::size_t> param_layer_indices(const NetworkSpec& spec);

// Binary parameter file: "IDLABW01", u64 tensor count, then per tensor
// u64 rank, u64 dims, little-endian doubles.
void save_params(const std::filesystem::path& path, const ParamList& params);
ParamList load_params(const std::filesystem::path& path, const NetworkSpec& spec);

double grad_norm(const ParamList& grads);

}  // namespace idlab
