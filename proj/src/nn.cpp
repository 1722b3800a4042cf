#include "idlab/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"
#include "idlab/linalg.hpp"
#include "idlab/patches.hpp"
#include "idlab/random.hpp"

namespace idlab {
namespace {

using kernels::Trans;

constexpr char kWeightsMagic[8] = {'I', 'D', 'L', 'A', 'B', 'W', '0', '1'};

std::string layer_label(std::size_t i) { return "layer " + std::to_string(i); }

struct Fans {
  double in = 0.0;
  double out = 0.0;
};

Fans fans(const LayerSpec& l) {
  if (l.kind == LayerKind::conv2d) {
    const double k = static_cast<double>(l.kh * l.kw);
    return {static_cast<double>(l.in) * k, static_cast<double>(l.out) * k};
  }
  return {static_cast<double>(l.in), static_cast<double>(l.out)};
}

std::vector<Tensor::Shape> layer_shapes(const LayerSpec& l) {
  std::vector<Tensor::Shape> out;
  switch (l.kind) {
    case LayerKind::dense:
      out.push_back({l.out, l.in});
      if (l.has_bias) out.push_back({l.out});
      break;
    case LayerKind::conv2d:
      out.push_back({l.out, l.in, l.kh, l.kw});
      if (l.has_bias) out.push_back({l.out});
      break;
    case LayerKind::residual_fc_block:
      for (int rep = 0; rep < 2; ++rep) {
        out.push_back({l.out, l.in});
        if (l.has_bias) out.push_back({l.out});
      }
      break;
    case LayerKind::relu:
      break;
  }
  return out;
}

bool is_weight(const LayerSpec& l, std::size_t t) { return !l.has_bias || t % 2 == 0; }

Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, const RngState& state) {
  const bool tall = rows >= cols;
  const std::size_t m = tall ? rows : cols;
  const std::size_t n = tall ? cols : rows;
  Tensor a = sample(Gaussian{0.0, 1.0}, {m, n}, state).first;
  Qr f = qr(a);
  for (std::size_t j = 0; j < n; ++j) {
    if (f.r.at(j, j) < 0.0) {
      for (std::size_t i = 0; i < m; ++i) f.q.at(i, j) = -f.q.at(i, j);
    }
  }
  return tall ? std::move(f.q) : transpose(f.q);
}

Tensor init_weight(const LayerSpec& l, const Tensor::Shape& shape, InitScheme scheme,
                   const RngState& state) {
  const Fans f = fans(l);
  switch (scheme) {
    case InitScheme::default_scheme:
      return sample(Gaussian{0.0, 1.0 / std::sqrt(f.in * f.out)}, shape, state).first;
    case InitScheme::xavier_normal:
      return sample(Gaussian{0.0, std::sqrt(2.0 / (f.in + f.out))}, shape, state).first;
    case InitScheme::xavier_uniform: {
      const double a = std::sqrt(6.0 / (f.in + f.out));
      return sample(Uniform{-a, a}, shape, state).first;
    }
    case InitScheme::kaiming_normal:
      return sample(Gaussian{0.0, std::sqrt(2.0 / f.in)}, shape, state).first;
    case InitScheme::kaiming_uniform: {
      const double a = std::sqrt(6.0 / f.in);
      return sample(Uniform{-a, a}, shape, state).first;
    }
    case InitScheme::orthogonal: {
      const std::size_t rows = shape[0];
      const std::size_t cols = shape_size(shape) / rows;
      return orthogonal_matrix(rows, cols, state).reshaped(shape);
    }
  }
  throw SpecError("unknown init scheme");
}

thread_local std::vector<double> t_cols;

double* cols_buffer(std::size_t n) {
  if (t_cols.size() < n) t_cols.resize(n);
  return t_cols.data();
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  kernels::active().gemm(ta, tb, m, n, k, 1.0, a, lda, b, ldb, beta, c, ldc);
}

// y = W x + b for a dense layer with x of any shape holding `in` values.
Tensor dense_apply(const Tensor& w, const Tensor* b, const double* x) {
  const std::size_t out = w.rows();
  const std::size_t in = w.cols();
  Tensor y({out});
  gemm(Trans::no, Trans::no, out, 1, in, w.data(), in, x, 1, 0.0, y.data(), 1);
  if (b) y += *b;
  return y;
}

Tensor relu_apply(const Tensor& x) {
  Tensor y(x.shape());
  kernels::active().relu(x.data(), y.data(), x.size());
  return y;
}

Tensor conv_apply(const LayerSpec& l, const Tensor& w, const Tensor* b, const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != l.in) {
    throw ShapeError("conv layer expects " + std::to_string(l.in) + " input channels, got " +
                     shape_string(x.shape()));
  }
  const PatchGeometry g{l.in, x.dim(1), x.dim(2), l.kh, l.kw};
  double* cols = cols_buffer(g.patch_size() * g.positions());
  im2col(g, x.data(), cols);
  Tensor y({l.out, g.height, g.width});
  gemm(Trans::no, Trans::no, l.out, g.positions(), g.patch_size(), w.data(), g.patch_size(), cols,
       g.positions(), 0.0, y.data(), g.positions());
  if (b) {
    for (std::size_t c = 0; c < l.out; ++c) {
      double* row = y.data() + c * g.positions();
      const double bc = (*b)[c];
      for (std::size_t p = 0; p < g.positions(); ++p) row[p] += bc;
    }
  }
  return y;
}

struct ResidualStash {
  Tensor h1;
  Tensor r;
};

const Tensor* bias_at(const LayerSpec& l, const std::vector<Tensor>& p, std::size_t weight_slot) {
  return l.has_bias ? &p[weight_slot + 1] : nullptr;
}

Tensor apply_layer(const LayerSpec& l, const std::vector<Tensor>& p, const Tensor& x,
                   ResidualStash* stash) {
  switch (l.kind) {
    case LayerKind::relu:
      return relu_apply(x);
    case LayerKind::conv2d:
      return conv_apply(l, p[0], bias_at(l, p, 0), x);
    case LayerKind::dense:
      if (x.size() != l.in) {
        throw ShapeError("dense layer expects " + std::to_string(l.in) + " inputs, got " +
                         shape_string(x.shape()));
      }
      return dense_apply(p[0], bias_at(l, p, 0), x.data());
    case LayerKind::residual_fc_block: {
      if (x.size() != l.in) {
        throw ShapeError("residual block expects " + std::to_string(l.in) + " inputs, got " +
                         shape_string(x.shape()));
      }
      const std::size_t second = l.has_bias ? 2 : 1;
      Tensor h1 = relu_apply(dense_apply(p[0], bias_at(l, p, 0), x.data()));
      Tensor r = relu_apply(dense_apply(p[second], bias_at(l, p, second), h1.data()));
      Tensor y({l.out}, std::vector<double>(x.values().begin(), x.values().end()));
      y += r;
      if (stash) *stash = {std::move(h1), std::move(r)};
      return y;
    }
  }
  throw SpecError("unknown layer kind");
}

void check_input(const Network& net, const Tensor& input) {
  const auto& s = net.spec;
  if (s.convolutional()) {
    if (input.rank() != 3 || input.dim(0) != s.channels) {
      throw ShapeError("expected a " + std::to_string(s.channels) + "xHxW image, got " +
                       shape_string(input.shape()));
    }
  } else if (input.shape() != s.input_shape()) {
    throw ShapeError("expected input " + shape_string(s.input_shape()) + ", got " +
                     shape_string(input.shape()));
  }
}

// Gradient of a dense map y = W x (+ b): dW += dy x^T, db += dy, and dx = W^T dy
// when requested.
void dense_backward(const Tensor& w, const double* x, const double* dy, Tensor* dw, Tensor* db,
                    double* dx) {
  const std::size_t out = w.rows();
  const std::size_t in = w.cols();
  if (dw) gemm(Trans::no, Trans::no, out, in, 1, dy, 1, x, in, 0.0, dw->data(), in);
  if (db) std::memcpy(db->data(), dy, out * sizeof(double));
  if (dx) gemm(Trans::yes, Trans::no, in, 1, out, w.data(), in, dy, 1, 0.0, dx, 1);
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias) {
  return {LayerKind::dense, in, out, 0, 0, bias, true};
}
LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t k, bool bias) {
  return {LayerKind::conv2d, in, out, k, k, bias, true};
}
LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 0, 0, false, true}; }
LayerSpec LayerSpec::residual(std::size_t width, bool bias) {
  return {LayerKind::residual_fc_block, width, width, 0, 0, bias, true};
}

std::string_view init_name(InitScheme s) {
  switch (s) {
    case InitScheme::default_scheme: return "default";
    case InitScheme::xavier_normal: return "xavier_normal";
    case InitScheme::xavier_uniform: return "xavier_uniform";
    case InitScheme::kaiming_normal: return "kaiming_normal";
    case InitScheme::kaiming_uniform: return "kaiming_uniform";
    case InitScheme::orthogonal: return "orthogonal";
  }
  return "?";
}

InitScheme parse_init(std::string_view text) {
  for (auto s : {InitScheme::default_scheme, InitScheme::xavier_normal, InitScheme::xavier_uniform,
                 InitScheme::kaiming_normal, InitScheme::kaiming_uniform, InitScheme::orthogonal}) {
    if (init_name(s) == text) return s;
  }
  throw SpecError("unknown init scheme '" + std::string(text) + "'");
}

bool NetworkSpec::convolutional() const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv2d) return true;
  }
  return false;
}

void validate(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw SpecError("network has no layers");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw SpecError("data geometry must be positive");
  }
  bool conv = false;
  bool flat = false;
  for (const auto& l : spec.layers) {
    conv = conv || l.kind == LayerKind::conv2d;
    flat = flat || l.kind == LayerKind::dense || l.kind == LayerKind::residual_fc_block;
  }
  if (conv && flat) throw SpecError("conv2d and dense layers cannot be mixed");
  if (!conv && !flat) throw SpecError("network has no parameterised layer");

  const std::size_t data_width = conv ? spec.channels : spec.channels * spec.height * spec.width;
  std::size_t width = data_width;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::relu) continue;
    if (l.in == 0 || l.out == 0) throw SpecError(layer_label(i) + " has a zero dimension");
    if (l.in != width) {
      throw SpecError(layer_label(i) + " expects " + std::to_string(l.in) + " inputs but receives " +
                      std::to_string(width));
    }
    if (l.kind == LayerKind::conv2d) {
      if (l.kh == 0 || l.kw == 0 || l.kh % 2 == 0 || l.kw % 2 == 0) {
        throw SpecError(layer_label(i) + " needs odd kernel sizes for size-preserving padding");
      }
    }
    if (l.kind == LayerKind::residual_fc_block && l.in != l.out) {
      throw SpecError(layer_label(i) + ": residual block requires in == out");
    }
    width = l.out;
  }
  if (width != data_width) {
    throw SpecError("network output width " + std::to_string(width) +
                    " does not reproduce the input width " + std::to_string(data_width));
  }
}

NetworkSpec conv_stack(std::size_t depth, std::size_t width, std::size_t kernel,
                       std::size_t channels, bool bias) {
  if (depth == 0) throw SpecError("depth must be positive");
  NetworkSpec spec;
  spec.channels = channels;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t ci = i == 0 ? channels : width;
    const std::size_t co = i + 1 == depth ? channels : width;
    spec.layers.push_back(LayerSpec::conv(ci, co, kernel, bias));
    if (i + 1 < depth) spec.layers.push_back(LayerSpec::relu());
  }
  return spec;
}

NetworkSpec dense_stack(std::size_t depth, std::size_t d, std::size_t hidden, bool relu,
                        bool bias) {
  if (depth == 0) throw SpecError("depth must be positive");
  NetworkSpec spec;
  spec.channels = 1;
  spec.height = 1;
  spec.width = d;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t in = i == 0 ? d : hidden;
    const std::size_t out = i + 1 == depth ? d : hidden;
    spec.layers.push_back(LayerSpec::dense(in, out, bias));
    if (relu && i + 1 < depth) spec.layers.push_back(LayerSpec::relu());
  }
  return spec;
}

NetworkSpec residual_stack(std::size_t blocks, std::size_t d, bool bias) {
  if (blocks == 0) throw SpecError("need at least one residual block");
  NetworkSpec spec;
  spec.channels = 1;
  spec.height = 1;
  spec.width = d;
  for (std::size_t i = 0; i < blocks; ++i) spec.layers.push_back(LayerSpec::residual(d, bias));
  return spec;
}

Network build_network(const NetworkSpec& spec) {
  validate(spec);
  Network net{spec, {}, {}};
  const RngState root{spec.seed, 0, 0};
  net.params.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto shapes = layer_shapes(l);
    for (std::size_t t = 0; t < shapes.size(); ++t) {
      if (is_weight(l, t)) {
        net.params[i].push_back(init_weight(l, shapes[t], spec.init, substream(root, purpose::init, i * 8 + t)));
      } else {
        net.params[i].emplace_back(shapes[t]);
      }
    }
  }
  net.initial_params = net.params;
  return net;
}

ForwardResult forward(const Network& net, const Tensor& input, bool capture) {
  check_input(net, input);
  ForwardResult res;
  Tensor x = input;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    x = apply_layer(net.spec.layers[i], net.params[i], x, nullptr);
    if (capture) res.intermediates.push_back(x);
  }
  res.output = std::move(x).reshaped(input.shape());
  return res;
}

Tensor predict(const Network& net, const Tensor& input) { return forward(net, input).output; }

Tensor forward_range(const Network& net, std::size_t first, std::size_t last, const Tensor& input) {
  if (first > last || last > net.spec.layers.size()) throw ShapeError("forward_range: bad layer range");
  Tensor x = input;
  for (std::size_t i = first; i < last; ++i) x = apply_layer(net.spec.layers[i], net.params[i], x, nullptr);
  return x;
}

double loss_mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "loss_mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return 0.5 * acc / static_cast<double>(pred.size());
}

BackwardResult backward(const Network& net, const Tensor& input, const Tensor& target) {
  check_input(net, input);
  require_same_shape(input, target, "backward target");
  const auto& layers = net.spec.layers;
  const std::size_t L = layers.size();

  std::vector<Tensor> acts;
  acts.reserve(L + 1);
  acts.push_back(input);
  std::vector<ResidualStash> stash(L);
  for (std::size_t i = 0; i < L; ++i) acts.push_back(apply_layer(layers[i], net.params[i], acts[i], &stash[i]));

  BackwardResult res;
  res.output = acts[L].reshaped(input.shape());
  res.loss = loss_mse(res.output, target);
  res.grads.resize(L);

  // need_dx[i]: some trainable layer sits below layer i.
  std::vector<bool> need_dx(L, false);
  bool below = false;
  for (std::size_t i = 0; i < L; ++i) {
    need_dx[i] = below;
    below = below || (layers[i].has_params() && layers[i].trainable);
  }

  const double inv_n = 1.0 / static_cast<double>(input.size());
  Tensor dy(acts[L].shape());
  for (std::size_t k = 0; k < dy.size(); ++k) dy[k] = (acts[L][k] - target[k]) * inv_n;

  for (std::size_t i = L; i-- > 0;) {
    const auto& l = layers[i];
    const auto& p = net.params[i];
    const Tensor& x = acts[i];
    const bool train = l.has_params() && l.trainable;
    if (!train && !need_dx[i]) break;
    Tensor dx;
    if (need_dx[i]) dx = Tensor(x.shape());

    switch (l.kind) {
      case LayerKind::relu:
        kernels::active().relu_backward(acts[i + 1].data(), dy.data(), dx.data(), dy.size());
        break;
      case LayerKind::dense: {
        std::vector<Tensor> g;
        if (train) {
          g.emplace_back(p[0].shape());
          if (l.has_bias) g.emplace_back(p[1].shape());
        }
        dense_backward(p[0], x.data(), dy.data(), train ? &g[0] : nullptr,
                       train && l.has_bias ? &g[1] : nullptr, need_dx[i] ? dx.data() : nullptr);
        res.grads[i] = std::move(g);
        break;
      }
      case LayerKind::conv2d: {
        const PatchGeometry g{l.in, x.dim(1), x.dim(2), l.kh, l.kw};
        const std::size_t P = g.positions();
        const std::size_t K = g.patch_size();
        if (train) {
          std::vector<Tensor> grads;
          grads.emplace_back(p[0].shape());
          double* cols = cols_buffer(K * P);
          im2col(g, x.data(), cols);
          gemm(Trans::no, Trans::yes, l.out, K, P, dy.data(), P, cols, P, 0.0, grads[0].data(), K);
          if (l.has_bias) {
            Tensor db({l.out});
            for (std::size_t c = 0; c < l.out; ++c) {
              const double* row = dy.data() + c * P;
              double acc = 0.0;
              for (std::size_t q = 0; q < P; ++q) acc += row[q];
              db[c] = acc;
            }
            grads.push_back(std::move(db));
          }
          res.grads[i] = std::move(grads);
        }
        if (need_dx[i]) {
          double* cols = cols_buffer(K * P);
          gemm(Trans::yes, Trans::no, K, P, l.out, p[0].data(), K, dy.data(), P, 0.0, cols, P);
          col2im(g, cols, dx.data());
        }
        break;
      }
      case LayerKind::residual_fc_block: {
        const std::size_t w = l.in;
        const std::size_t second = l.has_bias ? 2 : 1;
        const ResidualStash& s = stash[i];
        const auto& relu_bw = kernels::active().relu_backward;
        Tensor g2({w});
        relu_bw(s.r.data(), dy.data(), g2.data(), w);
        Tensor dh1({w});
        Tensor g1({w});
        std::vector<Tensor> grads;
        if (train) {
          for (const auto& t : p) grads.emplace_back(t.shape());
        }
        dense_backward(p[second], s.h1.data(), g2.data(), train ? &grads[second] : nullptr,
                       train && l.has_bias ? &grads[second + 1] : nullptr, dh1.data());
        relu_bw(s.h1.data(), dh1.data(), g1.data(), w);
        Tensor dx_inner({w});
        dense_backward(p[0], x.data(), g1.data(), train ? &grads[0] : nullptr,
                       train && l.has_bias ? &grads[1] : nullptr,
                       need_dx[i] ? dx_inner.data() : nullptr);
        if (need_dx[i]) {
          for (std::size_t k = 0; k < w; ++k) dx[k] = dy[k] + dx_inner[k];
        }
        res.grads[i] = std::move(grads);
        break;
      }
    }
    if (!need_dx[i]) break;
    dy = std::move(dx);
  }
  return res;
}

BackwardResult backward_batch(const Network& net, const std::vector<Tensor>& inputs,
                              const std::vector<Tensor>& targets) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw ShapeError("backward_batch needs matching non-empty input and target lists");
  }
  if (inputs.size() == 1) return backward(net, inputs[0], targets[0]);
  BackwardResult total;
  const double scale = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t e = 0; e < inputs.size(); ++e) {
    BackwardResult r = backward(net, inputs[e], targets[e]);
    total.loss += scale * r.loss;
    if (e == 0) {
      total.grads = std::move(r.grads);
      for (auto& layer : total.grads)
        for (auto& g : layer)
          for (auto& v : g.values()) v *= scale;
    } else {
      for (std::size_t i = 0; i < r.grads.size(); ++i)
        for (std::size_t t = 0; t < r.grads[i].size(); ++t)
          kernels::active().axpy(scale, r.grads[i][t].data(), total.grads[i][t].data(), r.grads[i][t].size());
    }
  }
  return total;
}

ParamCount count_params(const NetworkSpec& spec) {
  validate(spec);
  ParamCount c;
  for (const auto& l : spec.layers) {
    const auto shapes = layer_shapes(l);
    for (std::size_t t = 0; t < shapes.size(); ++t) {
      const std::size_t n = shape_size(shapes[t]);
      c.with_bias += n;
      if (is_weight(l, t)) c.weights_only += n;
    }
  }
  return c;
}

std::vector<std::size_t> param_layer_indices(const NetworkSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].has_params()) out.push_back(i);
  }
  return out;
}

void save_params(const std::filesystem::path& path, const ParamList& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  std::uint64_t count = 0;
  for (const auto& layer : params) count += layer.size();
  f.write(kWeightsMagic, sizeof kWeightsMagic);
  f.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& layer : params) {
    for (const auto& t : layer) {
      const std::uint64_t rank = t.rank();
      f.write(reinterpret_cast<const char*>(&rank), sizeof rank);
      for (auto d : t.shape()) {
        const std::uint64_t dim = d;
        f.write(reinterpret_cast<const char*>(&dim), sizeof dim);
      }
      f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }
  if (!f) throw IoError("failed writing " + path.string());
}

ParamList load_params(const std::filesystem::path& path, const NetworkSpec& spec) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  auto offset = [&] { return static_cast<std::size_t>(f.tellg()); };
  char magic[8];
  if (!f.read(magic, sizeof magic) || std::memcmp(magic, kWeightsMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + ": not a weights file", 0);
  }
  std::uint64_t count = 0;
  if (!f.read(reinterpret_cast<char*>(&count), sizeof count)) throw FormatError(path.string() + ": truncated", 8);
  ParamList out(spec.layers.size());
  std::uint64_t seen = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    for (const auto& shape : layer_shapes(spec.layers[i])) {
      const std::size_t at = offset();
      std::uint64_t rank = 0;
      if (!f.read(reinterpret_cast<char*>(&rank), sizeof rank) || rank != shape.size()) {
        throw FormatError(path.string() + ": tensor rank does not match the network spec", at);
      }
      for (auto d : shape) {
        std::uint64_t dim = 0;
        if (!f.read(reinterpret_cast<char*>(&dim), sizeof dim) || dim != d) {
          throw FormatError(path.string() + ": tensor shape does not match the network spec", at);
        }
      }
      Tensor t(shape);
      if (!f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
        throw FormatError(path.string() + ": truncated tensor data", at);
      }
      out[i].push_back(std::move(t));
      ++seen;
    }
  }
  if (seen != count) throw FormatError(path.string() + ": tensor count mismatch", 8);
  return out;
}

double grad_norm(const ParamList& grads) {
  double acc = 0.0;
  for (const auto& layer : grads)
    for (const auto& g : layer)
      for (double v : g.values()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace idlab
