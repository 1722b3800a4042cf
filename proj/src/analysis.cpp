#include "idlab/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"
#include "idlab/linalg.hpp"

namespace idlab {
namespace {

constexpr double kDegenerateVariance = 1e-20;

double centred_mean(const Tensor& t, CorrMode mode) { return mode == CorrMode::pearson ? mean(t) : 0.0; }

// Spec-layer index one past the end of each representation level.
std::vector<std::size_t> level_ends(const NetworkSpec& spec) {
  std::vector<std::size_t> ends{0};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_params()) continue;
    std::size_t e = i + 1;
    while (e < spec.layers.size() && !spec.layers[e].has_params()) ++e;
    ends.push_back(e);
  }
  return ends;
}

Tensor stack_representations(const Network& net, const std::vector<Tensor>& images, std::size_t level) {
  Tensor first = layer_representation(net, images.at(0), level);
  const std::size_t d = first.size();
  Tensor out({images.size(), d});
  std::copy(first.values().begin(), first.values().end(), out.data());
  for (std::size_t i = 1; i < images.size(); ++i) {
    const Tensor r = layer_representation(net, images[i], level);
    std::copy(r.values().begin(), r.values().end(), out.data() + i * d);
  }
  return out;
}

}  // namespace

std::string_view corr_mode_name(CorrMode m) { return m == CorrMode::pearson ? "pearson" : "cosine"; }

CorrMode parse_corr_mode(std::string_view text) {
  if (text == "pearson") return CorrMode::pearson;
  if (text == "cosine") return CorrMode::cosine;
  throw ParameterError("unknown correlation mode '" + std::string(text) + "'");
}

Correlation correlation(const Tensor& a, const Tensor& b, CorrMode mode) {
  if (a.size() != b.size()) throw ShapeError("correlation: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  if (a.size() < 2) throw ShapeError("correlation needs at least two entries");
  const double ma = centred_mean(a, mode);
  const double mb = centred_mean(b, mode);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double n = static_cast<double>(a.size());
  if (saa / n < kDegenerateVariance || sbb / n < kDegenerateVariance) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

Correlation pearson_corr(const Tensor& a, const Tensor& b) { return correlation(a, b, CorrMode::pearson); }

Tensor gen_correlated_image(const Tensor& xhat, double rho, Rng& rng, CorrMode mode) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
  const double norm = frobenius_norm(xhat);
  if (norm == 0.0) throw DegenerateInputError("training example has zero norm");
  if (rho == 1.0) return xhat;
  const double mx = centred_mean(xhat, mode);
  double a = 0.0;
  for (double v : xhat.values()) a += (v - mx) * (v - mx);
  if (a / static_cast<double>(xhat.size()) < kDegenerateVariance) {
    throw DegenerateInputError("training example has no variance to correlate with");
  }
  for (std::size_t attempt = 0; attempt < kCorrelatedImageAttempts; ++attempt) {
    Tensor noise = rng.sample(Gaussian{0.0, 1.0}, xhat.shape());
    const double mn = centred_mean(noise, mode);
    double b = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < xhat.size(); ++i) {
      b += (noise[i] - mn) * (xhat[i] - mx);
      c += (noise[i] - mn) * (noise[i] - mn);
    }
    const double gap = a * c - b * b;
    // Noise (nearly) parallel to xhat leaves no orthogonal part to work with.
    if (!(gap > 1e-12 * a * c)) continue;
    const double t = rho * std::sqrt(gap / (1.0 - rho * rho));
    const double alpha = (t - b) / a;
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += alpha * xhat[i];
    const double nn = frobenius_norm(noise);
    if (nn == 0.0) continue;
    return (norm / nn) * noise;
  }
  throw NumericError("could not draw a noise image with a feasible correlation shift", kCorrelatedImageAttempts);
}

Tensor ReferenceFunction::operator()(const Tensor& x) const {
  if (kind == RefKind::identity) return x;
  if (anchor.empty()) throw SpecError("constant reference needs an anchor image");
  return anchor;
}

Predictor predictor(const Network& net) {
  return [&net](const Tensor& x) { return predict(net, x); };
}

std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

CorrelationHeatmap reference_heatmap(const std::vector<Predictor>& models,
                                     const std::vector<std::string>& labels, const Tensor& xhat,
                                     const std::vector<double>& rho_grid, std::size_t samples_per_cell,
                                     const RngState& state, CorrMode mode) {
  if (models.empty()) throw ParameterError("heatmap needs at least one model");
  if (labels.size() != models.size()) throw ParameterError("one label per model required");
  if (rho_grid.empty() || samples_per_cell == 0) throw ParameterError("empty rho grid or zero samples");
  for (std::size_t c = 0; c < rho_grid.size(); ++c) {
    if (c > 0 && !(rho_grid[c] > rho_grid[c - 1])) throw ParameterError("rho grid must be strictly increasing");
  }
  CorrelationHeatmap h;
  h.row_labels = labels;
  h.rho = rho_grid;
  h.samples_per_cell = samples_per_cell;
  h.corr_identity = Tensor({models.size(), rho_grid.size()});
  h.corr_constant = Tensor({models.size(), rho_grid.size()});
  const ReferenceFunction ident{RefKind::identity, {}};
  const ReferenceFunction konst{RefKind::constant, xhat};
  for (std::size_t c = 0; c < rho_grid.size(); ++c) {
    for (std::size_t s = 0; s < samples_per_cell; ++s) {
      Rng rng(substream(state, purpose::eval, c * samples_per_cell + s));
      const Tensor x = gen_correlated_image(xhat, rho_grid[c], rng, mode);
      for (std::size_t r = 0; r < models.size(); ++r) {
        const Tensor y = models[r](x);
        h.corr_identity.at(r, c) += correlation(y, ident(x), mode).value;
        h.corr_constant.at(r, c) += correlation(y, konst(x), mode).value;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(samples_per_cell);
  for (auto& v : h.corr_identity.values()) v *= inv;
  for (auto& v : h.corr_constant.values()) v *= inv;
  return h;
}

CorrelationCurve mean_correlation_curve(const CorrelationHeatmap& h) {
  CorrelationCurve out;
  const std::size_t rows = h.corr_identity.rows();
  const std::size_t cols = h.corr_identity.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double si = 0.0;
    double sc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      si += h.corr_identity.at(r, c);
      sc += h.corr_constant.at(r, c);
    }
    out.identity.push_back(si / static_cast<double>(cols));
    out.constant.push_back(sc / static_cast<double>(cols));
  }
  return out;
}

std::size_t representation_depth(const NetworkSpec& spec) { return level_ends(spec).size() - 1; }

Tensor layer_representation(const Network& net, const Tensor& input, std::size_t level) {
  const auto ends = level_ends(net.spec);
  if (level >= ends.size()) {
    throw ParameterError("representation level " + std::to_string(level) + " exceeds depth " +
                         std::to_string(ends.size() - 1));
  }
  if (level == 0) return input;
  return forward_range(net, 0, ends[level], input);
}

double probe_error_rate(const Network& net, std::size_t level, const LabeledSet& train,
                        const LabeledSet& test) {
  if (train.images.empty() || test.images.empty()) throw ParameterError("probe sets must be non-empty");
  if (train.images.size() != train.labels.size() || test.images.size() != test.labels.size()) {
    throw ParameterError("probe sets need one label per image");
  }
  int classes = 0;
  for (int l : train.labels) {
    if (l < 0) throw ParameterError("negative class label");
    classes = std::max(classes, l + 1);
  }
  const Tensor rtr = stack_representations(net, train.images, level);
  const Tensor rte = stack_representations(net, test.images, level);
  const std::size_t ntr = rtr.rows();
  const std::size_t nte = rte.rows();
  Tensor gram({nte, ntr});
  kernels::active().gemm(kernels::Trans::no, kernels::Trans::yes, nte, ntr, rtr.cols(), 1.0, rte.data(),
                         rte.cols(), rtr.data(), rtr.cols(), 0.0, gram.data(), ntr);
  std::size_t wrong = 0;
  std::vector<double> score(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < nte; ++i) {
    std::fill(score.begin(), score.end(), 0.0);
    for (std::size_t j = 0; j < ntr; ++j) score[static_cast<std::size_t>(train.labels[j])] += gram.at(i, j);
    const auto best = std::max_element(score.begin(), score.end()) - score.begin();
    if (best != test.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(nte);
}

Tensor channel_viz(const Tensor& activation, VizMode mode, const Tensor* input, std::size_t k) {
  if (activation.rank() != 3) throw ShapeError("channel_viz expects C x H x W, got " + shape_string(activation.shape()));
  const std::size_t C = activation.dim(0);
  const std::size_t H = activation.dim(1);
  const std::size_t W = activation.dim(2);
  const std::size_t P = H * W;
  auto channel = [&](std::size_t c) {
    return Tensor({H, W}, std::vector<double>(activation.data() + c * P, activation.data() + (c + 1) * P));
  };
  switch (mode) {
    case VizMode::index:
      if (k >= C) throw ShapeError("channel index " + std::to_string(k) + " out of range for " + std::to_string(C) + " channels");
      return channel(k);
    case VizMode::max_corr: {
      if (!input) throw ParameterError("max_corr needs the input image");
      if (input->size() != P) throw ShapeError("max_corr input must have H*W entries");
      std::size_t best = 0;
      double best_v = -2.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double v = pearson_corr(channel(c), *input).value;
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      return channel(best);
    }
    case VizMode::top_singular: {
      const Svd f = svd(activation.reshaped({C, P}));
      Tensor v({H, W});
      for (std::size_t p = 0; p < P; ++p) v[p] = f.v.at(p, 0);
      Tensor avg({H, W});
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) avg[p] += activation[c * P + p] / static_cast<double>(C);
      const Correlation corr = pearson_corr(v, avg);
      const double orient = corr.degenerate ? dot(v, avg) : corr.value;
      if (orient < 0.0) v = -1.0 * v;
      return v;
    }
  }
  throw ParameterError("unknown visualization mode");
}

double weight_distance(const Tensor& w0, const Tensor& wstar) {
  require_same_shape(w0, wstar, "weight_distance");
  const double n0 = frobenius_norm(w0);
  if (n0 == 0.0) throw DegenerateInputError("initial weights have zero norm");
  return frobenius_norm(w0 - wstar) / n0;
}

Tensor eval_at_size(const Network& net, const Tensor& image) {
  for (const auto& l : net.spec.layers) {
    if (l.kind == LayerKind::dense || l.kind == LayerKind::residual_fc_block) {
      throw GeometryError("fully connected layers are bound to their training input size");
    }
  }
  return predict(net, image);
}

Tensor upper_subnet_predict(const Network& net, std::size_t start_layer, const Tensor& image) {
  std::vector<std::size_t> convs;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    const auto kind = net.spec.layers[i].kind;
    if (kind == LayerKind::dense || kind == LayerKind::residual_fc_block) {
      throw SpecError("upper subnetworks are defined for convolutional networks only");
    }
    if (kind == LayerKind::conv2d) convs.push_back(i);
  }
  if (start_layer < 1 || start_layer >= convs.size()) {
    throw SpecError("start layer " + std::to_string(start_layer) + " outside [1, " + std::to_string(convs.size()) + ")");
  }
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("upper_subnet_predict expects a 1 x H x W image");
  const std::size_t first = convs[start_layer];
  const std::size_t ch = net.spec.layers[first].in;
  const std::size_t P = image.dim(1) * image.dim(2);
  Tensor x({ch, image.dim(1), image.dim(2)});
  for (std::size_t c = 0; c < ch; ++c) std::copy(image.data(), image.data() + P, x.data() + c * P);
  return forward_range(net, first, net.spec.layers.size(), x);
}

}  // namespace idlab
