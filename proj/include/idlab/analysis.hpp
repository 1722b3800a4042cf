#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "idlab/nn.hpp"
#include "idlab/random.hpp"

namespace idlab {

enum class CorrMode { pearson, cosine };

std::string_view corr_mode_name(CorrMode m);
CorrMode parse_corr_mode(std::string_view text);

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // one side had (centred) energy below 1e-20
};

// Pearson correlation of the flattened entries (cosine mode skips centring).
Correlation correlation(const Tensor& a, const Tensor& b, CorrMode mode = CorrMode::pearson);
Correlation pearson_corr(const Tensor& a, const Tensor& b);

inline constexpr std::size_t kCorrelatedImageAttempts = 100;

// Gaussian noise image shifted along xhat so that its correlation with xhat
// is rho, then rescaled to ||xhat||. rho = 1 returns xhat itself.
Tensor gen_correlated_image(const Tensor& xhat, double rho, Rng& rng, CorrMode mode = CorrMode::pearson);

enum class RefKind { identity, constant };

struct ReferenceFunction {
  RefKind kind = RefKind::identity;
  Tensor anchor;  // required for constant

  Tensor operator()(const Tensor& x) const;
};

using Predictor = std::function<Tensor(const Tensor&)>;
Predictor predictor(const Network& net);

struct CorrelationHeatmap {
  std::vector<std::string> row_labels;
  std::vector<double> rho;
  Tensor corr_identity;  // rows x rho.size()
  Tensor corr_constant;
  std::size_t samples_per_cell = 0;
};

// Default grid: 0, 0.05, ..., 1.
std::vector<double> default_rho_grid();

// Every model sees the same test images: sample s of column c is drawn from
// sub-stream (eval, c * samples + s) of `state`.
CorrelationHeatmap reference_heatmap(const std::vector<Predictor>& models,
                                     const std::vector<std::string>& labels, const Tensor& xhat,
                                     const std::vector<double>& rho_grid, std::size_t samples_per_cell,
                                     const RngState& state, CorrMode mode = CorrMode::pearson);

struct CorrelationCurve {
  std::vector<double> identity;
  std::vector<double> constant;
};
CorrelationCurve mean_correlation_curve(const CorrelationHeatmap& h);

struct LabeledSet {
  std::vector<Tensor> images;
  std::vector<int> labels;
};

// Number of representation levels: one per parameterised layer (a layer
// together with the ReLU following it); level 0 is the raw input.
std::size_t representation_depth(const NetworkSpec& spec);
Tensor layer_representation(const Network& net, const Tensor& input, std::size_t level);

// Inner-product weighted label vote; ties go to the lowest class index.
double probe_error_rate(const Network& net, std::size_t level, const LabeledSet& train,
                        const LabeledSet& test);

enum class VizMode { top_singular, max_corr, index };

// activation is C x H x W; returns H x W. `input` is required for max_corr,
// `k` for index.
Tensor channel_viz(const Tensor& activation, VizMode mode, const Tensor* input = nullptr, std::size_t k = 0);

double weight_distance(const Tensor& w0, const Tensor& wstar);

// Forward pass of an all-convolutional network at a new spatial size.
Tensor eval_at_size(const Network& net, const Tensor& image);

// Runs conv layers start..end on a grayscale image replicated across the
// input channels of conv layer `start` (counted from 0).
Tensor upper_subnet_predict(const Network& net, std::size_t start_layer, const Tensor& image);

}  // namespace idlab
