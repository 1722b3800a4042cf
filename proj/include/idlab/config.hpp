#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "idlab/analysis.hpp"
#include "idlab/data_io.hpp"
#include "idlab/nn.hpp"
#include "idlab/optim.hpp"

namespace idlab {

struct DataConfig {
  std::string dataset = "mnist";  // mnist | fashion | cifar10 | synthetic
  std::filesystem::path train_images = "data/mnist/train-images-idx3-ubyte";
  std::filesystem::path train_labels = "data/mnist/train-labels-idx1-ubyte";
  std::filesystem::path test_images = "data/mnist/t10k-images-idx3-ubyte";
  std::filesystem::path test_labels = "data/mnist/t10k-labels-idx1-ubyte";
  std::filesystem::path cifar_train = "data/cifar10/data_batch_1.bin";
  std::filesystem::path cifar_test = "data/cifar10/test_batch.bin";
  std::size_t n_train_examples = 1;
  // Explicit dataset indices win. Otherwise the first index with
  // train_label, followed by n - 1 indices drawn with train_index_seed.
  std::vector<std::size_t> train_indices;
  int train_label = 7;
  std::uint64_t train_index_seed = 0;
  std::size_t image_size = 0;  // 0 keeps the native size
  std::size_t synthetic_size = 8;
  std::size_t synthetic_channels = 1;
};

struct ModelConfig {
  std::string family = "cnn";  // cnn | fcn | relu_fcn | residual_fcn
  std::size_t depth = 5;
  std::size_t channels = 32;  // hidden conv channels
  std::size_t kernel = 5;
  std::size_t hidden = 0;  // dense hidden width; 0 means the input width
  bool bias = true;
  InitScheme init = InitScheme::default_scheme;
  // Parameterised layers (0-based) kept at their initial values.
  std::vector<std::size_t> frozen;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double early_stop_loss = 0.0;  // 0 disables
  std::size_t trace_every = 100;
};

struct EvalConfig {
  std::vector<double> rho_grid = default_rho_grid();
  std::size_t samples_per_cell = 16;
  std::vector<std::string> patterns{"digit_blend(0,1,0.5)", "gaussian_noise", "checkerboard(4)",
                                    "h_gradient", "solid(0.5)", "centered_square(0.5)", "circle(0.35)"};
  std::vector<std::size_t> input_sizes{7, 14, 28, 56, 112};
  std::size_t probe_train = 1000;
  std::size_t probe_test = 1000;
  CorrMode correlation = CorrMode::pearson;
  ImageFormat image_format = ImageFormat::pgm;
  VizMode viz = VizMode::top_singular;
  std::vector<std::string> analyses{"heatmap", "curves", "probe", "channels", "weights", "sizes", "upper"};
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  OptimizerSpec optimizer;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
};

boost::property_tree::ptree to_ptree(const ExperimentConfig& cfg);
// Unknown keys and unparsable values raise ParameterError naming the key.
ExperimentConfig from_ptree(const boost::property_tree::ptree& tree);

// Defaults, then the INI file (if given), then "section.key=value" overrides.
ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});
ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);
std::string config_text(const ExperimentConfig& cfg);

// Network spec for the configured family at the data geometry.
NetworkSpec model_spec(const ExperimentConfig& cfg, std::size_t channels, std::size_t size);

}  // namespace idlab
