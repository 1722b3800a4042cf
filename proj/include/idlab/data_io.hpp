#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idlab/random.hpp"
#include "idlab/tensor.hpp"

namespace idlab {

inline constexpr double kMnistMean = 0.1307;
inline constexpr double kMnistStd = 0.3081;

// IDX files (MNIST, Fashion-MNIST). Images come back as N x 1 x H x W with
// raw 0..255 values; label files fill `labels` only.
struct IdxData {
  std::optional<Tensor> images;
  std::vector<int> labels;
};
IdxData load_idx(const std::filesystem::path& path);
Tensor load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);
// Writers used by tests and tools. images: N x H x W or N x 1 x H x W bytes.
void write_idx_images(const std::filesystem::path& path, const Tensor& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// CIFAR-10 binary batches: N x 3 x 32 x 32, raw 0..255.
struct CifarData {
  Tensor images;
  std::vector<int> labels;
};
CifarData load_cifar10(const std::filesystem::path& path);

// v -> (v / 255 - mean) / std and back.
Tensor normalize(const Tensor& raw, double mean = kMnistMean, double std = kMnistStd);
Tensor denormalize(const Tensor& norm, double mean = kMnistMean, double std = kMnistStd);

// Item i of an N x C x H x W batch as C x H x W.
Tensor batch_item(const Tensor& batch, std::size_t i);
// Repeats a 1 x H x W image across `channels` channels.
Tensor replicate_channels(const Tensor& gray, std::size_t channels);
// Box-filter resampling of a C x H x W image to C x height x width; each
// output pixel averages the source area it covers.
Tensor resize_area(const Tensor& image, std::size_t height, std::size_t width);

enum class PatternKind {
  digit_blend,
  gaussian_noise,
  uniform_noise,
  checkerboard,
  h_gradient,
  v_gradient,
  solid,
  centered_square,
  circle,
};

struct PatternSpec {
  PatternKind kind = PatternKind::solid;
  double param = 0.0;  // cell size, level, fraction or blend weight
  // digit_blend operands: dataset indices when parsed, images when resolved.
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  Tensor a;
  Tensor b;
};

// Parses "checkerboard(4)", "solid(0.5)", "digit_blend(3,17,0.5)", ...
PatternSpec parse_pattern(std::string_view text);
std::string pattern_label(const PatternSpec& p);

// Normalised-range pattern of shape channels x size x size. Geometric
// patterns are drawn as 0..1 intensities and then normalised; noise is drawn
// directly in normalised units; digit_blend mixes the resolved normalised
// digits a and b as lambda * a + (1 - lambda) * b.
Tensor gen_pattern(const PatternSpec& p, std::size_t size, std::size_t channels, Rng& rng);

enum class ValueMapping { normalized, unit, minmax };
enum class ImageFormat { pgm, png };

ValueMapping parse_value_mapping(std::string_view text);

struct ByteImage {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // interleaved rows (HWC)
};

// normalized: byte = clamp(round(255 * (v * std + mean))); unit: v in [0, 1];
// minmax: stretch the tensor's own range.
ByteImage to_bytes(const Tensor& image, ValueMapping mapping);
// Tiles rows of equally sized images with 1-pixel separators of `sep`.
ByteImage tile_grid(const std::vector<std::vector<ByteImage>>& rows, std::uint8_t sep = 255);

void write_pgm(const ByteImage& img, const std::filesystem::path& path);  // P5 / P6
void write_png(const ByteImage& img, const std::filesystem::path& path);
ByteImage read_pgm(const std::filesystem::path& path);
void write_image(const Tensor& image, const std::filesystem::path& path, ImageFormat format,
                 ValueMapping mapping = ValueMapping::normalized);

std::string format_double(double v);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace idlab
