#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "idlab/analysis.hpp"
#include "idlab/data_io.hpp"
#include "idlab/errors.hpp"
#include "oracle_util.hpp"

using namespace idlab;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("idlab_test_" + name); }

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Idx, RoundTrip) {
  Tensor imgs({3, 4, 5});
  for (std::size_t i = 0; i < imgs.size(); ++i) imgs[i] = static_cast<double>((i * 37) % 256);
  const auto ip = tmp("images.idx");
  const auto lp = tmp("labels.idx");
  write_idx_images(ip, imgs);
  write_idx_labels(lp, {7, 0, 9});
  const Tensor back = load_idx_images(ip);
  ASSERT_EQ(back.shape(), (Tensor::Shape{3, 1, 4, 5}));
  for (std::size_t i = 0; i < imgs.size(); ++i) EXPECT_EQ(back[i], imgs[i]);
  EXPECT_EQ(load_idx_labels(lp), (std::vector<int>{7, 0, 9}));
  EXPECT_THROW(load_idx_labels(ip), FormatError);

  auto bytes = slurp(ip);
  bytes.resize(bytes.size() - 3);
  std::ofstream(ip, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                            static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_idx_images(ip), FormatError);
  fs::remove(ip);
  fs::remove(lp);
}

TEST(Idx, BundledSubsetLoads) {
  const fs::path dir = fs::path(IDLAB_SOURCE_DIR) / "data" / "mnist";
  if (!fs::exists(dir / "t10k-labels-idx1-ubyte")) GTEST_SKIP() << "no MNIST files";
  const auto labels = load_idx_labels(dir / "t10k-labels-idx1-ubyte");
  const Tensor imgs = load_idx_images(dir / "t10k-images-idx3-ubyte");
  EXPECT_EQ(imgs.dim(0), labels.size());
  EXPECT_EQ(imgs.dim(2), 28u);
  for (int l : labels) EXPECT_TRUE(l >= 0 && l <= 9);
}

TEST(Normalize, KnownValuesAndRoundTrip) {
  const Tensor raw({2}, std::vector<double>{0.0, 255.0});
  const Tensor n = normalize(raw);
  EXPECT_NEAR(n[0], -0.42421, 1e-5);
  EXPECT_NEAR(n[1], 2.8215, 1e-4);
  EXPECT_LT(oracle::max_abs_diff(denormalize(n), raw), 1e-12);
}

TEST(Cifar, SyntheticBatch) {
  const auto p = tmp("cifar.bin");
  std::vector<std::uint8_t> buf(2 * 3073);
  for (std::size_t r = 0; r < 2; ++r) {
    buf[r * 3073] = static_cast<std::uint8_t>(3 + r);
    for (std::size_t i = 0; i < 3072; ++i) buf[r * 3073 + 1 + i] = static_cast<std::uint8_t>((i + r) % 251);
  }
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(buf.data()),
                                           static_cast<std::streamsize>(buf.size()));
  const CifarData d = load_cifar10(p);
  ASSERT_EQ(d.images.shape(), (Tensor::Shape{2, 3, 32, 32}));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 4}));
  // Channel-major planes: green plane starts at byte 1024.
  EXPECT_EQ(d.images[3072 + 1024], static_cast<double>((1024 + 1) % 251));
  buf.pop_back();
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(buf.data()),
                                           static_cast<std::streamsize>(buf.size()));
  EXPECT_THROW(load_cifar10(p), FormatError);
  fs::remove(p);
}

TEST(Pgm, ZeroMapsToMeanByte) {
  const ByteImage b = to_bytes(Tensor({1, 2, 2}), ValueMapping::normalized);
  for (auto v : b.pixels) EXPECT_EQ(v, 33);
  const ByteImage c = to_bytes(Tensor({1, 1, 2}, std::vector<double>{-10.0, 10.0}), ValueMapping::normalized);
  EXPECT_EQ(c.pixels[0], 0);
  EXPECT_EQ(c.pixels[1], 255);
}

TEST(Pgm, RoundTripGrayAndColor) {
  for (std::size_t ch : {1u, 3u}) {
    ByteImage img;
    img.channels = ch;
    img.height = 3;
    img.width = 4;
    for (std::size_t i = 0; i < ch * 12; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 11));
    const auto p = tmp("img.pnm");
    write_pgm(img, p);
    const ByteImage back = read_pgm(p);
    EXPECT_EQ(back.channels, ch);
    EXPECT_EQ(back.height, 3u);
    EXPECT_EQ(back.width, 4u);
    EXPECT_EQ(back.pixels, img.pixels);
    fs::remove(p);
  }
}

TEST(Png, Signature) {
  const auto p = tmp("img.png");
  write_image(oracle::random_tensor({1, 5, 5}, 1), p, ImageFormat::png);
  const auto bytes = slurp(p);
  ASSERT_GT(bytes.size(), 8u);
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(bytes[static_cast<std::size_t>(i)], sig[i]);
  fs::remove(p);
}

TEST(Grid, TileLayout) {
  ByteImage a;
  a.height = a.width = 2;
  a.pixels.assign(4, 7);
  const ByteImage g = tile_grid({{a, a}, {a, a}});
  // Separators on the outside too.
  EXPECT_EQ(g.height, 7u);
  EXPECT_EQ(g.width, 7u);
  EXPECT_EQ(g.pixels[0], 255);
  EXPECT_EQ(g.pixels[1 * 7 + 1], 7);
  EXPECT_EQ(g.pixels[1 * 7 + 3], 255);
  EXPECT_EQ(g.pixels[4 * 7 + 5], 7);
}

TEST(Patterns, Checkerboard) {
  Rng rng(0);
  const Tensor t = gen_pattern(parse_pattern("checkerboard(7)"), 14, 1, rng);
  const double hi = (1.0 - kMnistMean) / kMnistStd;
  const double lo = -kMnistMean / kMnistStd;
  std::size_t blocks_hi = 0;
  for (std::size_t bi = 0; bi < 2; ++bi)
    for (std::size_t bj = 0; bj < 2; ++bj) {
      const double v = t.at(0, bi * 7, bj * 7);
      for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(t.at(0, bi * 7 + i, bj * 7 + j), v);
      blocks_hi += v == hi;
      EXPECT_TRUE(v == hi || v == lo);
    }
  EXPECT_EQ(blocks_hi, 2u);
  EXPECT_EQ(t.at(0, 0, 0), hi);
}

TEST(Patterns, SolidAndParse) {
  Rng rng(0);
  const Tensor s = gen_pattern(parse_pattern("solid(0.5)"), 6, 3, rng);
  EXPECT_EQ(s.shape(), (Tensor::Shape{3, 6, 6}));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, (0.5 - kMnistMean) / kMnistStd);
  EXPECT_THROW(parse_pattern("checkerboard"), ParameterError);
  EXPECT_THROW(parse_pattern("spiral(3)"), ParameterError);
  EXPECT_EQ(pattern_label(parse_pattern("digit_blend(3,17,0.5)")), "digit_blend(3,17,0.5)");
}

TEST(Patterns, DigitBlendMidpoint) {
  PatternSpec p = parse_pattern("digit_blend(0,1,0.5)");
  p.a = oracle::random_tensor({1, 4, 4}, 2);
  p.b = oracle::random_tensor({1, 4, 4}, 3);
  Rng rng(0);
  const Tensor m = gen_pattern(p, 4, 1, rng);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], 0.5 * (p.a[i] + p.b[i]), 1e-15);
  p.b = Tensor();
  EXPECT_THROW(gen_pattern(p, 4, 1, rng), ParameterError);
}

TEST(Patterns, NoiseIsSeeded) {
  Rng a(5), b(5);
  const PatternSpec p = parse_pattern("gaussian_noise");
  EXPECT_EQ(gen_pattern(p, 8, 1, a), gen_pattern(p, 8, 1, b));
}

TEST(Resample, ReplicateAndResize) {
  const Tensor g = oracle::random_tensor({1, 3, 3}, 4);
  const Tensor r = replicate_channels(g, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(r[c * 9 + i], g[i]);

  const Tensor x = oracle::random_tensor({2, 6, 4}, 5);
  EXPECT_LT(oracle::max_abs_diff(resize_area(x, 6, 4), x), 1e-15);
  // Halving averages 2x2 blocks.
  const Tensor h = resize_area(x, 3, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const double avg = 0.25 * (x.at(c, 2 * i, 2 * j) + x.at(c, 2 * i + 1, 2 * j) + x.at(c, 2 * i, 2 * j + 1) +
                                   x.at(c, 2 * i + 1, 2 * j + 1));
        EXPECT_NEAR(h.at(c, i, j), avg, 1e-14);
      }
  // Upsampling a constant stays constant; the mean is preserved in general.
  const Tensor up = resize_area(Tensor({1, 3, 3}, 2.0), 7, 5);
  for (double v : up.values()) EXPECT_NEAR(v, 2.0, 1e-14);
  const Tensor y = oracle::random_tensor({1, 5, 5}, 6);
  const Tensor z = resize_area(y, 7, 3);
  double my = 0.0, mz = 0.0;
  for (double v : y.values()) my += v / 25.0;
  for (double v : z.values()) mz += v / 21.0;
  EXPECT_NEAR(my, mz, 1e-14);
}

TEST(Csv, FormatAndQuoting) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  const auto p = tmp("t.csv");
  write_csv(p, {"a", "b"}, {{"1", "x,y"}, {"2", "say \"hi\""}});
  const auto bytes = slurp(p);
  const std::string text(bytes.begin(), bytes.end());
  EXPECT_EQ(text, "a,b\n1,\"x,y\"\n2,\"say \"\"hi\"\"\"\n");
  fs::remove(p);
}
