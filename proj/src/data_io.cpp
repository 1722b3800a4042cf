#include "idlab/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "idlab/errors.hpp"

namespace idlab {
namespace {

constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& buf, std::size_t at, const std::filesystem::path& path) {
  if (buf.size() < at + 4) throw FormatError(path.string() + ": truncated header", buf.size());
  return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) | (std::uint32_t{buf[at + 2]} << 8) |
         buf[at + 3];
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::uint8_t to_byte(double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParameterError("bad integer '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw ParameterError("bad number '" + std::string(s) + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ParameterError("bad number '" + std::string(s) + "'");
  }
}

std::string_view kind_name(PatternKind k) {
  switch (k) {
    case PatternKind::digit_blend: return "digit_blend";
    case PatternKind::gaussian_noise: return "gaussian_noise";
    case PatternKind::uniform_noise: return "uniform_noise";
    case PatternKind::checkerboard: return "checkerboard";
    case PatternKind::h_gradient: return "h_gradient";
    case PatternKind::v_gradient: return "v_gradient";
    case PatternKind::solid: return "solid";
    case PatternKind::centered_square: return "centered_square";
    case PatternKind::circle: return "circle";
  }
  return "?";
}

void png_chunk(std::ostream& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  out.write(type, 4);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

void check_written(const std::ofstream& f, const std::filesystem::path& path) {
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

IdxData load_idx(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  const std::uint32_t magic = be32(buf, 0, path);
  IdxData out;
  if (magic == kIdxLabels) {
    const std::size_t n = be32(buf, 4, path);
    if (buf.size() < 8 + n) throw FormatError(path.string() + ": truncated label data", buf.size());
    out.labels.assign(buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(n));
    return out;
  }
  if (magic == kIdxImages) {
    const std::size_t n = be32(buf, 4, path);
    const std::size_t h = be32(buf, 8, path);
    const std::size_t w = be32(buf, 12, path);
    if (n == 0 || h == 0 || w == 0) throw FormatError(path.string() + ": zero dimension", 4);
    if (buf.size() < 16 + n * h * w) throw FormatError(path.string() + ": truncated image data", buf.size());
    std::vector<double> data(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(n * h * w));
    out.images = Tensor({n, 1, h, w}, std::move(data));
    return out;
  }
  std::ostringstream msg;
  msg << path.string() << ": bad IDX magic 0x" << std::hex << magic;
  throw FormatError(msg.str(), 0);
}

Tensor load_idx_images(const std::filesystem::path& path) {
  IdxData d = load_idx(path);
  if (!d.images) throw FormatError(path.string() + ": not an image file", 0);
  return std::move(*d.images);
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  IdxData d = load_idx(path);
  if (d.images) throw FormatError(path.string() + ": not a label file", 0);
  return d.labels;
}

void write_idx_images(const std::filesystem::path& path, const Tensor& images) {
  if (images.rank() != 3 && !(images.rank() == 4 && images.dim(1) == 1)) {
    throw ShapeError("IDX images must be N x H x W or N x 1 x H x W");
  }
  auto f = open_out(path);
  put_be32(f, kIdxImages);
  put_be32(f, static_cast<std::uint32_t>(images.dim(0)));
  put_be32(f, static_cast<std::uint32_t>(images.dim(images.rank() - 2)));
  put_be32(f, static_cast<std::uint32_t>(images.dim(images.rank() - 1)));
  for (double v : images.values()) f.put(static_cast<char>(to_byte(v)));
  check_written(f, path);
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  auto f = open_out(path);
  put_be32(f, kIdxLabels);
  put_be32(f, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) f.put(static_cast<char>(l));
  check_written(f, path);
}

CifarData load_cifar10(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  if (buf.empty() || buf.size() % kCifarRecord != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(buf.size()) + " is not a multiple of 3073",
                      buf.size() - buf.size() % kCifarRecord);
  }
  const std::size_t n = buf.size() / kCifarRecord;
  CifarData out{Tensor({n, 3, 32, 32}), {}};
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = buf.data() + r * kCifarRecord;
    if (rec[0] > 9) throw FormatError(path.string() + ": label out of range", r * kCifarRecord);
    out.labels.push_back(rec[0]);
    std::copy(rec + 1, rec + kCifarRecord, out.images.data() + r * (kCifarRecord - 1));
  }
  return out;
}

Tensor normalize(const Tensor& raw, double mean, double std) {
  Tensor out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] / 255.0 - mean) / std;
  return out;
}

Tensor denormalize(const Tensor& norm, double mean, double std) {
  Tensor out(norm.shape());
  for (std::size_t i = 0; i < norm.size(); ++i) out[i] = (norm[i] * std + mean) * 255.0;
  return out;
}

Tensor batch_item(const Tensor& batch, std::size_t i) {
  if (batch.rank() != 4) throw ShapeError("batch must be N x C x H x W");
  if (i >= batch.dim(0)) throw ShapeError("batch index " + std::to_string(i) + " out of range");
  const std::size_t sz = batch.size() / batch.dim(0);
  return Tensor({batch.dim(1), batch.dim(2), batch.dim(3)},
                std::vector<double>(batch.data() + i * sz, batch.data() + (i + 1) * sz));
}

Tensor replicate_channels(const Tensor& gray, std::size_t channels) {
  if (gray.rank() != 3 || gray.dim(0) != 1) throw ShapeError("replicate_channels expects 1 x H x W");
  const std::size_t p = gray.size();
  Tensor out({channels, gray.dim(1), gray.dim(2)});
  for (std::size_t c = 0; c < channels; ++c) std::copy(gray.data(), gray.data() + p, out.data() + c * p);
  return out;
}

namespace {

// Row o averages source interval [o * n / m, (o + 1) * n / m).
Tensor box_weights(std::size_t m, std::size_t n) {
  Tensor w({m, n});
  const double scale = static_cast<double>(n) / static_cast<double>(m);
  for (std::size_t o = 0; o < m; ++o) {
    const double lo = static_cast<double>(o) * scale;
    const double hi = lo + scale;
    for (std::size_t s = static_cast<std::size_t>(lo); s < n && static_cast<double>(s) < hi; ++s) {
      const double overlap = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w.at(o, s) = overlap / scale;
    }
  }
  return w;
}

}  // namespace

Tensor resize_area(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ShapeError("resize_area expects C x H x W, got " + shape_string(image.shape()));
  if (height == 0 || width == 0) throw ParameterError("resize_area: target size must be positive");
  const std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  if (h == height && w == width) return image;
  const Tensor rh = box_weights(height, h);
  const Tensor rwt = transpose(box_weights(width, w));
  Tensor out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch) {
    Tensor plane({h, w});
    std::copy(image.data() + ch * h * w, image.data() + (ch + 1) * h * w, plane.data());
    const Tensor r = matmul(matmul(rh, plane), rwt);
    std::copy(r.data(), r.data() + height * width, out.data() + ch * height * width);
  }
  return out;
}

PatternSpec parse_pattern(std::string_view text) {
  const auto open = text.find('(');
  const std::string_view name = text.substr(0, open);
  std::vector<std::string_view> args;
  if (open != std::string_view::npos) {
    if (text.back() != ')') throw ParameterError("unterminated pattern '" + std::string(text) + "'");
    std::string_view inner = text.substr(open + 1, text.size() - open - 2);
    while (!inner.empty()) {
      const auto comma = inner.find(',');
      args.push_back(inner.substr(0, comma));
      if (comma == std::string_view::npos) break;
      inner.remove_prefix(comma + 1);
    }
  }
  PatternSpec p;
  bool found = false;
  for (int k = 0; k <= static_cast<int>(PatternKind::circle); ++k) {
    if (kind_name(static_cast<PatternKind>(k)) == name) {
      p.kind = static_cast<PatternKind>(k);
      found = true;
    }
  }
  if (!found) throw ParameterError("unknown pattern kind '" + std::string(name) + "'");
  auto want = [&](std::size_t n) {
    if (args.size() != n) {
      throw ParameterError("pattern " + std::string(name) + " takes " + std::to_string(n) + " argument(s)");
    }
  };
  switch (p.kind) {
    case PatternKind::digit_blend:
      want(3);
      p.index_a = parse_size(args[0]);
      p.index_b = parse_size(args[1]);
      p.param = parse_real(args[2]);
      break;
    case PatternKind::checkerboard:
    case PatternKind::solid:
    case PatternKind::centered_square:
    case PatternKind::circle:
      want(1);
      p.param = parse_real(args[0]);
      break;
    default:
      want(0);
  }
  return p;
}

std::string pattern_label(const PatternSpec& p) {
  std::string s(kind_name(p.kind));
  switch (p.kind) {
    case PatternKind::digit_blend:
      return s + "(" + std::to_string(p.index_a) + "," + std::to_string(p.index_b) + "," + format_double(p.param) + ")";
    case PatternKind::checkerboard:
    case PatternKind::solid:
    case PatternKind::centered_square:
    case PatternKind::circle:
      return s + "(" + format_double(p.param) + ")";
    default:
      return s;
  }
}

Tensor gen_pattern(const PatternSpec& p, std::size_t size, std::size_t channels, Rng& rng) {
  if (size == 0 || channels == 0) throw ParameterError("pattern size and channels must be positive");
  const Tensor::Shape shape{channels, size, size};
  const double n = static_cast<double>(size);
  auto from_intensity = [&](auto&& f) {
    Tensor img(shape);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) img.at(c, i, j) = (f(i, j) - kMnistMean) / kMnistStd;
    return img;
  };
  switch (p.kind) {
    case PatternKind::digit_blend: {
      if (p.a.empty() || p.b.empty()) throw ParameterError("digit_blend needs both digits resolved");
      require_same_shape(p.a, p.b, "digit_blend");
      if (p.a.shape() != shape) throw ShapeError("digit_blend digits must be " + shape_string(shape));
      Tensor out(shape);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.param * p.a[i] + (1.0 - p.param) * p.b[i];
      return out;
    }
    case PatternKind::gaussian_noise:
      return rng.sample(Gaussian{0.0, 1.0}, shape);
    case PatternKind::uniform_noise: {
      Tensor u = rng.sample(Uniform{0.0, 1.0}, shape);
      for (auto& v : u.values()) v = (v - kMnistMean) / kMnistStd;
      return u;
    }
    case PatternKind::checkerboard: {
      const auto cell = static_cast<std::size_t>(p.param);
      if (cell == 0) throw ParameterError("checkerboard cell must be >= 1");
      return from_intensity([&](std::size_t i, std::size_t j) { return ((i / cell + j / cell) % 2 == 0) ? 1.0 : 0.0; });
    }
    case PatternKind::h_gradient:
      return from_intensity([&](std::size_t, std::size_t j) { return size > 1 ? j / (n - 1) : 0.0; });
    case PatternKind::v_gradient:
      return from_intensity([&](std::size_t i, std::size_t) { return size > 1 ? i / (n - 1) : 0.0; });
    case PatternKind::solid:
      return from_intensity([&](std::size_t, std::size_t) { return p.param; });
    case PatternKind::centered_square: {
      const double half = p.param * n / 2.0;
      return from_intensity([&](std::size_t i, std::size_t j) {
        const double di = std::abs(i + 0.5 - n / 2.0);
        const double dj = std::abs(j + 0.5 - n / 2.0);
        return (di < half && dj < half) ? 1.0 : 0.0;
      });
    }
    case PatternKind::circle: {
      const double r = p.param * n / 2.0;
      return from_intensity([&](std::size_t i, std::size_t j) {
        const double di = i + 0.5 - n / 2.0;
        const double dj = j + 0.5 - n / 2.0;
        return di * di + dj * dj < r * r ? 1.0 : 0.0;
      });
    }
  }
  throw ParameterError("unknown pattern kind");
}

ValueMapping parse_value_mapping(std::string_view text) {
  if (text == "normalized") return ValueMapping::normalized;
  if (text == "unit") return ValueMapping::unit;
  if (text == "minmax") return ValueMapping::minmax;
  throw ParameterError("unknown value mapping '" + std::string(text) + "'");
}

ByteImage to_bytes(const Tensor& image, ValueMapping mapping) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("images must be 1 x H x W or 3 x H x W, got " + shape_string(image.shape()));
  }
  ByteImage out{image.dim(0), image.dim(1), image.dim(2), {}};
  out.pixels.resize(image.size());
  double lo = 0.0;
  double hi = 1.0;
  if (mapping == ValueMapping::minmax) {
    lo = *std::min_element(image.values().begin(), image.values().end());
    hi = *std::max_element(image.values().begin(), image.values().end());
    if (hi == lo) hi = lo + 1.0;
  }
  const std::size_t plane = out.height * out.width;
  for (std::size_t c = 0; c < out.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = image[c * plane + p];
      double b = 0.0;
      switch (mapping) {
        case ValueMapping::normalized: b = 255.0 * (v * kMnistStd + kMnistMean); break;
        case ValueMapping::unit: b = 255.0 * v; break;
        case ValueMapping::minmax: b = 255.0 * (v - lo) / (hi - lo); break;
      }
      out.pixels[p * out.channels + c] = to_byte(b);
    }
  }
  return out;
}

ByteImage tile_grid(const std::vector<std::vector<ByteImage>>& rows, std::uint8_t sep) {
  if (rows.empty() || rows[0].empty()) throw ShapeError("empty image grid");
  const ByteImage& ref = rows[0][0];
  std::size_t cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, r.size());
    for (const auto& img : r) {
      if (img.channels != ref.channels || img.height != ref.height || img.width != ref.width) {
        throw ShapeError("grid images must share one size");
      }
    }
  }
  ByteImage out{ref.channels, rows.size() * (ref.height + 1) + 1, cols * (ref.width + 1) + 1, {}};
  out.pixels.assign(out.height * out.width * out.channels, sep);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const ByteImage& img = rows[r][c];
      const std::size_t y0 = 1 + r * (ref.height + 1);
      const std::size_t x0 = 1 + c * (ref.width + 1);
      for (std::size_t i = 0; i < img.height; ++i) {
        std::copy_n(img.pixels.data() + i * img.width * img.channels, img.width * img.channels,
                    out.pixels.data() + ((y0 + i) * out.width + x0) * out.channels);
      }
    }
  }
  return out;
}

void write_pgm(const ByteImage& img, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  check_written(f, path);
}

void write_png(const ByteImage& img, const std::filesystem::path& path) {
  const std::size_t stride = img.width * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve(img.height * (stride + 1));
  for (std::size_t i = 0; i < img.height; ++i) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(i * stride),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size())) != Z_OK) {
    throw IoError("zlib compression failed for " + path.string());
  }
  z.resize(zlen);
  std::vector<std::uint8_t> ihdr(13);
  for (int k = 0; k < 4; ++k) {
    ihdr[k] = static_cast<std::uint8_t>(img.width >> (24 - 8 * k));
    ihdr[4 + k] = static_cast<std::uint8_t>(img.height >> (24 - 8 * k));
  }
  ihdr[8] = 8;
  ihdr[9] = img.channels == 3 ? 2 : 0;
  auto f = open_out(path);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);
  png_chunk(f, "IHDR", ihdr);
  png_chunk(f, "IDAT", z);
  png_chunk(f, "IEND", {});
  check_written(f, path);
}

ByteImage read_pgm(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(buf[pos])) ++pos;
    if (start == pos) throw FormatError(path.string() + ": truncated header", pos);
    return std::string(buf.begin() + static_cast<std::ptrdiff_t>(start), buf.begin() + static_cast<std::ptrdiff_t>(pos));
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw FormatError(path.string() + ": not a binary PGM/PPM", 0);
  ByteImage img;
  img.channels = magic == "P6" ? 3 : 1;
  img.width = parse_size(token());
  img.height = parse_size(token());
  if (parse_size(token()) != 255) throw FormatError(path.string() + ": only maxval 255 is supported", pos);
  ++pos;
  const std::size_t n = img.width * img.height * img.channels;
  if (buf.size() < pos + n) throw FormatError(path.string() + ": truncated pixel data", buf.size());
  img.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_image(const Tensor& image, const std::filesystem::path& path, ImageFormat format, ValueMapping mapping) {
  const ByteImage b = to_bytes(image, mapping);
  if (format == ImageFormat::pgm) {
    write_pgm(b, path);
  } else {
    write_png(b, path);
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto f = open_out(path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) f << ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\n") == std::string::npos) {
        f << c;
        continue;
      }
      f << '"';
      for (char ch : c) f << (ch == '"' ? "\"\"" : std::string(1, ch));
      f << '"';
    }
    f << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  check_written(f, path);
}

}  // namespace idlab
