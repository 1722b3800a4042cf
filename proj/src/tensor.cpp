#include "idlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "idlab/errors.hpp"
#include "idlab/kernels.hpp"

namespace idlab {

std::size_t shape_size(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Tensor::Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(context) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), std::move(data_));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                     shape_string(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  kernels::active().gemm(kernels::Trans::no, kernels::Trans::no, a.rows(), b.cols(), a.cols(), 1.0,
                         a.data(), a.cols(), b.data(), b.cols(), 0.0, c.data(), c.cols());
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + shape_string(a.shape()));
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  c += b;
  return c;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  c -= b;
  return c;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor c = a;
  for (auto& v : c.values()) v *= s;
  return c;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor& operator-=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: sizes " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return kernels::active().dot(a.data(), b.data(), a.size());
}

double frobenius_norm(const Tensor& a) {
  // Scaled accumulation so huge or tiny entries do not overflow/underflow.
  const double scale = max_abs(a);
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (double v : a.values()) {
    const double s = v / scale;
    acc += s * s;
  }
  return scale * std::sqrt(acc);
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

double mean(const Tensor& a) { return a.empty() ? 0.0 : sum(a) / static_cast<double>(a.size()); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double relative_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "relative_error");
  const double diff = frobenius_norm(a - b);
  const double ref = frobenius_norm(b);
  return ref == 0.0 ? diff : diff / ref;
}

Tensor row(const Tensor& m, std::size_t r) {
  if (m.rank() != 2 || r >= m.rows()) throw ShapeError("row index out of range");
  Tensor out({1, m.cols()});
  std::copy_n(m.data() + r * m.cols(), m.cols(), out.data());
  return out;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> index) {
  if (m.rank() != 2) throw ShapeError("gather_rows expects a matrix");
  if (index.empty()) throw ShapeError("gather_rows: empty index set");
  Tensor out({index.size(), m.cols()});
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= m.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(m.data() + index[k] * m.cols(), m.cols(), out.data() + k * m.cols());
  }
  return out;
}

Tensor outer(const Tensor& u, const Tensor& v) {
  Tensor out({u.size(), v.size()});
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out.at(i, j) = u[i] * v[j];
  return out;
}

}  // namespace idlab
