#pragma once

// Brute-force reference implementations used as test oracles. They share no
// code with the library beyond the Tensor container.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "idlab/tensor.hpp"

namespace oracle {

using idlab::Tensor;

inline Tensor random_tensor(Tensor::Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = nd(gen);
  return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

inline Tensor naive_transpose(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

// Solves A X = B by Gaussian elimination with partial pivoting.
inline Tensor gauss_solve(Tensor a, Tensor b) {
  const std::size_t n = a.dim(0), m = b.dim(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    if (a.at(piv, col) == 0.0) throw std::runtime_error("singular");
    for (std::size_t j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
    for (std::size_t j = 0; j < m; ++j) std::swap(b.at(col, j), b.at(piv, j));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) / a.at(col, col);
      for (std::size_t j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      for (std::size_t j = 0; j < m; ++j) b.at(r, j) -= f * b.at(col, j);
    }
  }
  Tensor x({n, m});
  for (std::size_t jj = 0; jj < m; ++jj)
    for (std::size_t i = n; i-- > 0;) {
      double s = b.at(i, jj);
      for (std::size_t j = i + 1; j < n; ++j) s -= a.at(i, j) * x.at(j, jj);
      x.at(i, jj) = s / a.at(i, i);
    }
  return x;
}

// Zero-padded, stride-1 cross-correlation: w is Co x Ci x K x K.
inline Tensor direct_conv(const Tensor& x, const Tensor& w, const std::vector<double>& bias) {
  const std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Tensor y({co, h, wd});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < wd; ++j) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t p = 0; p < kh; ++p)
            for (std::size_t q = 0; q < kw; ++q) {
              const long ii = static_cast<long>(i + p) - static_cast<long>(kh / 2);
              const long jj = static_cast<long>(j + q) - static_cast<long>(kw / 2);
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(wd)) continue;
              s += w[((o * ci + c) * kh + p) * kw + q] * x.at(c, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
            }
        y.at(o, i, j) = s;
      }
  return y;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double frob(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace oracle
