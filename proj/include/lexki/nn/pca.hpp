#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "lexki/error.hpp"
#include "lexki/nn/tensor.hpp"

namespace lexki::nn {

struct SymmetricEigen {
  std::vector<double> values;                 // descending
  std::vector<std::vector<double>> vectors;   // vectors[k] pairs with values[k]
};

// Cyclic Jacobi rotations on a dense symmetric matrix (row-major, n x n).
inline SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, int max_sweeps = 100) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return at(x, x) > at(y, y); });
  SymmetricEigen out;
  for (std::size_t k : order) {
    out.values.push_back(at(k, k));
    std::vector<double> vec(n);
    for (std::size_t i = 0; i < n; ++i) vec[i] = v[i * n + k];
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

// Projects centered rows onto the two leading principal axes. Each axis is
// signed so its largest-magnitude loading is positive.
template <typename T>
Tensor<T> pca_2d(const Tensor<T>& rows) {
  const std::size_t n = rows.rows(), d = rows.cols();
  if (n < 2) fail("DegenerateInput", "pca_2d needs at least 2 rows, got ", n);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += static_cast<double>(rows(i, j));
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> centered(n * d);
  bool varies = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      centered[i * d + j] = static_cast<double>(rows(i, j)) - mean[j];
      if (rows(i, j) != rows(0, j)) varies = true;
    }
  if (!varies) fail("DegenerateInput", "all ", n, " rows are identical");
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += centered[i * d + a] * centered[i * d + b];
  for (double& c : cov) c /= static_cast<double>(n - 1);
  SymmetricEigen eig = jacobi_eigen(std::move(cov), d);
  Tensor<T> out(n, 2);
  for (std::size_t k = 0; k < 2 && k < d; ++k) {
    std::vector<double>& axis = eig.vectors[k];
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(axis[j]) > std::abs(axis[big])) big = j;
    if (axis[big] < 0)
      for (double& x : axis) x = -x;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += centered[i * d + j] * axis[j];
      out(i, k) = static_cast<T>(s);
    }
  }
  return out;
}

}  // namespace lexki::nn
