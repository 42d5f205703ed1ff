#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lexki/error.hpp"

namespace lexki::nn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major buffer. Most of the library works on rank-2 tensors; a
// rank-1 tensor of length n behaves as a 1 x n row where a matrix is needed.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : shape_{rows, cols}, data_(rows * cols, fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      fail("ShapeMismatch", "shape ", shape_str(shape_), " does not match ", data_.size(),
           " elements");
    }
  }

  static Tensor row(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor(Shape{1, n}, std::move(values));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1, 1}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols() + c];
  }

  std::span<T> row_span(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const T> row_span(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }

  T item() const {
    if (data_.size() != 1) fail("NotScalar", "tensor of shape ", shape_str(shape_));
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& o) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// C (m x n) = op(A) * op(B), optionally accumulating into C. op(X) is X or
// its transpose. Leading dimensions are the row strides of the stored arrays.
// Summation order is fixed, so results are reproducible for a given build.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
          bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
  }
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      const T* arow = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = arow[p];
        if (av == T{0}) continue;
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = a + i * lda;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * ldb;
        T acc[8] = {};
        std::size_t p = 0;
        for (; p + 8 <= k; p += 8) {
          for (std::size_t u = 0; u < 8; ++u) acc[u] += arow[p + u] * brow[p + u];
        }
        T sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
        for (; p < k; ++p) sum += arow[p] * brow[p];
        c[i * ldc + j] += sum;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* arow = a + p * lda;
      const T* brow = b + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = arow[i];
        if (av == T{0}) continue;
        T* crow = c + i * ldc;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        T sum{0};
        for (std::size_t p = 0; p < k; ++p) sum += a[p * lda + i] * b[j * ldb + p];
        c[i * ldc + j] += sum;
      }
    }
  }
}

}  // namespace lexki::nn
