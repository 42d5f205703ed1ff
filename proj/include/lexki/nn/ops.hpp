#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "lexki/nn/rng.hpp"
#include "lexki/nn/tape.hpp"
#include "lexki/nn/tensor.hpp"

// Differentiable operations over rank-2 tensors. Each op computes its forward
// value eagerly and, when the tape records, registers a closure that pushes
// the node's gradient into its parents.
namespace lexki::nn {

namespace detail {

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape(), std::vector<T>(t.numel(), T{0}));
}

inline Shape mat(std::size_t r, std::size_t c) { return Shape{r, c}; }

template <typename T>
void check_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail("ShapeMismatch", op, ": ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  }
}

}  // namespace detail

// op(a) * op(b) where op transposes when the flag is set.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_a = false, bool trans_b = false) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const std::size_t m = trans_a ? A.cols() : A.rows();
  const std::size_t k = trans_a ? A.rows() : A.cols();
  const std::size_t kb = trans_b ? B.cols() : B.rows();
  const std::size_t n = trans_b ? B.rows() : B.cols();
  if (k != kb) {
    fail("ShapeMismatch", "matmul: ", shape_str(A.shape()), trans_a ? "^T" : "", " x ",
         shape_str(B.shape()), trans_b ? "^T" : "");
  }
  Tensor<T> out(m, n);
  gemm(trans_a, trans_b, m, n, k, A.data(), A.cols(), B.data(), B.cols(), out.data(), n, false);
  return tape.emit("matmul", std::move(out),
                   [ai = a.id, bi = b.id, trans_a, trans_b, m, n, k](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.grad(self);
                     const Tensor<T>& A = t.value(ai);
                     const Tensor<T>& B = t.value(bi);
                     // dA
                     Tensor<T>& ga = t.grad(ai);
                     if (!trans_a) {
                       // dA (m x k) = g op(B)^T
                       gemm(false, !trans_b, m, k, n, g.data(), n, B.data(), B.cols(), ga.data(),
                            k, true);
                     } else {
                       // dA (k x m) = op(B) g^T
                       gemm(trans_b, true, k, m, n, B.data(), B.cols(), g.data(), n, ga.data(), m,
                            true);
                     }
                     Tensor<T>& gb = t.grad(bi);
                     if (!trans_b) {
                       // dB (k x n) = op(A)^T g
                       gemm(!trans_a, false, k, n, m, A.data(), A.cols(), g.data(), n, gb.data(),
                            n, true);
                     } else {
                       // dB (n x k) = g^T op(A)
                       gemm(true, trans_a, n, k, m, g.data(), n, A.data(), A.cols(), gb.data(), k,
                            true);
                     }
                   });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = A(i, j);
  return a.tape->emit("transpose", std::move(out), [ai = a.id, r, c](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(j, i);
  });
}

// Elementwise a + b. b may also be a single row broadcast over a's rows.
template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
  if (!broadcast) detail::check_same("add", A, B);
  Tensor<T> out(A.rows(), A.cols());
  const std::size_t c = A.cols();
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] + B[broadcast ? i % c : i];
  return a.tape->emit("add", std::move(out),
                      [ai = a.id, bi = b.id, broadcast, c](Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                        Tensor<T>& gb = t.grad(bi);
                        for (std::size_t i = 0; i < g.numel(); ++i) gb[broadcast ? i % c : i] += g[i];
                      });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::check_same("sub", A, B);
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] - B[i];
  return a.tape->emit("sub", std::move(out), [ai = a.id, bi = b.id](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    Tensor<T>& gb = t.grad(bi);
    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  detail::check_same("mul", A, B);
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] * B[i];
  return a.tape->emit("mul", std::move(out), [ai = a.id, bi = b.id](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& A = t.value(ai);
    const Tensor<T>& B = t.value(bi);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * B[i];
    Tensor<T>& gb = t.grad(bi);
    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * A[i];
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] * factor;
  return a.tape->emit("scale", std::move(out), [ai = a.id, factor](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] + c;
  return a.tape->emit("add_scalar", std::move(out), [ai = a.id](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  const Tensor<T>& A = a.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) out[i] = A[i] > T{0} ? A[i] : T{0};
  return a.tape->emit("relu", std::move(out), [ai = a.id](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& A = t.value(ai);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (A[i] > T{0}) ga[i] += g[i];
  });
}

// Selects rows of a by index (repeats allowed); gradients scatter-add back.
template <typename T>
Var<T> gather_rows(Var<T> a, std::span<const std::size_t> rows, const char* op = "gather_rows") {
  const Tensor<T>& A = a.value();
  const std::size_t c = A.cols();
  Tensor<T> out(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) {
      fail("ShapeMismatch", op, ": row ", rows[i], " out of range for ", shape_str(A.shape()));
    }
    std::copy_n(A.data() + rows[i] * c, c, out.data() + i * c);
  }
  return a.tape->emit(op, std::move(out),
                      [ai = a.id, idx = std::vector<std::size_t>(rows.begin(), rows.end()), c](
                          Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                          T* dst = ga.data() + idx[i] * c;
                          const T* src = g.data() + i * c;
                          for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                        }
                      });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const std::size_t> ids) {
  return gather_rows(table, ids, "embedding");
}

// Row-wise softmax. With causal set, entry (i, j) is masked for j > i.
template <typename T>
Var<T> softmax(Var<T> a, bool causal = false) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t lim = causal ? std::min(c, i + 1) : c;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < lim; ++j) mx = std::max(mx, A(i, j));
    T sum{0};
    for (std::size_t j = 0; j < lim; ++j) {
      out(i, j) = std::exp(A(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < lim; ++j) out(i, j) /= sum;
  }
  return a.tape->emit("softmax", std::move(out), [ai = a.id, r, c](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < r; ++i) {
      T dot{0};
      for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

template <typename T>
Var<T> log_softmax(Var<T> a) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, A(i, j));
    T sum{0};
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(A(i, j) - mx);
    const T lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = A(i, j) - lse;
  }
  return a.tape->emit("log_softmax", std::move(out), [ai = a.id, r, c](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < r; ++i) {
      T gsum{0};
      for (std::size_t j = 0; j < c; ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(i, j) - std::exp(y(i, j)) * gsum;
    }
  });
}

// Row-wise layer normalization with learned gain and bias rows.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& G = gain.value();
  const Tensor<T>& B = bias.value();
  const std::size_t r = X.rows(), c = X.cols();
  if (G.numel() != c || B.numel() != c) {
    fail("ShapeMismatch", "layer_norm: input ", shape_str(X.shape()), " gain ",
         shape_str(G.shape()), " bias ", shape_str(B.shape()));
  }
  Tensor<T> out(r, c);
  Tensor<T> xhat(r, c);
  std::vector<T> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    T mean{0};
    for (std::size_t j = 0; j < c; ++j) mean += X(i, j);
    mean /= static_cast<T>(c);
    T var{0};
    for (std::size_t j = 0; j < c; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<T>(c);
    inv_std[i] = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (X(i, j) - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * G[j] + B[j];
    }
  }
  const bool rec = x.tape->recording();
  return x.tape->emit(
      "layer_norm", std::move(out),
      [xi = x.id, gi = gain.id, bi = bias.id, r, c, xhat = rec ? std::move(xhat) : Tensor<T>{},
       inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& G = t.value(gi);
        Tensor<T>& gx = t.grad(xi);
        Tensor<T>& gg = t.grad(gi);
        Tensor<T>& gb = t.grad(bi);
        const T n = static_cast<T>(c);
        for (std::size_t i = 0; i < r; ++i) {
          T sum_d{0}, sum_dx{0};
          for (std::size_t j = 0; j < c; ++j) {
            const T d = g(i, j) * G[j];
            sum_d += d;
            sum_dx += d * xhat(i, j);
            gg[j] += g(i, j) * xhat(i, j);
            gb[j] += g(i, j);
          }
          for (std::size_t j = 0; j < c; ++j) {
            const T d = g(i, j) * G[j];
            gx(i, j) += inv_std[i] * (d - sum_d / n - xhat(i, j) * sum_dx / n);
          }
        }
      });
}

// Row-wise division by the Euclidean norm.
template <typename T>
Var<T> l2_normalize(Var<T> a, T eps = T(1e-12)) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out(r, c);
  std::vector<T> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    T ss{0};
    for (std::size_t j = 0; j < c; ++j) ss += A(i, j) * A(i, j);
    norms[i] = std::sqrt(ss + eps);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = A(i, j) / norms[i];
  }
  return a.tape->emit("l2_normalize", std::move(out),
                      [ai = a.id, r, c, norms = std::move(norms)](Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        const Tensor<T>& y = t.value(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < r; ++i) {
                          T dot{0};
                          for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
                          for (std::size_t j = 0; j < c; ++j)
                            ga(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
                        }
                      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) fail("ShapeMismatch", "concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const Var<T>& p : parts) {
    if (p.cols() != c) {
      fail("ShapeMismatch", "concat_rows: ", shape_str(parts[0].value().shape()), " vs ",
           shape_str(p.value().shape()));
    }
    r += p.rows();
  }
  Tensor<T> out(r, c);
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (const Var<T>& p : parts) {
    std::copy_n(p.value().data(), p.value().numel(), out.data() + off);
    off += p.value().numel();
    ids.push_back(p.id);
  }
  return parts[0].tape->emit("concat_rows", std::move(out),
                             [ids = std::move(ids)](Tape<T>& t, std::size_t self) {
                               const Tensor<T>& g = t.grad(self);
                               std::size_t off = 0;
                               for (std::size_t id : ids) {
                                 Tensor<T>& gp = t.grad(id);
                                 for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += g[off + i];
                                 off += gp.numel();
                               }
                             });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) fail("ShapeMismatch", "concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const Var<T>& p : parts) {
    if (p.rows() != r) {
      fail("ShapeMismatch", "concat_cols: ", shape_str(parts[0].value().shape()), " vs ",
           shape_str(p.value().shape()));
    }
    c += p.cols();
  }
  Tensor<T> out(r, c);
  std::vector<std::size_t> ids;
  std::size_t col = 0;
  for (const Var<T>& p : parts) {
    const Tensor<T>& P = p.value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(P.data() + i * P.cols(), P.cols(), out.data() + i * c + col);
    col += P.cols();
    ids.push_back(p.id);
  }
  return parts[0].tape->emit("concat_cols", std::move(out),
                             [ids = std::move(ids), r, c](Tape<T>& t, std::size_t self) {
                               const Tensor<T>& g = t.grad(self);
                               std::size_t col = 0;
                               for (std::size_t id : ids) {
                                 Tensor<T>& gp = t.grad(id);
                                 const std::size_t pc = gp.cols();
                                 for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < pc; ++j)
                                     gp(i, j) += g(i, col + j);
                                 col += pc;
                               }
                             });
}

// Rectangular window [row0, row0 + nrows) x [col0, col0 + ncols).
template <typename T>
Var<T> slice(Var<T> a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
  const Tensor<T>& A = a.value();
  if (row0 + nrows > A.rows() || col0 + ncols > A.cols()) {
    fail("ShapeMismatch", "slice: window rows [", row0, ",", row0 + nrows, ") cols [", col0, ",",
         col0 + ncols, ") outside ", shape_str(A.shape()));
  }
  Tensor<T> out(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i)
    std::copy_n(A.data() + (row0 + i) * A.cols() + col0, ncols, out.data() + i * ncols);
  return a.tape->emit("slice", std::move(out),
                      [ai = a.id, row0, nrows, col0, ncols](Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < nrows; ++i)
                          for (std::size_t j = 0; j < ncols; ++j)
                            ga(row0 + i, col0 + j) += g(i, j);
                      });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t row0, std::size_t nrows) {
  return slice(a, row0, nrows, 0, a.cols());
}

// Mean over rows: (r x c) -> (1 x c).
template <typename T>
Var<T> mean_rows(Var<T> a) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (r == 0) fail("ShapeMismatch", "mean_rows: empty input");
  Tensor<T> out(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += A(i, j);
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<T>(r);
  return a.tape->emit("mean_rows", std::move(out), [ai = a.id, r, c](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    const T inv = T{1} / static_cast<T>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g[j] * inv;
  });
}

// Row sums: (r x c) -> (r x 1).
template <typename T>
Var<T> sum_cols(Var<T> a) {
  const Tensor<T>& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor<T> out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    T s{0};
    for (std::size_t j = 0; j < c; ++j) s += A(i, j);
    out[i] = s;
  }
  return a.tape->emit("sum_cols", std::move(out), [ai = a.id, r, c](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g[i];
  });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
  const Tensor<T>& A = a.value();
  T s{0};
  for (std::size_t i = 0; i < A.numel(); ++i) s += A[i];
  return a.tape->emit("sum_all", Tensor<T>::scalar(s), [ai = a.id](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    Tensor<T>& ga = t.grad(ai);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
  const std::size_t n = a.value().numel();
  if (n == 0) fail("ShapeMismatch", "mean_all: empty input");
  return scale(sum_all(a), T{1} / static_cast<T>(n));
}

// Picks one column per row: out[i] = a(i, cols[i]); shape (r x 1).
template <typename T>
Var<T> pick(Var<T> a, std::span<const std::size_t> cols) {
  const Tensor<T>& A = a.value();
  if (cols.size() != A.rows()) {
    fail("ShapeMismatch", "pick: ", cols.size(), " indices for ", shape_str(A.shape()));
  }
  Tensor<T> out(A.rows(), 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= A.cols()) fail("ShapeMismatch", "pick: column ", cols[i], " out of range");
    out[i] = A(i, cols[i]);
  }
  return a.tape->emit("pick", std::move(out),
                      [ai = a.id, idx = std::vector<std::size_t>(cols.begin(), cols.end())](
                          Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g[i];
                      });
}

// Inverted dropout; identity when rate is zero.
template <typename T>
Var<T> dropout(Var<T> a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const Tensor<T>& A = a.value();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> mask(A.rows(), A.cols());
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.numel(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : T{0};
    out[i] = A[i] * mask[i];
  }
  return a.tape->emit("dropout", std::move(out),
                      [ai = a.id, mask = std::move(mask)](Tape<T>& t, std::size_t self) {
                        const Tensor<T>& g = t.grad(self);
                        Tensor<T>& ga = t.grad(ai);
                        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * mask[i];
                      });
}

}  // namespace lexki::nn
