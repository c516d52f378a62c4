#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"

namespace v7w {

inline constexpr double kLogFloor = 1e-12;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aip * b(p, j);
    }
  }
  return out;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("dot length mismatch: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// Kernels below are the hot path of the recurrent model. Callers own shape
// agreement (checked once per sequence, not per call).

/// y += W x, W is [rows x cols].
inline void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  const double* wp = w.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = wp + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] += s;
  }
}

/// y += W^T x, W is [rows x cols], x has rows entries.
inline void gemv_t_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  const double* wp = w.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* wr = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += wr[c] * xr;
  }
}

/// G += u v^T.
inline void outer_acc(Tensor& g, std::span<const double> u, std::span<const double> v) {
  const std::size_t rows = g.dim(0), cols = g.dim(1);
  double* gp = g.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    double* gr = gp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += ur * v[c];
  }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::vector<double> softmax_stable(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of an empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

inline Tensor softmax_stable(const Tensor& logits) {
  if (logits.empty()) throw DomainError("softmax of an empty tensor");
  return Tensor(logits.shape(), softmax_stable(logits.data()));
}

/// log(sum(exp(x))) with max subtraction.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw DomainError("log_sum_exp of an empty vector");
  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp(v - peak);
  return peak + std::log(total);
}

inline double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) {
    throw IndexError("cross_entropy target " + std::to_string(target) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[target], kLogFloor));
}

inline double cross_entropy(const Tensor& probs, std::size_t target) {
  return cross_entropy(probs.data(), target);
}

inline double l2_norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace v7w
