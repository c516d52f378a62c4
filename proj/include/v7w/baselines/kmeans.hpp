#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"
#include "v7w/rng.hpp"

namespace v7w::baselines {

struct KMeansModel {
  Tensor centroids;  // [K x D]
  std::vector<std::size_t> assignment;
  std::vector<double> inertia_history;  // sum of squared distances after each assignment step
  std::size_t iterations_run = 0;
  bool converged = false;

  std::size_t k() const { return centroids.dim(0); }
  std::size_t dim() const { return centroids.dim(1); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Closest centroid, lowest index on ties.
inline std::size_t nearest_centroid(const Tensor& centroids, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.dim(0); ++k) {
    const double d = squared_distance(centroids.row(k), x);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

namespace detail {

inline void check_vectors(std::span<const Tensor> vectors) {
  for (const auto& v : vectors) {
    if (v.rank() != 1 || v.size() != vectors[0].size()) {
      throw DimensionError("kmeans: vectors must share one length, got " + shape_string(v.shape()) + " and " +
                           shape_string(vectors[0].shape()));
    }
  }
}

}  // namespace detail

/// Lloyd iterations from the given initial centroids.  Runs at most
/// `iterations` rounds, stopping early once assignments stop changing.
/// A cluster left empty by an update is moved onto the point currently
/// farthest from its centroid.
inline KMeansModel kmeans_from_centroids(std::span<const Tensor> vectors, Tensor initial, std::size_t iterations) {
  if (vectors.empty()) throw DomainError("kmeans: no vectors");
  detail::check_vectors(vectors);
  const std::size_t n = vectors.size();
  const std::size_t dim = vectors[0].size();
  if (initial.rank() != 2 || initial.dim(1) != dim) {
    throw DimensionError("kmeans: initial centroids " + shape_string(initial.shape()) + " do not match vector length " +
                         std::to_string(dim));
  }
  const std::size_t K = initial.dim(0);
  if (K > n) throw DomainError("kmeans: K = " + std::to_string(K) + " exceeds " + std::to_string(n) + " vectors");

  KMeansModel m;
  m.centroids = std::move(initial);
  m.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> dist(n);

  auto assign = [&] {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = nearest_centroid(m.centroids, vectors[i].data());
      changed |= k != m.assignment[i];
      m.assignment[i] = k;
      dist[i] = squared_distance(m.centroids.row(k), vectors[i].data());
      inertia += dist[i];
    }
    if (!m.inertia_history.empty()) {
      const double prev = m.inertia_history.back();
      if (inertia > prev + 1e-9 * (1.0 + prev)) {
        throw NumericsError("kmeans: inertia rose from " + std::to_string(prev) + " to " + std::to_string(inertia));
      }
    }
    m.inertia_history.push_back(inertia);
    return changed;
  };

  assign();
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor sums({K, dim});
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = sums.row(m.assignment[i]);
      const auto& v = vectors[i];
      for (std::size_t d = 0; d < dim; ++d) row[d] += v[d];
      ++counts[m.assignment[i]];
    }
    for (std::size_t k = 0; k < K; ++k) {
      auto c = m.centroids.row(k);
      if (counts[k] > 0) {
        const auto s = sums.row(k);
        for (std::size_t d = 0; d < dim; ++d) c[d] = s[d] / static_cast<double>(counts[k]);
        continue;
      }
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      for (std::size_t d = 0; d < dim; ++d) c[d] = vectors[far][d];
      dist[far] = 0.0;
    }
    ++m.iterations_run;
    if (!assign()) {
      m.converged = true;
      break;
    }
  }
  return m;
}

/// Initial centroids are K input vectors drawn uniformly without
/// replacement (partial Fisher-Yates on the index list).
inline Tensor kmeans_initial_centroids(std::span<const Tensor> vectors, std::size_t K, std::uint64_t seed) {
  if (K < 1) throw DomainError("kmeans: K must be >= 1");
  if (K > vectors.size()) {
    throw DomainError("kmeans: K = " + std::to_string(K) + " exceeds " + std::to_string(vectors.size()) + " vectors");
  }
  detail::check_vectors(vectors);
  std::vector<std::size_t> idx(vectors.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < K; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  const std::size_t dim = vectors[0].size();
  Tensor c({K, dim});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t d = 0; d < dim; ++d) c(k, d) = vectors[idx[k]][d];
  return c;
}

inline KMeansModel kmeans_fit(std::span<const Tensor> vectors, std::size_t K, std::size_t iterations,
                              std::uint64_t seed) {
  return kmeans_from_centroids(vectors, kmeans_initial_centroids(vectors, K, seed), iterations);
}

}  // namespace v7w::baselines
