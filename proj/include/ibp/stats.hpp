#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"

namespace ibp {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
};

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

// Running means and co-moments of a K-vector (Welford / Chan merge).
template <std::size_t K>
struct Moments {
  double count = 0.0;
  std::array<double, K> mean{};
  std::array<std::array<double, K>, K> m2{};

  void add(const std::array<double, K>& x) {
    count += 1.0;
    std::array<double, K> d{};
    for (std::size_t i = 0; i < K; ++i) {
      d[i] = x[i] - mean[i];
      mean[i] += d[i] / count;
    }
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) m2[i][j] += d[i] * (x[j] - mean[j]);
  }

  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double n = count + o.count;
    std::array<double, K> d{};
    for (std::size_t i = 0; i < K; ++i) d[i] = o.mean[i] - mean[i];
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j)
        m2[i][j] += o.m2[i][j] + d[i] * d[j] * count * o.count / n;
    for (std::size_t i = 0; i < K; ++i) mean[i] += d[i] * o.count / n;
    count = n;
  }

  double variance(std::size_t i) const { return count > 1.0 ? m2[i][i] / (count - 1.0) : 0.0; }
  double covariance(std::size_t i, std::size_t j) const {
    return count > 1.0 ? m2[i][j] / (count - 1.0) : 0.0;
  }
  double std_error(std::size_t i) const { return count > 0.0 ? std::sqrt(variance(i) / count) : 0.0; }

  MCEstimate estimate(std::size_t i, std::uint64_t seed) const {
    return {mean[i], std_error(i), static_cast<std::uint64_t>(count), seed};
  }
};

inline constexpr std::size_t kChunk = 1024;

// Moments of fn(i) over i in [0, n). Chunks are fixed, merged in order.
template <std::size_t K, class F>
Moments<K> mc_moments(std::uint64_t n, const Parallel& par, F&& fn) {
  const std::size_t chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  std::vector<Moments<K>> part(chunks);
  parallel_for(chunks, par, [&](std::size_t c) {
    const std::uint64_t lo = c * kChunk;
    const std::uint64_t hi = std::min<std::uint64_t>(n, lo + kChunk);
    Moments<K> m;
    for (std::uint64_t i = lo; i < hi; ++i) m.add(fn(i));
    part[c] = m;
  });
  Moments<K> out;
  for (const auto& m : part) out.merge(m);
  return out;
}

// Bernoulli estimate with the sample standard deviation convention.
inline MCEstimate proportion(std::uint64_t hits, std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("proportion: no samples");
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  const double var = n > 1 ? p * (1.0 - p) * static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
  return {p, std::sqrt(var / static_cast<double>(n)), n, seed};
}

// Delete-a-group jackknife standard error.
inline double jackknife_se(std::span<const double> replicates) {
  const std::size_t g = replicates.size();
  if (g < 2) return 0.0;
  double m = 0.0;
  for (double r : replicates) m += r;
  m /= static_cast<double>(g);
  double s = 0.0;
  for (double r : replicates) s += (r - m) * (r - m);
  return std::sqrt(s * static_cast<double>(g - 1) / static_cast<double>(g));
}

struct LineFit {
  double c0 = 0.0, c1 = 0.0;
  double se_c0 = 0.0, se_c1 = 0.0;
};

// Weighted least squares y = c0 + c1 x. Points with zero error fall back to
// unit weights for the whole fit.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> se) {
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m || se.size() != m) throw DomainError("fit_line: need at least two points");
  bool weighted = true;
  for (double s : se)
    if (!(s > 0.0)) weighted = false;
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = weighted ? 1.0 / (se[i] * se[i]) : 1.0;
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (det == 0.0) throw DomainError("fit_line: degenerate abscissae");
  LineFit f;
  f.c1 = (sw * sxy - sx * sy) / det;
  f.c0 = (sy - f.c1 * sx) / sw;
  // Propagate the point errors through the linear estimator.
  double v0 = 0.0, v1 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = weighted ? 1.0 / (se[i] * se[i]) : 1.0;
    const double a0 = w * (sxx - sx * x[i]) / det;
    const double a1 = w * (sw * x[i] - sx) / det;
    v0 += a0 * a0 * se[i] * se[i];
    v1 += a1 * a1 * se[i] * se[i];
  }
  f.se_c0 = std::sqrt(v0);
  f.se_c1 = std::sqrt(v1);
  return f;
}

}  // namespace ibp
