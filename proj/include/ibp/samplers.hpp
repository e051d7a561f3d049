#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "pathcore.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace ibp {

// Endpoint/conditioning descriptor. `b` empty means a free right end.
struct ProcessSpec {
  double t1 = 0.0;
  double t2 = 1.0;
  double a = 0.0;
  std::optional<double> b;
  std::optional<Side> start_on;
  std::optional<Side> end_on;

  bool free_end() const { return !b.has_value(); }
  bool pinned_on_boundary() const { return start_on.has_value() || end_on.has_value(); }

  static ProcessSpec bridge(double t1, double t2, double a, double b) { return {t1, t2, a, b, {}, {}}; }
  static ProcessSpec free(double t1, double t2, double a) { return {t1, t2, a, std::nullopt, {}, {}}; }

  // Endpoint values are read off the band for boundary pins.
  static ProcessSpec make(const Band& band, double t1, double t2, std::optional<Side> start_on, double a,
                          std::optional<Side> end_on, std::optional<double> b) {
    ProcessSpec s{t1, t2, a, b, start_on, end_on};
    if (start_on) s.a = band.level(*start_on, t1);
    if (end_on) s.b = band.level(*end_on, t2);
    return s;
  }

  void validate(const Band& band) const {
    if (!(t2 > t1)) throw DomainError("ProcessSpec: empty interval");
    if (free_end() && end_on) throw DomainError("ProcessSpec: free end cannot sit on a curve");
    if (start_on) {
      if (!band.has(*start_on)) throw DomainError("ProcessSpec: start pinned to a missing curve");
      if (a != band.level(*start_on, t1)) throw DomainError("ProcessSpec: start value is not on its curve");
    } else if (!band.strictly_inside(t1, a)) {
      throw DomainError("ProcessSpec: start value must lie strictly inside the band");
    }
    if (end_on) {
      if (!band.has(*end_on)) throw DomainError("ProcessSpec: end pinned to a missing curve");
      if (*b != band.level(*end_on, t2)) throw DomainError("ProcessSpec: end value is not on its curve");
    } else if (b && !band.strictly_inside(t2, *b)) {
      throw DomainError("ProcessSpec: end value must lie strictly inside the band");
    }
  }
};

// Precomputed geometry for repeated draws of one segment law. Bridges are
// sampled node by node from the Gaussian conditional; when only the right
// end sits on a curve the bridge is generated backwards from that end, so
// that the early-exit band check meets the likely violations first.
class SegmentSampler {
 public:
  SegmentSampler(const ProcessSpec& spec, const Band& band, const Partition& p) : spec_(spec), part_(p) {
    if (std::abs(p.node(0) - spec.t1) > 1e-12 || std::abs(p.node(p.n) - spec.t2) > 1e-12)
      throw StructuralError("SegmentSampler: partition does not cover the spec interval");
    n_ = p.n;
    step_ = p.step();
    lo_.resize(n_ + 1);
    hi_.resize(n_ + 1);
    checked_ = band.lower.has_value() || band.upper.has_value();
    for (int k = 0; k <= n_; ++k) {
      const double t = p.node(k);
      lo_[k] = band.lo(t);
      hi_[k] = band.hi(t);
    }
    reverse_ = !spec.free_end() && spec.end_on.has_value() && !spec.start_on.has_value();
    if (!spec.free_end()) {
      sd_.resize(n_ + 1);
      for (int r = 1; r <= n_; ++r) sd_[r] = std::sqrt(step_ * (r - 1) / static_cast<double>(r));
    }
  }

  int n() const { return n_; }
  const Partition& partition() const { return part_; }
  const ProcessSpec& spec() const { return spec_; }

  // One draw into out[0..n]. With check, returns whether every node lies in
  // the closed band, stopping at the first violation (out is then partial).
  bool draw(SampleRng& g, double* out, bool check = true) const {
    check = check && checked_;
    if (spec_.free_end()) {
      const double s = std::sqrt(step_);
      double x = spec_.a;
      out[0] = x;
      for (int k = 1; k <= n_; ++k) {
        x += s * g.normal();
        out[k] = x;
        if (check && (x < lo_[k] || x > hi_[k])) return false;
      }
      return true;
    }
    const double a = reverse_ ? *spec_.b : spec_.a;
    const double b = reverse_ ? spec_.a : *spec_.b;
    double x = a;
    if (!reverse_) {
      out[0] = a;
      for (int k = 1; k < n_; ++k) {
        const int r = n_ - k + 1;
        x += (b - x) / r + sd_[r] * g.normal();
        out[k] = x;
        if (check && (x < lo_[k] || x > hi_[k])) return false;
      }
      out[n_] = b;
    } else {
      out[n_] = a;
      for (int k = 1; k < n_; ++k) {
        const int r = n_ - k + 1;
        x += (b - x) / r + sd_[r] * g.normal();
        const int idx = n_ - k;
        out[idx] = x;
        if (check && (x < lo_[idx] || x > hi_[idx])) return false;
      }
      out[0] = b;
    }
    return true;
  }

  GridPath to_path(std::span<const double> v) const { return {part_, {v.begin(), v.end()}}; }

 private:
  ProcessSpec spec_;
  Partition part_;
  int n_ = 0;
  double step_ = 0.0;
  bool reverse_ = false;
  bool checked_ = false;
  std::vector<double> lo_, hi_, sd_;
};

inline GridPath sample_bridge(double a, double b, const Partition& p, SampleRng& g) {
  SegmentSampler s(ProcessSpec::bridge(p.node(0), p.node(p.n), a, b), Band::unbounded(), p);
  std::vector<double> v(p.n + 1);
  s.draw(g, v.data(), false);
  return {p, std::move(v)};
}

inline GridPath sample_bridge(double a, double b, const Partition& p, const RngStream& rng) {
  auto g = rng.sample(0);
  return sample_bridge(a, b, p, g);
}

inline GridPath sample_free(double a, const Partition& p, SampleRng& g) {
  SegmentSampler s(ProcessSpec::free(p.node(0), p.node(p.n), a), Band::unbounded(), p);
  std::vector<double> v(p.n + 1);
  s.draw(g, v.data(), false);
  return {p, std::move(v)};
}

inline GridPath sample_free(double a, const Partition& p, const RngStream& rng) {
  auto g = rng.sample(0);
  return sample_free(a, p, g);
}

// Exact node values of Brownian motion conditioned to stay above 0 in the
// continuum: the Bessel(3) bridge as the norm of a 3-d Brownian bridge, and the
// meander as a Bessel(3) bridge to a Rayleigh endpoint.
class Bessel3Sampler {
 public:
  explicit Bessel3Sampler(const Partition& p) : n_(p.n), T_(p.length()) {
    const double s = p.step();
    sd_.resize(n_ + 1);
    for (int r = 1; r <= n_; ++r) sd_[r] = std::sqrt(s * (r - 1) / static_cast<double>(r));
  }

  void bridge(SampleRng& g, double x, double y, double* out) const {
    double c0 = x, c1 = 0.0, c2 = 0.0;
    out[0] = x;
    for (int k = 1; k < n_; ++k) {
      const int r = n_ - k + 1;
      c0 += (y - c0) / r + sd_[r] * g.normal();
      c1 += -c1 / r + sd_[r] * g.normal();
      c2 += -c2 / r + sd_[r] * g.normal();
      out[k] = std::sqrt(c0 * c0 + c1 * c1 + c2 * c2);
    }
    out[n_] = y;
  }

  void meander(SampleRng& g, double* out) const {
    const double R = std::sqrt(-2.0 * T_ * std::log(g.uniform()));
    bridge(g, 0.0, R, out);
  }

  int n() const { return n_; }

 private:
  int n_;
  double T_;
  std::vector<double> sd_;
};

// Probability that the Brownian bridge between consecutive nodes stays below a
// barrier that is linear between them; gaps are barrier minus path.
inline double no_crossing_weight(std::span<const double> gap, double step) {
  double w = 1.0;
  for (std::size_t k = 0; k + 1 < gap.size(); ++k) {
    if (gap[k] <= 0.0 || gap[k + 1] <= 0.0) return 0.0;
    w *= -std::expm1(-2.0 * gap[k] * gap[k + 1] / step);
  }
  return w;
}

inline void check_endpoints(const GridPath& x, double a, double b) {
  const double tol = 1e-12;
  if (std::abs(x.front() - a) > tol * (1.0 + std::abs(a)) || std::abs(x.back() - b) > tol * (1.0 + std::abs(b)))
    throw StructuralError("grid density: path endpoints do not match (a, b)");
}

// Log joint density of the interior nodes under the bridge law, written as
// a product of heat kernels.
inline double grid_bridge_log_density(const GridPath& x, double a, double b) {
  check_endpoints(x, a, b);
  const double s = x.partition.step();
  double acc = 0.0;
  for (int k = 1; k <= x.n(); ++k) acc += log_heat_kernel(s, x.values[k - 1], x.values[k]);
  return acc - log_heat_kernel(x.partition.length(), a, b);
}

// Same density as log q - log Xi, q = exp(-sum (dx)^2 / (2 step)).
inline double grid_bridge_log_density_qxi(const GridPath& x, double a, double b) {
  check_endpoints(x, a, b);
  const int k = x.n();
  const double s = x.partition.step();
  double ss = 0.0;
  for (int j = 1; j <= k; ++j) {
    const double d = x.values[j] - x.values[j - 1];
    ss += d * d;
  }
  const double log_q = -ss / (2.0 * s);
  const double log_xi = -0.5 * std::log(static_cast<double>(k)) +
                        0.5 * (k - 1) * std::log(2.0 * std::numbers::pi * s) - (a - b) * (a - b) / (2.0 * k * s);
  return log_q - log_xi;
}

// Log joint density of nodes 1..n of a free path started at a.
inline double grid_free_log_density(const GridPath& x, double a) {
  if (std::abs(x.front() - a) > 1e-12 * (1.0 + std::abs(a)))
    throw StructuralError("grid density: path does not start at a");
  const double s = x.partition.step();
  double acc = 0.0;
  for (int k = 1; k <= x.n(); ++k) acc += log_heat_kernel(s, x.values[k - 1], x.values[k]);
  return acc;
}

// Survival frequency of N draws of a segment law (draw i uses sample i).
inline MCEstimate survival_probability(const SegmentSampler& s, std::uint64_t N, const RngStream& rng,
                                       const Parallel& par = {}) {
  if (N == 0) throw DomainError("survival_probability: N must be positive");
  const std::size_t chunks = static_cast<std::size_t>((N + kChunk - 1) / kChunk);
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(chunks, par, [&](std::size_t c) {
    std::vector<double> buf(s.n() + 1);
    const std::uint64_t lo = c * kChunk, hi = std::min<std::uint64_t>(N, lo + kChunk);
    std::uint64_t h = 0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      auto g = rng.sample(i);
      h += s.draw(g, buf.data()) ? 1 : 0;
    }
    hits[c] = h;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  return proportion(total, N, rng.seed);
}

// Probability that all nodes stay in the closed band, endpoints interior.
inline MCEstimate band_probability(const ProcessSpec& spec, const Band& band, const Partition& p, std::uint64_t N,
                                   const RngStream& rng, const Parallel& par = {}) {
  if (N == 0) throw DomainError("band_probability: N must be positive");
  if (!band.lower && !band.upper) return {1.0, 0.0, N, rng.seed};
  if (spec.pinned_on_boundary()) throw DomainError("band_probability: endpoints must be interior");
  spec.validate(band);
  return survival_probability(SegmentSampler(spec, band, p), N, rng, par);
}

inline constexpr std::uint64_t kDefaultMaxAttempts = 10'000'000;

// Rejection loop shared by the conditioned samplers: attempt j uses sample j
// of the stream.
inline GridPath rejection_sample(const SegmentSampler& s, std::uint64_t max_attempts, const RngStream& rng,
                                 const char* what) {
  std::vector<double> buf(s.n() + 1);
  for (std::uint64_t j = 0; j < max_attempts; ++j) {
    auto g = rng.sample(j);
    if (s.draw(g, buf.data())) return s.to_path(buf);
  }
  throw SaturationError(what, max_attempts);
}

inline GridPath sample_conditioned(const ProcessSpec& spec, const Band& band, const Partition& p,
                                   std::uint64_t max_attempts, const RngStream& rng) {
  if (spec.pinned_on_boundary()) throw DomainError("sample_conditioned: endpoints must be interior");
  spec.validate(band);
  return rejection_sample(SegmentSampler(spec, band, p), max_attempts, rng, "sample_conditioned");
}

inline GridPath sample_pinned_segment(const ProcessSpec& spec, const Band& band, const Partition& p,
                                      const RngStream& rng, std::uint64_t max_attempts = kDefaultMaxAttempts) {
  if (!spec.pinned_on_boundary()) throw DomainError("sample_pinned_segment: no endpoint on a curve");
  spec.validate(band);
  return rejection_sample(SegmentSampler(spec, band, p), max_attempts, rng, "sample_pinned_segment");
}

// Nearest global grid index; off-node requests are reported.
inline int snap_to_grid(double t, int n_global, const char* what = "time") {
  const int k = static_cast<int>(std::lround(t * n_global));
  if (std::abs(static_cast<double>(k) / n_global - t) > 1e-12) {
    warn(std::string(what) + " " + std::to_string(t) + " is not a node of the n=" + std::to_string(n_global) +
         " grid; snapped to " + std::to_string(static_cast<double>(k) / n_global));
  }
  return k;
}

inline std::vector<int> snap_times(const TimeTuple& times, int n_global) {
  std::vector<int> ks;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const int k = snap_to_grid(times[i], n_global);
    if (k <= 0 || k >= n_global || (!ks.empty() && k <= ks.back()))
      throw DomainError("time tuple collapses on the n=" + std::to_string(n_global) + " grid");
    ks.push_back(k);
  }
  return ks;
}

// Segment specs of the Y process for sign vector eps at grid indices ks.
inline std::vector<std::pair<ProcessSpec, Partition>> y_segments(const SignVector& eps, const std::vector<int>& ks,
                                                                 const Band& band, double a,
                                                                 std::optional<double> b, int n_global) {
  if (eps.size() != ks.size()) throw DomainError("sample_Y: |eps| must equal |times|");
  std::vector<std::pair<ProcessSpec, Partition>> out;
  int k_prev = 0;
  std::optional<Side> prev_side;
  double prev_val = a;
  for (std::size_t i = 0; i <= ks.size(); ++i) {
    const int k = i < ks.size() ? ks[i] : n_global;
    const Partition p = Partition::slice(n_global, k_prev, k);
    ProcessSpec s;
    s.t1 = p.node(0);
    s.t2 = p.node(p.n);
    s.a = prev_val;
    s.start_on = prev_side;
    if (i < ks.size()) {
      const Side sd = side_of(eps[i]);
      s.end_on = sd;
      s.b = band.level(sd, s.t2);
      prev_side = sd;
      prev_val = *s.b;
    } else {
      s.b = b;
    }
    out.emplace_back(s, p);
    k_prev = k;
  }
  return out;
}

// Y = X^{a, f^{e1}(t1)} + middle pinned segments + last segment (to b, or free).
inline GridPath sample_Y(std::size_t j, const SignVector& eps, const TimeTuple& times, const Band& band, double a,
                         std::optional<double> b, int n_global, const RngStream& rng,
                         std::uint64_t max_attempts = kDefaultMaxAttempts) {
  if (j != eps.size() || j != times.size()) throw DomainError("sample_Y: j must equal |eps| and |times|");
  const auto ks = snap_times(times, n_global);
  const auto segs = y_segments(eps, ks, band, a, b, n_global);
  std::vector<GridPath> parts;
  for (std::size_t i = 0; i < segs.size(); ++i)
    parts.push_back(sample_pinned_segment(segs[i].first, band, segs[i].second, rng.child("Y-segment", i), max_attempts));
  return concat(parts);
}

}  // namespace ibp
