#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
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
#include "samplers.hpp"
#include "stats.hpp"

namespace ibp {

// Bridge: prod p(t_i - t_{i-1}; c_{i-1}, c_i) p(1 - t_j; c_j, b) / p(1; a, b).
// Free end: the product alone. t_0 = 0, c_0 = a.
inline double finite_dim_density(const TimeTuple& times, std::span<const double> levels, double a,
                                 std::optional<double> b) {
  if (levels.size() != times.size()) throw DomainError("finite_dim_density: |levels| must equal |times|");
  double t_prev = 0.0, c_prev = a, v = 1.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    v *= heat_kernel(times[i] - t_prev, c_prev, levels[i]);
    t_prev = times[i];
    c_prev = levels[i];
  }
  if (b) v *= heat_kernel(1.0 - t_prev, c_prev, *b) / heat_kernel(1.0, a, *b);
  return v;
}

inline int boundary_pins(const ProcessSpec& s) { return (s.start_on ? 1 : 0) + (s.end_on ? 1 : 0); }

// Segment law re-expressed on the global grid of size n (endpoints snapped).
inline std::pair<ProcessSpec, Partition> on_grid(const ProcessSpec& spec, const Band& band, int n) {
  const int k1 = snap_to_grid(spec.t1, n, "segment start");
  const int k2 = snap_to_grid(spec.t2, n, "segment end");
  const Partition p = Partition::slice(n, k1, k2);
  ProcessSpec s = spec;
  s.t1 = p.node(0);
  s.t2 = p.node(p.n);
  if (s.start_on) s.a = band.level(*s.start_on, s.t1);
  if (s.end_on) s.b = band.level(*s.end_on, s.t2);
  return {s, p};
}

struct DeltaPSchedule {
  std::vector<int> sizes{50, 100, 200};
  std::uint64_t samples = 100'000;
  int order = 1;

  void validate() const {
    if (sizes.size() < 2) throw DomainError("DeltaPSchedule: need at least two grid sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
      if (sizes[i] <= sizes[i - 1]) throw DomainError("DeltaPSchedule: sizes must increase");
    if (samples < 10'000) throw DomainError("DeltaPSchedule: at least 1e4 samples per size");
    if (order != 1) throw DomainError("DeltaPSchedule: only the one-term n^{-1/2} correction is supported");
  }
};

struct DeltaPRow {
  int n = 0;
  MCEstimate probability;
  double scaled = 0.0;  // n^{pins/2} P
  double scaled_se = 0.0;
};

struct DeltaPResult {
  MCEstimate estimate;
  std::vector<DeltaPRow> rows;
  LineFit fit;
  int pins = 0;
};

// Extrapolation route: n^{pins/2} P_n fitted as c0 + c1 n^{-1/2}, times T^{pins/2}.
inline DeltaPResult delta_p_definitional(const ProcessSpec& spec, const Band& band, const DeltaPSchedule& sch,
                                         const RngStream& rng, const Parallel& par = {}) {
  sch.validate();
  spec.validate(band);
  DeltaPResult r;
  r.pins = boundary_pins(spec);
  if (r.pins == 0) throw DomainError("delta_p: no endpoint on a curve");
  const double half = 0.5 * r.pins;
  std::vector<double> xs, ys, ses;
  bool any = false;
  for (int n : sch.sizes) {
    const auto [s, p] = on_grid(spec, band, n);
    DeltaPRow row;
    row.n = n;
    row.probability = survival_probability(SegmentSampler(s, band, p), sch.samples, rng.child("n", n), par);
    const double scale = std::pow(static_cast<double>(n), half);
    row.scaled = scale * row.probability.mean;
    row.scaled_se = scale * row.probability.std_error;
    any = any || row.probability.mean > 0.0;
    xs.push_back(1.0 / std::sqrt(static_cast<double>(n)));
    ys.push_back(row.scaled);
    ses.push_back(row.scaled_se);
    r.rows.push_back(row);
  }
  if (!any) throw DegenerateError("delta_p: no surviving path at any grid size");
  r.fit = fit_line(xs, ys, ses);
  const double tp = std::pow(spec.t2 - spec.t1, half);
  r.estimate = {tp * r.fit.c0, tp * r.fit.se_c0, sch.samples * sch.sizes.size(), rng.seed};
  return r;
}

inline DeltaPResult delta_p_first_def(const ProcessSpec& spec, const Band& band, const DeltaPSchedule& sch,
                                      const RngStream& rng, const Parallel& par = {}) {
  if (spec.free_end() || boundary_pins(spec) != 1)
    throw DomainError("delta_p_first_def: exactly one endpoint must sit on a curve");
  return delta_p_definitional(spec, band, sch, rng, par);
}

inline DeltaPResult delta_p_second(const ProcessSpec& spec, const Band& band, const DeltaPSchedule& sch,
                                   const RngStream& rng, const Parallel& par = {}) {
  if (boundary_pins(spec) != 2) throw DomainError("delta_p_second: both endpoints must sit on curves");
  return delta_p_definitional(spec, band, sch, rng, par);
}

inline DeltaPResult delta_p_free(const ProcessSpec& spec, const Band& band, const DeltaPSchedule& sch,
                                 const RngStream& rng, const Parallel& par = {}) {
  if (!spec.free_end() || !spec.start_on) throw DomainError("delta_p_free: start on a curve, free end required");
  if (spec.t2 != 1.0) throw DomainError("delta_p_free: interval must end at 1");
  return delta_p_definitional(spec, band, sch, rng, par);
}

// Moments of fn over the first `accept` accepted draws of a segment law.
// Attempts are processed in fixed blocks; the result does not depend on the
// thread count.
template <class F>
std::pair<Moments<1>, std::uint64_t> accepted_moments(const SegmentSampler& s, std::uint64_t accept,
                                                      std::uint64_t max_attempts, const RngStream& rng,
                                                      const Parallel& par, F&& fn) {
  Moments<1> out;
  std::uint64_t attempts = 0, got = 0;
  const std::size_t wave = std::max(1u, par.threads);
  std::uint64_t block = 0;
  while (got < accept) {
    if (attempts >= max_attempts) throw SaturationError("accepted_moments: acceptance too low", attempts);
    std::vector<std::vector<std::pair<std::uint64_t, double>>> res(wave);
    parallel_for(wave, par, [&](std::size_t w) {
      std::vector<double> buf(s.n() + 1);
      const std::uint64_t lo = (block + w) * kChunk;
      for (std::uint64_t i = lo; i < lo + kChunk; ++i) {
        auto g = rng.sample(i);
        if (s.draw(g, buf.data())) res[w].emplace_back(i, fn(std::span<const double>(buf)));
      }
    });
    for (std::size_t w = 0; w < wave && got < accept; ++w) {
      for (const auto& [i, v] : res[w]) {
        if (got == accept) break;
        out.add({v});
        ++got;
        attempts = i + 1;
      }
      if (got < accept) attempts = (block + w + 1) * kChunk;
    }
    block += wave;
  }
  return {out, attempts};
}

// Z^g on a fixed grid, with g', g'' tabulated once.
class CameronMartinTable {
 public:
  CameronMartinTable(const Curve& g, const Partition& p) : n_(p.n) {
    gp_.resize(n_ + 1);
    w2_.resize(n_ + 1);
    double energy = 0.0;
    flat_ = true;
    for (int k = 0; k <= n_; ++k) {
      const double t = p.node(k);
      const double w = trapezoid_weight(p, k);
      gp_[k] = g.derivative(t);
      w2_[k] = w * g.second_derivative(t);
      energy += w * gp_[k] * gp_[k];
      flat_ = flat_ && gp_[k] == 0.0 && w2_[k] == 0.0;
    }
    half_energy_ = 0.5 * energy;
  }
  bool flat() const { return flat_; }
  double operator()(std::span<const double> x) const {
    double cross = 0.0;
    for (int k = 0; k <= n_; ++k) cross += w2_[k] * x[k];
    return std::exp(gp_[n_] * x[n_] - gp_[0] * x[0] - cross - half_energy_);
  }

 private:
  int n_;
  bool flat_ = true;
  double half_energy_ = 0.0;
  std::vector<double> gp_, w2_;
};

// E[Z^g(B^{alpha -> beta})] over [t1, t2], in closed form.
inline double bridge_cm_mean(const Curve& g, double t1, double t2, double alpha, double beta) {
  const double T = t2 - t1, dg = g(t2) - g(t1);
  return std::exp((beta - alpha) * dg / T - dg * dg / (2.0 * T));
}

// How the one-side-conditioned laws inside the lemma route are realized.
// exact: continuum law (Bessel(3) bridge or meander at the nodes, far curve
// monitored between nodes by Brownian-bridge crossing weights).
// grid: the discrete pinned-segment law with node-only monitoring.
enum class ConditionedLaw { exact, grid };

struct LemmaBudget {
  std::uint64_t samples = 20'000;  // draws per expectation
  int n_grid = 400;
  std::uint64_t max_attempts = kDefaultMaxAttempts;
  bool closed_form_denominator = false;
  ConditionedLaw law = ConditionedLaw::exact;
};

struct LemmaResult {
  MCEstimate estimate;
  double coefficient = 0.0;  // 2|alpha - beta| / T, or sqrt(2 / (pi T)) for a free end
  MCEstimate cm_numerator;
  MCEstimate cm_denominator;
  MCEstimate containment;
};

namespace detail {

inline MCEstimate from_moments(const Moments<1>& m, std::uint64_t seed) { return m.estimate(0, seed); }

inline MCEstimate ratio_estimate(const MCEstimate& num, const MCEstimate& den) {
  const double v = num.mean / den.mean;
  const double rel = std::hypot(num.std_error / num.mean, den.std_error / den.mean);
  return {v, std::abs(v) * rel, num.n_samples, num.seed};
}

// m.mean[1] / m.mean[0] with the delta-method error of correlated means.
inline MCEstimate ratio_of_moments(const Moments<2>& m, std::uint64_t seed) {
  const double r = m.mean[1] / m.mean[0];
  const double v = (m.variance(1) - 2.0 * r * m.covariance(0, 1) + r * r * m.variance(0)) / (m.count * m.mean[0] * m.mean[0]);
  return {r, std::sqrt(std::max(v, 0.0)), static_cast<std::uint64_t>(m.count), seed};
}

inline MCEstimate product_estimate(std::initializer_list<MCEstimate> fs, double c, std::uint64_t seed) {
  double v = c, rel2 = 0.0;
  std::uint64_t n = 0;
  for (const auto& f : fs) {
    v *= f.mean;
    if (f.mean != 0.0) rel2 += (f.std_error / f.mean) * (f.std_error / f.mean);
    n += f.n_samples;
  }
  return {v, std::abs(v) * std::sqrt(rel2), n, seed};
}

// Distance from the pinned curve to the far one, per node; empty if the far
// side is open.
inline std::vector<double> far_gap(const Band& band, Side pinned, const Partition& p) {
  if (!band.has(opposite(pinned))) return {};
  std::vector<double> gap(p.n + 1);
  for (int k = 0; k <= p.n; ++k) gap[k] = band.hi(p.node(k)) - band.lo(p.node(k));
  return gap;
}

// Moments of (Z(Y), Z(Y) W(Y)) with Y the continuum one-side-conditioned law:
// Bessel(3) bridge y0 -> y1, or the meander when y1 is empty.
inline Moments<2> exact_moments(const Partition& p, double y0, std::optional<double> y1,
                                const CameronMartinTable& Z, const std::vector<double>& gap, std::uint64_t N,
                                const RngStream& rng, const Parallel& par) {
  const Bessel3Sampler b(p);
  const double step = p.step();
  return mc_moments<2>(N, par, [&](std::uint64_t i) -> std::array<double, 2> {
    thread_local std::vector<double> y, g;
    y.resize(p.n + 1);
    auto r = rng.sample(i);
    if (y1) b.bridge(r, y0, *y1, y.data());
    else b.meander(r, y.data());
    const double z = Z.flat() ? 1.0 : Z(y);
    if (gap.empty()) return {z, z};
    g.resize(p.n + 1);
    for (int k = 0; k <= p.n; ++k) g[k] = gap[k] - y[k];
    return {z, z * no_crossing_weight(g, step)};
  });
}

// Probability that the grid one-side-conditioned law also respects the far
// curve at the nodes.
inline MCEstimate grid_containment(const ProcessSpec& spec, const Band& band, Side pinned, const Partition& p,
                                   const LemmaBudget& bud, const RngStream& rng, const Parallel& par) {
  const Side far = opposite(pinned);
  if (!band.has(far)) return {1.0, 0.0, bud.samples, rng.seed};
  SegmentSampler s(spec, band.one_sided(pinned), p);
  std::vector<double> lo(p.n + 1), hi(p.n + 1);
  for (int k = 0; k <= p.n; ++k) {
    lo[k] = band.lo(p.node(k));
    hi[k] = band.hi(p.node(k));
  }
  auto [m, att] = accepted_moments(s, bud.samples, bud.max_attempts, rng, par, [&](std::span<const double> x) {
    for (int k = 0; k <= p.n; ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return 0.0;
    return 1.0;
  });
  return from_moments(m, rng.seed);
}

inline MCEstimate grid_cm_numerator(const ProcessSpec& ys, const Partition& p, const CameronMartinTable& Z,
                                    const LemmaBudget& bud, const RngStream& rng, const Parallel& par) {
  SegmentSampler yc(ys, Band::above(Curve::constant(0.0)), p);
  auto [num, na] = accepted_moments(yc, bud.samples, bud.max_attempts, rng, par,
                                    [&](std::span<const double> x) { return Z(x); });
  return from_moments(num, rng.seed);
}

}  // namespace detail

// Lemma route for one boundary endpoint:
// sqrt(T)/sqrt(2) * 2|alpha|/T * E[Z(Y | K+(0))] / E[Z(Y)] * containment.
// With the exact law the containment is E[Z W] / E[Z] on the same draws, so
// the product is estimated by the single mean E[Z W] / E[Z(Y)].
inline LemmaResult delta_p_first_lemma(const ProcessSpec& spec, const Band& band, const LemmaBudget& bud,
                                       const RngStream& rng, const Parallel& par = {}) {
  if (spec.free_end() || boundary_pins(spec) != 1)
    throw DomainError("delta_p_first_lemma: exactly one endpoint must sit on a curve");
  spec.validate(band);
  const auto [s, p] = on_grid(spec, band, bud.n_grid);
  const bool at_end = s.end_on.has_value();
  const Side side = at_end ? *s.end_on : *s.start_on;
  const Curve g = band.curve(side).scaled(side == Side::upper ? 1.0 : -1.0);
  const double T = s.t2 - s.t1;
  const double alpha = at_end ? std::abs(s.a - band.level(side, s.t1)) : std::abs(*s.b - band.level(side, s.t2));
  const double y0 = at_end ? alpha : 0.0, y1 = at_end ? 0.0 : alpha;
  const double lead = std::sqrt(T / 2.0) * 2.0 * alpha / T;

  LemmaResult r;
  r.coefficient = 2.0 * alpha / T;
  const CameronMartinTable Z(g, p);
  if (Z.flat()) {
    r.cm_denominator = {1.0, 0.0, 0, rng.seed};
  } else if (bud.closed_form_denominator) {
    r.cm_denominator = {bridge_cm_mean(g, s.t1, s.t2, y0, y1), 0.0, 0, rng.seed};
  } else {
    SegmentSampler yu(ProcessSpec::bridge(s.t1, s.t2, y0, y1), Band::unbounded(), p);
    auto [den, da] = accepted_moments(yu, bud.samples, bud.max_attempts, rng.child("denominator"), par,
                                      [&](std::span<const double> x) { return Z(x); });
    r.cm_denominator = detail::from_moments(den, rng.seed);
  }

  if (bud.law == ConditionedLaw::grid) {
    ProcessSpec ys{s.t1, s.t2, y0, y1, at_end ? std::nullopt : std::optional<Side>(Side::lower),
                   at_end ? std::optional<Side>(Side::lower) : std::nullopt};
    r.cm_numerator = Z.flat() ? MCEstimate{1.0, 0.0, 0, rng.seed}
                              : detail::grid_cm_numerator(ys, p, Z, bud, rng.child("numerator"), par);
    r.containment = detail::grid_containment(s, band, side, p, bud, rng.child("containment"), par);
    const auto ratio = detail::ratio_estimate(r.cm_numerator, r.cm_denominator);
    r.estimate = detail::product_estimate({ratio, r.containment}, lead, rng.seed);
    return r;
  }

  const auto gap = detail::far_gap(band, side, p);
  if (Z.flat() && gap.empty()) {
    r.cm_numerator = {1.0, 0.0, 0, rng.seed};
    r.containment = {1.0, 0.0, 0, rng.seed};
    r.estimate = {lead, 0.0, 0, rng.seed};
    return r;
  }
  const auto m = detail::exact_moments(p, y0, y1, Z, gap, bud.samples, rng.child("numerator"), par);
  r.cm_numerator = m.estimate(0, rng.seed);
  r.containment = detail::ratio_of_moments(m, rng.seed);
  const double dm = r.cm_denominator.mean;
  const MCEstimate inv{1.0 / dm, r.cm_denominator.std_error / (dm * dm), r.cm_denominator.n_samples, rng.seed};
  r.estimate = detail::product_estimate({m.estimate(1, rng.seed), inv}, lead, rng.seed);
  return r;
}

// Lemma route for a free end started on a curve:
// sqrt(T)/sqrt(2) * sqrt(2/(pi T)) E[Z(meander)] * containment.
inline LemmaResult delta_p_free_lemma(const ProcessSpec& spec, const Band& band, const LemmaBudget& bud,
                                      const RngStream& rng, const Parallel& par = {}) {
  if (!spec.free_end() || !spec.start_on) throw DomainError("delta_p_free_lemma: start on a curve, free end required");
  spec.validate(band);
  const auto [s, p] = on_grid(spec, band, bud.n_grid);
  const Side side = *s.start_on;
  const Curve g = band.curve(side).scaled(side == Side::upper ? 1.0 : -1.0);
  const double T = s.t2 - s.t1;
  LemmaResult r;
  r.coefficient = std::sqrt(2.0 / (std::numbers::pi * T));
  const double lead = std::sqrt(T / 2.0) * r.coefficient;
  r.cm_denominator = {1.0, 0.0, 0, rng.seed};
  const CameronMartinTable Z(g, p);

  if (bud.law == ConditionedLaw::grid) {
    ProcessSpec ys{s.t1, s.t2, 0.0, std::nullopt, Side::lower, std::nullopt};
    r.cm_numerator = Z.flat() ? MCEstimate{1.0, 0.0, 0, rng.seed}
                              : detail::grid_cm_numerator(ys, p, Z, bud, rng.child("numerator"), par);
    r.containment = detail::grid_containment(s, band, side, p, bud, rng.child("containment"), par);
    r.estimate = detail::product_estimate({r.cm_numerator, r.containment}, lead, rng.seed);
    return r;
  }

  const auto gap = detail::far_gap(band, side, p);
  if (Z.flat() && gap.empty()) {
    r.cm_numerator = {1.0, 0.0, 0, rng.seed};
    r.containment = {1.0, 0.0, 0, rng.seed};
    r.estimate = {lead, 0.0, 0, rng.seed};
    return r;
  }
  const auto m = detail::exact_moments(p, 0.0, std::nullopt, Z, gap, bud.samples, rng.child("numerator"), par);
  r.cm_numerator = m.estimate(0, rng.seed);
  r.containment = detail::ratio_of_moments(m, rng.seed);
  r.estimate = detail::product_estimate({m.estimate(1, rng.seed)}, lead, rng.seed);
  return r;
}

struct TauBudget {
  std::uint64_t outer = 20'000;  // draws of the level alpha at tau
  std::uint64_t inner = 16;      // draws per inner expectation
  int n_grid = 400;
  std::uint64_t max_attempts = kDefaultMaxAttempts;
};

// Second-order factor through an interior time tau:
// T * E_alpha[ dP_[t1,tau]/sqrt(tau-t1) * dP_[tau,t2]/sqrt(t2-tau) ],
// alpha drawn from the unconditioned bridge marginal at tau. Inner factors use
// the lemma route with independent draws and the closed-form denominator, so
// the product is unbiased for any inner budget.
inline MCEstimate delta_p_second_tau(const ProcessSpec& spec, const Band& band, double tau, const TauBudget& bud,
                                     const RngStream& rng, const Parallel& par = {}) {
  if (boundary_pins(spec) != 2) throw DomainError("delta_p_second_tau: both endpoints must sit on curves");
  if (!(tau > spec.t1 && tau < spec.t2)) throw DomainError("delta_p_second_tau: tau must lie inside the interval");
  spec.validate(band);
  const auto [s, p] = on_grid(spec, band, bud.n_grid);
  const int kt = snap_to_grid(tau, bud.n_grid, "tau");
  if (kt <= p.k0 || kt >= p.k0 + p.n) throw DomainError("delta_p_second_tau: tau collapses onto an endpoint");
  const double tt = static_cast<double>(kt) / bud.n_grid;
  const double T = s.t2 - s.t1;
  const double mean = s.a + (*s.b - s.a) * (tt - s.t1) / T;
  const double sd = std::sqrt((tt - s.t1) * (s.t2 - tt) / T);
  LemmaBudget lb{bud.inner, bud.n_grid, bud.max_attempts, true};
  const RngStream ra = rng.child("alpha"), rl = rng.child("left"), rr = rng.child("right");
  auto m = mc_moments<1>(bud.outer, par, [&](std::uint64_t i) -> std::array<double, 1> {
    auto g = ra.sample(i);
    const double alpha = mean + sd * g.normal();
    if (!band.strictly_inside(tt, alpha)) return {0.0};
    ProcessSpec left{s.t1, tt, s.a, alpha, s.start_on, std::nullopt};
    ProcessSpec right{tt, s.t2, alpha, s.b, std::nullopt, s.end_on};
    const double l = delta_p_first_lemma(left, band, lb, rl.child(i)).estimate.mean;
    const double r = delta_p_first_lemma(right, band, lb, rr.child(i)).estimate.mean;
    return {T * (l / std::sqrt(tt - s.t1)) * (r / std::sqrt(s.t2 - tt))};
  });
  return m.estimate(0, rng.seed);
}

struct NuFactor {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
};

struct NuValue {
  std::size_t j = 0;
  std::vector<int> eps;
  std::vector<double> times;
  double value = 0.0;
  double std_error = 0.0;
  std::vector<NuFactor> breakdown;
};

// value = product of breakdown values in order; independent-factor error
// propagation.
inline NuValue assemble_nu(const SignVector& eps, const TimeTuple& times, std::vector<NuFactor> factors) {
  NuValue v;
  v.j = eps.size();
  v.eps = eps.e;
  v.times = times.t;
  double prod = 1.0, rel2 = 0.0;
  bool zero = false;
  for (const auto& f : factors) {
    if (f.value < 0.0) throw DegenerateError("nu: negative factor " + f.name);
    prod *= f.value;
    if (f.value == 0.0) zero = true;
    else rel2 += (f.std_error / f.value) * (f.std_error / f.value);
  }
  v.value = prod;
  v.std_error = zero ? 0.0 : prod * std::sqrt(rel2);
  v.breakdown = std::move(factors);
  return v;
}

// Source of the scaled infinitesimal-probability factors:
// dP/sqrt(T) for one boundary endpoint, d2P/T for two.
class FactorSource {
 public:
  virtual ~FactorSource() = default;
  virtual MCEstimate factor(const ProcessSpec& segment) = 0;
};

// Extrapolated limits, cached per segment key for the lifetime of the object.
class ExtrapolatedFactors : public FactorSource {
 public:
  ExtrapolatedFactors(Band band, DeltaPSchedule sch, RngStream rng, Parallel par = {})
      : band_(std::move(band)), sch_(std::move(sch)), rng_(rng), par_(par) {}

  MCEstimate factor(const ProcessSpec& seg) override {
    const std::string key = key_of(seg);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const auto r = delta_p_definitional(seg, band_, sch_, rng_.child(tag_of(key.c_str())), par_);
    const double tp = std::pow(seg.t2 - seg.t1, 0.5 * r.pins);
    const MCEstimate f{r.estimate.mean / tp, r.estimate.std_error / tp, r.estimate.n_samples, rng_.seed};
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, f).first->second;
  }

  std::size_t cached() const { return cache_.size(); }

  static std::string key_of(const ProcessSpec& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g|%.17g|%.17g|%s|%d|%d", s.t1, s.t2, s.a,
                  s.b ? std::to_string(*s.b).c_str() : "free", s.start_on ? sign_of(*s.start_on) : 0,
                  s.end_on ? sign_of(*s.end_on) : 0);
    return buf;
  }

 private:
  Band band_;
  DeltaPSchedule sch_;
  RngStream rng_;
  Parallel par_;
  std::mutex mu_;
  std::map<std::string, MCEstimate> cache_;
};

inline std::string interval_label(const char* what, double t1, double t2) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s[%.4g,%.4g]", what, t1, t2);
  return buf;
}

// nu_(j): density of the curve levels times the scaled factors of the j+1
// segments of Y. Free end when b is empty.
inline NuValue nu(const SignVector& eps, const TimeTuple& times, const Band& band, double a, std::optional<double> b,
                  FactorSource& src) {
  if (eps.size() != times.size()) throw DomainError("nu: |eps| must equal |times|");
  std::vector<double> levels;
  for (std::size_t i = 0; i < times.size(); ++i) levels.push_back(band.level(side_of(eps[i]), times[i]));
  std::vector<NuFactor> fs;
  fs.push_back({"density", finite_dim_density(times, levels, a, b), 0.0});
  double t_prev = 0.0, c_prev = a;
  std::optional<Side> s_prev;
  for (std::size_t i = 0; i <= times.size(); ++i) {
    ProcessSpec seg;
    seg.t1 = t_prev;
    seg.a = c_prev;
    seg.start_on = s_prev;
    if (i < times.size()) {
      seg.t2 = times[i];
      seg.end_on = side_of(eps[i]);
      seg.b = levels[i];
    } else {
      seg.t2 = 1.0;
      seg.b = b;
    }
    const int pins = boundary_pins(seg);
    MCEstimate f;
    try {
      f = src.factor(seg);
    } catch (const Error& e) {
      throw DegenerateError(interval_label(pins == 2 ? "d2P" : "dP", seg.t1, seg.t2) + ": " + e.what());
    }
    fs.push_back({interval_label(pins == 2 ? "d2P" : "dP", seg.t1, seg.t2), f.mean, f.std_error});
    t_prev = seg.t2;
    if (i < times.size()) {
      c_prev = levels[i];
      s_prev = seg.end_on;
    }
  }
  return assemble_nu(eps, times, std::move(fs));
}

}  // namespace ibp
