#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ibp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double heat_kernel(double t, double x, double y) {
  if (!(t > 0.0)) throw DomainError("heat_kernel: time must be positive");
  const double d = x - y;
  return std::exp(-d * d / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

inline double log_heat_kernel(double t, double x, double y) {
  if (!(t > 0.0)) throw DomainError("log_heat_kernel: time must be positive");
  const double d = x - y;
  return -d * d / (2.0 * t) - 0.5 * std::log(2.0 * std::numbers::pi * t);
}

// Uniform partition of [t_start, t_end] into n steps. A partition cut out of
// the global grid {k / grid_n} remembers its offset so that node times are
// computed identically in every segment that shares them.
struct Partition {
  double t_start = 0.0;
  double t_end = 1.0;
  int n = 1;
  int grid_n = 0;
  int k0 = 0;

  static Partition uniform(double t0, double t1, int n) {
    if (n < 1) throw DomainError("Partition: n must be >= 1");
    if (!(t1 > t0)) throw DomainError("Partition: empty interval");
    return {t0, t1, n, 0, 0};
  }
  static Partition grid(int n) { return slice(n, 0, n); }
  static Partition slice(int grid_n, int k1, int k2) {
    if (grid_n < 1 || k1 < 0 || k2 > grid_n || k2 <= k1) throw DomainError("Partition: bad slice");
    return {static_cast<double>(k1) / grid_n, static_cast<double>(k2) / grid_n, k2 - k1, grid_n, k1};
  }

  double step() const { return (t_end - t_start) / n; }
  double node(int k) const {
    if (grid_n > 0) return static_cast<double>(k0 + k) / grid_n;
    if (k == n) return t_end;
    return t_start + k * step();
  }
  double length() const { return t_end - t_start; }
};

struct GridPath {
  Partition partition;
  std::vector<double> values;

  int n() const { return partition.n; }
  double front() const { return values.front(); }
  double back() const { return values.back(); }

  // Piecewise-linear evaluation.
  double at(double t) const {
    const double s = partition.step();
    double u = (t - partition.t_start) / s;
    if (u <= 0.0) return values.front();
    if (u >= partition.n) return values.back();
    int k = static_cast<int>(std::floor(u));
    if (k >= partition.n) k = partition.n - 1;
    const double tk = partition.node(k), tk1 = partition.node(k + 1);
    return ((t - tk) * values[k + 1] + (tk1 - t) * values[k]) / (tk1 - tk);
  }
};

inline GridPath polygonalize(std::vector<double> samples, const Partition& p) {
  if (samples.size() != static_cast<std::size_t>(p.n) + 1)
    throw StructuralError("polygonalize: expected " + std::to_string(p.n + 1) + " samples, got " +
                          std::to_string(samples.size()));
  return {p, std::move(samples)};
}

// A C^2 function of time with closed-form first and second derivatives.
class Curve {
 public:
  using Fn = std::function<double(double)>;

  Curve(Fn f, Fn df, Fn d2f, std::string name = "custom")
      : f_(std::make_shared<Fns>(Fns{std::move(f), std::move(df), std::move(d2f)})), name_(std::move(name)) {}

  double operator()(double t) const { return f_->f(t); }
  double value(double t) const { return f_->f(t); }
  double derivative(double t) const { return f_->df(t); }
  double second_derivative(double t) const { return f_->d2f(t); }
  const std::string& name() const { return name_; }

  static Curve constant(double c) {
    return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; },
            "constant(" + fmt(c) + ")"};
  }
  static Curve linear(double c0, double c1) {
    return {[=](double t) { return c0 + c1 * t; }, [=](double) { return c1; }, [](double) { return 0.0; },
            "linear(" + fmt(c0) + "," + fmt(c1) + ")"};
  }
  // offset + amp * sin(freq * t + phase)
  static Curve sine(double amp, double freq, double phase = 0.0, double offset = 0.0) {
    return {[=](double t) { return offset + amp * std::sin(freq * t + phase); },
            [=](double t) { return amp * freq * std::cos(freq * t + phase); },
            [=](double t) { return -amp * freq * freq * std::sin(freq * t + phase); },
            "sine(" + fmt(amp) + "," + fmt(freq) + "," + fmt(phase) + "," + fmt(offset) + ")"};
  }
  // sum_i c[i] t^i
  static Curve polynomial(std::vector<double> c) {
    auto coef = std::make_shared<const std::vector<double>>(std::move(c));
    auto ev = [coef](double t, int der) {
      double s = 0.0;
      for (int i = static_cast<int>(coef->size()) - 1; i >= der; --i) {
        double f = (*coef)[i];
        for (int j = 0; j < der; ++j) f *= (i - j);
        s = s * t + f;
      }
      return s;
    };
    std::string nm = "polynomial(";
    for (std::size_t i = 0; i < coef->size(); ++i) nm += (i ? "," : "") + fmt((*coef)[i]);
    return {[ev](double t) { return ev(t, 0); }, [ev](double t) { return ev(t, 1); },
            [ev](double t) { return ev(t, 2); }, nm + ")"};
  }
  // Piecewise-linear interpolant of (knots, values) convolved with a Gaussian
  // of standard deviation `width`. Extends linearly outside the knots.
  static Curve smoothed_polyline(std::vector<double> knots, std::vector<double> vals, double width) {
    if (knots.size() < 2 || knots.size() != vals.size()) throw DomainError("smoothed_polyline: bad knots");
    if (!(width > 0.0)) throw DomainError("smoothed_polyline: width must be positive");
    const double s0 = (vals[1] - vals[0]) / (knots[1] - knots[0]);
    const double y0 = vals[0] - s0 * knots[0];
    std::vector<std::pair<double, double>> kinks;  // (location, slope jump)
    for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
      const double sl = (vals[i] - vals[i - 1]) / (knots[i] - knots[i - 1]);
      const double sr = (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i]);
      kinks.emplace_back(knots[i], sr - sl);
    }
    auto ks = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(kinks));
    const double w = width;
    auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
    return {[=](double t) {
              double v = y0 + s0 * t;
              for (auto [c, j] : *ks) {
                const double z = (t - c) / w;
                v += j * ((t - c) * Phi(z) + w * phi(z));
              }
              return v;
            },
            [=](double t) {
              double v = s0;
              for (auto [c, j] : *ks) v += j * Phi((t - c) / w);
              return v;
            },
            [=](double t) {
              double v = 0.0;
              for (auto [c, j] : *ks) v += j * phi((t - c) / w) / w;
              return v;
            },
            "smoothed_polyline(width=" + fmt(width) + ")"};
  }

  Curve shifted(double c) const {
    auto g = f_;
    return {[g, c](double t) { return g->f(t) + c; }, g->df, g->d2f, name_ + "+" + fmt(c)};
  }
  Curve negated() const {
    auto g = f_;
    return {[g](double t) { return -g->f(t); }, [g](double t) { return -g->df(t); },
            [g](double t) { return -g->d2f(t); }, "-" + name_};
  }
  Curve scaled(double c) const {
    auto g = f_;
    return {[g, c](double t) { return c * g->f(t); }, [g, c](double t) { return c * g->df(t); },
            [g, c](double t) { return c * g->d2f(t); }, fmt(c) + "*" + name_};
  }

  // Analytic derivatives against central differences on a probe grid.
  bool derivatives_consistent(double tol = 1e-6, int probes = 101) const {
    const double e = 1e-4;
    for (int i = 0; i < probes; ++i) {
      const double t = static_cast<double>(i) / (probes - 1);
      const double d1 = (value(t + e) - value(t - e)) / (2 * e);
      const double d2 = (derivative(t + e) - derivative(t - e)) / (2 * e);
      if (std::abs(d1 - derivative(t)) > tol * (1.0 + std::abs(derivative(t)))) return false;
      if (std::abs(d2 - second_derivative(t)) > tol * (1.0 + std::abs(second_derivative(t)))) return false;
    }
    return true;
  }

 private:
  struct Fns {
    Fn f, df, d2f;
  };
  static std::string fmt(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
  }
  std::shared_ptr<const Fns> f_;
  std::string name_;
};

enum class Side { lower = -1, upper = 1 };

inline int sign_of(Side s) { return s == Side::upper ? 1 : -1; }
inline Side side_of(int eps) {
  if (eps != 1 && eps != -1) throw DomainError("sign entries must be +1 or -1");
  return eps > 0 ? Side::upper : Side::lower;
}
inline Side opposite(Side s) { return s == Side::upper ? Side::lower : Side::upper; }

struct Band {
  std::optional<Curve> lower;
  std::optional<Curve> upper;

  static Band between(Curve lo, Curve hi) { return {std::move(lo), std::move(hi)}; }
  static Band above(Curve lo) { return {std::move(lo), std::nullopt}; }
  static Band below(Curve hi) { return {std::nullopt, std::move(hi)}; }
  static Band unbounded() { return {}; }

  double lo(double t) const { return lower ? lower->value(t) : -kInf; }
  double hi(double t) const { return upper ? upper->value(t) : kInf; }
  bool has(Side s) const { return s == Side::upper ? upper.has_value() : lower.has_value(); }
  const Curve& curve(Side s) const {
    const auto& c = s == Side::upper ? upper : lower;
    if (!c) throw DomainError("band has no curve on that side");
    return *c;
  }
  double level(Side s, double t) const { return curve(s).value(t); }
  bool contains(double t, double x) const { return lo(t) <= x && x <= hi(t); }
  bool strictly_inside(double t, double x) const { return lo(t) < x && x < hi(t); }

  Band shifted(double c) const {
    Band b;
    if (lower) b.lower = lower->shifted(c);
    if (upper) b.upper = upper->shifted(c);
    return b;
  }
  // x -> -x
  Band reflected() const {
    Band b;
    if (upper) b.lower = upper->negated();
    if (lower) b.upper = lower->negated();
    return b;
  }
  // Keep only the curve on side s (the other side moves to infinity).
  Band one_sided(Side s) const {
    Band b;
    if (s == Side::upper) b.upper = curve(s);
    else b.lower = curve(s);
    return b;
  }

  // Positive gap on a 10^4 probe grid and consistent curve derivatives.
  void validate() const {
    if (lower && !lower->derivatives_consistent()) throw DomainError("band: lower curve derivatives inconsistent");
    if (upper && !upper->derivatives_consistent()) throw DomainError("band: upper curve derivatives inconsistent");
    if (lower && upper) {
      double gap = kInf;
      for (int i = 0; i <= 10000; ++i) {
        const double t = i / 10000.0;
        gap = std::min(gap, upper->value(t) - lower->value(t));
      }
      if (!(gap > 0.0)) throw DomainError("band: curves touch or cross");
    }
  }
};

struct SignVector {
  std::vector<int> e;

  explicit SignVector(std::vector<int> v) : e(std::move(v)) {
    if (e.empty()) throw DomainError("SignVector: empty");
    for (int x : e)
      if (x != 1 && x != -1) throw DomainError("SignVector: entries must be +1 or -1");
  }
  std::size_t size() const { return e.size(); }
  int operator[](std::size_t i) const { return e[i]; }
  int product() const {
    int p = 1;
    for (int x : e) p *= x;
    return p;
  }
  // All 2^j sign vectors, first entry varying slowest, + before -.
  static std::vector<SignVector> all(std::size_t j) {
    std::vector<SignVector> out;
    for (std::size_t m = 0; m < (std::size_t{1} << j); ++m) {
      std::vector<int> v(j);
      for (std::size_t i = 0; i < j; ++i) v[i] = (m >> (j - 1 - i)) & 1 ? -1 : 1;
      out.emplace_back(std::move(v));
    }
    return out;
  }
  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < e.size(); ++i) s += (i ? "," : "") + std::string(e[i] > 0 ? "+" : "-");
    return s + ")";
  }
};

struct TimeTuple {
  std::vector<double> t;

  explicit TimeTuple(std::vector<double> v) : t(std::move(v)) {
    if (t.empty()) throw DomainError("TimeTuple: empty");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(t[i] > 0.0 && t[i] < 1.0)) throw DomainError("TimeTuple: times must lie in (0,1)");
      if (i > 0 && !(t[i] > t[i - 1])) throw DomainError("TimeTuple: times must be strictly increasing");
    }
  }
  std::size_t size() const { return t.size(); }
  double operator[](std::size_t i) const { return t[i]; }
};

// Trapezoid weights on the path's grid.
inline double trapezoid_weight(const Partition& p, int k) {
  const double s = p.step();
  return (k == 0 || k == p.n) ? 0.5 * s : s;
}

template <class F>
double trapezoid(const Partition& p, F&& f) {
  double s = 0.0;
  for (int k = 0; k <= p.n; ++k) s += trapezoid_weight(p, k) * f(k, p.node(k));
  return s;
}

inline double inner_product(const GridPath& x, const Curve& lam) {
  return trapezoid(x.partition, [&](int k, double t) { return x.values[k] * lam(t); });
}

inline double inner_product(const GridPath& x, std::span<const double> lam_at_nodes) {
  if (lam_at_nodes.size() != x.values.size()) throw StructuralError("inner_product: kernel length mismatch");
  return trapezoid(x.partition, [&](int k, double) { return x.values[k] * lam_at_nodes[k]; });
}

inline bool in_band(const GridPath& x, const Band& band) {
  for (int k = 0; k <= x.n(); ++k) {
    const double t = x.partition.node(k);
    const double v = x.values[k];
    if (v < band.lo(t) || v > band.hi(t)) return false;
  }
  return true;
}

inline double cameron_martin_exponent(const Curve& g, const GridPath& x) {
  const Partition& p = x.partition;
  const double t1 = p.node(0), t2 = p.node(p.n);
  const double cross = trapezoid(p, [&](int k, double t) { return x.values[k] * g.second_derivative(t); });
  const double energy = trapezoid(p, [&](int, double t) {
    const double d = g.derivative(t);
    return d * d;
  });
  return g.derivative(t2) * x.back() - g.derivative(t1) * x.front() - cross - 0.5 * energy;
}

inline double cameron_martin(const Curve& g, const GridPath& x) { return std::exp(cameron_martin_exponent(g, x)); }

inline GridPath concat(const std::vector<GridPath>& segs) {
  if (segs.empty()) throw StructuralError("concat: no segments");
  for (std::size_t i = 1; i < segs.size(); ++i) {
    const auto& a = segs[i - 1];
    const auto& b = segs[i];
    if (a.partition.node(a.n()) != b.partition.node(0))
      throw StructuralError("concat: segments do not abut");
    if (std::abs(a.partition.step() - b.partition.step()) > 1e-12 * a.partition.step())
      throw StructuralError("concat: segments use different steps");
    if (a.back() != b.front()) throw StructuralError("concat: junction values differ");
  }
  int total = 0;
  for (const auto& s : segs) total += s.n();
  const auto& first = segs.front().partition;
  const auto& last = segs.back().partition;
  bool aligned = first.grid_n > 0;
  for (const auto& s : segs) aligned = aligned && s.partition.grid_n == first.grid_n;
  Partition p = aligned ? Partition::slice(first.grid_n, first.k0, last.k0 + last.n)
                        : Partition::uniform(first.t_start, last.node(last.n), total);
  std::vector<double> v;
  v.reserve(total + 1);
  v.push_back(segs.front().front());
  for (const auto& s : segs) v.insert(v.end(), s.values.begin() + 1, s.values.end());
  return {p, std::move(v)};
}

}  // namespace ibp
