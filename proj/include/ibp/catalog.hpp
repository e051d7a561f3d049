#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "functionals.hpp"
#include "nu_engine.hpp"
#include "pathcore.hpp"
#include "verifier.hpp"

namespace ibp::catalog {

inline Band flat_band() { return Band::between(Curve::constant(0.0), Curve::constant(1.0)); }

inline Band curved_band() { return Band::between(Curve::sine(0.2, std::numbers::pi), Curve::constant(1.0)); }

// (<x,1> - 0.3)^2: positive on the band and not symmetric about its centre,
// so the left side does not vanish by reflection.
inline CylFunctional shifted_quadratic() { return {{kernel("one")}, Phi::quadratic({1.0}, -0.3), 2}; }

inline std::vector<DirectionFunction> directions(int d) {
  if (d == 1) return {make_bump(0.25, 0.75)};
  if (d == 2) return {make_bump(0.15, 0.45), make_bump(0.55, 0.85)};
  throw DomainError("catalog: no direction set for d = " + std::to_string(d));
}

inline std::vector<std::string> scenario_names() {
  return {"gaussian-d1",        "flat-band-d1",      "flat-band-d2", "flat-band-d1-free",
          "flat-band-d2-free",  "curved-band-d1",    "one-sided-d1"};
}

inline Scenario scenario(const std::string& name) {
  auto make = [&](Band band, double a, std::optional<double> b, int d) {
    return Scenario{name, std::move(band), a, b, d, shifted_quadratic(), directions(d)};
  };
  if (name == "gaussian-d1") return make(Band::unbounded(), 0.5, 0.5, 1);
  if (name == "flat-band-d1") return make(flat_band(), 0.5, 0.5, 1);
  if (name == "flat-band-d2") return make(flat_band(), 0.5, 0.5, 2);
  if (name == "flat-band-d1-free") return make(flat_band(), 0.5, std::nullopt, 1);
  if (name == "flat-band-d2-free") return make(flat_band(), 0.5, std::nullopt, 2);
  if (name == "curved-band-d1") return make(curved_band(), 0.5, 0.5, 1);
  if (name == "one-sided-d1") return make(Band::above(Curve::constant(0.0)), 0.5, 0.5, 1);
  throw DomainError("unknown scenario '" + name + "'");
}

// A first-order or free-end infinitesimal probability with its continuum
// value when one is known in closed form (NaN otherwise).
struct DeltaPCase {
  std::string name;
  Band band;
  ProcessSpec spec;
  DeltaPSchedule schedule;
  double reference = std::numeric_limits<double>::quiet_NaN();
};

// Two-sided flat band, pinned endpoint at distance x from the pinned curve
// after time T: one-sided value times the image-series containment.
inline double flat_two_sided_first(double x, double T) {
  double num = 0.0;
  for (int k = -20; k <= 20; ++k) num += (x - 2.0 * k) * std::exp(-(x - 2.0 * k) * (x - 2.0 * k) / (2.0 * T));
  return std::sqrt(2.0) * x / std::sqrt(T) * num / (x * std::exp(-x * x / (2.0 * T)));
}

inline std::vector<DeltaPCase> delta_p_cases() {
  const DeltaPSchedule coarse{{50, 100, 200}, 1'000'000, 1};
  const DeltaPSchedule fine{{200, 400, 800}, 2'000'000, 1};
  const Band half = Band::above(Curve::constant(0.0));
  const Band curved_half = Band::above(Curve::sine(0.2, std::numbers::pi));
  std::vector<DeltaPCase> cs;
  cs.push_back({"one-sided-flat", half, ProcessSpec::make(half, 0.0, 1.0, {}, 0.5, Side::lower, {}), coarse,
                std::sqrt(2.0) * 0.5});
  cs.push_back({"two-sided-flat", flat_band(),
                ProcessSpec::make(flat_band(), 0.0, 0.5, Side::upper, 0.0, {}, 0.5), fine,
                flat_two_sided_first(0.5, 0.5)});
  cs.push_back({"one-sided-sine", curved_half,
                ProcessSpec::make(curved_half, 0.0, 1.0, {}, 0.5, Side::lower, {}), coarse});
  cs.push_back({"two-sided-sine", curved_band(),
                ProcessSpec::make(curved_band(), 0.0, 0.5, {}, 0.5, Side::lower, {}), fine});
  cs.push_back({"free-one-sided", half, ProcessSpec::make(half, 0.0, 1.0, Side::lower, 0.0, {}, std::nullopt),
                coarse, 1.0 / std::sqrt(std::numbers::pi)});
  cs.push_back({"free-two-sided", flat_band(),
                ProcessSpec::make(flat_band(), 0.5, 1.0, Side::lower, 0.0, {}, std::nullopt), fine});
  return cs;
}

inline DeltaPCase delta_p_case(const std::string& name) {
  for (auto& c : delta_p_cases())
    if (c.name == name) return c;
  throw DomainError("unknown delta-p case '" + name + "'");
}

}  // namespace ibp::catalog
