#pragma once

// JSON run configuration for ibpsim. Schema: configs/README.md.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibp/catalog.hpp"
#include "ibp/functionals.hpp"
#include "ibp/nu_engine.hpp"
#include "ibp/pathcore.hpp"
#include "ibp/verifier.hpp"

namespace ibpsim {

using nlohmann::json;

// Bad configuration: reported with the JSON path (and line, for syntax errors).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DeltaPJob {
  std::string name;
  ibp::Band band;
  ibp::ProcessSpec spec;
  ibp::DeltaPSchedule schedule;
  ibp::LemmaBudget lemma;
  std::vector<double> taus;  // for two boundary endpoints
  ibp::TauBudget tau_budget;
};

struct ConvergeJob {
  std::string estimator = "band_probability";  // band_probability | delta_p | lhs | bulk
  std::vector<int> sizes;
  std::uint64_t samples = 100'000;
  std::optional<ibp::Scenario> scenario;  // lhs, bulk
  std::optional<DeltaPJob> segment;       // band_probability, delta_p
};

struct SampleJob {
  std::string kind = "bridge";  // bridge | free | conditioned | excursion | house-moving | meander
  ibp::Band band;
  double t1 = 0.0, t2 = 1.0;
  double a = 0.5;
  std::optional<double> b = 0.5;
  std::string side = "lower";
  int n = 100;
  std::uint64_t count = 10;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = "out";
  std::vector<ibp::Scenario> scenarios;
  std::vector<DeltaPJob> delta_p;
  std::optional<ConvergeJob> converge;
  std::optional<SampleJob> sample;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("field '" + path + "': " + msg);
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing");
  return *it;
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    fail(path, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline double num_or(const json& j, const std::string& key, double def, const std::string& path) {
  return j.contains(key) ? num(j[key], path + "." + key) : def;
}

inline std::uint64_t count_or(const json& j, const std::string& key, std::uint64_t def, const std::string& path) {
  return j.contains(key) ? count(j[key], path + "." + key) : def;
}

inline std::vector<double> nums(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) fail(path + "." + it.key(), "unknown field");
  }
}

inline ibp::Curve curve(const json& j, const std::string& path) {
  if (j.is_number()) return ibp::Curve::constant(j.get<double>());
  const std::string type = str(need(j, "type", path), path + ".type");
  try {
    if (type == "constant") return ibp::Curve::constant(num(need(j, "value", path), path + ".value"));
    if (type == "linear")
      return ibp::Curve::linear(num(need(j, "c0", path), path + ".c0"), num(need(j, "c1", path), path + ".c1"));
    if (type == "sine")
      return ibp::Curve::sine(num(need(j, "amp", path), path + ".amp"), num(need(j, "freq", path), path + ".freq"),
                              num_or(j, "phase", 0.0, path), num_or(j, "offset", 0.0, path));
    if (type == "polynomial") return ibp::Curve::polynomial(nums(need(j, "coef", path), path + ".coef"));
    if (type == "smoothed_polyline")
      return ibp::Curve::smoothed_polyline(nums(need(j, "knots", path), path + ".knots"),
                                           nums(need(j, "values", path), path + ".values"),
                                           num(need(j, "width", path), path + ".width"));
  } catch (const ibp::Error& e) {
    fail(path, e.what());
  }
  fail(path + ".type", "unknown curve type '" + type + "' (expected constant, linear, sine, polynomial, smoothed_polyline)");
}

inline ibp::Band band(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "flat") return ibp::catalog::flat_band();
    if (s == "curved") return ibp::catalog::curved_band();
    if (s == "unbounded") return ibp::Band::unbounded();
    if (s == "half") return ibp::Band::above(ibp::Curve::constant(0.0));
    fail(path, "unknown band '" + s + "' (expected flat, curved, unbounded, half, or an object)");
  }
  if (!j.is_object()) fail(path, "expected a band name or object");
  only_keys(j, {"lower", "upper"}, path);
  ibp::Band b;
  if (j.contains("lower") && !j["lower"].is_null()) b.lower = curve(j["lower"], path + ".lower");
  if (j.contains("upper") && !j["upper"].is_null()) b.upper = curve(j["upper"], path + ".upper");
  try {
    b.validate();
  } catch (const ibp::Error& e) {
    fail(path, e.what());
  }
  return b;
}

inline ibp::CylFunctional phi(const json& j, const std::string& path) {
  only_keys(j, {"profile", "coef", "shift", "value", "kernels", "order"}, path);
  std::vector<ibp::Curve> ks;
  const auto& kj = need(j, "kernels", path);
  if (!kj.is_array() || kj.empty()) fail(path + ".kernels", "expected a nonempty array");
  for (std::size_t i = 0; i < kj.size(); ++i) {
    const std::string p = path + ".kernels[" + std::to_string(i) + "]";
    try {
      ks.push_back(ibp::catalog::kernel(str(kj[i], p)));
    } catch (const ibp::Error& e) {
      fail(p, e.what());
    }
  }
  const std::size_t ell = ks.size();
  const std::string prof = str(need(j, "profile", path), path + ".profile");
  std::vector<double> coef = j.contains("coef") ? nums(j["coef"], path + ".coef") : std::vector<double>(ell, 1.0);
  if (coef.size() != ell) fail(path + ".coef", "length must equal the number of kernels");
  const double shift = num_or(j, "shift", 0.0, path);
  const int order = static_cast<int>(count_or(j, "order", 2, path));
  ibp::Phi f = ibp::Phi::constant(1.0, ell);
  if (prof == "constant") f = ibp::Phi::constant(num_or(j, "value", 1.0, path), ell);
  else if (prof == "linear") f = ibp::Phi::linear(coef);
  else if (prof == "quadratic") f = ibp::Phi::quadratic(coef, shift);
  else if (prof == "cubic") f = ibp::Phi::cubic(coef, shift);
  else if (prof == "tanh") f = ibp::Phi::tanh_of(coef, shift);
  else if (prof == "sine") f = ibp::Phi::sine_of(coef, shift);
  else fail(path + ".profile", "unknown profile '" + prof + "' (expected constant, linear, quadratic, cubic, tanh, sine)");
  return {std::move(ks), std::move(f), order};
}

inline std::optional<double> end_value(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "free") return std::nullopt;
    fail(path, "expected a number or \"free\"");
  }
  return num(j, path);
}

inline ibp::Scenario scenario(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  only_keys(j, {"name", "catalog", "band", "a", "b", "d", "phi", "directions", "n", "budgets", "quadrature"}, path);
  std::optional<ibp::Scenario> sc;
  if (j.contains("catalog")) {
    try {
      sc = ibp::catalog::scenario(str(j["catalog"], path + ".catalog"));
    } catch (const ibp::Error& e) {
      fail(path + ".catalog", e.what());
    }
  } else {
    const int d = static_cast<int>(count(need(j, "d", path), path + ".d"));
    const auto& dj = need(j, "directions", path);
    if (!dj.is_array()) fail(path + ".directions", "expected an array of [alpha, beta] pairs");
    std::vector<ibp::DirectionFunction> hs;
    for (std::size_t i = 0; i < dj.size(); ++i) {
      const std::string p = path + ".directions[" + std::to_string(i) + "]";
      const auto v = nums(dj[i], p);
      if (v.size() != 2) fail(p, "expected [alpha, beta]");
      try {
        hs.push_back(ibp::make_bump(v[0], v[1]));
      } catch (const ibp::Error& e) {
        fail(p, e.what());
      }
    }
    sc = ibp::Scenario{"", band(need(j, "band", path), path + ".band"), num(need(j, "a", path), path + ".a"),
                       end_value(need(j, "b", path), path + ".b"), d, phi(need(j, "phi", path), path + ".phi"),
                       std::move(hs)};
  }
  if (j.contains("name")) sc->name = str(j["name"], path + ".name");
  if (sc->name.empty()) fail(path + ".name", "missing");
  if (j.contains("n")) sc->n_global = static_cast<int>(count(j["n"], path + ".n"));
  if (j.contains("budgets")) {
    const auto& b = j["budgets"];
    const std::string p = path + ".budgets";
    only_keys(b, {"lhs_samples", "y_samples", "pilot", "max_attempts", "groups"}, p);
    sc->budgets.lhs_samples = count_or(b, "lhs_samples", sc->budgets.lhs_samples, p);
    sc->budgets.y_samples = count_or(b, "y_samples", sc->budgets.y_samples, p);
    sc->budgets.pilot = count_or(b, "pilot", sc->budgets.pilot, p);
    sc->budgets.max_attempts = count_or(b, "max_attempts", sc->budgets.max_attempts, p);
    sc->budgets.groups = static_cast<int>(count_or(b, "groups", sc->budgets.groups, p));
  }
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    const std::string p = path + ".quadrature";
    only_keys(q, {"nodes_per_dim", "collar"}, p);
    sc->quad.nodes_per_dim = static_cast<int>(count_or(q, "nodes_per_dim", sc->quad.nodes_per_dim, p));
    sc->quad.collar = static_cast<int>(count_or(q, "collar", sc->quad.collar, p));
  }
  try {
    sc->validate();
  } catch (const ibp::Error& e) {
    fail(path, e.what());
  }
  return *sc;
}

inline std::optional<ibp::Side> side_name(const json& j, const std::string& path) {
  if (!j.is_string()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s == "lower") return ibp::Side::lower;
  if (s == "upper") return ibp::Side::upper;
  if (s == "free") return std::nullopt;
  fail(path, "expected lower, upper, free, or a number");
}

inline ibp::DeltaPSchedule schedule(const json& j, const ibp::DeltaPSchedule& def, const std::string& path) {
  ibp::DeltaPSchedule s = def;
  only_keys(j, {"sizes", "samples"}, path);
  if (j.contains("sizes")) {
    s.sizes.clear();
    for (double v : nums(j["sizes"], path + ".sizes")) s.sizes.push_back(static_cast<int>(v));
  }
  s.samples = count_or(j, "samples", s.samples, path);
  try {
    s.validate();
  } catch (const ibp::Error& e) {
    fail(path, e.what());
  }
  return s;
}

inline DeltaPJob delta_p_job(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  only_keys(j, {"name", "catalog", "band", "t1", "t2", "start", "end", "schedule", "lemma", "tau", "tau_budget"}, path);
  DeltaPJob job;
  if (j.contains("catalog")) {
    try {
      auto c = ibp::catalog::delta_p_case(str(j["catalog"], path + ".catalog"));
      job.name = c.name;
      job.band = c.band;
      job.spec = c.spec;
      job.schedule = c.schedule;
    } catch (const ibp::Error& e) {
      fail(path + ".catalog", e.what());
    }
  } else {
    job.band = band(need(j, "band", path), path + ".band");
    const double t1 = num(need(j, "t1", path), path + ".t1");
    const double t2 = num(need(j, "t2", path), path + ".t2");
    const auto& sj = need(j, "start", path);
    const auto& ej = need(j, "end", path);
    const auto ss = side_name(sj, path + ".start");
    const auto es = side_name(ej, path + ".end");
    const double a = ss ? 0.0 : num(sj, path + ".start");
    std::optional<double> b;
    if (!es && !(ej.is_string() && ej.get<std::string>() == "free")) b = num(ej, path + ".end");
    if (es) b = 0.0;
    try {
      job.spec = ibp::ProcessSpec::make(job.band, t1, t2, ss, a, es, b);
      job.spec.validate(job.band);
    } catch (const ibp::Error& e) {
      fail(path, e.what());
    }
  }
  if (j.contains("name")) job.name = str(j["name"], path + ".name");
  if (job.name.empty()) fail(path + ".name", "missing");
  if (j.contains("schedule")) job.schedule = schedule(j["schedule"], job.schedule, path + ".schedule");
  if (j.contains("lemma")) {
    const auto& l = j["lemma"];
    const std::string p = path + ".lemma";
    only_keys(l, {"samples", "n_grid", "law"}, p);
    job.lemma.samples = count_or(l, "samples", job.lemma.samples, p);
    job.lemma.n_grid = static_cast<int>(count_or(l, "n_grid", job.lemma.n_grid, p));
    if (l.contains("law")) {
      const auto law = str(l["law"], p + ".law");
      if (law == "exact") job.lemma.law = ibp::ConditionedLaw::exact;
      else if (law == "grid") job.lemma.law = ibp::ConditionedLaw::grid;
      else fail(p + ".law", "expected exact or grid");
    }
  }
  if (j.contains("tau")) job.taus = nums(j["tau"], path + ".tau");
  if (j.contains("tau_budget")) {
    const auto& t = j["tau_budget"];
    const std::string p = path + ".tau_budget";
    only_keys(t, {"outer", "inner", "n_grid"}, p);
    job.tau_budget.outer = count_or(t, "outer", job.tau_budget.outer, p);
    job.tau_budget.inner = count_or(t, "inner", job.tau_budget.inner, p);
    job.tau_budget.n_grid = static_cast<int>(count_or(t, "n_grid", job.tau_budget.n_grid, p));
  }
  return job;
}

inline std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("syntax error at " + locate(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  if (!j.is_object()) fail("$", "top level must be an object");
  only_keys(j, {"seed", "threads", "out", "scenarios", "delta_p", "converge", "sample"}, "$");
  RunConfig c;
  c.seed = count(need(j, "seed", "$"), "$.seed");
  c.threads = static_cast<unsigned>(count_or(j, "threads", 1, "$"));
  if (j.contains("out")) c.out = str(j["out"], "$.out");
  if (j.contains("scenarios")) {
    const auto& s = j["scenarios"];
    if (!s.is_array()) fail("$.scenarios", "expected an array");
    for (std::size_t i = 0; i < s.size(); ++i)
      c.scenarios.push_back(scenario(s[i], "$.scenarios[" + std::to_string(i) + "]"));
  }
  if (j.contains("delta_p")) {
    const auto& s = j["delta_p"];
    if (!s.is_array()) fail("$.delta_p", "expected an array");
    for (std::size_t i = 0; i < s.size(); ++i)
      c.delta_p.push_back(delta_p_job(s[i], "$.delta_p[" + std::to_string(i) + "]"));
  }
  if (j.contains("converge")) {
    const auto& v = j["converge"];
    const std::string p = "$.converge";
    only_keys(v, {"estimator", "sizes", "samples", "scenario", "segment"}, p);
    ConvergeJob cj;
    if (v.contains("estimator")) cj.estimator = str(v["estimator"], p + ".estimator");
    if (cj.estimator != "band_probability" && cj.estimator != "delta_p" && cj.estimator != "lhs" &&
        cj.estimator != "bulk")
      fail(p + ".estimator", "unknown estimator '" + cj.estimator + "' (expected band_probability, delta_p, lhs, bulk)");
    for (double n : nums(need(v, "sizes", p), p + ".sizes")) cj.sizes.push_back(static_cast<int>(n));
    if (cj.sizes.size() < 2) fail(p + ".sizes", "need at least two sizes");
    cj.samples = count_or(v, "samples", cj.samples, p);
    if (cj.estimator == "lhs" || cj.estimator == "bulk")
      cj.scenario = scenario(need(v, "scenario", p), p + ".scenario");
    else
      cj.segment = delta_p_job(need(v, "segment", p), p + ".segment");
    c.converge = cj;
  }
  if (j.contains("sample")) {
    const auto& v = j["sample"];
    const std::string p = "$.sample";
    only_keys(v, {"kind", "band", "t1", "t2", "a", "b", "side", "n", "count"}, p);
    SampleJob sj;
    if (v.contains("kind")) sj.kind = str(v["kind"], p + ".kind");
    const std::vector<std::string> kinds{"bridge", "free", "conditioned", "excursion", "house-moving", "meander"};
    if (std::find(kinds.begin(), kinds.end(), sj.kind) == kinds.end())
      fail(p + ".kind", "unknown kind '" + sj.kind + "'");
    sj.band = v.contains("band") ? band(v["band"], p + ".band") : ibp::catalog::flat_band();
    sj.t1 = num_or(v, "t1", 0.0, p);
    sj.t2 = num_or(v, "t2", 1.0, p);
    sj.a = num_or(v, "a", 0.5, p);
    if (v.contains("b")) sj.b = end_value(v["b"], p + ".b");
    if (v.contains("side")) sj.side = str(v["side"], p + ".side");
    if (sj.side != "lower" && sj.side != "upper") fail(p + ".side", "expected lower or upper");
    sj.n = static_cast<int>(count_or(v, "n", sj.n, p));
    sj.count = count_or(v, "count", sj.count, p);
    c.sample = sj;
  }
  return c;
}

}  // namespace ibpsim
