// ibpsim: batch front end for the path-space integration-by-parts checks.
//
//   ibpsim verify   --config run.json [--seed S] [--threads K] [--out DIR]
//   ibpsim delta-p  --config run.json ...
//   ibpsim converge --config run.json ...
//   ibpsim sample   --config run.json ...
//
// Exit codes: 0 pass, 1 numerical failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "ibp/rng.hpp"
#include "ibp/samplers.hpp"
#include "ibp/version.hpp"

namespace fs = std::filesystem;
using ibpsim::json;

namespace {

struct Context {
  ibpsim::RunConfig cfg;
  std::string config_hash;
  ibp::Parallel par;
  fs::path out;

  std::string header(const char* comment) const {
    std::ostringstream o;
    o << comment << "ibpsim version=" << ibp::kVersion << " config_hash=" << config_hash << " seed=" << cfg.seed
      << "\n";
    return o.str();
  }
  json header_json() const {
    return {{"tool", "ibpsim"}, {"version", ibp::kVersion}, {"config_hash", config_hash}, {"seed", cfg.seed}};
  }
  ibp::RngStream stream(const std::string& label) const { return ibp::RngStream{cfg.seed, ibp::tag_of(label.c_str())}; }
};

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json estimate_json(const ibp::MCEstimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"n_samples", e.n_samples}};
}

json report_json(const Context& cx, const ibp::VerificationReport& r) {
  json j;
  j["header"] = cx.header_json();
  j["scenario"] = r.scenario;
  j["valid"] = r.valid;
  if (!r.valid) j["cause"] = r.cause;
  j["pass"] = r.pass;
  j["lhs"] = estimate_json(r.lhs);
  j["bulk"] = estimate_json(r.bulk);
  j["bd"] = json::array();
  for (std::size_t i = 0; i < r.bd.size(); ++i) {
    auto e = estimate_json(r.bd[i]);
    e["j"] = i + 1;
    j["bd"].push_back(e);
  }
  j["bd_total"] = estimate_json(r.bd_total);
  j["rhs_total"] = estimate_json(r.rhs_total);
  j["z_score"] = r.z_score;
  j["z_crn"] = r.z_crn;
  j["table"] = json::array();
  for (const auto& t : r.table) {
    auto e = estimate_json(t.value);
    e["j"] = t.j;
    e["eps"] = t.eps;
    e["sigma"] = t.sigma;
    j["table"].push_back(e);
  }
  j["flags"] = r.flags;
  j["cost"] = {{"lhs_samples", r.cost.lhs_samples},
               {"y_attempts", r.cost.y_attempts},
               {"y_accepted", r.cost.y_accepted},
               {"ensembles", r.cost.ensembles},
               {"tuples", r.cost.tuples}};
  return j;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

int run_verify(const Context& cx) {
  std::ostringstream csv;
  csv << cx.header("# ") << "scenario,lhs,rhs,z,pass\n";
  bool all = true;
  for (const auto& sc : cx.cfg.scenarios) {
    const auto r = ibp::verify(sc, cx.stream("verify/" + sc.name), cx.par);
    write_file(cx.out / (sc.name + ".report.json"), report_json(cx, r).dump(2) + "\n");
    csv << sc.name << "," << fmt(r.lhs.mean) << "," << fmt(r.rhs_total.mean) << "," << fmt(r.z_score) << ","
        << (r.pass ? "PASS" : (r.valid ? "FAIL" : "INVALID")) << "\n";
    std::cout << sc.name << ": lhs=" << fmt(r.lhs.mean) << " rhs=" << fmt(r.rhs_total.mean)
              << " z=" << fmt(r.z_score) << " " << (r.pass ? "PASS" : (r.valid ? "FAIL" : "INVALID: " + r.cause))
              << "\n";
    std::cerr << "  " << sc.name << " took " << fmt(r.cost.seconds) << " s\n";
    all = all && r.pass;
  }
  write_file(cx.out / "verify_summary.csv", csv.str());
  return all ? 0 : 1;
}

std::string schedule_str(const ibp::DeltaPSchedule& s) {
  std::string o;
  for (std::size_t i = 0; i < s.sizes.size(); ++i) o += (i ? ";" : "") + std::to_string(s.sizes[i]);
  return o;
}

std::string interval_str(const ibp::ProcessSpec& s) { return "[" + fmt(s.t1) + "," + fmt(s.t2) + "]"; }

std::string pins_str(const ibp::ProcessSpec& s) {
  auto side = [](const std::optional<ibp::Side>& x, const char* none) {
    return x ? std::string(*x == ibp::Side::upper ? "upper" : "lower") : std::string(none);
  };
  return side(s.start_on, "interior") + "->" + side(s.end_on, s.free_end() ? "free" : "interior");
}

int run_delta_p(const Context& cx) {
  std::ostringstream csv;
  csv << cx.header("# ") << "case,interval,pins,route,n_schedule,estimate,se\n";
  int status = 0;
  for (const auto& job : cx.cfg.delta_p) {
    const auto rng = cx.stream("delta-p/" + job.name);
    auto row = [&](const std::string& route, const std::string& sched, const ibp::MCEstimate& e) {
      csv << job.name << "," << interval_str(job.spec) << "," << pins_str(job.spec) << "," << route << "," << sched
          << "," << fmt(e.mean) << "," << fmt(e.std_error) << "\n";
      std::cout << job.name << " " << route << ": " << fmt(e.mean) << " +- " << fmt(e.std_error) << "\n";
    };
    try {
      const auto def = ibp::delta_p_definitional(job.spec, job.band, job.schedule, rng.child("definition"), cx.par);
      row("definition", schedule_str(job.schedule), def.estimate);
      const int pins = ibp::boundary_pins(job.spec);
      if (pins == 1) {
        const auto lem = job.spec.free_end()
                             ? ibp::delta_p_free_lemma(job.spec, job.band, job.lemma, rng.child("lemma"), cx.par)
                             : ibp::delta_p_first_lemma(job.spec, job.band, job.lemma, rng.child("lemma"), cx.par);
        row("lemma", "n_grid=" + std::to_string(job.lemma.n_grid), lem.estimate);
      } else {
        for (double tau : job.taus) {
          const auto e = ibp::delta_p_second_tau(job.spec, job.band, tau, job.tau_budget,
                                                 rng.child("tau").child(ibp::tag_of(fmt(tau).c_str())), cx.par);
          row("tau=" + fmt(tau), "n_grid=" + std::to_string(job.tau_budget.n_grid), e);
        }
      }
    } catch (const ibp::Error& e) {
      std::cerr << job.name << ": " << e.what() << "\n";
      status = 1;
    }
  }
  write_file(cx.out / "delta_p.csv", csv.str());
  return status;
}

int run_converge(const Context& cx) {
  const auto& cj = *cx.cfg.converge;
  std::ostringstream csv;
  csv << cx.header("# ") << "estimator,n,estimate,se\n";
  const auto rng = cx.stream("converge/" + cj.estimator);
  std::vector<double> xs, ys, ses;
  auto row = [&](const std::string& n, double v, double se) {
    csv << cj.estimator << "," << n << "," << fmt(v) << "," << fmt(se) << "\n";
    std::cout << cj.estimator << " n=" << n << ": " << fmt(v) << " +- " << fmt(se) << "\n";
  };
  try {
    if (cj.estimator == "delta_p") {
      ibp::DeltaPSchedule s{cj.sizes, cj.samples, 1};
      const auto r = ibp::delta_p_definitional(cj.segment->spec, cj.segment->band, s, rng, cx.par);
      for (const auto& w : r.rows) row(std::to_string(w.n), w.scaled, w.scaled_se);
      row("extrapolated", r.fit.c0, r.fit.se_c0);
      row("slope_n^-1/2", r.fit.c1, r.fit.se_c1);
      row("delta_p", r.estimate.mean, r.estimate.std_error);
    } else {
      for (int n : cj.sizes) {
        ibp::MCEstimate e;
        if (cj.estimator == "band_probability") {
          const auto [spec, p] = ibp::on_grid(cj.segment->spec, cj.segment->band, n);
          e = ibp::band_probability(spec, cj.segment->band, p, cj.samples, rng.child("n", n), cx.par);
        } else {
          auto sc = *cj.scenario;
          sc.n_global = n;
          sc.budgets.lhs_samples = cj.samples;
          const auto m = ibp::lhs_bulk_moments(sc, rng.child("n", n), cx.par);
          e = m.estimate(cj.estimator == "lhs" ? 0 : 1, cx.cfg.seed);
        }
        row(std::to_string(n), e.mean, e.std_error);
        xs.push_back(1.0 / std::sqrt(static_cast<double>(n)));
        ys.push_back(e.mean);
        ses.push_back(e.std_error);
      }
      const auto f = ibp::fit_line(xs, ys, ses);
      row("extrapolated", f.c0, f.se_c0);
      row("slope_n^-1/2", f.c1, f.se_c1);
    }
  } catch (const ibp::Error& e) {
    std::cerr << "converge: " << e.what() << "\n";
    write_file(cx.out / "converge.csv", csv.str());
    return 1;
  }
  write_file(cx.out / "converge.csv", csv.str());
  return 0;
}

int run_sample(const Context& cx) {
  const auto& sj = *cx.cfg.sample;
  const auto rng = cx.stream("sample/" + sj.kind);
  const ibp::Partition p = ibp::Partition::uniform(sj.t1, sj.t2, sj.n);
  const ibp::Side side = sj.side == "upper" ? ibp::Side::upper : ibp::Side::lower;
  std::ostringstream csv;
  csv << cx.header("# ") << "# kind=" << sj.kind << "\npath,k,t,x\n";
  try {
    for (std::uint64_t i = 0; i < sj.count; ++i) {
      const auto r = rng.child("path", i);
      ibp::GridPath x;
      if (sj.kind == "bridge") {
        if (!sj.b) throw ibp::DomainError("sample: bridge needs a pinned b");
        x = ibp::sample_bridge(sj.a, *sj.b, p, r);
      } else if (sj.kind == "free") {
        x = ibp::sample_free(sj.a, p, r);
      } else if (sj.kind == "conditioned") {
        const auto spec = sj.b ? ibp::ProcessSpec::bridge(sj.t1, sj.t2, sj.a, *sj.b) : ibp::ProcessSpec::free(sj.t1, sj.t2, sj.a);
        x = ibp::sample_conditioned(spec, sj.band, p, ibp::kDefaultMaxAttempts, r);
      } else {
        std::optional<ibp::Side> s0 = side, s1;
        std::optional<double> b = 0.0;
        if (sj.kind == "excursion") s1 = side;
        else if (sj.kind == "house-moving") s0 = ibp::Side::lower, s1 = ibp::Side::upper;
        else b = std::nullopt;  // meander
        const auto spec = ibp::ProcessSpec::make(sj.band, sj.t1, sj.t2, s0, 0.0, s1, b);
        x = ibp::sample_pinned_segment(spec, sj.band, p, r);
      }
      for (int k = 0; k <= x.n(); ++k)
        csv << i << "," << k << "," << fmt(x.partition.node(k)) << "," << fmt(x.values[k]) << "\n";
    }
  } catch (const ibp::Error& e) {
    std::cerr << "sample: " << e.what() << "\n";
    return 1;
  }
  write_file(cx.out / ("paths_" + sj.kind + ".csv"), csv.str());
  std::cout << "wrote " << sj.count << " " << sj.kind << " paths\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks of integration-by-parts formulae for Brownian paths between two curves"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "overrides the seed in the config");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.fallthrough();
  auto* verify = app.add_subcommand("verify", "check both sides of the identity per scenario");
  auto* delta = app.add_subcommand("delta-p", "infinitesimal probabilities by every route");
  auto* conv = app.add_subcommand("converge", "an estimator across grid sizes");
  auto* sample = app.add_subcommand("sample", "dump sampled paths");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Context cx;
  try {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) throw ibpsim::ConfigError("cannot read config file '" + config_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    cx.cfg = ibpsim::parse_config(text);
    cx.config_hash = hex64(ibp::tag_of(text.c_str()));
  } catch (const ibpsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (seed) cx.cfg.seed = *seed;
  if (threads) cx.cfg.threads = *threads;
  if (!out_dir.empty()) cx.cfg.out = out_dir;
  cx.par.threads = std::max(1u, cx.cfg.threads);
  cx.out = cx.cfg.out;
  if ((conv->parsed() && !cx.cfg.converge) || (sample->parsed() && !cx.cfg.sample)) {
    std::cerr << "config error: field '$." << (conv->parsed() ? "converge" : "sample") << "': missing\n";
    return 2;
  }
  try {
    fs::create_directories(cx.out);
    if (verify->parsed()) return run_verify(cx);
    if (delta->parsed()) return run_delta_p(cx);
    if (conv->parsed()) return run_converge(cx);
    if (sample->parsed()) return run_sample(cx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
