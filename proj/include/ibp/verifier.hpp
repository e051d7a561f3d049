#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "functionals.hpp"
#include "nu_engine.hpp"
#include "parallel.hpp"
#include "pathcore.hpp"
#include "rng.hpp"
#include "samplers.hpp"
#include "stats.hpp"

namespace ibp {

struct Budgets {
  std::uint64_t lhs_samples = 1'000'000;
  std::uint64_t y_samples = 20'000;  // accepted draws per segment ensemble
  std::uint64_t pilot = 4096;
  std::uint64_t max_attempts = 20'000'000;
  int groups = 20;  // jackknife groups
};

struct Quadrature {
  int nodes_per_dim = 12;
  int collar = 1;  // tuples with |k_i - k_l| <= collar are dropped
};

struct Scenario {
  std::string name;
  Band band;
  double a = 0.5;
  std::optional<double> b;  // empty: free end
  int d = 1;
  CylFunctional phi;
  std::vector<DirectionFunction> hs;
  int n_global = 100;
  Budgets budgets;
  Quadrature quad;
  std::uint64_t seed = 0;

  bool free_end() const { return !b.has_value(); }

  void validate() const {
    band.validate();
    if (d < 1) throw DomainError("scenario " + name + ": d must be at least 1");
    if (static_cast<int>(hs.size()) != d) throw DomainError("scenario " + name + ": need exactly d direction functions");
    if (d > phi.d) throw DomainError("scenario " + name + ": d exceeds the functional's order");
    if (n_global < 4) throw DomainError("scenario " + name + ": n_global must be at least 4");
    if (!band.strictly_inside(0.0, a)) throw DomainError("scenario " + name + ": a must lie strictly inside the band");
    if (b && !band.strictly_inside(1.0, *b)) throw DomainError("scenario " + name + ": b must lie strictly inside the band");
    for (const auto& h : hs)
      if (!(h.alpha > 0.0 && h.beta < 1.0 && h.alpha < h.beta))
        throw DomainError("scenario " + name + ": direction supports must lie inside (0,1)");
    if (budgets.lhs_samples < 2 || budgets.y_samples < 2 || budgets.pilot < 1 || budgets.groups < 2)
      throw DomainError("scenario " + name + ": budgets too small");
    if (quad.nodes_per_dim < 1 || quad.collar < 0) throw DomainError("scenario " + name + ": bad quadrature");
  }
};

// One (j, eps, sigma) contribution to BD^(j), sign and weights included.
struct TermEntry {
  int j = 0;
  std::vector<int> eps;
  std::vector<int> sigma;  // 1-based permutation of the directions
  MCEstimate value;
};

struct Cost {
  std::uint64_t lhs_samples = 0;
  std::uint64_t y_attempts = 0;
  std::uint64_t y_accepted = 0;
  std::uint64_t ensembles = 0;
  std::uint64_t tuples = 0;
  double seconds = 0.0;
};

struct VerificationReport {
  std::string scenario;
  bool valid = true;
  std::string cause;
  MCEstimate lhs, bulk;
  std::vector<MCEstimate> bd;  // bd[j-1]
  MCEstimate bd_total;
  MCEstimate rhs_total;
  double z_score = 0.0;
  double z_crn = 0.0;  // uses the common-random-number covariance of lhs and bulk
  bool pass = false;
  std::vector<TermEntry> table;
  std::vector<std::string> flags;
  Cost cost;
};

// PASS rule: z <= 3 and every component SE <= 10% of max(|lhs|, |rhs|, 1e-3).
inline bool passes(const VerificationReport& r) {
  if (!r.valid) return false;
  const double scale = std::max({std::abs(r.lhs.mean), std::abs(r.rhs_total.mean), 1e-3});
  const double cap = 0.1 * scale;
  if (r.lhs.std_error > cap || r.bulk.std_error > cap) return false;
  for (const auto& e : r.bd)
    if (e.std_error > cap) return false;
  return r.z_score <= 3.0;
}

inline std::vector<std::vector<int>> permutations(int d) {
  std::vector<int> p(d);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

// Wick product of the discrete Ito integrals I[idx...], with covariances C.
inline double wick(const double* I, const std::vector<std::vector<double>>& C, const int* idx, int m) {
  if (m == 0) return 1.0;
  if (m == 1) return I[idx[0]];
  std::vector<int> rest(idx + 1, idx + m);
  double v = I[idx[0]] * wick(I, C, rest.data(), m - 1);
  for (int b = 0; b < m - 1; ++b) {
    std::vector<int> r2;
    for (int c = 0; c < m - 1; ++c)
      if (c != b) r2.push_back(rest[c]);
    v -= C[idx[0]][rest[b]] * wick(I, C, r2.data(), m - 2);
  }
  return v;
}

namespace detail {

// Grid tables shared by every estimator of one scenario.
struct Tables {
  int n = 0;
  double s = 0.0;
  std::size_t ell = 0;
  int d = 0;
  std::vector<std::vector<double>> wl;     // wl[j][k] = trapezoid weight * lambda_j(t_k)
  std::vector<std::vector<double>> hv;     // h_i(t_k)
  std::vector<std::vector<double>> dh;     // (h_i(t_{k+1}) - h_i(t_k)) / s
  std::vector<std::vector<double>> H;      // <h_i, lambda_j>
  std::vector<std::vector<double>> C;      // sum_k dh_a dh_b s

  Tables(const Scenario& sc) : n(sc.n_global), s(1.0 / sc.n_global), ell(sc.phi.ell()), d(sc.d) {
    const Partition p = Partition::grid(n);
    wl.assign(ell, std::vector<double>(n + 1));
    for (std::size_t j = 0; j < ell; ++j)
      for (int k = 0; k <= n; ++k) wl[j][k] = trapezoid_weight(p, k) * sc.phi.kernels[j](p.node(k));
    hv.assign(d, std::vector<double>(n + 1));
    dh.assign(d, std::vector<double>(n, 0.0));
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k <= n; ++k) hv[i][k] = sc.hs[i](p.node(k));
      for (int k = 0; k < n; ++k) dh[i][k] = (hv[i][k + 1] - hv[i][k]) / s;
    }
    H = h_lambda_table(sc.phi, sc.hs, p);
    C.assign(d, std::vector<double>(d, 0.0));
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int k = 0; k < n; ++k) C[a][b] += dh[a][k] * dh[b][k] * s;
  }

  // Adds node coordinates and Ito increments of x over nodes [k1, k2) (plus
  // node n when k2 == n) into out = (u_1..u_ell, I_1..I_d).
  void summarize(const double* x, int k1, int k2, double* out) const {
    const int last = k2 == n ? n : k2 - 1;
    for (std::size_t j = 0; j < ell; ++j) {
      double u = 0.0;
      for (int k = k1; k <= last; ++k) u += wl[j][k] * x[k - k1];
      out[j] += u;
    }
    for (int i = 0; i < d; ++i) {
      double v = 0.0;
      for (int k = k1; k < k2; ++k) v += dh[i][k] * (x[k + 1 - k1] - x[k - k1]);
      out[ell + i] += v;
    }
  }
};

}  // namespace detail

// E[1_K grad^(d) phi(h_1..h_d)(X)] and E[1_K phi(X) :prod I_i:] on one stream.
// Returns (lhs, bulk, lhs - bulk) moments.
inline Moments<3> lhs_bulk_moments(const Scenario& sc, const RngStream& rng, const Parallel& par = {}) {
  const detail::Tables tb(sc);
  const Partition p = Partition::grid(sc.n_global);
  const ProcessSpec spec = sc.b ? ProcessSpec::bridge(0.0, 1.0, sc.a, *sc.b) : ProcessSpec::free(0.0, 1.0, sc.a);
  const SegmentSampler smp(spec, sc.band, p);
  std::vector<int> all(sc.d);
  std::iota(all.begin(), all.end(), 0);
  const int D = static_cast<int>(tb.ell) + sc.d;
  return mc_moments<3>(sc.budgets.lhs_samples, par, [&](std::uint64_t i) -> std::array<double, 3> {
    thread_local std::vector<double> buf, sum;
    buf.resize(sc.n_global + 1);
    sum.assign(D, 0.0);
    auto g = rng.sample(i);
    if (!smp.draw(g, buf.data())) return {0.0, 0.0, 0.0};
    tb.summarize(buf.data(), 0, sc.n_global, sum.data());
    const std::span<const double> u(sum.data(), tb.ell);
    const double l = grad_phi_from(sc.phi.phi, u, tb.H);
    const double r = sc.phi.phi.value(u) * wick(sum.data() + tb.ell, tb.C, all.data(), sc.d);
    return {l, r, l - r};
  });
}

inline MCEstimate lhs(const Scenario& sc, const RngStream& rng, const Parallel& par = {}) {
  return lhs_bulk_moments(sc, rng, par).estimate(0, rng.seed);
}

inline MCEstimate bulk_term(const Scenario& sc, const RngStream& rng, const Parallel& par = {}) {
  return lhs_bulk_moments(sc, rng, par).estimate(1, rng.seed);
}

// Accepted segment draws reduced to (u partials, Ito partials), grouped by
// attempt index mod G. Acceptance is measured on the main run only; the pilot
// merely sizes it.
struct Ensemble {
  int k1 = 0, k2 = 0;
  std::vector<std::vector<double>> rows;  // per group, flattened with stride D
  std::vector<std::uint64_t> att, acc;    // per group
  std::uint64_t attempts = 0, accepted = 0;

  std::size_t size(int g, int D) const { return rows[g].size() / D; }
  double p() const { return static_cast<double>(accepted) / static_cast<double>(attempts); }
  double p_without(int g) const {
    return static_cast<double>(accepted - acc[g]) / static_cast<double>(attempts - att[g]);
  }
};

struct SegmentKey {
  int k1, k2;
  int start, end;  // side sign, or 0 for an interior/free endpoint
  auto operator<=>(const SegmentKey&) const = default;
  std::uint64_t tag() const {
    return splitmix64((static_cast<std::uint64_t>(k1) << 40) ^ (static_cast<std::uint64_t>(k2) << 16) ^
                      (static_cast<std::uint64_t>(start + 2) << 4) ^ static_cast<std::uint64_t>(end + 2));
  }
};

class BoundaryAssembler {
 public:
  BoundaryAssembler(const Scenario& sc, const RngStream& rng, const Parallel& par)
      : sc_(sc), tb_(sc), rng_(rng.child("boundary")), par_(par), G_(sc.budgets.groups),
        D_(static_cast<int>(tb_.ell) + sc.d) {
    build_nodes();
  }

  const std::vector<int>& nodes() const { return nodes_; }
  int stride() const { return stride_; }

  ProcessSpec spec_of(const SegmentKey& k) const {
    ProcessSpec s;
    s.t1 = static_cast<double>(k.k1) / tb_.n;
    s.t2 = static_cast<double>(k.k2) / tb_.n;
    if (k.start) {
      s.start_on = side_of(k.start);
      s.a = sc_.band.level(*s.start_on, s.t1);
    } else {
      s.a = sc_.a;
    }
    if (k.end) {
      s.end_on = side_of(k.end);
      s.b = sc_.band.level(*s.end_on, s.t2);
    } else {
      s.b = sc_.b;
    }
    return s;
  }

  std::shared_ptr<Ensemble> build(const SegmentKey& key) const {
    const ProcessSpec spec = spec_of(key);
    const Partition p = Partition::slice(tb_.n, key.k1, key.k2);
    const SegmentSampler smp(spec, sc_.band, p);
    const RngStream base = rng_.child(key.tag());
    const auto& bud = sc_.budgets;
    std::vector<double> buf(p.n + 1);

    // Pilot: grow until a few dozen acceptances or the cap.
    const RngStream pilot = base.child("pilot");
    std::uint64_t pa = 0, pacc = 0, target = bud.pilot;
    while (true) {
      for (; pa < target; ++pa) {
        auto g = pilot.sample(pa);
        pacc += smp.draw(g, buf.data()) ? 1 : 0;
      }
      if (pacc >= 32 || target >= bud.max_attempts) break;
      target = std::min(bud.max_attempts, target * 4);
    }
    auto e = std::make_shared<Ensemble>();
    e->k1 = key.k1;
    e->k2 = key.k2;
    e->rows.assign(G_, {});
    e->att.assign(G_, 0);
    e->acc.assign(G_, 0);
    if (pacc == 0) return e;
    const double rate = static_cast<double>(pacc) / static_cast<double>(pa);
    const std::uint64_t main = std::min<std::uint64_t>(
        bud.max_attempts, static_cast<std::uint64_t>(std::ceil(static_cast<double>(bud.y_samples) / rate)));
    const RngStream run = base.child("main");
    std::vector<double> sum(D_);
    for (std::uint64_t i = 0; i < main; ++i) {
      const int g = static_cast<int>(i % G_);
      ++e->att[g];
      auto r = run.sample(i);
      if (!smp.draw(r, buf.data())) continue;
      ++e->acc[g];
      std::fill(sum.begin(), sum.end(), 0.0);
      tb_.summarize(buf.data(), key.k1, key.k2, sum.data());
      e->rows[g].insert(e->rows[g].end(), sum.begin(), sum.end());
    }
    e->attempts = main;
    e->accepted = std::accumulate(e->acc.begin(), e->acc.end(), std::uint64_t{0});
    return e;
  }

  // Runs every BD^(j), j = 1..d. Each table entry carries G + 1 values: the
  // full estimate followed by the delete-a-group replicates.
  void run(VerificationReport& rep) {
    const int d = sc_.d;
    perms_ = permutations(d);
    std::map<std::tuple<int, std::vector<int>, std::vector<int>>, std::vector<double>> acc;
    std::vector<std::vector<double>> per_j(d, std::vector<double>(G_ + 1, 0.0));
    std::vector<double> total(G_ + 1, 0.0);
    for (int j = 1; j <= d; ++j)
      for (const auto& eps : SignVector::all(j))
        for (const auto& sg : perms_) acc[{j, eps.e, sg}].assign(G_ + 1, 0.0);

    auto tuples = node_tuples();
    std::vector<std::vector<SignVector>> live(d + 1);
    for (int j = 1; j <= d; ++j)
      for (const auto& eps : SignVector::all(j)) {
        bool ok = true;
        for (int e : eps.e) ok = ok && sc_.band.has(side_of(e));
        if (ok) live[j].push_back(eps);
      }
    if (live[1].empty()) {
      rep.flags.push_back("band has no curves: every boundary term vanishes");
    }

    // Left and right segments are shared by all j.
    std::vector<SegmentKey> outer;
    for (int j = 1; j <= d; ++j)
      for (const auto& t : tuples[j])
        for (const auto& eps : live[j]) {
          outer.push_back({0, t.front(), 0, eps.e.front()});
          outer.push_back({t.back(), tb_.n, eps.e.back(), 0});
        }
    std::sort(outer.begin(), outer.end());
    outer.erase(std::unique(outer.begin(), outer.end()), outer.end());
    std::vector<std::shared_ptr<Ensemble>> built(outer.size());
    parallel_for(outer.size(), par_, [&](std::size_t i) { built[i] = build(outer[i]); });
    std::map<SegmentKey, std::shared_ptr<Ensemble>> cache;
    for (std::size_t i = 0; i < outer.size(); ++i) {
      cache[outer[i]] = built[i];
      count(*built[i], rep.cost);
    }

    std::uint64_t degenerate = 0;
    for (int j = 1; j <= d; ++j) {
      const auto& ts = tuples[j];
      struct Out {
        std::vector<std::pair<std::tuple<int, std::vector<int>, std::vector<int>>, std::vector<double>>> add;
        Cost cost;
        std::uint64_t degenerate = 0;
      };
      std::vector<Out> outs(ts.size());
      parallel_for(ts.size(), par_, [&](std::size_t ti) {
        const auto& t = ts[ti];
        for (const auto& eps : live[j]) {
          std::vector<std::shared_ptr<Ensemble>> segs;
          segs.push_back(cache.at({0, t.front(), 0, eps.e.front()}));
          for (int i = 0; i + 1 < j; ++i) {
            segs.push_back(build({t[i], t[i + 1], eps.e[i], eps.e[i + 1]}));
            count(*segs.back(), outs[ti].cost);
          }
          segs.push_back(cache.at({t.back(), tb_.n, eps.e.back(), 0}));
          auto vals = node_values(j, t, eps, segs);
          if (vals.empty()) {
            ++outs[ti].degenerate;
            continue;
          }
          for (std::size_t si = 0; si < perms_.size(); ++si)
            outs[ti].add.emplace_back(std::tuple{j, eps.e, perms_[si]}, std::move(vals[si]));
        }
      });
      for (auto& o : outs) {
        for (auto& [key, v] : o.add) {
          auto& dst = acc.at(key);
          for (int g = 0; g <= G_; ++g) {
            dst[g] += v[g];
            per_j[j - 1][g] += v[g];
            total[g] += v[g];
          }
        }
        rep.cost.y_attempts += o.cost.y_attempts;
        rep.cost.y_accepted += o.cost.y_accepted;
        rep.cost.ensembles += o.cost.ensembles;
        degenerate += o.degenerate;
      }
      rep.cost.tuples += ts.size();
    }
    if (degenerate)
      rep.flags.push_back(std::to_string(degenerate) + " (tuple, eps) terms skipped: no accepted segment draws");

    auto est = [&](const std::vector<double>& v) {
      return MCEstimate{v[0], jackknife_se(std::span<const double>(v).subspan(1)), rep.cost.y_accepted, rng_.seed};
    };
    rep.bd.clear();
    for (int j = 1; j <= d; ++j) rep.bd.push_back(est(per_j[j - 1]));
    rep.bd_total = est(total);
    rep.table.clear();
    for (const auto& [key, v] : acc) {
      auto sigma = std::get<2>(key);
      for (auto& x : sigma) ++x;
      rep.table.push_back({std::get<0>(key), std::get<1>(key), sigma, est(v)});
    }
  }

 private:
  static void count(const Ensemble& e, Cost& c) {
    c.y_attempts += e.attempts;
    c.y_accepted += e.accepted;
    ++c.ensembles;
  }

  // Strided grid nodes over the union of the h supports.
  void build_nodes() {
    std::vector<int> cand;
    for (int k = 1; k < tb_.n; ++k) {
      bool any = false;
      for (int i = 0; i < sc_.d; ++i) any = any || tb_.hv[i][k] != 0.0;
      if (any) cand.push_back(k);
    }
    const int c = static_cast<int>(cand.size());
    stride_ = std::max(1, static_cast<int>(std::lround(static_cast<double>(c) / sc_.quad.nodes_per_dim)));
    for (int m = stride_ / 2; m < c; m += stride_) nodes_.push_back(cand[m]);
  }

  // Strictly increasing tuples outside the pseudo-diagonal collar, keeping
  // those where some sigma gives a nonzero h product.
  std::vector<std::vector<std::vector<int>>> node_tuples() const {
    std::vector<std::vector<std::vector<int>>> out(sc_.d + 1);
    std::vector<int> t;
    auto rec = [&](auto&& self, int j, std::size_t from) -> void {
      if (static_cast<int>(t.size()) == j) {
        for (const auto& sg : perms_) {
          double pr = 1.0;
          for (int i = 0; i < j; ++i) pr *= tb_.hv[sg[i]][t[i]];
          if (pr != 0.0) {
            out[j].push_back(t);
            return;
          }
        }
        return;
      }
      for (std::size_t m = from; m < nodes_.size(); ++m) {
        if (!t.empty() && nodes_[m] - t.back() <= sc_.quad.collar) continue;
        t.push_back(nodes_[m]);
        self(self, j, m + 1);
        t.pop_back();
      }
    };
    for (int j = 1; j <= sc_.d; ++j) rec(rec, j, 0);
    return out;
  }

  // Per sigma: G + 1 values (full, then delete-group-g replicates). Empty when
  // some segment has no accepted draws.
  std::vector<std::vector<double>> node_values(int j, const std::vector<int>& t, const SignVector& eps,
                                               const std::vector<std::shared_ptr<Ensemble>>& segs) const {
    for (const auto& e : segs)
      if (e->accepted == 0) return {};
    const int d = sc_.d;
    const std::size_t P = perms_.size();
    std::vector<double> times, levels;
    for (int i = 0; i < j; ++i) {
      times.push_back(static_cast<double>(t[i]) / tb_.n);
      levels.push_back(sc_.band.level(side_of(eps[i]), times.back()));
    }
    const double dens = finite_dim_density(TimeTuple(times), levels, sc_.a, sc_.b);
    const double coef = std::pow(stride_ * tb_.s, j) * eps.product() * dens *
                        std::pow(static_cast<double>(tb_.n), j) / factorial(d - j);

    // h products per sigma at this tuple.
    std::vector<double> hprod(P, 1.0);
    for (std::size_t si = 0; si < P; ++si)
      for (int i = 0; i < j; ++i) hprod[si] *= tb_.hv[perms_[si][i]][t[i]];

    // Pair sums per group.
    std::vector<std::vector<double>> S(P, std::vector<double>(G_, 0.0));
    std::vector<double> M(G_, 0.0);
    std::vector<double> sum(D_);
    for (int g = 0; g < G_; ++g) {
      std::size_t len = 0;
      bool empty = false;
      for (const auto& e : segs) {
        len = std::max(len, e->size(g, D_));
        empty = empty || e->size(g, D_) == 0;
      }
      if (empty) continue;
      for (std::size_t r = 0; r < len; ++r) {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (const auto& e : segs) {
          const double* row = e->rows[g].data() + (r % e->size(g, D_)) * D_;
          for (int c = 0; c < D_; ++c) sum[c] += row[c];
        }
        const double ph = sc_.phi.phi.value(std::span<const double>(sum.data(), tb_.ell));
        for (std::size_t si = 0; si < P; ++si) {
          if (hprod[si] == 0.0) continue;
          const double w = wick(sum.data() + tb_.ell, tb_.C, perms_[si].data() + j, d - j);
          S[si][g] += ph * hprod[si] * w;
        }
        M[g] += 1.0;
      }
    }
    const double Mt = std::accumulate(M.begin(), M.end(), 0.0);
    if (Mt == 0.0) return {};

    std::vector<std::vector<double>> out(P, std::vector<double>(G_ + 1, 0.0));
    double pfull = 1.0;
    for (const auto& e : segs) pfull *= e->p();
    for (std::size_t si = 0; si < P; ++si) {
      if (hprod[si] == 0.0) continue;
      const double St = std::accumulate(S[si].begin(), S[si].end(), 0.0);
      out[si][0] = coef * pfull * St / Mt;
      for (int g = 0; g < G_; ++g) {
        double pg = 1.0;
        for (const auto& e : segs) pg *= e->p_without(g);
        const double mg = Mt - M[g];
        out[si][g + 1] = mg > 0.0 ? coef * pg * (St - S[si][g]) / mg : out[si][0];
      }
    }
    return out;
  }

  const Scenario& sc_;
  detail::Tables tb_;
  RngStream rng_;
  Parallel par_;
  int G_;
  int D_;
  int stride_ = 1;
  std::vector<int> nodes_;
  std::vector<std::vector<int>> perms_;
};

inline MCEstimate boundary_term(int j, const Scenario& sc, const RngStream& rng, const Parallel& par = {}) {
  if (j < 1 || j > sc.d) throw DomainError("boundary_term: need 1 <= j <= d");
  VerificationReport rep;
  BoundaryAssembler(sc, rng, par).run(rep);
  return rep.bd[j - 1];
}

// Supports closer than two grid nodes break the finite-grid decomposition.
inline bool supports_separated(const Scenario& sc) {
  for (int i = 0; i < sc.d; ++i)
    for (int l = i + 1; l < sc.d; ++l) {
      const auto& p = sc.hs[i];
      const auto& q = sc.hs[l];
      const double gap = std::max(q.alpha - p.beta, p.alpha - q.beta);
      if (gap * sc.n_global < 2.0) return false;
    }
  return true;
}

inline VerificationReport verify(const Scenario& sc, const RngStream& rng, const Parallel& par = {}) {
  VerificationReport rep;
  rep.scenario = sc.name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    sc.validate();
    if (!supports_separated(sc))
      rep.flags.push_back("direction supports overlap or nearly touch: pseudo-diagonal terms are dropped");
    const auto m = lhs_bulk_moments(sc, rng.child("lhs-bulk"), par);
    rep.lhs = m.estimate(0, rng.seed);
    rep.bulk = m.estimate(1, rng.seed);
    rep.cost.lhs_samples = sc.budgets.lhs_samples;
    BoundaryAssembler(sc, rng, par).run(rep);
    rep.rhs_total = {rep.bulk.mean + rep.bd_total.mean, std::hypot(rep.bulk.std_error, rep.bd_total.std_error),
                     rep.bulk.n_samples + rep.bd_total.n_samples, rng.seed};
    const double diff = rep.lhs.mean - rep.rhs_total.mean;
    const double den = std::hypot(rep.lhs.std_error, rep.rhs_total.std_error);
    rep.z_score = den > 0.0 ? std::abs(diff) / den : (diff == 0.0 ? 0.0 : kInf);
    const double den_crn = std::hypot(m.estimate(2, rng.seed).std_error, rep.bd_total.std_error);
    rep.z_crn = den_crn > 0.0 ? std::abs(diff) / den_crn : (diff == 0.0 ? 0.0 : kInf);
    rep.pass = passes(rep);
  } catch (const Error& e) {
    rep.valid = false;
    rep.pass = false;
    rep.cause = e.what();
  }
  rep.cost.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace ibp
