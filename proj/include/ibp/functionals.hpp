#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "pathcore.hpp"

namespace ibp {

// Polynomial bump (t-alpha)^3 (beta-t)^3 / ((beta-alpha)/2)^6 on [alpha, beta],
// times an optional scale.
struct DirectionFunction {
  double alpha = 0.25;
  double beta = 0.75;
  double scale = 1.0;

  double norm() const { return std::pow(0.5 * (beta - alpha), 6); }
  bool inside(double t) const { return t > alpha && t < beta; }

  double operator()(double t) const { return value(t); }
  double value(double t) const {
    if (!inside(t)) return 0.0;
    const double u = t - alpha, v = beta - t;
    return scale * u * u * u * v * v * v / norm();
  }
  double derivative(double t) const {
    if (!inside(t)) return 0.0;
    const double u = t - alpha, v = beta - t;
    return scale * 3.0 * u * u * v * v * (v - u) / norm();
  }
  double second_derivative(double t) const {
    if (!inside(t)) return 0.0;
    const double u = t - alpha, v = beta - t;
    return scale * 6.0 * u * v * ((v - u) * (v - u) - u * v) / norm();
  }
  DirectionFunction scaled(double c) const { return {alpha, beta, scale * c}; }
};

inline DirectionFunction make_bump(double alpha, double beta) {
  if (!(alpha > 0.0 && beta < 1.0)) throw DomainError("make_bump: support must lie inside (0,1)");
  if (!(alpha < beta)) throw DomainError("make_bump: alpha must be smaller than beta");
  return {alpha, beta, 1.0};
}

// One-variable profiles with derivatives of every order.
enum class Profile { constant, power, tanh, sine };

inline double profile_derivative(Profile g, int power, double z, int m) {
  switch (g) {
    case Profile::constant:
      return m == 0 ? 1.0 : 0.0;
    case Profile::power: {
      if (m > power) return 0.0;
      double c = 1.0;
      for (int i = 0; i < m; ++i) c *= (power - i);
      return c * std::pow(z, power - m);
    }
    case Profile::tanh: {
      // d/dz P(T) = P'(T) (1 - T^2), starting from P_0(T) = T.
      std::vector<double> p{0.0, 1.0};
      for (int i = 0; i < m; ++i) {
        std::vector<double> q(p.size() + 1, 0.0);
        for (std::size_t k = 1; k < p.size(); ++k) {
          const double c = k * p[k];
          q[k - 1] += c;
          q[k + 1] -= c;
        }
        p = std::move(q);
      }
      const double T = std::tanh(z);
      double s = 0.0;
      for (std::size_t k = p.size(); k-- > 0;) s = s * T + p[k];
      return s;
    }
    case Profile::sine:
      return std::sin(z + m * 0.5 * std::numbers::pi);
  }
  return 0.0;
}

// Phi(u) = sum_r w_r g_r(c_r . u + shift_r).
class Phi {
 public:
  struct Ridge {
    double weight = 1.0;
    Profile profile = Profile::power;
    int power = 1;
    std::vector<double> coef;
    double shift = 0.0;
  };

  Phi(std::size_t ell, std::vector<Ridge> ridges, std::string name)
      : ell_(ell), ridges_(std::move(ridges)), name_(std::move(name)) {
    for (const auto& r : ridges_)
      if (r.coef.size() != ell_) throw StructuralError("Phi: ridge coefficient length must equal ell");
  }

  std::size_t ell() const { return ell_; }
  const std::string& name() const { return name_; }
  const std::vector<Ridge>& ridges() const { return ridges_; }

  double value(std::span<const double> u) const {
    const int none[1] = {0};
    return partial(u, std::span<const int>(none, 0));
  }

  // Mixed partial with respect to u_{idx[0]}, ..., u_{idx[m-1]}.
  double partial(std::span<const double> u, std::span<const int> idx) const {
    double s = 0.0;
    for (const auto& r : ridges_) {
      double z = r.shift, c = r.weight;
      for (std::size_t j = 0; j < ell_; ++j) z += r.coef[j] * u[j];
      for (int j : idx) c *= r.coef[j];
      if (c != 0.0) s += c * profile_derivative(r.profile, r.power, z, static_cast<int>(idx.size()));
    }
    return s;
  }

  static Phi constant(double c, std::size_t ell = 1) {
    return {ell, {{c, Profile::constant, 0, std::vector<double>(ell, 0.0), 0.0}}, "constant"};
  }
  static Phi linear(std::vector<double> c) {
    const auto ell = c.size();
    return {ell, {{1.0, Profile::power, 1, std::move(c), 0.0}}, "linear"};
  }
  // (c . u + shift)^2
  static Phi quadratic(std::vector<double> c, double shift = 0.0) {
    const auto ell = c.size();
    return {ell, {{1.0, Profile::power, 2, std::move(c), shift}}, "quadratic"};
  }
  static Phi cubic(std::vector<double> c, double shift = 0.0) {
    const auto ell = c.size();
    return {ell, {{1.0, Profile::power, 3, std::move(c), shift}}, "cubic"};
  }
  static Phi tanh_of(std::vector<double> c, double shift = 0.0) {
    const auto ell = c.size();
    return {ell, {{1.0, Profile::tanh, 0, std::move(c), shift}}, "tanh"};
  }
  static Phi sine_of(std::vector<double> c, double shift = 0.0) {
    const auto ell = c.size();
    return {ell, {{1.0, Profile::sine, 0, std::move(c), shift}}, "sine"};
  }
  Phi operator+(const Phi& o) const {
    if (o.ell_ != ell_) throw StructuralError("Phi: cannot add functions of different arity");
    auto r = ridges_;
    r.insert(r.end(), o.ridges_.begin(), o.ridges_.end());
    return {ell_, std::move(r), name_ + "+" + o.name_};
  }

 private:
  std::size_t ell_;
  std::vector<Ridge> ridges_;
  std::string name_;
};

// phi(x) = Phi(<x, lambda_1>, ..., <x, lambda_ell>).
struct CylFunctional {
  std::vector<Curve> kernels;
  Phi phi;
  int d = 2;

  CylFunctional(std::vector<Curve> k, Phi p, int order) : kernels(std::move(k)), phi(std::move(p)), d(order) {
    if (kernels.size() != phi.ell()) throw StructuralError("CylFunctional: number of kernels must equal ell");
  }
  std::size_t ell() const { return kernels.size(); }
  std::string name() const {
    std::string s = phi.name() + "[";
    for (std::size_t j = 0; j < kernels.size(); ++j) s += (j ? "," : "") + kernels[j].name();
    return s + "]";
  }
};

inline std::vector<double> kernel_coordinates(const CylFunctional& phi, const GridPath& x) {
  std::vector<double> u(phi.ell());
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = inner_product(x, phi.kernels[j]);
  return u;
}

inline double eval_phi(const CylFunctional& phi, const GridPath& x) { return phi.phi.value(kernel_coordinates(phi, x)); }

// <h, lambda> by trapezoid on the given grid.
inline double h_lambda(const DirectionFunction& h, const Curve& lam, const Partition& p) {
  return trapezoid(p, [&](int, double t) { return h(t) * lam(t); });
}

// Chain rule: sum over multi-indices of d^d Phi / du_j1..du_jd times
// prod_i <h_i, lambda_{j_i}>. H[i][j] = <h_i, lambda_j>.
inline double grad_phi_from(const Phi& phi, std::span<const double> u, const std::vector<std::vector<double>>& H) {
  const std::size_t d = H.size();
  const std::size_t ell = phi.ell();
  if (d == 0) return phi.value(u);
  std::vector<int> idx(d, 0);
  double total = 0.0;
  for (;;) {
    double w = 1.0;
    for (std::size_t i = 0; i < d && w != 0.0; ++i) w *= H[i][idx[i]];
    if (w != 0.0) total += w * phi.partial(u, idx);
    std::size_t i = 0;
    while (i < d && ++idx[i] == static_cast<int>(ell)) idx[i++] = 0;
    if (i == d) break;
  }
  return total;
}

inline std::vector<std::vector<double>> h_lambda_table(const CylFunctional& phi,
                                                       const std::vector<DirectionFunction>& hs,
                                                       const Partition& p) {
  std::vector<std::vector<double>> H(hs.size(), std::vector<double>(phi.ell()));
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = 0; j < phi.ell(); ++j) H[i][j] = h_lambda(hs[i], phi.kernels[j], p);
  return H;
}

inline double grad_phi(const CylFunctional& phi, const std::vector<DirectionFunction>& hs, const GridPath& x) {
  if (static_cast<int>(hs.size()) > phi.d) throw DomainError("grad_phi: order exceeds the functional's order");
  const auto u = kernel_coordinates(phi, x);
  return grad_phi_from(phi.phi, u, h_lambda_table(phi, hs, x.partition));
}

// Central-difference tensor stencil for d/ds_1..d/ds_d phi(x + sum s_i h_i).
inline double grad_phi_fd(const CylFunctional& phi, const std::vector<DirectionFunction>& hs, const GridPath& x,
                          double step = 1e-3) {
  if (!(step > 0.0)) throw DomainError("grad_phi_fd: step must be positive");
  const std::size_t d = hs.size();
  std::vector<std::vector<double>> hv(d, std::vector<double>(x.values.size()));
  for (std::size_t i = 0; i < d; ++i)
    for (int k = 0; k <= x.n(); ++k) hv[i][k] = hs[i](x.partition.node(k));
  double acc = 0.0;
  GridPath y = x;
  for (std::size_t m = 0; m < (std::size_t{1} << d); ++m) {
    double sign = 1.0;
    for (std::size_t k = 0; k < y.values.size(); ++k) {
      double v = x.values[k];
      for (std::size_t i = 0; i < d; ++i) v += ((m >> i) & 1 ? -step : step) * hv[i][k];
      y.values[k] = v;
    }
    for (std::size_t i = 0; i < d; ++i)
      if ((m >> i) & 1) sign = -sign;
    acc += sign * eval_phi(phi, y);
  }
  return acc / std::pow(2.0 * step, static_cast<double>(d));
}

struct ItoForms {
  double left_point = 0.0;      // sum h'(t_k) (x_{k+1} - x_k)
  double by_parts = 0.0;        // -trapezoid of h'' x
  double exact_discrete = 0.0;  // sum (h_{k+1} - h_k)/step (x_{k+1} - x_k)
};

inline ItoForms ito_integral(const DirectionFunction& h, const GridPath& x) {
  const Partition& p = x.partition;
  const double s = p.step();
  ItoForms f;
  for (int k = 0; k < p.n; ++k) {
    const double dx = x.values[k + 1] - x.values[k];
    const double t0 = p.node(k), t1 = p.node(k + 1);
    f.left_point += h.derivative(t0) * dx;
    f.exact_discrete += (h(t1) - h(t0)) / s * dx;
  }
  f.by_parts = -trapezoid(p, [&](int k, double t) { return h.second_derivative(t) * x.values[k]; });
  return f;
}

// sum_k h(t_k) (x_{k+1} - 2 x_k + x_{k-1}) / step over interior nodes; equals
// minus the exact discrete form whenever h vanishes at both ends.
inline double second_difference_sum(const DirectionFunction& h, const GridPath& x) {
  const Partition& p = x.partition;
  double acc = 0.0;
  for (int k = 1; k < p.n; ++k)
    acc += h(p.node(k)) * (x.values[k + 1] - 2.0 * x.values[k] + x.values[k - 1]) / p.step();
  return acc;
}

namespace catalog {

inline Curve kernel(const std::string& name) {
  if (name == "one") return Curve::constant(1.0);
  if (name == "t") return Curve::linear(0.0, 1.0);
  if (name == "sin_pi") return Curve::sine(1.0, std::numbers::pi);
  throw DomainError("unknown kernel '" + name + "' (expected one, t, sin_pi)");
}

}  // namespace catalog

}  // namespace ibp
