#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ibp/functionals.hpp"
#include "ibp/samplers.hpp"

using namespace ibp;

namespace {

// Closed-form integrals of the bump on [0.25, 0.75] (exact rationals, and the
// sine moment by symbolic integration).
constexpr double kIntH = 0.22857142857142857;
constexpr double kIntHt = 0.11428571428571429;
constexpr double kIntHsin = 0.22084735885002098;
constexpr double kIntDh2 = 10.638961038961039;
constexpr double kIntD2h2 = 1872.4571428571429;

}  // namespace

TEST(Bump, DerivativesMatchFiniteDifferences) {
  const auto h = make_bump(0.2, 0.7);
  const double e = 1e-5;
  for (double t : {0.25, 0.4, 0.45, 0.6, 0.69}) {
    EXPECT_NEAR(h.derivative(t), (h(t + e) - h(t - e)) / (2 * e), 1e-6 * (1 + std::abs(h.derivative(t))));
    EXPECT_NEAR(h.second_derivative(t), (h.derivative(t + e) - h.derivative(t - e)) / (2 * e),
                1e-5 * (1 + std::abs(h.second_derivative(t))));
  }
  EXPECT_EQ(h(0.2), 0.0);
  EXPECT_EQ(h(0.8), 0.0);
  EXPECT_DOUBLE_EQ(h(0.45), 1.0);
  EXPECT_THROW(make_bump(0.0, 0.5), DomainError);
  EXPECT_THROW(make_bump(0.6, 0.5), DomainError);
}

TEST(Bump, IntegralsAgainstClosedForm) {
  const auto h = make_bump(0.25, 0.75);
  const auto p = Partition::grid(4000);
  EXPECT_NEAR(h_lambda(h, catalog::kernel("one"), p), kIntH, 1e-8);
  EXPECT_NEAR(h_lambda(h, catalog::kernel("t"), p), kIntHt, 1e-8);
  EXPECT_NEAR(h_lambda(h, catalog::kernel("sin_pi"), p), kIntHsin, 1e-8);
  const double dh2 = trapezoid(p, [&](int, double t) { return h.derivative(t) * h.derivative(t); });
  const double d2h2 = trapezoid(p, [&](int, double t) { return h.second_derivative(t) * h.second_derivative(t); });
  EXPECT_NEAR(dh2, kIntDh2, 1e-5);
  EXPECT_NEAR(d2h2, kIntD2h2, 1e-2);
  EXPECT_THROW(catalog::kernel("cos"), DomainError);
}

TEST(Phi, QuadraticPartials) {
  const Phi q = Phi::quadratic({1.0}, -0.3);
  const std::vector<double> u{0.7};
  EXPECT_NEAR(q.value(u), 0.16, 1e-15);
  const std::vector<int> one{0}, two{0, 0}, three{0, 0, 0};
  EXPECT_NEAR(q.partial(u, one), 0.8, 1e-15);
  EXPECT_NEAR(q.partial(u, two), 2.0, 1e-15);
  EXPECT_EQ(q.partial(u, three), 0.0);
  EXPECT_THROW(CylFunctional({}, q, 2), StructuralError);
}

TEST(Gradient, ChainRuleMatchesFiniteDifferences) {
  const CylFunctional phi{{catalog::kernel("one"), catalog::kernel("sin_pi")},
                          Phi::cubic({0.7, -0.4}, 0.1) + Phi::tanh_of({0.5, 1.0}, -0.2), 2};
  const std::vector<DirectionFunction> hs{make_bump(0.15, 0.45), make_bump(0.3, 0.85)};
  const auto x = sample_bridge(0.5, 0.5, Partition::grid(200), RngStream{21, 1});
  EXPECT_NEAR(grad_phi(phi, hs, x), grad_phi_fd(phi, hs, x, 1e-3), 1e-5);
  const std::vector<DirectionFunction> h1{hs[0]};
  EXPECT_NEAR(grad_phi(phi, h1, x), grad_phi_fd(phi, h1, x, 1e-4), 1e-7);
  const std::vector<DirectionFunction> h3{hs[0], hs[0], hs[1]};
  EXPECT_THROW(grad_phi(phi, h3, x), DomainError);
}

TEST(Gradient, QuadraticSecondDerivativeIsConstant) {
  const CylFunctional phi{{catalog::kernel("one")}, Phi::quadratic({1.0}, -0.3), 2};
  const std::vector<DirectionFunction> hs{make_bump(0.15, 0.45), make_bump(0.55, 0.85)};
  const auto p = Partition::grid(100);
  const double H1 = h_lambda(hs[0], catalog::kernel("one"), p);
  const double H2 = h_lambda(hs[1], catalog::kernel("one"), p);
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto x = sample_bridge(0.5, 0.5, p, RngStream{22, i});
    EXPECT_NEAR(grad_phi(phi, hs, x), 2.0 * H1 * H2, 1e-14);
  }
}

TEST(Ito, ExactDiscreteIsMinusSecondDifferenceSum) {
  const auto h = make_bump(0.25, 0.75);
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto x = sample_free(0.3, Partition::grid(137), RngStream{23, i});
    EXPECT_NEAR(ito_integral(h, x).exact_discrete, -second_difference_sum(h, x), 1e-10);
  }
}

TEST(Ito, ZeroMeanAndDiscreteCovariance) {
  const auto p = Partition::grid(100);
  const double s = p.step();
  const auto h1 = make_bump(0.15, 0.55), h2 = make_bump(0.35, 0.85);
  double c12 = 0.0, c11 = 0.0;
  for (int k = 0; k < p.n; ++k) {
    const double d1 = h1(p.node(k + 1)) - h1(p.node(k)), d2 = h2(p.node(k + 1)) - h2(p.node(k));
    c12 += d1 * d2 / s;
    c11 += d1 * d1 / s;
  }
  const RngStream rng{24, 1};
  Moments<3> m;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    auto g = rng.sample(i);
    const auto x = sample_free(0.0, p, g);
    const double I1 = ito_integral(h1, x).exact_discrete, I2 = ito_integral(h2, x).exact_discrete;
    m.add({I1, I1 * I2, I1 * I1});
  }
  EXPECT_NEAR(m.mean[0], 0.0, 4.0 * m.std_error(0));
  EXPECT_NEAR(m.mean[1], c12, 4.0 * m.std_error(1));
  EXPECT_NEAR(m.mean[2], c11, 4.0 * m.std_error(2));
}

TEST(Ito, FormsAgreeOnSmoothPath) {
  const auto h = make_bump(0.25, 0.75);
  const auto p = Partition::grid(2000);
  std::vector<double> v(p.n + 1);
  for (int k = 0; k <= p.n; ++k) v[k] = std::sin(3.0 * p.node(k));
  const GridPath x{p, v};
  const auto f = ito_integral(h, x);
  // Continuum value: int h'(t) 3 cos(3t) dt.
  const double ref = trapezoid(Partition::grid(20000), [&](int, double t) { return h.derivative(t) * 3.0 * std::cos(3.0 * t); });
  EXPECT_NEAR(f.left_point, ref, 1e-3);
  EXPECT_NEAR(f.by_parts, ref, 1e-3);
  EXPECT_NEAR(f.exact_discrete, ref, 1e-3);
}
