#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ibp/pathcore.hpp"
#include "ibp/rng.hpp"

using namespace ibp;

// Random123 known-answer vectors for Philox4x64-10.
TEST(Philox, KnownAnswerZero) {
  const auto r = Philox4x64::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x16554d9eca36314cULL);
  EXPECT_EQ(r[1], 0xdb20fe9d672d0fdcULL);
  EXPECT_EQ(r[2], 0xd7e772cee186176bULL);
  EXPECT_EQ(r[3], 0x7e68b68aec7ba23bULL);
}

TEST(Philox, KnownAnswerPi) {
  const auto r = Philox4x64::block({0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL,
                                    0x082efa98ec4e6c89ULL},
                                   {0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL});
  EXPECT_EQ(r[0], 0xa528f45403e61d95ULL);
  EXPECT_EQ(r[1], 0x38c72dbd566e9788ULL);
  EXPECT_EQ(r[2], 0xa5a1610e72fd18b5ULL);
  EXPECT_EQ(r[3], 0x57bd43b5e52b7fe6ULL);
}

TEST(RngStream, SamplesArePureFunctionsOfIndex) {
  const RngStream s{42, 7};
  auto a = s.sample(123);
  auto b = s.sample(123);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.normal(), b.normal());
  auto c = s.sample(124);
  auto d = s.sample(123);
  EXPECT_NE(c.normal(), d.normal());
}

TEST(RngStream, MirroredNegatesNormals) {
  const RngStream s{3, 9};
  auto a = s.sample(5);
  auto b = s.mirrored().sample(5);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.normal(), -b.normal());
}

TEST(RngStream, ChildrenDiffer) {
  const RngStream s{1, 2};
  EXPECT_NE(s.child("a").stream, s.child("b").stream);
  EXPECT_NE(s.child("a", 0).stream, s.child("a", 1).stream);
  EXPECT_EQ(s.child("a", 4).stream, s.child("a", 4).stream);
}

TEST(RngStream, UniformInHalfOpenUnitInterval) {
  auto g = RngStream{5, 5}.sample(0);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_NEAR(sum / 100000, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000));
}

TEST(HeatKernel, ValueAndSymmetry) {
  EXPECT_DOUBLE_EQ(heat_kernel(1.0, 0.0, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi));
  EXPECT_DOUBLE_EQ(heat_kernel(0.3, 0.1, 0.7), heat_kernel(0.3, 0.7, 0.1));
  EXPECT_NEAR(std::log(heat_kernel(0.3, 0.1, 0.7)), log_heat_kernel(0.3, 0.1, 0.7), 1e-14);
  EXPECT_THROW(heat_kernel(0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(heat_kernel(-1.0, 0.0, 0.0), DomainError);
}

TEST(Partition, NodesAndSlices) {
  const auto p = Partition::uniform(0.2, 0.6, 4);
  EXPECT_DOUBLE_EQ(p.node(0), 0.2);
  EXPECT_DOUBLE_EQ(p.node(4), 0.6);
  EXPECT_DOUBLE_EQ(p.step(), 0.1);
  const auto s = Partition::slice(100, 25, 75);
  EXPECT_EQ(s.n, 50);
  EXPECT_EQ(s.node(0), 0.25);
  EXPECT_EQ(s.node(50), 0.75);
  EXPECT_EQ(s.node(10), 35.0 / 100.0);
  EXPECT_THROW(Partition::uniform(0.5, 0.5, 3), DomainError);
  EXPECT_THROW(Partition::uniform(0.0, 1.0, 0), DomainError);
}

TEST(GridPath, LinearInterpolation) {
  const GridPath x{Partition::uniform(0.0, 1.0, 2), {0.0, 1.0, -1.0}};
  EXPECT_DOUBLE_EQ(x.at(0.25), 0.5);
  EXPECT_DOUBLE_EQ(x.at(0.75), 0.0);
  EXPECT_DOUBLE_EQ(x.at(1.0), -1.0);
  EXPECT_THROW(polygonalize({1.0, 2.0}, Partition::uniform(0.0, 1.0, 2)), StructuralError);
}

TEST(Curve, DerivativesConsistent) {
  const std::vector<Curve> cs{Curve::constant(0.3), Curve::linear(0.1, -0.4), Curve::sine(0.2, std::numbers::pi),
                              Curve::polynomial({0.1, 0.0, 0.5, -0.2}),
                              Curve::smoothed_polyline({0.0, 0.5, 1.0}, {0.0, 0.3, 0.1}, 0.1),
                              Curve::sine(0.2, 3.0).shifted(1.0).scaled(-2.0).negated()};
  for (const auto& c : cs) EXPECT_TRUE(c.derivatives_consistent()) << c.name();
}

TEST(Band, Validation) {
  EXPECT_NO_THROW(Band::between(Curve::constant(0.0), Curve::constant(1.0)).validate());
  EXPECT_THROW(Band::between(Curve::constant(0.0), Curve::linear(-0.5, 1.0)).validate(), DomainError);
  EXPECT_NO_THROW(Band::above(Curve::constant(0.0)).validate());
  const Band b = Band::between(Curve::constant(0.0), Curve::constant(1.0));
  EXPECT_TRUE(b.strictly_inside(0.5, 0.5));
  EXPECT_FALSE(b.strictly_inside(0.5, 1.0));
  EXPECT_TRUE(b.contains(0.5, 1.0));
  const Band r = b.reflected();
  EXPECT_EQ(r.lo(0.3), -1.0);
  EXPECT_EQ(r.hi(0.3), -0.0);
  EXPECT_FALSE(b.one_sided(Side::lower).has(Side::upper));
}

TEST(SignVector, EnumerationAndValidation) {
  const auto all = SignVector::all(2);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].str(), "(+,+)");
  EXPECT_EQ(all[1].str(), "(+,-)");
  EXPECT_EQ(all[3].product(), 1);
  EXPECT_THROW(SignVector({1, 0}), DomainError);
  EXPECT_THROW(TimeTuple({0.5, 0.5}), DomainError);
  EXPECT_THROW(TimeTuple({0.0, 0.5}), DomainError);
}

TEST(Trapezoid, ExactForLinearAndKnownErrorForQuadratic) {
  const auto p = Partition::grid(100);
  EXPECT_NEAR(trapezoid(p, [](int, double t) { return 3.0 * t + 1.0; }), 2.5, 1e-14);
  // Composite trapezoid error for t^2 is (b - a) s^2 / 6 in absolute terms.
  EXPECT_NEAR(trapezoid(p, [](int, double t) { return t * t; }), 1.0 / 3.0 + 1e-4 / 6.0, 1e-14);
  const GridPath x{p, std::vector<double>(101, 2.0)};
  EXPECT_NEAR(inner_product(x, Curve::linear(0.0, 1.0)), 1.0, 1e-14);
}

TEST(CameronMartin, ConstantAndLinearCurves) {
  const GridPath x{Partition::grid(4), {0.1, 0.4, -0.2, 0.3, 0.7}};
  EXPECT_EQ(cameron_martin(Curve::constant(0.8), x), 1.0);
  const double c = 0.6;
  EXPECT_NEAR(cameron_martin_exponent(Curve::linear(0.0, c), x), c * (0.7 - 0.1) - 0.5 * c * c, 1e-14);
}

TEST(Concat, JoinsAlignedSegments) {
  const GridPath a{Partition::slice(10, 0, 3), {0.0, 0.1, 0.2, 0.3}};
  const GridPath b{Partition::slice(10, 3, 10), {0.3, 0.2, 0.1, 0.0, 0.1, 0.2, 0.3, 0.4}};
  const auto c = concat({a, b});
  EXPECT_EQ(c.n(), 10);
  EXPECT_EQ(c.values[3], 0.3);
  EXPECT_EQ(c.values[10], 0.4);
  EXPECT_EQ(c.partition.node(10), 1.0);
  const GridPath bad{Partition::slice(10, 3, 5), {0.4, 0.0, 0.0}};
  EXPECT_THROW(concat({a, bad}), StructuralError);
  const GridPath gap{Partition::slice(10, 4, 5), {0.3, 0.0}};
  EXPECT_THROW(concat({a, gap}), StructuralError);
}
