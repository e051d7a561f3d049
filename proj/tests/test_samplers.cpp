#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ibp/samplers.hpp"

using namespace ibp;

namespace {

Band half() { return Band::above(Curve::constant(0.0)); }
Band flat() { return Band::between(Curve::constant(0.0), Curve::constant(1.0)); }

}  // namespace

TEST(Bridge, NodeMomentsMatchBrownianBridge) {
  const auto p = Partition::grid(50);
  const RngStream rng{11, 1};
  Moments<2> m;
  for (std::uint64_t i = 0; i < 40000; ++i) {
    auto g = rng.sample(i);
    const auto x = sample_bridge(0.2, 0.8, p, g);
    m.add({x.values[15], x.values[15] * x.values[15]});
  }
  const double t = 0.3, mean = 0.2 + 0.6 * t, var = t * (1.0 - t);
  EXPECT_NEAR(m.mean[0], mean, 4.0 * m.std_error(0));
  EXPECT_NEAR(m.mean[1] - m.mean[0] * m.mean[0], var, 0.01);
}

TEST(Bridge, EndpointsPinnedExactly) {
  const auto p = Partition::uniform(0.3, 0.9, 37);
  const auto x = sample_bridge(-0.4, 1.3, p, RngStream{2, 2});
  EXPECT_EQ(x.front(), -0.4);
  EXPECT_EQ(x.back(), 1.3);
}

TEST(Bridge, ReverseGenerationHasSameLaw) {
  // End pinned on a curve, start interior: drawn backwards from the pinned end.
  const Band b = flat();
  const auto spec = ProcessSpec::make(b, 0.0, 1.0, {}, 0.5, Side::upper, {});
  const SegmentSampler s(spec, b, Partition::grid(40));
  const RngStream rng{4, 4};
  Moments<1> m;
  std::vector<double> buf(41);
  for (std::uint64_t i = 0; i < 40000; ++i) {
    auto g = rng.sample(i);
    s.draw(g, buf.data(), false);
    ASSERT_EQ(buf[0], 0.5);
    ASSERT_EQ(buf[40], 1.0);
    m.add({buf[10]});
  }
  EXPECT_NEAR(m.mean[0], 0.5 + 0.5 * 0.25, 4.0 * m.std_error(0));
}

TEST(GridDensity, TwoFormsAgree) {
  const auto x = sample_bridge(0.1, 0.7, Partition::uniform(0.2, 0.8, 30), RngStream{5, 1});
  EXPECT_NEAR(grid_bridge_log_density(x, 0.1, 0.7), grid_bridge_log_density_qxi(x, 0.1, 0.7), 1e-9);
}

TEST(GridDensity, MeanPathValue) {
  // On the straight line the quadratic terms cancel exactly.
  const int n = 25;
  const auto p = Partition::uniform(0.0, 0.5, n);
  std::vector<double> v(n + 1);
  for (int k = 0; k <= n; ++k) v[k] = 0.2 + 0.4 * k / n;
  const GridPath x{p, v};
  const double s = p.step();
  const double expect = -0.5 * (n - 1) * std::log(2.0 * std::numbers::pi) + 0.5 * (std::log(n) - (n - 1) * std::log(s));
  EXPECT_NEAR(grid_bridge_log_density(x, 0.2, 0.6), expect, 1e-10);
  EXPECT_NEAR(grid_bridge_log_density_qxi(x, 0.2, 0.6), expect, 1e-10);
  EXPECT_THROW(grid_bridge_log_density(x, 0.2, 0.7), StructuralError);
}

TEST(Survival, DiscreteOneSidedMatchesCorrectedFormula) {
  // Discrete monitoring shifts the barrier by 0.5826 sqrt(step).
  const int n = 100;
  const double beta = 0.5826 / std::sqrt(static_cast<double>(n));
  const double expect = 1.0 - std::exp(-2.0 * (0.5 + beta) * (0.5 + beta));
  const auto e = band_probability(ProcessSpec::bridge(0.0, 1.0, 0.5, 0.5), half(), Partition::grid(n), 200000,
                                  RngStream{6, 1});
  EXPECT_NEAR(e.mean, expect, 0.01);
  EXPECT_GT(e.std_error, 0.0);
}

TEST(Survival, UnboundedBandIsCertain) {
  const auto e = band_probability(ProcessSpec::bridge(0.0, 1.0, 0.0, 0.0), Band::unbounded(), Partition::grid(10),
                                  100, RngStream{1, 1});
  EXPECT_EQ(e.mean, 1.0);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(Survival, ThreadCountInvariant) {
  const auto spec = ProcessSpec::bridge(0.0, 1.0, 0.5, 0.5);
  const auto a = band_probability(spec, flat(), Partition::grid(50), 20000, RngStream{7, 7}, {1});
  const auto b = band_probability(spec, flat(), Partition::grid(50), 20000, RngStream{7, 7}, {4});
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Survival, RejectsBoundaryEndpoints) {
  const auto spec = ProcessSpec::make(flat(), 0.0, 1.0, Side::lower, 0.0, {}, 0.5);
  EXPECT_THROW(band_probability(spec, flat(), Partition::grid(10), 10, RngStream{1, 1}), DomainError);
  EXPECT_THROW(ProcessSpec::bridge(0.0, 1.0, 1.5, 0.5).validate(flat()), DomainError);
  EXPECT_THROW((ProcessSpec{0.0, 1.0, 0.1, 0.5, Side::lower, {}}).validate(flat()), DomainError);
}

TEST(Bessel3, BridgeMeanAtMidpoint) {
  // E|B| for a 3-d Brownian bridge with variance 1/4: sqrt(2/pi).
  const Bessel3Sampler s(Partition::grid(20));
  const RngStream rng{8, 1};
  Moments<1> m;
  std::vector<double> buf(21);
  for (std::uint64_t i = 0; i < 50000; ++i) {
    auto g = rng.sample(i);
    s.bridge(g, 0.0, 0.0, buf.data());
    ASSERT_GE(buf[7], 0.0);
    m.add({buf[10]});
  }
  EXPECT_NEAR(m.mean[0], 0.797884560802865, 4.0 * m.std_error(0));
}

TEST(Bessel3, MeanderEndpointIsRayleigh) {
  const Bessel3Sampler s(Partition::grid(8));
  const RngStream rng{8, 2};
  Moments<1> m;
  std::vector<double> buf(9);
  for (std::uint64_t i = 0; i < 50000; ++i) {
    auto g = rng.sample(i);
    s.meander(g, buf.data());
    ASSERT_EQ(buf[0], 0.0);
    m.add({buf[8]});
  }
  EXPECT_NEAR(m.mean[0], 1.2533141373155, 4.0 * m.std_error(0));
}

TEST(NoCrossing, SingleIntervalFormula) {
  const std::vector<double> gap{0.3, 0.2};
  EXPECT_NEAR(no_crossing_weight(gap, 0.1), 1.0 - std::exp(-2.0 * 0.06 / 0.1), 1e-15);
  const std::vector<double> touch{0.3, 0.0, 0.2};
  EXPECT_EQ(no_crossing_weight(touch, 0.1), 0.0);
}

TEST(Conditioned, StaysInBandAndSaturates) {
  const auto x = sample_conditioned(ProcessSpec::bridge(0.0, 1.0, 0.5, 0.5), flat(), Partition::grid(50), 100000,
                                    RngStream{9, 1});
  for (double v : x.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const Band narrow = Band::between(Curve::constant(0.49), Curve::constant(0.51));
  EXPECT_THROW(sample_conditioned(ProcessSpec::bridge(0.0, 1.0, 0.5, 0.5), narrow, Partition::grid(50), 50,
                                  RngStream{9, 2}),
               SaturationError);
}

TEST(PinnedSegment, EndsOnTheCurve) {
  const Band b = Band::between(Curve::sine(0.2, std::numbers::pi), Curve::constant(1.0));
  const auto spec = ProcessSpec::make(b, 0.0, 0.5, {}, 0.5, Side::lower, {});
  const auto x = sample_pinned_segment(spec, b, Partition::slice(100, 0, 50), RngStream{10, 1});
  EXPECT_EQ(x.back(), b.lo(0.5));
  for (int k = 1; k < x.n(); ++k) EXPECT_GE(x.values[k], b.lo(x.partition.node(k)));
}

TEST(SampleY, ConcatenatesPinnedSegments) {
  const Band b = flat();
  const auto y = sample_Y(2, SignVector({1, -1}), TimeTuple({0.3, 0.6}), b, 0.5, 0.5, 50, RngStream{12, 1});
  EXPECT_EQ(y.n(), 50);
  EXPECT_EQ(y.values[15], 1.0);
  EXPECT_EQ(y.values[30], 0.0);
  EXPECT_EQ(y.back(), 0.5);
  EXPECT_THROW(sample_Y(1, SignVector({1, -1}), TimeTuple({0.3, 0.6}), b, 0.5, 0.5, 50, RngStream{12, 1}),
               DomainError);
}

TEST(Snap, WarnsOffGrid) {
  std::vector<std::string> seen;
  auto saved = warning_handler();
  warning_handler() = [&](const std::string& m) { seen.push_back(m); };
  EXPECT_EQ(snap_to_grid(0.3, 100), 30);
  EXPECT_TRUE(seen.empty());
  EXPECT_EQ(snap_to_grid(0.303, 100), 30);
  EXPECT_EQ(seen.size(), 1u);
  EXPECT_THROW(snap_times(TimeTuple({0.301, 0.302}), 100), DomainError);
  warning_handler() = saved;
}
