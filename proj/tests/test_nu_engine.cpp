#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ibp/catalog.hpp"
#include "ibp/nu_engine.hpp"

using namespace ibp;

namespace {

Band half() { return Band::above(Curve::constant(0.0)); }

// Continuum one-sided value: sqrt(2) x / sqrt(T) at distance x.
const double kOneSided = std::sqrt(2.0) * 0.5;

DeltaPSchedule small_schedule(std::uint64_t samples = 200'000) { return {{50, 100, 200}, samples, 1}; }

class FixedFactors : public FactorSource {
 public:
  MCEstimate factor(const ProcessSpec& seg) override {
    ++calls;
    const int pins = boundary_pins(seg);
    return {pins == 2 ? 0.37 : 0.81 + 0.01 * calls, 0.01, 1, 0};
  }
  int calls = 0;
};

}  // namespace

TEST(Density, NormalizesOverLevels) {
  // Bridge: integrating the level density over the line gives 1.
  double acc = 0.0;
  const double lo = -8.0, hi = 9.0;
  const int m = 20000;
  const double dc = (hi - lo) / m;
  for (int i = 0; i <= m; ++i) {
    const double c = lo + i * dc;
    const std::vector<double> lv{c};
    acc += (i == 0 || i == m ? 0.5 : 1.0) * finite_dim_density(TimeTuple({0.3}), lv, 0.5, 0.5) * dc;
  }
  EXPECT_NEAR(acc, 1.0, 1e-10);
}

TEST(Density, MarginalizesSecondLevel) {
  const double lo = -8.0, hi = 9.0;
  const int m = 20000;
  const double dc = (hi - lo) / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double c = lo + i * dc;
    const std::vector<double> lv{0.2, c};
    acc += (i == 0 || i == m ? 0.5 : 1.0) * finite_dim_density(TimeTuple({0.3, 0.6}), lv, 0.5, 0.7) * dc;
  }
  const std::vector<double> one{0.2};
  EXPECT_NEAR(acc, finite_dim_density(TimeTuple({0.3}), one, 0.5, 0.7), 1e-10);
  const std::vector<double> free_lv{0.2};
  EXPECT_DOUBLE_EQ(finite_dim_density(TimeTuple({0.3}), free_lv, 0.5, std::nullopt), heat_kernel(0.3, 0.5, 0.2));
  EXPECT_THROW(finite_dim_density(TimeTuple({0.3, 0.6}), one, 0.5, 0.7), DomainError);
}

TEST(Schedule, Validation) {
  EXPECT_NO_THROW(DeltaPSchedule{}.validate());
  EXPECT_THROW((DeltaPSchedule{{100}, 100000, 1}).validate(), DomainError);
  EXPECT_THROW((DeltaPSchedule{{100, 50}, 100000, 1}).validate(), DomainError);
  EXPECT_THROW((DeltaPSchedule{{50, 100}, 1000, 1}).validate(), DomainError);
  EXPECT_THROW((DeltaPSchedule{{50, 100}, 100000, 2}).validate(), DomainError);
}

TEST(DeltaP, OneSidedFlatDefinitional) {
  const auto spec = ProcessSpec::make(half(), 0.0, 1.0, {}, 0.5, Side::lower, {});
  const auto r = delta_p_first_def(spec, half(), small_schedule(), RngStream{31, 1});
  EXPECT_EQ(r.pins, 1);
  EXPECT_EQ(r.rows.size(), 3u);
  EXPECT_NEAR(r.estimate.mean, kOneSided, 0.05 * kOneSided);
  EXPECT_GT(r.estimate.std_error, 0.0);
}

TEST(DeltaP, WrongPinCountRejected) {
  const auto interior = ProcessSpec::bridge(0.0, 1.0, 0.5, 0.5);
  EXPECT_THROW(delta_p_first_def(interior, half(), small_schedule(), RngStream{1, 1}), DomainError);
  const auto one = ProcessSpec::make(half(), 0.0, 1.0, {}, 0.5, Side::lower, {});
  EXPECT_THROW(delta_p_second(one, half(), small_schedule(), RngStream{1, 1}), DomainError);
  EXPECT_THROW(delta_p_free(one, half(), small_schedule(), RngStream{1, 1}), DomainError);
}

TEST(DeltaP, TranslationInvariant) {
  const double c = 0.75;
  const Band shifted = half().shifted(c);
  const auto a = delta_p_first_def(ProcessSpec::make(half(), 0.0, 1.0, {}, 0.5, Side::lower, {}), half(),
                                   small_schedule(50'000), RngStream{32, 1});
  const auto b = delta_p_first_def(ProcessSpec::make(shifted, 0.0, 1.0, {}, 0.5 + c, Side::lower, {}), shifted,
                                   small_schedule(50'000), RngStream{32, 1});
  EXPECT_NEAR(a.estimate.mean, b.estimate.mean, 1e-3);
}

TEST(DeltaP, StandardErrorHalvesWithFourTimesSamples) {
  const auto spec = ProcessSpec::make(half(), 0.0, 1.0, {}, 0.5, Side::lower, {});
  const auto a = delta_p_first_def(spec, half(), small_schedule(25'000), RngStream{33, 1});
  const auto b = delta_p_first_def(spec, half(), small_schedule(100'000), RngStream{33, 2});
  EXPECT_NEAR(b.estimate.std_error / a.estimate.std_error, 0.5, 0.1);
}

TEST(DeltaP, WideningTheBandNeverLowersSurvival) {
  // Same spec, same streams: every path kept by the narrow band is kept by the wide one.
  const Band narrow = catalog::flat_band();
  const Band wide = Band::between(Curve::constant(0.0), Curve::constant(2.0));
  const auto spec = ProcessSpec::make(narrow, 0.0, 0.5, Side::lower, 0.0, {}, 0.5);
  const auto a = delta_p_first_def(spec, narrow, small_schedule(50'000), RngStream{34, 1});
  const auto b = delta_p_first_def(spec, wide, small_schedule(50'000), RngStream{34, 1});
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    EXPECT_LE(a.rows[i].probability.mean, b.rows[i].probability.mean);
}

TEST(DeltaP, FreeEndDefinitional) {
  const auto spec = ProcessSpec::make(half(), 0.0, 1.0, Side::lower, 0.0, {}, std::nullopt);
  const auto r = delta_p_free(spec, half(), small_schedule(), RngStream{35, 1});
  EXPECT_NEAR(r.estimate.mean, 1.0 / std::sqrt(std::numbers::pi), 0.05 / std::sqrt(std::numbers::pi));
}

TEST(Lemma, FlatOneSidedIsExact) {
  const auto spec = ProcessSpec::make(half(), 0.0, 1.0, {}, 0.5, Side::lower, {});
  const auto r = delta_p_first_lemma(spec, half(), {}, RngStream{36, 1});
  EXPECT_NEAR(r.estimate.mean, kOneSided, 1e-14);
  EXPECT_EQ(r.estimate.std_error, 0.0);
  EXPECT_EQ(r.containment.mean, 1.0);
  EXPECT_DOUBLE_EQ(r.coefficient, 1.0);
  const auto f = delta_p_free_lemma(ProcessSpec::make(half(), 0.0, 1.0, Side::lower, 0.0, {}, std::nullopt), half(),
                                    {}, RngStream{36, 2});
  EXPECT_NEAR(f.estimate.mean, 1.0 / std::sqrt(std::numbers::pi), 1e-14);
}

TEST(Lemma, FreeEndScalesWithInterval) {
  // One-sided flat free end on [t1, 1]: (1 - t1)^{-1/2} / sqrt(pi) before the sqrt(T) factor.
  const auto spec = ProcessSpec::make(half(), 0.5, 1.0, Side::lower, 0.0, {}, std::nullopt);
  const auto f = delta_p_free_lemma(spec, half(), {}, RngStream{37, 1});
  EXPECT_NEAR(f.coefficient, std::sqrt(2.0 / (std::numbers::pi * 0.5)), 1e-14);
  EXPECT_NEAR(f.estimate.mean, 1.0 / std::sqrt(std::numbers::pi), 1e-14);
}

TEST(Lemma, TwoSidedFlatAgainstImageSeries) {
  const auto c = catalog::delta_p_case("two-sided-flat");
  LemmaBudget bud;
  bud.samples = 8000;
  const auto r = delta_p_first_lemma(c.spec, c.band, bud, RngStream{38, 1});
  EXPECT_NEAR(r.estimate.mean, c.reference, 4.0 * r.estimate.std_error + 0.01 * c.reference);
  EXPECT_LT(r.containment.mean, 1.0);
}

TEST(Tau, RejectsTimesOutsideTheInterval) {
  const Band b = catalog::flat_band();
  const auto spec = ProcessSpec::make(b, 0.25, 0.75, Side::lower, 0.0, Side::lower, {});
  EXPECT_THROW(delta_p_second_tau(spec, b, 0.25, {}, RngStream{1, 1}), DomainError);
  EXPECT_THROW(delta_p_second_tau(spec, b, 0.9, {}, RngStream{1, 1}), DomainError);
  const auto one = ProcessSpec::make(b, 0.25, 0.75, Side::lower, 0.0, {}, 0.5);
  EXPECT_THROW(delta_p_second_tau(one, b, 0.5, {}, RngStream{1, 1}), DomainError);
}

TEST(Tau, ExcursionInFlatBand) {
  // 1 + 2 sum (1 - 4 k^2 x^2) exp(-2 k^2 x^2), x^2 = 2: band width 1 over time 1/2.
  double ref = 1.0;
  for (int k = 1; k < 30; ++k) ref += 2.0 * (1.0 - 8.0 * k * k) * std::exp(-4.0 * k * k);
  const Band b = catalog::flat_band();
  const auto spec = ProcessSpec::make(b, 0.25, 0.75, Side::lower, 0.0, Side::lower, {});
  TauBudget bud;
  bud.outer = 3000;
  bud.n_grid = 200;
  const auto r = delta_p_second_tau(spec, b, 0.5, bud, RngStream{39, 1});
  EXPECT_NEAR(r.mean, ref, 4.0 * r.std_error);
  EXPECT_LT(r.std_error, 0.05);
}

TEST(Nu, AssemblyIsTheOrderedProduct) {
  const Band b = catalog::flat_band();
  FixedFactors src;
  const auto v = nu(SignVector({1}), TimeTuple({0.4}), b, 0.5, 0.5, src);
  ASSERT_EQ(v.breakdown.size(), 3u);
  EXPECT_EQ(v.breakdown[0].name, "density");
  EXPECT_EQ(v.breakdown[1].name, "dP[0,0.4]");
  EXPECT_EQ(v.breakdown[2].name, "dP[0.4,1]");
  EXPECT_EQ(v.value, v.breakdown[0].value * v.breakdown[1].value * v.breakdown[2].value);
  const std::vector<double> lv{1.0};
  EXPECT_EQ(v.breakdown[0].value, finite_dim_density(TimeTuple({0.4}), lv, 0.5, 0.5));
}

TEST(Nu, SecondOrderHasOneInteriorFactor) {
  const Band b = catalog::flat_band();
  FixedFactors src;
  const auto v = nu(SignVector({1, -1}), TimeTuple({0.3, 0.6}), b, 0.5, std::nullopt, src);
  int d2 = 0;
  for (const auto& f : v.breakdown) d2 += f.name.rfind("d2P", 0) == 0 ? 1 : 0;
  EXPECT_EQ(d2, 1);
  EXPECT_EQ(v.breakdown.size(), 4u);
  EXPECT_THROW(nu(SignVector({1}), TimeTuple({0.3, 0.6}), b, 0.5, 0.5, src), DomainError);
}

TEST(Nu, NegativeFactorRejected) {
  EXPECT_THROW(assemble_nu(SignVector({1}), TimeTuple({0.5}), {{"density", 1.0, 0.0}, {"x", -0.1, 0.0}}),
               DegenerateError);
  const auto z = assemble_nu(SignVector({1}), TimeTuple({0.5}), {{"density", 1.0, 0.0}, {"x", 0.0, 0.0}});
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.std_error, 0.0);
}

TEST(Nu, ExtrapolatedFactorsAreCached) {
  const Band b = half();
  ExtrapolatedFactors src(b, small_schedule(20'000), RngStream{40, 1});
  const auto seg = ProcessSpec::make(b, 0.0, 1.0, {}, 0.5, Side::lower, {});
  const auto f1 = src.factor(seg);
  const auto f2 = src.factor(seg);
  EXPECT_EQ(f1.mean, f2.mean);
  EXPECT_EQ(src.cached(), 1u);
}

TEST(Nu, DegenerateFactorNamesTheInterval) {
  // Start on the upper curve of a band whose lower curve meets it: nothing survives.
  const Band thin = Band::between(Curve::constant(0.0), Curve::constant(1e-9));
  ExtrapolatedFactors src(thin, small_schedule(10'000), RngStream{41, 1});
  try {
    nu(SignVector({1}), TimeTuple({0.5}), thin, 5e-10, 5e-10, src);
    FAIL() << "expected a degenerate factor";
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("dP[0,0.5]"), std::string::npos);
  }
}
