#include "kirchhoff/wells.hpp"

#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <random>

using namespace kirchhoff;

namespace {

const Context& line(int n, double p) {
    static std::map<std::pair<int, double>, std::unique_ptr<Context>> cache;
    auto& slot = cache[{n, p}];
    if (!slot) slot = std::make_unique<Context>(DomainSpec{{1.0}, {n}}, p);
    return *slot;
}

double stationary_along(const Params& prm, const Context& ctx, const Field& u) {
    const auto f = fiber_map(prm, norms(ctx.grid(), u, prm.p));
    return f.stationary.has() ? *f.stationary : std::numeric_limits<double>::infinity();
}

}  // namespace

TEST(Sobolev, QuadraticExponentRecoversLambda1) {
    const Context& ctx = line(127, 3.0);
    const auto s2 = estimate_sobolev_constant(ctx.grid(), ctx.solver(), ctx.grid().sine_mode({2, 1, 1}) + ctx.psi1(), 2.0);
    EXPECT_NEAR(s2.S, ctx.lambda1(), 1e-8 * ctx.lambda1());
}

TEST(Sobolev, QuarticConstantIsMeshStable) {
    const double s127 = line(127, 3.0).S4(), s255 = line(255, 3.0).S4();
    EXPECT_GT(s127, 0.0);
    EXPECT_LE(std::fabs(s127 - s255), 0.02 * s255);
    EXPECT_NEAR(line(255, 3.0).Lambda(), s255 * s255, 1e-12 * s255 * s255);
}

TEST(Sobolev, QuotientOfAnyFieldBoundsConstantFromAbove) {
    const Context& ctx = line(127, 4.0);
    std::mt19937_64 rng(21);
    for (int k = 0; k < 50; ++k) {
        const Field u = random_smooth_field(ctx, rng, 0.5);
        const double q5 = std::pow(lq_power(ctx.grid(), u, 5.0), 2.0 / 5.0);
        EXPECT_GE(dirichlet_energy(ctx.grid(), u) / q5, ctx.Sp1() * (1.0 - 1e-10));
    }
}

TEST(CubicWell, DepthSitsInBracketAndBelowProbeRays) {
    const Context& ctx = line(255, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const auto wd = estimate_well_depth(prm, ctx, RaySampling{});
    ASSERT_TRUE(wd.d3.has());
    ASSERT_TRUE(wd.d3_bracket.has());
    EXPECT_TRUE(wd.d3_in_bracket);
    const auto [lo, hi] = *wd.d3_bracket;
    EXPECT_GE(*wd.d3, lo * (1.0 - kBracketSlack));
    EXPECT_LE(*wd.d3, hi * (1.0 + kBracketSlack));
    EXPECT_LE(*wd.d3, wd.raw_minimum);
    EXPECT_LE(*wd.d3, stationary_along(prm, ctx, ctx.psi1()));
    EXPECT_LE(*wd.d3, stationary_along(prm, ctx, ctx.phi_Lambda()));
    // the two lower estimates are sharp on different fields (psi1 and phi_Lambda), so the gap is strict
    EXPECT_GT(*wd.d3, lo);
}

TEST(CubicWell, MoreRaysNeverRaiseRawMinimum) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {8, 32, 128, 512}) {
        RaySampling s;
        s.n_rays = n;
        s.polish_iterations = 0;
        const auto wd = estimate_well_depth(prm, ctx, s);
        EXPECT_LE(wd.raw_minimum, prev);
        prev = wd.raw_minimum;
    }
}

TEST(CubicWell, ParallelRaysMatchSerial) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    RaySampling s;
    s.polish_iterations = 20;
    const auto one = estimate_well_depth(prm, ctx, s);
    s.workers = 3;
    const auto three = estimate_well_depth(prm, ctx, s);
    EXPECT_EQ(*one.d3, *three.d3);
    EXPECT_EQ(one.raw_minimum, three.raw_minimum);
}

TEST(CubicWell, UndefinedOutsideRegime) {
    const Context& ctx = line(127, 3.0);
    EXPECT_FALSE(estimate_well_depth({1.0, 1.0, 0.0, 3.0}, ctx, RaySampling{}).d3.has());
    const auto above = estimate_well_depth({0.005, 1.0, 20.0, 3.0}, ctx, RaySampling{});
    EXPECT_FALSE(above.d3.has());
    EXPECT_FALSE(above.d3.reason.empty());
    EXPECT_FALSE(estimate_well_depth({0.005, 1.0, 0.0, 2.0}, ctx, RaySampling{}).d3.has());
}

TEST(SuperlinearWell, DepthAboveLowerBoundAndBelowProbeRays) {
    const Context& ctx = line(255, 4.0);
    const Params prm{0.05, 1.0, 2.0, 4.0};
    const auto wd = estimate_well_depth(prm, ctx, RaySampling{});
    ASSERT_TRUE(wd.dp.has());
    ASSERT_TRUE(wd.dp_lower.has());
    EXPECT_GE(*wd.dp, *wd.dp_lower);
    EXPECT_LE(*wd.dp, stationary_along(prm, ctx, ctx.psi1()));
    EXPECT_LE(*wd.dp, stationary_along(prm, ctx, ctx.phi_p1()));
    EXPECT_FALSE(estimate_well_depth({0.05, 1.0, 20.0, 4.0}, ctx, RaySampling{}).dp.has());
}

TEST(NehariLMinus, StationaryValueIsQuarterOfQuadraticPart) {
    const Context& ctx = line(127, 3.0);
    const double l1 = ctx.lambda1();
    const Params prm{0.0158, 1.0, l1 + 0.01, 3.0};
    ASSERT_LT(psi1_cubic_gap(prm, ctx), 0.0);
    const auto f = fiber_map(prm, norms(ctx.grid(), ctx.psi1(), 3.0));
    ASSERT_EQ(f.regime, FiberRegime::LMinus);
    const Field u = *f.sigma * ctx.psi1();
    const Norms n = norms(ctx.grid(), u, 3.0);
    const double scale = nehari_scale(prm, n);
    EXPECT_LE(std::fabs(functional_I(prm, n)), 1e-12 * scale);
    const double quarter = 0.25 * (prm.b * n.g2 - prm.lambda * n.m2);
    EXPECT_LT(quarter, 0.0);
    EXPECT_NEAR(functional_J(prm, n), quarter, 1e-12 * scale);
    EXPECT_NEAR(*f.stationary, quarter, 1e-12 * scale);
}

TEST(SignedDepths, CaseBWindowHasNegativeMinusDepth) {
    const Context& ctx = line(127, 3.0);
    const double l1 = ctx.lambda1();
    const Params prm{0.0158, 1.0, l1 + 0.01, 3.0};
    RaySampling s;
    s.n_rays = 64;
    const auto sd = estimate_signed_depths(prm, ctx, s);
    ASSERT_TRUE(sd.d3_minus.has());
    EXPECT_LT(*sd.d3_minus, 0.0);
    EXPECT_GT(sd.minus_admissible, 0);
    EXPECT_GT(sd.max_sigma_minus, 0.0);
    EXPECT_THROW(estimate_signed_depths({0.0158, 1.0, l1 - 0.5, 3.0}, ctx, s), HypothesisError);
    EXPECT_THROW(estimate_signed_depths({1e-4, 1.0, l1 + 0.01, 3.0}, ctx, s), HypothesisError);
}

TEST(DeltaProbe, PenaltyPositiveAtTinyGapAndVanishesEventually) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.0158, 1.0, ctx.lambda1() + 0.01, 3.0};
    RaySampling s;
    s.n_rays = 32;
    s.polish_iterations = 100;
    const auto dp = probe_delta(prm, ctx, {0.002, 0.004, 5.0}, s);
    ASSERT_EQ(dp.penalties.size(), 3u);
    EXPECT_GT(dp.penalties[0], dp.floor);
    EXPECT_LE(dp.penalties[2], dp.floor);
    ASSERT_TRUE(dp.delta_estimate.has());
    EXPECT_GE(*dp.delta_estimate, 0.002);
    EXPECT_LT(*dp.delta_estimate, 5.0);
}

TEST(Classify, WellMembershipFollowsDepthAndNehariSign) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const auto c = effective_coeffs(prm, ctx.lambda1());
    const double d = 1.0;
    const auto r = radii(prm, c, ctx.Lambda(), ctx.Sp1(), d);
    const Maybe<double> depth = Maybe<double>::of(d);
    EXPECT_TRUE(classify(prm, ctx, Field::Zero(ctx.grid().size()), depth, r).in_W_plus);
    const Field small = 1e-3 * ctx.psi1();
    const auto cs = classify(prm, ctx, small, depth, r);
    EXPECT_TRUE(cs.in_W_plus);
    EXPECT_FALSE(cs.in_W_minus);
    EXPECT_TRUE(cs.below_rho);
    const auto f = fiber_map(prm, norms(ctx.grid(), ctx.psi1(), 3.0));
    const auto cb = classify(prm, ctx, 3.0 * *f.sigma * ctx.psi1(), depth, r);
    EXPECT_EQ(cb.I_sign, -1);
    EXPECT_EQ(cb.in_W_minus, cb.J < d);
    EXPECT_FALSE(classify(prm, ctx, small, Maybe<double>::none("x"), r).in_W_plus);
}

namespace {

// Minimum of the ray maximum over random directions, no polishing. Coefficients in the sine basis are
// Gaussian with spread lambda_k^{-3/2}; white noise on 8 nodes almost never lands near the smooth minimizer.
double brute_force_depth(const Params& prm, const Context& ctx, int directions, std::uint64_t seed) {
    const Grid& g = ctx.grid();
    const int n = static_cast<int>(g.size());
    std::vector<Field> modes;
    std::vector<double> spread;
    for (int k = 1; k <= n; ++k) {
        modes.push_back(g.sine_mode({k, 1, 1}));
        const double lam = dirichlet_energy(g, modes.back()) / (g.weight() * modes.back().squaredNorm());
        spread.push_back(std::pow(lam, -1.5));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    double best = std::numeric_limits<double>::infinity();
    for (int d = 0; d < directions; ++d) {
        Field u = Field::Zero(n);
        for (int k = 0; k < n; ++k) u += z(rng) * spread[k] * modes[k];
        const auto f = fiber_map(prm, norms(g, u, prm.p));
        if (f.stationary.has()) best = std::min(best, *f.stationary);
    }
    return best;
}

}  // namespace

TEST(SuperlinearWell, CoarseGridMatchesBruteForce) {
    const Context ctx(DomainSpec{{1.0}, {8}}, 4.0);
    const Params prm{0.05, 1.0, 2.0, 4.0};
    const auto wd = estimate_well_depth(prm, ctx, RaySampling{});
    ASSERT_TRUE(wd.dp.has());
    for (std::uint64_t seed : {1, 2, 3}) {
        const double oracle = brute_force_depth(prm, ctx, 2000, seed);
        EXPECT_NEAR(*wd.dp, oracle, 0.05 * oracle) << "oracle seed " << seed;
        EXPECT_LE(*wd.dp, oracle * (1.0 + 1e-12));
    }
}

TEST(CubicWell, BracketHoldsAcrossParameterSettings) {
    const Context& ctx = line(127, 3.0);
    const double l1 = ctx.lambda1();
    const std::vector<Params> settings{
        {0.001, 1.0, 0.0, 3.0}, {0.005, 1.0, 3.0, 3.0}, {0.01, 1.0, 5.0, 3.0}, {0.003, 2.0, -4.0, 3.0}, {0.008, 1.0, l1 - 0.5, 3.0}};
    for (const Params& prm : settings) {
        const auto wd = estimate_well_depth(prm, ctx, RaySampling{});
        ASSERT_TRUE(wd.d3.has()) << prm.a << " " << prm.lambda << ": " << wd.d3.reason;
        ASSERT_TRUE(wd.d3_bracket.has());
        const auto [lo, hi] = *wd.d3_bracket;
        EXPECT_TRUE(wd.d3_in_bracket) << prm.a << " " << prm.lambda;
        EXPECT_GE(*wd.d3, lo * (1.0 - kBracketSlack));
        EXPECT_LE(*wd.d3, hi * (1.0 + kBracketSlack));
    }
}

TEST(SignedDepths, MinusNegativePlusPositiveInWindow) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.0158, 1.0, ctx.lambda1() + 0.01, 3.0};
    RaySampling s;
    s.n_rays = 64;
    const auto sd = estimate_signed_depths(prm, ctx, s);
    ASSERT_TRUE(sd.d3_minus.has());
    ASSERT_TRUE(sd.d3_plus.has()) << sd.d3_plus.reason;
    EXPECT_LT(*sd.d3_minus, 0.0);
    EXPECT_GT(*sd.d3_plus, 0.0);
    EXPECT_GT(sd.plus_admissible, 0);
}
