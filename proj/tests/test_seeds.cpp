#include "kirchhoff/seeds.hpp"

#include <gtest/gtest.h>

#include <map>
#include <memory>

using namespace kirchhoff;

namespace {

struct Regime {
    std::unique_ptr<Context> ctx;
    Params prm;
    SeedInputs in;
};

RaySampling light() {
    RaySampling s;
    s.n_rays = 64;
    s.polish_iterations = 200;
    return s;
}

// One shared context per exponent and one parameter point per recipe family.
Regime& regime(const std::string& key) {
    static std::map<std::string, Regime> cache;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Regime r;
    const DomainSpec d{{1.0}, {127}};
    if (key == "p3") {
        r.ctx = std::make_unique<Context>(d, 3.0);
        r.prm = {0.005, 1.0, 3.0, 3.0};
        r.in = SeedInputs::from(estimate_well_depth(r.prm, *r.ctx, light()));
    } else if (key == "p3B") {
        r.ctx = std::make_unique<Context>(d, 3.0);
        const double l1 = r.ctx->lambda1();
        const Params probe{0.0158, 1.0, l1 + 0.01, 3.0};
        const auto dp = probe_delta(probe, *r.ctx, {0.004, 0.008, 0.016, 0.032, 0.064}, light());
        r.prm = {0.0158, 1.0, l1 + 0.5 * *dp.delta_estimate, 3.0};
        const auto sd = estimate_signed_depths(r.prm, *r.ctx, light());
        r.in.d3_minus = sd.d3_minus;
        r.in.delta_estimate = dp.delta_estimate;
    } else if (key == "p4") {
        r.ctx = std::make_unique<Context>(d, 4.0);
        r.prm = {0.05, 1.0, 2.0, 4.0};
        r.in = SeedInputs::from(estimate_well_depth(r.prm, *r.ctx, light()));
    } else if (key == "p4B") {
        r.ctx = std::make_unique<Context>(d, 4.0);
        r.prm = {0.05, 1.0, 15.0, 4.0};
    } else if (key == "p2") {
        r.ctx = std::make_unique<Context>(d, 2.0);
        r.prm = {1e-4, 1.0, 2.0, 2.0};
    }
    return cache.emplace(key, std::move(r)).first->second;
}

struct Case {
    const char* recipe;
    const char* regime;
    bool needs_positive_inner;
    double perturbation = 0.5;  // relative size of the random component of v0
};

const std::vector<Case>& all_cases() {
    static const std::vector<Case> cases{
        {"sublinear_negE", "p2", false},           {"p3_well_interior", "p3", false},
        {"p3_blowup:h1", "p3", false},             {"p3_blowup:h2", "p3", true},
        {"p3_blowup:h3", "p3", false},             {"p3_blowup:h4", "p3", true},
        {"p3_super_lambda", "p3B", false, 0.05},       {"superlinear_well_interior", "p4", false},
        {"superlinear_blowup:a1", "p4", false},    {"superlinear_blowup:a2", "p4", true},
        {"superlinear_blowup:a3", "p4", true},     {"superlinear_blowup:a4", "p4", true},
        {"superlinear_blowup:b1", "p4B", false},   {"superlinear_blowup:b2", "p4B", true},
    };
    return cases;
}

Field default_direction(const SeedRecipe& r, const Context& ctx) {
    switch (r.kind) {
        case SeedKind::SublinearNegE:
        case SeedKind::SuperlinearBlowup: return ctx.phi_p1();
        case SeedKind::P3Blowup:
        case SeedKind::P3SuperLambda: return ctx.phi_Lambda();
        default: return ctx.psi1();
    }
}

// Smooth random perturbation of the recipe's default direction, with v1 kept positively correlated with v0.
// For p3_super_lambda the admissible bases (S with b g2 > lambda m2, a just below 1/Lambda) form a thin
// neighbourhood of phi_Lambda, so its perturbation is smaller.
SeedRecipe with_random_base(SeedRecipe r, const Context& ctx, std::uint64_t seed, double eps) {
    const Grid& g = ctx.grid();
    auto rng = make_rng(seed, 101, 0);
    const Field v0 = normalize_gradient(g, default_direction(r, ctx)) +
                     eps * normalize_gradient(g, random_smooth_field(ctx, rng, 0.0));
    auto rng1 = make_rng(seed, 102, 0);
    Field w = random_smooth_field(ctx, rng1, 0.0);
    w /= std::sqrt(g.weight() * w.squaredNorm());
    const Field along = v0 / std::sqrt(g.weight() * v0.squaredNorm());
    Field v1 = along + 0.5 * w;
    if (g.weight() * v0.dot(v1) <= 0.0) v1 = along - 0.5 * w;
    r.v0 = v0;
    r.v1 = v1;
    return r;
}

double energy(const Params& prm, const Context& ctx, const SeedResult& s) {
    return total_energy(prm, ctx.grid(), s.u0, s.u1);
}

// Sum of the magnitudes of the energy's terms; the comparison is relative to this because several
// recipes target E(0) = 0 (or a level reached by cancellation of large terms).
double energy_scale(const Params& prm, const Context& ctx, const SeedResult& s) {
    const Grid& g = ctx.grid();
    const Norms n = norms(g, s.u0, prm.p);
    return 0.5 * g.weight() * s.u1.squaredNorm() + 0.25 * prm.a * n.g2 * n.g2 + 0.5 * prm.b * n.g2 +
           0.5 * std::fabs(prm.lambda) * n.m2 + n.lp1 / (prm.p + 1.0);
}

}  // namespace

class EveryRecipe : public ::testing::TestWithParam<Case> {};

TEST_P(EveryRecipe, EmitsVerifiedCertificate) {
    const Case c = GetParam();
    Regime& R = regime(c.regime);
    const SeedResult s = seed(parse_recipe(c.recipe), R.prm, *R.ctx, R.in);
    EXPECT_TRUE(certificate_holds(s.certificate));
    EXPECT_TRUE(verify_certificate(s, R.prm, *R.ctx, R.in));
    EXPECT_EQ(s.recipe.name(), c.recipe);
    const double E = energy(R.prm, *R.ctx, s);
    EXPECT_NEAR(s.E_from_coefficients, E, 1e-12 * energy_scale(R.prm, *R.ctx, s));
}

TEST_P(EveryRecipe, NegatedVelocityFailsWhenInnerProductRequired) {
    const Case c = GetParam();
    Regime& R = regime(c.regime);
    SeedResult s = seed(parse_recipe(c.recipe), R.prm, *R.ctx, R.in);
    s.u1 = -s.u1;
    if (c.needs_positive_inner) EXPECT_FALSE(verify_certificate(s, R.prm, *R.ctx, R.in));
    else EXPECT_TRUE(verify_certificate(s, R.prm, *R.ctx, R.in));
}

TEST_P(EveryRecipe, HoldsForTwentyRandomBaseFields) {
    const Case c = GetParam();
    Regime& R = regime(c.regime);
    for (std::uint64_t k = 1; k <= 20; ++k) {
        const SeedRecipe r = with_random_base(parse_recipe(c.recipe), *R.ctx, k, c.perturbation);
        SeedResult s;
        ASSERT_NO_THROW(s = seed(r, R.prm, *R.ctx, R.in)) << c.recipe << " base " << k;
        EXPECT_TRUE(verify_certificate(s, R.prm, *R.ctx, R.in)) << c.recipe << " base " << k;
        const double E = energy(R.prm, *R.ctx, s);
        EXPECT_NEAR(s.E_from_coefficients, E, 1e-12 * energy_scale(R.prm, *R.ctx, s)) << c.recipe << " base " << k;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, EveryRecipe, ::testing::ValuesIn(all_cases()), [](const auto& info) {
    std::string n = info.param.recipe;
    for (char& ch : n)
        if (ch == ':') ch = '_';
    return n;
});

TEST(Seeds, H2HasZeroEnergyAndPositiveInnerProduct) {
    Regime& R = regime("p3");
    const SeedResult s = seed(parse_recipe("p3_blowup:h2"), R.prm, *R.ctx, R.in);
    EXPECT_NEAR(energy(R.prm, *R.ctx, s), 0.0, 1e-10);
    EXPECT_GT(l2_inner(R.ctx->grid(), s.u0, s.u1), 0.0);
    EXPECT_EQ(s.m, 1.0);
}

TEST(Seeds, H1EnergyNegative) {
    Regime& R = regime("p3");
    const SeedResult s = seed(parse_recipe("p3_blowup:h1"), R.prm, *R.ctx, R.in);
    EXPECT_LT(energy(R.prm, *R.ctx, s), 0.0);
}

TEST(Seeds, H4ChecksBothInnerProductAndMassCondition) {
    Regime& R = regime("p3");
    const SeedResult s = seed(parse_recipe("p3_blowup:h4"), R.prm, *R.ctx, R.in);
    bool inner = false, mass = false;
    for (const auto& c : s.certificate) {
        inner = inner || (c.name == "int u0 u1" && c.holds);
        mass = mass || (c.name == "|u0|_2^2" && c.holds);
    }
    EXPECT_TRUE(inner);
    EXPECT_TRUE(mass);
    const double E = energy(R.prm, *R.ctx, s);
    const double b0 = effective_coeffs(R.prm, R.ctx->lambda1()).b0;
    EXPECT_GE(E, *R.in.d3);
    EXPECT_GT(norms(R.ctx->grid(), s.u0, 3.0).m2, 4.0 * E / (b0 * R.ctx->lambda1()));
}

TEST(Seeds, B1EnergyBelowGateAndB2OnIt) {
    Regime& R = regime("p4B");
    const double gate = blowup_threshold_h0(R.prm, R.ctx->lambda1()).energy_gate;
    const SeedResult b1 = seed(parse_recipe("superlinear_blowup:b1"), R.prm, *R.ctx, R.in);
    EXPECT_LT(energy(R.prm, *R.ctx, b1), gate);
    const SeedResult b2 = seed(parse_recipe("superlinear_blowup:b2"), R.prm, *R.ctx, R.in);
    EXPECT_NEAR(energy(R.prm, *R.ctx, b2), gate, 1e-10);
}

TEST(Seeds, SublinearK0MinimizesRayEnergy) {
    Regime& R = regime("p2");
    const SeedResult s = seed(parse_recipe("sublinear_negE"), R.prm, *R.ctx, R.in);
    const Norms n = norms(R.ctx->grid(), R.ctx->phi_p1(), 2.0);
    // J(k v0) = k^2 phi(k)
    const auto phi = [&](double k) { return functional_J(R.prm, n.scaled(k, 2.0)) / (k * k); };
    EXPECT_LE(phi(s.k), phi(1.01 * s.k));
    EXPECT_LE(phi(s.k), phi(0.99 * s.k));
    EXPECT_LT(phi(s.k), 0.0);
    const double Jk = functional_J(R.prm, n.scaled(s.k, 2.0));
    EXPECT_NEAR(s.m, 0.9 * std::sqrt(-Jk), 1e-12 * s.m);
    ASSERT_TRUE(s.largest_admissible_a.has());
    EXPECT_GT(*s.largest_admissible_a, R.prm.a);
}

TEST(Seeds, SublinearRejectsLargeAWithBisectedBound) {
    Regime& R = regime("p2");
    Params big = R.prm;
    big.a = 0.05;
    try {
        seed(parse_recipe("sublinear_negE"), big, *R.ctx, R.in);
        FAIL() << "expected rejection";
    } catch (const HypothesisError& e) {
        EXPECT_NE(std::string(e.what()).find("largest admissible a"), std::string::npos);
    }
}

TEST(Seeds, H3WindowStaysInUnstableSet) {
    Regime& R = regime("p3");
    const Grid& g = R.ctx->grid();
    const auto f = fiber_map(R.prm, norms(g, R.ctx->phi_Lambda(), 3.0));
    const Field v0 = 1.1 * *f.sigma * R.ctx->phi_Lambda();
    const Norms n = norms(g, v0, 3.0);
    const double mu0 = n.l4 - R.prm.a * n.g2 * n.g2, mu1 = R.prm.b * n.g2 - R.prm.lambda * n.m2;
    const double d3 = *R.in.d3;
    const double K = (mu1 + std::sqrt(mu1 * mu1 - 4.0 * mu0 * d3)) / mu0, upper = 2.0 * mu1 / mu0;
    ASSERT_LT(K, upper);
    for (int i = 1; i < 50; ++i) {
        const double k2 = K + (upper - K) * i / 50.0;
        const Norms nk = n.scaled(std::sqrt(k2), 3.0);
        const double J = functional_J(R.prm, nk);
        EXPECT_GT(J, 0.0);
        EXPECT_LT(J, d3);
        EXPECT_LT(functional_I(R.prm, nk), 0.0);
    }
    const SeedResult s = seed(parse_recipe("p3_blowup:h3"), R.prm, *R.ctx, R.in);
    EXPECT_GT(s.k * s.k / (1.1 * *f.sigma * 1.1 * *f.sigma) * 1.0, 0.0);
    EXPECT_NEAR(s.k * s.k, std::min(1.1 * K, 0.5 * (K + upper)), 1e-12 * K);
}

TEST(Seeds, RejectionsNameTheViolatedCondition) {
    Regime& R = regime("p3");
    Params wrong = R.prm;
    wrong.lambda = 20.0;
    EXPECT_THROW(seed(parse_recipe("p3_blowup:h1"), wrong, *R.ctx, R.in), HypothesisError);
    EXPECT_THROW(seed(parse_recipe("p3_well_interior"), R.prm, *R.ctx, SeedInputs{}), HypothesisError);
    Regime& B = regime("p3B");
    Params small = B.prm;
    small.a = 1e-4;
    try {
        seed(parse_recipe("p3_super_lambda"), small, *B.ctx, B.in);
        FAIL() << "expected rejection";
    } catch (const HypothesisError& e) {
        EXPECT_NE(std::string(e.what()).find("psi1"), std::string::npos);
    }
    EXPECT_THROW(parse_recipe("p3_blowup:h9"), ConfigError);
    EXPECT_THROW(parse_recipe("p3_well_interior:h1"), ConfigError);
    EXPECT_THROW(parse_recipe("nonsense"), ConfigError);
}
