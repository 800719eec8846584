#include "kirchhoff/dynamics.hpp"

#include <gtest/gtest.h>

#include <map>
#include <memory>

using namespace kirchhoff;

namespace {

const Context& line(int n, double p) {
    static std::map<std::pair<int, double>, std::unique_ptr<Context>> cache;
    auto& slot = cache[{n, p}];
    if (!slot) slot = std::make_unique<Context>(DomainSpec{{1.0}, {n}}, p);
    return *slot;
}

SimConfig sim(double dt, double T, Scheme s = Scheme::Midpoint, int every = 1) {
    SimConfig c;
    c.dt = dt;
    c.horizon = T;
    c.scheme = s;
    c.record_every = every;
    return c;
}

std::vector<TraceRow> synthetic(double T1, double p, int n, double tmax) {
    std::vector<TraceRow> rows;
    const double a = blowup_alpha(p);
    for (int i = 0; i < n; ++i) {
        TraceRow r;
        r.t = tmax * i / (n - 1);
        // M^{-alpha} = T1 - t exactly
        r.M = std::pow(T1 - r.t, -1.0 / a);
        r.Mprime = (1.0 / a) * std::pow(T1 - r.t, -1.0 / a - 1.0);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST(Integrator, ZeroIsAnEquilibrium) {
    const Context& ctx = line(63, 3.0);
    const Field z = Field::Zero(ctx.grid().size());
    for (Scheme s : {Scheme::Midpoint, Scheme::StormerVerlet}) {
        const Trace tr = integrate({0.1, 1.0, 2.0, 3.0}, ctx, z, z, sim(1e-2, 1.0, s, 10));
        EXPECT_EQ(tr.termination, Termination::Horizon);
        EXPECT_EQ(tr.u.norm(), 0.0);
        EXPECT_EQ(tr.v.norm(), 0.0);
        EXPECT_NEAR(tr.rows.back().t, 1.0, 1e-12);
    }
}

TEST(Integrator, MidpointConservesDiscreteEnergy) {
    const Context& ctx = line(255, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const Field u0 = 0.5 * ctx.psi1() + 0.2 * ctx.grid().sine_mode({3, 1, 1});
    const Field u1 = 0.3 * ctx.grid().sine_mode({2, 1, 1});
    const Trace tr = integrate(prm, ctx, u0, u1, sim(1e-3, 10.0, Scheme::Midpoint, 10));
    EXPECT_EQ(tr.termination, Termination::Horizon);
    EXPECT_EQ(tr.steps, 10000);
    EXPECT_LE(tr.max_rel_energy_drift, 1e-8);
    for (const auto& r : tr.rows) EXPECT_LE(std::fabs(r.E - tr.rows.front().E), 1e-8 * std::max(1.0, std::fabs(tr.rows.front().E)));
}

TEST(Integrator, MidpointConservesEnergyInTwoDimensionsAndNonIntegerExponent) {
    const Context ctx({{1.0, 1.0}, {15, 15}}, 2.5);
    const Params prm{0.01, 1.0, -1.0, 2.5};
    const Field u0 = ctx.psi1() + 0.1 * ctx.grid().sine_mode({1, 2, 1});
    const Trace tr = integrate(prm, ctx, u0, Field::Zero(u0.size()), sim(2e-3, 2.0, Scheme::Midpoint, 10));
    EXPECT_EQ(tr.termination, Termination::Horizon);
    EXPECT_LE(tr.max_rel_energy_drift, 1e-8);
}

TEST(Integrator, VerletDriftIsSecondOrder) {
    const Context& ctx = line(255, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const Field u0 = 0.5 * ctx.psi1();
    const Field u1 = 0.3 * ctx.grid().sine_mode({2, 1, 1});
    const double d1 = integrate(prm, ctx, u0, u1, sim(1e-3, 10.0, Scheme::StormerVerlet, 10)).max_rel_energy_drift;
    const double d2 = integrate(prm, ctx, u0, u1, sim(5e-4, 10.0, Scheme::StormerVerlet, 10)).max_rel_energy_drift;
    EXPECT_GT(d1, 0.0);
    EXPECT_GE(d1 / d2, 3.0);
    EXPECT_LE(d1 / d2, 5.0);
}

TEST(Integrator, SchemesAreTimeReversible) {
    const Context& ctx = line(63, 3.0);
    const Params prm{0.01, 1.0, 2.0, 3.0};
    const Field u0 = 0.4 * ctx.psi1() + 0.1 * ctx.grid().sine_mode({4, 1, 1});
    const Field u1 = 0.2 * ctx.grid().sine_mode({2, 1, 1});
    for (Scheme s : {Scheme::Midpoint, Scheme::StormerVerlet}) {
        const Trace fwd = integrate(prm, ctx, u0, u1, sim(1e-3, 1.0, s, 100));
        const Trace back = integrate(prm, ctx, fwd.u, -fwd.v, sim(1e-3, 1.0, s, 100));
        EXPECT_LT((back.u - u0).norm(), 1e-9 * u0.norm()) << to_string(s);
        EXPECT_LT((back.v + u1).norm(), 1e-9 * u1.norm()) << to_string(s);
    }
}

TEST(Integrator, MPrimeMatchesFiniteDifferenceOfM) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const double dt = 1e-3;
    const Trace tr = integrate(prm, ctx, 0.5 * ctx.psi1(), 0.3 * ctx.grid().sine_mode({2, 1, 1}), sim(dt, 0.5));
    double scale = 0.0;
    for (const auto& r : tr.rows) scale = std::max(scale, std::fabs(r.Mprime));
    for (std::size_t i = 1; i + 1 < tr.rows.size(); ++i) {
        const double fd = (tr.rows[i + 1].M - tr.rows[i - 1].M) / (2.0 * dt);
        EXPECT_NEAR(fd, tr.rows[i].Mprime, 1e-4 * scale);
    }
}

TEST(Integrator, SecondDerivativeOfMEqualsTwiceKineticMinusTwiceI) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const double dt = 1e-3;
    const Trace tr = integrate(prm, ctx, 0.5 * ctx.psi1(), 0.3 * ctx.grid().sine_mode({2, 1, 1}), sim(dt, 0.5));
    for (std::size_t i = 1; i + 1 < tr.rows.size(); ++i) {
        const auto& r = tr.rows[i];
        const double fd = (tr.rows[i + 1].Mprime - tr.rows[i - 1].Mprime) / (2.0 * dt);
        const double rhs = 2.0 * r.ut_l2sq - 2.0 * r.I;
        EXPECT_NEAR(fd, rhs, 1e-4 * (2.0 * r.ut_l2sq + 2.0 * (prm.a * r.grad_l2sq * r.grad_l2sq + r.grad_l2sq + r.lp1)));
    }
}

TEST(Integrator, LargeDataBlowsUpThroughGradientDetector) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const Trace tr = integrate(prm, ctx, 6.0 * ctx.psi1(), Field::Zero(ctx.grid().size()), sim(1e-3, 10.0));
    EXPECT_EQ(tr.termination, Termination::GradientBlowup);
    EXPECT_LT(tr.rows.back().t, 10.0);
    const auto rep = analyze_blowup(tr, prm.p);
    EXPECT_EQ(rep.outcome, Outcome::Blowup);
    ASSERT_TRUE(rep.T1_estimate.has_value());
    EXPECT_GE(*rep.T1_estimate, tr.rows.back().t * (1.0 - 1e-6));
}

TEST(Integrator, RejectsInvalidSettings) {
    const Context& ctx = line(31, 3.0);
    const Field z = Field::Zero(ctx.grid().size());
    EXPECT_THROW(integrate({0.1, 1.0, 0.0, 3.0}, ctx, z, z, sim(0.0, 1.0)), ConfigError);
    EXPECT_THROW(integrate({0.1, 1.0, 0.0, 3.0}, ctx, z, z, sim(1e-3, -1.0)), ConfigError);
    EXPECT_THROW(integrate({0.1, 1.0, 0.0, 3.0}, ctx, z, Field::Zero(3), sim(1e-3, 1.0)), ConfigError);
    EXPECT_THROW(integrate({0.0, 1.0, 0.0, 3.0}, ctx, z, z, sim(1e-3, 1.0)), ConfigError);
    EXPECT_THROW(parse_scheme("rk4"), ConfigError);
}

TEST(BlowupAnalysis, SyntheticInverseSquareLawRecoversT1) {
    for (double p : {3.0, 5.0}) {
        const double T1 = 1.7;
        const auto rows = synthetic(T1, p, 200, 1.6);
        const auto rep = analyze_blowup(rows, Termination::GradientBlowup, p);
        EXPECT_EQ(rep.outcome, Outcome::Blowup);
        EXPECT_EQ(rep.concavity_violations, 0);
        ASSERT_TRUE(rep.T1_estimate.has_value());
        EXPECT_NEAR(*rep.T1_estimate, T1, 0.01 * T1);
        EXPECT_EQ(rep.threshold_hit, "gradient_norm");
    }
}

TEST(BlowupAnalysis, HorizonAndNonFiniteAndShortTraces) {
    const auto rows = synthetic(2.0, 3.0, 50, 1.0);
    EXPECT_EQ(analyze_blowup(rows, Termination::Horizon, 3.0).outcome, Outcome::Bounded);
    EXPECT_EQ(analyze_blowup(rows, Termination::NonFinite, 3.0).outcome, Outcome::Inconclusive);
    EXPECT_THROW(analyze_blowup(synthetic(2.0, 3.0, 9, 1.0), Termination::GradientBlowup, 3.0), ConfigError);
}

TEST(BlowupAnalysis, OscillatingMIsInconclusive) {
    std::vector<TraceRow> rows;
    for (int i = 0; i < 100; ++i) {
        TraceRow r;
        r.t = 0.01 * i;
        r.M = 1.0 + 0.5 * std::sin(40.0 * r.t);
        r.Mprime = 20.0 * std::cos(40.0 * r.t);
        rows.push_back(r);
    }
    const auto rep = analyze_blowup(rows, Termination::GradientBlowup, 3.0);
    EXPECT_EQ(rep.outcome, Outcome::Inconclusive);
    EXPECT_FALSE(rep.T1_estimate.has_value());
    EXPECT_GT(rep.concavity_violations, 0);
}

TEST(BlowupAnalysis, StartsAtFirstPositiveMPrime) {
    auto rows = synthetic(1.0, 3.0, 100, 0.95);
    for (int i = 0; i < 10; ++i) rows[i].Mprime = -1.0;
    const auto rep = analyze_blowup(rows, Termination::GradientBlowup, 3.0);
    EXPECT_DOUBLE_EQ(rep.t0, rows[10].t);
    EXPECT_EQ(rep.samples, 89);
}

TEST(Vacuum, RadiusFormulasAndPreconditions) {
    const Context& ctx = line(127, 3.0);
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const double b0 = 1.0 - 3.0 / ctx.lambda1();
    const auto [reg, r] = vacuum_radius(prm, ctx);
    EXPECT_EQ(reg, VacuumRegime::Cubic);
    EXPECT_NEAR(r, std::sqrt(2.0 * b0 * ctx.Lambda() / (1.0 - prm.a * ctx.Lambda())), 1e-12 * r);
    EXPECT_THROW(vacuum_radius({0.005, 1.0, 20.0, 3.0}, ctx), HypothesisError);
    EXPECT_THROW(vacuum_radius({0.5, 1.0, 3.0, 3.0}, ctx), HypothesisError);

    TraceRow pos;
    pos.E = 0.1;
    pos.grad_l2sq = 1.0;
    EXPECT_THROW(check_vacuum({pos}, prm, ctx), HypothesisError);
    TraceRow flat;
    flat.E = -1.0;
    EXPECT_THROW(check_vacuum({flat}, prm, ctx), HypothesisError);
    TraceRow ok = flat;
    ok.grad_l2sq = 4.0 * r * r;
    TraceRow low = ok;
    low.grad_l2sq = 0.81 * r * r;
    const auto rep = check_vacuum({ok, ok, low, ok}, prm, ctx);
    EXPECT_FALSE(rep.ok());
    ASSERT_EQ(rep.violating_rows.size(), 1u);
    EXPECT_EQ(rep.violating_rows[0], 2u);
    EXPECT_NEAR(rep.min_grad, 0.9 * r, 1e-12 * r);
}

TEST(Invariance, MonitorRecordsViolationsAndRejectsBadStart) {
    const Params prm{0.005, 1.0, 3.0, 3.0};
    const auto row = [&](double g2, double m2, double l4) {
        TraceRow r;
        r.grad_l2sq = g2;
        r.M = m2;
        r.lp1 = l4;
        const Norms n{g2, m2, l4, l4};
        r.J = functional_J(prm, n);
        r.I = functional_I(prm, n);
        return r;
    };
    const TraceRow in = row(1.0, 0.05, 0.1);   // I > 0, J small
    const TraceRow out = row(1.0, 0.05, 2.0);  // I < 0
    ASSERT_GT(in.I, 0.0);
    ASSERT_LT(out.I, 0.0);
    const auto rep = monitor_invariance(prm, {in, in, out, in, out}, 10.0, InvarianceCase::A1);
    EXPECT_EQ(rep.rows_checked, 5);
    EXPECT_EQ(rep.violating_rows, (std::vector<std::size_t>{2, 4}));
    EXPECT_THROW(monitor_invariance(prm, {out, in}, 10.0, InvarianceCase::A1), HypothesisError);
    EXPECT_THROW(monitor_invariance(prm, {in}, 1e-9, InvarianceCase::A1), HypothesisError);
    EXPECT_TRUE(monitor_invariance(prm, {out, out}, 10.0, InvarianceCase::A2).violating_rows.empty());
    EXPECT_EQ(parse_invariance_case("C2"), InvarianceCase::C2);
    EXPECT_THROW(parse_invariance_case("D"), ConfigError);
}

TEST(Boundedness, BudgetsMatchClosedForms) {
    const Context& ctx = line(127, 3.0);
    const double E0 = 0.3;
    const Params h2{1.0 / ctx.Lambda(), 1.0, 2.0, 3.0};
    const double b0 = 1.0 - 2.0 / ctx.lambda1();
    EXPECT_NEAR(boundedness_budget(h2, ctx, BoundednessCase::CubicH2, E0), std::sqrt(2 * E0) + std::sqrt(2 * E0 / b0), 1e-14);
    EXPECT_NEAR(boundedness_budget(h2, ctx, BoundednessCase::CubicH3, E0), std::sqrt(2 * E0) + std::sqrt(4 * E0 / b0), 1e-14);
    const Params h1{2.0 / ctx.Lambda(), 1.0, 0.0, 3.0};
    EXPECT_NEAR(boundedness_budget(h1, ctx, BoundednessCase::CubicH1, E0), std::sqrt(2 * E0) + std::sqrt(2 * E0), 1e-14);
    EXPECT_THROW(boundedness_budget(h2, ctx, BoundednessCase::CubicH1, E0), HypothesisError);
    EXPECT_THROW(boundedness_budget(h2, ctx, BoundednessCase::SuperlinearWell, E0), HypothesisError);
    EXPECT_THROW(boundedness_budget(h2, ctx, BoundednessCase::Sublinear, E0), HypothesisError);
}

TEST(Boundedness, SublinearTrajectoryStaysInsideBudget) {
    const Context& ctx = line(127, 2.0);
    const Params prm{0.05, 1.0, 2.0, 2.0};
    const Field u0 = 3.0 * ctx.psi1();
    const Trace tr = integrate(prm, ctx, u0, Field::Zero(u0.size()), sim(1e-3, 5.0, Scheme::Midpoint, 10));
    EXPECT_EQ(tr.termination, Termination::Horizon);
    const double K = boundedness_budget(prm, ctx, BoundednessCase::Sublinear, tr.rows.front().E);
    EXPECT_LE(trace_sup_norm(tr.rows), K);
}
