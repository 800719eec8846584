#pragma once

#include "kirchhoff/common.hpp"
#include "kirchhoff/discretization.hpp"
#include "kirchhoff/functionals.hpp"
#include "kirchhoff/wells.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

namespace kirchhoff {

enum class Scheme { Midpoint, StormerVerlet };

inline const char* to_string(Scheme s) { return s == Scheme::Midpoint ? "implicit-midpoint" : "stormer-verlet"; }

inline Scheme parse_scheme(const std::string& s) {
    if (s == "implicit-midpoint" || s == "midpoint") return Scheme::Midpoint;
    if (s == "stormer-verlet" || s == "verlet") return Scheme::StormerVerlet;
    throw ConfigError("unknown scheme '" + s + "' (expected implicit-midpoint or stormer-verlet)");
}

struct SimConfig {
    double dt = 1e-3;
    double horizon = 10.0;
    Scheme scheme = Scheme::Midpoint;
    int record_every = 10;
    double blowup_gradnorm_factor = 1e6;
    double dt_floor_ratio = 1e-12;  // dt_floor = ratio * dt0
    double stage_tol = 1e-12;
    int stage_max_iter = 50;
    double energy_drift_tol = 1e-8;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("sim.dt must be > 0");
        if (!(horizon > 0.0)) throw ConfigError("sim.horizon must be > 0");
        if (record_every < 1) throw ConfigError("sim.record_every must be >= 1");
        if (!(blowup_gradnorm_factor > 1.0)) throw ConfigError("sim.blowup_gradnorm_factor must be > 1");
        if (!(dt_floor_ratio > 0.0 && dt_floor_ratio < 1.0)) throw ConfigError("sim.dt_floor_ratio must be in (0, 1)");
    }
};

struct TraceRow {
    double t = 0.0;
    double ut_l2sq = 0.0;
    double grad_l2sq = 0.0;
    double M = 0.0;
    double lp1 = 0.0;
    double J = 0.0;
    double I = 0.0;
    double E = 0.0;
    double Mprime = 0.0;
};

enum class Termination { Horizon, GradientBlowup, StepCollapse, NonFinite };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::Horizon: return "horizon";
        case Termination::GradientBlowup: return "gradient_norm";
        case Termination::StepCollapse: return "step_collapse";
        case Termination::NonFinite: return "non_finite";
    }
    return "?";
}

struct Trace {
    std::vector<TraceRow> rows;
    Termination termination = Termination::Horizon;
    long steps = 0;
    long dt_halvings = 0;
    long stage_iterations = 0;
    double min_dt = 0.0;
    double max_rel_energy_drift = 0.0;  // max |E - E0| / max(1, |E0|)
    Field u, v;                          // terminal state
};

inline TraceRow make_row(const Params& prm, const Grid& g, double t, const Field& u, const Field& v) {
    const Norms n = norms(g, u, prm.p);
    TraceRow r;
    r.t = t;
    r.ut_l2sq = g.weight() * v.squaredNorm();
    r.grad_l2sq = n.g2;
    r.M = n.m2;
    r.lp1 = n.lp1;
    r.J = functional_J(prm, n);
    r.I = functional_I(prm, n);
    r.E = 0.5 * r.ut_l2sq + r.J;
    r.Mprime = 2.0 * g.weight() * u.dot(v);
    return r;
}

/// One-step maps for the semi-discrete flow  v' = -(a g2 + b) L u + lambda u + |u|^{p-1} u,  u' = v.
class Stepper {
  public:
    Stepper(const Params& prm, const Grid& g, const ShiftedLaplacian& solver, const SimConfig& cfg)
        : prm_(prm), g_(g), solver_(solver), cfg_(cfg) {}

    /// Midpoint discrete-gradient step; returns false when the stage iteration fails to converge.
    bool midpoint(Field& u, Field& v, double dt, int& iters) {
        const double w = g_.weight();
        const double p = prm_.p;
        Lu_.noalias() = g_.laplacian() * u;
        const double g2 = w * u.dot(Lu_);
        delta_ = 0.5 * dt * v;
        const double q = 0.25 * dt * dt;
        const double alpha = 1.0 - q * prm_.lambda;
        if (!(alpha > 0.0)) return false;
        up_.resize(u.size());
        rhs_.resize(u.size());
        for (iters = 1; iters <= cfg_.stage_max_iter; ++iters) {
            up_ = u + 2.0 * delta_;
            const double g2p = w * up_.dot(g_.laplacian() * up_);
            const double abar = 0.5 * prm_.a * (g2 + g2p) + prm_.b;
            for (Eigen::Index i = 0; i < u.size(); ++i)
                rhs_[i] = 0.5 * dt * v[i] + q * (-abar * Lu_[i] + prm_.lambda * u[i] + divided_difference(u[i], up_[i], p));
            solver_.solve(alpha, q * abar, rhs_, next_);
            if (!next_.allFinite()) return false;
            const double diff = (next_ - delta_).cwiseAbs().maxCoeff();
            const double scale = next_.cwiseAbs().maxCoeff();
            delta_.swap(next_);
            if (diff <= cfg_.stage_tol * scale) {
                u += 2.0 * delta_;
                v = (4.0 / dt) * delta_ - v;
                return true;
            }
        }
        return false;
    }

    void verlet(Field& u, Field& v, double dt) {
        if (acc_.size() != u.size()) acceleration(u, acc_);
        v += 0.5 * dt * acc_;
        u += dt * v;
        acceleration(u, acc_);
        v += 0.5 * dt * acc_;
    }

    void reset_cache() { acc_.resize(0); }

    void acceleration(const Field& u, Field& out) {
        Lu_.noalias() = g_.laplacian() * u;
        const double g2 = g_.weight() * u.dot(Lu_);
        const double coef = prm_.a * g2 + prm_.b;
        out.resize(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i)
            out[i] = -coef * Lu_[i] + prm_.lambda * u[i] + std::copysign(pow_abs(u[i], prm_.p), u[i]);
    }

    /// (f(y) - f(x)) / (y - x) for f(s) = |s|^{p+1}/(p+1), exact factorization when p = 3.
    static double divided_difference(double x, double y, double p) {
        if (p == 3.0) return 0.25 * (x + y) * (x * x + y * y);
        const double d = y - x;
        const double scale = std::max(std::fabs(x), std::fabs(y));
        if (std::fabs(d) > 1e-7 * scale) return (pow_abs(y, p + 1.0) - pow_abs(x, p + 1.0)) / ((p + 1.0) * d);
        const double m = 0.5 * (x + y);
        return std::copysign(pow_abs(m, p), m);
    }

  private:
    Params prm_;
    const Grid& g_;
    const ShiftedLaplacian& solver_;
    SimConfig cfg_;
    Field Lu_, delta_, next_, up_, rhs_, acc_;
};

/// Integrates from (u0, u1) until the horizon or a detector fires.
inline Trace integrate(const Params& prm, const Grid& g, const ShiftedLaplacian& solver, const Field& u0,
                       const Field& u1, const SimConfig& cfg) {
    validate_params(prm);
    cfg.validate();
    g.check_field(u0, "u0");
    g.check_field(u1, "u1");
    if (!u0.allFinite() || !u1.allFinite()) throw ConfigError("initial data must be finite");
    Trace tr;
    Field u = u0, v = u1;
    Stepper st(prm, g, solver, cfg);
    const double dt0 = cfg.dt;
    const double floor = cfg.dt_floor_ratio * dt0;
    double dt = dt0;
    double t = 0.0;
    tr.min_dt = dt;
    tr.rows.push_back(make_row(prm, g, t, u, v));
    const double E0 = tr.rows.front().E;
    const double limit = cfg.blowup_gradnorm_factor * std::max(1.0, std::sqrt(tr.rows.front().grad_l2sq));
    Field us, vs;
    int easy = 0;
    bool last_recorded = true;
    const double tend = cfg.horizon;
    while (t < tend - 1e-6 * dt0) {
        const double h = tend - t < dt * (1.0 + 1e-6) ? tend - t : dt;
        if (cfg.scheme == Scheme::Midpoint) {
            us = u;
            vs = v;
            int it = 0;
            const bool ok = st.midpoint(us, vs, h, it);
            tr.stage_iterations += it;
            if (!ok || !us.allFinite() || !vs.allFinite()) {
                dt *= 0.5;
                ++tr.dt_halvings;
                easy = 0;
                if (dt < floor) {
                    tr.termination = Termination::StepCollapse;
                    break;
                }
                tr.min_dt = std::min(tr.min_dt, dt);
                continue;
            }
            u.swap(us);
            v.swap(vs);
            easy = it <= 10 ? easy + 1 : 0;
            if (easy >= 50 && dt < dt0) {
                dt = std::min(dt0, 2.0 * dt);
                easy = 0;
            }
        } else {
            st.verlet(u, v, h);
        }
        t += h;
        ++tr.steps;
        last_recorded = false;
        if (!u.allFinite() || !v.allFinite()) {
            tr.termination = Termination::NonFinite;
            break;
        }
        const TraceRow row = make_row(prm, g, t, u, v);
        if (!std::isfinite(row.E) || !std::isfinite(row.grad_l2sq)) {
            tr.termination = Termination::NonFinite;
            tr.rows.push_back(row);
            last_recorded = true;
            break;
        }
        tr.max_rel_energy_drift = std::max(tr.max_rel_energy_drift, std::fabs(row.E - E0) / std::max(1.0, std::fabs(E0)));
        const bool fired = std::sqrt(row.grad_l2sq) > limit;
        if (fired || tr.steps % cfg.record_every == 0) {
            tr.rows.push_back(row);
            last_recorded = true;
        }
        if (fired) {
            tr.termination = Termination::GradientBlowup;
            break;
        }
    }
    if (!last_recorded && u.allFinite() && v.allFinite()) tr.rows.push_back(make_row(prm, g, t, u, v));
    tr.u = u;
    tr.v = v;
    return tr;
}

inline Trace integrate(const Params& prm, const Context& ctx, const Field& u0, const Field& u1, const SimConfig& cfg) {
    return integrate(prm, ctx.grid(), ctx.solver(), u0, u1, cfg);
}

enum class Outcome { Bounded, Blowup, Inconclusive };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Bounded: return "bounded";
        case Outcome::Blowup: return "blowup";
        case Outcome::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct BlowupReport {
    Outcome outcome = Outcome::Inconclusive;
    std::optional<double> T1_estimate;
    double alpha = 0.5;
    double t0 = 0.0;
    int samples = 0;
    int concavity_violations = 0;
    std::string threshold_hit = "none";
    std::string note;
};

inline double blowup_alpha(double p) { return (p - 1.0) / 4.0; }

/// Concavity diagnostics of M^{-alpha} from the first row with M' > 0, and the zero-crossing extrapolation.
inline BlowupReport analyze_blowup(const std::vector<TraceRow>& rows, Termination term, double p) {
    BlowupReport rep;
    rep.alpha = blowup_alpha(p);
    rep.threshold_hit = term == Termination::Horizon ? "none" : to_string(term);
    if (rows.size() < 10) throw ConfigError("analyze_blowup needs at least 10 trace rows");
    if (term == Termination::Horizon) {
        rep.outcome = Outcome::Bounded;
        return rep;
    }
    if (term == Termination::NonFinite) {
        rep.outcome = Outcome::Inconclusive;
        rep.note = "non-finite state before any detector fired";
        return rep;
    }
    std::size_t start = 0;
    while (start < rows.size() && !(rows[start].Mprime > 0.0)) ++start;
    rep.t0 = start < rows.size() ? rows[start].t : rows.back().t;
    std::vector<double> t, y;
    for (std::size_t i = start; i < rows.size(); ++i) {
        if (i > start && !(rows[i].t > t.back())) continue;
        t.push_back(rows[i].t);
        y.push_back(std::pow(rows[i].M, -rep.alpha));
    }
    if (t.size() < 3) {
        rep.outcome = Outcome::Inconclusive;
        rep.note = "fewer than 3 rows after M' turned positive";
        return rep;
    }
    std::vector<double> slope(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) slope[i] = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
    rep.samples = static_cast<int>(slope.size());
    for (std::size_t i = 0; i < slope.size(); ++i) {
        bool bad = !(slope[i] < 0.0);
        if (i + 1 < slope.size()) bad = bad || slope[i + 1] > slope[i] + 1e-8 * (std::fabs(slope[i]) + std::fabs(slope[i + 1]));
        if (bad) ++rep.concavity_violations;
    }
    const std::size_t n = t.size();
    const double s = slope[n - 2];
    if (s < 0.0) rep.T1_estimate = t[n - 1] - y[n - 1] / s;
    rep.outcome = rep.concavity_violations <= 0.05 * rep.samples && rep.T1_estimate ? Outcome::Blowup : Outcome::Inconclusive;
    if (rep.outcome == Outcome::Inconclusive) rep.note = "concavity violations above 5% of samples";
    if (rep.outcome != Outcome::Blowup) rep.T1_estimate.reset();
    return rep;
}

inline BlowupReport analyze_blowup(const Trace& tr, double p) { return analyze_blowup(tr.rows, tr.termination, p); }

enum class InvarianceCase { A1, A2, B, C1, C2 };

inline const char* to_string(InvarianceCase c) {
    switch (c) {
        case InvarianceCase::A1: return "A1";
        case InvarianceCase::A2: return "A2";
        case InvarianceCase::B: return "B";
        case InvarianceCase::C1: return "C1";
        case InvarianceCase::C2: return "C2";
    }
    return "?";
}

inline InvarianceCase parse_invariance_case(const std::string& s) {
    if (s == "A1") return InvarianceCase::A1;
    if (s == "A2") return InvarianceCase::A2;
    if (s == "B") return InvarianceCase::B;
    if (s == "C1") return InvarianceCase::C1;
    if (s == "C2") return InvarianceCase::C2;
    throw ConfigError("unknown invariance case '" + s + "'");
}

struct InvarianceReport {
    InvarianceCase which = InvarianceCase::A1;
    double depth = 0.0;
    int rows_checked = 0;
    std::vector<std::size_t> violating_rows;
};

inline Norms row_norms(const TraceRow& r, double p) {
    Norms n;
    n.g2 = r.grad_l2sq;
    n.m2 = r.M;
    n.lp1 = r.lp1;
    n.l4 = is_cubic(p) ? r.lp1 : std::numeric_limits<double>::quiet_NaN();
    return n;
}

/// True when the row lies in the set the case says is invariant.
inline bool row_in_case_set(const Params& prm, const TraceRow& r, InvarianceCase c, double depth, double eps) {
    const Norms n = row_norms(r, prm.p);
    const double J = functional_J(prm, n);
    const double I = functional_I(prm, n);
    const bool origin = !(n.g2 > 0.0);
    const int s = origin ? 0 : sign_with_tol(I, nehari_scale(prm, n), eps);
    if (!(J < depth)) return false;
    switch (c) {
        case InvarianceCase::A1:
        case InvarianceCase::C1: return origin || s > 0;
        case InvarianceCase::A2:
        case InvarianceCase::B:
        case InvarianceCase::C2: return s < 0;
    }
    return false;
}

/// Checks the regime hypotheses of the case and that the initial row lies in its set.
inline void check_invariance_hypotheses(const Params& prm, const Context& ctx, const WellDepths& wd,
                                        const SignedDepths* sd, InvarianceCase c, const TraceRow& first) {
    const double l1 = ctx.lambda1();
    switch (c) {
        case InvarianceCase::A1:
        case InvarianceCase::A2:
            if (!is_cubic(prm.p)) throw HypothesisError("case A requires p = 3");
            if (!(prm.a * ctx.Lambda() < 1.0)) throw HypothesisError("case A requires 0 < a < 1/Lambda");
            if (!(prm.lambda < prm.b * l1)) throw HypothesisError("case A requires lambda < b lambda1");
            if (!wd.d3.has()) throw HypothesisError("case A requires d3: " + wd.d3.reason);
            if (!(first.E < *wd.d3)) throw HypothesisError("case A requires E(0) < d3");
            break;
        case InvarianceCase::B:
            if (!is_cubic(prm.p)) throw HypothesisError("case B requires p = 3");
            if (!(prm.lambda > prm.b * l1)) throw HypothesisError("case B requires lambda > b lambda1");
            if (!wd.delta_estimate.has() || !(prm.lambda < prm.b * l1 + *wd.delta_estimate))
                throw HypothesisError("case B requires lambda inside the estimated (b lambda1, b lambda1 + delta) window");
            if (!sd || !sd->d3_minus.has()) throw HypothesisError("case B requires d3-");
            if (!(first.E < *sd->d3_minus)) throw HypothesisError("case B requires E(0) < d3-");
            break;
        case InvarianceCase::C1:
        case InvarianceCase::C2:
            if (!(prm.p > 3.0)) throw HypothesisError("case C requires p > 3");
            if (!(prm.lambda <= prm.b * l1)) throw HypothesisError("case C requires lambda <= b lambda1");
            if (!wd.dp.has()) throw HypothesisError("case C requires d_p: " + wd.dp.reason);
            if (!(first.E < *wd.dp)) throw HypothesisError("case C requires E(0) < d_p");
            break;
    }
}

inline InvarianceReport monitor_invariance(const Params& prm, const std::vector<TraceRow>& rows, double depth,
                                           InvarianceCase c, double eps = 1e-8) {
    if (rows.empty()) throw ConfigError("monitor_invariance needs a non-empty trace");
    if (!row_in_case_set(prm, rows.front(), c, depth, eps))
        throw HypothesisError(std::string("initial data not in the invariant set of case ") + to_string(c));
    InvarianceReport rep;
    rep.which = c;
    rep.depth = depth;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ++rep.rows_checked;
        if (!row_in_case_set(prm, rows[i], c, depth, eps)) rep.violating_rows.push_back(i);
    }
    return rep;
}

enum class VacuumRegime { Sublinear, Cubic, Superlinear };

struct VacuumReport {
    VacuumRegime regime = VacuumRegime::Cubic;
    double radius = 0.0;  // on |grad u|_2
    double slack = 0.95;
    double min_grad = 0.0;
    std::vector<std::size_t> violating_rows;
    [[nodiscard]] bool ok() const { return violating_rows.empty(); }
};

/// Lower bound on |grad u|_2 along trajectories with E(0) <= 0 and nonzero initial gradient.
inline std::pair<VacuumRegime, double> vacuum_radius(const Params& prm, const Context& ctx) {
    const auto c = effective_coeffs(prm, ctx.lambda1());
    const double Sq = std::pow(ctx.Sp1(), 0.5 * (prm.p + 1.0));
    if (prm.p < 3.0) {
        if (!(c.b0 > 0.0)) throw HypothesisError("vacuum radius (1 < p < 3) requires lambda < b lambda1");
        return {VacuumRegime::Sublinear, std::pow(0.5 * (prm.p + 1.0) * c.b0 * Sq, 1.0 / (prm.p - 1.0))};
    }
    if (is_cubic(prm.p)) {
        if (!(prm.a * ctx.Lambda() < 1.0)) throw HypothesisError("vacuum radius (p = 3) requires 0 < a < 1/Lambda");
        if (!(c.b0 > 0.0)) throw HypothesisError("vacuum radius (p = 3) requires lambda < b lambda1");
        return {VacuumRegime::Cubic, std::sqrt(2.0 * c.b0 * ctx.Lambda() / (1.0 - prm.a * ctx.Lambda()))};
    }
    if (!(prm.lambda <= prm.b * ctx.lambda1())) throw HypothesisError("vacuum radius (p > 3) requires lambda <= b lambda1");
    return {VacuumRegime::Superlinear, std::pow(0.25 * (prm.p + 1.0) * prm.a * Sq, 1.0 / (prm.p - 3.0))};
}

inline VacuumReport check_vacuum(const std::vector<TraceRow>& rows, const Params& prm, const Context& ctx,
                                 double slack = 0.95) {
    if (rows.empty()) throw ConfigError("check_vacuum needs a non-empty trace");
    if (!(rows.front().E <= 0.0)) throw HypothesisError("vacuum check requires E(0) <= 0");
    if (!(rows.front().grad_l2sq > 0.0)) throw HypothesisError("vacuum check requires |grad u0| > 0");
    VacuumReport rep;
    std::tie(rep.regime, rep.radius) = vacuum_radius(prm, ctx);
    rep.slack = slack;
    rep.min_grad = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double gn = std::sqrt(rows[i].grad_l2sq);
        rep.min_grad = std::min(rep.min_grad, gn);
        if (gn < slack * rep.radius) rep.violating_rows.push_back(i);
    }
    return rep;
}

enum class BoundednessCase { Sublinear, CubicH1, CubicH2, CubicH3, SuperlinearWell };

inline const char* to_string(BoundednessCase c) {
    switch (c) {
        case BoundednessCase::Sublinear: return "sublinear";
        case BoundednessCase::CubicH1: return "cubic_H1";
        case BoundednessCase::CubicH2: return "cubic_H2";
        case BoundednessCase::CubicH3: return "cubic_H3";
        case BoundednessCase::SuperlinearWell: return "superlinear_well";
    }
    return "?";
}

/// Explicit bound K on |u_t|_2 + |grad u|_2 from the energy estimates of the bounded regimes.
inline double boundedness_budget(const Params& prm, const Context& ctx, BoundednessCase c, double E0) {
    const double l1 = ctx.lambda1();
    const double lhat = std::max(prm.lambda, 0.0);
    const auto coeffs = effective_coeffs(prm, l1);
    // bound on X + Y from X^2/2 + beta Y^2/2 <= B, reported as sqrt(2B) + sqrt(2B/beta)
    const auto pair_bound = [](double B, double beta) { return std::sqrt(2.0 * B) + std::sqrt(2.0 * B / beta); };
    switch (c) {
        case BoundednessCase::Sublinear: {
            if (!(prm.p > 1.0 && prm.p < 3.0)) throw HypothesisError("sublinear budget requires 1 < p < 3");
            const double Sq = std::pow(ctx.Sp1(), 0.5 * (prm.p + 1.0));
            const auto phi = [&](double s) {
                return 0.25 * prm.a * std::pow(s, 4.0) - lhat / (2.0 * l1) * s * s - std::pow(s, prm.p + 1.0) / ((prm.p + 1.0) * Sq);
            };
            // phi -> +inf; scan then refine by golden section
            double smax = 1.0;
            while (phi(smax) < 0.0 || phi(2.0 * smax) < phi(smax)) smax *= 2.0;
            double best_s = 0.0, best = 0.0;
            const int n = 4000;
            for (int i = 1; i <= n; ++i) {
                const double s = smax * i / n;
                if (phi(s) < best) {
                    best = phi(s);
                    best_s = s;
                }
            }
            double lo = std::max(0.0, best_s - smax / n), hi = best_s + smax / n;
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            for (int it = 0; it < 200; ++it) {
                const double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
                if (phi(x1) < phi(x2)) hi = x2; else lo = x1;
            }
            const double phi0 = std::min(best, phi(0.5 * (lo + hi)));
            return pair_bound(E0 - phi0, prm.b);
        }
        case BoundednessCase::CubicH1: {
            if (!is_cubic(prm.p) || !(prm.a * ctx.Lambda() > 1.0)) throw HypothesisError("H1 budget requires p = 3 and a > 1/Lambda");
            const double h1 = prm.lambda > 0.0 ? -prm.lambda * prm.lambda * ctx.Lambda() / (4.0 * l1 * l1 * (prm.a * ctx.Lambda() - 1.0)) : 0.0;
            return pair_bound(E0 - h1, prm.b);
        }
        case BoundednessCase::CubicH2: {
            if (!is_cubic(prm.p) || !(coeffs.b0 > 0.0)) throw HypothesisError("H2 budget requires p = 3 and lambda < b lambda1");
            return pair_bound(E0, coeffs.b0);
        }
        case BoundednessCase::CubicH3: {
            if (!is_cubic(prm.p) || !(coeffs.b0 > 0.0)) throw HypothesisError("H3 budget requires p = 3 and lambda < b lambda1");
            // |u_t|^2/2 + b0 |grad u|^2 / 4 <= E(0)
            return pair_bound(E0, 0.5 * coeffs.b0);
        }
        case BoundednessCase::SuperlinearWell: {
            if (!(prm.p > 3.0) || !(prm.lambda <= prm.b * l1)) throw HypothesisError("well budget requires p > 3 and lambda <= b lambda1");
            // J >= a(1/4 - 1/(p+1)) |grad u|^4 on the stable set and |u_t|^2/2 <= E(0) - J
            const double k = prm.a * (0.25 - 1.0 / (prm.p + 1.0));
            return std::sqrt(2.0 * E0) + std::pow(E0 / k, 0.25);
        }
    }
    return 0.0;
}

/// sup over rows of |u_t|_2 + |grad u|_2.
inline double trace_sup_norm(const std::vector<TraceRow>& rows) {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, std::sqrt(r.ut_l2sq) + std::sqrt(r.grad_l2sq));
    return m;
}

}  // namespace kirchhoff
