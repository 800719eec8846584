#pragma once

#include "kirchhoff/common.hpp"
#include "kirchhoff/discretization.hpp"
#include "kirchhoff/functionals.hpp"
#include "kirchhoff/wells.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kirchhoff {

enum class SeedKind {
    Generic,                  // arbitrary (k v0, m v1), no certificate beyond finiteness
    SublinearNegE,            // 1 < p < 3, E(0) < 0
    P3WellInterior,           // p = 3, u0 in W3+, E(0) < d3
    P3Blowup,                 // p = 3, variants h1..h4
    P3SuperLambda,            // p = 3, b lambda1 < lambda, u0 in N3-, E(0) < d3-
    SuperlinearWellInterior,  // 3 < p < 5, u0 in Wp+, E(0) < dp
    SuperlinearBlowup,        // p > 3, variants a1..a4, b1, b2
};

struct SeedRecipe {
    SeedKind kind = SeedKind::Generic;
    std::string variant;  // h1..h4 or a1..a4, b1, b2
    double margin = 0.1;  // relative distance kept inside strict inequalities
    double tau = 1.1;     // default v0 = tau * (stationary scale) * phi
    double k = 1.0;       // generic recipe only
    double m = 0.0;       // generic recipe only
    std::optional<Field> v0, v1;

    [[nodiscard]] std::string name() const;
};

inline std::string SeedRecipe::name() const {
    switch (kind) {
        case SeedKind::Generic: return "generic";
        case SeedKind::SublinearNegE: return "sublinear_negE";
        case SeedKind::P3WellInterior: return "p3_well_interior";
        case SeedKind::P3Blowup: return "p3_blowup:" + variant;
        case SeedKind::P3SuperLambda: return "p3_super_lambda";
        case SeedKind::SuperlinearWellInterior: return "superlinear_well_interior";
        case SeedKind::SuperlinearBlowup: return "superlinear_blowup:" + variant;
    }
    return "?";
}

inline SeedRecipe parse_recipe(const std::string& s) {
    SeedRecipe r;
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    r.variant = colon == std::string::npos ? "" : s.substr(colon + 1);
    const auto want_variant = [&](std::initializer_list<const char*> ok) {
        for (const char* v : ok)
            if (r.variant == v) return;
        throw ConfigError("recipe '" + s + "' has an unknown variant");
    };
    if (head == "generic") r.kind = SeedKind::Generic;
    else if (head == "sublinear_negE") r.kind = SeedKind::SublinearNegE;
    else if (head == "p3_well_interior") r.kind = SeedKind::P3WellInterior;
    else if (head == "p3_blowup") { r.kind = SeedKind::P3Blowup; want_variant({"h1", "h2", "h3", "h4"}); }
    else if (head == "p3_super_lambda") r.kind = SeedKind::P3SuperLambda;
    else if (head == "superlinear_well_interior") r.kind = SeedKind::SuperlinearWellInterior;
    else if (head == "superlinear_blowup") { r.kind = SeedKind::SuperlinearBlowup; want_variant({"a1", "a2", "a3", "a4", "b1", "b2"}); }
    else throw ConfigError("unknown seed recipe '" + s + "'");
    if ((r.kind != SeedKind::P3Blowup && r.kind != SeedKind::SuperlinearBlowup) && !r.variant.empty())
        throw ConfigError("recipe '" + head + "' takes no variant");
    return r;
}

/// One inequality of a certificate, evaluated from scratch.
struct Check {
    std::string name;
    double lhs = 0.0;
    std::string rel;  // "<", "<=", ">", ">=", "=="
    double rhs = 0.0;
    double tol = 0.0;  // absolute, used by "==" only
    bool holds = false;
};

inline Check make_check(std::string name, double lhs, const std::string& rel, double rhs, double tol = 0.0) {
    Check c{std::move(name), lhs, rel, rhs, tol, false};
    if (rel == "<") c.holds = lhs < rhs;
    else if (rel == "<=") c.holds = lhs <= rhs;
    else if (rel == ">") c.holds = lhs > rhs;
    else if (rel == ">=") c.holds = lhs >= rhs;
    else if (rel == "==") c.holds = std::fabs(lhs - rhs) <= tol;
    else throw ConfigError("bad relation " + rel);
    c.holds = c.holds && std::isfinite(lhs) && std::isfinite(rhs);
    return c;
}

/// Depth information the recipes may need; members absent when the regime does not define them.
struct SeedInputs {
    Maybe<double> d3 = Maybe<double>::none("not supplied");
    Maybe<double> dp = Maybe<double>::none("not supplied");
    Maybe<double> d3_minus = Maybe<double>::none("not supplied");
    Maybe<double> delta_estimate = Maybe<double>::none("not supplied");

    static SeedInputs from(const WellDepths& wd, const SignedDepths* sd = nullptr) {
        SeedInputs in;
        in.d3 = wd.d3;
        in.dp = wd.dp;
        in.delta_estimate = wd.delta_estimate;
        if (sd) in.d3_minus = sd->d3_minus;
        return in;
    }
};

struct SeedResult {
    SeedRecipe recipe;
    Field u0, u1;
    double k = 0.0, m = 0.0;
    double E_from_coefficients = 0.0;  // assembled from the scalar decomposition in (k, m)
    Maybe<double> largest_admissible_a = Maybe<double>::none("only computed for sublinear_negE");
    std::vector<Check> certificate;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw HypothesisError(what);
}

inline double need(const Maybe<double>& v, const char* name) {
    if (!v.has()) throw HypothesisError(std::string(name) + " unavailable: " + v.reason);
    return *v;
}

/// Largest k > 0 with f(k) = target for f(k) = -A k^{p+1} + B k^4 + C k^2; returns 0 if f < target on (0, inf).
inline double last_crossing(double A, double B, double C, double p, double target) {
    const auto f = [&](double k) { return -A * std::pow(k, p + 1.0) + B * k * k * k * k + C * k * k; };
    // beyond k_tail, f'(k)/k = -(p+1)A k^{p-1} + 4B k^2 + 2C stays negative
    const double q = (p + 1.0) * A;
    double k_tail = std::max(std::pow(8.0 * std::fabs(B) / q, 1.0 / (p - 3.0)), std::pow(4.0 * std::fabs(C) / q, 1.0 / (p - 1.0)));
    k_tail = std::max(1.01 * k_tail, 1e-300);
    double lo, hi;
    if (f(k_tail) >= target) {
        lo = k_tail;
        hi = 2.0 * k_tail;
        while (f(hi) >= target) {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        const int n = 20000;
        int found = -1;
        for (int i = n - 1; i >= 1; --i)
            if (f(k_tail * i / n) >= target) {
                found = i;
                break;
            }
        if (found < 0) return 0.0;
        lo = k_tail * found / n;
        hi = k_tail * (found + 1) / n;
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) >= target) lo = mid; else hi = mid;
    }
    // the side with f <= target, so strict inequalities downstream see the root itself
    return std::fabs(f(lo) - target) < std::fabs(f(hi) - target) ? lo : hi;
}

inline double l2_norm(const Grid& g, const Field& v) { return std::sqrt(g.weight() * v.squaredNorm()); }

}  // namespace detail

/// Left-hand side of the smallness condition on a for the sublinear negative-energy construction.
inline double sublinear_admissible_bound(const Params& prm, double c1) {
    const double p = prm.p;
    return std::pow((3.0 - p) / (c1 * (p + 1.0)), (3.0 - p) / (p + 1.0)) *
           std::pow((2.0 * p - 2.0) / (prm.a * (p + 1.0)), (p - 1.0) / (p + 1.0));
}

/// Bisection (in log a) for the largest a whose bound exceeds the Rayleigh-type ratio of v0.
inline double largest_admissible_a(Params prm, double c1, double ratio) {
    double lo = 1e-300, hi = 1e300;
    const auto ok = [&](double a) {
        prm.a = a;
        return sublinear_admissible_bound(prm, c1) > ratio;
    };
    if (!ok(lo)) return 0.0;
    for (int it = 0; it < 400; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (ok(mid)) lo = mid; else hi = mid;
        if (hi / lo - 1.0 < 1e-14) break;
    }
    return lo;
}

/// Recomputes every inequality of the recipe from (u0, u1); the result never depends on the emission path.
inline std::vector<Check> certificate_checks(const SeedRecipe& r, const Params& prm, const Context& ctx,
                                             const SeedInputs& in, const Field& u0, const Field& u1) {
    const Grid& g = ctx.grid();
    std::vector<Check> out;
    const Norms n = norms(g, u0, prm.p);
    const double ut2 = g.weight() * u1.squaredNorm();
    const double J = functional_J(prm, n);
    const double I = functional_I(prm, n);
    const double E = 0.5 * ut2 + J;
    const double inner = g.weight() * u0.dot(u1);
    const double l1 = ctx.lambda1();
    const auto c = effective_coeffs(prm, l1);
    const double gn = std::sqrt(n.g2);
    const auto add = [&](std::string name, double lhs, const char* rel, double rhs, double tol = 0.0) {
        out.push_back(make_check(std::move(name), lhs, rel, rhs, tol));
    };
    add("u0 finite", u0.allFinite() ? 0.0 : 1.0, "==", 0.0);
    add("u1 finite", u1.allFinite() ? 0.0 : 1.0, "==", 0.0);
    const double e_tol = 1e-10;  // equality targets such as E(0) = 0
    switch (r.kind) {
        case SeedKind::Generic: break;
        case SeedKind::SublinearNegE:
            add("1 < p", prm.p, ">", 1.0);
            add("p < 3", prm.p, "<", 3.0);
            add("|grad u0|_2", gn, ">", 0.0);
            add("E(0)", E, "<", 0.0);
            break;
        case SeedKind::P3WellInterior: {
            const double d3 = detail::need(in.d3, "d3");
            const auto rr = radii(prm, c, ctx.Lambda(), ctx.Sp1(), d3);
            add("a Lambda", prm.a * ctx.Lambda(), "<", 1.0);
            add("lambda", prm.lambda, "<", prm.b * l1);
            add("|grad u0|_2", gn, ">", 0.0);
            add("|grad u0|_2 vs rhat3", gn, "<=", detail::need(rr.rhat3, "rhat3"));
            add("I(u0)", I, ">", 0.0);
            add("J(u0)", J, "<", d3);
            add("E(0)", E, "<", d3);
            break;
        }
        case SeedKind::P3Blowup: {
            add("p", prm.p, "==", 3.0);
            add("a Lambda", prm.a * ctx.Lambda(), "<", 1.0);
            add("lambda", prm.lambda, "<", prm.b * l1);
            add("|grad u0|_2", gn, ">", 0.0);
            // u0 in N3 or N3-: I <= 0, which (with L+) forces u0 into S
            add("I(u0)", I, "<=", 0.0);
            if (r.variant == "h1") {
                add("E(0)", E, "<", 0.0);
            } else if (r.variant == "h2") {
                add("E(0)", E, "==", 0.0, e_tol);
                add("int u0 u1", inner, ">", 0.0);
            } else if (r.variant == "h3") {
                const double d3 = detail::need(in.d3, "d3");
                add("E(0) lower", E, ">", 0.0);
                add("E(0) upper", E, "<", d3);
                add("I(u0) (W3-)", I, "<", 0.0);
                add("J(u0) (W3-)", J, "<", d3);
            } else if (r.variant == "h4") {
                const double d3 = detail::need(in.d3, "d3");
                add("E(0)", E, ">=", d3);
                add("int u0 u1", inner, ">", 0.0);
                add("|u0|_2^2", n.m2, ">", 4.0 * E / (c.b0 * l1));
            }
            break;
        }
        case SeedKind::P3SuperLambda: {
            const double dm = detail::need(in.d3_minus, "d3-");
            const double delta = detail::need(in.delta_estimate, "delta estimate");
            add("p", prm.p, "==", 3.0);
            add("a Lambda", prm.a * ctx.Lambda(), "<", 1.0);
            add("lambda lower", prm.lambda, ">", prm.b * l1);
            add("lambda upper", prm.lambda, "<", prm.b * l1 + delta);
            add("psi1 gap", psi1_cubic_gap(prm, ctx), "<", 0.0);
            add("d3-", dm, "<", 0.0);
            add("I(u0) (N3-)", I, "<", 0.0);
            add("E(0)", E, "<", dm);
            break;
        }
        case SeedKind::SuperlinearWellInterior: {
            const double dp = detail::need(in.dp, "dp");
            const auto rr = radii(prm, c, ctx.Lambda(), ctx.Sp1(), dp);
            add("p lower", prm.p, ">", 3.0);
            add("p upper", prm.p, "<", 5.0);
            add("lambda", prm.lambda, "<=", prm.b * l1);
            add("|grad u0|_2", gn, ">", 0.0);
            add("|grad u0|_2 vs rhat_p", gn, "<=", detail::need(rr.rhat_p, "rhat_p"));
            add("I(u0)", I, ">", 0.0);
            add("J(u0)", J, "<", dp);
            add("E(0)", E, "<", dp);
            break;
        }
        case SeedKind::SuperlinearBlowup: {
            add("p", prm.p, ">", 3.0);
            const bool case_b = r.variant == "b1" || r.variant == "b2";
            if (case_b) add("lambda", prm.lambda, ">", prm.b * l1);
            else add("lambda", prm.lambda, "<=", prm.b * l1);
            if (r.variant == "a1") {
                add("E(0)", E, "<", 0.0);
            } else if (r.variant == "a2") {
                add("E(0)", E, "==", 0.0, e_tol);
                add("int u0 u1", inner, ">", 0.0);
            } else if (r.variant == "a3") {
                const double dp = detail::need(in.dp, "dp");
                add("p upper", prm.p, "<", 5.0);
                add("E(0) lower", E, ">", 0.0);
                add("E(0) upper", E, "<", dp);
                add("int u0 u1", inner, ">", 0.0);
                add("I(u0) (Wp-)", I, "<", 0.0);
                add("J(u0) (Wp-)", J, "<", dp);
            } else if (r.variant == "a4") {
                add("E(0)", E, ">", 0.0);
                add("int u0 u1", inner, ">", 0.0);
                add("|u0|_2^4", n.m2 * n.m2, ">", 4.0 * (prm.p + 1.0) * E / ((prm.p - 3.0) * prm.a * l1 * l1));
            } else {
                const double gate = blowup_threshold_h0(prm, l1).energy_gate;
                if (r.variant == "b1") {
                    add("E(0)", E, "<", gate);
                } else {
                    add("E(0)", E, "==", gate, e_tol);
                    add("int u0 u1", inner, ">", 0.0);
                }
            }
            break;
        }
    }
    return out;
}

inline bool certificate_holds(const std::vector<Check>& cs) {
    for (const auto& c : cs)
        if (!c.holds) return false;
    return true;
}

/// Independent re-evaluation of an emitted seed.
inline bool verify_certificate(const SeedResult& res, const Params& prm, const Context& ctx, const SeedInputs& in) {
    if (res.u0.size() != ctx.grid().size() || res.u1.size() != ctx.grid().size()) return false;
    try {
        return certificate_holds(certificate_checks(res.recipe, prm, ctx, in, res.u0, res.u1));
    } catch (const std::exception&) {
        return false;
    }
}

namespace detail {

inline Field default_v1(const Grid& g, const Field& v0) { return v0 / l2_norm(g, v0); }

/// Scales w onto the far side of its Nehari crossing, tau * sigma_w * w; requires w in S with b g2 > lambda m2.
inline Field beyond_nehari(const Params& prm, const Grid& g, const Field& w, double tau) {
    const auto f = fiber_map(prm, norms(g, w, 3.0));
    require(f.regime == FiberRegime::InS,
            std::string("base field must lie in S with b|grad v|^2 > lambda|v|^2 (regime: ") + to_string(f.regime) + ")");
    return tau * *f.sigma * w;
}

}  // namespace detail

/// Builds (u0, u1) = (k v0, m v1) for the requested regime and attaches its certificate.
inline SeedResult seed(const SeedRecipe& r, const Params& prm, const Context& ctx, const SeedInputs& in) {
    validate_params(prm);
    if (prm.p != ctx.p()) throw ConfigError("seed: params.p differs from the constants context");
    if (!(r.margin > 0.0 && r.margin < 1.0)) throw ConfigError("seed.margin must be in (0, 1)");
    if (!(r.tau > 1.0)) throw ConfigError("seed.tau must be > 1");
    const Grid& g = ctx.grid();
    if (r.v0) g.check_field(*r.v0, "seed v0");
    if (r.v1) g.check_field(*r.v1, "seed v1");
    const double l1 = ctx.lambda1();
    const double keep = 1.0 - r.margin;  // fraction of an open interval used
    const double grow = 1.0 + r.margin;  // factor past a strict lower threshold
    SeedResult res;
    res.recipe = r;
    Field v0, v1;
    const auto finish_v1 = [&]() {
        v1 = r.v1 ? *r.v1 : detail::default_v1(g, v0);
        const double nv = detail::l2_norm(g, v1);
        detail::require(nv > 0.0, "v1 must be nonzero");
        v1 /= nv;
    };
    switch (r.kind) {
        case SeedKind::Generic: {
            v0 = r.v0 ? *r.v0 : ctx.psi1();
            v1 = r.v1 ? *r.v1 : ctx.psi1();
            res.k = r.k;
            res.m = r.m;
            break;
        }
        case SeedKind::SublinearNegE: {
            detail::require(prm.p < 3.0, "sublinear_negE requires 1 < p < 3");
            v0 = r.v0 ? *r.v0 : ctx.phi_p1();
            finish_v1();
            const Norms n = norms(g, v0, prm.p);
            detail::require(n.g2 > 0.0, "v0 must have nonzero gradient");
            const double c1 = effective_coeffs(prm, l1).c1;
            const double ratio = n.g2 / std::pow(n.lp1, 2.0 / (prm.p + 1.0));
            res.largest_admissible_a = Maybe<double>::of(largest_admissible_a(prm, c1, ratio));
            if (!(sublinear_admissible_bound(prm, c1) > ratio))
                throw HypothesisError("smallness condition on a fails for v0; largest admissible a found by bisection: " +
                                      std::to_string(*res.largest_admissible_a));
            const double p = prm.p;
            res.k = std::pow(2.0 * (p - 1.0) * n.lp1 / (prm.a * (p + 1.0) * n.g2 * n.g2), 1.0 / (3.0 - p));
            const double Jk = functional_J(prm, n.scaled(res.k, p));
            detail::require(Jk < 0.0, "J(k0 v0) is not negative");
            res.m = keep * std::sqrt(-Jk);
            break;
        }
        case SeedKind::P3WellInterior:
        case SeedKind::SuperlinearWellInterior: {
            const bool cubic = r.kind == SeedKind::P3WellInterior;
            detail::require(cubic ? is_cubic(prm.p) : (prm.p > 3.0 && prm.p < 5.0),
                            cubic ? "p3_well_interior requires p = 3" : "superlinear_well_interior requires 3 < p < 5");
            const double d = cubic ? detail::need(in.d3, "d3") : detail::need(in.dp, "dp");
            const auto rr = radii(prm, effective_coeffs(prm, l1), ctx.Lambda(), ctx.Sp1(), d);
            const double rhat = cubic ? detail::need(rr.rhat3, "rhat3") : detail::need(rr.rhat_p, "rhat_p");
            v0 = r.v0 ? *r.v0 : ctx.psi1();
            finish_v1();
            const double g2 = dirichlet_energy(g, v0);
            detail::require(g2 > 0.0, "v0 must have nonzero gradient");
            res.k = keep * rhat / std::sqrt(g2);
            const double Jk = functional_J(prm, norms(g, res.k * v0, prm.p));
            detail::require(Jk < d, "J(u0) is not below the depth");
            res.m = std::sqrt(keep * (d - Jk));
            break;
        }
        case SeedKind::P3Blowup: {
            detail::require(is_cubic(prm.p), "p3_blowup requires p = 3");
            detail::require(prm.a * ctx.Lambda() < 1.0, "p3_blowup requires 0 < a < 1/Lambda");
            detail::require(prm.lambda < prm.b * l1, "p3_blowup requires lambda < b lambda1");
            v0 = detail::beyond_nehari(prm, g, r.v0 ? *r.v0 : ctx.phi_Lambda(), r.tau);
            finish_v1();
            const Norms n = norms(g, v0, 3.0);
            const double mu0 = n.l4 - prm.a * n.g2 * n.g2;
            const double mu1 = prm.b * n.g2 - prm.lambda * n.m2;
            detail::require(mu0 > 0.0 && mu1 >= 0.0, "v0 must satisfy mu0 > 0 and mu1 >= 0");
            const double kbar2 = (mu1 + std::sqrt(mu1 * mu1 + 2.0 * mu0)) / mu0;  // root of mu0 k^4 - 2 mu1 k^2 = 2
            if (r.variant == "h1") {
                res.k = std::sqrt(grow * kbar2);
                res.m = 1.0;
            } else if (r.variant == "h2") {
                res.k = std::sqrt(kbar2);
                res.m = 1.0;
            } else {
                const double d3 = detail::need(in.d3, "d3");
                const double disc = mu1 * mu1 - 4.0 * mu0 * d3;
                detail::require(disc >= 0.0, "d3 exceeds the ray maximum of v0");
                const double K = (mu1 + std::sqrt(disc)) / mu0;
                const double upper = 2.0 * mu1 / mu0;
                const auto Jof = [&](double k2) { return -0.25 * mu0 * k2 * k2 + 0.5 * mu1 * k2; };
                if (r.variant == "h3") {
                    const double k2 = std::min(grow * K, 0.5 * (K + upper));
                    res.k = std::sqrt(k2);
                    res.m = std::sqrt(keep * (d3 - Jof(k2)));
                } else {
                    const double V0 = n.m2;
                    const double b0 = effective_coeffs(prm, l1).b0;
                    const double k2 = grow * std::max(K, 4.0 * d3 / (b0 * l1 * V0));
                    const double base = 0.5 * mu0 * k2 * k2 - mu1 * k2;
                    const double lo = base + 2.0 * d3, hi = base + 0.5 * b0 * l1 * V0 * k2;
                    res.k = std::sqrt(k2);
                    res.m = std::sqrt(lo + 0.5 * (hi - lo));
                }
            }
            break;
        }
        case SeedKind::P3SuperLambda: {
            detail::require(is_cubic(prm.p), "p3_super_lambda requires p = 3");
            detail::require(prm.a * ctx.Lambda() < 1.0,
                            "p3_super_lambda requires a < 1/A~ (A~ = Lambda on the grid), i.e. a Lambda < 1");
            detail::require(prm.lambda > prm.b * l1, "p3_super_lambda requires lambda > b lambda1");
            const double delta = detail::need(in.delta_estimate, "delta estimate");
            detail::require(prm.lambda < prm.b * l1 + delta, "lambda outside the estimated (b lambda1, b lambda1 + delta) window");
            require_psi1_condition(prm, ctx);
            const double dm = detail::need(in.d3_minus, "d3-");
            detail::require(dm < 0.0, "d3- must be negative");
            // v0 on N3 with b g2 > lambda m2
            v0 = detail::beyond_nehari(prm, g, r.v0 ? *r.v0 : ctx.phi_Lambda(), 1.0);
            finish_v1();
            const Norms n = norms(g, v0, 3.0);
            const double s0 = n.l4 - prm.a * n.g2 * n.g2;
            const double k2 = grow * (1.0 + std::sqrt(1.0 - 4.0 * dm / s0));
            res.k = std::sqrt(k2);
            const double Jk = -(k2 * k2 - 2.0 * k2) * s0 / 4.0;
            res.m = std::sqrt(keep * (dm - Jk));
            break;
        }
        case SeedKind::SuperlinearBlowup: {
            detail::require(prm.p > 3.0, "superlinear_blowup requires p > 3");
            const bool case_b = r.variant == "b1" || r.variant == "b2";
            detail::require(case_b ? prm.lambda > prm.b * l1 : prm.lambda <= prm.b * l1,
                            case_b ? "variants b1/b2 require lambda > b lambda1" : "variants a1..a4 require lambda <= b lambda1");
            Field w = r.v0 ? *r.v0 : ctx.phi_p1();
            if (!r.v0) {
                const auto f = fiber_map(prm, norms(g, w, prm.p));
                if (f.tau_u.has()) w *= r.tau * *f.tau_u;
            }
            v0 = w;
            finish_v1();
            const Norms n = norms(g, v0, prm.p);
            detail::require(n.lp1 > 0.0, "v0 must have nonzero L^{p+1} norm");
            const double p = prm.p;
            const double A = n.lp1 / (p + 1.0), B = 0.25 * prm.a * n.g2 * n.g2, C = 0.5 * (prm.b * n.g2 - prm.lambda * n.m2);
            const auto phi = [&](double k) { return -A * std::pow(k, p + 1.0) + B * k * k * k * k + C * k * k; };
            if (r.variant == "a1" || r.variant == "a2") {
                const double k = detail::last_crossing(A, B, C, p, -0.5);
                res.k = r.variant == "a1" ? grow * k : k;
                res.m = 1.0;
            } else if (r.variant == "a3") {
                detail::require(p < 5.0, "variant a3 requires 3 < p < 5");
                const double dp = detail::need(in.dp, "dp");
                const auto rr = radii(prm, effective_coeffs(prm, l1), ctx.Lambda(), ctx.Sp1(), dp);
                const double khat = detail::last_crossing(A, B, C, p, dp);
                const double K = detail::need(rr.R_p, "R_p") / std::sqrt(n.g2);
                res.k = grow * std::max(khat, K);
                const double Jk = phi(res.k);
                const double lo = std::max(-2.0 * Jk, 0.0);
                res.m = std::sqrt(lo + 0.5 * (2.0 * dp - 2.0 * Jk - lo));
            } else if (r.variant == "a4") {
                const double D = (p - 3.0) * prm.a * l1 * l1 * n.m2 * n.m2 / (4.0 * (p + 1.0));
                res.k = grow * detail::last_crossing(A, B - D, C, p, 0.0);
                const double Jk = phi(res.k);
                const double k4 = std::pow(res.k, 4.0);
                res.m = std::sqrt(-2.0 * Jk + 0.5 * (2.0 * D * k4));
            } else {
                const double h0 = blowup_threshold_h0(prm, l1).h0;
                const double level = -0.5 - h0 / (2.0 * (p + 1.0));
                const double k = detail::last_crossing(A, B, C, p, level);
                res.k = r.variant == "b1" ? grow * k : k;
                res.m = 1.0;
            }
            break;
        }
    }
    res.u0 = res.k * v0;
    res.u1 = res.m * v1;
    // zero-energy targets: rounding may leave E(0) at +1e-13, which would exclude the run from the
    // E(0) <= 0 results; past the Nehari crossing J falls with k, so step k outward until E(0) <= 0
    if (r.variant == "h2" || r.variant == "a2") {
        for (int i = 0; i < 64 && total_energy(prm, g, res.u0, res.u1) > 0.0; ++i) {
            res.k *= 1.0 + 1e-14;
            res.u0 = res.k * v0;
        }
    }
    {
        // scalar assembly of E(0) from the (k, m) decomposition, used as a coherence check
        const Norms n = norms(g, v0, prm.p);
        const double k2 = res.k * res.k;
        res.E_from_coefficients = 0.5 * res.m * res.m * g.weight() * v1.squaredNorm() + 0.25 * prm.a * k2 * k2 * n.g2 * n.g2 +
                                  0.5 * k2 * (prm.b * n.g2 - prm.lambda * n.m2) - pow_abs(res.k, prm.p + 1.0) * n.lp1 / (prm.p + 1.0);
    }
    res.certificate = certificate_checks(r, prm, ctx, in, res.u0, res.u1);
    if (!certificate_holds(res.certificate)) {
        std::string failed;
        for (const auto& c : res.certificate)
            if (!c.holds) failed += (failed.empty() ? "" : ", ") + c.name;
        throw NumericalError("seed " + r.name() + " failed its own certificate: " + failed);
    }
    return res;
}

}  // namespace kirchhoff
