#pragma once

#include "kirchhoff/common.hpp"
#include "kirchhoff/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kirchhoff {

struct EffectiveCoeffs {
    double b0 = 0.0;
    double c1 = 0.0;
};

inline EffectiveCoeffs effective_coeffs(const Params& prm, double lambda1) {
    if (!(lambda1 > 0.0)) throw ConfigError("effective_coeffs: lambda1 must be > 0");
    const double shifted = prm.b - prm.lambda / lambda1;
    if (prm.lambda >= 0.0) return {shifted, prm.b};
    return {prm.b, shifted};
}

inline double functional_J(const Params& prm, const Norms& n) {
    return 0.25 * prm.a * n.g2 * n.g2 + 0.5 * prm.b * n.g2 - 0.5 * prm.lambda * n.m2 - n.lp1 / (prm.p + 1.0);
}

inline double functional_I(const Params& prm, const Norms& n) {
    return prm.a * n.g2 * n.g2 + prm.b * n.g2 - prm.lambda * n.m2 - n.lp1;
}

/// Right-hand side of the splitting J = a(1/4-q)g2^2 + b(1/2-q)g2 - lambda(1/2-q)m2 + q I, q = 1/(p+1).
inline double functional_J_split(const Params& prm, const Norms& n) {
    const double q = 1.0 / (prm.p + 1.0);
    return prm.a * (0.25 - q) * n.g2 * n.g2 + prm.b * (0.5 - q) * n.g2 - prm.lambda * (0.5 - q) * n.m2 +
           q * functional_I(prm, n);
}

/// Scale used by the Nehari membership test |I| <= eps * scale.
inline double nehari_scale(const Params& prm, const Norms& n) { return prm.a * n.g2 * n.g2 + n.lp1; }

inline double total_energy(const Params& prm, const Norms& n, double ut_l2sq) {
    return 0.5 * ut_l2sq + functional_J(prm, n);
}

inline double total_energy(const Params& prm, const Grid& g, const Field& u, const Field& v) {
    g.check_field(u, "u");
    g.check_field(v, "v");
    return total_energy(prm, norms(g, u, prm.p), g.weight() * v.squaredNorm());
}

inline double functional_J(const Params& prm, const Grid& g, const Field& u) {
    return functional_J(prm, norms(g, u, prm.p));
}

inline double functional_I(const Params& prm, const Grid& g, const Field& u) {
    return functional_I(prm, norms(g, u, prm.p));
}

enum class FiberRegime {
    Degenerate,         // g2 = 0
    InS,                // p = 3, l4 - a g2^2 > 0 and b g2 - lambda m2 > 0
    LMinus,             // p = 3, both negative
    NoStationaryPoint,  // p = 3, mixed or vanishing signs
    Superlinear,        // p > 3
    Sublinear,          // 1 < p < 3
};

inline const char* to_string(FiberRegime r) {
    switch (r) {
        case FiberRegime::Degenerate: return "degenerate";
        case FiberRegime::InS: return "in_S";
        case FiberRegime::LMinus: return "L_minus";
        case FiberRegime::NoStationaryPoint: return "no_stationary_point";
        case FiberRegime::Superlinear: return "superlinear";
        case FiberRegime::Sublinear: return "sublinear";
    }
    return "?";
}

/// K_u(tau) = J(tau u) expressed through the norms of u.
struct FiberMap {
    Params prm;
    Norms n;
    FiberRegime regime = FiberRegime::Degenerate;
    Maybe<double> sigma;       // p = 3 stationary point
    Maybe<double> tau0;        // p > 3, unique zero of the derivative of h_p
    Maybe<double> tau_u;       // p > 3, maximizer of K_u past tau0
    Maybe<double> stationary;  // K_u at sigma or tau_u

    [[nodiscard]] double mu0() const { return n.l4 - prm.a * n.g2 * n.g2; }
    [[nodiscard]] double mu1() const { return prm.b * n.g2 - prm.lambda * n.m2; }

    [[nodiscard]] double K(double t) const {
        const double t2 = t * t;
        return 0.25 * prm.a * t2 * t2 * n.g2 * n.g2 + 0.5 * t2 * mu1() - pow_abs(t, prm.p + 1.0) * n.lp1 / (prm.p + 1.0);
    }
    [[nodiscard]] double dK(double t) const {
        return prm.a * t * t * t * n.g2 * n.g2 + t * mu1() - std::pow(t, prm.p) * n.lp1;
    }
    [[nodiscard]] double d2K(double t) const {
        return 3.0 * prm.a * t * t * n.g2 * n.g2 + mu1() - prm.p * std::pow(t, prm.p - 1.0) * n.lp1;
    }
    /// h_p(tau) = K'(tau) / tau.
    [[nodiscard]] double h(double t) const {
        return prm.a * t * t * n.g2 * n.g2 + mu1() - std::pow(t, prm.p - 1.0) * n.lp1;
    }
};

inline FiberMap fiber_map(const Params& prm, const Norms& n) {
    FiberMap f;
    f.prm = prm;
    f.n = n;
    if (!(n.g2 > 0.0)) {
        f.regime = FiberRegime::Degenerate;
        f.sigma = f.tau0 = f.tau_u = f.stationary = Maybe<double>::none("degenerate field (zero gradient)");
        return f;
    }
    if (is_cubic(prm.p)) {
        f.tau0 = f.tau_u = Maybe<double>::none("p = 3 uses sigma");
        const double mu0 = f.mu0(), mu1 = f.mu1();
        if (mu0 > 0.0 && mu1 > 0.0) {
            f.regime = FiberRegime::InS;
        } else if (mu0 < 0.0 && mu1 < 0.0) {
            f.regime = FiberRegime::LMinus;
        } else {
            f.regime = FiberRegime::NoStationaryPoint;
            f.sigma = f.stationary = Maybe<double>::none("no stationary point");
            return f;
        }
        f.sigma = Maybe<double>::of(std::sqrt(mu1 / mu0));
        f.stationary = Maybe<double>::of(mu1 * mu1 / (4.0 * mu0));
        return f;
    }
    f.sigma = Maybe<double>::none("sigma is defined for p = 3 only");
    if (prm.p < 3.0) {
        f.regime = FiberRegime::Sublinear;
        f.tau0 = f.tau_u = f.stationary = Maybe<double>::none("defined for p > 3 only");
        return f;
    }
    f.regime = FiberRegime::Superlinear;
    if (!(n.lp1 > 0.0)) {
        f.tau0 = f.tau_u = f.stationary = Maybe<double>::none("lp1 = 0");
        return f;
    }
    const double t0 = std::pow(2.0 * prm.a * n.g2 * n.g2 / ((prm.p - 1.0) * n.lp1), 1.0 / (prm.p - 3.0));
    f.tau0 = Maybe<double>::of(t0);
    if (!(f.h(t0) > 0.0)) {
        f.tau_u = f.stationary = Maybe<double>::none("h_p(tau0) <= 0: no root past tau0");
        return f;
    }
    // Exactly one sign change of h_p past tau0; bisect to full precision.
    double lo = t0, hi = 2.0 * t0;
    int guard = 0;
    while (f.h(hi) >= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 2000) throw NumericalError("tau_u bracket search failed");
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f.h(mid) > 0.0) lo = mid; else hi = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    const double tu = 0.5 * (lo + hi);
    f.tau_u = Maybe<double>::of(tu);
    f.stationary = Maybe<double>::of(f.K(tu));
    return f;
}

struct Radii {
    Maybe<double> rho3, R3, rhat3;
    Maybe<double> rho_p, R_p, rhat_p;
};

/// Radii of the cubic and superlinear families; d is d3 for p = 3 and d_p for p > 3.
inline Radii radii(const Params& prm, const EffectiveCoeffs& c, double Lambda, double Sp1, double d) {
    Radii r;
    const auto none = [](const char* why) { return Maybe<double>::none(why); };
    r.rho3 = r.R3 = r.rhat3 = none("p = 3 family not requested");
    r.rho_p = r.R_p = r.rhat_p = none("p > 3 family not requested");
    const auto rhat = [&](double rho) {
        const double s = (-c.c1 + std::sqrt(c.c1 * c.c1 + 4.0 * prm.a * d)) / prm.a;
        return std::min(rho, std::sqrt(s));
    };
    if (is_cubic(prm.p)) {
        if (!(prm.a * Lambda < 1.0)) {
            r.rho3 = r.R3 = r.rhat3 = none("outside 0 < a < 1/Lambda regime");
            return r;
        }
        if (!(c.b0 > 0.0)) {
            r.rho3 = r.R3 = r.rhat3 = none("b0 <= 0 (lambda >= b lambda1)");
            return r;
        }
        r.rho3 = Maybe<double>::of(std::sqrt(c.b0 * Lambda / (1.0 - prm.a * Lambda)));
        if (!(d > 0.0)) {
            r.R3 = r.rhat3 = none("well depth must be > 0");
            return r;
        }
        r.R3 = Maybe<double>::of(2.0 * std::sqrt(d / c.b0));
        r.rhat3 = Maybe<double>::of(rhat(*r.rho3));
        return r;
    }
    if (prm.p > 3.0) {
        r.rho_p = Maybe<double>::of(std::pow(std::pow(Sp1, 0.5 * (prm.p + 1.0)) * prm.a, 1.0 / (prm.p - 3.0)));
        if (!(d > 0.0)) {
            r.R_p = r.rhat_p = none("well depth must be > 0");
            return r;
        }
        r.R_p = Maybe<double>::of(std::pow(4.0 * (prm.p + 1.0) * d / ((prm.p - 3.0) * prm.a), 0.25));
        r.rhat_p = Maybe<double>::of(rhat(*r.rho_p));
        return r;
    }
    r.rho3 = r.R3 = r.rhat3 = r.rho_p = r.R_p = r.rhat_p = none("no radii for 1 < p < 3");
    return r;
}

struct BlowupThreshold {
    double h0 = 0.0;
    double energy_gate = 0.0;  // -h0 / (2p + 2)
};

inline BlowupThreshold blowup_threshold_h0(const Params& prm, double lambda1) {
    if (!(prm.p > 3.0)) throw HypothesisError("h0 requires p > 3");
    const double gap = prm.lambda - prm.b * lambda1;
    const double h0 = (prm.p - 1.0) * (prm.p - 1.0) * gap * gap / (2.0 * (prm.p - 3.0) * prm.a * lambda1 * lambda1);
    return {h0, -h0 / (2.0 * prm.p + 2.0)};
}

/// Lower and upper ends of the d3 bracket, Lambda b0^2 / (4(1 - a Lambda)) and the c1 analogue.
inline std::pair<double, double> d3_bracket(const Params& prm, const EffectiveCoeffs& c, double Lambda) {
    const double den = 4.0 * (1.0 - prm.a * Lambda);
    return {Lambda * c.b0 * c.b0 / den, Lambda * c.c1 * c.c1 / den};
}

inline double dp_lower_bound(const Params& prm, double rho_p) {
    const double r2 = rho_p * rho_p;
    return (0.25 - 1.0 / (prm.p + 1.0)) * prm.a * r2 * r2;
}

}  // namespace kirchhoff
