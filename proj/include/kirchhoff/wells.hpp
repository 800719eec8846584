#pragma once

#include "kirchhoff/common.hpp"
#include "kirchhoff/discretization.hpp"
#include "kirchhoff/functionals.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <thread>
#include <vector>

namespace kirchhoff {

struct SobolevEstimate {
    double q = 0.0;
    double S = 0.0;
    Field minimizer;  // normalized so that sum w |u|^q = 1
    int iterations = 0;
};

/// Minimizes g2(u) / (sum w |u|^q)^{2/q} by H1-preconditioned projected gradient with backtracking.
/// Stops once the quotient decreased by less than tol (relative) over the last 50 iterations.
inline SobolevEstimate estimate_sobolev_constant(const Grid& g, const ShiftedLaplacian& solver, const Field& start,
                                                 double q, double tol = 1e-14, int max_iter = 20000) {
    if (!(q > 1.0)) throw ConfigError("Sobolev exponent must be > 1");
    if (!(tol > 0.0)) throw ConfigError("Sobolev tolerance must be > 0");
    const auto normalize = [&](Field& u) { u /= std::pow(lq_power(g, u, q), 1.0 / q); };
    Field u = start;
    normalize(u);
    double Q = dirichlet_energy(g, u);
    std::vector<double> history{Q};
    Field rhs(u.size()), z, d, trial;
    double t = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        for (Eigen::Index i = 0; i < u.size(); ++i) rhs[i] = std::copysign(pow_abs(u[i], q - 1.0), u[i]);
        solver.solve(0.0, 1.0, rhs, z);
        d = Q * z - u;
        t = std::min(1.0, 2.0 * t);
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            trial = u + t * d;
            normalize(trial);
            const double Qt = dirichlet_energy(g, trial);
            if (std::isfinite(Qt) && Qt <= Q) {
                u.swap(trial);
                Q = Qt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!std::isfinite(Q) || !u.allFinite())
            throw NumericalError("Sobolev minimization produced non-finite iterate at iteration " + std::to_string(it));
        history.push_back(Q);
        if (!moved) break;
        if (history.size() > 50) {
            const double old = history[history.size() - 51];
            if (old - Q <= tol * Q) break;
        }
    }
    return {q, Q, u, it};
}

/// Discretization plus the exponent-dependent constants every module needs. Immutable once built.
class Context {
  public:
    Context(const DomainSpec& spec, double p, double eig_tol = 1e-10)
        : grid_(Grid::build(spec)), solver_(grid_), p_(p) {
        if (!(p > 1.0)) throw ConfigError("params.p must be > 1");
        eig_ = principal_eigenpair(grid_, solver_, eig_tol);
        const auto s4 = estimate_sobolev_constant(grid_, solver_, eig_.psi1, 4.0);
        phi_lambda_ = s4.minimizer;
        S4_ = s4.S;
        Lambda_ = S4_ * S4_;
        if (p == 3.0) {
            Sp1_ = S4_;
            phi_p1_ = phi_lambda_;
        } else {
            const auto sp = estimate_sobolev_constant(grid_, solver_, eig_.psi1, p + 1.0);
            Sp1_ = sp.S;
            phi_p1_ = sp.minimizer;
        }
        const int modes = 4;
        std::array<int, 3> j{1, 1, 1};
        const int m1 = std::min(modes, grid_.nodes(0));
        const int m2 = grid_.dim() > 1 ? std::min(modes, grid_.nodes(1)) : 1;
        const int m3 = grid_.dim() > 2 ? std::min(modes, grid_.nodes(2)) : 1;
        for (j[2] = 1; j[2] <= m3; ++j[2])
            for (j[1] = 1; j[1] <= m2; ++j[1])
                for (j[0] = 1; j[0] <= m1; ++j[0]) {
                    modes_.push_back(grid_.sine_mode(j));
                    mode_weight_.push_back(1.0 / double(j[0] * j[0] + (grid_.dim() > 1 ? j[1] * j[1] : 0) +
                                                        (grid_.dim() > 2 ? j[2] * j[2] : 0)));
                }
    }
    Context(const Context&) = delete;
    Context& operator=(const Context&) = delete;

    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] const ShiftedLaplacian& solver() const { return solver_; }
    [[nodiscard]] const Eigenpair& eigen() const { return eig_; }
    [[nodiscard]] double lambda1() const { return eig_.lambda1; }
    [[nodiscard]] const Field& psi1() const { return eig_.psi1; }
    [[nodiscard]] double p() const { return p_; }
    [[nodiscard]] double S4() const { return S4_; }
    [[nodiscard]] double Lambda() const { return Lambda_; }
    [[nodiscard]] const Field& phi_Lambda() const { return phi_lambda_; }
    [[nodiscard]] double Sp1() const { return Sp1_; }
    [[nodiscard]] const Field& phi_p1() const { return phi_p1_; }
    [[nodiscard]] const std::vector<Field>& low_modes() const { return modes_; }
    [[nodiscard]] const std::vector<double>& low_mode_weights() const { return mode_weight_; }

  private:
    Grid grid_;
    ShiftedLaplacian solver_;
    double p_;
    Eigenpair eig_;
    double S4_ = 0.0, Lambda_ = 0.0, Sp1_ = 0.0;
    Field phi_lambda_, phi_p1_;
    std::vector<Field> modes_;
    std::vector<double> mode_weight_;
};

inline Field normalize_gradient(const Grid& g, Field u) {
    const double g2 = dirichlet_energy(g, u);
    if (!(g2 > 0.0)) throw NumericalError("cannot normalize a field with zero gradient");
    return u / std::sqrt(g2);
}

struct RaySampling {
    int n_rays = 256;
    std::uint64_t seed = 1;
    int polish_iterations = 500;
    double noise_fraction = 0.5;  // share of rays that receive a white-noise component
    int workers = 1;
};

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Random low-mode sine mixture (coefficients decay like 1/|j|^2) with optional white noise.
inline Field random_smooth_field(const Context& ctx, std::mt19937_64& rng, double noise_fraction) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Field u = Field::Zero(ctx.grid().size());
    const auto& modes = ctx.low_modes();
    const auto& wts = ctx.low_mode_weights();
    for (std::size_t k = 0; k < modes.size(); ++k) u += normal(rng) * wts[k] * modes[k];
    if (unif(rng) < noise_fraction) {
        const double rms = std::sqrt(u.squaredNorm() / double(u.size()));
        const double eps = 0.3 * unif(rng) * rms;
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += eps * normal(rng);
    }
    return u;
}

/// Ray directions on the unit gradient sphere: psi1, phi_Lambda, then pre-seeded random mixtures.
/// Direction i depends only on (seed, i), so a longer sample extends a shorter one.
inline Field sample_direction(const Context& ctx, const RaySampling& s, std::int64_t i) {
    if (i == 0) return normalize_gradient(ctx.grid(), ctx.psi1());
    if (i == 1) return normalize_gradient(ctx.grid(), ctx.phi_Lambda());
    auto rng = make_rng(s.seed, 11, static_cast<std::uint64_t>(i));
    return normalize_gradient(ctx.grid(), random_smooth_field(ctx, rng, s.noise_fraction));
}

/// psi1-dominant directions, used where the target set hugs the principal mode.
inline Field sample_direction_near_psi1(const Context& ctx, const RaySampling& s, std::int64_t i) {
    if (i == 0) return normalize_gradient(ctx.grid(), ctx.psi1());
    auto rng = make_rng(s.seed, 23, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Field pert = normalize_gradient(ctx.grid(), random_smooth_field(ctx, rng, s.noise_fraction));
    const double eps = 0.5 * unif(rng) * unif(rng);
    return normalize_gradient(ctx.grid(), normalize_gradient(ctx.grid(), ctx.psi1()) + eps * pert);
}

/// Objective on directions: returns +inf outside its admissible set; fills the Euclidean gradient when asked.
using DirectionObjective = std::function<double(const Field& u, Field* grad)>;

struct PolishResult {
    double value = std::numeric_limits<double>::infinity();
    Field direction;
    int iterations = 0;
};

/// Projected gradient on the unit gradient sphere, H1-preconditioned, with Armijo backtracking.
/// Objectives must be 0-homogeneous.
inline PolishResult polish_direction(const Context& ctx, const DirectionObjective& F, const Field& start, int iterations) {
    const Grid& g = ctx.grid();
    PolishResult res;
    Field u = normalize_gradient(g, start);
    Field G(u.size()), d, trial;
    double f = F(u, &G);
    res.value = f;
    res.direction = u;
    if (!std::isfinite(f)) return res;
    double t = -1.0;
    int it = 0;
    for (; it < iterations; ++it) {
        ctx.solver().solve(0.0, 1.0, G / g.weight(), d);
        d -= (g.weight() * u.dot(g.laplacian() * d)) * u;  // tangent part in the gradient inner product
        const double gn2 = dirichlet_energy(g, d);
        if (!(gn2 > 1e-28 * std::max(1.0, f * f))) break;
        if (t < 0.0) t = 0.05 / std::sqrt(gn2);
        t *= 2.0;
        bool moved = false;
        for (int bt = 0; bt < 50; ++bt) {
            trial = u - t * d;
            const double tg = dirichlet_energy(g, trial);
            if (tg > 0.0) {
                trial /= std::sqrt(tg);
                const double ft = F(trial, nullptr);
                if (std::isfinite(ft) && ft <= f - 1e-4 * t * gn2) {
                    u.swap(trial);
                    f = ft;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!moved) break;
        F(u, &G);
    }
    res.value = f;
    res.direction = u;
    res.iterations = it;
    return res;
}

/// mu1^2 / (4 mu0): the sup of J along a ray in S, or its stationary value along a ray in L-.
inline DirectionObjective cubic_ray_objective(const Context& ctx, const Params& prm, bool want_L_minus) {
    return [&ctx, prm, want_L_minus](const Field& u, Field* grad) {
        const Grid& g = ctx.grid();
        const Norms n = norms(g, u, 3.0);
        const double mu0 = n.l4 - prm.a * n.g2 * n.g2;
        const double mu1 = prm.b * n.g2 - prm.lambda * n.m2;
        const bool ok = want_L_minus ? (mu0 < 0.0 && mu1 < 0.0) : (mu0 > 0.0 && mu1 > 0.0);
        if (!ok) return std::numeric_limits<double>::infinity();
        const double F = mu1 * mu1 / (4.0 * mu0);
        if (grad) {
            const double w = g.weight();
            const Field Au = w * (g.laplacian() * u);
            const Field dmu1 = 2.0 * (prm.b * Au - prm.lambda * w * u);
            const Field dmu0 = 4.0 * w * u.array().cube().matrix() - 4.0 * prm.a * n.g2 * Au;
            *grad = (mu1 / (2.0 * mu0)) * dmu1 - (mu1 * mu1 / (4.0 * mu0 * mu0)) * dmu0;
        }
        return F;
    };
}

/// sup_tau J(tau u) = J(tau_u u) for p > 3; gradient by the envelope theorem.
inline DirectionObjective superlinear_ray_objective(const Context& ctx, const Params& prm) {
    return [&ctx, prm](const Field& u, Field* grad) {
        const Grid& g = ctx.grid();
        const Norms n = norms(g, u, prm.p);
        const FiberMap f = fiber_map(prm, n);
        if (!f.tau_u.has()) return std::numeric_limits<double>::infinity();
        const double t = *f.tau_u;
        if (grad) {
            const double w = g.weight();
            const Field Au = w * (g.laplacian() * u);
            Field nl(u.size());
            for (Eigen::Index i = 0; i < u.size(); ++i) nl[i] = std::copysign(pow_abs(u[i], prm.p), u[i]);
            const double tp = std::pow(t, prm.p);
            *grad = t * ((prm.a * t * t * n.g2 + prm.b) * t * Au - prm.lambda * w * t * u - w * tp * nl);
        }
        return *f.stationary;
    };
}

struct RayMinimum {
    double raw = std::numeric_limits<double>::infinity();  // minimum over the sample alone
    std::int64_t raw_index = -1;
    double value = std::numeric_limits<double>::infinity();  // after polishing
    Field direction;
    int admissible = 0;
    int evaluated = 0;
};

/// Evaluates F over directions 0..n-1 (optionally in parallel), reduces in index order, then polishes.
inline RayMinimum minimize_over_rays(const Context& ctx, const DirectionObjective& F, const RaySampling& s,
                                     const std::function<Field(std::int64_t)>& direction,
                                     const std::vector<Field>& extra_starts = {}) {
    const std::int64_t n = std::max<std::int64_t>(s.n_rays, 1);
    std::vector<double> vals(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    const auto work = [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) vals[static_cast<std::size_t>(i)] = F(direction(i), nullptr);
    };
    const int workers = std::max(1, std::min<int>(s.workers, static_cast<int>(n)));
    if (workers == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w * chunk, std::min(n, (w + 1) * chunk));
        for (auto& th : pool) th.join();
    }
    RayMinimum out;
    out.evaluated = static_cast<int>(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = vals[static_cast<std::size_t>(i)];
        if (std::isfinite(v)) ++out.admissible;
        if (v < out.raw) {
            out.raw = v;
            out.raw_index = i;
        }
    }
    std::vector<Field> starts;
    if (out.raw_index >= 0) starts.push_back(direction(out.raw_index));
    for (const auto& e : extra_starts)
        if (std::isfinite(F(normalize_gradient(ctx.grid(), e), nullptr))) starts.push_back(e);
    out.value = out.raw;
    if (out.raw_index >= 0) out.direction = direction(out.raw_index);
    for (const auto& st : starts) {
        const auto pr = polish_direction(ctx, F, st, s.polish_iterations);
        if (pr.value < out.value) {
            out.value = pr.value;
            out.direction = pr.direction;
        }
    }
    return out;
}

struct WellDepths {
    Maybe<double> d3;
    Maybe<std::pair<double, double>> d3_bracket;
    bool d3_in_bracket = false;
    Maybe<double> dp;
    Maybe<double> dp_lower;
    Maybe<double> d3_plus;
    Maybe<double> d3_minus;
    Maybe<double> delta_estimate;
    double raw_minimum = std::numeric_limits<double>::infinity();
    int n_ray_samples = 0;
    Field argmin_direction;

    /// Depth that governs the stable/unstable sets in the current regime.
    [[nodiscard]] Maybe<double> active(double p) const { return is_cubic(p) ? d3 : dp; }
};

/// Relative slack for comparing the d3 estimate with its bracket; both ends use the same discrete Lambda.
inline constexpr double kBracketSlack = 1e-9;

inline WellDepths estimate_well_depth(const Params& prm, const Context& ctx, const RaySampling& s) {
    validate_params(prm);
    WellDepths wd;
    const auto none = [](const char* why) { return Maybe<double>::none(why); };
    wd.d3 = wd.dp = wd.dp_lower = wd.d3_plus = wd.d3_minus = wd.delta_estimate = none("not applicable");
    wd.d3_bracket = Maybe<std::pair<double, double>>::none("not applicable");
    const double l1 = ctx.lambda1();
    const auto dir = [&](std::int64_t i) { return sample_direction(ctx, s, i); };
    if (is_cubic(prm.p)) {
        if (!(prm.a * ctx.Lambda() < 1.0)) {
            wd.d3 = none("outside 0 < a < 1/Lambda regime");
            return wd;
        }
        if (!(prm.lambda < prm.b * l1)) {
            wd.d3 = none("requires lambda < b lambda1; see signed depths");
            return wd;
        }
        const auto c = effective_coeffs(prm, l1);
        const auto br = d3_bracket(prm, c, ctx.Lambda());
        wd.d3_bracket = Maybe<std::pair<double, double>>::of(br);
        const auto rm = minimize_over_rays(ctx, cubic_ray_objective(ctx, prm, false), s, dir, {ctx.phi_Lambda(), ctx.psi1()});
        wd.raw_minimum = rm.raw;
        wd.n_ray_samples = rm.evaluated;
        wd.argmin_direction = rm.direction;
        if (!std::isfinite(rm.value)) {
            wd.d3 = none("no sampled direction in S");
            return wd;
        }
        wd.d3 = Maybe<double>::of(rm.value);
        const double tol = kBracketSlack * br.second;
        wd.d3_in_bracket = rm.value >= br.first - tol && rm.value <= br.second + tol;
        return wd;
    }
    if (prm.p > 3.0) {
        if (!(prm.lambda <= prm.b * l1)) {
            wd.dp = none("requires lambda <= b lambda1");
            return wd;
        }
        const auto c = effective_coeffs(prm, l1);
        const auto r = radii(prm, c, ctx.Lambda(), ctx.Sp1(), 1.0);
        wd.dp_lower = Maybe<double>::of(dp_lower_bound(prm, *r.rho_p));
        const auto rm = minimize_over_rays(ctx, superlinear_ray_objective(ctx, prm), s, dir, {ctx.phi_p1(), ctx.psi1()});
        wd.raw_minimum = rm.raw;
        wd.n_ray_samples = rm.evaluated;
        wd.argmin_direction = rm.direction;
        if (!std::isfinite(rm.value)) {
            wd.dp = none("no sampled direction with a maximizer");
            return wd;
        }
        wd.dp = Maybe<double>::of(rm.value);
        return wd;
    }
    wd.d3 = wd.dp = none("no well depth for 1 < p < 3");
    return wd;
}

/// Condition under which N3 meets L- in the lambda > b lambda1 window: |psi1|_4^4 - a |grad psi1|^4 < 0.
inline double psi1_cubic_gap(const Params& prm, const Context& ctx) {
    const Norms n = norms(ctx.grid(), ctx.psi1(), 3.0);
    return n.l4 - prm.a * n.g2 * n.g2;
}

inline void require_psi1_condition(const Params& prm, const Context& ctx) {
    if (!(psi1_cubic_gap(prm, ctx) < 0.0))
        throw HypothesisError(
            "hypothesis |psi1|_4^4 - a |grad psi1|_2^4 < 0 fails for this a; (sufficient condition for the opposite "
            "sign: a < 1/(lambda1^2 |Omega|))");
}

struct SignedDepths {
    Maybe<double> d3_plus;
    Maybe<double> d3_minus;
    int plus_admissible = 0;
    int minus_admissible = 0;
    double max_sigma_minus = 0.0;  // largest sigma_u seen on L- directions (saturation diagnostic)
};

inline SignedDepths estimate_signed_depths(const Params& prm, const Context& ctx, const RaySampling& s) {
    validate_params(prm);
    if (!is_cubic(prm.p)) throw HypothesisError("signed depths require p = 3");
    if (!(prm.lambda > prm.b * ctx.lambda1())) throw HypothesisError("signed depths require lambda > b lambda1");
    if (!(prm.a * ctx.Lambda() < 1.0)) throw HypothesisError("signed depths require 0 < a < 1/Lambda");
    require_psi1_condition(prm, ctx);
    SignedDepths sd;
    const auto plus = minimize_over_rays(ctx, cubic_ray_objective(ctx, prm, false), s,
                                         [&](std::int64_t i) { return sample_direction(ctx, s, i); }, {ctx.phi_Lambda()});
    const auto near = [&](std::int64_t i) { return sample_direction_near_psi1(ctx, s, i); };
    const auto minus = minimize_over_rays(ctx, cubic_ray_objective(ctx, prm, true), s, near, {ctx.psi1()});
    sd.plus_admissible = plus.admissible;
    sd.minus_admissible = minus.admissible;
    sd.d3_plus = std::isfinite(plus.value) ? Maybe<double>::of(plus.value)
                                           : Maybe<double>::none("no sampled direction in S with b g2 > lambda m2");
    sd.d3_minus = std::isfinite(minus.value) ? Maybe<double>::of(minus.value)
                                             : Maybe<double>::none("no sampled direction in L-");
    for (std::int64_t i = 0; i < s.n_rays; ++i) {
        const auto f = fiber_map(prm, norms(ctx.grid(), near(i), 3.0));
        if (f.regime == FiberRegime::LMinus) sd.max_sigma_minus = std::max(sd.max_sigma_minus, *f.sigma);
    }
    return sd;
}

struct DeltaProbe {
    std::vector<double> gaps;       // lambda - b lambda1
    std::vector<double> penalties;  // minimized separation penalty per gap
    double floor = 1e-12;
    Maybe<double> delta_estimate;   // heuristic, an upper-bound style estimate
};

/// max(0, a g2^2 - l4)^2/g2^4 + max(0, b g2 - lambda m2)^2/g2^2; zero exactly on closure(S) meets closure(L-).
inline DirectionObjective separation_penalty(const Context& ctx, const Params& prm) {
    return [&ctx, prm](const Field& u, Field* grad) {
        const Grid& g = ctx.grid();
        const Norms n = norms(g, u, 3.0);
        const double r1 = (prm.a * n.g2 * n.g2 - n.l4) / (n.g2 * n.g2);
        const double r2 = (prm.b * n.g2 - prm.lambda * n.m2) / n.g2;
        const double p1 = std::max(0.0, r1), p2 = std::max(0.0, r2);
        if (grad) {
            // directions are on the unit sphere (g2 = 1) when gradients are requested
            const double w = g.weight();
            const Field Au = w * (g.laplacian() * u);
            const Field dr1 = 4.0 * n.l4 * Au - 4.0 * w * u.array().cube().matrix();
            const Field dr2 = 2.0 * prm.lambda * n.m2 * Au - 2.0 * prm.lambda * w * u;
            *grad = 2.0 * p1 * dr1 + 2.0 * p2 * dr2;
        }
        return p1 * p1 + p2 * p2;
    };
}

inline DeltaProbe probe_delta(const Params& prm, const Context& ctx, const std::vector<double>& gaps,
                              const RaySampling& s, double floor = 1e-12) {
    validate_params(prm);
    if (!is_cubic(prm.p)) throw HypothesisError("delta probe requires p = 3");
    if (!(prm.a * ctx.Lambda() < 1.0)) throw HypothesisError("delta probe requires 0 < a < 1/Lambda");
    require_psi1_condition(prm, ctx);
    DeltaProbe out;
    out.floor = floor;
    out.gaps = gaps;
    std::sort(out.gaps.begin(), out.gaps.end());
    const Field psi = normalize_gradient(ctx.grid(), ctx.psi1());
    const Field phi = normalize_gradient(ctx.grid(), ctx.phi_Lambda());
    std::vector<Field> blends;
    for (int k = 0; k <= 10; ++k) {
        const double th = 0.5 * std::numbers::pi * k / 10.0;
        blends.push_back(std::cos(th) * psi + std::sin(th) * phi);
    }
    double best = 0.0;
    bool separated = true;
    for (double gap : out.gaps) {
        Params q = prm;
        q.lambda = prm.b * ctx.lambda1() + gap;
        const auto F = separation_penalty(ctx, q);
        const auto rm = minimize_over_rays(ctx, F, s, [&](std::int64_t i) { return sample_direction(ctx, s, i); }, blends);
        out.penalties.push_back(rm.value);
        if (gap > 0.0 && separated) {
            if (rm.value > floor) best = gap; else separated = false;
        }
    }
    out.delta_estimate = best > 0.0 ? Maybe<double>::of(best) : Maybe<double>::none("no separated gap on the grid");
    return out;
}

struct Classification {
    bool origin = false;
    bool in_S = false;
    int L_sign = 0;
    int I_sign = 0;
    double J = 0.0;
    double I = 0.0;
    bool well_known = false;  // depth available for the regime
    bool in_W_plus = false;
    bool in_W_minus = false;
    // radius comparisons of |grad u|_2; absent radii compare false
    bool below_rho = false, above_rho = false, below_rhat = false, above_R = false;
};

inline int sign_with_tol(double x, double scale, double eps) {
    if (std::fabs(x) <= eps * scale) return 0;
    return x > 0.0 ? 1 : -1;
}

/// Set membership from a norm bundle; `depth` is d3, d3-, or d_p depending on the regime.
inline Classification classify(const Params& prm, const Norms& n, const Maybe<double>& depth, const Radii& r,
                               double eps = 1e-8) {
    Classification c;
    c.origin = !(n.g2 > 0.0);
    c.J = functional_J(prm, n);
    c.I = functional_I(prm, n);
    c.in_S = n.l4 - prm.a * n.g2 * n.g2 > 0.0;
    const double Lval = prm.b * n.g2 - prm.lambda * n.m2;
    c.L_sign = sign_with_tol(Lval, prm.b * n.g2 + std::fabs(prm.lambda) * n.m2, eps);
    c.I_sign = c.origin ? 0 : sign_with_tol(c.I, nehari_scale(prm, n), eps);
    c.well_known = depth.has();
    if (c.well_known) {
        const bool lower = c.J < *depth;
        c.in_W_plus = lower && (c.origin || c.I_sign > 0);
        c.in_W_minus = lower && !c.origin && c.I_sign < 0;
    }
    const double gn = std::sqrt(n.g2);
    const auto& rho = is_cubic(prm.p) ? r.rho3 : r.rho_p;
    const auto& R = is_cubic(prm.p) ? r.R3 : r.R_p;
    const auto& rhat = is_cubic(prm.p) ? r.rhat3 : r.rhat_p;
    if (rho.has()) {
        c.below_rho = gn < *rho;
        c.above_rho = gn > *rho;
    }
    if (rhat.has()) c.below_rhat = gn < *rhat;
    if (R.has()) c.above_R = gn > *R;
    return c;
}

inline Classification classify(const Params& prm, const Context& ctx, const Field& u, const Maybe<double>& depth,
                               const Radii& r, double eps = 1e-8) {
    return classify(prm, norms(ctx.grid(), u, prm.p), depth, r, eps);
}

}  // namespace kirchhoff
