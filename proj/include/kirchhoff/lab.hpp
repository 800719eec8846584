#pragma once

// Run orchestration: INI configs, the discretize -> constants -> depths -> seed -> integrate -> analyze
// pipeline, persisted outputs, and Cartesian sweeps.

#include "kirchhoff/dynamics.hpp"
#include "kirchhoff/seeds.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace kirchhoff {

using nlohmann::json;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

inline constexpr const char* kSummarySchema = "kirchhoff-lab/summary/v1";

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------- config ----------

struct RunConfig {
    DomainSpec domain;
    Params params;
    // optional alternatives resolved against the discrete constants
    std::optional<double> a_Lambda;    // a = a_Lambda / Lambda
    std::optional<double> lambda_rel;  // lambda = lambda_rel * b * lambda1
    std::optional<double> lambda_gap;  // lambda = b * lambda1 + lambda_gap
    double eig_tol = 1e-10;
    SimConfig sim;
    std::string recipe = "generic";
    SeedRecipe tunables;
    std::string base = "default";  // default | random
    double perturbation = 0.5;
    std::string data_file;  // explicit initial data (two columns u0,u1) instead of a recipe
    RaySampling wells;
    std::vector<double> delta_gaps;
    double eps = 1e-8;
    std::vector<std::string> analyses;
    std::string invariance_case;
    std::string boundedness_case = "auto";
    std::uint64_t rng_seed = 1;
    std::string output_dir = "out";
    pt::ptree source;  // the parsed tree, kept so sweeps can override keys
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
    }
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
    return out;
}

namespace detail {

inline const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> k{
        {"domain", {"extents", "nodes", "eig_tol"}},
        {"params", {"a", "b", "lambda", "p", "a_Lambda", "lambda_rel", "lambda_gap"}},
        {"sim", {"dt", "horizon", "scheme", "record_every", "blowup_gradnorm_factor", "dt_floor_ratio", "stage_tol",
                 "stage_max_iter", "energy_drift_tol"}},
        {"seed", {"recipe", "base", "perturbation", "margin", "tau", "k", "m", "data_file"}},
        {"wells", {"n_rays", "polish_iterations", "noise_fraction", "workers", "delta_gaps", "eps"}},
        {"run", {"analyses", "invariance_case", "boundedness_case", "rng_seed", "output_dir"}},
    };
    return k;
}

}  // namespace detail

inline RunConfig config_from_tree(const pt::ptree& tree) {
    for (const auto& [sec, body] : tree) {
        const auto it = detail::known_keys().find(sec);
        if (it == detail::known_keys().end()) throw ConfigError("unknown config section [" + sec + "]");
        for (const auto& [key, _] : body)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError("unknown config key " + sec + "." + key);
    }
    const auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
        return std::nullopt;
    };
    const auto num = [&](const std::string& path, double& out) {
        if (auto v = get(path)) out = parse_double(path, *v);
    };
    const auto opt = [&](const std::string& path, std::optional<double>& out) {
        if (auto v = get(path)) out = parse_double(path, *v);
    };
    const auto integer = [&](const std::string& path, auto& out) {
        if (auto v = get(path)) {
            const double x = parse_double(path, *v);
            if (x != std::floor(x) || x < 0) throw ConfigError("config key " + path + " must be a non-negative integer");
            out = static_cast<std::remove_reference_t<decltype(out)>>(x);
        }
    };
    RunConfig c;
    c.source = tree;
    const auto ext = get("domain.extents");
    const auto nod = get("domain.nodes");
    if (!ext || !nod) throw ConfigError("config needs domain.extents and domain.nodes");
    c.domain.extents = parse_doubles("domain.extents", *ext);
    for (double x : parse_doubles("domain.nodes", *nod)) {
        if (x != std::floor(x)) throw ConfigError("domain.nodes must be integers");
        c.domain.nodes.push_back(static_cast<int>(x));
    }
    num("domain.eig_tol", c.eig_tol);
    num("params.a", c.params.a);
    num("params.b", c.params.b);
    num("params.lambda", c.params.lambda);
    num("params.p", c.params.p);
    opt("params.a_Lambda", c.a_Lambda);
    opt("params.lambda_rel", c.lambda_rel);
    opt("params.lambda_gap", c.lambda_gap);
    if (c.lambda_rel && c.lambda_gap) throw ConfigError("params.lambda_rel and params.lambda_gap are exclusive");
    if (c.a_Lambda && get("params.a")) throw ConfigError("params.a and params.a_Lambda are exclusive");
    if ((c.lambda_rel || c.lambda_gap) && get("params.lambda"))
        throw ConfigError("params.lambda is exclusive with lambda_rel / lambda_gap");
    num("sim.dt", c.sim.dt);
    num("sim.horizon", c.sim.horizon);
    if (auto v = get("sim.scheme")) c.sim.scheme = parse_scheme(*v);
    integer("sim.record_every", c.sim.record_every);
    num("sim.blowup_gradnorm_factor", c.sim.blowup_gradnorm_factor);
    num("sim.dt_floor_ratio", c.sim.dt_floor_ratio);
    num("sim.stage_tol", c.sim.stage_tol);
    integer("sim.stage_max_iter", c.sim.stage_max_iter);
    num("sim.energy_drift_tol", c.sim.energy_drift_tol);
    if (auto v = get("seed.recipe")) c.recipe = *v;
    if (auto v = get("seed.base")) c.base = *v;
    if (c.base != "default" && c.base != "random") throw ConfigError("seed.base must be default or random");
    num("seed.perturbation", c.perturbation);
    if (auto v = get("seed.data_file")) c.data_file = *v;
    c.tunables = parse_recipe(c.recipe);
    num("seed.margin", c.tunables.margin);
    num("seed.tau", c.tunables.tau);
    num("seed.k", c.tunables.k);
    num("seed.m", c.tunables.m);
    integer("wells.n_rays", c.wells.n_rays);
    integer("wells.polish_iterations", c.wells.polish_iterations);
    num("wells.noise_fraction", c.wells.noise_fraction);
    integer("wells.workers", c.wells.workers);
    if (auto v = get("wells.delta_gaps")) c.delta_gaps = parse_doubles("wells.delta_gaps", *v);
    num("wells.eps", c.eps);
    if (auto v = get("run.analyses")) c.analyses = split_list(*v);
    for (const auto& a : c.analyses)
        if (a != "invariance" && a != "blowup" && a != "vacuum" && a != "boundedness")
            throw ConfigError("unknown analysis '" + a + "'");
    if (auto v = get("run.invariance_case")) c.invariance_case = *v;
    if (auto v = get("run.boundedness_case")) c.boundedness_case = *v;
    integer("run.rng_seed", c.rng_seed);
    if (auto v = get("run.output_dir")) c.output_dir = *v;
    c.wells.seed = c.rng_seed;
    if (c.wells.n_rays < 2) throw ConfigError("wells.n_rays must be >= 2");
    if (c.wells.workers < 1) throw ConfigError("wells.workers must be >= 1");
    c.sim.validate();
    return c;
}

inline pt::ptree read_tree(const std::string& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return tree;
}

inline RunConfig load_config(const std::string& path) { return config_from_tree(read_tree(path)); }

// ---------- constants cache ----------

struct ContextKey {
    std::vector<double> extents;
    std::vector<int> nodes;
    double p;
    double eig_tol;
    auto operator<=>(const ContextKey&) const = default;
};

/// Discretization and constants shared across sweep rows; entries are immutable once built.
class ContextCache {
  public:
    explicit ContextCache(bool enabled = true) : enabled_(enabled) {}

    std::shared_ptr<const Context> get(const DomainSpec& d, double p, double eig_tol) {
        if (!enabled_) return std::make_shared<const Context>(d, p, eig_tol);
        const ContextKey key{d.extents, d.nodes, p, eig_tol};
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard lk(mu_);
            auto& s = slots_[key];
            if (!s) s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once, [&] { slot->ctx = std::make_shared<const Context>(d, p, eig_tol); });
        if (!slot->ctx) throw NumericalError("constants cache entry failed to build");
        return slot->ctx;
    }

  private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const Context> ctx;
    };
    bool enabled_;
    std::mutex mu_;
    std::map<ContextKey, std::shared_ptr<Slot>> slots_;
};

// ---------- pipeline ----------

inline Params resolve_params(const RunConfig& c, const Context& ctx) {
    Params p = c.params;
    if (c.a_Lambda) p.a = *c.a_Lambda / ctx.Lambda();
    if (c.lambda_rel) p.lambda = *c.lambda_rel * p.b * ctx.lambda1();
    if (c.lambda_gap) p.lambda = p.b * ctx.lambda1() + *c.lambda_gap;
    validate_params(p);
    return p;
}

inline std::vector<double> default_delta_gaps() {
    std::vector<double> g;
    for (int i = 1; i <= 25; ++i) g.push_back(0.004 * i);
    return g;
}

struct Depths {
    WellDepths wells;
    std::optional<SignedDepths> signed_depths;
    std::optional<DeltaProbe> probe;
    SeedInputs inputs;
};

inline bool needs_signed_depths(const RunConfig& c) {
    return c.tunables.kind == SeedKind::P3SuperLambda || c.invariance_case == "B";
}

inline Depths compute_depths(const RunConfig& c, const Params& prm, const Context& ctx) {
    Depths d;
    d.wells = estimate_well_depth(prm, ctx, c.wells);
    if (needs_signed_depths(c)) {
        if (!is_cubic(prm.p)) throw HypothesisError("signed depths need p = 3");
        if (!(prm.a * ctx.Lambda() < 1.0)) throw HypothesisError("signed depths need 0 < a < 1/Lambda");
        require_psi1_condition(prm, ctx);
        Params base = prm;
        d.probe = probe_delta(base, ctx, c.delta_gaps.empty() ? default_delta_gaps() : c.delta_gaps, c.wells);
        d.wells.delta_estimate = d.probe->delta_estimate;
        if (prm.lambda > prm.b * ctx.lambda1()) d.signed_depths = estimate_signed_depths(prm, ctx, c.wells);
    }
    d.inputs = SeedInputs::from(d.wells, d.signed_depths ? &*d.signed_depths : nullptr);
    return d;
}

/// Base fields for recipes; "random" perturbs the recipe's default direction with a seeded smooth field.
inline SeedRecipe with_base_fields(const RunConfig& c, const Params& prm, const Context& ctx) {
    SeedRecipe r = c.tunables;
    if (c.base != "random") return r;
    const Grid& g = ctx.grid();
    Field dir;
    switch (r.kind) {
        case SeedKind::SublinearNegE: dir = ctx.phi_p1(); break;
        case SeedKind::P3Blowup:
        case SeedKind::P3SuperLambda: dir = ctx.phi_Lambda(); break;
        case SeedKind::SuperlinearBlowup: dir = ctx.phi_p1(); break;
        default: dir = ctx.psi1(); break;
    }
    auto rng = make_rng(c.rng_seed, 101, 0);
    const Field pert = normalize_gradient(g, random_smooth_field(ctx, rng, 0.0));
    Field v0 = normalize_gradient(g, dir) + c.perturbation * pert;
    if (r.kind == SeedKind::Generic) v0 = normalize_gradient(g, v0);
    auto rng1 = make_rng(c.rng_seed, 102, 0);
    Field w = random_smooth_field(ctx, rng1, 0.0);
    w /= std::sqrt(g.weight() * w.squaredNorm());
    const Field along = v0 / std::sqrt(g.weight() * v0.squaredNorm());
    Field v1 = along + c.perturbation * w;
    if (g.weight() * v0.dot(v1) <= 0.0) v1 = along - c.perturbation * w;
    r.v0 = v0;
    r.v1 = v1;
    (void)prm;
    return r;
}

inline std::pair<Field, Field> read_initial_data(const std::string& path, const Grid& g) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open initial data file " + path);
    std::vector<double> a, b;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        const auto cols = split_list(line);
        if (cols.size() != 2) throw ConfigError("initial data rows need two columns u0,u1");
        a.push_back(parse_double("data_file", cols[0]));
        b.push_back(parse_double("data_file", cols[1]));
    }
    if (static_cast<Eigen::Index>(a.size()) != g.size()) throw ConfigError("initial data length does not match the grid");
    return {Eigen::Map<Field>(a.data(), a.size()), Eigen::Map<Field>(b.data(), b.size())};
}

struct Analyses {
    bool invariance = false, blowup = false, vacuum = false, boundedness = false;
};

inline Analyses requested(const RunConfig& c) {
    Analyses a;
    for (const auto& s : c.analyses) {
        if (s == "invariance") a.invariance = true;
        if (s == "blowup") a.blowup = true;
        if (s == "vacuum") a.vacuum = true;
        if (s == "boundedness") a.boundedness = true;
    }
    return a;
}

inline BoundednessCase pick_boundedness_case(const RunConfig& c, const Params& prm, const Context& ctx,
                                             const Depths& d, const Classification& cls, double E0) {
    if (c.boundedness_case != "auto") {
        for (auto k : {BoundednessCase::Sublinear, BoundednessCase::CubicH1, BoundednessCase::CubicH2,
                       BoundednessCase::CubicH3, BoundednessCase::SuperlinearWell})
            if (c.boundedness_case == to_string(k)) return k;
        throw ConfigError("unknown boundedness case '" + c.boundedness_case + "'");
    }
    const double aL = prm.a * ctx.Lambda();
    if (prm.p < 3.0) return BoundednessCase::Sublinear;
    if (is_cubic(prm.p)) {
        if (std::fabs(aL - 1.0) <= 1e-12) {
            if (!(prm.lambda < prm.b * ctx.lambda1())) throw HypothesisError("a = 1/Lambda bound requires lambda < b lambda1");
            return BoundednessCase::CubicH2;
        }
        if (aL > 1.0) return BoundednessCase::CubicH1;
        if (!d.wells.d3.has()) throw HypothesisError("boundedness for 0 < a < 1/Lambda needs d3: " + d.wells.d3.reason);
        if (!cls.in_W_plus) throw HypothesisError("boundedness for 0 < a < 1/Lambda requires u0 in W3+");
        if (!(E0 < *d.wells.d3)) throw HypothesisError("boundedness for 0 < a < 1/Lambda requires E(0) < d3");
        return BoundednessCase::CubicH3;
    }
    if (!(prm.p < 5.0)) throw HypothesisError("no boundedness result for p >= 5");
    if (!(prm.lambda <= prm.b * ctx.lambda1())) throw HypothesisError("boundedness for 3 < p < 5 requires lambda <= b lambda1");
    if (!d.wells.dp.has()) throw HypothesisError("boundedness for 3 < p < 5 needs dp: " + d.wells.dp.reason);
    if (!cls.in_W_plus) throw HypothesisError("boundedness for 3 < p < 5 requires u0 in Wp+");
    if (!(E0 < *d.wells.dp)) throw HypothesisError("boundedness for 3 < p < 5 requires E(0) < dp");
    return BoundednessCase::SuperlinearWell;
}

inline void check_blowup_regime(const Params& prm, const Context& ctx) {
    if (prm.p < 3.0) throw HypothesisError("blow-up analysis: no blow-up result for 1 < p < 3");
    if (is_cubic(prm.p) && !(prm.a * ctx.Lambda() < 1.0))
        throw HypothesisError("blow-up analysis for p = 3 requires 0 < a < 1/Lambda");
}

// ---------- JSON helpers ----------

inline json maybe_json(const Maybe<double>& m) { return m.has() ? json(*m) : json(nullptr); }

inline json constants_json(const Context& ctx) {
    return json{{"lambda1", ctx.lambda1()},
                {"lambda1_residual", ctx.eigen().residual},
                {"Lambda", ctx.Lambda()},
                {"S_4", ctx.S4()},
                {"S_p1", ctx.Sp1()},
                {"p", ctx.p()},
                {"nodes", ctx.grid().size()}};
}

inline json depths_json(const Params& prm, const Depths& d) {
    json j;
    j["d"] = maybe_json(d.wells.active(prm.p));
    j["d_reason"] = d.wells.active(prm.p).has() ? "" : d.wells.active(prm.p).reason;
    if (d.wells.d3_bracket.has())
        j["d_bracket"] = {d.wells.d3_bracket.value->first, d.wells.d3_bracket.value->second};
    else if (d.wells.dp_lower.has())
        j["d_bracket"] = {*d.wells.dp_lower, nullptr};
    else
        j["d_bracket"] = nullptr;
    j["d3_plus"] = d.signed_depths ? maybe_json(d.signed_depths->d3_plus) : json(nullptr);
    j["d3_minus"] = d.signed_depths ? maybe_json(d.signed_depths->d3_minus) : json(nullptr);
    j["delta_estimate"] = maybe_json(d.wells.delta_estimate);
    j["delta_estimate_is_heuristic"] = true;
    j["n_ray_samples"] = d.wells.n_ray_samples;
    return j;
}

inline json certificate_json(const std::vector<Check>& cs) {
    json a = json::array();
    for (const auto& c : cs) a.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rel", c.rel}, {"rhs", c.rhs}, {"holds", c.holds}});
    return a;
}

inline json config_echo(const RunConfig& c) {
    json j = json::object();
    for (const auto& [sec, body] : c.source) {
        json s = json::object();
        for (const auto& [k, v] : body) s[k] = v.data();
        j[sec] = s;
    }
    return j;
}

/// Pinned summary schema: required keys and their JSON types ("number?" allows null).
inline const std::vector<std::pair<std::string, std::string>>& summary_schema() {
    static const std::vector<std::pair<std::string, std::string>> s{
        {"schema_version", "string"},
        {"config", "object"},
        {"params", "object"},
        {"constants", "object"},
        {"depths", "object"},
        {"seed", "object"},
        {"integration", "object"},
        {"outcome", "string"},
        {"T1_estimate", "number?"},
        {"blowup", "object"},
        {"invariance", "object?"},
        {"vacuum_ok", "boolean?"},
        {"vacuum", "object?"},
        {"boundedness", "object?"},
        {"energy_drift", "number"},
        {"wall_time_s", "number"},
    };
    return s;
}

/// Returns the list of schema violations (empty when valid).
inline std::vector<std::string> validate_summary(const json& j) {
    std::vector<std::string> bad;
    if (!j.is_object()) return {"summary is not an object"};
    const auto type_ok = [](const json& v, const std::string& t) {
        const bool nullable = !t.empty() && t.back() == '?';
        const std::string base = nullable ? t.substr(0, t.size() - 1) : t;
        if (v.is_null()) return nullable;
        if (base == "string") return v.is_string();
        if (base == "object") return v.is_object();
        if (base == "number") return v.is_number();
        if (base == "boolean") return v.is_boolean();
        return false;
    };
    for (const auto& [k, t] : summary_schema()) {
        if (!j.contains(k)) bad.push_back("missing key " + k);
        else if (!type_ok(j[k], t)) bad.push_back("key " + k + " is not " + t);
    }
    for (const auto& [k, _] : j.items()) {
        const bool known = std::any_of(summary_schema().begin(), summary_schema().end(), [&](const auto& e) { return e.first == k; });
        if (!known) bad.push_back("unexpected key " + k);
    }
    if (j.contains("schema_version") && j["schema_version"] != kSummarySchema) bad.push_back("schema_version mismatch");
    if (j.contains("outcome") && j["outcome"].is_string()) {
        const auto o = j["outcome"].get<std::string>();
        if (o != "bounded" && o != "blowup" && o != "inconclusive") bad.push_back("outcome has an unknown value");
        if (o != "blowup" && j.contains("T1_estimate") && !j["T1_estimate"].is_null()) bad.push_back("T1_estimate without blowup");
    }
    for (const char* k : {"lambda1", "Lambda", "S_p1"})
        if (!j.contains("constants") || !j["constants"].is_object() || !j["constants"].contains(k) || !j["constants"][k].is_number())
            bad.push_back(std::string("constants.") + k + " missing");
    for (const char* k : {"d", "d_bracket", "d3_plus", "d3_minus", "delta_estimate"})
        if (!j.contains("depths") || !j["depths"].is_object() || !j["depths"].contains(k)) bad.push_back(std::string("depths.") + k + " missing");
    return bad;
}

// ---------- run ----------

struct RunResult {
    json summary;
    json constants;
    Trace trace;
    SeedResult seed;
    Params params;
};

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path);
    if (!out) throw NumericalError("cannot write " + path);
    out << "t,ut_l2sq,grad_l2sq,M,lp1,J,I,E,Mprime\n";
    for (const auto& r : rows)
        out << fmt17(r.t) << ',' << fmt17(r.ut_l2sq) << ',' << fmt17(r.grad_l2sq) << ',' << fmt17(r.M) << ','
            << fmt17(r.lp1) << ',' << fmt17(r.J) << ',' << fmt17(r.I) << ',' << fmt17(r.E) << ',' << fmt17(r.Mprime) << '\n';
    if (!out) throw NumericalError("write failed for " + path);
}

inline void write_text(const std::string& path, const std::string& s) {
    std::ofstream out(path);
    if (!out) throw NumericalError("cannot write " + path);
    out << s;
    if (!out) throw NumericalError("write failed for " + path);
}

/// Seeds the initial data and evaluates every hypothesis of the requested analyses before integrating.
struct Prepared {
    std::shared_ptr<const Context> ctx;
    Params prm;
    Depths depths;
    SeedResult seed;
    Classification cls;
    Analyses an;
};

inline Prepared prepare(const RunConfig& c, ContextCache& cache) {
    Prepared p;
    p.ctx = cache.get(c.domain, c.params.p, c.eig_tol);
    const Context& ctx = *p.ctx;
    p.prm = resolve_params(c, ctx);
    p.depths = compute_depths(c, p.prm, ctx);
    if (!c.data_file.empty()) {
        auto [u0, u1] = read_initial_data(c.data_file, ctx.grid());
        p.seed.recipe = parse_recipe("generic");
        p.seed.u0 = u0;
        p.seed.u1 = u1;
        p.seed.k = p.seed.m = std::numeric_limits<double>::quiet_NaN();
        p.seed.E_from_coefficients = total_energy(p.prm, ctx.grid(), u0, u1);
        p.seed.certificate = certificate_checks(p.seed.recipe, p.prm, ctx, p.depths.inputs, u0, u1);
    } else {
        p.seed = seed(with_base_fields(c, p.prm, ctx), p.prm, ctx, p.depths.inputs);
    }
    const auto coeffs = effective_coeffs(p.prm, ctx.lambda1());
    const Maybe<double> depth = p.depths.wells.active(p.prm.p);
    const auto r = radii(p.prm, coeffs, ctx.Lambda(), ctx.Sp1(), depth.or_else(1.0));
    p.cls = classify(p.prm, ctx, p.seed.u0, depth, r, c.eps);
    p.an = requested(c);
    const TraceRow first = make_row(p.prm, ctx.grid(), 0.0, p.seed.u0, p.seed.u1);
    if (p.an.invariance) {
        if (c.invariance_case.empty()) throw ConfigError("invariance analysis needs run.invariance_case");
        const auto ic = parse_invariance_case(c.invariance_case);
        check_invariance_hypotheses(p.prm, ctx, p.depths.wells, p.depths.signed_depths ? &*p.depths.signed_depths : nullptr, ic, first);
        const double d = ic == InvarianceCase::B ? *p.depths.signed_depths->d3_minus : *p.depths.wells.active(p.prm.p);
        if (!row_in_case_set(p.prm, first, ic, d, c.eps))
            throw HypothesisError(std::string("initial data not in the invariant set of case ") + to_string(ic));
    }
    if (p.an.blowup) check_blowup_regime(p.prm, ctx);
    if (p.an.vacuum) {
        if (!(first.E <= 0.0)) throw HypothesisError("vacuum analysis requires E(0) <= 0");
        if (!(first.grad_l2sq > 0.0)) throw HypothesisError("vacuum analysis requires |grad u0|_2 > 0");
        (void)vacuum_radius(p.prm, ctx);
    }
    if (p.an.boundedness) (void)pick_boundedness_case(c, p.prm, ctx, p.depths, p.cls, first.E);
    return p;
}

inline RunResult run_pipeline(const RunConfig& c, ContextCache& cache) {
    const auto t_start = std::chrono::steady_clock::now();
    Prepared p = prepare(c, cache);
    const Context& ctx = *p.ctx;
    const Params& prm = p.prm;
    RunResult out;
    out.params = prm;
    out.seed = p.seed;
    out.trace = integrate(prm, ctx, p.seed.u0, p.seed.u1, c.sim);
    const auto& rows = out.trace.rows;
    const double E0 = rows.front().E;

    json s;
    s["schema_version"] = kSummarySchema;
    s["config"] = config_echo(c);
    s["params"] = {{"a", prm.a}, {"b", prm.b}, {"lambda", prm.lambda}, {"p", prm.p},
                   {"b0", effective_coeffs(prm, ctx.lambda1()).b0}, {"c1", effective_coeffs(prm, ctx.lambda1()).c1},
                   {"a_Lambda", prm.a * ctx.Lambda()}, {"lambda_minus_b_lambda1", prm.lambda - prm.b * ctx.lambda1()}};
    s["constants"] = constants_json(ctx);
    s["depths"] = depths_json(prm, p.depths);
    json sj;
    sj["recipe"] = p.seed.recipe.name();
    sj["base"] = c.data_file.empty() ? c.base : "file";
    sj["k"] = p.seed.k;
    sj["m"] = p.seed.m;
    sj["E0"] = E0;
    sj["E_from_coefficients"] = p.seed.E_from_coefficients;
    sj["J0"] = p.cls.J;
    sj["I0"] = p.cls.I;
    sj["int_u0_u1"] = ctx.grid().weight() * p.seed.u0.dot(p.seed.u1);
    sj["in_W_plus"] = p.cls.in_W_plus;
    sj["in_W_minus"] = p.cls.in_W_minus;
    sj["in_S"] = p.cls.in_S;
    sj["largest_admissible_a"] = maybe_json(p.seed.largest_admissible_a);
    sj["certificate"] = certificate_json(p.seed.certificate);
    sj["verified"] = verify_certificate(p.seed, prm, ctx, p.depths.inputs);
    s["seed"] = sj;
    s["integration"] = {{"scheme", to_string(c.sim.scheme)},
                        {"termination", to_string(out.trace.termination)},
                        {"steps", out.trace.steps},
                        {"dt_halvings", out.trace.dt_halvings},
                        {"min_dt", out.trace.min_dt},
                        {"rows", rows.size()},
                        {"t_final", rows.back().t},
                        {"max_rel_energy_drift", out.trace.max_rel_energy_drift},
                        {"energy_drift_ok", out.trace.termination != Termination::Horizon ||
                                                out.trace.max_rel_energy_drift <= c.sim.energy_drift_tol}};
    BlowupReport rep;
    if (rows.size() >= 10) {
        rep = analyze_blowup(out.trace, prm.p);
    } else {
        rep.outcome = out.trace.termination == Termination::Horizon ? Outcome::Bounded : Outcome::Inconclusive;
        rep.alpha = blowup_alpha(prm.p);
        rep.threshold_hit = out.trace.termination == Termination::Horizon ? "none" : to_string(out.trace.termination);
        rep.note = "fewer than 10 rows; concavity not analyzed";
    }
    s["outcome"] = to_string(rep.outcome);
    s["T1_estimate"] = rep.T1_estimate ? json(*rep.T1_estimate) : json(nullptr);
    s["blowup"] = {{"alpha", rep.alpha}, {"t0", rep.t0}, {"samples", rep.samples},
                   {"concavity_violations", rep.concavity_violations}, {"threshold_hit", rep.threshold_hit},
                   {"note", rep.note}, {"empirical", true}};
    s["invariance"] = nullptr;
    if (p.an.invariance) {
        const auto ic = parse_invariance_case(c.invariance_case);
        const double d = ic == InvarianceCase::B ? *p.depths.signed_depths->d3_minus : *p.depths.wells.active(prm.p);
        const auto inv = monitor_invariance(prm, rows, d, ic, c.eps);
        s["invariance"] = {{"case", to_string(ic)}, {"depth", d}, {"rows_checked", inv.rows_checked},
                           {"violations", inv.violating_rows.size()}, {"violating_rows", inv.violating_rows}};
    }
    s["vacuum_ok"] = nullptr;
    s["vacuum"] = nullptr;
    if (p.an.vacuum) {
        const auto v = check_vacuum(rows, prm, ctx);
        s["vacuum_ok"] = v.ok();
        s["vacuum"] = {{"radius", v.radius}, {"slack", v.slack}, {"min_grad_norm", v.min_grad},
                       {"violations", v.violating_rows.size()}};
    }
    s["boundedness"] = nullptr;
    if (p.an.boundedness) {
        const auto bc = pick_boundedness_case(c, prm, ctx, p.depths, p.cls, E0);
        const double K = boundedness_budget(prm, ctx, bc, E0);
        const double sup = trace_sup_norm(rows);
        s["boundedness"] = {{"case", to_string(bc)}, {"budget", K}, {"sup_norm", sup},
                            {"completed_horizon", out.trace.termination == Termination::Horizon},
                            {"within_budget", out.trace.termination == Termination::Horizon && sup <= 1.05 * K}};
    }
    s["energy_drift"] = out.trace.max_rel_energy_drift;
    s["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    out.summary = s;
    out.constants = constants_json(ctx);
    out.constants["depths"] = s["depths"];
    return out;
}

inline void persist(const RunResult& r, const std::string& dir) {
    fs::create_directories(dir);
    write_trace_csv((fs::path(dir) / "trace.csv").string(), r.trace.rows);
    write_text((fs::path(dir) / "summary.json").string(), r.summary.dump(2) + "\n");
    write_text((fs::path(dir) / "constants.json").string(), r.constants.dump(2) + "\n");
}

/// summary.json without the wall-clock field, for byte comparisons.
inline std::string deterministic_dump(json s) {
    s.erase("wall_time_s");
    return s.dump(2);
}

// ---------- sweep ----------

struct Axis {
    std::string key;  // section.key
    std::vector<std::string> values;
};

inline Axis parse_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("axis must look like section.key=v1,v2,...");
    Axis a{spec.substr(0, eq), split_list(spec.substr(eq + 1))};
    if (a.key.find('.') == std::string::npos) throw ConfigError("axis key must be section.key: " + a.key);
    if (a.values.empty()) throw ConfigError("axis " + a.key + " has no values");
    return a;
}

struct SweepRow {
    std::size_t index = 0;
    std::vector<std::string> values;
    std::string status = "ok";  // ok | config_error | hypothesis_error | numerical_error
    std::string error;
    std::string outcome;
    std::string termination;
    std::optional<double> T1;
    std::optional<double> E0;
    std::string summary_dump;  // deterministic summary, for cache comparisons
};

struct SweepResult {
    std::vector<Axis> axes;
    std::vector<SweepRow> rows;
};

inline SweepResult sweep(const pt::ptree& base, const std::vector<Axis>& axes, const std::string& out_dir, int jobs,
                         bool use_cache = true, bool write_files = true) {
    if (axes.empty()) throw ConfigError("sweep needs at least one axis");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    SweepResult res;
    res.axes = axes;
    res.rows.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rem = i;
        res.rows[i].index = i;
        res.rows[i].values.resize(axes.size());
        for (std::size_t k = axes.size(); k-- > 0;) {
            res.rows[i].values[k] = axes[k].values[rem % axes[k].values.size()];
            rem /= axes[k].values.size();
        }
    }
    ContextCache cache(use_cache);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            SweepRow& row = res.rows[i];
            try {
                pt::ptree tree = base;
                for (std::size_t k = 0; k < axes.size(); ++k) {
                    const auto& key = axes[k].key;
                    // keys of mutually exclusive families replace each other
                    const auto dot = key.find('.');
                    const std::string sec = key.substr(0, dot), name = key.substr(dot + 1);
                    if (sec == "params") {
                        auto& ps = tree.get_child("params");
                        const auto drop = [&](const char* n) { ps.erase(n); };
                        if (name == "a_Lambda") drop("a");
                        if (name == "a") drop("a_Lambda");
                        if (name == "lambda") { drop("lambda_rel"); drop("lambda_gap"); }
                        if (name == "lambda_rel") { drop("lambda"); drop("lambda_gap"); }
                        if (name == "lambda_gap") { drop("lambda"); drop("lambda_rel"); }
                    }
                    tree.put(pt::ptree::path_type(key, '.'), row.values[k]);
                }
                char sub[32];
                std::snprintf(sub, sizeof sub, "row_%04zu", i);
                const std::string dir = (fs::path(out_dir) / sub).string();
                tree.put("run.output_dir", dir);
                RunConfig c = config_from_tree(tree);
                c.wells.workers = 1;
                const RunResult r = run_pipeline(c, cache);
                if (write_files) persist(r, dir);
                row.outcome = r.summary["outcome"].get<std::string>();
                row.termination = r.summary["integration"]["termination"].get<std::string>();
                if (!r.summary["T1_estimate"].is_null()) row.T1 = r.summary["T1_estimate"].get<double>();
                row.E0 = r.summary["seed"]["E0"].get<double>();
                json d = r.summary;
                d["config"].erase("run");
                row.summary_dump = deterministic_dump(d);
            } catch (const ConfigError& e) {
                row.status = "config_error";
                row.error = e.what();
            } catch (const HypothesisError& e) {
                row.status = "hypothesis_error";
                row.error = e.what();
            } catch (const std::exception& e) {
                row.status = "numerical_error";
                row.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (write_files) {
        fs::create_directories(out_dir);
        std::ostringstream csv;
        csv << "row";
        for (const auto& a : axes) csv << ',' << a.key;
        csv << ",status,outcome,termination,T1_estimate,E0,error\n";
        json index = json::array();
        for (const auto& r : res.rows) {
            csv << r.index;
            for (const auto& v : r.values) csv << ',' << v;
            std::string err = r.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            csv << ',' << r.status << ',' << r.outcome << ',' << r.termination << ',' << (r.T1 ? fmt17(*r.T1) : "") << ','
                << (r.E0 ? fmt17(*r.E0) : "") << ',' << err << '\n';
            char sub[32];
            std::snprintf(sub, sizeof sub, "row_%04zu", r.index);
            json e = {{"row", r.index}, {"status", r.status}, {"summary", r.status == "ok" ? std::string(sub) + "/summary.json" : ""}};
            for (std::size_t k = 0; k < axes.size(); ++k) e[axes[k].key] = r.values[k];
            index.push_back(e);
        }
        write_text((fs::path(out_dir) / "phase_table.csv").string(), csv.str());
        write_text((fs::path(out_dir) / "index.json").string(), index.dump(2) + "\n");
    }
    return res;
}

/// Initial data and certificate only.
inline json seed_only(const RunConfig& c, ContextCache& cache, const std::string& dir) {
    Prepared p = prepare(c, cache);
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "u0,u1\n";
    for (Eigen::Index i = 0; i < p.seed.u0.size(); ++i) csv << fmt17(p.seed.u0[i]) << ',' << fmt17(p.seed.u1[i]) << '\n';
    write_text((fs::path(dir) / "seed.csv").string(), csv.str());
    json j = {{"recipe", p.seed.recipe.name()},
              {"k", p.seed.k},
              {"m", p.seed.m},
              {"E0", total_energy(p.prm, p.ctx->grid(), p.seed.u0, p.seed.u1)},
              {"E_from_coefficients", p.seed.E_from_coefficients},
              {"certificate", certificate_json(p.seed.certificate)},
              {"verified", verify_certificate(p.seed, p.prm, *p.ctx, p.depths.inputs)}};
    write_text((fs::path(dir) / "seed.json").string(), j.dump(2) + "\n");
    return j;
}

inline json constants_only(const RunConfig& c, ContextCache& cache) {
    auto ctx = cache.get(c.domain, c.params.p, c.eig_tol);
    const Params prm = resolve_params(c, *ctx);
    const Depths d = compute_depths(c, prm, *ctx);
    json j = constants_json(*ctx);
    j["depths"] = depths_json(prm, d);
    return j;
}

}  // namespace kirchhoff
