// kirchhoff_lab: run, sweep, constants and seed verbs over INI experiment configs.

#include "kirchhoff/lab.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const kirchhoff::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const kirchhoff::HypothesisError& e) {
        std::cerr << "hypothesis not met: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for the hyperbolic Kirchhoff equation"};
    app.require_subcommand(1);

    std::string config, out_override;
    std::vector<std::string> axes;
    int jobs = 1;
    bool no_cache = false;

    auto* run = app.add_subcommand("run", "Run the full pipeline for one config");
    run->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output-dir", out_override, "Override run.output_dir");

    auto* sw = app.add_subcommand("sweep", "Cartesian parameter sweep over a base config");
    sw->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
    sw->add_option("--axis", axes, "section.key=v1,v2,... (repeatable)")->required();
    sw->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sw->add_option("-o,--output-dir", out_override, "Override run.output_dir");
    sw->add_flag("--no-cache", no_cache, "Rebuild constants for every row");

    auto* cst = app.add_subcommand("constants", "Print lambda1, Lambda, S_q and well depths");
    cst->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);

    auto* sd = app.add_subcommand("seed", "Emit initial data and its certificate");
    sd->add_option("config", config, "INI config file")->required()->check(CLI::ExistingFile);
    sd->add_option("-o,--output-dir", out_override, "Override run.output_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    using namespace kirchhoff;
    return guarded([&]() -> int {
        if (run->parsed()) {
            RunConfig c = load_config(config);
            if (!out_override.empty()) c.output_dir = out_override;
            ContextCache cache;
            const RunResult r = run_pipeline(c, cache);
            persist(r, c.output_dir);
            std::cout << "outcome: " << r.summary["outcome"].get<std::string>()
                      << "  termination: " << r.summary["integration"]["termination"].get<std::string>()
                      << "  E0: " << fmt17(r.summary["seed"]["E0"].get<double>()) << '\n'
                      << "wrote " << c.output_dir << "/{trace.csv,summary.json,constants.json}\n";
            return 0;
        }
        if (sw->parsed()) {
            const auto tree = read_tree(config);
            RunConfig base = config_from_tree(tree);
            std::vector<Axis> parsed;
            for (const auto& a : axes) parsed.push_back(parse_axis(a));
            const std::string dir = out_override.empty() ? base.output_dir : out_override;
            const auto res = sweep(tree, parsed, dir, jobs, !no_cache);
            std::size_t failed = 0;
            for (const auto& r : res.rows) {
                std::cout << "row " << r.index;
                for (std::size_t k = 0; k < parsed.size(); ++k) std::cout << ' ' << parsed[k].key << '=' << r.values[k];
                std::cout << " -> " << (r.status == "ok" ? r.outcome : r.status + ": " + r.error) << '\n';
                failed += r.status != "ok";
            }
            std::cout << "wrote " << dir << "/phase_table.csv (" << res.rows.size() << " rows, " << failed << " failed)\n";
            return 0;
        }
        if (cst->parsed()) {
            const RunConfig c = load_config(config);
            ContextCache cache;
            std::cout << constants_only(c, cache).dump(2) << '\n';
            return 0;
        }
        RunConfig c = load_config(config);
        if (!out_override.empty()) c.output_dir = out_override;
        ContextCache cache;
        std::cout << seed_only(c, cache, c.output_dir).dump(2) << '\n';
        return 0;
    });
}
