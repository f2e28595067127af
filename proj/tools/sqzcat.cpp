// Command-line front end: capture, sweep, fit, table1, check.

#include "sqzcat/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace sqzcat;

namespace {

template <typename Fn>
int guarded(Fn fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

void print_record(const RunRecord& rec) {
    std::cout << rec.to_json().dump(2) << '\n';
    if (rec.cutoff_warning) std::cerr << "warning: cutoff occupation above " << kCutoffOccupationTol << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Squeezed-light driven emitter: temporal-mode capture and analysis"};
    app.require_subcommand(1);

    std::string grid_text;
    std::string config;
    std::string out = "out";
    int jobs = 0;
    bool light = false;
    std::string rho_file;
    std::string cache_dir;

    app.add_option("--grid", grid_text, "Wigner grid \"xmin,xmax,n\" (both axes)");
    app.add_option("--cache", cache_dir, "Cache directory (default: SQZC_CACHE_DIR or <out>/cache)");

    auto* capture = app.add_subcommand("capture", "Single capture run");
    capture->add_option("--config", config, "Run configuration file")->required();
    capture->add_option("--out", out, "Output directory");

    auto* sweep = app.add_subcommand("sweep", "Parameter sweep");
    sweep->add_option("--config", config, "Sweep specification file")->required();
    sweep->add_option("--out", out, "Output directory");
    sweep->add_option("--jobs", jobs, "Parallel points (default: one per point, capped at cores)");

    auto* fit = app.add_subcommand("fit", "Fit an SDSS to a stored temporal-mode state");
    fit->add_option("rho", rho_file, "rho_v file (.bin or .json)")->required();
    fit->add_option("--out", out, "Fit JSON path")->required();

    auto* table1 = app.add_subcommand("table1", "Optimal SDSS parameters for the six (lambda, T_v) pairs");
    table1->add_option("--out", out, "CSV path")->required();
    table1->add_option("--jobs", jobs, "Parallel rows");
    table1->add_flag("--light", light, "Skip the heavy lambda = 0.5, 0.6 rows");

    auto* checks = app.add_subcommand("check", "Built-in oracle and invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    HarnessOptions opt;
    opt.jobs = jobs;
    opt.light = light;
    if (!cache_dir.empty()) opt.cache_dir = cache_dir;

    return guarded([&]() -> int {
        if (!grid_text.empty()) opt.grid = GridSpec::parse(grid_text);

        if (*capture) {
            const RunConfig cfg = load_run_config(config);
            print_record(cmd_capture(cfg, out, opt));
            return kExitOk;
        }
        if (*sweep) {
            const SweepSpec spec = load_sweep_spec(config);
            const SweepOutcome res = cmd_sweep(spec, out, opt);
            std::cout << res.aggregate_csv.string() << '\n';
            for (const auto& [value, err] : res.failures)
                std::cerr << "failed " << spec.parameter << " = " << value << ": " << err << '\n';
            return res.failures.empty() ? kExitOk : kExitNumerical;
        }
        if (*fit) {
            const FitResult r = cmd_fit(rho_file, out, opt);
            std::cout << r.to_json().dump(2) << '\n';
            return kExitOk;
        }
        if (*table1) {
            std::cout << cmd_table1(out, opt).string() << '\n';
            return kExitOk;
        }
        if (*checks) {
            bool all = true;
            for (const auto& c : run_checks()) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_double(c.value) << " ("
                          << c.detail << ")\n";
                all = all && c.passed;
            }
            return all ? kExitOk : kExitNumerical;
        }
        return kExitConfig;
    });
}
