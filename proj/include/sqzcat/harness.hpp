#pragma once

// Experiment configuration, single runs, sweeps, fits and the reference-table
// driver behind the command-line tool.

#include "sqzcat/cascade.hpp"
#include "sqzcat/cat_fit.hpp"
#include "sqzcat/dynamics.hpp"
#include "sqzcat/phase_space.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sqzcat {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

struct GridSpec {
    double min = -kDefaultExtent;
    double max = kDefaultExtent;
    int points = kDefaultPoints;

    // "xmin,xmax,n"
    static GridSpec parse(const std::string& text);
    Axis axis() const { return Axis::uniform(min, max, points); }
    nlohmann::json to_json() const { return {{"min", min}, {"max", max}, {"points", points}}; }
};

struct RunConfig {
    PhysicalParams params;
    FilterSpec filter = FilterSpec::from_fwhm(12.0);
    std::optional<int> n_dpa;
    std::optional<int> n_v;
    IntegratorConfig integrator;
    std::vector<std::string> outputs{"negative_volume", "w_min", "purity", "region_count", "wigner_grid"};

    HilbertSpec space() const;
    void validate() const;
    bool wants(const std::string& output) const;
};

struct SweepSpec {
    RunConfig base;
    std::string parameter; // lambda, gamma, epsilon, t_v or delta_a
    std::vector<double> values;

    RunConfig point(double value) const;
};

// Flat "key = value" lines ('#' starts a comment) or a JSON object. Throws
// ConfigError on unknown keys, bad values or violated invariants.
//   lambda gamma epsilon delta_a kappa(=1)  tau | t_v  n_dpa n_v
//   dt relax_dt method(rk4|rk45)  outputs = a, b, ...
//   sweep = <parameter>  values = v1, v2, ...   (sweep files only)
RunConfig parse_run_config(const std::string& text);
SweepSpec parse_sweep_spec(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct HarnessOptions {
    GridSpec grid;
    int jobs = 0; // 0: one per point, capped at hardware concurrency
    bool light = false;
    std::optional<std::filesystem::path> cache_dir; // default <out>/cache or SQZC_CACHE_DIR
};

struct RunRecord {
    std::string hash;
    nlohmann::json metrics;
    std::vector<std::filesystem::path> files;
    double seconds = 0.0;
    bool cutoff_warning = false;

    nlohmann::json to_json() const;
};

// Hash of everything that determines a run's artifacts.
std::string run_hash(const RunConfig& cfg, const GridSpec& grid);

// Captures, analyses and writes <out>/<hash>/{rho_v.bin, rho_v.json,
// wigner.csv, summary.json[, fit.json, quadratures.csv]}.
RunRecord cmd_capture(const RunConfig& cfg, const std::filesystem::path& out, const HarnessOptions& opt);

struct SweepOutcome {
    std::vector<std::pair<double, RunRecord>> records; // sorted by parameter value
    std::vector<std::pair<double, std::string>> failures;
    std::filesystem::path aggregate_csv;
};

// Runs every point (in parallel), then writes <out>/sweep_<parameter>.csv with
// "param,neg_volume,w_min,purity" rows sorted by parameter.
SweepOutcome cmd_sweep(const SweepSpec& spec, const std::filesystem::path& out, const HarnessOptions& opt);

// Fits an SDSS to the state in `rho_file`; writes the FitResult JSON to
// `out_json` and sdss_wigner.csv plus quadratures.csv next to it.
FitResult cmd_fit(const std::filesystem::path& rho_file, const std::filesystem::path& out_json,
                  const HarnessOptions& opt);

struct Table1Row {
    double lambda = 0.0;
    double t_v = 0.0;
    bool heavy = false;
};
const std::vector<Table1Row>& table1_rows();

// CSV: lambda,t_v,alpha_re,alpha_im,r,xi,fidelity,root_fidelity,purity,
// negative_volume,w_min,cutoff_warning,status. --light marks the heavy rows
// "skipped".
std::filesystem::path cmd_table1(const std::filesystem::path& out_csv, const HarnessOptions& opt,
                                 std::span<const Table1Row> rows = table1_rows());

struct CheckOutcome {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string detail;
};

// Fast built-in oracle and invariant checks.
std::vector<CheckOutcome> run_checks();

std::string format_double(double v); // 17 significant digits

} // namespace sqzcat
