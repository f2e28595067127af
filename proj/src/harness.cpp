#include "sqzcat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace sqzcat {

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

GridSpec GridSpec::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError("--grid expects \"xmin,xmax,n\"");
    GridSpec g;
    try {
        std::size_t used = 0;
        g.min = std::stod(parts[0], &used);
        g.max = std::stod(parts[1], &used);
        g.points = std::stoi(parts[2], &used);
    } catch (const std::exception&) {
        throw ConfigError("--grid expects \"xmin,xmax,n\"");
    }
    if (!(g.max > g.min) || g.points < 2) throw ConfigError("--grid needs xmax > xmin and n >= 2");
    return g;
}

// --- configuration -------------------------------------------------------------

HilbertSpec RunConfig::space() const {
    const Cutoffs c = default_cutoffs(params.lambda);
    return capture_space(n_dpa.value_or(c.n_dpa), n_v.value_or(c.n_v));
}

void RunConfig::validate() const {
    params.validate();
    filter.validate();
    integrator.validate();
    if (n_dpa && *n_dpa < 2) throw ConfigError("n_dpa must be >= 2");
    if (n_v && *n_v < 2) throw ConfigError("n_v must be >= 2");
}

bool RunConfig::wants(const std::string& output) const {
    return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

RunConfig SweepSpec::point(double value) const {
    RunConfig cfg = base;
    if (parameter == "lambda")
        cfg.params.lambda = value;
    else if (parameter == "gamma")
        cfg.params.gamma = value;
    else if (parameter == "epsilon")
        cfg.params.epsilon = value;
    else if (parameter == "delta_a")
        cfg.params.delta_a = value;
    else if (parameter == "t_v")
        cfg.filter = FilterSpec::from_fwhm(value);
    else
        throw ConfigError("cannot sweep '" + parameter + "'");
    return cfg;
}

namespace {

const std::set<std::string> kKnownOutputs{"negative_volume", "w_min",      "purity",      "fit",
                                          "wigner_grid",     "quadratures", "region_count"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

nlohmann::json scalar_token(const std::string& token) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
    return token;
}

// Flat key = value text to a JSON object; comma-separated values become arrays.
nlohmann::json parse_flat(const std::string& text) {
    nlohmann::json obj = nlohmann::json::object();
    std::istringstream in(text);
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
        if (obj.contains(key)) throw ConfigError("duplicate key '" + key + "'");
        if (value.find(',') != std::string::npos) {
            nlohmann::json arr = nlohmann::json::array();
            std::stringstream ss(value);
            for (std::string item; std::getline(ss, item, ',');) arr.push_back(scalar_token(trim(item)));
            obj[key] = arr;
        } else {
            obj[key] = scalar_token(value);
        }
    }
    return obj;
}

nlohmann::json parse_any(const std::string& text) {
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '{') {
        nlohmann::json j = nlohmann::json::parse(t, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ConfigError("malformed JSON configuration");
        return j;
    }
    return parse_flat(text);
}

double number(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("'" + key + "' must be finite");
    return d;
}

int integer(const nlohmann::json& v, const std::string& key) {
    const double d = number(v, key);
    if (d != std::floor(d) || std::abs(d) > 1e6) throw ConfigError("'" + key + "' must be an integer");
    return static_cast<int>(d);
}

std::vector<nlohmann::json> as_list(const nlohmann::json& v) {
    if (v.is_array()) return {v.begin(), v.end()};
    return {v};
}

struct Parsed {
    RunConfig run;
    std::optional<std::string> sweep;
    std::vector<double> values;
};

Parsed apply_keys(const nlohmann::json& obj, bool allow_sweep) {
    Parsed out;
    RunConfig& cfg = out.run;
    std::optional<double> tau;
    std::optional<double> t_v;
    for (const auto& [key, v] : obj.items()) {
        if (key == "lambda") {
            cfg.params.lambda = number(v, key);
        } else if (key == "gamma") {
            cfg.params.gamma = number(v, key);
        } else if (key == "epsilon") {
            cfg.params.epsilon = number(v, key);
        } else if (key == "delta_a") {
            cfg.params.delta_a = number(v, key);
        } else if (key == "kappa") {
            if (number(v, key) != 1.0) throw ConfigError("kappa is the unit scale and must be 1");
        } else if (key == "tau") {
            tau = number(v, key);
        } else if (key == "t_v") {
            t_v = number(v, key);
        } else if (key == "n_dpa") {
            cfg.n_dpa = integer(v, key);
        } else if (key == "n_v") {
            cfg.n_v = integer(v, key);
        } else if (key == "dt") {
            cfg.integrator.dt = number(v, key);
        } else if (key == "relax_dt") {
            cfg.integrator.relax_dt = number(v, key);
        } else if (key == "method") {
            const std::string m = v.is_string() ? v.get<std::string>() : "";
            if (m == "rk4")
                cfg.integrator.method = IntegratorConfig::Method::Rk4;
            else if (m == "rk45")
                cfg.integrator.method = IntegratorConfig::Method::Rk45;
            else
                throw ConfigError("method must be rk4 or rk45");
        } else if (key == "outputs") {
            cfg.outputs.clear();
            for (const auto& o : as_list(v)) {
                if (!o.is_string() || !kKnownOutputs.count(o.get<std::string>()))
                    throw ConfigError("unknown output '" + o.dump() + "'");
                cfg.outputs.push_back(o.get<std::string>());
            }
        } else if (allow_sweep && key == "sweep") {
            if (!v.is_string()) throw ConfigError("sweep must name a parameter");
            out.sweep = v.get<std::string>();
        } else if (allow_sweep && key == "values") {
            for (const auto& x : as_list(v)) out.values.push_back(number(x, key));
        } else {
            throw ConfigError("unknown configuration key '" + key + "'");
        }
    }
    if (tau && t_v) throw ConfigError("give either tau or t_v, not both");
    if (tau) cfg.filter = FilterSpec::from_tau(*tau);
    if (t_v) cfg.filter = FilterSpec::from_fwhm(*t_v);
    if (!tau && !t_v && !(allow_sweep && out.sweep == "t_v")) throw ConfigError("missing filter width (tau or t_v)");
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg = apply_keys(parse_any(text), false).run;
    cfg.validate();
    return cfg;
}

SweepSpec parse_sweep_spec(const std::string& text) {
    Parsed parsed = apply_keys(parse_any(text), true);
    if (!parsed.sweep) throw ConfigError("sweep file needs 'sweep = <parameter>'");
    if (parsed.values.empty()) throw ConfigError("sweep file needs a nonempty 'values' list");
    SweepSpec spec{parsed.run, *parsed.sweep, parsed.values};
    for (double v : spec.values) spec.point(v).validate();
    return spec;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

SweepSpec load_sweep_spec(const std::filesystem::path& path) { return parse_sweep_spec(read_file(path)); }

// --- runs --------------------------------------------------------------------

nlohmann::json RunRecord::to_json() const {
    std::vector<std::string> paths;
    for (const auto& f : files) paths.push_back(f.string());
    return {{"hash", hash}, {"metrics", metrics}, {"files", paths}, {"seconds", seconds},
            {"cutoff_warning", cutoff_warning}};
}

std::string run_hash(const RunConfig& cfg, const GridSpec& grid) {
    nlohmann::json pre = capture_preimage(cfg.params, cfg.filter, cfg.space(), cfg.integrator);
    pre["grid"] = grid.to_json();
    pre["outputs"] = cfg.outputs;
    return preimage_key(pre);
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    const std::filesystem::path tmp = path.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

ResultCache cache_for(const std::filesystem::path& out, const HarnessOptions& opt) {
    if (opt.cache_dir) return ResultCache(*opt.cache_dir);
    return ResultCache::from_env(out / "cache");
}

// Retries once on the suggested extent at the same point density.
WignerGrid wigner_on(const DensityMatrix& rho, const GridSpec& grid, bool& extended) {
    extended = false;
    try {
        const Axis a = grid.axis();
        return wigner(rho, a, a);
    } catch (const GridTooSmall& e) {
        const double step = (grid.max - grid.min) / (grid.points - 1);
        const double ext = std::max({e.suggested_extent(), std::abs(grid.min), std::abs(grid.max)}) + 1.0;
        const int n = static_cast<int>(std::ceil(2.0 * ext / step)) + 1;
        const Axis a = Axis::uniform(-ext, ext, n);
        extended = true;
        try {
            return wigner(rho, a, a);
        } catch (const GridTooSmall& again) {
            throw NumericalError(again.what());
        }
    }
}

std::string quadrature_csv(const Axis& axis, const std::vector<std::pair<std::string, const DenseMat*>>& states) {
    const auto xs = axis.values();
    std::vector<std::vector<double>> cols;
    std::ostringstream out;
    out << "x";
    for (const auto& [name, rho] : states) {
        out << ',' << name << "_x," << name << "_y";
        cols.push_back(quadrature_distribution(*rho, Quadrature::X, xs));
        cols.push_back(quadrature_distribution(*rho, Quadrature::Y, xs));
    }
    out << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << format_double(xs[i]);
        for (const auto& c : cols) out << ',' << format_double(c[i]);
        out << '\n';
    }
    return out.str();
}

} // namespace

RunRecord cmd_capture(const RunConfig& cfg, const std::filesystem::path& out, const HarnessOptions& opt) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.hash = run_hash(cfg, opt.grid);
    const HilbertSpec space = cfg.space();
    const ResultCache cache = cache_for(out, opt);
    const CaptureResult cap = cached_capture(cache, cfg.params, cfg.filter, space, cfg.integrator);

    bool extended = false;
    const WignerGrid grid = wigner_on(cap.rho_v, opt.grid, extended);
    rec.cutoff_warning = cap.diagnostics.cutoff_warning;
    rec.metrics = {{"negative_volume", negative_volume(grid)},
                   {"w_min", grid.min()},
                   {"purity", purity(cap.rho_v)},
                   {"region_count", count_negative_regions(grid)},
                   {"mean_photon_number", mean_photon_number(cap.rho_v.matrix())},
                   {"wigner_integral", grid.integral()},
                   {"grid_extended", extended},
                   {"cutoff_warning", rec.cutoff_warning}};

    std::optional<FitResult> fit;
    if (cfg.wants("fit")) {
        fit = fit_sdss(cap.rho_v);
        rec.metrics["fit"] = fit->to_json();
    }

    const auto dir = out / rec.hash;
    std::filesystem::create_directories(dir);
    auto emit = [&](const std::string& name, const std::string& bytes) {
        write_atomic(dir / name, bytes);
        rec.files.push_back(dir / name);
    };
    emit("rho_v.bin", to_binary(cap.rho_v));
    emit("rho_v.json", to_json(cap.rho_v).dump());
    emit("wigner.csv", grid.to_csv());
    if (fit) emit("fit.json", fit->to_json().dump(2) + "\n");
    if (cfg.wants("quadratures")) emit("quadratures.csv", quadrature_csv(grid.x, {{"state", &cap.rho_v.matrix()}}));

    nlohmann::json summary = rec.metrics;
    summary["hash"] = rec.hash;
    summary["params"] = params_json(cfg.params);
    summary["filter"] = filter_json(cfg.filter);
    summary["t_v"] = cfg.filter.fwhm();
    summary["space"] = space_json(space);
    summary["integrator"] = cfg.integrator.to_json();
    summary["grid"] = opt.grid.to_json();
    summary["diagnostics"] = cap.diagnostics.to_json();
    if (rec.cutoff_warning)
        summary["warning"] = "top Fock occupation exceeds " + format_double(kCutoffOccupationTol);
    emit("summary.json", summary.dump(2) + "\n");

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

namespace {

int worker_count(int requested, std::size_t tasks) {
    if (requested > 0) return std::max(1, std::min<int>(requested, static_cast<int>(tasks)));
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    return std::max(1, std::min<int>(hw, static_cast<int>(tasks)));
}

// Runs task(i) for i in [0, n) on `workers` threads.
template <typename Task>
void parallel_for(std::size_t n, int workers, Task task) {
    std::atomic<std::size_t> next{0};
    auto body = [&]() {
        for (std::size_t i = next++; i < n; i = next++) task(i);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

} // namespace

SweepOutcome cmd_sweep(const SweepSpec& spec, const std::filesystem::path& out, const HarnessOptions& opt) {
    for (double v : spec.values) spec.point(v).validate();
    const std::size_t n = spec.values.size();
    std::vector<std::optional<RunRecord>> records(n);
    std::vector<std::string> errors(n);
    std::filesystem::create_directories(out);

    parallel_for(n, worker_count(opt.jobs, n), [&](std::size_t i) {
        try {
            records[i] = cmd_capture(spec.point(spec.values[i]), out, opt);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    SweepOutcome outcome;
    for (std::size_t i = 0; i < n; ++i) {
        if (records[i])
            outcome.records.emplace_back(spec.values[i], std::move(*records[i]));
        else
            outcome.failures.emplace_back(spec.values[i], errors[i]);
    }
    std::stable_sort(outcome.records.begin(), outcome.records.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::ostringstream csv;
    csv << "param,neg_volume,w_min,purity\n";
    nlohmann::json listing = {{"parameter", spec.parameter}, {"runs", nlohmann::json::array()},
                              {"failures", nlohmann::json::array()}};
    for (const auto& [value, rec] : outcome.records) {
        csv << format_double(value) << ',' << format_double(rec.metrics.at("negative_volume").get<double>()) << ','
            << format_double(rec.metrics.at("w_min").get<double>()) << ','
            << format_double(rec.metrics.at("purity").get<double>()) << '\n';
        listing["runs"].push_back({{"value", value}, {"hash", rec.hash}, {"cutoff_warning", rec.cutoff_warning}});
    }
    for (const auto& [value, err] : outcome.failures) listing["failures"].push_back({{"value", value}, {"error", err}});
    outcome.aggregate_csv = out / ("sweep_" + spec.parameter + ".csv");
    write_atomic(outcome.aggregate_csv, csv.str());
    write_atomic(out / ("sweep_" + spec.parameter + ".json"), listing.dump(2) + "\n");
    return outcome;
}

FitResult cmd_fit(const std::filesystem::path& rho_file, const std::filesystem::path& out_json,
                  const HarnessOptions& opt) {
    DensityMatrix rho;
    try {
        rho = read_density(rho_file);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid state file: ") + e.what());
    }
    if (rho.space().size() != 1) throw ConfigError("invalid state file: expected a single-mode state");

    const FitResult fit = fit_sdss(rho);
    const auto dir = out_json.has_parent_path() ? out_json.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    write_atomic(out_json, fit.to_json().dump(2) + "\n");

    const DensityMatrix target = sdss_state(fit.params, fit.working_dim);
    const Axis axis = opt.grid.axis();
    write_atomic(dir / "sdss_wigner.csv", wigner(target, axis, axis, false).to_csv());
    DenseMat padded = DenseMat::Zero(fit.working_dim, fit.working_dim);
    padded.topLeftCorner(rho.dim(), rho.dim()) = rho.matrix();
    write_atomic(dir / "quadratures.csv", quadrature_csv(axis, {{"state", &padded}, {"sdss", &target.matrix()}}));
    return fit;
}

const std::vector<Table1Row>& table1_rows() {
    static const std::vector<Table1Row> rows{{0.1, 12.0, false}, {0.2, 10.4, false}, {0.3, 8.8, false},
                                             {0.4, 6.4, false},  {0.5, 5.6, true},   {0.6, 5.0, true}};
    return rows;
}

std::filesystem::path cmd_table1(const std::filesystem::path& out_csv, const HarnessOptions& opt,
                                 std::span<const Table1Row> rows) {
    const auto dir = out_csv.has_parent_path() ? out_csv.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);

    std::vector<std::string> lines(rows.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (opt.light && rows[i].heavy)
            lines[i] = format_double(rows[i].lambda) + ',' + format_double(rows[i].t_v) + ",,,,,,,,,,,skipped";
        else
            todo.push_back(i);
    }

    parallel_for(todo.size(), worker_count(opt.jobs, todo.size()), [&](std::size_t k) {
        const Table1Row& row = rows[todo[k]];
        std::ostringstream line;
        line << format_double(row.lambda) << ',' << format_double(row.t_v) << ',';
        try {
            RunConfig cfg;
            cfg.params.lambda = row.lambda;
            cfg.filter = FilterSpec::from_fwhm(row.t_v);
            cfg.outputs = {"negative_volume", "w_min", "purity", "region_count", "wigner_grid", "fit"};
            const RunRecord rec = cmd_capture(cfg, dir, opt);
            const auto& f = rec.metrics.at("fit");
            line << format_double(f.at("alpha_re").get<double>()) << ','
                 << format_double(f.at("alpha_im").get<double>()) << ',' << format_double(f.at("r").get<double>())
                 << ',' << format_double(f.at("xi").get<double>()) << ','
                 << format_double(f.at("fidelity").get<double>()) << ','
                 << format_double(f.at("root_fidelity").get<double>()) << ','
                 << format_double(rec.metrics.at("purity").get<double>()) << ','
                 << format_double(rec.metrics.at("negative_volume").get<double>()) << ','
                 << format_double(rec.metrics.at("w_min").get<double>()) << ','
                 << (rec.cutoff_warning ? "true" : "false") << ",ok";
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            line << ",,,,,,,,,,failed: " << msg;
        }
        lines[todo[k]] = line.str();
    });

    std::ostringstream csv;
    csv << "lambda,t_v,alpha_re,alpha_im,r,xi,fidelity,root_fidelity,purity,negative_volume,w_min,cutoff_warning,"
           "status\n";
    for (const auto& l : lines) csv << l << '\n';
    write_atomic(out_csv, csv.str());
    return out_csv;
}

// --- built-in checks -------------------------------------------------------------

namespace {

CheckOutcome check(std::string name, double value, bool passed, std::string detail) {
    return {std::move(name), passed, value, std::move(detail)};
}

} // namespace

std::vector<CheckOutcome> run_checks() {
    std::vector<CheckOutcome> out;
    const IntegratorConfig cfg;

    {
        PhysicalParams p;
        p.lambda = 0.3;
        p.epsilon = 0.0;
        const HilbertSpec src = source_space(default_cutoffs(p.lambda).n_dpa);
        const SteadyState ss = steady_state(build_cascade(p, src), cfg);
        const Operator a = annihilation(src, kDpaIndex);
        const double n = expectation(ss.rho, a.adjoint() * a).real();
        const double exact = p.lambda * p.lambda / (2.0 * (1.0 - p.lambda * p.lambda));
        out.push_back(check("dpa_photon_number", n, std::abs(n - exact) <= 1e-4,
                            "expected " + format_double(exact) + " +- 1e-4"));
    }
    {
        PhysicalParams p;
        p.lambda = 0.2;
        const HilbertSpec src = source_space(default_cutoffs(p.lambda).n_dpa);
        const CascadeOperators ops = build_cascade(p, src);
        const DenseMat a = steady_state(ops, cfg, SteadyMethod::Nullspace).rho.matrix();
        const DenseMat b = steady_state(ops, cfg, SteadyMethod::Relaxation).rho.matrix();
        const double diff = max_abs(a - b);
        out.push_back(check("steady_state_cross_method", diff, diff <= 1e-7, "null space vs relaxation, <= 1e-7"));
    }
    {
        const HilbertSpec m = HilbertSpec::mode(6);
        const Axis ax = Axis::uniform(-4.0, 4.0, kDefaultPoints);
        const double nv = negative_volume(wigner(DensityMatrix::basis_state(m, 1), ax, ax));
        const double exact = 2.0 * std::exp(-0.5) - 1.0;
        out.push_back(check("fock1_negative_volume", nv, std::abs(nv - exact) <= 1e-3,
                            "expected " + format_double(exact) + " +- 1e-3"));
    }
    {
        // A fixed mixed state with coherences in every off-diagonal band.
        const int d = 6;
        DenseMat rho = 0.6 * sdss_state({Complex(0.3, 0.5), -0.2}, 25).matrix().topLeftCorner(d, d);
        rho += 0.4 * DensityMatrix::basis_state(HilbertSpec::mode(d), 1).matrix();
        rho /= rho.trace().real();
        const Axis ax = Axis::uniform(-5.0, 5.0, 201);
        const WignerGrid w = wigner(rho, ax, ax, false);
        const auto px = quadrature_distribution(rho, Quadrature::X, ax.values());
        const auto py = quadrature_distribution(rho, Quadrature::Y, ax.values());
        double worst = 0.0;
        for (int i = 0; i < ax.count; ++i) {
            worst = std::max(worst, std::abs(w.values.col(i).sum() * ax.step - px[i]));
            worst = std::max(worst, std::abs(w.values.row(i).sum() * ax.step - py[i]));
        }
        out.push_back(check("wigner_marginals", worst, worst <= 2e-3, "max |int W - <x|rho|x>| <= 2e-3"));
    }
    {
        PhysicalParams p;
        p.lambda = 0.0;
        const CaptureResult r = capture_temporal_mode(p, FilterSpec::from_fwhm(3.0), capture_space(4, 4), cfg);
        const double f = r.rho_v(0, 0).real();
        out.push_back(check("vacuum_pipeline", f, f > 0.999, "fidelity with vacuum > 0.999"));
    }
    return out;
}

} // namespace sqzcat
