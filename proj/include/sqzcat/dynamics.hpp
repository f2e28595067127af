#pragma once

// Master-equation time integration, steady states and the temporal-mode
// capture pipeline.

#include "sqzcat/cascade.hpp"
#include "sqzcat/fock.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace sqzcat {

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct IntegratorConfig {
    enum class Method { Rk4, Rk45 };

    Method method = Method::Rk4;
    double dt = 0.01;        // capture window step (kappa^-1)
    double relax_dt = 0.01;  // steady-state relaxation step
    double rtol = 1e-8;      // RK45 only
    double atol = 1e-10;     // RK45 only
    bool renormalize_trace = false;
    bool use_parity_sectors = true;
    int positivity_check_every = 50; // accepted steps between eigenvalue checks; 0 disables

    void validate() const;
    nlohmann::json to_json() const;
};

// d rho / dt = -i H_eff rho + i rho H_eff^dag + sum_k J_k rho J_k^dag
// with H_eff = H - (i/2) sum_k J_k^dag J_k.
//
// When every H_eff term conserves total excitation parity and every jump has a
// definite parity, the generator maps parity-block-diagonal states to
// themselves, and evolution runs on the two diagonal sectors only.
//
// Evaluation scratch space is held internally, so one instance must not be
// applied from two threads at once.
class MasterEquation {
  public:
    using Blocks = std::vector<DenseMat>;

    MasterEquation(TimeDependentOperator h_eff, std::vector<TimeDependentOperator> jumps);

    static MasterEquation lindblad(const TimeDependentOperator& hamiltonian,
                                   const std::vector<TimeDependentOperator>& jumps);
    static MasterEquation lindblad(const Operator& hamiltonian, std::span<const Operator> jumps);
    static MasterEquation capture(const CaptureFamily& family);

    int dim() const { return space_.total_dim(); }
    const HilbertSpec& space() const { return space_; }

    // out = L(t) rho for Hermitian rho, on the full matrix.
    void apply(double t, const DenseMat& rho, DenseMat& out) const;

    bool has_parity_sectors() const { return parity_ != nullptr; }
    // Splits rho into parity sectors; nullopt without sectors or when rho has
    // entries above `tol` between sectors.
    std::optional<Blocks> split(const DenseMat& rho, double tol = 1e-13) const;
    DenseMat merge(const Blocks& blocks) const;
    void apply_sectors(double t, const Blocks& rho, Blocks& out) const;

    struct Plan;

  private:
    HilbertSpec space_;
    std::shared_ptr<Plan> full_;
    std::shared_ptr<Plan> parity_; // null when some term mixes parities
};

struct EvolveStats {
    long steps = 0;
    long rejected = 0;
    double trace_drift = 0.0;          // |Tr rho(t_end) - Tr rho0| before renormalization
    double min_sampled_eigenvalue = 0.0;
    bool used_sectors = false;
};

struct Evolution {
    DensityMatrix state;
    EvolveStats stats;
};

// Integrates from t_start to t_end. Fixed steps never straddle a breakpoint,
// so coefficient discontinuities can be placed on the step grid.
Evolution evolve(const MasterEquation& eq, const DensityMatrix& rho0, double t_start, double t_end,
                 const IntegratorConfig& cfg, std::span<const double> breakpoints = {});
Evolution evolve(const TimeDependentOperator& hamiltonian, const std::vector<TimeDependentOperator>& jumps,
                 const DensityMatrix& rho0, double t_start, double t_end, const IntegratorConfig& cfg);

inline constexpr double kSteadyResidualTol = 1e-9;
inline constexpr double kSteadyMaxTime = 400.0;
inline constexpr int kNullspaceMaxDim = 80;

enum class SteadyMethod { Auto, Nullspace, Relaxation };

struct SteadyState {
    DensityMatrix rho;
    double residual = 0.0; // max |L rho|
    SteadyMethod method = SteadyMethod::Auto;
    double relax_time = 0.0;
};

// Steady state of the static DPA+TLS cascade. Auto uses the null-space solve
// up to kNullspaceMaxDim and relaxation from vacuum x ground above.
SteadyState steady_state(const CascadeOperators& ops, const IntegratorConfig& cfg,
                         SteadyMethod method = SteadyMethod::Auto);

struct CaptureDiagnostics {
    double trace_drift = 0.0;
    double min_eigenvalue = 0.0;          // of rho_v
    double min_sampled_eigenvalue = 0.0;  // full state, at sampled steps
    double steady_residual = 0.0;
    // Occupations of the top two Fock levels, [highest, second highest].
    std::array<double, 2> dpa_top{};
    std::array<double, 2> capture_top{};
    bool cutoff_warning = false;
    long steps = 0;

    nlohmann::json to_json() const;
};

struct CaptureResult {
    DensityMatrix rho_v;
    CaptureDiagnostics diagnostics;
};

inline constexpr double kCutoffOccupationTol = 1e-5;

CaptureResult capture_temporal_mode(const PhysicalParams& p, const FilterSpec& f, const HilbertSpec& space,
                                    const IntegratorConfig& cfg);

struct ConvergenceReport {
    double max_change = 0.0;
    bool passed = false;
    HilbertSpec base_space;
    HilbertSpec enlarged_space;
};

inline constexpr double kCutoffConvergenceTol = 1e-4;

// Repeats the capture with N_dpa + 4 and N_v + 2 and compares rho_v
// (zero-padded to the larger cutoff).
ConvergenceReport check_cutoff_convergence(const PhysicalParams& p, const FilterSpec& f,
                                           const HilbertSpec& space, const IntegratorConfig& cfg);

// --- persistence ----------------------------------------------------------

// Content-addressed store of density matrices: <root>/<key>.bin plus a
// <key>.json sidecar holding the hash preimage. Writes go through a temporary
// file and a rename, so concurrent writers never expose partial files.
class ResultCache {
  public:
    explicit ResultCache(std::filesystem::path root);

    // SQZC_CACHE_DIR if set, else `fallback`.
    static ResultCache from_env(const std::filesystem::path& fallback);

    const std::filesystem::path& root() const { return root_; }

    std::optional<DenseMat> load(const std::string& key) const;
    void store(const std::string& key, const DensityMatrix& rho, const nlohmann::json& preimage) const;

  private:
    std::filesystem::path root_;
};

std::string sha256_hex(std::string_view data);

nlohmann::json params_json(const PhysicalParams& p);
nlohmann::json filter_json(const FilterSpec& f);
nlohmann::json space_json(const HilbertSpec& space);

// Hash preimages for cached artifacts.
nlohmann::json capture_preimage(const PhysicalParams& p, const FilterSpec& f, const HilbertSpec& space,
                                const IntegratorConfig& cfg);
nlohmann::json steady_preimage(const PhysicalParams& p, const HilbertSpec& space, const IntegratorConfig& cfg);
std::string preimage_key(const nlohmann::json& preimage);

// Capture through the cache. On a hit the diagnostics are re-read from the
// sidecar.
CaptureResult cached_capture(const ResultCache& cache, const PhysicalParams& p, const FilterSpec& f,
                             const HilbertSpec& space, const IntegratorConfig& cfg);

} // namespace sqzcat
