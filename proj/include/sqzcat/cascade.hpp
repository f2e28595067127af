#pragma once

// Physical model: a degenerate parametric amplifier (DPA) cascaded into a
// two-level system (TLS), optionally followed by a virtual capture cavity that
// absorbs one Gaussian temporal mode of the combined output. Units: kappa = 1,
// hbar = 1.

#include "sqzcat/fock.hpp"

#include <functional>
#include <optional>

namespace sqzcat {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct PhysicalParams {
    double lambda = 0.0;
    double kappa = 1.0;
    double gamma = 0.5;
    double epsilon = 1.0;
    double delta_a = 0.0;

    // Throws ConfigError unless 0 <= lambda < kappa, gamma > 0, epsilon in [0, 1].
    void validate() const;
};

// Subsystem order of every model space: DPA mode, TLS, [capture mode].
inline constexpr int kDpaIndex = 0;
inline constexpr int kTlsIndex = 1;
inline constexpr int kCaptureIndex = 2;

struct Cutoffs {
    int n_dpa = 0;
    int n_v = 0;
};

// ceil(10 + 45 lambda) for the DPA, 10 (lambda <= 0.3) or 14 for the capture mode.
Cutoffs default_cutoffs(double lambda);

HilbertSpec source_space(int n_dpa);
HilbertSpec capture_space(int n_dpa, int n_v);

// Gaussian temporal filter
//   v(t) = (8 / (pi tau^2))^{1/4} exp(-((t - t0) / (tau / 2))^2)
// on the capture window [0, t_end].
struct FilterSpec {
    double tau = 1.0;
    double t0 = 2.0;
    double t_end = 4.0;

    // t0 = 2 tau, t_end = 4 tau.
    static FilterSpec from_tau(double tau);
    // T_v is the FWHM of v(t): T_v = tau sqrt(ln 2).
    static FilterSpec from_fwhm(double t_v);

    double fwhm() const;
    void validate() const;
};

double gaussian_filter(const FilterSpec& f, double t);
// Closed-form int_0^t |v|^2 dt'.
double filter_cumulative_norm(const FilterSpec& f, double t);

// Accumulated norm below which the capture coupling is held at zero.
inline constexpr double kCouplingThreshold = 1e-12;

// g_v(t) = -v*(t) / sqrt(int_0^t |v|^2), zero while the accumulated norm is
// below kCouplingThreshold.
Complex capture_coupling(Complex v, double cumulative_norm);
Complex capture_coupling(const FilterSpec& f, double t);
// First time at which the accumulated norm reaches kCouplingThreshold.
double coupling_activation_time(const FilterSpec& f);

struct CascadeOperators {
    Operator h_static;
    Operator j_out;
    Operator j_a;
    std::optional<int> capture_mode;
};

// H = i(lambda/2)(a^dag^2 - a^2) + Delta_A s+s- + (i/2) sqrt(2 kappa eps gamma)(a^dag s- - a s+)
Operator build_hamiltonian(const PhysicalParams& p, const HilbertSpec& space);
// J_out = sqrt(2 kappa) a + sqrt(eps gamma) s-,  J_A = sqrt((1 - eps) gamma) s-
CascadeOperators build_jumps(const PhysicalParams& p, const HilbertSpec& space);
CascadeOperators build_cascade(const PhysicalParams& p, const HilbertSpec& space);

// Unidirectional coupling of an upstream channel c1 into a downstream c2:
//   H_casc = (i/2)(c1^dag c2 - c2^dag c1),  J = c1 + c2.
struct CascadeTerms {
    Operator hamiltonian;
    Operator jump;
};
CascadeTerms cascade_compose(const Operator& upstream, const Operator& downstream);

// sum_k c_k(t) M_k over plain sparse matrices, with all M_k stored on one
// shared sparsity pattern so evaluation only rescales value arrays.
class SparseCombination {
  public:
    using Coefficient = std::function<Complex(double)>; // empty means constant 1

    SparseCombination() = default;
    SparseCombination(int rows, int cols) : rows_(rows), cols_(cols) {}

    void add(const SparseOp& term, Coefficient coefficient);
    void evaluate(double t, SparseOp& out) const;

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return aligned_.empty(); }
    bool is_static() const;
    const std::vector<SparseOp>& raw_terms() const { return raw_; }
    const std::vector<Coefficient>& coefficients() const { return coefficients_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<SparseOp> raw_;
    std::vector<SparseOp> aligned_;
    std::vector<Coefficient> coefficients_;
};

// A SparseCombination whose terms are operators on one HilbertSpec.
class TimeDependentOperator {
  public:
    using Coefficient = SparseCombination::Coefficient;

    TimeDependentOperator() = default;
    explicit TimeDependentOperator(const Operator& constant);

    void add_term(const Operator& term, Coefficient coefficient);

    const HilbertSpec& space() const { return space_; }
    void evaluate(double t, SparseOp& out) const { combination_.evaluate(t, out); }
    Operator at(double t) const;
    const SparseCombination& combination() const { return combination_; }
    const std::vector<Operator>& raw_terms() const { return raw_; }
    const std::vector<Coefficient>& coefficients() const { return combination_.coefficients(); }
    bool is_static() const { return combination_.is_static(); }

  private:
    HilbertSpec space_;
    std::vector<Operator> raw_;
    SparseCombination combination_;
};

// Time-dependent (H_total(t), J_total(t)) with a capture mode b attached:
//   J_total(t) = J_out + g*(t) b
//   H_total(t) = H_static + (i/2)(g*(t) J_out^dag b - g(t) b^dag J_out)
class CaptureFamily {
  public:
    using CouplingFn = std::function<Complex(double)>;

    CaptureFamily(const CascadeOperators& ops, CouplingFn coupling, const HilbertSpec& space_with_b);

    const HilbertSpec& space() const { return space_; }
    const CascadeOperators& operators() const { return ops_; }
    Complex coupling(double t) const { return coupling_(t); }

    Operator hamiltonian(double t) const;
    Operator jump(double t) const;
    // Static loss channel J_A, extended to the capture space.
    const Operator& loss() const { return ops_.j_a; }

    TimeDependentOperator hamiltonian_family() const;
    TimeDependentOperator jump_family() const;
    // H_total - (i/2)(J_total^dag J_total + J_A^dag J_A), simplified to
    //   K0 - i g(t) b^dag J_out - (i/2)|g(t)|^2 b^dag b.
    TimeDependentOperator effective_hamiltonian_family() const;

  private:
    CascadeOperators ops_; // extended to space_
    Operator b_;
    CouplingFn coupling_;
    HilbertSpec space_;
};

CaptureFamily extend_with_capture(const CascadeOperators& ops, const FilterSpec& f,
                                  const HilbertSpec& space_with_b);

} // namespace sqzcat
