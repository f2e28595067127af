#pragma once

// Truncated Fock-space operator algebra.
//
// Basis ordering: subsystem 0 is the slowest-varying tensor index, so the
// composite index of (n_0, n_1, ..., n_{k-1}) is
//   ((n_0 * d_1 + n_1) * d_2 + n_2) ...

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sqzcat {

using Complex = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using DenseMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DenseVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

inline constexpr Complex kI{0.0, 1.0};

// Raised for invalid states, shapes or truncations.
class FockError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class SubsystemKind { Mode, Qubit };

struct Subsystem {
    SubsystemKind kind;
    int dim;
};

class HilbertSpec {
  public:
    HilbertSpec() = default;
    explicit HilbertSpec(std::vector<Subsystem> subsystems);

    // Single bosonic mode of the given cutoff.
    static HilbertSpec mode(int dim);

    const std::vector<Subsystem>& subsystems() const { return subsystems_; }
    std::vector<int> dims() const;
    int size() const { return static_cast<int>(subsystems_.size()); }
    int dim(int index) const { return subsystems_.at(checked(index)).dim; }
    SubsystemKind kind(int index) const { return subsystems_.at(checked(index)).kind; }
    int total_dim() const { return total_dim_; }

    // Product of the dims of subsystems after `index` (the stride of that index).
    int stride(int index) const;

    // Space with one more subsystem appended (fastest-varying).
    HilbertSpec appended(Subsystem extra) const;

    bool operator==(const HilbertSpec& other) const;

  private:
    int checked(int index) const;

    std::vector<Subsystem> subsystems_;
    int total_dim_ = 1;
};

class Operator {
  public:
    Operator() = default;
    Operator(HilbertSpec space, SparseOp matrix, bool hermitian_hint = false);

    static Operator zero(const HilbertSpec& space);
    static Operator identity(const HilbertSpec& space);

    const HilbertSpec& space() const { return space_; }
    const SparseOp& matrix() const { return matrix_; }
    bool hermitian_hint() const { return hermitian_; }

    Operator adjoint() const;
    DenseMat dense() const { return DenseMat(matrix_); }

    Operator& operator+=(const Operator& rhs);
    Operator& operator-=(const Operator& rhs);
    Operator& operator*=(Complex s);

    friend Operator operator+(Operator lhs, const Operator& rhs) { return lhs += rhs; }
    friend Operator operator-(Operator lhs, const Operator& rhs) { return lhs -= rhs; }
    friend Operator operator*(const Operator& lhs, const Operator& rhs);
    friend Operator operator*(Complex s, Operator op) { return op *= s; }
    friend Operator operator*(double s, Operator op) { return op *= Complex(s, 0.0); }

  private:
    void require_same_space(const Operator& rhs) const;

    HilbertSpec space_;
    SparseOp matrix_;
    bool hermitian_ = false;
};

// Places a single-subsystem matrix on `index` with identities elsewhere.
Operator embed(const HilbertSpec& space, int index, const SparseOp& local);

// Truncated lowering operator of a bosonic mode.
Operator annihilation(const HilbertSpec& space, int index);
Operator creation(const HilbertSpec& space, int index);
// sigma_- = |g><e| in the (|g>, |e>) basis.
Operator tls_lower(const HilbertSpec& space, int index);

// Extends `op` to `bigger`, which must start with the subsystems of op.space().
Operator extend(const Operator& op, const HilbertSpec& bigger);

class DensityMatrix {
  public:
    static constexpr double kHermitianTol = 1e-10;
    static constexpr double kTraceTol = 1e-8;
    static constexpr double kPositivityTol = -1e-8;

    DensityMatrix() = default;
    // Validates all invariants; throws FockError on violation.
    DensityMatrix(HilbertSpec space, DenseMat entries);

    static DensityMatrix pure(const HilbertSpec& space, const DenseVec& psi);
    static DensityMatrix basis_state(const HilbertSpec& space, int index);
    static DensityMatrix maximally_mixed(const HilbertSpec& space);
    // Skips validation; for intermediate results already known to be valid.
    static DensityMatrix unchecked(HilbertSpec space, DenseMat entries);

    const HilbertSpec& space() const { return space_; }
    const DenseMat& matrix() const { return entries_; }
    int dim() const { return static_cast<int>(entries_.rows()); }
    Complex operator()(int m, int n) const { return entries_(m, n); }

    double min_eigenvalue() const;

    // Tensor product with another state; `other` becomes the fastest index.
    DensityMatrix tensor(const DensityMatrix& other) const;

  private:
    HilbertSpec space_;
    DenseMat entries_;
};

double max_abs(const DenseMat& m);
double hermiticity_defect(const DenseMat& m);
double min_hermitian_eigenvalue(const DenseMat& m);

// d rho/dt = -i[H, rho] + sum_k (1/2) D[J_k] rho,
// with D[O] rho = 2 O rho O^dag - O^dag O rho - rho O^dag O.
DenseMat apply_liouvillian(const Operator& hamiltonian, std::span<const Operator> jumps,
                           const DenseMat& rho);

DensityMatrix partial_trace(const DensityMatrix& rho, int keep);
double purity(const DensityMatrix& rho);
Complex expectation(const DensityMatrix& rho, const Operator& op);

// --- serialization ---------------------------------------------------------
// JSON: {"dims": [...], "re": [[...]], "im": [[...]]}
nlohmann::json to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const nlohmann::json& j);

// Binary: "FOCKRHO1", u32 rows, u32 cols (little-endian), then row-major
// interleaved (re, im) doubles.
std::string to_binary(const DensityMatrix& rho);
DenseMat matrix_from_binary(std::string_view bytes);

void write_density_json(const DensityMatrix& rho, const std::filesystem::path& path);
void write_density_binary(const DensityMatrix& rho, const std::filesystem::path& path);
// Reads either format, detected from the leading bytes. Binary files carry no
// subsystem structure and load as a single mode.
DensityMatrix read_density(const std::filesystem::path& path);

} // namespace sqzcat
