#pragma once

// Superpositions of displaced squeezed states (SDSS)
//   |psi> = N (D(alpha) + D(-alpha)) S(r) |0>
// with D(alpha) = exp(alpha a^dag - alpha* a), S(r) = exp(r (a^dag^2 - a^2) / 2),
// and their fit to captured states by Uhlmann fidelity.

#include "sqzcat/fock.hpp"

#include <nlohmann/json.hpp>

namespace sqzcat {

class TruncationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaxFitAlpha = 3.0;
inline constexpr double kMaxFitSqueeze = 1.5;

struct SdssParams {
    Complex alpha = 0.0;
    double r = 0.0;

    // Throws std::invalid_argument outside |alpha| <= 3, |r| <= 1.5.
    void validate() const;
    // alpha -> -alpha so that Im alpha > 0 (or Re alpha >= 0 on the real axis).
    SdssParams upper_half_plane() const;
};

// Truncated exponentials, evaluated through the eigendecomposition of the
// Hermitian matrix i * generator.
// displacement requires dim >= 2 and |alpha|^2 <= dim - 3.
DenseMat displacement(Complex alpha, int dim);
// squeeze requires dim >= 4 and dim >= 10 + 10 |r|.
DenseMat squeeze(double r, int dim);

DenseVec sdss_vector(const SdssParams& p, int dim);
DensityMatrix sdss_state(const SdssParams& p, int dim);

inline constexpr double kEigenClampTol = 1e-8;

// (Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2 with eigenvalues in [-1e-8, 0)
// clamped to zero; anything more negative throws FockError.
double fidelity(const DenseMat& rho1, const DenseMat& rho2);
double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2);
// <psi|rho|psi>, the same quantity when one state is pure.
double pure_fidelity(const DenseVec& psi, const DenseMat& rho);

// Working cutoff for fits: rho_v is zero-padded to max(dim + 8, 25) so the
// squeeze headroom rule holds across the whole coarse grid.
int fit_dimension(int dim);

struct FitOptions {
    double alpha_im_min = 0.0;
    double alpha_im_max = 1.5;
    double alpha_im_step = 0.05;
    double r_min = -1.2;
    double r_max = 0.2;
    double r_step = 0.05;
    double simplex_size = 1e-4;
    double initial_step = 0.05;
    int max_iterations = 4000;
};

struct FitResult {
    SdssParams params;
    double fidelity = 0.0;      // squared (Uhlmann) form
    double grid_fidelity = 0.0; // best coarse-grid value
    SdssParams grid_params;
    int iterations = 0;
    bool converged = false;
    int working_dim = 0;

    // Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) without the square.
    double root_fidelity() const;
    // Squeeze parameter in the S(xi) = exp[(xi* a^2 - xi a^dag^2) / 2] sign
    // convention, xi = -r.
    double xi() const { return -params.r; }

    nlohmann::json to_json() const;
};

// Coarse grid over (Im alpha, r) with Re alpha = 0, then Nelder-Mead over
// (Re alpha, Im alpha, r).
FitResult fit_sdss(const DensityMatrix& rho_v, const FitOptions& options = {});

} // namespace sqzcat
