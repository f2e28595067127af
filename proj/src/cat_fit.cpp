#include "sqzcat/cat_fit.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace sqzcat {

void SdssParams::validate() const {
    if (!(std::abs(alpha) <= kMaxFitAlpha)) throw std::invalid_argument("|alpha| exceeds the fit box");
    if (!(std::abs(r) <= kMaxFitSqueeze)) throw std::invalid_argument("|r| exceeds the fit box");
}

SdssParams SdssParams::upper_half_plane() const {
    SdssParams out = *this;
    if (alpha.imag() < 0.0 || (alpha.imag() == 0.0 && alpha.real() < 0.0)) out.alpha = -alpha;
    return out;
}

namespace {

DenseMat ladder(int dim) {
    DenseMat a = DenseMat::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

// exp(G) for anti-Hermitian G: with H = i G Hermitian, exp(G) = V exp(-i w) V^dag.
DenseMat exp_anti_hermitian(const DenseMat& g) {
    const DenseMat h = Complex(0.0, 1.0) * g;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (h + h.adjoint())));
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const Eigen::VectorXcd phases = (Complex(0.0, -1.0) * es.eigenvalues().cast<Complex>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

DenseMat displacement(Complex alpha, int dim) {
    if (dim < 2) throw TruncationError("displacement needs dim >= 2");
    if (std::norm(alpha) > dim - 3) {
        std::ostringstream msg;
        msg << "|alpha|^2 = " << std::norm(alpha) << " is within 3 of the cutoff " << dim;
        throw TruncationError(msg.str());
    }
    const DenseMat a = ladder(dim);
    return exp_anti_hermitian(alpha * a.adjoint() - std::conj(alpha) * a);
}

DenseMat squeeze(double r, int dim) {
    if (dim < 4 || dim < 10.0 + 10.0 * std::abs(r)) {
        std::ostringstream msg;
        msg << "squeeze(r = " << r << ") needs dim >= max(4, 10 + 10|r|), got " << dim;
        throw TruncationError(msg.str());
    }
    const DenseMat a = ladder(dim);
    const DenseMat ad = a.adjoint();
    return exp_anti_hermitian(0.5 * r * (ad * ad - a * a));
}

DenseVec sdss_vector(const SdssParams& p, int dim) {
    const DenseVec s = squeeze(p.r, dim).col(0);
    const DenseMat d = displacement(p.alpha, dim);
    // D(-alpha) = D(alpha)^dag for the unitary truncated exponential.
    DenseVec psi = d * s + d.adjoint() * s;
    const double norm = psi.norm();
    if (!(norm > 1e-12)) throw std::runtime_error("SDSS superposition vanishes");
    return psi / norm;
}

DensityMatrix sdss_state(const SdssParams& p, int dim) {
    return DensityMatrix::pure(HilbertSpec::mode(dim), sdss_vector(p, dim));
}

namespace {

Eigen::VectorXd clamped(const Eigen::VectorXd& w, const char* what) {
    Eigen::VectorXd out = w;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) < -kEigenClampTol) {
            std::ostringstream msg;
            msg << what << " has eigenvalue " << w(i) << " below " << -kEigenClampTol;
            throw FockError(msg.str());
        }
        out(i) = std::max(0.0, w(i));
    }
    return out;
}

} // namespace

double fidelity(const DenseMat& rho1, const DenseMat& rho2) {
    if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols()) throw FockError("fidelity: shape mismatch");
    const Eigen::MatrixXcd m1 = 0.5 * (rho1 + rho1.adjoint());
    const Eigen::MatrixXcd m2 = 0.5 * (rho2 + rho2.adjoint());
    clamped(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(m2, Eigen::EigenvaluesOnly).eigenvalues(), "second state");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es1(m1);
    const Eigen::VectorXd w1 = clamped(es1.eigenvalues(), "first state").cwiseSqrt();
    const Eigen::MatrixXcd sqrt1 = es1.eigenvectors() * w1.cast<Complex>().asDiagonal() * es1.eigenvectors().adjoint();
    Eigen::MatrixXcd inner = sqrt1 * m2 * sqrt1;
    inner = 0.5 * (inner + inner.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(inner, Eigen::EigenvaluesOnly);
    const double root_sum = clamped(es.eigenvalues(), "sqrt(rho1) rho2 sqrt(rho1)").cwiseSqrt().sum();
    return std::clamp(root_sum * root_sum, 0.0, 1.0);
}

double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (!(rho1.space() == rho2.space())) throw FockError("fidelity: states live on different spaces");
    return fidelity(rho1.matrix(), rho2.matrix());
}

double pure_fidelity(const DenseVec& psi, const DenseMat& rho) {
    if (psi.size() != rho.rows()) throw FockError("fidelity: shape mismatch");
    return std::clamp((psi.adjoint() * rho * psi)(0, 0).real(), 0.0, 1.0);
}

int fit_dimension(int dim) { return std::max(dim + 8, 25); }

double FitResult::root_fidelity() const { return std::sqrt(std::max(0.0, fidelity)); }

nlohmann::json FitResult::to_json() const {
    return {{"alpha_re", params.alpha.real()},
            {"alpha_im", params.alpha.imag()},
            {"r", params.r},
            {"xi", xi()},
            {"fidelity", fidelity},
            {"root_fidelity", root_fidelity()},
            {"iterations", iterations},
            {"converged", converged},
            {"grid_fidelity", grid_fidelity},
            {"working_dim", working_dim}};
}

namespace {

struct Objective {
    const DenseMat* rho = nullptr;
    int dim = 0;

    // Fidelity, or -1 where the parameters leave the fit box.
    double operator()(const SdssParams& p) const {
        if (!(std::abs(p.alpha) <= kMaxFitAlpha) || !(std::abs(p.r) <= kMaxFitSqueeze)) return -1.0;
        try {
            return pure_fidelity(sdss_vector(p, dim), *rho);
        } catch (const TruncationError&) {
            return -1.0;
        }
    }
};

double gsl_cost(const gsl_vector* v, void* data) {
    const auto* obj = static_cast<const Objective*>(data);
    const SdssParams p{Complex(gsl_vector_get(v, 0), gsl_vector_get(v, 1)), gsl_vector_get(v, 2)};
    return 1.0 - (*obj)(p);
}

struct GslDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

} // namespace

FitResult fit_sdss(const DensityMatrix& rho_v, const FitOptions& options) {
    if (rho_v.space().size() != 1) throw FockError("fit_sdss needs a single-mode state");
    FitResult result;
    result.working_dim = fit_dimension(rho_v.dim());
    DenseMat padded = DenseMat::Zero(result.working_dim, result.working_dim);
    padded.topLeftCorner(rho_v.dim(), rho_v.dim()) = rho_v.matrix();
    const Objective objective{&padded, result.working_dim};

    const int n_im = static_cast<int>(std::floor((options.alpha_im_max - options.alpha_im_min) / options.alpha_im_step + 1e-9)) + 1;
    const int n_r = static_cast<int>(std::floor((options.r_max - options.r_min) / options.r_step + 1e-9)) + 1;
    result.grid_fidelity = -1.0;
    for (int i = 0; i < n_im; ++i) {
        for (int j = 0; j < n_r; ++j) {
            const SdssParams p{Complex(0.0, options.alpha_im_min + i * options.alpha_im_step),
                               options.r_min + j * options.r_step};
            const double f = objective(p);
            if (f > result.grid_fidelity) {
                result.grid_fidelity = f;
                result.grid_params = p;
            }
        }
    }

    gsl_set_error_handler_off();
    std::unique_ptr<gsl_vector, GslDeleter> x(gsl_vector_alloc(3));
    std::unique_ptr<gsl_vector, GslDeleter> step(gsl_vector_alloc(3));
    gsl_vector_set(x.get(), 0, result.grid_params.alpha.real());
    gsl_vector_set(x.get(), 1, result.grid_params.alpha.imag());
    gsl_vector_set(x.get(), 2, result.grid_params.r);
    gsl_vector_set_all(step.get(), options.initial_step);

    gsl_multimin_function fn{&gsl_cost, 3, const_cast<Objective*>(&objective)};
    std::unique_ptr<gsl_multimin_fminimizer, GslDeleter> nm(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3));
    gsl_multimin_fminimizer_set(nm.get(), &fn, x.get(), step.get());

    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && result.iterations < options.max_iterations) {
        ++result.iterations;
        if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), options.simplex_size);
    }
    result.converged = status == GSL_SUCCESS;

    const gsl_vector* best = gsl_multimin_fminimizer_x(nm.get());
    SdssParams refined{Complex(gsl_vector_get(best, 0), gsl_vector_get(best, 1)), gsl_vector_get(best, 2)};
    const double refined_f = objective(refined);
    // Never report worse than the grid optimum.
    if (refined_f >= result.grid_fidelity) {
        result.params = refined.upper_half_plane();
        result.fidelity = refined_f;
    } else {
        result.params = result.grid_params;
        result.fidelity = result.grid_fidelity;
    }
    return result;
}

} // namespace sqzcat
