#pragma once

// Shared helpers and independent oracles for the test binaries. Nothing here
// calls into the library's numerics beyond plain types.

#include "sqzcat/fock.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace sqzcat::testing {

inline DenseMat random_matrix(int d, std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    DenseMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = Complex(n(rng), n(rng));
    return m;
}

// G G^dag / Tr, full rank with probability one.
inline DenseMat random_density(int d, std::mt19937& rng) {
    const DenseMat g = random_matrix(d, rng);
    DenseMat rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

inline DenseMat random_hermitian(int d, std::mt19937& rng) {
    const DenseMat g = random_matrix(d, rng);
    return 0.5 * (g + g.adjoint());
}

inline DenseVec random_vector(int d, std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    DenseVec v(d);
    for (int i = 0; i < d; ++i) v(i) = Complex(n(rng), n(rng));
    return v / v.norm();
}

// Element-by-element evaluation of
//   -i [H, rho] + sum_k (1/2)(2 J rho J^dag - J^dag J rho - rho J^dag J)
// with explicit index sums and no matrix products.
inline DenseMat liouvillian_elementwise(const DenseMat& h, const std::vector<DenseMat>& jumps, const DenseMat& rho) {
    const Eigen::Index d = rho.rows();
    DenseMat out = DenseMat::Zero(d, d);
    for (Eigen::Index m = 0; m < d; ++m) {
        for (Eigen::Index n = 0; n < d; ++n) {
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) acc += -kI * (h(m, k) * rho(k, n) - rho(m, k) * h(k, n));
            for (const DenseMat& j : jumps) {
                for (Eigen::Index k = 0; k < d; ++k) {
                    for (Eigen::Index l = 0; l < d; ++l) {
                        acc += j(m, k) * rho(k, l) * std::conj(j(n, l));
                        // (J^dag J)_{mk} = sum_l conj(J_{lm}) J_{lk}
                        acc -= 0.5 * std::conj(j(l, m)) * j(l, k) * rho(k, n);
                        acc -= 0.5 * rho(m, k) * std::conj(j(l, k)) * j(l, n);
                    }
                }
            }
            out(m, n) = acc;
        }
    }
    return out;
}

// Steady-state moments n = <a^dag a>, m = <a^2> of the linear DPA
//   dn/dt = -2 kappa n + 2 lambda m,   dm/dt = -2 kappa m + lambda (2 n + 1)
// (real m), solved as a 2x2 linear system.
struct DpaMoments {
    double n = 0.0;
    double m = 0.0;
};

inline DpaMoments dpa_moments(double lambda, double kappa = 1.0) {
    Eigen::Matrix2d a;
    a << -2.0 * kappa, 2.0 * lambda, 2.0 * lambda, -2.0 * kappa;
    const Eigen::Vector2d rhs(0.0, -lambda);
    const Eigen::Vector2d x = a.fullPivLu().solve(rhs);
    return {x(0), x(1)};
}

// Moments of the temporal mode A = int v(t) a_out(t) dt for the ε = 0 DPA
// output (a_out = sqrt(2 kappa) a in the stationary state) and a normalized
// Gaussian v of width tau. Two-time functions from the regression theorem,
//   <a^dag(0) a(T)> = e^{-kappa T}(n cosh(lambda T) + m sinh(lambda T))
//   <a(T) a(0)>     = e^{-kappa T}(m cosh(lambda T) + n sinh(lambda T)),
// weighted by the filter autocorrelation int v(t) v(t + T) dt = exp(-2 T^2 / tau^2).
struct ModeMoments {
    double number = 0.0; // <A^dag A>
    double pair = 0.0;   // <A A>
};

inline ModeMoments gaussian_mode_moments(double lambda, double tau, double kappa = 1.0) {
    const DpaMoments s = dpa_moments(lambda, kappa);
    const double upper = 8.0 * tau;
    const int steps = 200000; // Simpson, even
    const double h = upper / steps;
    double sum_n = 0.0, sum_m = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double t = i * h;
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double env = std::exp(-kappa * t - 2.0 * t * t / (tau * tau));
        sum_n += w * env * (s.n * std::cosh(lambda * t) + s.m * std::sinh(lambda * t));
        sum_m += w * env * (s.m * std::cosh(lambda * t) + s.n * std::sinh(lambda * t));
    }
    // Symmetric kernels: int over T in (-inf, inf) = 2 int_0^inf.
    return {2.0 * kappa * 2.0 * sum_n * h / 3.0, 2.0 * kappa * 2.0 * sum_m * h / 3.0};
}

// Fock amplitudes of exp(r (a^dag^2 - a^2) / 2)|0>:
//   c_{2m} = (tanh r)^m sqrt((2m)!) / (2^m m! sqrt(cosh r)).
inline DenseVec squeezed_vacuum_closed_form(double r, int dim) {
    DenseVec c = DenseVec::Zero(dim);
    for (int m = 0; 2 * m < dim; ++m) {
        const double log_mag = 0.5 * std::lgamma(2.0 * m + 1.0) - m * std::log(2.0) - std::lgamma(m + 1.0);
        c(2 * m) = std::pow(std::tanh(r), m) * std::exp(log_mag) / std::sqrt(std::cosh(r));
    }
    return c;
}

// e^{-|alpha|^2/2} alpha^n / sqrt(n!)
inline DenseVec coherent_closed_form(Complex alpha, int dim) {
    DenseVec c(dim);
    for (int n = 0; n < dim; ++n)
        c(n) = std::exp(-0.5 * std::norm(alpha)) * std::pow(alpha, n) / std::sqrt(std::tgamma(n + 1.0));
    return c;
}

inline DenseMat projector(const DenseVec& psi) { return psi * psi.adjoint(); }

} // namespace sqzcat::testing
