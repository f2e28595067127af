#include "sqzcat/cat_fit.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace sqzcat;
using namespace sqzcat::testing;

namespace {

DenseMat identity(int d) { return DenseMat::Identity(d, d); }

DenseMat ladder(int d) {
    DenseMat a = DenseMat::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

// Variance of (e^{-i phi} a + e^{i phi} a^dag) / 2 in |psi>.
double quadrature_variance(const DenseVec& psi, double phi) {
    const DenseMat a = ladder(static_cast<int>(psi.size()));
    const Complex ph = std::polar(1.0, phi);
    const DenseMat q = 0.5 * (std::conj(ph) * a + ph * a.adjoint());
    const double mean = (psi.adjoint() * q * psi)(0, 0).real();
    const double second = (psi.adjoint() * q * q * psi)(0, 0).real();
    return second - mean * mean;
}

DenseVec parity_diag(int d) {
    DenseVec p(d);
    for (int n = 0; n < d; ++n) p(n) = (n % 2) ? -1.0 : 1.0;
    return p;
}

} // namespace

TEST(Displacement, IdentityAndCoherentAmplitudes) {
    EXPECT_LE(max_abs(displacement(0.0, 12) - identity(12)), 1e-14);
    const Complex alpha(0.8, 0.3);
    const DenseVec col = displacement(alpha, 40).col(0);
    const DenseVec ref = coherent_closed_form(alpha, 40);
    EXPECT_LE((col.head(20) - ref.head(20)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Displacement, GroupInverseAndUnitarity) {
    for (Complex alpha : {Complex(0.5, 0.0), Complex(0.3, -1.1), Complex(-1.5, 0.7)}) {
        const DenseMat d = displacement(alpha, 30);
        EXPECT_LE(max_abs(d * displacement(-alpha, 30) - identity(30)), 1e-8);
        EXPECT_LE(max_abs(d.adjoint() * d - identity(30)), 1e-8);
    }
}

TEST(Displacement, TruncationGuard) {
    EXPECT_THROW(displacement(Complex(2.0, 0.0), 6), TruncationError);
    EXPECT_NO_THROW(displacement(Complex(2.0, 0.0), 7));
    EXPECT_THROW(displacement(0.1, 1), TruncationError);
}

TEST(Squeeze, IdentityAndEvenComponents) {
    EXPECT_LE(max_abs(squeeze(0.0, 12) - identity(12)), 1e-14);
    const DenseVec s = squeeze(0.6, 30).col(0);
    for (int n = 1; n < 30; n += 2) EXPECT_EQ(s(n), Complex(0.0)) << n;
}

TEST(Squeeze, AmplitudesMatchClosedForm) {
    for (double r : {0.3, -0.5, 1.0}) {
        const int dim = 60;
        const DenseVec s = squeeze(r, dim).col(0);
        const DenseVec ref = squeezed_vacuum_closed_form(r, dim);
        EXPECT_LE((s.head(20) - ref.head(20)).cwiseAbs().maxCoeff(), 1e-8) << r;
    }
    // c_2 = tanh(r) / (sqrt(2) sqrt(cosh r)) for the generator r (a^dag^2 - a^2) / 2
    const double r = 0.3;
    EXPECT_NEAR(squeeze(r, 40)(2, 0).real(), std::tanh(r) / (std::sqrt(2.0) * std::sqrt(std::cosh(r))), 1e-10);
    EXPECT_GT(squeeze(r, 40)(2, 0).real(), 0.0);
}

TEST(Squeeze, VarianceLaw) {
    const double r = 0.3;
    const DenseVec s = squeeze(r, 40).col(0);
    // positive r stretches X and squeezes Y
    EXPECT_NEAR(quadrature_variance(s, 0.0), 0.25 * std::exp(2.0 * r), 1e-6);
    EXPECT_NEAR(quadrature_variance(s, std::numbers::pi / 2), 0.25 * std::exp(-2.0 * r), 1e-6);
}

TEST(Squeeze, UnitarityAndGuard) {
    EXPECT_LE(max_abs(squeeze(-1.2, 30).adjoint() * squeeze(-1.2, 30) - identity(30)), 1e-8);
    EXPECT_THROW(squeeze(0.5, 14), TruncationError);
    EXPECT_NO_THROW(squeeze(0.5, 15));
    EXPECT_THROW(squeeze(0.0, 3), TruncationError);
}

TEST(Sdss, ReducesToSqueezedVacuumAndCat) {
    const DenseVec sv = sdss_vector({0.0, -0.4}, 30);
    EXPECT_NEAR(std::abs(sv.dot(squeeze(-0.4, 30).col(0))), 1.0, 1e-12);

    const DenseVec cat = sdss_vector({1.0, 0.0}, 30);
    for (int n = 1; n < 30; n += 2) EXPECT_LE(std::abs(cat(n)), 1e-10);
    DenseVec ref = coherent_closed_form(1.0, 30) + coherent_closed_form(-1.0, 30);
    ref /= ref.norm();
    EXPECT_NEAR(std::abs(cat.dot(ref)), 1.0, 1e-10);
}

TEST(Sdss, EvenParityAndNormalization) {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        const SdssParams p{Complex(1.2 * u(rng), 1.2 * u(rng)), 0.8 * u(rng)};
        const DensityMatrix rho = sdss_state(p, 30);
        const DenseVec par = parity_diag(30);
        EXPECT_NEAR((rho.matrix().diagonal().array() * par.array()).sum().real(), 1.0, 1e-10);
        EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
        const DenseVec psi = sdss_vector(p, 30);
        for (int n = 1; n < 30; n += 2) EXPECT_LE(std::abs(psi(n)), 1e-10);
    }
}

TEST(Sdss, SignOfAlphaIsIrrelevant) {
    const SdssParams p{Complex(0.3, 0.8), -0.3};
    const SdssParams q{-p.alpha, p.r};
    EXPECT_NEAR(fidelity(sdss_state(p, 30), sdss_state(q, 30)), 1.0, 1e-10);
}

TEST(SdssParams, FitBox) {
    EXPECT_NO_THROW((SdssParams{Complex(0.0, 3.0), 1.5}.validate()));
    EXPECT_THROW((SdssParams{Complex(0.0, 3.1), 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((SdssParams{0.0, -1.6}.validate()), std::invalid_argument);
    const SdssParams up = SdssParams{Complex(0.2, -0.5), 0.1}.upper_half_plane();
    EXPECT_EQ(up.alpha, Complex(-0.2, 0.5));
}

TEST(Fidelity, BasicValues) {
    const HilbertSpec m = HilbertSpec::mode(3);
    const DensityMatrix zero = DensityMatrix::basis_state(m, 0);
    const DensityMatrix one = DensityMatrix::basis_state(m, 1);
    DenseVec plus = DenseVec::Zero(3);
    plus(0) = plus(1) = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(fidelity(zero, zero), 1.0, 1e-12);
    EXPECT_NEAR(fidelity(zero, DensityMatrix::pure(m, plus)), 0.5, 1e-12);
    EXPECT_NEAR(fidelity(zero, one), 0.0, 1e-12);

    std::mt19937 rng(10);
    const DenseVec psi = random_vector(5, rng), phi = random_vector(5, rng);
    EXPECT_NEAR(fidelity(projector(psi), projector(phi)), std::norm(psi.dot(phi)), 1e-8);
    EXPECT_NEAR(pure_fidelity(psi, projector(phi)), std::norm(psi.dot(phi)), 1e-12);
}

TEST(Fidelity, SelfSymmetryAndRange) {
    std::mt19937 rng(19);
    for (int k = 0; k < 5; ++k) {
        const DenseMat a = random_density(6, rng), b = random_density(6, rng);
        EXPECT_NEAR(fidelity(a, a), 1.0, 1e-8);
        const double fab = fidelity(a, b);
        EXPECT_NEAR(fab, fidelity(b, a), 1e-8);
        EXPECT_GE(fab, 0.0);
        EXPECT_LE(fab, 1.0);
    }
}

TEST(Fidelity, ClampsOnlyTinyNegatives) {
    DenseMat tiny = DenseMat::Zero(2, 2);
    tiny(0, 0) = 1.0 + 1e-9;
    tiny(1, 1) = -1e-9;
    EXPECT_NO_THROW(fidelity(tiny, DenseMat::Identity(2, 2) / 2.0));
    DenseMat bad = tiny;
    bad(0, 0) = 1.0 + 1e-6;
    bad(1, 1) = -1e-6;
    EXPECT_THROW(fidelity(bad, DenseMat::Identity(2, 2) / 2.0), FockError);
    EXPECT_THROW(fidelity(DenseMat::Identity(2, 2) / 2.0, bad), FockError);
    EXPECT_THROW(fidelity(DenseMat::Identity(2, 2), DenseMat::Identity(3, 3)), FockError);
}

TEST(Fidelity, MonotoneUnderMixingTowardTarget) {
    std::mt19937 rng(23);
    const DenseMat target = sdss_state({Complex(0.0, 0.7), -0.2}, 20).matrix();
    const DenseMat other = random_density(20, rng);
    double prev = -1.0;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double f = fidelity(t * target + (1.0 - t) * other, target);
        EXPECT_GE(f, prev - 1e-12) << t;
        prev = f;
    }
    EXPECT_NEAR(prev, 1.0, 1e-8);
}

TEST(FitSdss, SelfRecovery) {
    const SdssParams truth{Complex(0.0, 0.7), -0.2};
    const FitResult r = fit_sdss(sdss_state(truth, 20));
    EXPECT_NEAR(r.params.alpha.real(), 0.0, 0.01);
    EXPECT_NEAR(r.params.alpha.imag(), 0.7, 0.01);
    EXPECT_NEAR(r.params.r, -0.2, 0.01);
    EXPECT_GT(r.fidelity, 0.9999);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.working_dim, 28);
    EXPECT_GE(r.fidelity, r.grid_fidelity);
}

TEST(FitSdss, RefinementLeavesTheImaginaryAxis) {
    const SdssParams truth{Complex(0.25, 0.6), 0.1};
    const FitResult r = fit_sdss(sdss_state(truth, 24));
    EXPECT_NEAR(r.params.alpha.real(), 0.25, 0.01);
    EXPECT_NEAR(r.params.alpha.imag(), 0.6, 0.01);
    EXPECT_NEAR(r.params.r, 0.1, 0.01);
    EXPECT_GT(r.fidelity, 0.9999);
}

TEST(FitSdss, NeverWorseThanAnyGridPoint) {
    std::mt19937 rng(77);
    // a generic mixed even-parity state
    DenseMat rho = 0.7 * sdss_state({Complex(0.0, 0.9), -0.3}, 16).matrix() + 0.3 * random_density(16, rng);
    for (int m = 0; m < 16; ++m)
        for (int n = 0; n < 16; ++n)
            if ((m + n) % 2) rho(m, n) = 0.0;
    const DensityMatrix state(HilbertSpec::mode(16), rho);
    const FitOptions opt;
    const FitResult r = fit_sdss(state, opt);
    const int d = r.working_dim;
    DenseMat padded = DenseMat::Zero(d, d);
    padded.topLeftCorner(16, 16) = rho;
    double best_grid = 0.0;
    for (double im = 0.0; im <= 1.5 + 1e-9; im += 0.05)
        for (double rr = -1.2; rr <= 0.2 + 1e-9; rr += 0.05)
            best_grid = std::max(best_grid, pure_fidelity(sdss_vector({Complex(0.0, im), rr}, d), padded));
    EXPECT_GE(r.fidelity, best_grid - 1e-12);
    // general route: sqrt of round-off eigenvalues of a rank-1 product adds ~1e-8
    EXPECT_NEAR(r.fidelity, fidelity(sdss_state(r.params, d).matrix(), padded), 1e-7);
}

TEST(FitSdss, JsonFieldsAndConventions) {
    FitResult r;
    r.params = {Complex(0.01, 0.58), -0.06};
    r.fidelity = 0.81;
    r.iterations = 42;
    r.converged = true;
    const nlohmann::json j = r.to_json();
    for (const char* k : {"alpha_re", "alpha_im", "r", "fidelity", "iterations", "converged"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_NEAR(j.at("root_fidelity").get<double>(), 0.9, 1e-15);
    EXPECT_EQ(j.at("xi").get<double>(), 0.06);
    EXPECT_EQ(j.at("iterations").get<int>(), 42);
}

TEST(FitSdss, RejectsMultiModeInput) {
    EXPECT_THROW(fit_sdss(DensityMatrix::maximally_mixed(HilbertSpec({{SubsystemKind::Mode, 2}, {SubsystemKind::Mode, 2}}))),
                 FockError);
}
