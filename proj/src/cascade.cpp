#include "sqzcat/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sqzcat {

void PhysicalParams::validate() const {
    if (kappa != 1.0) throw ConfigError("kappa is the unit scale and must be 1");
    if (!(lambda >= 0.0) || !(lambda < kappa)) throw ConfigError("lambda must satisfy 0 <= lambda < kappa");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!std::isfinite(delta_a)) throw ConfigError("delta_a must be finite");
}

Cutoffs default_cutoffs(double lambda) {
    Cutoffs c;
    c.n_dpa = static_cast<int>(std::ceil(10.0 + 45.0 * lambda - 1e-9));
    // a flat N_v = 10 leaves top-level occupations above 1e-5 from
    // lambda = 0.2 on; these values pass the adequacy check at the table rows
    if (lambda <= 0.1 + 1e-12)
        c.n_v = 10;
    else if (lambda <= 0.2 + 1e-12)
        c.n_v = 12;
    else if (lambda <= 0.3 + 1e-12)
        c.n_v = 16;
    else
        c.n_v = 24;
    return c;
}

HilbertSpec source_space(int n_dpa) {
    return HilbertSpec({{SubsystemKind::Mode, n_dpa}, {SubsystemKind::Qubit, 2}});
}

HilbertSpec capture_space(int n_dpa, int n_v) {
    return source_space(n_dpa).appended({SubsystemKind::Mode, n_v});
}

// --- filter ------------------------------------------------------------------

FilterSpec FilterSpec::from_tau(double tau) { return FilterSpec{tau, 2.0 * tau, 4.0 * tau}; }

FilterSpec FilterSpec::from_fwhm(double t_v) { return from_tau(t_v / std::sqrt(std::numbers::ln2)); }

double FilterSpec::fwhm() const { return tau * std::sqrt(std::numbers::ln2); }

void FilterSpec::validate() const {
    if (!(tau > 0.0)) throw ConfigError("filter width must be positive");
    if (!(t0 > 0.0 && t0 < t_end)) throw ConfigError("filter center must lie inside the capture window");
    const double norm = filter_cumulative_norm(*this, t_end);
    if (std::abs(norm - 1.0) > 1e-9) throw ConfigError("capture window truncates the filter norm");
}

double gaussian_filter(const FilterSpec& f, double t) {
    const double peak = std::pow(8.0 / (std::numbers::pi * f.tau * f.tau), 0.25);
    const double u = (t - f.t0) / (0.5 * f.tau);
    return peak * std::exp(-u * u);
}

double filter_cumulative_norm(const FilterSpec& f, double t) {
    // |v|^2 is a normal density with sigma = tau / 4; use erfc on both tails
    // so the early-time tail keeps full relative precision.
    const double s = 2.0 * std::numbers::sqrt2 / f.tau;
    const double lead = 0.5 * std::erfc(s * f.t0); // mass before t = 0
    if (t <= f.t0) return 0.5 * std::erfc(s * (f.t0 - t)) - lead;
    return 1.0 - 0.5 * std::erfc(s * (t - f.t0)) - lead;
}

Complex capture_coupling(Complex v, double cumulative_norm) {
    if (cumulative_norm < kCouplingThreshold) return 0.0;
    return -std::conj(v) / std::sqrt(cumulative_norm);
}

Complex capture_coupling(const FilterSpec& f, double t) {
    return capture_coupling(Complex(gaussian_filter(f, t), 0.0), filter_cumulative_norm(f, t));
}

double coupling_activation_time(const FilterSpec& f) {
    // Bisect down to adjacent doubles: g is zero at lo and active at hi.
    double lo = 0.0;
    double hi = f.t0;
    if (filter_cumulative_norm(f, lo) >= kCouplingThreshold) return lo;
    while (std::nextafter(lo, hi) < hi) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (filter_cumulative_norm(f, mid) < kCouplingThreshold ? lo : hi) = mid;
    }
    return hi;
}

// --- static model ------------------------------------------------------------

namespace {

void require_source(const HilbertSpec& space) {
    if (space.size() < 2 || space.kind(kDpaIndex) != SubsystemKind::Mode ||
        space.kind(kTlsIndex) != SubsystemKind::Qubit)
        throw FockError("model space must be (DPA mode, TLS[, capture mode])");
    if (space.dim(kDpaIndex) < 2) throw FockError("DPA cutoff must be at least 2");
}

} // namespace

Operator build_hamiltonian(const PhysicalParams& p, const HilbertSpec& space) {
    require_source(space);
    const Operator a = annihilation(space, kDpaIndex);
    const Operator ad = a.adjoint();
    const Operator sm = tls_lower(space, kTlsIndex);
    const Operator sp = sm.adjoint();

    Operator h = Complex(0.0, 0.5 * p.lambda) * (ad * ad - a * a);
    h += p.delta_a * (sp * sm);
    const double g = 0.5 * std::sqrt(2.0 * p.kappa * p.epsilon * p.gamma);
    h += Complex(0.0, g) * (ad * sm - a * sp);
    return Operator(space, h.matrix(), true);
}

CascadeOperators build_jumps(const PhysicalParams& p, const HilbertSpec& space) {
    require_source(space);
    const Operator a = annihilation(space, kDpaIndex);
    const Operator sm = tls_lower(space, kTlsIndex);
    CascadeOperators ops;
    ops.j_out = std::sqrt(2.0 * p.kappa) * a + std::sqrt(p.epsilon * p.gamma) * sm;
    ops.j_a = std::sqrt((1.0 - p.epsilon) * p.gamma) * sm;
    if (space.size() > kCaptureIndex) ops.capture_mode = kCaptureIndex;
    return ops;
}

CascadeOperators build_cascade(const PhysicalParams& p, const HilbertSpec& space) {
    CascadeOperators ops = build_jumps(p, space);
    ops.h_static = build_hamiltonian(p, space);
    return ops;
}

CascadeTerms cascade_compose(const Operator& upstream, const Operator& downstream) {
    Operator h = Complex(0.0, 0.5) * (upstream.adjoint() * downstream - downstream.adjoint() * upstream);
    return {Operator(h.space(), h.matrix(), true), upstream + downstream};
}

// --- time-dependent operators -----------------------------------------------

void SparseCombination::add(const SparseOp& term, Coefficient coefficient) {
    if (raw_.empty() && rows_ == 0 && cols_ == 0) {
        rows_ = static_cast<int>(term.rows());
        cols_ = static_cast<int>(term.cols());
    }
    if (term.rows() != rows_ || term.cols() != cols_) throw FockError("combination terms differ in shape");
    raw_.push_back(term);
    coefficients_.push_back(std::move(coefficient));

    // Shared pattern = union of all term patterns; Eigen keeps explicit zeros
    // from a sum, so term + 0 * pattern has exactly the union structure.
    SparseOp pattern(rows_, cols_);
    for (const auto& t : raw_) {
        SparseOp ones = t;
        for (Eigen::Index k = 0; k < ones.nonZeros(); ++k) ones.valuePtr()[k] = 1.0;
        pattern = pattern + ones;
    }
    pattern.makeCompressed();
    aligned_.clear();
    for (const auto& t : raw_) {
        SparseOp aligned = t + Complex(0.0) * pattern;
        aligned.makeCompressed();
        if (aligned.nonZeros() != pattern.nonZeros()) throw FockError("pattern alignment failed");
        aligned_.push_back(std::move(aligned));
    }
}

void SparseCombination::evaluate(double t, SparseOp& out) const {
    if (aligned_.empty()) {
        out.resize(rows_, cols_);
        out.setZero();
        return;
    }
    const SparseOp& first = aligned_.front();
    if (out.nonZeros() != first.nonZeros() || out.rows() != first.rows() || out.cols() != first.cols())
        out = first;
    const auto nnz = static_cast<std::size_t>(first.nonZeros());
    Complex* dst = out.valuePtr();
    std::fill(dst, dst + nnz, Complex(0.0));
    for (std::size_t i = 0; i < aligned_.size(); ++i) {
        const Complex c = coefficients_[i] ? coefficients_[i](t) : Complex(1.0);
        if (c == Complex(0.0)) continue;
        const Complex* src = aligned_[i].valuePtr();
        for (std::size_t k = 0; k < nnz; ++k) dst[k] += c * src[k];
    }
}

bool SparseCombination::is_static() const {
    for (const auto& c : coefficients_)
        if (c) return false;
    return true;
}

TimeDependentOperator::TimeDependentOperator(const Operator& constant) { add_term(constant, {}); }

void TimeDependentOperator::add_term(const Operator& term, Coefficient coefficient) {
    if (raw_.empty()) {
        space_ = term.space();
        combination_ = SparseCombination(space_.total_dim(), space_.total_dim());
    } else if (!(term.space() == space_)) {
        throw FockError("time-dependent operator terms live on different spaces");
    }
    raw_.push_back(term);
    combination_.add(term.matrix(), std::move(coefficient));
}

Operator TimeDependentOperator::at(double t) const {
    SparseOp m;
    evaluate(t, m);
    return Operator(space_, m.pruned());
}

// --- capture extension -------------------------------------------------------

CaptureFamily::CaptureFamily(const CascadeOperators& ops, CouplingFn coupling,
                             const HilbertSpec& space_with_b)
    : coupling_(std::move(coupling)), space_(space_with_b) {
    if (space_with_b.size() <= kCaptureIndex || space_with_b.kind(kCaptureIndex) != SubsystemKind::Mode)
        throw FockError("capture space lacks a capture mode");
    ops_.h_static = extend(ops.h_static, space_);
    ops_.j_out = extend(ops.j_out, space_);
    ops_.j_a = extend(ops.j_a, space_);
    ops_.capture_mode = kCaptureIndex;
    b_ = annihilation(space_, kCaptureIndex);
}

Operator CaptureFamily::hamiltonian(double t) const {
    const Complex g = coupling_(t);
    Operator h = ops_.h_static;
    if (g != Complex(0.0)) {
        h += Complex(0.0, 0.5) *
             (std::conj(g) * (ops_.j_out.adjoint() * b_) - g * (b_.adjoint() * ops_.j_out));
    }
    return Operator(space_, h.matrix(), true);
}

Operator CaptureFamily::jump(double t) const { return ops_.j_out + std::conj(coupling_(t)) * b_; }

TimeDependentOperator CaptureFamily::hamiltonian_family() const {
    TimeDependentOperator h(ops_.h_static);
    auto g = coupling_;
    h.add_term(Complex(0.0, 0.5) * (ops_.j_out.adjoint() * b_), [g](double t) { return std::conj(g(t)); });
    h.add_term(Complex(0.0, -0.5) * (b_.adjoint() * ops_.j_out), [g](double t) { return g(t); });
    return h;
}

TimeDependentOperator CaptureFamily::jump_family() const {
    TimeDependentOperator j(ops_.j_out);
    auto g = coupling_;
    j.add_term(b_, [g](double t) { return std::conj(g(t)); });
    return j;
}

TimeDependentOperator CaptureFamily::effective_hamiltonian_family() const {
    const Operator& jo = ops_.j_out;
    const Operator& ja = ops_.j_a;
    Operator k0 = ops_.h_static - Complex(0.0, 0.5) * (jo.adjoint() * jo + ja.adjoint() * ja);
    TimeDependentOperator h(k0);
    auto g = coupling_;
    h.add_term(Complex(0.0, -1.0) * (b_.adjoint() * jo), [g](double t) { return g(t); });
    h.add_term(Complex(0.0, -0.5) * (b_.adjoint() * b_), [g](double t) { return Complex(std::norm(g(t))); });
    return h;
}

CaptureFamily extend_with_capture(const CascadeOperators& ops, const FilterSpec& f,
                                  const HilbertSpec& space_with_b) {
    return CaptureFamily(ops, [f](double t) { return capture_coupling(f, t); }, space_with_b);
}

} // namespace sqzcat
