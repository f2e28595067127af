#include "sqzcat/dynamics.hpp"

#include <Eigen/SparseLU>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <system_error>
#include <thread>

namespace sqzcat {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0) || !(relax_dt > 0.0)) throw ConfigError("integrator step sizes must be positive");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("integrator tolerances must be positive");
    if (positivity_check_every < 0) throw ConfigError("positivity_check_every must be >= 0");
}

nlohmann::json IntegratorConfig::to_json() const {
    return {{"method", method == Method::Rk4 ? "rk4" : "rk45"},
            {"dt", dt},
            {"relax_dt", relax_dt},
            {"rtol", rtol},
            {"atol", atol},
            {"renormalize_trace", renormalize_trace},
            {"use_parity_sectors", use_parity_sectors}};
}

// --- MasterEquation ----------------------------------------------------------

// Sector decomposition of the generator. Sector s holds the basis indices
// `index[s]`; H_eff is block diagonal and each jump piece maps sector src to
// sector dst.
struct MasterEquation::Plan {
    struct JumpPiece {
        int src = 0;
        int dst = 0;
        SparseCombination op;
    };

    std::vector<std::vector<int>> index;
    std::vector<int> sector_of;
    std::vector<int> position;
    std::vector<SparseCombination> h_eff;
    std::vector<JumpPiece> pieces;

    // Scratch; see the thread-safety note on MasterEquation.
    mutable std::vector<SparseOp> h_now;
    mutable std::vector<SparseOp> piece_now;
    mutable DenseMat scratch;
    mutable DenseMat scratch_adj;

    int sectors() const { return static_cast<int>(index.size()); }
};

namespace {

using Plan = MasterEquation::Plan;

SparseOp sub_block(const SparseOp& m, const Plan& plan, int row_sector, int col_sector) {
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (int r = 0; r < m.outerSize(); ++r) {
        if (plan.sector_of[r] != row_sector) continue;
        for (SparseOp::InnerIterator it(m, r); it; ++it) {
            const auto c = static_cast<int>(it.col());
            if (plan.sector_of[c] != col_sector) continue;
            triplets.emplace_back(plan.position[r], plan.position[c], it.value());
        }
    }
    SparseOp out(static_cast<Eigen::Index>(plan.index[row_sector].size()),
                 static_cast<Eigen::Index>(plan.index[col_sector].size()));
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

SparseCombination restrict_combination(const SparseCombination& c, const Plan& plan, int row_sector,
                                       int col_sector) {
    SparseCombination out(static_cast<int>(plan.index[row_sector].size()),
                          static_cast<int>(plan.index[col_sector].size()));
    for (std::size_t k = 0; k < c.raw_terms().size(); ++k)
        out.add(sub_block(c.raw_terms()[k], plan, row_sector, col_sector), c.coefficients()[k]);
    return out;
}

std::shared_ptr<Plan> build_plan(const TimeDependentOperator& h_eff, const std::vector<TimeDependentOperator>& jumps,
                                 const std::vector<int>& labels, int n_sectors) {
    auto plan = std::make_shared<Plan>();
    const int d = static_cast<int>(labels.size());
    plan->index.resize(n_sectors);
    plan->sector_of = labels;
    plan->position.resize(d);
    for (int i = 0; i < d; ++i) {
        plan->position[i] = static_cast<int>(plan->index[labels[i]].size());
        plan->index[labels[i]].push_back(i);
    }
    for (int s = 0; s < n_sectors; ++s) plan->h_eff.push_back(restrict_combination(h_eff.combination(), *plan, s, s));
    for (const auto& j : jumps) {
        for (int src = 0; src < n_sectors; ++src) {
            for (int dst = 0; dst < n_sectors; ++dst) {
                SparseCombination piece = restrict_combination(j.combination(), *plan, dst, src);
                bool any = false;
                for (const auto& term : piece.raw_terms()) any = any || term.nonZeros() > 0;
                if (any) plan->pieces.push_back({src, dst, std::move(piece)});
            }
        }
    }
    plan->h_now.resize(n_sectors);
    plan->piece_now.resize(plan->pieces.size());
    return plan;
}

// Total excitation number mod 2 of every basis state.
std::vector<int> parity_labels(const HilbertSpec& space) {
    const int d = space.total_dim();
    std::vector<int> labels(d, 0);
    for (int i = 0; i < d; ++i) {
        int rem = i;
        int sum = 0;
        for (int k = space.size() - 1; k >= 0; --k) {
            sum += rem % space.dim(k);
            rem /= space.dim(k);
        }
        labels[i] = sum % 2;
    }
    return labels;
}

// +1: every nonzero preserves parity, -1: every nonzero flips it, 0: mixed.
// Zero matrices return `fallback`.
int parity_of(const std::vector<SparseOp>& terms, const std::vector<int>& labels, int fallback) {
    int kind = 0;
    for (const auto& m : terms)
        for (int r = 0; r < m.outerSize(); ++r)
            for (SparseOp::InnerIterator it(m, r); it; ++it) {
                if (it.value() == Complex(0.0)) continue;
                const int k = labels[r] == labels[it.col()] ? 1 : -1;
                if (kind == 0) kind = k;
                if (kind != k) return 0;
            }
    return kind == 0 ? fallback : kind;
}

void apply_plan(const Plan& plan, double t, const MasterEquation::Blocks& rho, MasterEquation::Blocks& out) {
    out.resize(plan.sectors());
    for (int s = 0; s < plan.sectors(); ++s) {
        plan.h_eff[s].evaluate(t, plan.h_now[s]);
        // -i H_eff rho + i rho H_eff^dag = A + A^dag with A = -i H_eff rho.
        plan.scratch.noalias() = plan.h_now[s] * rho[s];
        out[s].resize(rho[s].rows(), rho[s].cols());
        out[s].noalias() = Complex(0.0, -1.0) * plan.scratch + Complex(0.0, 1.0) * plan.scratch.adjoint();
    }
    for (std::size_t k = 0; k < plan.pieces.size(); ++k) {
        const auto& piece = plan.pieces[k];
        SparseOp& j = plan.piece_now[k];
        piece.op.evaluate(t, j);
        // J rho J^dag = J (J rho)^dag
        plan.scratch.noalias() = j * rho[piece.src];
        plan.scratch_adj = plan.scratch.adjoint();
        out[piece.dst].noalias() += j * plan.scratch_adj;
    }
}

} // namespace

MasterEquation::MasterEquation(TimeDependentOperator h_eff, std::vector<TimeDependentOperator> jumps)
    : space_(h_eff.space()) {
    for (const auto& j : jumps)
        if (!(j.space() == space_)) throw FockError("jump operator on a different space");
    full_ = build_plan(h_eff, jumps, std::vector<int>(space_.total_dim(), 0), 1);

    const auto labels = parity_labels(space_);
    bool sectored = parity_of(h_eff.combination().raw_terms(), labels, 1) == 1;
    for (const auto& j : jumps) sectored = sectored && parity_of(j.combination().raw_terms(), labels, -1) != 0;
    if (sectored) parity_ = build_plan(h_eff, jumps, labels, 2);
}

MasterEquation MasterEquation::lindblad(const TimeDependentOperator& hamiltonian,
                                        const std::vector<TimeDependentOperator>& jumps) {
    TimeDependentOperator h_eff;
    const auto& hraw = hamiltonian.raw_terms();
    const auto& hcoef = hamiltonian.coefficients();
    for (std::size_t k = 0; k < hraw.size(); ++k) h_eff.add_term(hraw[k], hcoef[k]);
    if (hraw.empty()) h_eff = TimeDependentOperator(Operator::zero(jumps.at(0).space()));

    // J^dag J = sum_{k,l} conj(c_k) c_l M_k^dag M_l
    for (const auto& j : jumps) {
        const auto& raw = j.raw_terms();
        const auto& coef = j.coefficients();
        for (std::size_t k = 0; k < raw.size(); ++k) {
            for (std::size_t l = 0; l < raw.size(); ++l) {
                Operator term = Complex(0.0, -0.5) * (raw[k].adjoint() * raw[l]);
                auto ck = coef[k];
                auto cl = coef[l];
                if (!ck && !cl) {
                    h_eff.add_term(term, {});
                } else {
                    h_eff.add_term(term, [ck, cl](double t) {
                        const Complex a = ck ? std::conj(ck(t)) : Complex(1.0);
                        const Complex b = cl ? cl(t) : Complex(1.0);
                        return a * b;
                    });
                }
            }
        }
    }
    return MasterEquation(std::move(h_eff), jumps);
}

MasterEquation MasterEquation::lindblad(const Operator& hamiltonian, std::span<const Operator> jumps) {
    std::vector<TimeDependentOperator> js;
    for (const auto& j : jumps) js.emplace_back(j);
    return lindblad(TimeDependentOperator(hamiltonian), js);
}

MasterEquation MasterEquation::capture(const CaptureFamily& family) {
    std::vector<TimeDependentOperator> jumps{family.jump_family()};
    if (family.loss().matrix().nonZeros() > 0) jumps.emplace_back(family.loss());
    return MasterEquation(family.effective_hamiltonian_family(), std::move(jumps));
}

void MasterEquation::apply(double t, const DenseMat& rho, DenseMat& out) const {
    if (rho.rows() != dim() || rho.cols() != dim()) throw FockError("density matrix shape mismatch");
    Blocks in{rho};
    Blocks res;
    apply_plan(*full_, t, in, res);
    out = std::move(res[0]);
}

std::optional<MasterEquation::Blocks> MasterEquation::split(const DenseMat& rho, double tol) const {
    if (!parity_) return std::nullopt;
    const Plan& plan = *parity_;
    const int d = dim();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (plan.sector_of[i] != plan.sector_of[j] && std::abs(rho(i, j)) > tol) return std::nullopt;
    Blocks blocks(plan.sectors());
    for (int s = 0; s < plan.sectors(); ++s) {
        const auto& idx = plan.index[s];
        const auto n = static_cast<Eigen::Index>(idx.size());
        blocks[s].resize(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) blocks[s](a, b) = rho(idx[a], idx[b]);
    }
    return blocks;
}

DenseMat MasterEquation::merge(const Blocks& blocks) const {
    if (blocks.size() == 1) return blocks[0];
    const Plan& plan = *parity_;
    DenseMat rho = DenseMat::Zero(dim(), dim());
    for (int s = 0; s < plan.sectors(); ++s) {
        const auto& idx = plan.index[s];
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = 0; b < idx.size(); ++b) rho(idx[a], idx[b]) = blocks[s](a, b);
    }
    return rho;
}

void MasterEquation::apply_sectors(double t, const Blocks& rho, Blocks& out) const {
    if (!parity_) throw FockError("generator has no parity sectors");
    apply_plan(*parity_, t, rho, out);
}

// --- integration -------------------------------------------------------------

namespace {

using Blocks = MasterEquation::Blocks;

void symmetrize(DenseMat& m) {
    const auto d = m.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
        m(i, i) = Complex(m(i, i).real(), 0.0);
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const Complex avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
            m(i, j) = avg;
            m(j, i) = std::conj(avg);
        }
    }
}

Complex trace_of(const Blocks& b) {
    Complex tr = 0.0;
    for (const auto& m : b) tr += m.trace();
    return tr;
}

// Routes a blocked state through either the sector plan or the full plan.
class Stepper {
  public:
    Stepper(const MasterEquation& eq, bool sectors) : eq_(eq), sectors_(sectors) {}

    void operator()(double t, const Blocks& rho, Blocks& out) const {
        if (sectors_) {
            eq_.apply_sectors(t, rho, out);
        } else {
            out.resize(1);
            eq_.apply(t, rho[0], out[0]);
        }
    }

  private:
    const MasterEquation& eq_;
    bool sectors_;
};

class Sampler {
  public:
    explicit Sampler(int every) : every_(every) {}

    void check(const Blocks& rho, long step, double t, EvolveStats& stats) const {
        if (every_ == 0 || step % every_ != 0) return;
        for (const auto& m : rho) {
            if (!m.allFinite())
                throw NumericalError("non-finite density matrix at t = " + std::to_string(t) + " (step " +
                                     std::to_string(step) + ")");
            stats.min_sampled_eigenvalue = std::min(stats.min_sampled_eigenvalue, min_hermitian_eigenvalue(m));
        }
    }

  private:
    int every_;
};

// y = x + sum_k c_k k_k, blockwise.
template <typename... Terms>
void combine(Blocks& y, const Blocks& x, Terms&&... terms) {
    y.resize(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
        y[b] = x[b];
        ((y[b] += terms.first * terms.second[b]), ...);
    }
}

std::pair<double, const Blocks&> term(double c, const Blocks& k) { return {c, k}; }

double blocks_max_abs(const Blocks& b) {
    double m = 0.0;
    for (const auto& x : b) m = std::max(m, max_abs(x));
    return m;
}

// Coefficients at a segment end are sampled one ulp inside the segment, so a
// jump placed on a breakpoint is seen from the left by the step ending there.
double left_limit(double t) { return std::nextafter(t, -std::numeric_limits<double>::infinity()); }

std::vector<double> segment_edges(double t0, double t1, std::span<const double> breakpoints) {
    std::vector<double> edges{t0};
    std::vector<double> inner(breakpoints.begin(), breakpoints.end());
    std::sort(inner.begin(), inner.end());
    for (double b : inner)
        if (b > t0 + 1e-12 && b < t1 - 1e-12) edges.push_back(b);
    edges.push_back(t1);
    return edges;
}

void rk4(const Stepper& f, Blocks& rho, double t0, double t1, double dt, std::span<const double> breakpoints,
         const Sampler& sampler, EvolveStats& stats) {
    Blocks k1, k2, k3, k4, stage;
    const auto edges = segment_edges(t0, t1, breakpoints);
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        const double a = edges[seg];
        const double span = edges[seg + 1] - a;
        if (span <= 0.0) continue;
        const long n = std::max<long>(1, static_cast<long>(std::ceil(span / dt - 1e-9)));
        const double h = span / static_cast<double>(n);
        for (long s = 0; s < n; ++s) {
            const double t = a + h * static_cast<double>(s);
            f(t, rho, k1);
            combine(stage, rho, term(0.5 * h, k1));
            f(t + 0.5 * h, stage, k2);
            combine(stage, rho, term(0.5 * h, k2));
            f(t + 0.5 * h, stage, k3);
            combine(stage, rho, term(h, k3));
            f(s + 1 == n ? left_limit(edges[seg + 1]) : t + h, stage, k4);
            for (std::size_t b = 0; b < rho.size(); ++b) {
                rho[b] += (h / 6.0) * (k1[b] + 2.0 * k2[b] + 2.0 * k3[b] + k4[b]);
                symmetrize(rho[b]);
            }
            ++stats.steps;
            sampler.check(rho, stats.steps, t + h, stats);
        }
    }
}

// Dormand-Prince 5(4) with an elementary step-size controller.
void rk45(const Stepper& f, Blocks& rho, double t0, double t1, const IntegratorConfig& cfg,
          std::span<const double> breakpoints, const Sampler& sampler, EvolveStats& stats) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    Blocks k1, k2, k3, k4, k5, k6, k7, stage, next, err;
    const auto edges = segment_edges(t0, t1, breakpoints);
    double h = std::min(cfg.dt, t1 - t0);
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        double t = edges[seg];
        const double end = edges[seg + 1];
        f(t, rho, k1);
        while (t < end - 1e-14) {
            h = std::min(h, end - t);
            if (h < 1e-12 * std::max(1.0, std::abs(t)))
                throw NumericalError("RK45 step size underflow at t = " + std::to_string(t));
            combine(stage, rho, term(h * a21, k1));
            f(t + c2 * h, stage, k2);
            combine(stage, rho, term(h * a31, k1), term(h * a32, k2));
            f(t + c3 * h, stage, k3);
            combine(stage, rho, term(h * a41, k1), term(h * a42, k2), term(h * a43, k3));
            f(t + c4 * h, stage, k4);
            combine(stage, rho, term(h * a51, k1), term(h * a52, k2), term(h * a53, k3), term(h * a54, k4));
            f(t + c5 * h, stage, k5);
            combine(stage, rho, term(h * a61, k1), term(h * a62, k2), term(h * a63, k3), term(h * a64, k4),
                    term(h * a65, k5));
            const double t_next = t + h >= end ? left_limit(end) : t + h;
            f(t_next, stage, k6);
            combine(next, rho, term(h * b1, k1), term(h * b3, k3), term(h * b4, k4), term(h * b5, k5),
                    term(h * b6, k6));
            f(t_next, next, k7);
            err.resize(rho.size());
            for (std::size_t b = 0; b < rho.size(); ++b)
                err[b] = h * (e1 * k1[b] + e3 * k3[b] + e4 * k4[b] + e5 * k5[b] + e6 * k6[b] + e7 * k7[b]);

            const double scale = cfg.atol + cfg.rtol * std::max(blocks_max_abs(rho), blocks_max_abs(next));
            const double ratio = blocks_max_abs(err) / scale;
            if (!std::isfinite(ratio))
                throw NumericalError("non-finite error estimate at t = " + std::to_string(t));
            if (ratio <= 1.0) {
                t += h;
                rho = next;
                for (auto& m : rho) symmetrize(m);
                k1 = k7;
                ++stats.steps;
                sampler.check(rho, stats.steps, t, stats);
            } else {
                ++stats.rejected;
            }
            h *= ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
        }
    }
}

} // namespace

Evolution evolve(const MasterEquation& eq, const DensityMatrix& rho0, double t_start, double t_end,
                 const IntegratorConfig& cfg, std::span<const double> breakpoints) {
    cfg.validate();
    if (rho0.dim() != eq.dim()) throw FockError("initial state does not match the generator space");

    EvolveStats stats;
    std::optional<Blocks> blocks;
    if (cfg.use_parity_sectors) blocks = eq.split(rho0.matrix());
    stats.used_sectors = blocks.has_value();
    Blocks rho = blocks ? std::move(*blocks) : Blocks{rho0.matrix()};
    const Stepper f(eq, stats.used_sectors);
    const Sampler sampler(cfg.positivity_check_every);
    const Complex trace0 = trace_of(rho);

    if (t_end > t_start) {
        if (cfg.method == IntegratorConfig::Method::Rk45)
            rk45(f, rho, t_start, t_end, cfg, breakpoints, sampler, stats);
        else
            rk4(f, rho, t_start, t_end, cfg.dt, breakpoints, sampler, stats);
    }

    for (const auto& m : rho)
        if (!m.allFinite()) throw NumericalError("non-finite density matrix at end of evolution");
    const Complex tr = trace_of(rho);
    stats.trace_drift = std::abs(tr - trace0);
    DenseMat out = stats.used_sectors ? eq.merge(rho) : std::move(rho[0]);
    if (cfg.renormalize_trace) out /= tr.real();
    return {DensityMatrix::unchecked(rho0.space(), std::move(out)), stats};
}

Evolution evolve(const TimeDependentOperator& hamiltonian, const std::vector<TimeDependentOperator>& jumps,
                 const DensityMatrix& rho0, double t_start, double t_end, const IntegratorConfig& cfg) {
    return evolve(MasterEquation::lindblad(hamiltonian, jumps), rho0, t_start, t_end, cfg);
}

// --- steady state ------------------------------------------------------------

namespace {

std::vector<Operator> static_jumps(const CascadeOperators& ops) {
    std::vector<Operator> jumps{ops.j_out};
    if (ops.j_a.matrix().nonZeros() > 0) jumps.push_back(ops.j_a);
    return jumps;
}

double residual_of(const MasterEquation& eq, const DenseMat& rho) {
    DenseMat out;
    eq.apply(0.0, rho, out);
    return max_abs(out);
}

// Row-major vectorization: vec(A rho B)[i d + j] = (A kron B^T) vec(rho).
void add_kron(std::vector<Eigen::Triplet<Complex>>& triplets, const SparseOp& a, const SparseOp& b, int d) {
    for (int ra = 0; ra < a.outerSize(); ++ra)
        for (SparseOp::InnerIterator ia(a, ra); ia; ++ia)
            for (int rb = 0; rb < b.outerSize(); ++rb)
                for (SparseOp::InnerIterator ib(b, rb); ib; ++ib)
                    triplets.emplace_back(static_cast<int>(ia.row()) * d + static_cast<int>(ib.row()),
                                          static_cast<int>(ia.col()) * d + static_cast<int>(ib.col()),
                                          ia.value() * ib.value());
}

DenseMat nullspace_solve(const Operator& h, const std::vector<Operator>& jumps) {
    const int d = h.space().total_dim();
    SparseOp eye(d, d);
    eye.setIdentity();
    SparseOp h_eff = h.matrix();
    for (const auto& j : jumps) h_eff = h_eff - Complex(0.0, 0.5) * SparseOp(j.matrix().adjoint() * j.matrix());
    const SparseOp minus_i_heff = Complex(0.0, -1.0) * h_eff;
    // i rho H_eff^dag -> I kron (i H_eff^dag)^T = I kron conj(-i H_eff)
    const SparseOp right = SparseOp(minus_i_heff.conjugate());

    std::vector<Eigen::Triplet<Complex>> triplets;
    add_kron(triplets, minus_i_heff, eye, d);
    add_kron(triplets, eye, right, d);
    for (const auto& j : jumps) add_kron(triplets, j.matrix(), SparseOp(j.matrix().conjugate()), d);

    // Replace the (0,0) equation by the trace condition.
    std::vector<Eigen::Triplet<Complex>> kept;
    kept.reserve(triplets.size() + d);
    for (const auto& tr : triplets)
        if (tr.row() != 0) kept.push_back(tr);
    for (int i = 0; i < d; ++i) kept.emplace_back(0, i * d + i, 1.0);

    Eigen::SparseMatrix<Complex> lmat(d * d, d * d);
    lmat.setFromTriplets(kept.begin(), kept.end());
    lmat.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(lmat);
    if (lu.info() != Eigen::Success) throw NumericalError("steady-state LU factorization failed");
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(d * d);
    rhs(0) = 1.0;
    Eigen::VectorXcd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericalError("steady-state solve failed");
    DenseMat rho(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) rho(i, j) = x(i * d + j);
    return rho;
}

} // namespace

SteadyState steady_state(const CascadeOperators& ops, const IntegratorConfig& cfg, SteadyMethod method) {
    cfg.validate();
    if (ops.capture_mode) throw FockError("steady_state expects the static cascade without a capture mode");
    const HilbertSpec& space = ops.h_static.space();
    const int d = space.total_dim();
    const auto jumps = static_jumps(ops);
    const MasterEquation eq = MasterEquation::lindblad(ops.h_static, jumps);

    if (method == SteadyMethod::Auto) method = d <= kNullspaceMaxDim ? SteadyMethod::Nullspace : SteadyMethod::Relaxation;

    SteadyState out;
    out.method = method;
    DenseMat rho;
    if (method == SteadyMethod::Nullspace) {
        rho = nullspace_solve(ops.h_static, jumps);
        symmetrize(rho);
        rho /= rho.trace().real();
    } else {
        rho = DensityMatrix::basis_state(space, 0).matrix();
        IntegratorConfig relax = cfg;
        relax.method = IntegratorConfig::Method::Rk4;
        relax.positivity_check_every = 0;
        relax.dt = cfg.relax_dt;
        const double chunk = 1.0;
        double t = 0.0;
        double res = residual_of(eq, rho);
        while (res > kSteadyResidualTol) {
            if (t >= kSteadyMaxTime) {
                std::ostringstream msg;
                msg << "steady state did not converge within " << kSteadyMaxTime << " (residual " << res << ")";
                throw NumericalError(msg.str());
            }
            auto ev = evolve(eq, DensityMatrix::unchecked(space, std::move(rho)), t, t + chunk, relax);
            rho = ev.state.matrix();
            t += chunk;
            res = residual_of(eq, rho);
        }
        rho /= rho.trace().real();
        out.relax_time = t;
    }
    out.residual = residual_of(eq, rho);
    if (out.residual > kSteadyResidualTol) {
        std::ostringstream msg;
        msg << "steady state residual " << out.residual << " exceeds tolerance";
        throw NumericalError(msg.str());
    }
    out.rho = DensityMatrix(space, std::move(rho));
    return out;
}

// --- capture pipeline --------------------------------------------------------

nlohmann::json CaptureDiagnostics::to_json() const {
    return {{"trace_drift", trace_drift},
            {"min_eigenvalue", min_eigenvalue},
            {"min_sampled_eigenvalue", min_sampled_eigenvalue},
            {"steady_residual", steady_residual},
            {"dpa_top", dpa_top},
            {"capture_top", capture_top},
            {"cutoff_warning", cutoff_warning},
            {"steps", steps}};
}

namespace {

std::array<double, 2> top_occupations(const DensityMatrix& rho, int index) {
    const DensityMatrix reduced = partial_trace(rho, index);
    const int d = reduced.dim();
    std::array<double, 2> top{};
    top[0] = reduced(d - 1, d - 1).real();
    top[1] = d >= 2 ? reduced(d - 2, d - 2).real() : 0.0;
    return top;
}

void require_capture_space(const HilbertSpec& space) {
    if (space.size() != 3 || space.kind(kDpaIndex) != SubsystemKind::Mode ||
        space.kind(kTlsIndex) != SubsystemKind::Qubit || space.kind(kCaptureIndex) != SubsystemKind::Mode)
        throw FockError("capture space must be (DPA mode, TLS, capture mode)");
}

CaptureResult capture_from_steady(const PhysicalParams& p, const FilterSpec& f, const HilbertSpec& space,
                                  const IntegratorConfig& cfg, const SteadyState& ss) {
    const CascadeOperators ops = build_cascade(p, ss.rho.space());
    const CaptureFamily family = extend_with_capture(ops, f, space);
    const MasterEquation eq = MasterEquation::capture(family);
    const DensityMatrix rho0 = ss.rho.tensor(DensityMatrix::basis_state(HilbertSpec::mode(space.dim(kCaptureIndex)), 0));
    const DensityMatrix full0 = DensityMatrix::unchecked(space, rho0.matrix());

    // g(t) switches on discontinuously; keep that instant on the step grid.
    const std::array<double, 1> breaks{coupling_activation_time(f)};
    Evolution ev = evolve(eq, full0, 0.0, f.t_end, cfg, breaks);

    CaptureDiagnostics diag;
    diag.trace_drift = ev.stats.trace_drift;
    diag.min_sampled_eigenvalue = ev.stats.min_sampled_eigenvalue;
    diag.steady_residual = ss.residual;
    diag.steps = ev.stats.steps;
    diag.dpa_top = top_occupations(ev.state, kDpaIndex);
    diag.capture_top = top_occupations(ev.state, kCaptureIndex);
    diag.cutoff_warning = std::max(diag.dpa_top[0], diag.capture_top[0]) >= kCutoffOccupationTol;

    DensityMatrix reduced = partial_trace(ev.state, kCaptureIndex);
    DensityMatrix rho_v;
    try {
        rho_v = DensityMatrix(reduced.space(), reduced.matrix());
    } catch (const FockError& e) {
        throw NumericalError(std::string("captured state is invalid: ") + e.what());
    }
    diag.min_eigenvalue = rho_v.min_eigenvalue();
    return {std::move(rho_v), diag};
}

} // namespace

CaptureResult capture_temporal_mode(const PhysicalParams& p, const FilterSpec& f, const HilbertSpec& space,
                                    const IntegratorConfig& cfg) {
    p.validate();
    f.validate();
    cfg.validate();
    require_capture_space(space);
    const HilbertSpec source = source_space(space.dim(kDpaIndex));
    const SteadyState ss = steady_state(build_cascade(p, source), cfg);
    return capture_from_steady(p, f, space, cfg, ss);
}

ConvergenceReport check_cutoff_convergence(const PhysicalParams& p, const FilterSpec& f,
                                           const HilbertSpec& space, const IntegratorConfig& cfg) {
    require_capture_space(space);
    ConvergenceReport report;
    report.base_space = space;
    report.enlarged_space = capture_space(space.dim(kDpaIndex) + 4, space.dim(kCaptureIndex) + 2);
    const DenseMat small = capture_temporal_mode(p, f, space, cfg).rho_v.matrix();
    const DenseMat large = capture_temporal_mode(p, f, report.enlarged_space, cfg).rho_v.matrix();
    DenseMat padded = DenseMat::Zero(large.rows(), large.cols());
    padded.topLeftCorner(small.rows(), small.cols()) = small;
    report.max_change = max_abs(large - padded);
    report.passed = report.max_change <= kCutoffConvergenceTol;
    return report;
}

// --- persistence -------------------------------------------------------------

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

nlohmann::json params_json(const PhysicalParams& p) {
    return {{"lambda", p.lambda}, {"kappa", p.kappa}, {"gamma", p.gamma}, {"epsilon", p.epsilon}, {"delta_a", p.delta_a}};
}

nlohmann::json filter_json(const FilterSpec& f) { return {{"tau", f.tau}, {"t0", f.t0}, {"t_end", f.t_end}}; }

nlohmann::json space_json(const HilbertSpec& space) { return space.dims(); }

nlohmann::json capture_preimage(const PhysicalParams& p, const FilterSpec& f, const HilbertSpec& space,
                                const IntegratorConfig& cfg) {
    return {{"kind", "capture"},
            {"params", params_json(p)},
            {"filter", filter_json(f)},
            {"space", space_json(space)},
            {"integrator", cfg.to_json()}};
}

nlohmann::json steady_preimage(const PhysicalParams& p, const HilbertSpec& space, const IntegratorConfig& cfg) {
    return {{"kind", "steady"}, {"params", params_json(p)}, {"space", space_json(space)}, {"integrator", cfg.to_json()}};
}

std::string preimage_key(const nlohmann::json& preimage) {
    // nlohmann dumps doubles round-trip exactly and objects with sorted keys.
    return sha256_hex(preimage.dump());
}

ResultCache::ResultCache(std::filesystem::path root) : root_(std::move(root)) {}

ResultCache ResultCache::from_env(const std::filesystem::path& fallback) {
    if (const char* env = std::getenv("SQZC_CACHE_DIR"); env != nullptr && *env != '\0') return ResultCache(env);
    return ResultCache(fallback);
}

std::optional<DenseMat> ResultCache::load(const std::string& key) const {
    const auto path = root_ / (key + ".bin");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return matrix_from_binary(ss.str());
    } catch (const FockError&) {
        return std::nullopt;
    }
}

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    const auto tmp = path.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

void ResultCache::store(const std::string& key, const DensityMatrix& rho, const nlohmann::json& preimage) const {
    std::filesystem::create_directories(root_);
    atomic_write(root_ / (key + ".json"), preimage.dump(2));
    atomic_write(root_ / (key + ".bin"), to_binary(rho));
}

CaptureResult cached_capture(const ResultCache& cache, const PhysicalParams& p, const FilterSpec& f,
                             const HilbertSpec& space, const IntegratorConfig& cfg) {
    p.validate();
    f.validate();
    cfg.validate();
    require_capture_space(space);

    const nlohmann::json pre = capture_preimage(p, f, space, cfg);
    const std::string key = preimage_key(pre);
    if (auto hit = cache.load(key)) {
        std::ifstream meta(cache.root() / (key + ".json"));
        nlohmann::json side = nlohmann::json::parse(meta, nullptr, false);
        if (!side.is_discarded() && side.contains("diagnostics")) {
            const auto& d = side["diagnostics"];
            CaptureDiagnostics diag;
            diag.trace_drift = d.at("trace_drift").get<double>();
            diag.min_eigenvalue = d.at("min_eigenvalue").get<double>();
            diag.min_sampled_eigenvalue = d.at("min_sampled_eigenvalue").get<double>();
            diag.steady_residual = d.at("steady_residual").get<double>();
            diag.dpa_top = d.at("dpa_top").get<std::array<double, 2>>();
            diag.capture_top = d.at("capture_top").get<std::array<double, 2>>();
            diag.cutoff_warning = d.at("cutoff_warning").get<bool>();
            diag.steps = d.at("steps").get<long>();
            return {DensityMatrix(HilbertSpec::mode(space.dim(kCaptureIndex)), std::move(*hit)), diag};
        }
    }

    const HilbertSpec source = source_space(space.dim(kDpaIndex));
    const nlohmann::json spre = steady_preimage(p, source, cfg);
    const std::string skey = preimage_key(spre);
    SteadyState ss;
    if (auto hit = cache.load(skey)) {
        ss.rho = DensityMatrix(source, std::move(*hit));
        DenseMat res;
        MasterEquation::lindblad(build_hamiltonian(p, source), static_jumps(build_jumps(p, source)))
            .apply(0.0, ss.rho.matrix(), res);
        ss.residual = max_abs(res);
    } else {
        ss = steady_state(build_cascade(p, source), cfg);
        cache.store(skey, ss.rho, spre);
    }

    CaptureResult result = capture_from_steady(p, f, space, cfg, ss);
    nlohmann::json side = pre;
    side["diagnostics"] = result.diagnostics.to_json();
    cache.store(key, result.rho_v, side);
    return result;
}

} // namespace sqzcat
