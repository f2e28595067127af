#include "sqzcat/fock.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sqzcat {

// --- HilbertSpec -------------------------------------------------------------

HilbertSpec::HilbertSpec(std::vector<Subsystem> subsystems) : subsystems_(std::move(subsystems)) {
    if (subsystems_.empty()) throw FockError("HilbertSpec needs at least one subsystem");
    total_dim_ = 1;
    for (const auto& s : subsystems_) {
        if (s.dim < 1) throw FockError("subsystem dimension must be >= 1");
        if (s.kind == SubsystemKind::Qubit && s.dim != 2)
            throw FockError("two-level subsystem must have dimension 2");
        total_dim_ *= s.dim;
    }
}

HilbertSpec HilbertSpec::mode(int dim) { return HilbertSpec({{SubsystemKind::Mode, dim}}); }

std::vector<int> HilbertSpec::dims() const {
    std::vector<int> out;
    out.reserve(subsystems_.size());
    for (const auto& s : subsystems_) out.push_back(s.dim);
    return out;
}

int HilbertSpec::checked(int index) const {
    if (index < 0 || index >= size())
        throw FockError("subsystem index " + std::to_string(index) + " out of range");
    return index;
}

int HilbertSpec::stride(int index) const {
    checked(index);
    int s = 1;
    for (int k = index + 1; k < size(); ++k) s *= subsystems_[k].dim;
    return s;
}

HilbertSpec HilbertSpec::appended(Subsystem extra) const {
    auto subs = subsystems_;
    subs.push_back(extra);
    return HilbertSpec(std::move(subs));
}

bool HilbertSpec::operator==(const HilbertSpec& other) const {
    if (subsystems_.size() != other.subsystems_.size()) return false;
    for (std::size_t k = 0; k < subsystems_.size(); ++k) {
        if (subsystems_[k].kind != other.subsystems_[k].kind ||
            subsystems_[k].dim != other.subsystems_[k].dim)
            return false;
    }
    return true;
}

// --- Operator ----------------------------------------------------------------

Operator::Operator(HilbertSpec space, SparseOp matrix, bool hermitian_hint)
    : space_(std::move(space)), matrix_(std::move(matrix)), hermitian_(hermitian_hint) {
    if (matrix_.rows() != space_.total_dim() || matrix_.cols() != space_.total_dim())
        throw FockError("operator shape does not match space dimension");
    matrix_.makeCompressed();
    if (hermitian_) {
        SparseOp diff = matrix_ - SparseOp(matrix_.adjoint());
        for (int k = 0; k < diff.outerSize(); ++k)
            for (SparseOp::InnerIterator it(diff, k); it; ++it)
                if (std::abs(it.value()) > 1e-12) throw FockError("operator flagged Hermitian is not");
    }
}

Operator Operator::zero(const HilbertSpec& space) {
    SparseOp m(space.total_dim(), space.total_dim());
    return Operator(space, std::move(m), true);
}

Operator Operator::identity(const HilbertSpec& space) {
    SparseOp m(space.total_dim(), space.total_dim());
    m.setIdentity();
    return Operator(space, std::move(m), true);
}

Operator Operator::adjoint() const { return Operator(space_, SparseOp(matrix_.adjoint()), hermitian_); }

void Operator::require_same_space(const Operator& rhs) const {
    if (!(space_ == rhs.space_)) throw FockError("operators live on different spaces");
}

Operator& Operator::operator+=(const Operator& rhs) {
    require_same_space(rhs);
    matrix_ = matrix_ + rhs.matrix_;
    hermitian_ = hermitian_ && rhs.hermitian_;
    return *this;
}

Operator& Operator::operator-=(const Operator& rhs) {
    require_same_space(rhs);
    matrix_ = matrix_ - rhs.matrix_;
    hermitian_ = hermitian_ && rhs.hermitian_;
    return *this;
}

Operator& Operator::operator*=(Complex s) {
    matrix_ *= s;
    hermitian_ = hermitian_ && s.imag() == 0.0;
    return *this;
}

Operator operator*(const Operator& lhs, const Operator& rhs) {
    lhs.require_same_space(rhs);
    SparseOp prod = (lhs.matrix_ * rhs.matrix_).pruned();
    return Operator(lhs.space_, std::move(prod));
}

// --- construction ------------------------------------------------------------

Operator embed(const HilbertSpec& space, int index, const SparseOp& local) {
    const int d = space.dim(index);
    if (local.rows() != d || local.cols() != d) throw FockError("local operator has wrong shape");
    const int inner = space.stride(index);
    const int outer = space.total_dim() / (d * inner);

    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(local.nonZeros()) * outer * inner);
    for (int o = 0; o < outer; ++o) {
        for (int r = 0; r < local.outerSize(); ++r) {
            for (SparseOp::InnerIterator it(local, r); it; ++it) {
                const int row0 = (o * d + static_cast<int>(it.row())) * inner;
                const int col0 = (o * d + static_cast<int>(it.col())) * inner;
                for (int i = 0; i < inner; ++i) triplets.emplace_back(row0 + i, col0 + i, it.value());
            }
        }
    }
    SparseOp m(space.total_dim(), space.total_dim());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return Operator(space, std::move(m));
}

Operator annihilation(const HilbertSpec& space, int index) {
    const int d = space.dim(index);
    if (space.kind(index) == SubsystemKind::Qubit)
        throw FockError("subsystem is a two-level system; use tls_lower");
    if (d < 2) throw FockError("bosonic mode needs dimension >= 2");
    SparseOp a(d, d);
    for (int n = 1; n < d; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
    return embed(space, index, a);
}

Operator creation(const HilbertSpec& space, int index) {
    const int d = space.dim(index);
    if (space.kind(index) == SubsystemKind::Qubit)
        throw FockError("subsystem is a two-level system; use tls_lower");
    if (d < 2) throw FockError("bosonic mode needs dimension >= 2");
    SparseOp ad(d, d);
    for (int n = 1; n < d; ++n) ad.insert(n, n - 1) = std::sqrt(static_cast<double>(n));
    return embed(space, index, ad);
}

Operator tls_lower(const HilbertSpec& space, int index) {
    if (space.dim(index) != 2) throw FockError("tls_lower needs a dimension-2 subsystem");
    SparseOp s(2, 2);
    s.insert(0, 1) = 1.0;
    return embed(space, index, s);
}

Operator extend(const Operator& op, const HilbertSpec& bigger) {
    const auto& small = op.space().subsystems();
    const auto& big = bigger.subsystems();
    if (big.size() < small.size()) throw FockError("extend target is smaller than source");
    for (std::size_t k = 0; k < small.size(); ++k) {
        if (small[k].dim != big[k].dim || small[k].kind != big[k].kind)
            throw FockError("extend target does not start with the source subsystems");
    }
    const int inner = bigger.total_dim() / op.space().total_dim();
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(op.matrix().nonZeros()) * inner);
    const SparseOp& m = op.matrix();
    for (int r = 0; r < m.outerSize(); ++r)
        for (SparseOp::InnerIterator it(m, r); it; ++it)
            for (int i = 0; i < inner; ++i)
                triplets.emplace_back(static_cast<int>(it.row()) * inner + i,
                                      static_cast<int>(it.col()) * inner + i, it.value());
    SparseOp out(bigger.total_dim(), bigger.total_dim());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return Operator(bigger, std::move(out), op.hermitian_hint());
}

// --- DensityMatrix -----------------------------------------------------------

double max_abs(const DenseMat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermiticity_defect(const DenseMat& m) { return max_abs(m - m.adjoint()); }

double min_hermitian_eigenvalue(const DenseMat& m) {
    Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

DensityMatrix::DensityMatrix(HilbertSpec space, DenseMat entries)
    : space_(std::move(space)), entries_(std::move(entries)) {
    if (entries_.rows() != space_.total_dim() || entries_.cols() != space_.total_dim())
        throw FockError("density matrix shape does not match space dimension");
    if (!entries_.allFinite()) throw FockError("density matrix has non-finite entries");
    const double herm = hermiticity_defect(entries_);
    if (herm > kHermitianTol)
        throw FockError("density matrix not Hermitian (defect " + std::to_string(herm) + ")");
    const double tr_err = std::abs(entries_.trace() - 1.0);
    if (tr_err > kTraceTol) throw FockError("density matrix trace deviates by " + std::to_string(tr_err));
    const double lmin = min_hermitian_eigenvalue(entries_);
    if (lmin < kPositivityTol)
        throw FockError("density matrix has negative eigenvalue " + std::to_string(lmin));
}

DensityMatrix DensityMatrix::unchecked(HilbertSpec space, DenseMat entries) {
    DensityMatrix out;
    out.space_ = std::move(space);
    out.entries_ = std::move(entries);
    return out;
}

DensityMatrix DensityMatrix::pure(const HilbertSpec& space, const DenseVec& psi) {
    if (psi.size() != space.total_dim()) throw FockError("state vector has wrong length");
    const double norm = psi.norm();
    if (norm == 0.0) throw FockError("zero state vector");
    DenseVec v = psi / norm;
    return DensityMatrix(space, DenseMat(v * v.adjoint()));
}

DensityMatrix DensityMatrix::basis_state(const HilbertSpec& space, int index) {
    if (index < 0 || index >= space.total_dim()) throw FockError("basis index out of range");
    DenseMat m = DenseMat::Zero(space.total_dim(), space.total_dim());
    m(index, index) = 1.0;
    return unchecked(space, std::move(m));
}

DensityMatrix DensityMatrix::maximally_mixed(const HilbertSpec& space) {
    const int d = space.total_dim();
    DenseMat m = DenseMat::Identity(d, d) / static_cast<double>(d);
    return unchecked(space, std::move(m));
}

double DensityMatrix::min_eigenvalue() const { return min_hermitian_eigenvalue(entries_); }

DensityMatrix DensityMatrix::tensor(const DensityMatrix& other) const {
    auto subs = space_.subsystems();
    for (const auto& s : other.space_.subsystems()) subs.push_back(s);
    const int da = dim();
    const int db = other.dim();
    DenseMat out(da * db, da * db);
    for (int i = 0; i < da; ++i)
        for (int j = 0; j < da; ++j) out.block(i * db, j * db, db, db) = entries_(i, j) * other.entries_;
    return unchecked(HilbertSpec(std::move(subs)), std::move(out));
}

// --- dynamics-level primitives ---------------------------------------------

DenseMat apply_liouvillian(const Operator& hamiltonian, std::span<const Operator> jumps,
                           const DenseMat& rho) {
    const int d = hamiltonian.space().total_dim();
    if (rho.rows() != d || rho.cols() != d) throw FockError("density matrix shape mismatch");
    for (const auto& j : jumps)
        if (!(j.space() == hamiltonian.space())) throw FockError("jump operator on a different space");

    const SparseOp& h = hamiltonian.matrix();
    DenseMat out = DenseMat(h * rho);
    out = Complex(0.0, -1.0) * (out - DenseMat(rho * h));
    for (const auto& jump : jumps) {
        const SparseOp& j = jump.matrix();
        const SparseOp jd = j.adjoint();
        const SparseOp jdj = jd * j;
        DenseMat jrho = j * rho;
        DenseMat jrhojd = DenseMat(jrho * jd);
        out += jrhojd - 0.5 * DenseMat(jdj * rho) - 0.5 * DenseMat(rho * jdj);
    }
    return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
    const HilbertSpec& space = rho.space();
    const int d = space.dim(keep);
    const int inner = space.stride(keep);
    const int outer = space.total_dim() / (d * inner);
    DenseMat reduced = DenseMat::Zero(d, d);
    const DenseMat& m = rho.matrix();
    for (int o = 0; o < outer; ++o)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const int ra = (o * d + a) * inner;
                const int rb = (o * d + b) * inner;
                Complex acc = 0.0;
                for (int i = 0; i < inner; ++i) acc += m(ra + i, rb + i);
                reduced(a, b) += acc;
            }
    return DensityMatrix::unchecked(HilbertSpec({space.subsystems()[keep]}), std::move(reduced));
}

double purity(const DensityMatrix& rho) {
    // Tr(rho^2) = sum |rho_mn|^2 for Hermitian rho.
    return rho.matrix().squaredNorm();
}

Complex expectation(const DensityMatrix& rho, const Operator& op) {
    if (op.space().total_dim() != rho.dim()) throw FockError("operator/state dimension mismatch");
    return DenseMat(op.matrix() * rho.matrix()).trace();
}

// --- serialization -----------------------------------------------------------

nlohmann::json to_json(const DensityMatrix& rho) {
    const int d = rho.dim();
    nlohmann::json re = nlohmann::json::array();
    nlohmann::json im = nlohmann::json::array();
    for (int i = 0; i < d; ++i) {
        std::vector<double> r(d), c(d);
        for (int j = 0; j < d; ++j) {
            r[j] = rho(i, j).real();
            c[j] = rho(i, j).imag();
        }
        re.push_back(r);
        im.push_back(c);
    }
    return {{"dims", rho.space().dims()}, {"re", re}, {"im", im}};
}

DensityMatrix density_from_json(const nlohmann::json& j) {
    std::vector<int> dims;
    try {
        dims = j.at("dims").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw FockError(std::string("density JSON: ") + e.what());
    }
    std::vector<Subsystem> subs;
    int total = 1;
    for (int d : dims) {
        subs.push_back({SubsystemKind::Mode, d});
        total *= d;
    }
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (static_cast<int>(re.size()) != total || static_cast<int>(im.size()) != total)
        throw FockError("density JSON: matrix size does not match dims");
    DenseMat m(total, total);
    for (int r = 0; r < total; ++r) {
        if (static_cast<int>(re[r].size()) != total || static_cast<int>(im[r].size()) != total)
            throw FockError("density JSON: ragged row");
        for (int c = 0; c < total; ++c) m(r, c) = Complex(re[r][c].get<double>(), im[r][c].get<double>());
    }
    return DensityMatrix(HilbertSpec(std::move(subs)), std::move(m));
}

namespace {

constexpr char kMagic[8] = {'F', 'O', 'C', 'K', 'R', 'H', 'O', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
    std::uint64_t v = 0;
    for (int k = 0; k < width; ++k)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + k])) << (8 * k);
    return v;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FockError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string to_binary(const DensityMatrix& rho) {
    const auto d = static_cast<std::uint32_t>(rho.dim());
    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, d);
    put_u32(out, d);
    out.reserve(16 + static_cast<std::size_t>(d) * d * 16);
    for (std::uint32_t i = 0; i < d; ++i)
        for (std::uint32_t j = 0; j < d; ++j) {
            put_f64(out, rho(i, j).real());
            put_f64(out, rho(i, j).imag());
        }
    return out;
}

DenseMat matrix_from_binary(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FockError("not a FOCKRHO1 file");
    const auto rows = static_cast<std::size_t>(get_le(bytes, 8, 4));
    const auto cols = static_cast<std::size_t>(get_le(bytes, 12, 4));
    if (bytes.size() != 16 + rows * cols * 16) throw FockError("FOCKRHO1 payload has wrong length");
    DenseMat m(rows, cols);
    std::size_t off = 16;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double re = std::bit_cast<double>(get_le(bytes, off, 8));
            const double im = std::bit_cast<double>(get_le(bytes, off + 8, 8));
            m(i, j) = Complex(re, im);
            off += 16;
        }
    return m;
}

void write_density_json(const DensityMatrix& rho, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FockError("cannot write " + path.string());
    out << std::setprecision(17) << to_json(rho).dump();
}

void write_density_binary(const DensityMatrix& rho, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FockError("cannot write " + path.string());
    const std::string bytes = to_binary(rho);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

DensityMatrix read_density(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
        DenseMat m = matrix_from_binary(bytes);
        if (m.rows() != m.cols()) throw FockError("density matrix must be square");
        const int d = static_cast<int>(m.rows());
        return DensityMatrix(HilbertSpec::mode(d), std::move(m));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw FockError("cannot parse density file " + path.string() + ": " + e.what());
    }
    return density_from_json(j);
}

} // namespace sqzcat
