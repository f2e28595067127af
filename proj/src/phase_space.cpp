#include "sqzcat/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace sqzcat {

Axis Axis::uniform(double lo, double hi, int count) {
    if (count < 2 || !(hi > lo)) throw std::invalid_argument("axis needs count >= 2 and hi > lo");
    return Axis{lo, (hi - lo) / (count - 1), count};
}

std::vector<double> Axis::values() const {
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) v[i] = at(i);
    return v;
}

double WignerGrid::integral() const { return values.sum() * cell_area(); }

double WignerGrid::min() const { return values.minCoeff(); }

double WignerGrid::max_abs() const { return values.cwiseAbs().maxCoeff(); }

std::string WignerGrid::to_csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "x,y,w\n";
    for (int iy = 0; iy < y.count; ++iy)
        for (int ix = 0; ix < x.count; ++ix) out << x.at(ix) << ',' << y.at(iy) << ',' << values(iy, ix) << '\n';
    return out.str();
}

nlohmann::json WignerGrid::to_json() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(x.count) * y.count);
    for (int iy = 0; iy < y.count; ++iy)
        for (int ix = 0; ix < x.count; ++ix) flat.push_back(values(iy, ix));
    return {{"x0", x.start}, {"dx", x.step}, {"nx", x.count}, {"y0", y.start},
            {"dy", y.step},  {"ny", y.count}, {"convention", convention}, {"values", flat}};
}

double mean_photon_number(const DenseMat& rho) {
    double n = 0.0;
    for (Eigen::Index k = 0; k < rho.rows(); ++k) n += static_cast<double>(k) * rho(k, k).real();
    return n;
}

double suggested_extent(const DenseMat& rho) {
    return std::max(kDefaultExtent, 4.0 + 2.0 * std::sqrt(std::max(0.0, mean_photon_number(rho))));
}

namespace {

// Displaced-parity sum at one point. w[n] carries the Laguerre terms of row m
// and is updated in place as m advances.
double wigner_point(const DenseMat& rho, Complex beta, std::vector<Complex>& w) {
    const auto d = static_cast<int>(rho.rows());
    const Complex two_b = 2.0 * beta;
    const Complex two_bc = std::conj(two_b);
    w.assign(d, Complex(0.0));
    w[0] = (2.0 / std::numbers::pi) * std::exp(-2.0 * std::norm(beta));
    double acc = rho(0, 0).real() * w[0].real();
    for (int n = 1; n < d; ++n) {
        w[n] = two_b * w[n - 1] / std::sqrt(double(n));
        acc += 2.0 * (rho(0, n) * w[n]).real();
    }
    for (int m = 1; m < d; ++m) {
        const double sm = std::sqrt(double(m));
        Complex temp = w[m];
        w[m] = (two_bc * temp - sm * w[m - 1]) / sm;
        acc += (rho(m, m) * w[m]).real();
        for (int n = m + 1; n < d; ++n) {
            const Complex next = (two_b * w[n - 1] - sm * temp) / std::sqrt(double(n));
            temp = w[n];
            w[n] = next;
            acc += 2.0 * (rho(m, n) * w[n]).real();
        }
    }
    return acc;
}

} // namespace

WignerGrid wigner(const DenseMat& rho, const Axis& x, const Axis& y, bool check_norm) {
    if (rho.rows() != rho.cols() || rho.rows() < 1) throw FockError("wigner needs a square single-mode matrix");
    if (x.count < 2 || y.count < 2) throw std::invalid_argument("wigner grid needs at least 2 points per axis");
    WignerGrid grid{x, y, Eigen::MatrixXd(y.count, x.count), "alpha"};
    std::vector<Complex> w;
    for (int iy = 0; iy < y.count; ++iy)
        for (int ix = 0; ix < x.count; ++ix) grid.values(iy, ix) = wigner_point(rho, Complex(x.at(ix), y.at(iy)), w);

    if (check_norm) {
        const double norm = grid.integral();
        const double expected = rho.trace().real();
        if (std::abs(norm - expected) > kGridNormTol) {
            const double ext = suggested_extent(rho);
            std::ostringstream msg;
            msg << "Wigner grid integral " << norm << " misses " << expected << " by more than " << kGridNormTol
                << "; use a grid extent of at least " << ext;
            throw GridTooSmall(msg.str(), ext);
        }
    }
    return grid;
}

WignerGrid wigner(const DensityMatrix& rho, const Axis& x, const Axis& y, bool check_norm) {
    if (rho.space().size() != 1) throw FockError("wigner needs a single-mode state");
    return wigner(rho.matrix(), x, y, check_norm);
}

double negative_volume(const WignerGrid& grid) {
    return grid.values.cwiseMin(0.0).sum() * -grid.cell_area();
}

int count_negative_regions(const WignerGrid& grid, std::optional<double> floor) {
    const double cut = floor.value_or(-1e-4 * grid.max_abs());
    if (!(cut < 0.0)) throw std::invalid_argument("negative-region floor must be < 0");
    const int ny = grid.y.count;
    const int nx = grid.x.count;
    std::vector<char> seen(static_cast<std::size_t>(nx) * ny, 0);
    auto idx = [nx](int iy, int ix) { return static_cast<std::size_t>(iy) * nx + ix; };
    int regions = 0;
    std::vector<std::pair<int, int>> stack;
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            if (seen[idx(iy, ix)] || !(grid.values(iy, ix) < cut)) continue;
            ++regions;
            stack.assign(1, {iy, ix});
            seen[idx(iy, ix)] = 1;
            while (!stack.empty()) {
                const auto [cy, cx] = stack.back();
                stack.pop_back();
                constexpr int dy[] = {1, -1, 0, 0};
                constexpr int dx[] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int py = cy + dy[k];
                    const int px = cx + dx[k];
                    if (py < 0 || py >= ny || px < 0 || px >= nx) continue;
                    if (seen[idx(py, px)] || !(grid.values(py, px) < cut)) continue;
                    seen[idx(py, px)] = 1;
                    stack.emplace_back(py, px);
                }
            }
        }
    }
    return regions;
}

// --- quadratures ---------------------------------------------------------------

std::vector<double> quadrature_distribution(const DenseMat& rho, Quadrature axis, std::span<const double> points) {
    const auto d = static_cast<int>(rho.rows());
    // X = Re beta = q / sqrt 2 for the oscillator coordinate q, so
    // P(x) = sqrt 2 <q|rho|q> at q = sqrt 2 x. <p|n> = (-i)^n psi_n(p).
    std::vector<Complex> phase(d, Complex(1.0));
    if (axis == Quadrature::Y)
        for (int n = 1; n < d; ++n) phase[n] = phase[n - 1] * Complex(0.0, -1.0);

    std::vector<double> out;
    out.reserve(points.size());
    std::vector<double> psi(d);
    for (double x : points) {
        const double q = std::numbers::sqrt2 * x;
        psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * q * q);
        if (d > 1) psi[1] = std::numbers::sqrt2 * q * psi[0];
        for (int n = 2; n < d; ++n)
            psi[n] = std::sqrt(2.0 / n) * q * psi[n - 1] - std::sqrt(double(n - 1) / n) * psi[n - 2];
        Complex acc = 0.0;
        for (int m = 0; m < d; ++m)
            for (int n = 0; n < d; ++n) acc += rho(m, n) * phase[m] * std::conj(phase[n]) * psi[m] * psi[n];
        out.push_back(std::numbers::sqrt2 * acc.real());
    }
    return out;
}

// --- contours ----------------------------------------------------------------

std::vector<Polyline> contour_lines(const WignerGrid& grid, double level) {
    const int nx = grid.x.count;
    const int ny = grid.y.count;
    const auto& v = grid.values;
    // Crossing points are keyed by grid edge so segments from neighbouring
    // cells share endpoints exactly.
    const long vertical_base = static_cast<long>(nx) * ny;
    auto h_edge = [nx](int iy, int ix) { return static_cast<long>(iy) * nx + ix; };
    auto v_edge = [nx, vertical_base](int iy, int ix) { return vertical_base + static_cast<long>(iy) * nx + ix; };

    std::map<long, std::pair<double, double>> points;
    auto crossing = [&](long key, double x0, double y0, double v0, double x1, double y1, double v1) {
        if (points.count(key)) return;
        const double s = (level - v0) / (v1 - v0);
        points[key] = {x0 + s * (x1 - x0), y0 + s * (y1 - y0)};
    };

    std::vector<std::pair<long, long>> segments;
    for (int iy = 0; iy + 1 < ny; ++iy) {
        for (int ix = 0; ix + 1 < nx; ++ix) {
            const double c[4] = {v(iy, ix), v(iy, ix + 1), v(iy + 1, ix + 1), v(iy + 1, ix)};
            const bool above[4] = {c[0] > level, c[1] > level, c[2] > level, c[3] > level};
            const double x0 = grid.x.at(ix), x1 = grid.x.at(ix + 1);
            const double y0 = grid.y.at(iy), y1 = grid.y.at(iy + 1);
            // edges: 0 bottom, 1 right, 2 top, 3 left
            long keys[4] = {h_edge(iy, ix), v_edge(iy, ix + 1), h_edge(iy + 1, ix), v_edge(iy, ix)};
            bool cut[4] = {above[0] != above[1], above[1] != above[2], above[2] != above[3], above[3] != above[0]};
            if (cut[0]) crossing(keys[0], x0, y0, c[0], x1, y0, c[1]);
            if (cut[1]) crossing(keys[1], x1, y0, c[1], x1, y1, c[2]);
            if (cut[2]) crossing(keys[2], x1, y1, c[2], x0, y1, c[3]);
            if (cut[3]) crossing(keys[3], x0, y1, c[3], x0, y0, c[0]);

            const int n_cut = cut[0] + cut[1] + cut[2] + cut[3];
            if (n_cut == 2) {
                long ends[2];
                int k = 0;
                for (int e = 0; e < 4; ++e)
                    if (cut[e]) ends[k++] = keys[e];
                segments.emplace_back(ends[0], ends[1]);
            } else if (n_cut == 4) {
                // Saddle: cut off the corners on the opposite side of the centre value.
                const bool centre_above = 0.25 * (c[0] + c[1] + c[2] + c[3]) > level;
                const bool cut_v0_v2 = above[0] != centre_above;
                if (cut_v0_v2) {
                    segments.emplace_back(keys[3], keys[0]);
                    segments.emplace_back(keys[1], keys[2]);
                } else {
                    segments.emplace_back(keys[0], keys[1]);
                    segments.emplace_back(keys[2], keys[3]);
                }
            }
        }
    }

    std::map<long, std::vector<int>> touching;
    for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
        touching[segments[s].first].push_back(s);
        touching[segments[s].second].push_back(s);
    }
    std::vector<char> used(segments.size(), 0);
    std::vector<Polyline> lines;

    auto walk = [&](int first, long start) {
        Polyline line;
        long at = start;
        int seg = first;
        line.x.push_back(points[at].first);
        line.y.push_back(points[at].second);
        while (seg >= 0 && !used[seg]) {
            used[seg] = 1;
            at = segments[seg].first == at ? segments[seg].second : segments[seg].first;
            line.x.push_back(points[at].first);
            line.y.push_back(points[at].second);
            seg = -1;
            for (int cand : touching[at])
                if (!used[cand]) seg = cand;
        }
        line.closed = at == start && line.x.size() > 2;
        lines.push_back(std::move(line));
    };

    // Open chains start at boundary crossings; the rest are loops.
    for (const auto& [key, segs] : touching)
        if (segs.size() == 1 && !used[segs[0]]) walk(segs[0], key);
    for (int s = 0; s < static_cast<int>(segments.size()); ++s)
        if (!used[s]) walk(s, segments[s].first);
    return lines;
}

namespace {

bool encloses(const Polyline& line, double px, double py) {
    bool inside = false;
    const std::size_t n = line.x.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((line.y[i] > py) != (line.y[j] > py) &&
            px < (line.x[j] - line.x[i]) * (py - line.y[i]) / (line.y[j] - line.y[i]) + line.x[i])
            inside = !inside;
    }
    return inside;
}

double distance_to(const Polyline& line, double px, double py) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < line.x.size(); ++i) best = std::min(best, std::hypot(line.x[i] - px, line.y[i] - py));
    return best;
}

} // namespace

ErrorContour error_contour(const WignerGrid& grid, int reference_points) {
    const int nx = grid.x.count;
    const int ny = grid.y.count;
    const auto& v = grid.values;
    const double global_max = v.maxCoeff();
    if (!(global_max > 0.0)) throw std::runtime_error("Wigner grid has no positive maximum");

    // Local maxima among the 8 neighbours, ignoring ripples below a quarter
    // of the global maximum.
    int best_y = -1;
    int best_x = -1;
    for (int iy = 1; iy + 1 < ny; ++iy) {
        for (int ix = 1; ix + 1 < nx; ++ix) {
            const double c = v(iy, ix);
            if (c < 0.25 * global_max) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1 && peak; ++dx)
                    if ((dx != 0 || dy != 0) && v(iy + dy, ix + dx) > c) peak = false;
            if (!peak) continue;
            if (best_y < 0 || iy < best_y || (iy == best_y && c > v(best_y, best_x))) {
                best_y = iy;
                best_x = ix;
            }
        }
    }
    if (best_y < 0) throw std::runtime_error("no local maximum of W inside the grid");

    ErrorContour out;
    out.peak_x = grid.x.at(best_x);
    out.peak_y = grid.y.at(best_y);
    out.peak_value = v(best_y, best_x);
    out.level = std::exp(-0.5) * out.peak_value;

    auto lines = contour_lines(grid, out.level);
    for (auto& line : lines)
        if (line.closed && encloses(line, out.peak_x, out.peak_y)) out.contour.push_back(std::move(line));
    if (out.contour.empty() && !lines.empty()) {
        auto nearest = std::min_element(lines.begin(), lines.end(), [&](const Polyline& a, const Polyline& b) {
            return distance_to(a, out.peak_x, out.peak_y) < distance_to(b, out.peak_x, out.peak_y);
        });
        out.contour.push_back(*nearest);
    }

    out.reference.closed = true;
    for (int k = 0; k < reference_points; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / (reference_points - 1);
        out.reference.x.push_back(out.peak_x + kCoherentErrorRadius * std::cos(phi));
        out.reference.y.push_back(out.peak_y + kCoherentErrorRadius * std::sin(phi));
    }
    return out;
}

nlohmann::json to_json(const ErrorContour& c) {
    auto line_json = [](const Polyline& l) { return nlohmann::json{{"x", l.x}, {"y", l.y}, {"closed", l.closed}}; };
    nlohmann::json contour = nlohmann::json::array();
    for (const auto& l : c.contour) contour.push_back(line_json(l));
    return {{"peak_x", c.peak_x},
            {"peak_y", c.peak_y},
            {"peak_value", c.peak_value},
            {"level", c.level},
            {"contour", contour},
            {"reference", line_json(c.reference)}};
}

} // namespace sqzcat
