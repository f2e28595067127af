#pragma once

// Wigner distributions and quadrature marginals of a single bosonic mode.
// Convention: beta = x + i y, W integrates to 1, vacuum peak 2/pi.

#include "sqzcat/fock.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sqzcat {

struct Axis {
    double start = 0.0;
    double step = 0.0;
    int count = 0;

    // `count` points from lo to hi inclusive.
    static Axis uniform(double lo, double hi, int count);

    double at(int i) const { return start + step * i; }
    double stop() const { return at(count - 1); }
    std::vector<double> values() const;
};

inline constexpr double kDefaultExtent = 4.0;
inline constexpr int kDefaultPoints = 161;
inline constexpr double kGridNormTol = 2e-3;

class GridTooSmall : public std::runtime_error {
  public:
    GridTooSmall(const std::string& what, double suggested_extent)
        : std::runtime_error(what), suggested_extent_(suggested_extent) {}
    double suggested_extent() const { return suggested_extent_; }

  private:
    double suggested_extent_;
};

struct WignerGrid {
    Axis x;
    Axis y;
    Eigen::MatrixXd values; // values(iy, ix)
    std::string convention = "alpha";

    double cell_area() const { return x.step * y.step; }
    double integral() const;
    double min() const;
    double max_abs() const;

    // "x,y,w" rows, y outer and x inner, 17 significant digits.
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

// W(x, y) = (2/pi) Tr[rho D(beta) P D(beta)^dag] evaluated by the Laguerre
// recurrence, exact for the truncated rho. Throws GridTooSmall if the grid
// integral misses 1 by more than kGridNormTol (skipped when check_norm is off).
WignerGrid wigner(const DenseMat& rho, const Axis& x, const Axis& y, bool check_norm = true);
WignerGrid wigner(const DensityMatrix& rho, const Axis& x, const Axis& y, bool check_norm = true);

// Symmetric grid [-extent, extent]^2 suggested for rho: max(4, 4 + 2 sqrt(<n>)).
double suggested_extent(const DenseMat& rho);

double mean_photon_number(const DenseMat& rho);

// (1/2) int (|W| - W) = sum of max(-W, 0) dx dy.
double negative_volume(const WignerGrid& grid);

// 4-connected components of cells with W < floor. Default floor:
// -1e-4 * max |W|.
int count_negative_regions(const WignerGrid& grid, std::optional<double> floor = std::nullopt);

enum class Quadrature { X, Y };

// <x|rho|x> along X = Re beta or Y = Im beta, with the scaling of the Wigner
// convention so the result equals the corresponding marginal of W.
std::vector<double> quadrature_distribution(const DenseMat& rho, Quadrature axis, std::span<const double> points);

struct Polyline {
    std::vector<double> x;
    std::vector<double> y;
    bool closed = false;
};

// Level curves of the grid by marching squares.
std::vector<Polyline> contour_lines(const WignerGrid& grid, double level);

struct ErrorContour {
    double peak_x = 0.0;
    double peak_y = 0.0;
    double peak_value = 0.0;
    double level = 0.0;
    std::vector<Polyline> contour; // around the peak
    Polyline reference;            // coherent-state circle at the peak
};

// Coherent-state W falls to e^{-1/2} of its peak at |beta - beta0| = 1/2.
inline constexpr double kCoherentErrorRadius = 0.5;

// e^{-1/2} contour around the lowest (smallest y) local maximum of W, plus the
// coherent-state reference circle centred there.
ErrorContour error_contour(const WignerGrid& grid, int reference_points = 181);

nlohmann::json to_json(const ErrorContour& c);

} // namespace sqzcat
