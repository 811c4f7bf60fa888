#pragma once
// Uniform grids holding tabulated densities, and exact integration of their
// piecewise-linear interpolants over arbitrary cells. The reference solver
// produces DensityGrid values; the metric module turns them into atoms.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "ebt/numerics.hpp"

namespace ebt {

struct Axis {
    double x0 = 0.0;  // first node
    double h = 0.0;   // node spacing
    int n = 0;        // node count

    double at(int k) const { return x0 + h * k; }
    double upper() const { return x0 + h * (n - 1); }
};

// Tabulated densities at one time. Scalar/one-sex results fill only `um`;
// two-sex results carry the singles on ax1 and the couple grid on ax2 x ax2
// (row-major, uc[i*ax2.n + j] with i the male-age index).
struct DensityGrid {
    double t = 0.0;
    Axis ax1;
    Axis ax2;
    std::vector<double> um;
    std::vector<double> uf;
    std::vector<double> uc;
};

// Per-node weights such that, for tabulated values v on `ax`,
//   integral of the PL interpolant over [a,b]      = sum_k w0[k - k_lo] v[k]
//   first moment of the PL interpolant over [a,b]  = sum_k w1[k - k_lo] v[k]
// Only nodes k_lo..k_hi get nonzero weights. [a,b] is clamped to the axis.
struct PLWeights {
    int k_lo = 0;
    int k_hi = -1;  // inclusive; empty when k_hi < k_lo
    std::vector<double> w0;
    std::vector<double> w1;
};

inline PLWeights pl_weights(const Axis& ax, double a, double b) {
    PLWeights out;
    a = std::max(a, ax.x0);
    b = std::min(b, ax.upper());
    if (!(b > a) || ax.n < 2) return out;

    int seg_lo = std::clamp(static_cast<int>(std::floor((a - ax.x0) / ax.h)), 0, ax.n - 2);
    int seg_hi = std::clamp(static_cast<int>(std::floor((b - ax.x0) / ax.h)), 0, ax.n - 2);
    // b may sit exactly on a node; keep the last segment nonempty
    while (seg_hi > seg_lo && ax.at(seg_hi) >= b) --seg_hi;

    out.k_lo = seg_lo;
    out.k_hi = seg_hi + 1;
    out.w0.assign(out.k_hi - out.k_lo + 1, 0.0);
    out.w1.assign(out.k_hi - out.k_lo + 1, 0.0);

    for (int seg = seg_lo; seg <= seg_hi; ++seg) {
        const double xl = ax.at(seg);
        const double s = std::max(a, xl);
        const double e = std::min(b, ax.at(seg + 1));
        if (!(e > s)) continue;
        // On the segment the interpolant is v_k phi0 + v_{k+1} phi1 with
        // phi0 = 1 - (x-xl)/h, phi1 = (x-xl)/h. Integrate each hat exactly.
        const double u0 = (s - xl) / ax.h, u1 = (e - xl) / ax.h;  // in [0,1]
        const double du = u1 - u0;
        const double i_phi1 = ax.h * 0.5 * (u1 * u1 - u0 * u0);
        const double i_phi0 = ax.h * du - i_phi1;
        // moments: x = xl + h u; int x phi du terms
        const double j_phi1 = ax.h * (xl * 0.5 * (u1 * u1 - u0 * u0) +
                                      ax.h * (u1 * u1 * u1 - u0 * u0 * u0) / 3.0);
        const double j_phi0 = ax.h * (xl * du + ax.h * 0.5 * (u1 * u1 - u0 * u0)) - j_phi1;
        out.w0[seg - out.k_lo] += i_phi0;
        out.w0[seg + 1 - out.k_lo] += i_phi1;
        out.w1[seg - out.k_lo] += j_phi0;
        out.w1[seg + 1 - out.k_lo] += j_phi1;
    }
    return out;
}

struct CellIntegral {
    double mass = 0.0;
    double moment = 0.0;
};

inline CellIntegral pl_cell_integral(const Axis& ax, const std::vector<double>& v,
                                     double a, double b) {
    CellIntegral ci;
    const PLWeights w = pl_weights(ax, a, b);
    for (int k = w.k_lo; k <= w.k_hi; ++k) {
        ci.mass += w.w0[k - w.k_lo] * v[k];
        ci.moment += w.w1[k - w.k_lo] * v[k];
    }
    return ci;
}

// Simpson quadrature of tabulated values over the whole axis (odd ax.n).
inline double grid_integral(const Axis& ax, const std::vector<double>& v) {
    return simpson_tabulated(v, ax.h);
}

inline void write_density_csv(std::ostream& os, const Axis& ax,
                              const std::vector<double>& v, const char* name) {
    os << "index,x," << name << "\n";
    for (int k = 0; k < ax.n; ++k)
        os << k << ',' << ax.at(k) << ',' << v[k] << "\n";
}

} // namespace ebt
