#pragma once
// Right-hand side of the coupled cohort ODE system: the marriage-function
// approximations N, Nbar, D and the per-cohort derivative assembly.
//
// The denominator D is a single global scalar per time; its defining formula
// carries (i,j) subscripts in some writeups but every index on the right side
// is summed, so nothing cell-dependent remains.
//
// When the marriage kernel factors as theta_x(x)*theta_y(y), the four-part
// sums collapse: with a(x) = theta_x(x)h(x) and b(y) = theta_y(y)g(y),
//   N_ij = (a(x_i^m)m_i^m - sum_w a(x_iw^c)m_iw^c)
//        * (b(y_j^f)m_j^f - sum_v b(y_vj^c)m_vj^c),
// i.e. the product of kernel-weighted discrete unmarried counts, and the
// location-scaled variants factor the same way. That path is O(side^2)
// instead of O(side^4); the literal quadruple sum stays available and the
// two are pinned against each other in tests.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ebt/cohorts.hpp"
#include "ebt/model.hpp"

namespace ebt {

struct StateDerivative {
    double dm_B_m = 0.0, dpi_B_m = 0.0;
    std::vector<double> dm_m, dloc_m;
    double dm_B_f = 0.0, dpi_B_f = 0.0;
    std::vector<double> dm_f, dloc_f;
    std::vector<double> dm_c, dxbar_c, dybar_c;  // side*side each
};

struct MarriageTerms {
    std::vector<double> N;   // side*side
    std::vector<double> Nx;  // x components of Nbar
    std::vector<double> Ny;  // y components of Nbar
    double D = 0.0;
    bool floored = false;    // denominator floor gamma/2 activated
    int negative_cells = 0;  // informational: N_ij < 0 count
};

namespace detail {

struct StateView {
    int side = 0;
    std::vector<double> xm, mm;  // male slot locations and masses
    std::vector<double> yf, mf;
    std::vector<double> xc, yc, mc;  // couple grids, row-major

    explicit StateView(const PopulationState& s) : side(s.side) {
        xm.resize(side);
        mm.resize(side);
        yf.resize(side);
        mf.resize(side);
        for (int a = 0; a < side; ++a) {
            xm[a] = s.male_location(a);
            mm[a] = s.male_mass(a);
            yf[a] = s.female_location(a);
            mf[a] = s.female_mass(a);
        }
        const std::size_t cells = static_cast<std::size_t>(side) * side;
        xc.resize(cells);
        yc.resize(cells);
        mc.resize(cells);
        for (int i = 0; i < side; ++i) {
            for (int j = 0; j < side; ++j) {
                const auto& c = s.couple(i, j);
                const auto [x, y] = c.location();
                xc[i * side + j] = x;
                yc[i * side + j] = y;
                mc[i * side + j] = c.mass;
            }
        }
    }
};

} // namespace detail

// Denominator: gamma plus the kernel-weighted discrete unmarried totals,
// floored at gamma/2. Discrete unmarried counts can dip slightly negative
// through the closure remainder; the floor prevents division blow-up without
// touching smooth-regime behavior. Activations are reported to the caller
// and must stay at zero on well-posed problems.
inline double assemble_D(const PopulationState& s, const Coefficients& co,
                         bool* floored = nullptr) {
    const detail::StateView v(s);
    std::vector<double> th_m(v.side), tg_f(v.side);
    for (int a = 0; a < v.side; ++a)
        th_m[a] = detail::checked(co.h(v.xm[a]), "h") * v.mm[a];
    for (int b = 0; b < v.side; ++b)
        tg_f[b] = detail::checked(co.g(v.yf[b]), "g") * v.mf[b];

    const std::size_t cells = v.mc.size();
    std::vector<double> th_c(cells), tg_c(cells);
    for (std::size_t k = 0; k < cells; ++k) {
        th_c[k] = detail::checked(co.h(v.xc[k]), "h") * v.mc[k];
        tg_c[k] = detail::checked(co.g(v.yc[k]), "g") * v.mc[k];
    }

    double D = co.gamma + (pairwise_sum(th_m) - pairwise_sum(th_c)) +
               (pairwise_sum(tg_f) - pairwise_sum(tg_c));
    if (D < 0.5 * co.gamma) {
        D = 0.5 * co.gamma;
        if (floored) *floored = true;
    } else if (floored) {
        *floored = false;
    }
    return D;
}

// Full marriage assembly: N, Nbar and D in one pass.
inline MarriageTerms assemble_marriage(const PopulationState& s, const Coefficients& co) {
    const detail::StateView v(s);
    const int side = v.side;
    const std::size_t cells = static_cast<std::size_t>(side) * side;

    MarriageTerms out;
    out.N.assign(cells, 0.0);
    out.Nx.assign(cells, 0.0);
    out.Ny.assign(cells, 0.0);
    out.D = assemble_D(s, co, &out.floored);

    if (co.theta_separable()) {
        std::vector<double> SM(side), XS(side), SF(side), YS(side);
        std::vector<double> A(side, 0.0), XA(side, 0.0), B(side, 0.0), YB(side, 0.0);
        for (int a = 0; a < side; ++a) {
            const double am = detail::checked(co.theta_x(v.xm[a]), "theta_x") *
                              detail::checked(co.h(v.xm[a]), "h");
            SM[a] = am * v.mm[a];
            XS[a] = v.xm[a] * am * v.mm[a];
            const double bf = detail::checked(co.theta_y(v.yf[a]), "theta_y") *
                              detail::checked(co.g(v.yf[a]), "g");
            SF[a] = bf * v.mf[a];
            YS[a] = v.yf[a] * bf * v.mf[a];
        }
        for (int i = 0; i < side; ++i) {
            for (int j = 0; j < side; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * side + j;
                const double ac = detail::checked(co.theta_x(v.xc[k]), "theta_x") *
                                  detail::checked(co.h(v.xc[k]), "h") * v.mc[k];
                A[i] += ac;
                XA[i] += v.xc[k] * detail::checked(co.theta_x(v.xc[k]), "theta_x") *
                         detail::checked(co.h(v.xc[k]), "h") * v.mc[k];
                const double bc = detail::checked(co.theta_y(v.yc[k]), "theta_y") *
                                  detail::checked(co.g(v.yc[k]), "g") * v.mc[k];
                B[j] += bc;
                YB[j] += v.yc[k] * detail::checked(co.theta_y(v.yc[k]), "theta_y") *
                         detail::checked(co.g(v.yc[k]), "g") * v.mc[k];
            }
        }
        for (int i = 0; i < side; ++i) {
            const double um = SM[i] - A[i];
            const double xum = XS[i] - XA[i];
            for (int j = 0; j < side; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * side + j;
                const double uf = SF[j] - B[j];
                out.N[k] = um * uf;
                out.Nx[k] = xum * uf;
                out.Ny[k] = um * (YS[j] - YB[j]);
                if (out.N[k] < 0.0) ++out.negative_cells;
            }
        }
        return out;
    }

    // Generic kernel: literal four-part sums with signs (+, -, -, +) from the
    // expansion of (unmarried males)(unmarried females).
    auto K = [&](double x, double y) {
        return detail::checked(co.theta(x, y), "theta") *
               detail::checked(co.h(x), "h") * detail::checked(co.g(y), "g");
    };
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * side + j;
            const double k1 = K(v.xm[i], v.yf[j]) * v.mm[i] * v.mf[j];
            double t2 = 0.0, x2 = 0.0, y2 = 0.0;
            for (int vv = 0; vv < side; ++vv) {
                const std::size_t kv = static_cast<std::size_t>(vv) * side + j;
                const double term = K(v.xm[i], v.yc[kv]) * v.mm[i] * v.mc[kv];
                t2 += term;
                x2 += v.xm[i] * term;
                y2 += v.yc[kv] * term;
            }
            double t3 = 0.0, x3 = 0.0, y3 = 0.0;
            for (int w = 0; w < side; ++w) {
                const std::size_t kw = static_cast<std::size_t>(i) * side + w;
                const double term = K(v.xc[kw], v.yf[j]) * v.mf[j] * v.mc[kw];
                t3 += term;
                x3 += v.xc[kw] * term;
                y3 += v.yf[j] * term;
            }
            double t4 = 0.0, x4 = 0.0, y4 = 0.0;
            for (int w = 0; w < side; ++w) {
                const std::size_t kw = static_cast<std::size_t>(i) * side + w;
                if (v.mc[kw] == 0.0) continue;
                for (int vv = 0; vv < side; ++vv) {
                    const std::size_t kv = static_cast<std::size_t>(vv) * side + j;
                    const double term = K(v.xc[kw], v.yc[kv]) * v.mc[kv] * v.mc[kw];
                    t4 += term;
                    x4 += v.xc[kw] * term;
                    y4 += v.yc[kv] * term;
                }
            }
            out.N[k] = k1 - t2 - t3 + t4;
            out.Nx[k] = v.xm[i] * k1 - x2 - x3 + x4;
            out.Ny[k] = v.yf[j] * k1 - y2 - y3 + y4;
            if (out.N[k] < 0.0) ++out.negative_cells;
        }
    }
    return out;
}

inline std::vector<double> assemble_N(const PopulationState& s, const Coefficients& co) {
    return assemble_marriage(s, co).N;
}

inline std::vector<std::array<double, 2>> assemble_Nbar(const PopulationState& s,
                                                        const Coefficients& co) {
    const MarriageTerms t = assemble_marriage(s, co);
    std::vector<std::array<double, 2>> out(t.Nx.size());
    for (std::size_t k = 0; k < t.Nx.size(); ++k) out[k] = {t.Nx[k], t.Ny[k]};
    return out;
}

// Full derivative assembly at time state.t. Internal 1D locations move at
// speed 1 exactly; boundary cohorts use the (mass, moment) equations with
// the coefficient age-partials at 0; couples combine decay at the recovered
// location with the marriage source N/D and its moment form Nbar/D.
inline StateDerivative rhs(const PopulationState& s, const Coefficients& co,
                           MarriageTerms* terms_out = nullptr) {
    const double t = s.t;
    const int side = s.side;
    const int internals = side - 1;

    StateDerivative d;
    d.dm_m.assign(internals, 0.0);
    d.dloc_m.assign(internals, 1.0);
    d.dm_f.assign(internals, 0.0);
    d.dloc_f.assign(internals, 1.0);
    const std::size_t cells = static_cast<std::size_t>(side) * side;
    d.dm_c.assign(cells, 0.0);
    d.dxbar_c.assign(cells, 0.0);
    d.dybar_c.assign(cells, 0.0);

    MarriageTerms terms = assemble_marriage(s, co);

    for (int a = 0; a < internals; ++a) {
        const auto& c = s.male.internals[a];
        d.dm_m[a] = -detail::checked(co.c_m(t, c.location), "c_m") * c.mass;
    }
    for (int b = 0; b < internals; ++b) {
        const auto& c = s.female.internals[b];
        d.dm_f[b] = -detail::checked(co.c_f(t, c.location), "c_f") * c.mass;
    }

    // Birth fluxes into the 1D boundary cohorts: beta evaluated at the
    // recovered couple locations.
    std::vector<double> birth_m(cells, 0.0), birth_f(cells, 0.0);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const auto& c = s.couple(i, j);
            const auto [x, y] = c.location();
            birth_m[i * side + j] = detail::checked(co.beta_m(t, x, y), "beta_m") * c.mass;
            birth_f[i * side + j] = detail::checked(co.beta_f(t, x, y), "beta_f") * c.mass;
        }
    }
    const double cm0 = detail::checked(co.c_m(t, 0.0), "c_m");
    const double dcm0 = detail::checked(co.dx_c_m(t, 0.0), "dx_c_m");
    d.dm_B_m = -cm0 * s.male.boundary.mass - dcm0 * s.male.boundary.pi +
               pairwise_sum(birth_m);
    d.dpi_B_m = s.male.boundary.mass - cm0 * s.male.boundary.pi;

    const double cf0 = detail::checked(co.c_f(t, 0.0), "c_f");
    const double dcf0 = detail::checked(co.dy_c_f(t, 0.0), "dy_c_f");
    d.dm_B_f = -cf0 * s.female.boundary.mass - dcf0 * s.female.boundary.pi +
               pairwise_sum(birth_f);
    d.dpi_B_f = s.female.boundary.mass - cf0 * s.female.boundary.pi;

    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * side + j;
            const auto& c = s.couple(i, j);
            const auto [x, y] = c.location();
            const double cc = detail::checked(co.c_c(t, x, y), "c_c");
            d.dm_c[k] = -cc * c.mass + terms.N[k] / terms.D;
            d.dxbar_c[k] = (1.0 - x * cc) * c.mass + terms.Nx[k] / terms.D;
            d.dybar_c[k] = (1.0 - y * cc) * c.mass + terms.Ny[k] / terms.D;
        }
    }

    auto require_finite = [](double val, const char* what, int idx) {
        if (!std::isfinite(val))
            throw blowup_error(std::string("non-finite derivative (") + what +
                               ", cohort " + std::to_string(idx) + ")");
    };
    require_finite(d.dm_B_m, "male boundary mass", 0);
    require_finite(d.dpi_B_m, "male boundary moment", 0);
    require_finite(d.dm_B_f, "female boundary mass", 0);
    require_finite(d.dpi_B_f, "female boundary moment", 0);
    for (int a = 0; a < internals; ++a) require_finite(d.dm_m[a], "male mass", a + 1);
    for (int b = 0; b < internals; ++b) require_finite(d.dm_f[b], "female mass", b + 1);
    for (std::size_t k = 0; k < cells; ++k) {
        require_finite(d.dm_c[k], "couple mass", static_cast<int>(k));
        require_finite(d.dxbar_c[k], "couple xbar", static_cast<int>(k));
        require_finite(d.dybar_c[k], "couple ybar", static_cast<int>(k));
    }

    if (terms_out) *terms_out = std::move(terms);
    return d;
}

} // namespace ebt
