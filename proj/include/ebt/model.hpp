#pragma once
// Model coefficients for the two-sex Fredrickson-Hoppensteadt system and the
// pointwise marriage-rate evaluation.
//
// Coefficients carry closed-form age partials of c^m and c^f alongside the
// rates themselves: the boundary ODEs need dx c^m(t,0) and dy c^f(t,0)
// exactly, and supplying them analytically avoids a hidden second
// discretization inside the scheme. Presets must keep rates and partials
// consistent (unit tests check this by central finite differences).
//
// Integrals over age in the marriage function are truncated at a configured
// x_max. All test initial data are compactly supported and characteristics
// move at unit speed, so the support at time T stays inside [0, x_max]
// whenever x_max >= sup supp(u0) + T; the harness validates that containment.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ebt/numerics.hpp"

namespace ebt {

using Rate1 = std::function<double(double, double)>;          // (t, age)
using Rate2 = std::function<double(double, double, double)>;  // (t, x, y)
using Kernel = std::function<double(double, double)>;         // (x, y)
using Weight = std::function<double(double)>;                 // (age)

struct Coefficients {
    Rate1 c_m;       // male disappearance rate    (t, x)
    Rate1 c_f;       // female disappearance rate  (t, y)
    Rate2 c_c;       // couple disappearance rate  (t, x, y)
    Rate2 beta_m;    // male birth rate from couples (t, x, y)
    Rate2 beta_f;    // female birth rate from couples (t, x, y)
    Kernel theta;    // marriage kernel (x, y)
    Weight h;        // eligible-male market weight
    Weight g;        // eligible-female market weight
    double gamma = 1.0;
    Rate1 dx_c_m;    // age partial of c_m
    Rate1 dy_c_f;    // age partial of c_f

    // Set when theta(x,y) factors as theta_x(x) * theta_y(y). The marriage
    // sums then reduce from a quadruple to two double sums; the generic path
    // stays available and tests pin the two against each other.
    Weight theta_x;
    Weight theta_y;

    bool theta_separable() const {
        return static_cast<bool>(theta_x) && static_cast<bool>(theta_y);
    }
};

namespace detail {
inline double checked(double v, const char* what) {
    if (!std::isfinite(v))
        throw evaluation_error(std::string("non-finite coefficient value from ") + what);
    return v;
}
} // namespace detail

// Pointwise marriage rate T(t,x,y): the nonlinear nonlocal source feeding the
// couple equation. Unmarried counts and the denominator integrals are
// computed by composite Simpson quadrature on [0, x_max] (default 513 nodes
// per axis; smooth test data make the quadrature error negligible).
template <class UM, class UF, class UC>
double marriage_rate(double t, double x, double y, UM&& um, UF&& uf, UC&& uc,
                     const Coefficients& co, double x_max, int nodes = 513) {
    if (!(x_max > 0.0))
        throw config_error("marriage_rate: domain cutoff x_max must be positive");

    auto dens = [](double v) {
        if (!std::isfinite(v)) throw input_error("marriage_rate: non-finite density value");
        return v;
    };

    const double unm_x = dens(um(x)) - simpson([&](double z) { return dens(uc(x, z)); },
                                               0.0, x_max, nodes);
    const double unf_y = dens(uf(y)) - simpson([&](double z) { return dens(uc(z, y)); },
                                               0.0, x_max, nodes);

    double denom = co.gamma;
    denom += simpson(
        [&](double xx) {
            const double marg = simpson([&](double z) { return dens(uc(xx, z)); },
                                        0.0, x_max, nodes);
            return detail::checked(co.h(xx), "h") * (dens(um(xx)) - marg);
        },
        0.0, x_max, nodes);
    denom += simpson(
        [&](double yy) {
            const double marg = simpson([&](double z) { return dens(uc(z, yy)); },
                                        0.0, x_max, nodes);
            return detail::checked(co.g(yy), "g") * (dens(uf(yy)) - marg);
        },
        0.0, x_max, nodes);

    const double num = detail::checked(co.theta(x, y), "theta") *
                       detail::checked(co.h(x), "h") *
                       detail::checked(co.g(y), "g") * unm_x * unf_y;
    return num / denom;
}

// Registered coefficient presets, referenced by name from experiment configs.
//   constant                 all rates constant, flat marriage kernel
//   separable-gaussian       smooth nonconstant rates with analytic partials
//   zero-vital               c = beta = 0, flat marriage kernel
//   frozen                   c = beta = Theta = 0, pure transport
//   constant-smooth-marriage constant vital rates, smooth separable Theta/h/g
inline std::vector<std::string> preset_names() {
    return {"constant", "constant-smooth-marriage", "frozen", "separable-gaussian",
            "zero-vital"};
}

inline Coefficients preset(const std::string& name) {
    Coefficients co;
    auto zero1 = [](double, double) { return 0.0; };
    auto zero2 = [](double, double, double) { return 0.0; };
    auto one_w = [](double) { return 1.0; };

    if (name == "constant") {
        co.c_m = [](double, double) { return 0.1; };
        co.c_f = [](double, double) { return 0.1; };
        co.c_c = [](double, double, double) { return 0.1; };
        co.beta_m = [](double, double, double) { return 0.5; };
        co.beta_f = [](double, double, double) { return 0.5; };
        co.theta = [](double, double) { return 1.0; };
        co.theta_x = one_w;
        co.theta_y = one_w;
        co.h = one_w;
        co.g = one_w;
        co.gamma = 1.0;
        co.dx_c_m = zero1;
        co.dy_c_f = zero1;
        return co;
    }
    if (name == "zero-vital") {
        co.c_m = zero1;
        co.c_f = zero1;
        co.c_c = zero2;
        co.beta_m = zero2;
        co.beta_f = zero2;
        co.theta = [](double, double) { return 1.0; };
        co.theta_x = one_w;
        co.theta_y = one_w;
        co.h = one_w;
        co.g = one_w;
        co.gamma = 1.0;
        co.dx_c_m = zero1;
        co.dy_c_f = zero1;
        return co;
    }
    if (name == "frozen") {
        // Pure transport: no deaths, no births, no pairing. All three
        // populations keep their mass and drift at unit speed.
        co.c_m = zero1;
        co.c_f = zero1;
        co.c_c = zero2;
        co.beta_m = zero2;
        co.beta_f = zero2;
        co.theta = [](double, double) { return 0.0; };
        co.theta_x = [](double) { return 0.0; };
        co.theta_y = [](double) { return 0.0; };
        co.h = one_w;
        co.g = one_w;
        co.gamma = 1.0;
        co.dx_c_m = zero1;
        co.dy_c_f = zero1;
        return co;
    }
    if (name == "separable-gaussian") {
        // Gaussian bumps truncated only by the domain cutoff; every rate has
        // a closed-form age partial.
        co.c_m = [](double t, double x) {
            return 0.08 + 0.05 * std::exp(-(x - 0.6) * (x - 0.6) / 0.32) * (1.0 + 0.1 * t);
        };
        co.dx_c_m = [](double t, double x) {
            return 0.05 * std::exp(-(x - 0.6) * (x - 0.6) / 0.32) *
                   (-2.0 * (x - 0.6) / 0.32) * (1.0 + 0.1 * t);
        };
        co.c_f = [](double t, double y) {
            return 0.06 + 0.04 * std::exp(-(y - 0.7) * (y - 0.7) / 0.5) * (1.0 + 0.05 * t);
        };
        co.dy_c_f = [](double t, double y) {
            return 0.04 * std::exp(-(y - 0.7) * (y - 0.7) / 0.5) *
                   (-2.0 * (y - 0.7) / 0.5) * (1.0 + 0.05 * t);
        };
        co.c_c = [](double, double x, double y) {
            return 0.05 + 0.03 * std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.8);
        };
        co.beta_m = [](double, double x, double y) {
            return 0.4 * std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.5);
        };
        co.beta_f = [](double, double x, double y) {
            return 0.35 * std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.5);
        };
        co.theta_x = [](double x) { return std::exp(-x * x / 4.0); };
        co.theta_y = [](double y) { return std::exp(-y * y / 5.0); };
        co.theta = [](double x, double y) {
            return std::exp(-x * x / 4.0) * std::exp(-y * y / 5.0);
        };
        co.h = [](double x) { return std::exp(-x * x / 6.0); };
        co.g = [](double y) { return std::exp(-y * y / 6.0); };
        co.gamma = 1.0;
        return co;
    }
    if (name == "constant-smooth-marriage") {
        co.c_m = [](double, double) { return 0.1; };
        co.c_f = [](double, double) { return 0.1; };
        co.c_c = [](double, double, double) { return 0.1; };
        co.beta_m = [](double, double, double) { return 0.5; };
        co.beta_f = [](double, double, double) { return 0.5; };
        co.theta_x = [](double x) { return std::exp(-x * x / 8.0); };
        co.theta_y = [](double y) { return std::exp(-y * y / 8.0); };
        co.theta = [](double x, double y) {
            return std::exp(-x * x / 8.0) * std::exp(-y * y / 8.0);
        };
        co.h = [](double x) { return std::exp(-x * x / 6.0); };
        co.g = [](double y) { return std::exp(-y * y / 7.0); };
        co.gamma = 1.0;
        co.dx_c_m = zero1;
        co.dy_c_f = zero1;
        return co;
    }
    throw lookup_error("unknown coefficient preset: " + name);
}

} // namespace ebt
