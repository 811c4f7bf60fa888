#pragma once
// Shared numerical utilities: error taxonomy, deterministic summation,
// composite Simpson quadrature and a generic fixed-step RK4 stage.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebt {

// ---------------------------------------------------------------------------
// Error taxonomy. Every throwing site uses one of these so callers can react
// to the failure class rather than parsing messages.
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error { using error::error; };      // invalid configuration value
struct input_error : error { using error::error; };       // bad caller-supplied data
struct dimension_error : error { using error::error; };   // shape mismatch
struct support_error : error { using error::error; };     // density support outside mesh
struct lookup_error : error { using error::error; };      // unknown registered name
struct evaluation_error : error { using error::error; };  // coefficient returned non-finite
struct blowup_error : error { using error::error; };      // non-finite derivative/state
struct step_size_error : error { using error::error; };   // ordering broke; dt too large
struct internal_error : error { using error::error; };    // bug guard, should not happen

// ---------------------------------------------------------------------------
// Deterministic summation. Pairwise (cascade) summation keeps roundoff at
// O(log n) ulps and, unlike compensated schemes, has a fixed association
// order, so results are bit-reproducible for a fixed input order.
// ---------------------------------------------------------------------------

inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

// ---------------------------------------------------------------------------
// Composite Simpson quadrature with an odd node count (>= 3).
// ---------------------------------------------------------------------------

template <class F>
double simpson(F&& f, double a, double b, int nodes = 513) {
    if (nodes < 3 || nodes % 2 == 0)
        throw config_error("simpson: node count must be odd and >= 3");
    if (!(b > a)) return 0.0;
    const double h = (b - a) / (nodes - 1);
    double s = f(a) + f(b);
    double s4 = 0.0, s2 = 0.0;
    for (int k = 1; k < nodes - 1; ++k) {
        const double x = a + h * k;
        if (k % 2 == 1) s4 += f(x); else s2 += f(x);
    }
    return (s + 4.0 * s4 + 2.0 * s2) * h / 3.0;
}

// Simpson over tabulated values with uniform spacing h. Odd counts use the
// classical composite rule; even counts fall back to Simpson on the leading
// odd prefix plus a trapezoid on the final interval (local O(h^3) term, used
// only where a family of nodes grows one by one).
inline double simpson_tabulated(const std::vector<double>& v, double h) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n == 1) return 0.0;
    if (n == 2) return 0.5 * h * (v[0] + v[1]);
    std::size_t m = (n % 2 == 1) ? n : n - 1;
    double s = v[0] + v[m - 1];
    double s4 = 0.0, s2 = 0.0;
    for (std::size_t k = 1; k + 1 < m; ++k) {
        if (k % 2 == 1) s4 += v[k]; else s2 += v[k];
    }
    double total = (s + 4.0 * s4 + 2.0 * s2) * h / 3.0;
    if (m != n) total += 0.5 * h * (v[n - 2] + v[n - 1]);
    return total;
}

// ---------------------------------------------------------------------------
// Classical 4-stage Runge-Kutta step on a flat state vector.
// rhs(t, y, dy) must fill dy (resized by the caller contract: |dy| == |y|).
// ---------------------------------------------------------------------------

template <class RHS>
void rk4_step(std::vector<double>& y, double t, double dt, RHS&& rhs) {
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);

    rhs(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
    rhs(t + dt, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

} // namespace ebt
