#pragma once

// One-sex cohort scheme for the age-structured transport model with a
// renewal boundary. Serves as the small validation target next to the
// two-sex scheme: it supports a general growth speed b(t,x), which
// exercises the db term in the boundary moment equation.

#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "cohorts.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "numerics.hpp"

namespace ebt {

struct ScalarCoefficients {
    Rate1 b;     // growth speed b(t, x)
    Rate1 db;    // age partial of b
    Rate1 c;     // mortality c(t, x)
    Rate1 dc;    // age partial of c
    Rate1 beta;  // fertility beta(t, x)
    double x_b = 0.0;  // minimal age, where newborn mass enters
};

// One-sex presets, referenced by name from experiment configs.
//   renewal-constant   b = 1, c = 0.2, beta = 0.5
//   decay-only         b = 1, c = 0.3, beta = 0
//   transport-only     b = 1, c = beta = 0
inline std::vector<std::string> scalar_preset_names() {
    return {"decay-only", "renewal-constant", "transport-only"};
}

inline ScalarCoefficients scalar_preset(const std::string& name) {
    ScalarCoefficients co;
    auto zero = [](double, double) { return 0.0; };
    co.b = [](double, double) { return 1.0; };
    co.db = zero;
    co.dc = zero;
    if (name == "renewal-constant") {
        co.c = [](double, double) { return 0.2; };
        co.beta = [](double, double) { return 0.5; };
        return co;
    }
    if (name == "decay-only") {
        co.c = [](double, double) { return 0.3; };
        co.beta = zero;
        return co;
    }
    if (name == "transport-only") {
        co.c = zero;
        co.beta = zero;
        return co;
    }
    throw lookup_error("unknown scalar preset: " + name);
}

struct ScalarState {
    double t = 0.0;
    long n = 0;  // internalization steps taken
    Sex1D pop;
};

// Recovered boundary location: first moment quotient shifted to the
// minimal age, or the minimal age itself while the cohort is empty.
inline double scalar_boundary_location(const ScalarState& s, double x_b) {
    const auto& b = s.pop.boundary;
    return b.mass > kMassEpsilon ? b.pi / b.mass + x_b : x_b;
}

struct ScalarDerivative {
    double dm_B = 0.0, dpi_B = 0.0;
    std::vector<double> dm, dx;
};

// Right side of the cohort system: internal cohorts transport with b and
// decay with c; the boundary pair collects births from every cohort,
// including the boundary cohort itself at its recovered location.
inline ScalarDerivative scalar_rhs(const ScalarState& s, const ScalarCoefficients& co) {
    const double t = s.t;
    const double xb = co.x_b;
    const std::size_t J = s.pop.internals.size();

    ScalarDerivative d;
    d.dm.resize(J);
    d.dx.resize(J);

    std::vector<double> births(J + 1);
    const double m_B = s.pop.boundary.mass;
    const double pi_B = s.pop.boundary.pi;
    const double x_B = scalar_boundary_location(s, xb);
    births[0] = detail::checked(co.beta(t, x_B), "beta") * m_B;

    for (std::size_t i = 0; i < J; ++i) {
        const Cohort1D& c = s.pop.internals[i];
        d.dx[i] = detail::checked(co.b(t, c.location), "b");
        d.dm[i] = -detail::checked(co.c(t, c.location), "c") * c.mass;
        births[i + 1] = detail::checked(co.beta(t, c.location), "beta") * c.mass;
    }

    const double b_at = detail::checked(co.b(t, xb), "b");
    const double db_at = detail::checked(co.db(t, xb), "db");
    const double c_at = detail::checked(co.c(t, xb), "c");
    const double dc_at = detail::checked(co.dc(t, xb), "dc");

    d.dm_B = -c_at * m_B - dc_at * pi_B + pairwise_sum(births);
    d.dpi_B = b_at * m_B + db_at * pi_B - c_at * pi_B;
    return d;
}

// Boundary reset: promote the boundary pair to a fresh internal cohort at
// the front of the list and start an empty boundary cohort.
inline ScalarState scalar_internalize(const ScalarState& state, double t_n, double x_b) {
    if (std::abs(state.t - t_n) > 1e-8)
        throw internal_error("scalar_internalize: state time does not match the grid node");

    ScalarState out;
    out.t = state.t;
    out.n = state.n + 1;

    Cohort1D promoted;
    promoted.mass = state.pop.boundary.mass;
    promoted.location = scalar_boundary_location(state, x_b);

    out.pop.internals.reserve(state.pop.internals.size() + 1);
    out.pop.internals.push_back(promoted);
    out.pop.internals.insert(out.pop.internals.end(), state.pop.internals.begin(),
                             state.pop.internals.end());
    out.pop.boundary = {0.0, 0.0};
    return out;
}

namespace detail {

inline void scalar_pack(const ScalarState& s, std::vector<double>& y) {
    y.clear();
    y.reserve(2 + 2 * s.pop.internals.size());
    y.push_back(s.pop.boundary.mass);
    y.push_back(s.pop.boundary.pi);
    for (const auto& c : s.pop.internals) {
        y.push_back(c.mass);
        y.push_back(c.location);
    }
}

inline void scalar_unpack(const std::vector<double>& y, ScalarState& s) {
    std::size_t k = 0;
    s.pop.boundary.mass = y[k++];
    s.pop.boundary.pi = y[k++];
    for (auto& c : s.pop.internals) {
        c.mass = y[k++];
        c.location = y[k++];
    }
}

} // namespace detail

inline ScalarState scalar_step(const ScalarState& state, double dt,
                               const ScalarCoefficients& co, Diagnostics* diag = nullptr) {
    if (!(dt > 0.0)) throw config_error("scalar_step: dt must be positive");

    ScalarState scratch = state;
    std::vector<double> y;
    detail::scalar_pack(state, y);

    auto packed_rhs = [&](double t, const std::vector<double>& yv, std::vector<double>& dy) {
        detail::scalar_unpack(yv, scratch);
        scratch.t = t;
        const ScalarDerivative d = scalar_rhs(scratch, co);
        std::size_t k = 0;
        dy[k++] = d.dm_B;
        dy[k++] = d.dpi_B;
        for (std::size_t i = 0; i < d.dm.size(); ++i) {
            dy[k++] = d.dm[i];
            dy[k++] = d.dx[i];
        }
    };
    rk4_step(y, state.t, dt, packed_rhs);

    ScalarState out = state;
    detail::scalar_unpack(y, out);
    out.t = state.t + dt;

    for (double v : y)
        if (!std::isfinite(v)) throw blowup_error("scalar_step: non-finite state component");

    auto clamp_mass = [&](double& m) {
        if (m < 0.0) {
            if (diag) {
                if (m < -1e-10) {
                    ++diag->clamp_events;
                    diag->record("mass clamp", out.t, m);
                    if (-m > diag->max_undershoot) diag->max_undershoot = -m;
                } else {
                    ++diag->minor_clamps;
                }
            }
            m = 0.0;
        }
    };
    clamp_mass(out.pop.boundary.mass);
    for (auto& c : out.pop.internals) clamp_mass(c.mass);

    for (std::size_t i = 1; i < out.pop.internals.size(); ++i)
        if (!(out.pop.internals[i].location > out.pop.internals[i - 1].location))
            throw step_size_error("scalar_step: cohort locations crossed; reduce the step");

    return out;
}

// Builds the initial cohort list from a density on a strictly increasing
// breakpoint mesh starting at the minimal age.
template <class U0>
ScalarState scalar_init_state(U0&& u0, const std::vector<double>& mesh, double x_b = 0.0,
                              int quad_nodes = 257) {
    if (mesh.size() < 2)
        throw input_error("scalar_init_state: mesh needs at least two breakpoints");
    if (mesh.front() != x_b)
        throw input_error("scalar_init_state: mesh must start at the minimal age");
    for (std::size_t k = 1; k < mesh.size(); ++k)
        if (!(mesh[k] > mesh[k - 1]))
            throw input_error("scalar_init_state: mesh breakpoints must be strictly increasing");

    const double l_last = mesh.back();
    detail::check_nonnegative_1d(u0, x_b, l_last, 513, "u0");
    detail::check_support_1d(u0, l_last, "u0");

    ScalarState s;
    s.pop.internals.reserve(mesh.size() - 1);
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k)
        s.pop.internals.push_back(detail::cell_cohort_1d(u0, mesh[k], mesh[k + 1], quad_nodes));
    s.pop.boundary = {0.0, 0.0};
    return s;
}

inline AtomicMeasure1D scalar_extract_measure(const ScalarState& s, double x_b = 0.0) {
    AtomicMeasure1D m;
    if (s.pop.boundary.mass > 0.0)
        m.atoms.push_back({scalar_boundary_location(s, x_b), s.pop.boundary.mass});
    for (const auto& c : s.pop.internals)
        if (c.mass > 0.0) m.atoms.push_back({c.location, c.mass});
    return m;
}

// Internalization-stepping driver; mirrors the two-sex run contract.
inline std::vector<ScalarState> scalar_run(const ScalarState& initial,
                                           const ScalarCoefficients& co,
                                           const IntegratorConfig& cfg,
                                           Diagnostics* diag = nullptr) {
    if (!(cfg.dt_internalization > 0.0))
        throw config_error("scalar_run: dt_internalization must be positive");
    if (cfg.substeps < 1) throw config_error("scalar_run: substeps must be at least 1");
    const double steps_real = cfg.t_end / cfg.dt_internalization;
    const long steps = std::lround(steps_real);
    if (steps < 1 ||
        std::abs(steps * cfg.dt_internalization - cfg.t_end) > 1e-12)
        throw config_error("scalar_run: t_end must be an integer multiple of dt_internalization");

    std::vector<ScalarState> snapshots;
    snapshots.reserve(static_cast<std::size_t>(steps) + 1);
    snapshots.push_back(initial);

    ScalarState state = initial;
    const double dt_sub = cfg.dt_internalization / cfg.substeps;
    for (long n = 0; n < steps; ++n) {
        try {
            for (int sub = 0; sub < cfg.substeps; ++sub) {
                state.t = static_cast<double>(n) * cfg.dt_internalization + sub * dt_sub;
                state = scalar_step(state, dt_sub, co, diag);
            }
            state.t = static_cast<double>(n + 1) * cfg.dt_internalization;
            state = scalar_internalize(state, state.t, co.x_b);
        } catch (const error& e) {
            throw error(std::string(e.what()) + " [n=" + std::to_string(n) +
                        ", t=" + std::to_string(state.t) + "]");
        }
        snapshots.push_back(state);
    }
    return snapshots;
}

} // namespace ebt
