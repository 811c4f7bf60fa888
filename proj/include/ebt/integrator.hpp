#pragma once
// Time integration: fixed-step RK4 over each internalization interval,
// internalization at interval boundaries, invariant checks and diagnostics.
//
// RK4 rather than Euler: the scheme is first order in cohort width, so a
// fourth-order time integrator keeps temporal error far below the spatial
// error the convergence harness measures. Snapshot times are computed as
// n * dt (never accumulated addition).

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ebt/cohorts.hpp"
#include "ebt/model.hpp"
#include "ebt/numerics.hpp"
#include "ebt/rhs.hpp"

namespace ebt {

struct IntegratorConfig {
    double dt_internalization = 0.1;
    int substeps = 4;
    double t_end = 1.0;
    bool cone_check = true;
    double epsilon_mass = 1e-12;
    // Cone constant C in 0 <= xbar <= (t + C) * mass + eps; set to the domain
    // cutoff x_max at initialization.
    double cone_constant = 0.0;
    double epsilon_cone = 1e-10;
};

struct Diagnostics {
    long clamp_events = 0;        // mass undershoot beyond 1e-10, clamped to 0
    long minor_clamps = 0;        // undershoot within 1e-10, clamped silently
    double max_undershoot = 0.0;
    long denominator_floors = 0;  // D hit the gamma/2 floor
    long cone_violations = 0;
    long ordering_checks = 0;
    long negative_N_cells = 0;    // informational
    std::vector<std::string> events;

    void record(const char* kind, double t, double value) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s t=%.12g value=%.17g", kind, t, value);
        events.emplace_back(buf);
    }
    bool clean() const {
        return clamp_events == 0 && denominator_floors == 0 && cone_violations == 0;
    }
};

namespace detail {

inline std::size_t packed_size(const PopulationState& s) {
    return 2 + 2 * s.male.internals.size() + 2 + 2 * s.female.internals.size() +
           3 * s.couples.size();
}

inline void pack(const PopulationState& s, std::vector<double>& y) {
    y.clear();
    y.reserve(packed_size(s));
    y.push_back(s.male.boundary.mass);
    y.push_back(s.male.boundary.pi);
    for (const auto& c : s.male.internals) {
        y.push_back(c.mass);
        y.push_back(c.location);
    }
    y.push_back(s.female.boundary.mass);
    y.push_back(s.female.boundary.pi);
    for (const auto& c : s.female.internals) {
        y.push_back(c.mass);
        y.push_back(c.location);
    }
    for (const auto& c : s.couples) {
        y.push_back(c.mass);
        y.push_back(c.xbar);
        y.push_back(c.ybar);
    }
}

// Writes the numeric content of y into the (structurally matching) state.
inline void unpack(const std::vector<double>& y, PopulationState& s) {
    std::size_t k = 0;
    s.male.boundary.mass = y[k++];
    s.male.boundary.pi = y[k++];
    for (auto& c : s.male.internals) {
        c.mass = y[k++];
        c.location = y[k++];
    }
    s.female.boundary.mass = y[k++];
    s.female.boundary.pi = y[k++];
    for (auto& c : s.female.internals) {
        c.mass = y[k++];
        c.location = y[k++];
    }
    for (auto& c : s.couples) {
        c.mass = y[k++];
        c.xbar = y[k++];
        c.ybar = y[k++];
    }
}

inline void pack_derivative(const StateDerivative& d, std::vector<double>& dy) {
    std::size_t k = 0;
    dy[k++] = d.dm_B_m;
    dy[k++] = d.dpi_B_m;
    for (std::size_t a = 0; a < d.dm_m.size(); ++a) {
        dy[k++] = d.dm_m[a];
        dy[k++] = d.dloc_m[a];
    }
    dy[k++] = d.dm_B_f;
    dy[k++] = d.dpi_B_f;
    for (std::size_t b = 0; b < d.dm_f.size(); ++b) {
        dy[k++] = d.dm_f[b];
        dy[k++] = d.dloc_f[b];
    }
    for (std::size_t c = 0; c < d.dm_c.size(); ++c) {
        dy[k++] = d.dm_c[c];
        dy[k++] = d.dxbar_c[c];
        dy[k++] = d.dybar_c[c];
    }
}

} // namespace detail

// One RK4 step of length dt from state.t. Masses are clamped at zero after
// the step (clamp events recorded), and the internal location ordering is
// re-validated.
inline PopulationState step(const PopulationState& state, double dt,
                            const Coefficients& co, Diagnostics* diag = nullptr) {
    if (!(dt > 0.0)) throw config_error("step: dt must be positive");

    PopulationState scratch = state;
    std::vector<double> y;
    detail::pack(state, y);

    long floors = 0;
    long negatives = 0;
    auto packed_rhs = [&](double t, const std::vector<double>& yv,
                          std::vector<double>& dy) {
        detail::unpack(yv, scratch);
        scratch.t = t;
        MarriageTerms terms;
        const StateDerivative d = rhs(scratch, co, &terms);
        if (terms.floored) ++floors;
        negatives += terms.negative_cells;
        detail::pack_derivative(d, dy);
    };
    rk4_step(y, state.t, dt, packed_rhs);

    PopulationState out = state;
    detail::unpack(y, out);
    out.t = state.t + dt;

    if (diag) {
        diag->denominator_floors += floors;
        diag->negative_N_cells += negatives;
    }

    auto clamp_mass = [&](double& m) {
        if (m < 0.0) {
            const double under = -m;
            if (diag) {
                if (under > 1e-10) {
                    ++diag->clamp_events;
                    diag->record("clamp", out.t, under);
                } else {
                    ++diag->minor_clamps;
                }
                if (under > diag->max_undershoot) diag->max_undershoot = under;
            }
            m = 0.0;
        }
    };
    clamp_mass(out.male.boundary.mass);
    clamp_mass(out.female.boundary.mass);
    for (auto& c : out.male.internals) clamp_mass(c.mass);
    for (auto& c : out.female.internals) clamp_mass(c.mass);
    for (auto& c : out.couples) clamp_mass(c.mass);

    auto check_ordering = [&](const Sex1D& sex, const char* which) {
        for (std::size_t a = 1; a < sex.internals.size(); ++a) {
            if (!(sex.internals[a].location > sex.internals[a - 1].location))
                throw step_size_error(std::string(which) +
                                      " internal cohort locations out of order; "
                                      "reduce the step size");
        }
    };
    check_ordering(out.male, "male");
    check_ordering(out.female, "female");
    if (diag) ++diag->ordering_checks;

    return out;
}

namespace detail {

inline void check_cone(const PopulationState& s, const IntegratorConfig& cfg,
                       Diagnostics* diag) {
    if (!diag) return;
    const double bound_rate = s.t + cfg.cone_constant;
    for (const auto& c : s.couples) {
        const double cap = bound_rate * c.mass + cfg.epsilon_cone;
        if (c.xbar < -cfg.epsilon_cone || c.xbar > cap || c.ybar < -cfg.epsilon_cone ||
            c.ybar > cap) {
            ++diag->cone_violations;
            diag->record("cone", s.t, std::max(c.xbar, c.ybar));
        }
    }
}

} // namespace detail

// Advance from the initial state to t_end, internalizing after the final
// substep of each interval. Returns one snapshot per internalization moment,
// with the initial state first.
inline std::vector<PopulationState> run(const PopulationState& initial,
                                        const Coefficients& co,
                                        const IntegratorConfig& cfg,
                                        Diagnostics* diag = nullptr) {
    if (!(cfg.dt_internalization > 0.0))
        throw config_error("run: dt_internalization must be positive");
    if (cfg.substeps < 1) throw config_error("run: substeps must be >= 1");
    const double intervals_exact = cfg.t_end / cfg.dt_internalization;
    const int intervals = static_cast<int>(std::lround(intervals_exact));
    if (intervals < 1 ||
        std::abs(intervals * cfg.dt_internalization - cfg.t_end) > 1e-12)
        throw config_error("run: t_end must be an integer multiple of dt_internalization");

    std::vector<PopulationState> snapshots;
    snapshots.reserve(intervals + 1);
    snapshots.push_back(initial);

    PopulationState state = initial;
    const double dt_sub = cfg.dt_internalization / cfg.substeps;
    try {
        for (int n = 0; n < intervals; ++n) {
            for (int sstep = 0; sstep < cfg.substeps; ++sstep) {
                state.t = n * cfg.dt_internalization + sstep * dt_sub;
                state = step(state, dt_sub, co, diag);
                if (cfg.cone_check) detail::check_cone(state, cfg, diag);
            }
            state.t = (n + 1) * cfg.dt_internalization;
            state = internalize(state, state.t);
            snapshots.push_back(state);
        }
    } catch (const error& e) {
        throw error(std::string(e.what()) + " [n=" + std::to_string(state.n) +
                    ", t=" + std::to_string(state.t) + "]");
    }
    return snapshots;
}

} // namespace ebt
