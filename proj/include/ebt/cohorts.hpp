#pragma once
// Cohort state model for the two-sex EBT scheme: per-sex boundary and
// internal cohorts, the couple cohort grid, initialization from densities,
// internalization at interval boundaries, and the measure extraction /
// projection operators (E and P).
//
// Index convention: per sex, slot 0 is the boundary cohort and slots
// 1..side-1 are internal cohorts ordered by strictly increasing location.
// The couple grid is side x side, row-major, row = male slot, column =
// female slot; row/column 0 belong to the boundary cohorts.

#include <cmath>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ebt/numerics.hpp"

namespace ebt {

// Zero-mass threshold for the m=0 branch of location recovery. The paper
// states the exact-zero rule only; a tolerance is mandatory in floating
// point.
inline constexpr double kMassEpsilon = 1e-12;

struct Cohort1D {
    double mass = 0.0;
    double location = 0.0;
};

// Boundary cohorts track (mass, first moment) because their location formula
// degenerates at zero mass.
struct BoundaryCohort1D {
    double mass = 0.0;
    double pi = 0.0;

    double location(double eps = kMassEpsilon) const {
        return mass > eps ? pi / mass : 0.0;
    }
};

// Couple cohorts carry first moments xbar, ybar; locations are recovered as
// moment/mass quotients, (0,0) at (near-)zero mass.
struct CoupleCohort {
    double mass = 0.0;
    double xbar = 0.0;
    double ybar = 0.0;

    std::pair<double, double> location(double eps = kMassEpsilon) const {
        if (mass > eps) return {xbar / mass, ybar / mass};
        return {0.0, 0.0};
    }
};

struct Sex1D {
    BoundaryCohort1D boundary;
    std::vector<Cohort1D> internals;  // ordered, youngest first

    double total_mass() const {
        std::vector<double> terms;
        terms.reserve(internals.size() + 1);
        terms.push_back(boundary.mass);
        for (const auto& c : internals) terms.push_back(c.mass);
        return pairwise_sum(terms);
    }
};

struct PopulationState {
    double t = 0.0;
    int n = 0;  // internalization count so far
    Sex1D male;
    Sex1D female;
    int side = 0;  // couple grid edge = internals + 1 (the boundary slot)
    std::vector<CoupleCohort> couples;  // side*side, row-major

    CoupleCohort& couple(int i, int j) { return couples[i * side + j]; }
    const CoupleCohort& couple(int i, int j) const { return couples[i * side + j]; }

    // Location of male slot a (0 = boundary).
    double male_location(int a) const {
        return a == 0 ? male.boundary.location() : male.internals[a - 1].location;
    }
    double female_location(int b) const {
        return b == 0 ? female.boundary.location() : female.internals[b - 1].location;
    }
    double male_mass(int a) const {
        return a == 0 ? male.boundary.mass : male.internals[a - 1].mass;
    }
    double female_mass(int b) const {
        return b == 0 ? female.boundary.mass : female.internals[b - 1].mass;
    }

    double couple_total_mass() const {
        std::vector<double> terms;
        terms.reserve(couples.size());
        for (const auto& c : couples) terms.push_back(c.mass);
        return pairwise_sum(terms);
    }
};

struct AtomicMeasure1D {
    struct Atom {
        double location = 0.0;
        double weight = 0.0;
    };
    std::vector<Atom> atoms;

    double total_mass() const {
        std::vector<double> w;
        w.reserve(atoms.size());
        for (const auto& a : atoms) w.push_back(a.weight);
        return pairwise_sum(w);
    }
};

struct AtomicMeasure2D {
    struct Atom {
        double x = 0.0;
        double y = 0.0;
        double weight = 0.0;
    };
    std::vector<Atom> atoms;

    double total_mass() const {
        std::vector<double> w;
        w.reserve(atoms.size());
        for (const auto& a : atoms) w.push_back(a.weight);
        return pairwise_sum(w);
    }
};

namespace detail {

template <class F>
void check_nonnegative_1d(F&& f, double lo, double hi, int nodes, const char* what) {
    const double h = (hi - lo) / (nodes - 1);
    for (int k = 0; k < nodes; ++k) {
        if (f(lo + h * k) < 0.0)
            throw input_error(std::string("negative density sample in ") + what);
    }
}

// Support check: sample the density beyond the last breakpoint; any value
// above tolerance means the mesh does not cover the initial support.
template <class F>
void check_support_1d(F&& f, double l_last, const char* what) {
    const double probe_hi = 2.0 * l_last;
    const int nodes = 129;
    const double h = (probe_hi - l_last) / nodes;
    for (int k = 1; k <= nodes; ++k) {
        if (std::abs(f(l_last + h * k)) > 1e-12)
            throw support_error(std::string(what) + " support exceeds the last mesh breakpoint");
    }
}

template <class F2>
void check_support_2d(F2&& f, double l_last) {
    const int nodes = 33;
    const double probe_hi = 2.0 * l_last;
    const double hb = (probe_hi - l_last) / nodes;
    const double ha = probe_hi / (2 * nodes);
    for (int i = 1; i <= nodes; ++i) {
        for (int j = 0; j <= 2 * nodes; ++j) {
            if (std::abs(f(l_last + hb * i, ha * j)) > 1e-12 ||
                std::abs(f(ha * j, l_last + hb * i)) > 1e-12)
                throw support_error("couple density support exceeds the last mesh breakpoint");
        }
    }
}

template <class F>
Cohort1D cell_cohort_1d(F&& f, double a, double b, int nodes) {
    Cohort1D c;
    c.mass = simpson(f, a, b, nodes);
    if (c.mass > kMassEpsilon) {
        const double moment = simpson([&](double x) { return x * f(x); }, a, b, nodes);
        c.location = moment / c.mass;
    } else {
        c.location = 0.5 * (a + b);  // zero-mass cells sit at the midpoint
    }
    return c;
}

} // namespace detail

// Build the initial state from densities on a strictly increasing breakpoint
// mesh l_0 < ... < l_J with l_0 = 0. Each mesh cell becomes one internal
// cohort (mass = integral, location = first moment / mass); the boundary
// cohorts start empty, matching the width-zero boundary cell at t = 0.
template <class UM, class UF, class UC>
PopulationState init_state(UM&& u0m, UF&& u0f, UC&& u0c,
                           const std::vector<double>& mesh, int quad_nodes = 257) {
    if (mesh.size() < 2) throw input_error("init_state: mesh needs at least two breakpoints");
    if (mesh.front() != 0.0) throw input_error("init_state: mesh must start at 0");
    for (std::size_t k = 1; k < mesh.size(); ++k)
        if (!(mesh[k] > mesh[k - 1]))
            throw input_error("init_state: mesh breakpoints must be strictly increasing");

    const double l_last = mesh.back();
    detail::check_nonnegative_1d(u0m, 0.0, l_last, 513, "u0_m");
    detail::check_nonnegative_1d(u0f, 0.0, l_last, 513, "u0_f");
    detail::check_support_1d(u0m, l_last, "u0_m");
    detail::check_support_1d(u0f, l_last, "u0_f");
    detail::check_support_2d(u0c, l_last);

    PopulationState s;
    const int cells = static_cast<int>(mesh.size()) - 1;
    s.side = cells + 1;

    for (int k = 0; k < cells; ++k) {
        s.male.internals.push_back(
            detail::cell_cohort_1d(u0m, mesh[k], mesh[k + 1], quad_nodes));
        s.female.internals.push_back(
            detail::cell_cohort_1d(u0f, mesh[k], mesh[k + 1], quad_nodes));
    }

    s.couples.assign(static_cast<std::size_t>(s.side) * s.side, CoupleCohort{});
    for (int a = 1; a <= cells; ++a) {
        for (int b = 1; b <= cells; ++b) {
            const double xa = mesh[a - 1], xb = mesh[a];
            const double ya = mesh[b - 1], yb = mesh[b];
            auto f_m = [&](double x) {
                return simpson([&](double y) {
                    const double v = u0c(x, y);
                    if (v < 0.0) throw input_error("negative density sample in u0_c");
                    return v;
                }, ya, yb, quad_nodes);
            };
            CoupleCohort cc;
            cc.mass = simpson(f_m, xa, xb, quad_nodes);
            if (cc.mass > kMassEpsilon) {
                cc.xbar = simpson([&](double x) { return x * f_m(x); }, xa, xb, quad_nodes);
                cc.ybar = simpson(
                    [&](double x) {
                        return simpson([&](double y) { return y * u0c(x, y); }, ya, yb,
                                       quad_nodes);
                    },
                    xa, xb, quad_nodes);
            } else {
                cc.mass = std::max(cc.mass, 0.0);
                cc.xbar = 0.0;
                cc.ybar = 0.0;
            }
            s.couple(a, b) = cc;
        }
    }
    return s;
}

// Internalization: promote the boundary cohorts to internal (their location
// recovered as pi/mass, 0 at zero mass), append fresh empty boundary
// cohorts, and grow the couple grid by one zero row and column at slot 0.
// Mass totals are copied, never recomputed, so they are preserved exactly.
inline PopulationState internalize(const PopulationState& state, double t_n) {
    if (std::abs(state.t - t_n) > 1e-8)
        throw internal_error("internalize: state time does not match t_n");

    PopulationState out;
    out.t = state.t;
    out.n = state.n + 1;

    auto promote = [](const Sex1D& sex) {
        Sex1D next;
        Cohort1D promoted;
        promoted.mass = sex.boundary.mass;
        promoted.location = sex.boundary.location();
        next.internals.reserve(sex.internals.size() + 1);
        next.internals.push_back(promoted);
        next.internals.insert(next.internals.end(), sex.internals.begin(),
                              sex.internals.end());
        next.boundary = BoundaryCohort1D{};
        return next;
    };
    out.male = promote(state.male);
    out.female = promote(state.female);

    out.side = state.side + 1;
    out.couples.assign(static_cast<std::size_t>(out.side) * out.side, CoupleCohort{});
    for (int i = 0; i < state.side; ++i)
        for (int j = 0; j < state.side; ++j)
            out.couple(i + 1, j + 1) = state.couple(i, j);
    return out;
}

// Operator E: one atom per cohort at its (recovered) location; zero-mass
// atoms are omitted.
inline std::tuple<AtomicMeasure1D, AtomicMeasure1D, AtomicMeasure2D>
extract_measures(const PopulationState& state) {
    AtomicMeasure1D mm, mf;
    AtomicMeasure2D mc;

    auto extract_sex = [](const Sex1D& sex, AtomicMeasure1D& out) {
        if (sex.boundary.mass > 0.0)
            out.atoms.push_back({sex.boundary.location(), sex.boundary.mass});
        for (const auto& c : sex.internals)
            if (c.mass > 0.0) out.atoms.push_back({c.location, c.mass});
    };
    extract_sex(state.male, mm);
    extract_sex(state.female, mf);

    for (int i = 0; i < state.side; ++i) {
        for (int j = 0; j < state.side; ++j) {
            const auto& c = state.couple(i, j);
            if (c.mass > 0.0) {
                const auto [x, y] = c.location();
                mc.atoms.push_back({x, y, c.mass});
            }
        }
    }
    return {mm, mf, mc};
}

// Shape of a state as seen by the projection operator.
struct StateShape {
    int per_sex = 0;  // boundary + internal cohorts
    int couple_side = 0;

    static StateShape of(const PopulationState& s) {
        return {static_cast<int>(s.male.internals.size()) + 1, s.side};
    }
};

struct ProjectedTuples {
    std::vector<std::pair<double, double>> male;    // (location, mass)
    std::vector<std::pair<double, double>> female;  // (location, mass)
    std::vector<std::tuple<double, double, double>> couples;  // (x, y, mass)
};

// Operator P: measures back to cohort tuples; left inverse of
// extract_measures on states whose cohorts all carry positive mass.
inline ProjectedTuples project(const AtomicMeasure1D& mm, const AtomicMeasure1D& mf,
                               const AtomicMeasure2D& mc, const StateShape& shape) {
    if (static_cast<int>(mm.atoms.size()) != shape.per_sex ||
        static_cast<int>(mf.atoms.size()) != shape.per_sex)
        throw dimension_error("project: 1D atom count does not match the state shape");
    if (static_cast<int>(mc.atoms.size()) != shape.couple_side * shape.couple_side)
        throw dimension_error("project: couple atom count does not match the state shape");

    ProjectedTuples out;
    out.male.reserve(mm.atoms.size());
    for (const auto& a : mm.atoms) out.male.emplace_back(a.location, a.weight);
    out.female.reserve(mf.atoms.size());
    for (const auto& a : mf.atoms) out.female.emplace_back(a.location, a.weight);
    out.couples.reserve(mc.atoms.size());
    for (const auto& a : mc.atoms) out.couples.emplace_back(a.x, a.y, a.weight);
    return out;
}

// Optional culling pass (off by default in all runs): drop internal cohorts
// whose mass stayed below eps after their location passed max_age. Index
// bookkeeping then no longer matches the uncut cohort counts, so this is a
// post-processing step, never applied mid-run.
inline PopulationState cull(const PopulationState& state, double eps, double max_age) {
    PopulationState out = state;
    auto keep = [&](const Cohort1D& c) { return c.mass >= eps || c.location <= max_age; };
    // 1D culling only; couple cells tied to dropped rows keep their slots by
    // design (the grid stays square against the uncut lists).
    Sex1D m, f;
    m.boundary = state.male.boundary;
    f.boundary = state.female.boundary;
    for (const auto& c : state.male.internals)
        if (keep(c)) m.internals.push_back(c);
    for (const auto& c : state.female.internals)
        if (keep(c)) f.internals.push_back(c);
    out.male = m;
    out.female = f;
    return out;
}

// CSV snapshot layout (one row per cohort: indices, mass, location, moments).
inline void write_sex_csv(std::ostream& os, const Sex1D& sex) {
    os << "slot,mass,location,moment\n";
    os << "0," << sex.boundary.mass << ',' << sex.boundary.location() << ','
       << sex.boundary.pi << "\n";
    for (std::size_t k = 0; k < sex.internals.size(); ++k) {
        const auto& c = sex.internals[k];
        os << (k + 1) << ',' << c.mass << ',' << c.location << ','
           << c.mass * c.location << "\n";
    }
}

inline void write_couples_csv(std::ostream& os, const PopulationState& s) {
    os << "row,col,mass,x,y,xbar,ybar\n";
    for (int i = 0; i < s.side; ++i) {
        for (int j = 0; j < s.side; ++j) {
            const auto& c = s.couple(i, j);
            const auto [x, y] = c.location();
            os << i << ',' << j << ',' << c.mass << ',' << x << ',' << y << ','
               << c.xbar << ',' << c.ybar << "\n";
        }
    }
}

} // namespace ebt
