#pragma once

// Bounded-Lipschitz (flat) distance between atomic measures.
//
// 1D: the dual problem is solved exactly. The optimal test function can be
// taken piecewise linear with kinks only at atom locations, so the search
// space reduces to one value per atom under |psi| <= 1 and a slope bound
// between neighbours. Scanning atoms left to right turns that into a chain
// of window maximizations over a concave piecewise-linear value function,
// which we carry explicitly.
//
// 2D: the primal problem is solved exactly as a partial transport: move
// mass between the positive and negative parts at l1 ground cost, or pay 1
// per unit to create or destroy it. That is a minimum-cost flow; transport
// arcs are restricted to nearby pairs first and the optimality certificate
// (nonnegative reduced costs on every omitted pair) is checked afterwards,
// adding arcs and re-solving until it holds.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cohorts.hpp"
#include "grids.hpp"
#include "min_cost_flow.hpp"

namespace ebt {

struct MetricConfig {
    int dual_grid_resolution = 64;  // nodes per unit length in test-function dumps
    double lp_tolerance = 1e-9;     // relative slack carried into brackets
    double domain_bound = 0.0;      // informational; 0 derives bounds from atoms
    int transport_neighbours = 16;  // initial transport arcs per source
};

namespace detail {

inline void validate_metric_config(const MetricConfig& cfg) {
    if (cfg.dual_grid_resolution < 8)
        throw config_error("metric: dual_grid_resolution must be at least 8");
    if (!(cfg.lp_tolerance > 0.0) || cfg.lp_tolerance > 1e-7)
        throw config_error("metric: lp_tolerance must lie in (0, 1e-7]");
    if (cfg.transport_neighbours < 1)
        throw config_error("metric: transport_neighbours must be positive");
}

// Concave piecewise-linear function on [-1, 1], tabulated at breakpoints.
struct ConcavePL {
    std::vector<double> xs, vs;

    double eval(double x) const {
        if (x <= xs.front()) return vs.front();
        if (x >= xs.back()) return vs.back();
        const auto it = std::lower_bound(xs.begin(), xs.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin());
        if (xs[i] == x) return vs[i];
        const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return vs[i - 1] + t * (vs[i] - vs[i - 1]);
    }

    double max_value() const {
        double m = vs[0];
        for (double v : vs) m = std::max(m, v);
        return m;
    }

    // Plateau of maximizers [lo, hi] (a single point unless values tie).
    std::pair<double, double> argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < vs.size(); ++i)
            if (vs[i] > vs[best]) best = i;
        std::size_t lo = best, hi = best;
        while (lo > 0 && vs[lo - 1] == vs[best]) --lo;
        while (hi + 1 < vs.size() && vs[hi + 1] == vs[best]) ++hi;
        return {xs[lo], xs[hi]};
    }
};

// max over the window [x-gap, x+gap] of f, i.e. f widened by the slope
// budget accumulated between two neighbouring atoms.
inline ConcavePL slide(const ConcavePL& f, double gap) {
    const auto [p_lo, p_hi] = f.argmax();
    std::vector<double> cand;
    cand.reserve(f.xs.size() + 4);
    cand.push_back(-1.0);
    for (double x : f.xs)
        if (x <= p_lo && x - gap > -1.0 && x - gap < 1.0) cand.push_back(x - gap);
    if (p_lo - gap > -1.0 && p_lo - gap < 1.0) cand.push_back(p_lo - gap);
    if (p_hi + gap > -1.0 && p_hi + gap < 1.0) cand.push_back(p_hi + gap);
    for (double x : f.xs)
        if (x >= p_hi && x + gap > -1.0 && x + gap < 1.0) cand.push_back(x + gap);
    cand.push_back(1.0);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    ConcavePL out;
    out.xs = std::move(cand);
    out.vs.resize(out.xs.size());
    for (std::size_t i = 0; i < out.xs.size(); ++i) {
        const double x = out.xs[i];
        double probe;
        if (x + gap < p_lo)
            probe = x + gap;
        else if (x - gap > p_hi)
            probe = x - gap;
        else
            probe = std::clamp(x, p_lo, p_hi);
        out.vs[i] = f.eval(probe);
    }
    return out;
}

struct SignedAtom1D {
    double x = 0.0;
    double w = 0.0;
};

// Net signed atom list of mu - nu, sorted by location, exact-duplicate
// locations combined.
inline std::vector<SignedAtom1D> signed_atoms(const AtomicMeasure1D& mu,
                                              const AtomicMeasure1D& nu) {
    std::vector<SignedAtom1D> all;
    all.reserve(mu.atoms.size() + nu.atoms.size());
    for (const auto& a : mu.atoms) {
        if (!std::isfinite(a.location) || !std::isfinite(a.weight))
            throw input_error("flat metric: non-finite atom");
        all.push_back({a.location, a.weight});
    }
    for (const auto& a : nu.atoms) {
        if (!std::isfinite(a.location) || !std::isfinite(a.weight))
            throw input_error("flat metric: non-finite atom");
        all.push_back({a.location, -a.weight});
    }
    std::sort(all.begin(), all.end(),
              [](const SignedAtom1D& p, const SignedAtom1D& q) { return p.x < q.x; });
    std::vector<SignedAtom1D> out;
    for (const auto& a : all) {
        if (!out.empty() && out.back().x == a.x)
            out.back().w += a.w;
        else
            out.push_back(a);
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const SignedAtom1D& a) { return a.w == 0.0; }),
              out.end());
    return out;
}

} // namespace detail

// Exact 1D flat distance. When psi_out is given it receives the optimizing
// test function sampled at the atom locations.
inline double rho_flat_1d(const AtomicMeasure1D& mu, const AtomicMeasure1D& nu,
                          const MetricConfig& cfg = {},
                          std::vector<std::pair<double, double>>* psi_out = nullptr) {
    detail::validate_metric_config(cfg);
    const auto atoms = detail::signed_atoms(mu, nu);
    if (psi_out) psi_out->clear();
    if (atoms.empty()) return 0.0;

    detail::ConcavePL V;
    V.xs = {-1.0, 1.0};
    V.vs = {-atoms[0].w, atoms[0].w};
    std::vector<std::pair<double, double>> peaks;  // plateau per processed atom
    peaks.reserve(atoms.size());
    peaks.push_back(V.argmax());

    for (std::size_t k = 1; k < atoms.size(); ++k) {
        const double gap = atoms[k].x - atoms[k - 1].x;
        V = detail::slide(V, gap);
        for (std::size_t i = 0; i < V.xs.size(); ++i) V.vs[i] += atoms[k].w * V.xs[i];
        peaks.push_back(V.argmax());
    }
    const double value = V.max_value();

    if (psi_out) {
        const std::size_t n = atoms.size();
        std::vector<double> psi(n);
        psi[n - 1] = std::clamp(0.5 * (peaks[n - 1].first + peaks[n - 1].second), -1.0, 1.0);
        for (std::size_t k = n - 1; k-- > 0;) {
            const double gap = atoms[k + 1].x - atoms[k].x;
            const double target = std::clamp(psi[k + 1], peaks[k].first, peaks[k].second);
            psi[k] = std::clamp(target, psi[k + 1] - gap, psi[k + 1] + gap);
        }
        for (std::size_t k = 0; k < n; ++k) psi_out->push_back({atoms[k].x, psi[k]});
    }
    return value;
}

inline void write_psi_csv(std::ostream& os,
                          const std::vector<std::pair<double, double>>& psi) {
    os << "x,psi\n";
    for (const auto& [x, v] : psi) os << x << ',' << v << "\n";
}

struct DistanceBracket {
    double lower = 0.0;
    double upper = 0.0;
    double value() const { return 0.5 * (lower + upper); }
    double width() const { return upper - lower; }
};

namespace detail {

struct SignedAtom2D {
    double x = 0.0, y = 0.0, w = 0.0;
};

inline std::vector<SignedAtom2D> signed_atoms_2d(const AtomicMeasure2D& mu,
                                                 const AtomicMeasure2D& nu) {
    std::vector<SignedAtom2D> all;
    all.reserve(mu.atoms.size() + nu.atoms.size());
    for (const auto& a : mu.atoms) {
        if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.weight))
            throw input_error("flat metric: non-finite atom");
        all.push_back({a.x, a.y, a.weight});
    }
    for (const auto& a : nu.atoms) {
        if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.weight))
            throw input_error("flat metric: non-finite atom");
        all.push_back({a.x, a.y, -a.weight});
    }
    std::sort(all.begin(), all.end(), [](const SignedAtom2D& p, const SignedAtom2D& q) {
        return p.x != q.x ? p.x < q.x : p.y < q.y;
    });
    std::vector<SignedAtom2D> out;
    for (const auto& a : all) {
        if (!out.empty() && out.back().x == a.x && out.back().y == a.y)
            out.back().w += a.w;
        else
            out.push_back(a);
    }
    return out;
}

} // namespace detail

// Exact 2D flat distance with the l1 ground metric, returned as a bracket
// whose width only reflects the configured floating-point slack.
inline DistanceBracket rho_flat_2d(const AtomicMeasure2D& mu, const AtomicMeasure2D& nu,
                                   const MetricConfig& cfg = {}) {
    detail::validate_metric_config(cfg);
    const auto all = detail::signed_atoms_2d(mu, nu);

    std::vector<double> px, py, pa;  // positive part
    std::vector<double> qx, qy, qb;  // negative part
    for (const auto& a : all) {
        if (a.w > 0.0) {
            px.push_back(a.x);
            py.push_back(a.y);
            pa.push_back(a.w);
        } else if (a.w < 0.0) {
            qx.push_back(a.x);
            qy.push_back(a.y);
            qb.push_back(-a.w);
        }
    }
    const int n = static_cast<int>(pa.size());
    const int m = static_cast<int>(qb.size());
    const double sum_a = pairwise_sum(pa);
    const double sum_b = pairwise_sum(qb);

    auto bracketed = [&](double v) {
        const double slack = cfg.lp_tolerance * v;
        return DistanceBracket{v - slack, v + slack};
    };
    if (n == 0 && m == 0) return {0.0, 0.0};
    if (n == 0) return bracketed(sum_b);
    if (m == 0) return bracketed(sum_a);

    const auto dist = [&](int i, int j) {
        return std::abs(px[i] - qx[j]) + std::abs(py[i] - qy[j]);
    };

    // Initial arc set: nearest sinks per source, ties broken on sink index.
    const int k_init = std::min(m, cfg.transport_neighbours);
    std::vector<std::vector<int>> arcs(n);
    {
        std::vector<std::pair<double, int>> best;
        for (int i = 0; i < n; ++i) {
            best.clear();
            for (int j = 0; j < m; ++j) {
                const double d = dist(i, j);
                if (d >= 2.0) continue;
                if (static_cast<int>(best.size()) < k_init) {
                    best.push_back({d, j});
                    std::push_heap(best.begin(), best.end());
                } else if (std::make_pair(d, j) < best.front()) {
                    std::pop_heap(best.begin(), best.end());
                    best.back() = {d, j};
                    std::push_heap(best.begin(), best.end());
                }
            }
            std::sort(best.begin(), best.end());
            arcs[i].reserve(best.size());
            for (const auto& [d, j] : best) arcs[i].push_back(j);
        }
    }

    const double total = sum_a + sum_b;
    double value = 0.0;
    const int max_rounds = 64;
    for (int round = 0;; ++round) {
        if (round == max_rounds)
            throw internal_error("flat metric 2d: optimality certificate did not close");

        // Nodes: 0 = super source, 1..n sources, n+1..n+m sinks,
        // n+m+1 = slack node, n+m+2 = super sink.
        const int S = 0, T = n + m + 2, slack = n + m + 1;
        MinCostFlow net(n + m + 3);
        for (int i = 0; i < n; ++i) net.add_arc(S, 1 + i, pa[i], 0.0);
        for (int j = 0; j < m; ++j) net.add_arc(1 + n + j, T, qb[j], 0.0);
        net.add_arc(S, slack, sum_b, 0.0);
        net.add_arc(slack, T, sum_a, 0.0);
        for (int i = 0; i < n; ++i) net.add_arc(1 + i, slack, pa[i], 1.0);
        for (int j = 0; j < m; ++j) net.add_arc(slack, 1 + n + j, qb[j], 1.0);
        for (int i = 0; i < n; ++i)
            for (int j : arcs[i]) net.add_arc(1 + i, 1 + n + j, pa[i], dist(i, j));

        const auto res = net.solve(S, T, total);
        if (res.flow < total * (1.0 - 1e-9))
            throw internal_error("flat metric 2d: network did not absorb the required flow");
        value = res.cost;

        // Certificate: every omitted transport arc must price out.
        bool clean = true;
        const double tol = 1e-12 + cfg.lp_tolerance;
        std::vector<char> have(static_cast<std::size_t>(m), 0);
        for (int i = 0; i < n; ++i) {
            const std::size_t kept = arcs[i].size();
            for (std::size_t k = 0; k < kept; ++k) have[arcs[i][k]] = 1;
            const double pi_i = net.potential(1 + i);
            for (int j = 0; j < m; ++j) {
                if (have[j]) continue;
                const double d = dist(i, j);
                if (d >= 2.0) continue;
                if (d + pi_i - net.potential(1 + n + j) < -tol) arcs[i].push_back(j);
            }
            for (std::size_t k = 0; k < kept; ++k) have[arcs[i][k]] = 0;
            if (arcs[i].size() > kept) clean = false;
        }
        if (clean) break;
    }
    return bracketed(value);
}

// Merge atoms of a nonnegative planar measure onto square cells of the given
// width, each cell keeping its total mass at the mass-weighted barycenter.
// Replaces the measure within half a cell diameter per unit mass and caps the
// atom count seen by the planar solver, whose cost grows quickly with it.
inline AtomicMeasure2D aggregate_measure_2d(const AtomicMeasure2D& mu, double cell,
                                            double origin_x = 0.0,
                                            double origin_y = 0.0) {
    if (!(cell > 0.0) || !std::isfinite(cell))
        throw config_error("aggregate_measure_2d: cell width must be positive");
    std::map<std::pair<long long, long long>, std::array<double, 3>> bins;
    for (const auto& a : mu.atoms) {
        if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.weight))
            throw input_error("aggregate_measure_2d: non-finite atom");
        if (a.weight < 0.0)
            throw input_error("aggregate_measure_2d: weights must be nonnegative");
        if (a.weight == 0.0) continue;
        const auto key = std::pair{
            static_cast<long long>(std::floor((a.x - origin_x) / cell)),
            static_cast<long long>(std::floor((a.y - origin_y) / cell))};
        auto& acc = bins[key];
        acc[0] += a.weight;
        acc[1] += a.weight * a.x;
        acc[2] += a.weight * a.y;
    }
    AtomicMeasure2D out;
    out.atoms.reserve(bins.size());
    for (const auto& [key, acc] : bins)
        if (acc[0] > kMassEpsilon) out.atoms.push_back({acc[1] / acc[0], acc[2] / acc[0], acc[0]});
    return out;
}

// Line version of the cell merge, used to compare two atomizations of the
// same density on a common grain.
inline AtomicMeasure1D aggregate_measure_1d(const AtomicMeasure1D& mu, double cell,
                                            double origin = 0.0) {
    if (!(cell > 0.0) || !std::isfinite(cell))
        throw config_error("aggregate_measure_1d: cell width must be positive");
    std::map<long long, std::array<double, 2>> bins;
    for (const auto& a : mu.atoms) {
        if (!std::isfinite(a.location) || !std::isfinite(a.weight))
            throw input_error("aggregate_measure_1d: non-finite atom");
        if (a.weight < 0.0)
            throw input_error("aggregate_measure_1d: weights must be nonnegative");
        if (a.weight == 0.0) continue;
        auto& acc = bins[static_cast<long long>(std::floor((a.location - origin) / cell))];
        acc[0] += a.weight;
        acc[1] += a.weight * a.location;
    }
    AtomicMeasure1D out;
    out.atoms.reserve(bins.size());
    for (const auto& [key, acc] : bins)
        if (acc[0] > kMassEpsilon) out.atoms.push_back({acc[1] / acc[0], acc[0]});
    return out;
}

struct CompositeDistance {
    double value = 0.0;
    double uncertainty = 0.0;
};

// d = d1(male) + d1(female) + d2(couples); the couple term contributes the
// half-width of its bracket as the reported uncertainty.
inline CompositeDistance composite_distance(const AtomicMeasure1D& male_a,
                                            const AtomicMeasure1D& female_a,
                                            const AtomicMeasure2D& couple_a,
                                            const AtomicMeasure1D& male_b,
                                            const AtomicMeasure1D& female_b,
                                            const AtomicMeasure2D& couple_b,
                                            const MetricConfig& cfg = {}) {
    const double d1m = rho_flat_1d(male_a, male_b, cfg);
    const double d1f = rho_flat_1d(female_a, female_b, cfg);
    const DistanceBracket d2 = rho_flat_2d(couple_a, couple_b, cfg);
    return {d1m + d1f + d2.value(), 0.5 * d2.width()};
}

// One atom per cell: integrated mass at the first-moment location of the
// piecewise-linear interpolant. Cells with mass at or below the cohort
// epsilon are omitted.
inline AtomicMeasure1D density_to_measure(const Axis& ax, const std::vector<double>& v,
                                          const std::vector<double>& edges) {
    if (static_cast<int>(v.size()) != ax.n)
        throw dimension_error("density_to_measure: value count does not match the axis");
    if (edges.size() < 2) throw input_error("density_to_measure: need at least two cell edges");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1]))
            throw input_error("density_to_measure: cell edges must be strictly increasing");
    for (double x : v)
        if (x < -1e-12 || !std::isfinite(x))
            throw input_error("density_to_measure: negative density value");

    AtomicMeasure1D out;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const CellIntegral ci = pl_cell_integral(ax, v, edges[k], edges[k + 1]);
        if (ci.mass > kMassEpsilon) out.atoms.push_back({ci.moment / ci.mass, ci.mass});
    }
    return out;
}

inline AtomicMeasure2D density_to_measure_2d(const Axis& ax, const std::vector<double>& u,
                                             const std::vector<double>& edges_x,
                                             const std::vector<double>& edges_y) {
    if (u.size() != static_cast<std::size_t>(ax.n) * static_cast<std::size_t>(ax.n))
        throw dimension_error("density_to_measure_2d: value count does not match the grid");
    if (edges_x.size() < 2 || edges_y.size() < 2)
        throw input_error("density_to_measure_2d: need at least two cell edges per axis");
    for (std::size_t k = 1; k < edges_x.size(); ++k)
        if (!(edges_x[k] > edges_x[k - 1]))
            throw input_error("density_to_measure_2d: cell edges must be strictly increasing");
    for (std::size_t k = 1; k < edges_y.size(); ++k)
        if (!(edges_y[k] > edges_y[k - 1]))
            throw input_error("density_to_measure_2d: cell edges must be strictly increasing");
    for (double x : u)
        if (x < -1e-12 || !std::isfinite(x))
            throw input_error("density_to_measure_2d: negative density value");

    AtomicMeasure2D out;
    for (std::size_t a = 0; a + 1 < edges_x.size(); ++a) {
        const PLWeights wx = pl_weights(ax, edges_x[a], edges_x[a + 1]);
        if (wx.k_hi < wx.k_lo) continue;
        for (std::size_t b = 0; b + 1 < edges_y.size(); ++b) {
            const PLWeights wy = pl_weights(ax, edges_y[b], edges_y[b + 1]);
            if (wy.k_hi < wy.k_lo) continue;
            double mass = 0.0, mx = 0.0, my = 0.0;
            for (int i = wx.k_lo; i <= wx.k_hi; ++i) {
                const double w0x = wx.w0[i - wx.k_lo];
                const double w1x = wx.w1[i - wx.k_lo];
                const double* row = u.data() + static_cast<std::size_t>(i) * ax.n;
                double s0 = 0.0, s1 = 0.0;
                for (int j = wy.k_lo; j <= wy.k_hi; ++j) {
                    const double uij = row[j];
                    s0 += wy.w0[j - wy.k_lo] * uij;
                    s1 += wy.w1[j - wy.k_lo] * uij;
                }
                mass += w0x * s0;
                mx += w1x * s0;
                my += w0x * s1;
            }
            if (mass > kMassEpsilon) out.atoms.push_back({mx / mass, my / mass, mass});
        }
    }
    return out;
}

} // namespace ebt
