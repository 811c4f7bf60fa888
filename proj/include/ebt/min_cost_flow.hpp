#pragma once

// Successive-shortest-path minimum-cost flow over real-valued capacities,
// used by the 2D metric's partial-transport formulation. Johnson potentials
// keep every Dijkstra pass nonnegative; ties break on node index so repeated
// runs produce identical flows.

#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace ebt {

class MinCostFlow {
public:
    explicit MinCostFlow(int nodes)
        : head_(static_cast<std::size_t>(nodes), -1), potential_(nodes, 0.0) {}

    int node_count() const { return static_cast<int>(head_.size()); }

    // Returns the forward arc index; the paired residual arc is index ^ 1.
    int add_arc(int from, int to, double cap, double cost) {
        const int id = static_cast<int>(to_.size());
        push_arc(from, to, cap, cost);
        push_arc(to, from, 0.0, -cost);
        return id;
    }

    double arc_flow(int arc) const { return cap_[arc ^ 1]; }
    double potential(int node) const { return potential_[node]; }

    struct Result {
        double flow = 0.0;
        double cost = 0.0;
        long augmentations = 0;
    };

    // Pushes `required` units from s to t or as much as the network admits.
    // Residual capacities below cap_epsilon count as saturated so that
    // floating-point dust cannot stall the search.
    Result solve(int s, int t, double required, double cap_epsilon = 1e-15) {
        Result res;
        const int n = node_count();
        std::vector<double> dist(n);
        std::vector<int> parent_arc(n);
        std::vector<char> settled(n);

        long guard = 8 * static_cast<long>(to_.size()) + 64;
        while (required - res.flow > 1e-12 * (1.0 + required)) {
            if (--guard < 0)
                throw internal_error("min cost flow: augmentation limit exceeded");

            // Dijkstra on reduced costs, stopping once t is settled.
            const double inf = std::numeric_limits<double>::infinity();
            dist.assign(n, inf);
            parent_arc.assign(n, -1);
            settled.assign(n, 0);
            using Entry = std::pair<double, int>;
            std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
            dist[s] = 0.0;
            pq.push({0.0, s});
            double dist_t = inf;
            while (!pq.empty()) {
                const auto [d, u] = pq.top();
                pq.pop();
                if (settled[u]) continue;
                settled[u] = 1;
                if (u == t) {
                    dist_t = d;
                    break;
                }
                for (int a = head_[u]; a >= 0; a = next_[a]) {
                    if (cap_[a] <= cap_epsilon) continue;
                    const int v = to_[a];
                    if (settled[v]) continue;
                    const double nd = d + cost_[a] + potential_[u] - potential_[v];
                    if (nd < dist[v]) {
                        dist[v] = nd;
                        parent_arc[v] = a;
                        pq.push({nd, v});
                    }
                }
            }
            if (!(dist_t < inf)) break;  // no augmenting path left

            for (int v = 0; v < n; ++v)
                potential_[v] += std::min(dist[v], dist_t);

            double push = required - res.flow;
            for (int v = t; v != s; v = from_[parent_arc[v]])
                push = std::min(push, cap_[parent_arc[v]]);
            for (int v = t; v != s; v = from_[parent_arc[v]]) {
                const int a = parent_arc[v];
                cap_[a] -= push;
                if (cap_[a] < cap_epsilon) cap_[a] = 0.0;
                cap_[a ^ 1] += push;
                res.cost += push * cost_[a];
            }
            res.flow += push;
            ++res.augmentations;
        }
        return res;
    }

private:
    void push_arc(int from, int to, double cap, double cost) {
        from_.push_back(from);
        to_.push_back(to);
        cap_.push_back(cap);
        cost_.push_back(cost);
        next_.push_back(head_[from]);
        head_[from] = static_cast<int>(to_.size()) - 1;
    }

    std::vector<int> head_, next_, from_, to_;
    std::vector<double> cap_, cost_;
    std::vector<double> potential_;
};

} // namespace ebt
