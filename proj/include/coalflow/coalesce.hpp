// Coalescing n-point motions on a grid. Paths evolve independently until two
// neighbours cross at a node; from that node on the right one follows the
// left one. Blocks of glued coordinates are contiguous index intervals, and a
// block moves along the free path of its minimal member.
#pragma once

#include <span>
#include <vector>

#include "coalflow/bundles.hpp"
#include "coalflow/drift.hpp"
#include "coalflow/scheme.hpp"

namespace coalflow {

struct MergeEvent {
    int node = 0;       // first grid node with crossing detected
    int left_min = 0;   // minimal coordinate of the surviving (left) block, 1-based
    int right_min = 0;  // minimal coordinate of the absorbed (right) block, 1-based
    double time = 0.0;  // grid.node(node)
};

// A coalesced n-point configuration. values holds the glued paths; free paths
// and their driving increments are kept when the bundle was built from
// explicitly sampled noise (they are what stochastic exponentials integrate
// against). For drifted flows the driving noise is folded into the dynamics
// and only the glued paths are kept.
struct CoalescedBundle {
    TimeGrid grid;
    int n = 0;
    std::vector<double> start;           // u, strictly increasing
    std::vector<double> values;          // n x (m+1) glued paths
    std::vector<double> free_values;     // n x (m+1) free paths incl. start offsets; may be empty
    std::vector<double> free_increments; // n x m driving increments; may be empty
    std::vector<MergeEvent> events;      // in detection order (by node, then left to right)
    std::vector<double> tau;             // absorption time per coordinate, T if never absorbed
    std::vector<int> tau_node;           // node index of absorption, m if never absorbed
    std::vector<int> block_min;          // final block's minimal coordinate, per coordinate (1-based)

    std::span<const double> path(int k) const {
        return {values.data() + static_cast<std::size_t>(k) * (grid.steps + 1),
                static_cast<std::size_t>(grid.steps) + 1};
    }
    std::span<const double> free_path(int k) const {
        return {free_values.data() + static_cast<std::size_t>(k) * (grid.steps + 1),
                static_cast<std::size_t>(grid.steps) + 1};
    }
    std::span<const double> free_incr(int k) const {
        return {free_increments.data() + static_cast<std::size_t>(k) * grid.steps,
                static_cast<std::size_t>(grid.steps)};
    }

    int survivors() const { return n - static_cast<int>(events.size()); }
    // distinct terminal values, ascending
    std::vector<double> terminal_points() const;
};

// Coalesce free Wiener paths started at u (strictly increasing).
CoalescedBundle coalesce_bundle(const WienerBundle& w, std::span<const double> start);

// Coalesce pinned paths (start/end live in the bundle).
CoalescedBundle coalesce_bundle(const PinnedBundle& p);

// Euler-Maruyama n-point motion with drift a: each free coordinate moves by
// a(x) dt + dW; crossings glue as above. Noise is drawn inside.
CoalescedBundle sample_drifted_flow(const TimeGrid& grid, std::span<const double> start,
                                    const DriftSpec& drift, RngStream rng);

// Scheme realized by a coalesced bundle (merge order read off events).
Scheme extract_scheme(const CoalescedBundle& cb);

// First meeting node of every pair of free paths offset by start:
// theta[i][j] = min { t_l : u_i + w_i(t_l) >= u_j + w_j(t_l) }, i < j, T if none.
// Used for cutoffs of partially coalesced systems.
struct MeetingTimes {
    int n = 0;
    std::vector<int> node;    // n x n, row-major; diagonal = steps
    std::vector<double> time; // n x n; diagonal = horizon

    int node_at(int i, int j) const { return node[static_cast<std::size_t>(i) * n + j]; }
    double time_at(int i, int j) const { return time[static_cast<std::size_t>(i) * n + j]; }
};

MeetingTimes pairwise_meeting_times(const WienerBundle& w, std::span<const double> start);
MeetingTimes pairwise_meeting_times(const PinnedBundle& p);

// Node-aligned absorption cutoffs of the sequential construction that realizes
// scheme `s` with the given pairwise meeting nodes: the absorbed coordinate of
// each merge event stops at the meeting node of that event's meeting pair.
// Survivors get cutoff node m. Returns per-coordinate node indices (0-based k).
std::vector<int> cutoffs_from_scheme(const SchemeReplay& replay, const MeetingTimes& theta);

} // namespace coalflow
