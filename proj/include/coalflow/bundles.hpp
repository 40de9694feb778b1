// Path bundles: n independent coordinates sampled on a shared grid.
// Layout is row-major [coordinate][node] so per-path scans stay contiguous.
#pragma once

#include <span>
#include <vector>

#include "coalflow/grid.hpp"
#include "coalflow/rng.hpp"

namespace coalflow {

// n independent standard Wiener paths started at 0.
struct WienerBundle {
    TimeGrid grid;
    int n = 0;
    std::vector<double> values;     // n x (m+1)
    std::vector<double> increments; // n x m

    std::span<const double> path(int k) const {
        return {values.data() + static_cast<std::size_t>(k) * (grid.steps + 1),
                static_cast<std::size_t>(grid.steps) + 1};
    }
    std::span<const double> incr(int k) const {
        return {increments.data() + static_cast<std::size_t>(k) * grid.steps,
                static_cast<std::size_t>(grid.steps)};
    }
};

enum class BridgeMode { conditioned, time_change };

// n independent standard Brownian bridges on [0,T], eta(0) = eta(T) = 0.
// time_change mode realizes eta(t) = (T-t) b(t / (T(T-t))) and keeps the
// increments of the driving Wiener path b; they are what the uncancelled
// stochastic-exponential form integrates against.
struct BridgeBundle {
    TimeGrid grid;
    int n = 0;
    BridgeMode mode = BridgeMode::conditioned;
    std::vector<double> values;             // n x (m+1), last column exactly 0
    std::vector<double> increments;         // n x m, eta(t_{i+1}) - eta(t_i)
    std::vector<double> driving_increments; // n x (m-1) in time_change mode: b(s_{i+1}) - b(s_i), else empty

    std::span<const double> path(int k) const {
        return {values.data() + static_cast<std::size_t>(k) * (grid.steps + 1),
                static_cast<std::size_t>(grid.steps) + 1};
    }
    std::span<const double> incr(int k) const {
        return {increments.data() + static_cast<std::size_t>(k) * grid.steps,
                static_cast<std::size_t>(grid.steps)};
    }
    std::span<const double> driving(int k) const {
        return {driving_increments.data() + static_cast<std::size_t>(k) * (grid.steps - 1),
                static_cast<std::size_t>(grid.steps) - 1};
    }
};

// Bridges pinned to run from start u_k to end y_k:
// value_k(t) = eta_k(t) + (1 - t/T) u_k + (t/T) y_k.
struct PinnedBundle {
    TimeGrid grid;
    int n = 0;
    BridgeMode mode = BridgeMode::conditioned;
    std::vector<double> start; // u, strictly increasing
    std::vector<double> end;   // y
    std::vector<double> values;             // pinned paths, n x (m+1)
    std::vector<double> bridge_increments;  // n x m, increments of the underlying eta
    std::vector<double> driving_increments; // as in BridgeBundle

    std::span<const double> path(int k) const {
        return {values.data() + static_cast<std::size_t>(k) * (grid.steps + 1),
                static_cast<std::size_t>(grid.steps) + 1};
    }
    std::span<const double> bridge_incr(int k) const {
        return {bridge_increments.data() + static_cast<std::size_t>(k) * grid.steps,
                static_cast<std::size_t>(grid.steps)};
    }
    std::span<const double> driving(int k) const {
        return {driving_increments.data() + static_cast<std::size_t>(k) * (grid.steps - 1),
                static_cast<std::size_t>(grid.steps) - 1};
    }
};

WienerBundle sample_wiener(const TimeGrid& grid, int n, RngStream rng);

BridgeBundle sample_bridge(const TimeGrid& grid, int n, RngStream rng,
                           BridgeMode mode = BridgeMode::conditioned);

// eta_k(t_i) = (t_i/T) w_k(T) - w_k(t_i); pure node algebra, no sampling.
BridgeBundle bridge_from_wiener(const WienerBundle& w);

// Attach endpoints to sampled bridges. start must be strictly increasing.
PinnedBundle pin(const BridgeBundle& b, std::span<const double> start, std::span<const double> end);

PinnedBundle sample_pinned(const TimeGrid& grid, std::span<const double> start,
                           std::span<const double> end, RngStream rng,
                           BridgeMode mode = BridgeMode::conditioned);

} // namespace coalflow
