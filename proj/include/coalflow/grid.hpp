// Uniform time grids on [0, T].
#pragma once

#include <stdexcept>
#include <vector>

namespace coalflow {

// Uniform grid 0 = t_0 < t_1 < ... < t_m = T. Nodes are materialized once so
// every consumer sees bit-identical times; the last node is exactly T.
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;
    std::vector<double> nodes;

    double dt() const { return horizon / steps; }
    double node(int i) const { return nodes[static_cast<std::size_t>(i)]; }
    // width of subinterval [t_i, t_{i+1}]
    double step(int i) const { return nodes[static_cast<std::size_t>(i) + 1] - nodes[static_cast<std::size_t>(i)]; }
};

inline TimeGrid make_grid(double horizon, int steps) {
    if (!(horizon > 0.0))
        throw std::invalid_argument("make_grid: horizon must be positive");
    if (steps < 1)
        throw std::invalid_argument("make_grid: need at least one step");
    TimeGrid g;
    g.horizon = horizon;
    g.steps = steps;
    g.nodes.resize(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i)
        g.nodes[static_cast<std::size_t>(i)] = horizon * (static_cast<double>(i) / steps);
    g.nodes[static_cast<std::size_t>(steps)] = horizon;
    return g;
}

} // namespace coalflow
