#include "coalflow/bundles.hpp"

#include <cmath>
#include <stdexcept>

namespace coalflow {

namespace {

void check_n(int n) {
    if (n < 1)
        throw std::invalid_argument("bundle size must be at least 1");
}

} // namespace

WienerBundle sample_wiener(const TimeGrid& grid, int n, RngStream rng) {
    check_n(n);
    WienerBundle b;
    b.grid = grid;
    b.n = n;
    const int m = grid.steps;
    b.values.assign(static_cast<std::size_t>(n) * (m + 1), 0.0);
    b.increments.resize(static_cast<std::size_t>(n) * m);
    Philox eng = rng.engine();
    for (int k = 0; k < n; ++k) {
        double* v = b.values.data() + static_cast<std::size_t>(k) * (m + 1);
        double* dw = b.increments.data() + static_cast<std::size_t>(k) * m;
        double x = 0.0;
        for (int i = 0; i < m; ++i) {
            const double d = std::sqrt(grid.step(i)) * eng.next_normal();
            dw[i] = d;
            x += d;
            v[i + 1] = x;
        }
    }
    return b;
}

BridgeBundle sample_bridge(const TimeGrid& grid, int n, RngStream rng, BridgeMode mode) {
    check_n(n);
    if (mode == BridgeMode::time_change && grid.steps < 2)
        throw std::invalid_argument("sample_bridge: time_change mode needs at least two steps");
    BridgeBundle b;
    b.grid = grid;
    b.n = n;
    b.mode = mode;
    const int m = grid.steps;
    const double T = grid.horizon;
    b.values.assign(static_cast<std::size_t>(n) * (m + 1), 0.0);
    b.increments.resize(static_cast<std::size_t>(n) * m);
    Philox eng = rng.engine();

    if (mode == BridgeMode::conditioned) {
        // Markov transition of the bridge: given eta(t_i) = x,
        // eta(t_{i+1}) ~ N(x r, dt r) with r = (T - t_{i+1}) / (T - t_i).
        for (int k = 0; k < n; ++k) {
            double* v = b.values.data() + static_cast<std::size_t>(k) * (m + 1);
            double* de = b.increments.data() + static_cast<std::size_t>(k) * m;
            double x = 0.0;
            for (int i = 0; i < m; ++i) {
                double next;
                if (i == m - 1) {
                    next = 0.0; // conditional variance vanishes at the pin
                } else {
                    const double r = (T - grid.node(i + 1)) / (T - grid.node(i));
                    next = x * r + std::sqrt(grid.step(i) * r) * eng.next_normal();
                }
                de[i] = next - x;
                v[i + 1] = next;
                x = next;
            }
        }
    } else {
        // eta(t) = (T - t) b(s(t)), s(t) = t / (T (T - t)); the grid maps to
        // s_0 < ... < s_{m-1} < infinity, so the driving path has m-1 sampled
        // increments and the final grid step is closed by the pin itself.
        std::vector<double> s(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            s[static_cast<std::size_t>(i)] = grid.node(i) / (T * (T - grid.node(i)));
        b.driving_increments.resize(static_cast<std::size_t>(n) * (m - 1));
        for (int k = 0; k < n; ++k) {
            double* v = b.values.data() + static_cast<std::size_t>(k) * (m + 1);
            double* de = b.increments.data() + static_cast<std::size_t>(k) * m;
            double* db = b.driving_increments.data() + static_cast<std::size_t>(k) * (m - 1);
            double bw = 0.0;
            double prev = 0.0;
            for (int i = 0; i + 1 < m; ++i) {
                const double ds = s[static_cast<std::size_t>(i) + 1] - s[static_cast<std::size_t>(i)];
                const double d = std::sqrt(ds) * eng.next_normal();
                db[i] = d;
                bw += d;
                const double next = (T - grid.node(i + 1)) * bw;
                de[i] = next - prev;
                v[i + 1] = next;
                prev = next;
            }
            de[m - 1] = -prev;
            v[m] = 0.0;
        }
    }
    return b;
}

BridgeBundle bridge_from_wiener(const WienerBundle& w) {
    BridgeBundle b;
    b.grid = w.grid;
    b.n = w.n;
    b.mode = BridgeMode::conditioned;
    const int m = w.grid.steps;
    const double T = w.grid.horizon;
    b.values.resize(static_cast<std::size_t>(w.n) * (m + 1));
    b.increments.resize(static_cast<std::size_t>(w.n) * m);
    for (int k = 0; k < w.n; ++k) {
        const double* wv = w.values.data() + static_cast<std::size_t>(k) * (m + 1);
        double* v = b.values.data() + static_cast<std::size_t>(k) * (m + 1);
        double* de = b.increments.data() + static_cast<std::size_t>(k) * m;
        const double wT = wv[m];
        for (int i = 0; i <= m; ++i)
            v[i] = (w.grid.node(i) / T) * wT - wv[i];
        v[0] = 0.0;
        v[m] = 0.0;
        for (int i = 0; i < m; ++i)
            de[i] = v[i + 1] - v[i];
    }
    return b;
}

PinnedBundle pin(const BridgeBundle& b, std::span<const double> start, std::span<const double> end) {
    if (static_cast<int>(start.size()) != b.n || static_cast<int>(end.size()) != b.n)
        throw std::invalid_argument("pin: endpoint sizes must match bundle size");
    for (int k = 0; k + 1 < b.n; ++k)
        if (!(start[static_cast<std::size_t>(k)] < start[static_cast<std::size_t>(k) + 1]))
            throw std::invalid_argument("pin: start points must be strictly increasing");
    PinnedBundle p;
    p.grid = b.grid;
    p.n = b.n;
    p.mode = b.mode;
    p.start.assign(start.begin(), start.end());
    p.end.assign(end.begin(), end.end());
    p.bridge_increments = b.increments;
    p.driving_increments = b.driving_increments;
    const int m = b.grid.steps;
    const double T = b.grid.horizon;
    p.values.resize(static_cast<std::size_t>(b.n) * (m + 1));
    for (int k = 0; k < b.n; ++k) {
        const double* e = b.values.data() + static_cast<std::size_t>(k) * (m + 1);
        double* v = p.values.data() + static_cast<std::size_t>(k) * (m + 1);
        const double u = p.start[static_cast<std::size_t>(k)];
        const double y = p.end[static_cast<std::size_t>(k)];
        for (int i = 0; i <= m; ++i) {
            const double c = b.grid.node(i) / T;
            v[i] = e[i] + (1.0 - c) * u + c * y;
        }
        v[0] = u;
        v[m] = y;
    }
    return p;
}

PinnedBundle sample_pinned(const TimeGrid& grid, std::span<const double> start,
                           std::span<const double> end, RngStream rng, BridgeMode mode) {
    const BridgeBundle b = sample_bridge(grid, static_cast<int>(start.size()), rng, mode);
    return pin(b, start, end);
}

} // namespace coalflow
