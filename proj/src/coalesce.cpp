#include "coalflow/coalesce.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coalflow {

namespace {

void check_start(std::span<const double> start) {
    if (start.empty())
        throw std::invalid_argument("coalesce: need at least one coordinate");
    for (std::size_t k = 0; k + 1 < start.size(); ++k)
        if (!(start[k] < start[k + 1]))
            throw std::invalid_argument("coalesce: start points must be strictly increasing");
}

// Shared merge-scan driver. trajectory(lo, i) is the value at node i of the
// block whose minimal coordinate (0-based) is lo. on_step(i, blocks) runs
// after the scan so callers can advance their own per-block state.
struct BlockState {
    std::vector<std::pair<int, int>> blocks; // 0-based inclusive intervals
};

template <class TrajFn>
void merge_scan(CoalescedBundle& cb, BlockState& st, int node, TrajFn&& trajectory) {
    std::size_t idx = 0;
    while (idx + 1 < st.blocks.size()) {
        const int llo = st.blocks[idx].first;
        const int rlo = st.blocks[idx + 1].first;
        if (trajectory(llo, node) >= trajectory(rlo, node)) {
            MergeEvent ev;
            ev.node = node;
            ev.left_min = llo + 1;
            ev.right_min = rlo + 1;
            ev.time = cb.grid.node(node);
            cb.events.push_back(ev);
            cb.tau[static_cast<std::size_t>(rlo)] = ev.time;
            cb.tau_node[static_cast<std::size_t>(rlo)] = node;
            st.blocks[idx].second = st.blocks[idx + 1].second;
            st.blocks.erase(st.blocks.begin() + static_cast<std::ptrdiff_t>(idx) + 1);
            // merged block keeps the left trajectory; recheck against the next
        } else {
            ++idx;
        }
    }
}

void write_node(CoalescedBundle& cb, const BlockState& st, int node,
                const std::vector<double>& traj_by_min) {
    const int m = cb.grid.steps;
    for (const auto& [lo, hi] : st.blocks) {
        const double x = traj_by_min[static_cast<std::size_t>(lo)];
        for (int k = lo; k <= hi; ++k)
            cb.values[static_cast<std::size_t>(k) * (m + 1) + node] = x;
    }
}

void finish(CoalescedBundle& cb, const BlockState& st) {
    for (const auto& [lo, hi] : st.blocks)
        for (int k = lo; k <= hi; ++k)
            cb.block_min[static_cast<std::size_t>(k)] = lo + 1;
}

CoalescedBundle init_bundle(const TimeGrid& grid, std::span<const double> start) {
    CoalescedBundle cb;
    cb.grid = grid;
    cb.n = static_cast<int>(start.size());
    cb.start.assign(start.begin(), start.end());
    cb.values.resize(static_cast<std::size_t>(cb.n) * (grid.steps + 1));
    cb.tau.assign(static_cast<std::size_t>(cb.n), grid.horizon);
    cb.tau_node.assign(static_cast<std::size_t>(cb.n), grid.steps);
    cb.block_min.resize(static_cast<std::size_t>(cb.n));
    return cb;
}

CoalescedBundle coalesce_free(const TimeGrid& grid, std::span<const double> start,
                              std::vector<double> free_values,
                              std::vector<double> free_increments) {
    CoalescedBundle cb = init_bundle(grid, start);
    cb.free_values = std::move(free_values);
    cb.free_increments = std::move(free_increments);
    const int m = grid.steps;
    const int n = cb.n;
    BlockState st;
    st.blocks.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        st.blocks.emplace_back(k, k);
    const auto traj = [&](int lo, int i) {
        return cb.free_values[static_cast<std::size_t>(lo) * (m + 1) + i];
    };
    std::vector<double> traj_by_min(static_cast<std::size_t>(n));
    for (int i = 0; i <= m; ++i) {
        if (i > 0)
            merge_scan(cb, st, i, traj);
        for (const auto& [lo, hi] : st.blocks)
            traj_by_min[static_cast<std::size_t>(lo)] = traj(lo, i);
        write_node(cb, st, i, traj_by_min);
    }
    finish(cb, st);
    return cb;
}

} // namespace

std::vector<double> CoalescedBundle::terminal_points() const {
    std::vector<double> out;
    const int m = grid.steps;
    for (int k = 0; k < n; ++k)
        if (block_min[static_cast<std::size_t>(k)] == k + 1)
            out.push_back(values[static_cast<std::size_t>(k) * (m + 1) + m]);
    return out;
}

CoalescedBundle coalesce_bundle(const WienerBundle& w, std::span<const double> start) {
    if (static_cast<int>(start.size()) != w.n)
        throw std::invalid_argument("coalesce_bundle: start size must match bundle size");
    check_start(start);
    const int m = w.grid.steps;
    std::vector<double> free_values(w.values.size());
    for (int k = 0; k < w.n; ++k) {
        const double u = start[static_cast<std::size_t>(k)];
        const double* src = w.values.data() + static_cast<std::size_t>(k) * (m + 1);
        double* dst = free_values.data() + static_cast<std::size_t>(k) * (m + 1);
        for (int i = 0; i <= m; ++i)
            dst[i] = u + src[i];
    }
    return coalesce_free(w.grid, start, std::move(free_values), w.increments);
}

CoalescedBundle coalesce_bundle(const PinnedBundle& p) {
    check_start(p.start);
    return coalesce_free(p.grid, p.start, p.values, p.bridge_increments);
}

CoalescedBundle sample_drifted_flow(const TimeGrid& grid, std::span<const double> start,
                                    const DriftSpec& drift, RngStream rng) {
    check_start(start);
    CoalescedBundle cb = init_bundle(grid, start);
    const int m = grid.steps;
    const int n = cb.n;
    BlockState st;
    st.blocks.reserve(static_cast<std::size_t>(n));
    std::vector<double> x(start.begin(), start.end()); // block trajectory, indexed by block min
    for (int k = 0; k < n; ++k)
        st.blocks.emplace_back(k, k);
    write_node(cb, st, 0, x);
    Philox eng = rng.engine();
    std::vector<double> z(static_cast<std::size_t>(n));
    const auto traj = [&](int lo, int) { return x[static_cast<std::size_t>(lo)]; };
    for (int i = 0; i < m; ++i) {
        const double dt = grid.step(i);
        const double sdt = std::sqrt(dt);
        // fixed draw budget of n normals per step; absorbed coordinates burn theirs
        for (int k = 0; k < n; ++k)
            z[static_cast<std::size_t>(k)] = eng.next_normal();
        for (const auto& [lo, hi] : st.blocks) {
            double& v = x[static_cast<std::size_t>(lo)];
            v += drift(v) * dt + sdt * z[static_cast<std::size_t>(lo)];
        }
        merge_scan(cb, st, i + 1, traj);
        write_node(cb, st, i + 1, x);
    }
    finish(cb, st);
    return cb;
}

Scheme extract_scheme(const CoalescedBundle& cb) {
    Scheme s;
    s.n = cb.n;
    std::vector<int> mins; // minimal coordinates of alive blocks, 1-based ascending
    mins.reserve(static_cast<std::size_t>(cb.n));
    for (int k = 1; k <= cb.n; ++k)
        mins.push_back(k);
    for (const MergeEvent& ev : cb.events) {
        const auto it = std::lower_bound(mins.begin(), mins.end(), ev.left_min);
        if (it == mins.end() || *it != ev.left_min || it + 1 == mins.end() || *(it + 1) != ev.right_min)
            throw std::domain_error("extract_scheme: inconsistent event log");
        s.entries.push_back(static_cast<int>(it - mins.begin()) + 1);
        mins.erase(it + 1);
    }
    return s;
}

namespace {

MeetingTimes meeting_times_of(const TimeGrid& grid, int n,
                              const std::vector<double>& paths /* n x (m+1) */) {
    MeetingTimes mt;
    mt.n = n;
    const int m = grid.steps;
    mt.node.assign(static_cast<std::size_t>(n) * n, m);
    mt.time.assign(static_cast<std::size_t>(n) * n, grid.horizon);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double* a = paths.data() + static_cast<std::size_t>(i) * (m + 1);
            const double* b = paths.data() + static_cast<std::size_t>(j) * (m + 1);
            int hit = m;
            for (int l = 1; l <= m; ++l) {
                if (a[l] >= b[l]) {
                    hit = l;
                    break;
                }
            }
            mt.node[static_cast<std::size_t>(i) * n + j] = hit;
            mt.node[static_cast<std::size_t>(j) * n + i] = hit;
            const double t = grid.node(hit);
            mt.time[static_cast<std::size_t>(i) * n + j] = t;
            mt.time[static_cast<std::size_t>(j) * n + i] = t;
        }
    }
    return mt;
}

} // namespace

MeetingTimes pairwise_meeting_times(const WienerBundle& w, std::span<const double> start) {
    if (static_cast<int>(start.size()) != w.n)
        throw std::invalid_argument("pairwise_meeting_times: start size must match bundle size");
    check_start(start);
    const int m = w.grid.steps;
    std::vector<double> paths(w.values.size());
    for (int k = 0; k < w.n; ++k) {
        const double u = start[static_cast<std::size_t>(k)];
        for (int i = 0; i <= m; ++i)
            paths[static_cast<std::size_t>(k) * (m + 1) + i] =
                u + w.values[static_cast<std::size_t>(k) * (m + 1) + i];
    }
    return meeting_times_of(w.grid, w.n, paths);
}

MeetingTimes pairwise_meeting_times(const PinnedBundle& p) {
    check_start(p.start);
    return meeting_times_of(p.grid, p.n, p.values);
}

std::vector<int> cutoffs_from_scheme(const SchemeReplay& replay, const MeetingTimes& theta) {
    if (replay.n != theta.n)
        throw std::invalid_argument("cutoffs_from_scheme: size mismatch");
    std::vector<int> cut(static_cast<std::size_t>(replay.n));
    for (int k = 0; k < replay.n; ++k)
        cut[static_cast<std::size_t>(k)] = theta.node_at(k, k); // diagonal = steps sentinel
    for (const auto& ev : replay.events)
        cut[static_cast<std::size_t>(ev.absorbed) - 1] =
            theta.node_at(ev.meet_left - 1, ev.meet_right - 1);
    return cut;
}

} // namespace coalflow
