#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "coalflow/coalesce.hpp"

using namespace coalflow;

namespace {

// bundle whose free paths are straight lines u_k + slope_k * t
WienerBundle linear_bundle(const TimeGrid& grid, const std::vector<double>& slopes) {
    WienerBundle w;
    w.grid = grid;
    w.n = static_cast<int>(slopes.size());
    const int m = grid.steps;
    w.values.assign(static_cast<std::size_t>(w.n) * (m + 1), 0.0);
    w.increments.assign(static_cast<std::size_t>(w.n) * m, 0.0);
    for (int k = 0; k < w.n; ++k) {
        for (int i = 0; i < m; ++i) {
            const double d = slopes[static_cast<std::size_t>(k)] * grid.step(i);
            w.increments[static_cast<std::size_t>(k) * m + i] = d;
            w.values[static_cast<std::size_t>(k) * (m + 1) + i + 1] =
                w.values[static_cast<std::size_t>(k) * (m + 1) + i] + d;
        }
    }
    return w;
}

// one-coordinate-at-a-time construction: each path follows its own free
// motion until it hits the already-built path to its left, then follows it
std::vector<std::vector<double>> sequential_reference(const WienerBundle& w,
                                                      const std::vector<double>& u) {
    const int m = w.grid.steps, n = w.n;
    std::vector<std::vector<double>> x(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(m) + 1));
    for (int i = 0; i <= m; ++i) x[0][static_cast<std::size_t>(i)] = u[0] + w.path(0)[i];
    for (int k = 1; k < n; ++k) {
        bool glued = false;
        for (int i = 0; i <= m; ++i) {
            const double own = u[static_cast<std::size_t>(k)] + w.path(k)[i];
            if (!glued && i > 0 && x[static_cast<std::size_t>(k) - 1][static_cast<std::size_t>(i)] >= own)
                glued = true;
            x[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                glued ? x[static_cast<std::size_t>(k) - 1][static_cast<std::size_t>(i)] : own;
        }
    }
    return x;
}

} // namespace

TEST_CASE("three linear paths merge at the designed nodes") {
    const TimeGrid g = make_grid(1.0, 10);
    const std::vector<double> u = {0.0, 1.0, 2.0};
    // free paths 0.1t, 1 - 1.4t, 2 - 6t: path 3 hits path 2 first at node 0.3,
    // the merged pair hits path 1 at node 0.7
    const WienerBundle w = linear_bundle(g, {0.1, -1.4, -6.0});
    const CoalescedBundle cb = coalesce_bundle(w, u);

    REQUIRE(cb.events.size() == 2);
    CHECK(cb.events[0].node == 3);
    CHECK(cb.events[0].left_min == 2);
    CHECK(cb.events[0].right_min == 3);
    CHECK(cb.events[0].time == doctest::Approx(0.3));
    CHECK(cb.events[1].node == 7);
    CHECK(cb.events[1].left_min == 1);
    CHECK(cb.events[1].right_min == 2);

    CHECK(cb.tau[0] == doctest::Approx(1.0));
    CHECK(cb.tau[1] == doctest::Approx(0.7));
    CHECK(cb.tau[2] == doctest::Approx(0.3));
    CHECK(cb.tau_node == std::vector<int>{10, 7, 3});
    CHECK(cb.block_min == std::vector<int>{1, 1, 1});

    CHECK(extract_scheme(cb) == parse_scheme("3:2:2,1"));
    CHECK(cb.survivors() == 1);
    REQUIRE(cb.terminal_points().size() == 1);
    CHECK(cb.terminal_points()[0] == doctest::Approx(0.1));

    // before its merge the third path is free, afterwards it tracks the block
    CHECK(cb.path(2)[2] == doctest::Approx(2.0 - 6.0 * 0.2));
    CHECK(cb.path(2)[3] == doctest::Approx(1.0 - 1.4 * 0.3));
    CHECK(cb.path(2)[8] == doctest::Approx(0.1 * 0.8));
    CHECK(cb.path(1)[5] == doctest::Approx(1.0 - 1.4 * 0.5));
}

TEST_CASE("pairwise meeting times of the linear fixture") {
    const TimeGrid g = make_grid(1.0, 10);
    const std::vector<double> u = {0.0, 1.0, 2.0};
    const WienerBundle w = linear_bundle(g, {0.1, -1.4, -6.0});
    const MeetingTimes theta = pairwise_meeting_times(w, u);
    CHECK(theta.node_at(1, 2) == 3);
    CHECK(theta.node_at(0, 1) == 7);
    CHECK(theta.node_at(0, 2) == 4); // 2 - 6t <= 0.1t first holds at t = 0.4
    CHECK(theta.node_at(0, 0) == 10);
    CHECK(theta.time_at(1, 2) == doctest::Approx(0.3));
}

TEST_CASE("scheme cutoffs pick the meeting node of each event's pair") {
    const TimeGrid g = make_grid(1.0, 10);
    const std::vector<double> u = {0.0, 1.0, 2.0};
    const WienerBundle w = linear_bundle(g, {0.1, -1.4, -6.0});
    const MeetingTimes theta = pairwise_meeting_times(w, u);
    const SchemeReplay rep = scheme_replay(parse_scheme("3:2:2,1"));
    const std::vector<int> cuts = cutoffs_from_scheme(rep, theta);
    CHECK(cuts == std::vector<int>{10, 7, 3});
    // a different scheme for the same noise gives different cutoffs
    const SchemeReplay rep2 = scheme_replay(parse_scheme("3:2:1,1"));
    const std::vector<int> cuts2 = cutoffs_from_scheme(rep2, theta);
    CHECK(cuts2[1] == 7);  // (1,2) meet at node 7
    CHECK(cuts2[2] == 4);  // second event pair is (1,3)
}

TEST_CASE("block construction equals the sequential construction exactly") {
    const TimeGrid g = make_grid(1.0, 64);
    const std::vector<double> u = {0.0, 0.2, 0.5, 0.6, 1.1};
    for (int r = 0; r < 200; ++r) {
        const WienerBundle w = sample_wiener(g, 5, RngStream{77, 0}.replica(r));
        const CoalescedBundle cb = coalesce_bundle(w, u);
        const auto ref = sequential_reference(w, u);
        for (int k = 0; k < 5; ++k) {
            const auto path = cb.path(k);
            for (int i = 0; i <= 64; ++i)
                REQUIRE(path[i] == ref[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("coalesced paths never cross and keep their order") {
    const TimeGrid g = make_grid(1.0, 32);
    const std::vector<double> u = {0.0, 0.1, 0.4};
    for (int r = 0; r < 100; ++r) {
        const CoalescedBundle cb =
            sample_drifted_flow(g, u, DriftSpec::tanh_wave(1.0), RngStream{78, 0}.replica(r));
        for (int i = 0; i <= 32; ++i) {
            CHECK(cb.path(0)[i] <= cb.path(1)[i]);
            CHECK(cb.path(1)[i] <= cb.path(2)[i]);
        }
        CHECK(cb.path(0)[0] == 0.0);
        CHECK(cb.path(1)[0] == doctest::Approx(0.1));
        CHECK(cb.survivors() == 3 - static_cast<int>(cb.events.size()));
        CHECK(static_cast<int>(cb.terminal_points().size()) == cb.survivors());
        // free paths are not kept for drifted dynamics
        CHECK(cb.free_values.empty());
    }
}

TEST_CASE("extracted schemes replay to the realized block structure") {
    const TimeGrid g = make_grid(1.0, 32);
    const std::vector<double> u = {0.0, 0.05, 0.15, 0.3};
    for (int r = 0; r < 500; ++r) {
        const WienerBundle w = sample_wiener(g, 4, RngStream{79, 0}.replica(r));
        const CoalescedBundle cb = coalesce_bundle(w, u);
        const Scheme s = extract_scheme(cb);
        CHECK(s.merges() == static_cast<int>(cb.events.size()));
        const SchemeReplay rep = scheme_replay(s);
        // survivors of the replay are exactly the realized block minima
        std::vector<int> realized;
        for (int k = 0; k < 4; ++k)
            if (cb.block_min[static_cast<std::size_t>(k)] == k + 1) realized.push_back(k + 1);
        CHECK(rep.survivors == realized);
    }
}

TEST_CASE("pinned bundles coalesce toward the leader's endpoint") {
    const TimeGrid g = make_grid(1.0, 16);
    const std::vector<double> u = {0.0, 0.01};
    const std::vector<double> y = {0.5, 0.5};
    const PinnedBundle p = sample_pinned(g, u, y, RngStream{80, 0}, BridgeMode::conditioned);
    const CoalescedBundle cb = coalesce_bundle(p);
    if (!cb.events.empty()) {
        CHECK(cb.path(1)[16] == cb.path(0)[16]);
        CHECK(cb.path(0)[16] == doctest::Approx(0.5));
    }
    // free paths of a pinned bundle are the pinned paths themselves
    CHECK(cb.free_path(0)[0] == 0.0);
    CHECK(cb.free_path(1)[16] == doctest::Approx(0.5));
}

TEST_CASE("start validation") {
    const TimeGrid g = make_grid(1.0, 8);
    const WienerBundle w = sample_wiener(g, 2, RngStream{81, 0});
    CHECK_THROWS_AS(coalesce_bundle(w, std::vector<double>{1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(coalesce_bundle(w, std::vector<double>{0.0}), std::invalid_argument);
}
