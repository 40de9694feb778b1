#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "coalflow/estimators.hpp"

using namespace coalflow;

namespace {

WienerBundle linear_bundle(const TimeGrid& grid, const std::vector<double>& slopes) {
    WienerBundle w;
    w.grid = grid;
    w.n = static_cast<int>(slopes.size());
    const int m = grid.steps;
    w.values.assign(static_cast<std::size_t>(w.n) * (m + 1), 0.0);
    w.increments.assign(static_cast<std::size_t>(w.n) * m, 0.0);
    for (int k = 0; k < w.n; ++k)
        for (int i = 0; i < m; ++i) {
            const double d = slopes[static_cast<std::size_t>(k)] * grid.step(i);
            w.increments[static_cast<std::size_t>(k) * m + i] = d;
            w.values[static_cast<std::size_t>(k) * (m + 1) + i + 1] =
                w.values[static_cast<std::size_t>(k) * (m + 1) + i] + d;
        }
    return w;
}

} // namespace

TEST_CASE("coalescence probability against the reflection formula") {
    const std::vector<double> u = {0.0, 1.0};
    const TimeGrid g = make_grid(1.0, 256);
    const CoalProbResult r = coalescence_probability(u, g, 20000, RngStream{100, 0});
    CHECK(std::abs(r.oracle - 0.47950012218695346) <= 1e-12);
    // grid detection misses excursions, so allow a one-sided discretization slack
    CHECK(std::abs(r.estimate.mean - r.oracle) <= 3.0 * r.estimate.stderr_ + 0.03);
    CHECK(r.estimate.mean <= r.oracle + 3.0 * r.estimate.stderr_);
    CHECK(r.estimate.replicas == 20000);
}

TEST_CASE("scheme probabilities on shared noise sum to one") {
    const std::vector<double> u = {0.0, 0.4};
    const std::vector<double> y = {0.1, 0.5};
    const TimeGrid g = make_grid(1.0, 64);
    double total = 0.0;
    for (const Scheme& s : enumerate_schemes(2))
        total += thm1_rhs(u, y, s, DriftSpec::zero(), g, 2000, RngStream{101, 0}).mean;
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("meeting probability of pinned unit-gap paths") {
    const std::vector<double> u = {0.0, 1.0};
    const std::vector<double> y = {0.0, 1.0};
    const TimeGrid g = make_grid(1.0, 2048);
    const Scheme s = parse_scheme("2:1:1");
    const MCEstimate est = thm1_rhs(u, y, s, DriftSpec::zero(), g, 10000, RngStream{102, 0});
    CHECK(std::abs(est.mean - 0.36787944117144233) <= 3.0 * est.stderr_ + 0.02);
}

TEST_CASE("survivor tuples and the cemetery state") {
    const TimeGrid g = make_grid(1.0, 10);
    const std::vector<double> u = {0.0, 1.0, 2.0};
    const WienerBundle w = linear_bundle(g, {0.1, -1.4, -6.0});
    const CoalescedBundle cb = coalesce_bundle(w, u); // one survivor at 0.1

    const QLSample one = ql_sample(cb, IndexSet(1, {1}));
    REQUIRE(!one.cemetery);
    REQUIRE(one.values.size() == 1);
    CHECK(one.values[0] == doctest::Approx(0.1));

    CHECK(ql_sample(cb, IndexSet(2, {2})).cemetery);
    CHECK(ql_sample(cb, IndexSet(2, {1, 2})).cemetery);

    const WienerBundle w2 = linear_bundle(g, {0.0, 0.0, 0.0}); // nobody meets
    const CoalescedBundle cb2 = coalesce_bundle(w2, u);
    const QLSample pair = ql_sample(cb2, IndexSet(3, {1, 3}));
    REQUIRE(!pair.cemetery);
    CHECK(pair.values == std::vector<double>{0.0, 2.0});
}

TEST_CASE("importance weighting reduces to the direct estimator at zero drift") {
    const std::vector<double> u = {0.0, 0.5};
    HistSpec win;
    win.dim = 1;
    win.lo = -2.0;
    win.hi = 3.0;
    win.delta = 0.25;
    const TimeGrid g = make_grid(1.0, 64);
    const DensityTarget t = DensityTarget::for_k(1);
    const DensityEstimate a =
        density_direct(u, DriftSpec::zero(), t, win, g, 2000, RngStream{103, 0});
    const DensityEstimate b =
        density_girsanov(u, DriftSpec::zero(), t, win, g, 2000, RngStream{103, 0});
    REQUIRE(a.value.size() == b.value.size());
    for (std::size_t i = 0; i < a.value.size(); ++i) {
        CHECK(a.value[i] == b.value[i]);
        CHECK(a.stderr_[i] == b.stderr_[i]);
        CHECK(a.count[i] == b.count[i]);
    }
    CHECK(a.replicas == b.replicas);
}

TEST_CASE("one-point density integrates to the expected survivor count") {
    const std::vector<double> u = {0.0, 1.0};
    HistSpec win;
    win.dim = 1;
    win.lo = -4.0;
    win.hi = 5.0;
    win.delta = 0.25;
    const TimeGrid g = make_grid(1.0, 256);
    const DensityEstimate d = density_direct(u, DriftSpec::zero(), DensityTarget::for_k(1), win,
                                             g, 30000, RngStream{104, 0});
    double mass = 0.0;
    for (double v : d.value) mass += v * win.delta;
    // E[#survivors] = 2 - P(coalesce) = 1.52050; grid detection biases it up a little
    CHECK(std::abs(mass - 1.5204998778130465) <= 0.03);
}

TEST_CASE("the batched conditional estimator matches the single-target one") {
    const std::vector<double> u = {0.0, 0.3};
    const std::vector<double> y = {0.2, 0.8};
    const Scheme s = parse_scheme("2:0:");
    const DriftSpec a = DriftSpec::constant(0.5);
    const TimeGrid g = make_grid(1.0, 64);

    const MCEstimate single = thm1_lhs_binned(u, y, s, a, g, 5000, 0.3, RngStream{105, 0});
    const std::vector<Thm1LhsSpec> specs = {{y, s}, {{0.1, 0.5}, parse_scheme("2:1:1")}};
    const auto multi = thm1_lhs_binned_multi(u, specs, a, g, 5000, 0.3, RngStream{105, 0});
    REQUIRE(multi.size() == 2);
    CHECK(multi[0].mean == single.mean);
    CHECK(multi[0].stderr_ == single.stderr_);
    CHECK(multi[0].retained == single.retained);
    CHECK(multi[0].replicas == single.replicas);
    CHECK(multi[1].retained > 0);
}

TEST_CASE("an impossible window is flagged rather than reported as zero") {
    const std::vector<double> u = {0.0, 0.3};
    const std::vector<double> y = {50.0, 51.0}; // unreachable at T = 1
    const TimeGrid g = make_grid(1.0, 32);
    const MCEstimate est = thm1_lhs_binned(u, y, parse_scheme("2:0:"), DriftSpec::zero(), g, 200,
                                           1e-6, RngStream{106, 0});
    CHECK(est.empty_flag);
    CHECK(est.retained == 0);
    CHECK(est.replicas == 200);
}

TEST_CASE("scheme-resolved densities add up to the full one, bin by bin") {
    const std::vector<double> u = {0.0, 0.5, 1.2};
    HistSpec win;
    win.dim = 1;
    win.lo = -2.0;
    win.hi = 3.0;
    win.delta = 0.5;
    const TimeGrid g = make_grid(1.0, 64);
    const CheckReport rep =
        lemma7_check(u, 1, DriftSpec::tanh_wave(1.0), win, g, 2000, RngStream{107, 0});
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].pass);
    CHECK(rep.rows[0].a <= 1e-12);
}

TEST_CASE("subsystem consistency on a small configuration") {
    const std::vector<double> u = {0.0, 0.4, 0.9, 1.5};
    const TimeGrid g = make_grid(1.0, 64);
    const CheckReport rep =
        lemma8_check(u, 2, DriftSpec::tanh_wave(0.5), g, 5000, 0.25, RngStream{108, 0}, 5.0);
    CHECK(rep.pass());
    CHECK(rep.rows.size() >= 2); // two normalizations plus tower bins
}

TEST_CASE("comparison rule: kappa band, allowance, and inconclusive flags") {
    MCEstimate a, b;
    a.mean = 1.0;
    a.stderr_ = 0.1;
    a.replicas = 100;
    b.mean = 1.2;
    b.stderr_ = 0.1;
    b.replicas = 100;

    CHECK(compare_estimates("x", a, b, 4.0).pass);
    CHECK(!compare_estimates("x", a, b, 1.0).pass);
    CHECK(compare_estimates("x", a, b, 1.0, 0.1).pass);

    b.empty_flag = true;
    const CheckRow r = compare_estimates("x", a, b, 4.0);
    CHECK(r.inconclusive);

    CheckReport rep;
    rep.rows.push_back(r);
    CHECK(rep.pass()); // inconclusive rows do not fail a report
}
