// Python bindings for the main operations: grids, drifts, path sampling,
// coalescence, schemes, and the headline estimators. Results cross as plain
// dicts/lists so the python side has no binary types to manage.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coalflow/estimators.hpp"
#include "coalflow/harness.hpp"

namespace py = pybind11;
using namespace coalflow;

namespace {

py::dict estimate_dict(const MCEstimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["stderr"] = e.stderr_;
    d["replicas"] = e.replicas;
    d["ess"] = e.ess;
    d["empty"] = e.empty_flag;
    d["retained"] = e.retained;
    return d;
}

py::dict density_dict(const DensityEstimate& d) {
    py::dict out;
    out["value"] = d.value;
    out["stderr"] = d.stderr_;
    out["count"] = d.count;
    out["replicas"] = d.replicas;
    out["ess"] = d.ess;
    out["empty"] = d.empty_flag;
    py::list lows;
    for (std::int64_t b = 0; b < d.spec.total_bins(); ++b)
        lows.append(d.spec.bin_lo(b));
    out["bin_lo"] = lows;
    out["delta"] = d.spec.delta;
    return out;
}

std::vector<std::vector<double>> paths_of(const std::vector<double>& flat, int n, int m) {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k) * (m + 1),
                         flat.begin() + static_cast<std::ptrdiff_t>(k + 1) * (m + 1));
    return out;
}

HistSpec window_of(int dim, double lo, double hi, double delta, bool ordered) {
    HistSpec w;
    w.dim = dim;
    w.lo = lo;
    w.hi = hi;
    w.delta = delta;
    w.ordered_sector = ordered;
    w.validate();
    return w;
}

} // namespace

PYBIND11_MODULE(_coalflow, mod) {
    mod.doc() = "Monte Carlo laboratory for coalescing Brownian motions with drift";

    mod.def("grid_nodes", [](double horizon, int steps) {
        return make_grid(horizon, steps).nodes;
    }, py::arg("horizon"), py::arg("steps"));

    mod.def("drift_eval", [](const std::string& spec, std::vector<double> xs) {
        const DriftSpec a = DriftSpec::parse(spec);
        std::vector<double> out;
        out.reserve(xs.size());
        for (double x : xs) out.push_back(a(x));
        return out;
    }, py::arg("drift"), py::arg("xs"));

    mod.def("sample_wiener", [](double horizon, int steps, int n, std::uint64_t seed) {
        const TimeGrid grid = make_grid(horizon, steps);
        const WienerBundle w = sample_wiener(grid, n, RngStream{seed, 0});
        return paths_of(w.values, n, steps);
    }, py::arg("horizon"), py::arg("steps"), py::arg("n"), py::arg("seed"));

    mod.def("sample_bridge", [](double horizon, int steps, int n, std::uint64_t seed,
                                const std::string& mode) {
        const TimeGrid grid = make_grid(horizon, steps);
        const BridgeMode bm = mode == "time_change" ? BridgeMode::time_change
                                                    : BridgeMode::conditioned;
        const BridgeBundle b = sample_bridge(grid, n, RngStream{seed, 0}, bm);
        return paths_of(b.values, n, steps);
    }, py::arg("horizon"), py::arg("steps"), py::arg("n"), py::arg("seed"),
       py::arg("mode") = "conditioned");

    mod.def("simulate_flow", [](std::vector<double> u, const std::string& drift, double horizon,
                                int steps, std::uint64_t seed) {
        const TimeGrid grid = make_grid(horizon, steps);
        const DriftSpec a = DriftSpec::parse(drift);
        const int n = static_cast<int>(u.size());
        CoalescedBundle cb =
            a.is_zero() ? coalesce_bundle(sample_wiener(grid, n, RngStream{seed, 0}), u)
                        : sample_drifted_flow(grid, u, a, RngStream{seed, 0});
        py::dict out;
        out["values"] = paths_of(cb.values, cb.n, steps);
        out["tau"] = cb.tau;
        out["scheme"] = format_scheme(extract_scheme(cb));
        out["survivors"] = cb.terminal_points();
        return out;
    }, py::arg("u"), py::arg("drift"), py::arg("horizon"), py::arg("steps"), py::arg("seed"));

    mod.def("enumerate_schemes", [](int n) {
        std::vector<std::string> out;
        for (const auto& s : enumerate_schemes(n)) out.push_back(format_scheme(s));
        return out;
    }, py::arg("n"));

    mod.def("scheme_survivors", [](const std::string& scheme) {
        return scheme_replay(parse_scheme(scheme)).survivors;
    }, py::arg("scheme"));

    mod.def("coalescence_probability", [](std::vector<double> u, double horizon, int steps,
                                          long replicas, std::uint64_t seed) {
        const CoalProbResult r =
            coalescence_probability(u, make_grid(horizon, steps), replicas, RngStream{seed, 0});
        py::dict out = estimate_dict(r.estimate);
        out["oracle"] = r.oracle;
        return out;
    }, py::arg("u"), py::arg("horizon"), py::arg("steps"), py::arg("replicas"), py::arg("seed"));

    mod.def("thm1_rhs", [](std::vector<double> u, std::vector<double> y, const std::string& scheme,
                           const std::string& drift, double horizon, int steps, long replicas,
                           std::uint64_t seed) {
        return estimate_dict(thm1_rhs(u, y, parse_scheme(scheme), DriftSpec::parse(drift),
                                      make_grid(horizon, steps), replicas, RngStream{seed, 0}));
    }, py::arg("u"), py::arg("y"), py::arg("scheme"), py::arg("drift"), py::arg("horizon"),
       py::arg("steps"), py::arg("replicas"), py::arg("seed"));

    mod.def("thm1_lhs_binned", [](std::vector<double> u, std::vector<double> y,
                                  const std::string& scheme, const std::string& drift,
                                  double horizon, int steps, long replicas, double halfwidth,
                                  std::uint64_t seed) {
        return estimate_dict(thm1_lhs_binned(u, y, parse_scheme(scheme), DriftSpec::parse(drift),
                                             make_grid(horizon, steps), replicas, halfwidth,
                                             RngStream{seed, 0}));
    }, py::arg("u"), py::arg("y"), py::arg("scheme"), py::arg("drift"), py::arg("horizon"),
       py::arg("steps"), py::arg("replicas"), py::arg("halfwidth"), py::arg("seed"));

    mod.def("density_direct", [](std::vector<double> u, const std::string& drift, int k,
                                 double lo, double hi, double delta, bool ordered, double horizon,
                                 int steps, long replicas, std::uint64_t seed) {
        return density_dict(density_direct(u, DriftSpec::parse(drift), DensityTarget::for_k(k),
                                           window_of(k, lo, hi, delta, ordered),
                                           make_grid(horizon, steps), replicas,
                                           RngStream{seed, 0}));
    }, py::arg("u"), py::arg("drift"), py::arg("k"), py::arg("lo"), py::arg("hi"),
       py::arg("delta"), py::arg("ordered"), py::arg("horizon"), py::arg("steps"),
       py::arg("replicas"), py::arg("seed"));

    mod.def("run_experiment", [](const std::string& config_text) {
        const RunResult r = run(parse_config(config_text));
        py::dict out;
        out["exit_code"] = r.exit_code;
        py::list rows;
        for (const auto& row : r.rows) {
            py::dict jr;
            jr["label"] = row.label;
            jr["estimate"] = row.estimate;
            jr["stderr"] = row.stderr_;
            if (row.oracle)
                jr["oracle"] = *row.oracle;
            else
                jr["oracle"] = py::none();
            jr["provenance"] = row.provenance;
            jr["pass"] = row.pass;
            jr["inconclusive"] = row.inconclusive;
            rows.append(jr);
        }
        out["rows"] = rows;
        out["files"] = r.files;
        return out;
    }, py::arg("config_text"));
}
