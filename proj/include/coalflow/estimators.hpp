// Monte Carlo estimators for the representation identities: both sides of the
// conditional identity, point densities (direct, importance-weighted, nested
// representation), survivor-position densities with kernel regression, and
// the partition/tower/monotonicity checks.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coalflow/coalesce.hpp"
#include "coalflow/girsanov.hpp"
#include "coalflow/parallel.hpp"
#include "coalflow/stats.hpp"

namespace coalflow {

// ----- small result carriers -----

struct QLSample {
    bool cemetery = true;
    std::vector<double> values; // strictly increasing when not cemetery
};

struct CheckRow {
    std::string label;
    double a = 0.0, a_stderr = 0.0;
    double b = 0.0, b_stderr = 0.0;
    double tolerance = 0.0; // the |a-b| bound actually applied
    bool pass = false;
    bool inconclusive = false;
};

struct CheckReport {
    std::vector<CheckRow> rows;
    bool pass() const {
        for (const auto& r : rows)
            if (!r.inconclusive && !r.pass) return false;
        return true;
    }
};

// ----- targets -----

// A density target: ordered j-tuples of distinct survivor values on replicas
// realizing scheme s, or ordered k-tuples over all replicas with >= k
// survivors (the (n,k)-point density).
struct DensityTarget {
    bool by_scheme = false;
    Scheme scheme;
    int tuple = 1; // j (by_scheme) or k

    static DensityTarget for_scheme(Scheme s, int j) {
        DensityTarget t;
        t.by_scheme = true;
        t.scheme = std::move(s);
        t.tuple = j;
        return t;
    }
    static DensityTarget for_k(int k) {
        DensityTarget t;
        t.tuple = k;
        return t;
    }
};

// ----- operations -----

QLSample ql_sample(const CoalescedBundle& cb, const IndexSet& L);

struct CoalProbResult {
    MCEstimate estimate;
    double oracle = 0.0; // 2 (1 - Phi((u2-u1)/sqrt(2T)))
};

CoalProbResult coalescence_probability(std::span<const double> u, const TimeGrid& grid,
                                       long replicas, RngStream rng);

MCEstimate thm1_rhs(std::span<const double> u, std::span<const double> y, const Scheme& s,
                    const DriftSpec& drift, const TimeGrid& grid, long replicas, RngStream rng,
                    BridgeForm form = BridgeForm::cancelled, EtaSign sign = EtaSign::plus,
                    BridgeMode mode = BridgeMode::conditioned);

MCEstimate thm1_lhs_binned(std::span<const double> u, std::span<const double> y, const Scheme& s,
                           const DriftSpec& drift, const TimeGrid& grid, long replicas,
                           double halfwidth, RngStream rng);

// Batched variant: several (y, s) targets evaluated on one shared set of
// replicas (one flow simulation and one log-weight per replica).
struct Thm1LhsSpec {
    std::vector<double> y;
    Scheme s;
};

std::vector<MCEstimate> thm1_lhs_binned_multi(std::span<const double> u,
                                              const std::vector<Thm1LhsSpec>& specs,
                                              const DriftSpec& drift, const TimeGrid& grid,
                                              long replicas, double halfwidth, RngStream rng);

DensityEstimate density_direct(std::span<const double> u, const DriftSpec& drift,
                               const DensityTarget& target, const HistSpec& window,
                               const TimeGrid& grid, long replicas, RngStream rng);

DensityEstimate density_girsanov(std::span<const double> u, const DriftSpec& drift,
                                 const DensityTarget& target, const HistSpec& window,
                                 const TimeGrid& grid, long replicas, RngStream rng);

// Nested representation estimator: outer Gaussian draws of the unpinned
// coordinates, inner conditional-expectation estimates, Gaussian density
// factor, summed over the j-subsets L of the survivor positions. Values are
// evaluated at each window bin's center (ordered sector).
DensityEstimate density_thm2(std::span<const double> u, const Scheme& s, int j,
                             const DriftSpec& drift, const HistSpec& window,
                             const TimeGrid& grid, long outer_replicas, long inner_replicas,
                             RngStream rng, EtaSign sign = EtaSign::plus);

// Survivor-position representation: sum over increasing k-subsets L of
// q^L-kernel-density times kernel regression of the stochastic exponential.
// Evaluated at bin centers of `window`; bandwidth <= 0 means the plug-in rule.
DensityEstimate density_thm4(std::span<const double> u, int k, const DriftSpec& drift,
                             const HistSpec& window, const TimeGrid& grid, long replicas,
                             double bandwidth, RngStream rng);

// Partition identity: the (n,k)-density equals the sum of its scheme-resolved
// parts on shared streams, per bin.
CheckReport lemma7_check(std::span<const double> u, int k, const DriftSpec& drift,
                         const HistSpec& window, const TimeGrid& grid, long replicas,
                         RngStream rng, double tolerance = 1e-12);

// Martingale normalization and the binned tower property between the m-point
// system and its first-n subsystem, on shared replicas.
CheckReport lemma8_check(std::span<const double> u_m, int n, const DriftSpec& drift,
                         const TimeGrid& grid, long replicas, double halfwidth, RngStream rng,
                         double kappa = 4.0);

// Monotonicity of the k-point density across nested start configurations.
CheckReport thm3_monotonicity(const std::vector<std::vector<double>>& nested_u, int k,
                              const DriftSpec& drift, const HistSpec& window,
                              const TimeGrid& grid, long replicas, RngStream rng,
                              double kappa = 3.0);

// kappa-rule comparison used by the harness and the checks above.
CheckRow compare_estimates(const std::string& label, const MCEstimate& a, const MCEstimate& b,
                           double kappa = 4.0, double extra_allowance = 0.0);

} // namespace coalflow
