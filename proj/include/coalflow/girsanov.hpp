// Stochastic exponentials: the flow-level Girsanov log-weight over free paths
// stopped at absorption, and the bridge-level log-weight over pinned paths.
// All arithmetic stays in the log domain; exponentiate only when aggregating.
#pragma once

#include <span>

#include "coalflow/coalesce.hpp"
#include "coalflow/drift.hpp"

namespace coalflow {

struct LogWeight {
    double ito_term = 0.0;  // discrete stochastic-integral part (left-point sums)
    double quad_term = 0.0; // sum of a^2 dt
    double total() const { return ito_term - 0.5 * quad_term; }
};

// Left-point Ito sum: sum_{i < cutoff} a(values[i]) * increments[i].
double ito_sum_left(std::span<const double> values, std::span<const double> increments,
                    int cutoff_node, const DriftSpec& drift);

// Flow log-weight: sum over coordinates of the drift integral along the FREE
// path, stopped at that coordinate's absorption node. Needs a bundle built
// from explicit noise (free paths retained).
LogWeight flow_logweight(const CoalescedBundle& cb, const DriftSpec& drift);

// Same integral restricted to the first `prefix` coordinates. Merging only
// ever glues a right block onto a left one, so the first-n subsystem is
// closed and this is its own flow log-weight on the shared noise.
LogWeight flow_logweight_prefix(const CoalescedBundle& cb, const DriftSpec& drift, int prefix);

// Two evaluations of the bridge exponential. `cancelled` applies the exact
// algebraic cancellation of the singular compensator:
//   sum_k [ sum_{i<c_k} a(X_k(t_i)) dEta_k(t_i)
//         + sum_{i<c_k} a(X_k(t_i)) ((y_k-u_k)/T - a(X_k(t_i))/2) dt ].
// `literal` keeps the driving-noise integral and the compensator as separate
// sums (right-point compensator, recovered exactly from the time-change
// driving increments); the final subinterval is excluded because the time
// substitution sends it to an unbounded interval. literal therefore requires
// a bundle sampled in time_change mode.
enum class BridgeForm { cancelled, literal };

// Orientation of the dEta pairing; `plus` couples the sampled bridge to the
// pinned path it generated and is the repository-wide default (fixed by the
// conditional-identity acceptance test). `minus` is kept for cross-checks.
enum class EtaSign { plus, minus };

LogWeight bridge_logweight(const PinnedBundle& pb, std::span<const int> cutoff_nodes,
                           const DriftSpec& drift, BridgeForm form = BridgeForm::cancelled,
                           EtaSign sign = EtaSign::plus);

// Growth-bound constants: C2 exactly from the formula, C1 assembled from a
// Monte Carlo estimate of the singular bridge moment
//   M = E exp(2 p sup|a| int_0^T |eta(t)|/(T-t) dt)
// (left-point sum, last node excluded), C1 = exp(n p |2p-1| T sup|a|^2
// + p sqrt(n) ||u|| sup|a|) * M^(n/2).
struct Lemma5Constants {
    double c2 = 0.0;
    double c1 = 0.0;
    double c1_stderr = 0.0;
    double moment_mean = 0.0;
    double moment_stderr = 0.0;
};

Lemma5Constants lemma5_constants(std::span<const double> u, double p, int n,
                                 const DriftSpec& drift, const TimeGrid& grid,
                                 long replicas, RngStream rng);

} // namespace coalflow
