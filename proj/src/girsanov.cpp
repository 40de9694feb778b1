#include "coalflow/girsanov.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace coalflow {

double ito_sum_left(std::span<const double> values, std::span<const double> increments,
                    int cutoff_node, const DriftSpec& drift) {
    if (values.size() != increments.size() + 1)
        throw std::invalid_argument("ito_sum_left: need one more value than increments");
    if (cutoff_node < 0 || cutoff_node > static_cast<int>(increments.size()))
        throw std::invalid_argument("ito_sum_left: cutoff out of range");
    double s = 0.0;
    for (int i = 0; i < cutoff_node; ++i)
        s += drift(values[static_cast<std::size_t>(i)]) * increments[static_cast<std::size_t>(i)];
    return s;
}

LogWeight flow_logweight_prefix(const CoalescedBundle& cb, const DriftSpec& drift,
                                int prefix) {
    if (cb.free_values.empty() || cb.free_increments.empty())
        throw std::domain_error("flow_logweight: bundle carries no free paths");
    if (prefix < 1 || prefix > cb.n)
        throw std::invalid_argument("flow_logweight_prefix: need 1 <= prefix <= n");
    LogWeight lw;
    const int m = cb.grid.steps;
    for (int k = 0; k < prefix; ++k) {
        const double* v = cb.free_values.data() + static_cast<std::size_t>(k) * (m + 1);
        const double* dw = cb.free_increments.data() + static_cast<std::size_t>(k) * m;
        const int cut = cb.tau_node[static_cast<std::size_t>(k)];
        for (int i = 0; i < cut; ++i) {
            const double a = drift(v[i]);
            lw.ito_term += a * dw[i];
            lw.quad_term += a * a * cb.grid.step(i);
        }
    }
    return lw;
}

LogWeight flow_logweight(const CoalescedBundle& cb, const DriftSpec& drift) {
    return flow_logweight_prefix(cb, drift, cb.n);
}

LogWeight bridge_logweight(const PinnedBundle& pb, std::span<const int> cutoff_nodes,
                           const DriftSpec& drift, BridgeForm form, EtaSign sign) {
    const int m = pb.grid.steps;
    const double T = pb.grid.horizon;
    if (static_cast<int>(cutoff_nodes.size()) != pb.n)
        throw std::invalid_argument("bridge_logweight: one cutoff per coordinate required");
    for (int c : cutoff_nodes)
        if (c < 0 || c > m)
            throw std::invalid_argument("bridge_logweight: cutoff out of range");
    if (form == BridgeForm::literal && pb.driving_increments.empty())
        throw std::domain_error("bridge_logweight: literal form needs a time_change bundle");
    const double sgn = sign == EtaSign::plus ? 1.0 : -1.0;
    LogWeight lw;
    for (int k = 0; k < pb.n; ++k) {
        const double* x = pb.values.data() + static_cast<std::size_t>(k) * (m + 1);
        const double vk = (pb.end[static_cast<std::size_t>(k)] - pb.start[static_cast<std::size_t>(k)]) / T;
        const int cut = cutoff_nodes[static_cast<std::size_t>(k)];
        if (form == BridgeForm::cancelled) {
            const double* de = pb.bridge_increments.data() + static_cast<std::size_t>(k) * m;
            for (int i = 0; i < cut; ++i) {
                const double a = drift(x[i]);
                const double dt = pb.grid.step(i);
                lw.ito_term += a * (sgn * de[i] + vk * dt);
                lw.quad_term += a * a * dt;
            }
        } else {
            // integrate only over [0, min(cut, m-1)): the last subinterval has
            // no driving increment
            const double* db = pb.driving_increments.data() + static_cast<std::size_t>(k) * (m - 1);
            const int stop = cut < m - 1 ? cut : m - 1;
            double b = 0.0; // driving path value b(s_i), builds the exact compensator
            for (int i = 0; i < stop; ++i) {
                const double a = drift(x[i]);
                const double dt = pb.grid.step(i);
                b += db[i];
                const double dbeta = (T - pb.grid.node(i)) * db[i];
                lw.ito_term += a * (sgn * dbeta + (vk - sgn * b) * dt);
                lw.quad_term += a * a * dt;
            }
        }
    }
    return lw;
}

Lemma5Constants lemma5_constants(std::span<const double> u, double p, int n,
                                 const DriftSpec& drift, const TimeGrid& grid,
                                 long replicas, RngStream rng) {
    if (p < 0.0)
        throw std::invalid_argument("lemma5_constants: p must be nonnegative");
    if (n < 1 || static_cast<int>(u.size()) != n)
        throw std::invalid_argument("lemma5_constants: u must have n components");
    if (replicas < 1)
        throw std::invalid_argument("lemma5_constants: need at least one replica");
    const double sup = drift.sup_norm();
    Lemma5Constants out;
    out.c2 = p * std::sqrt(static_cast<double>(n)) * sup;
    if (p == 0.0 || sup == 0.0) {
        out.c1 = 1.0;
        out.moment_mean = 1.0;
        return out;
    }
    double unorm2 = 0.0;
    for (double ui : u)
        unorm2 += ui * ui;
    const double front = std::exp(n * p * std::abs(2.0 * p - 1.0) * grid.horizon * sup * sup +
                                  p * std::sqrt(static_cast<double>(n)) * std::sqrt(unorm2) * sup);
    // M = E exp(2 p sup|a| sum_{i<m} |eta(t_i)|/(T-t_i) dt), one bridge per replica
    const int m = grid.steps;
    double sum = 0.0, sum2 = 0.0;
    for (long r = 0; r < replicas; ++r) {
        const BridgeBundle b = sample_bridge(grid, 1, rng.replica(static_cast<std::uint64_t>(r)));
        double integral = 0.0;
        for (int i = 0; i < m; ++i)
            integral += std::abs(b.values[static_cast<std::size_t>(i)]) /
                        (grid.horizon - grid.node(i)) * grid.step(i);
        const double x = std::exp(2.0 * p * sup * integral);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / static_cast<double>(replicas);
    double var = (sum2 - sum * mean) / std::max<long>(replicas - 1, 1);
    if (var < 0.0) var = 0.0;
    out.moment_mean = mean;
    out.moment_stderr = std::sqrt(var / static_cast<double>(replicas));
    const double half_n = 0.5 * n;
    out.c1 = front * std::pow(mean, half_n);
    out.c1_stderr = front * half_n * std::pow(mean, half_n - 1.0) * out.moment_stderr;
    return out;
}

} // namespace coalflow
