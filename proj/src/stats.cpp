#include "coalflow/stats.hpp"

#include <algorithm>
#include <cstdio>

namespace coalflow {

void HistSpec::validate() const {
    if (dim < 1)
        throw std::invalid_argument("HistSpec: dimension must be at least 1");
    if (!(delta > 0.0))
        throw std::invalid_argument("HistSpec: bin width must be positive");
    if (!(hi > lo))
        throw std::invalid_argument("HistSpec: empty window");
}

int HistSpec::bins_per_axis() const {
    const int b = static_cast<int>(std::floor((hi - lo) / delta + 0.5));
    return b > 0 ? b : 1;
}

std::int64_t HistSpec::total_bins() const {
    std::int64_t t = 1;
    for (int d = 0; d < dim; ++d)
        t *= bins_per_axis();
    return t;
}

std::int64_t HistSpec::locate(std::span<const double> y) const {
    if (static_cast<int>(y.size()) != dim)
        throw std::invalid_argument("HistSpec::locate: dimension mismatch");
    if (ordered_sector)
        for (int d = 0; d + 1 < dim; ++d)
            if (!(y[static_cast<std::size_t>(d)] < y[static_cast<std::size_t>(d) + 1]))
                return -1;
    const int b = bins_per_axis();
    std::int64_t flat = 0;
    for (int d = 0; d < dim; ++d) {
        const double v = y[static_cast<std::size_t>(d)];
        if (v < lo || v >= hi) return -1;
        const auto idx = static_cast<std::int64_t>(std::floor((v - lo) / delta));
        const std::int64_t clamped = idx >= b ? b - 1 : idx; // right edge rounding
        flat = flat * b + clamped;
    }
    return flat;
}

std::vector<double> HistSpec::bin_lo(std::int64_t flat) const {
    const int b = bins_per_axis();
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int d = dim - 1; d >= 0; --d) {
        v[static_cast<std::size_t>(d)] = lo + static_cast<double>(flat % b) * delta;
        flat /= b;
    }
    return v;
}

Histogram::Histogram(const HistSpec& s) : spec(s) {
    spec.validate();
    const auto t = static_cast<std::size_t>(spec.total_bins());
    sum.assign(t, 0.0);
    sum2.assign(t, 0.0);
    count.assign(t, 0);
}

void Histogram::add_replica(std::span<const std::pair<std::int64_t, double>> contribs,
                            std::span<const std::int64_t> tuple_counts, double weight) {
    ++replicas;
    wsum += weight;
    w2sum += weight * weight;
    for (std::size_t i = 0; i < contribs.size(); ++i) {
        const auto bin = static_cast<std::size_t>(contribs[i].first);
        const double x = weight * contribs[i].second;
        sum[bin] += x;
        sum2[bin] += x * x;
        count[bin] += tuple_counts[i];
    }
}

void Histogram::merge(const Histogram& o) {
    if (sum.size() != o.sum.size())
        throw std::invalid_argument("Histogram::merge: incompatible specs");
    replicas += o.replicas;
    wsum += o.wsum;
    w2sum += o.w2sum;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] += o.sum[i];
        sum2[i] += o.sum2[i];
        count[i] += o.count[i];
    }
}

DensityEstimate Histogram::estimate() const {
    DensityEstimate e;
    e.spec = spec;
    e.replicas = replicas;
    e.ess = w2sum > 0.0 ? wsum * wsum / w2sum : 0.0;
    const std::size_t t = sum.size();
    e.value.assign(t, 0.0);
    e.stderr_.assign(t, 0.0);
    e.count = count;
    std::int64_t hits = 0;
    if (replicas > 0) {
        const auto r = static_cast<double>(replicas);
        for (std::size_t i = 0; i < t; ++i) {
            e.value[i] = sum[i] / r;
            if (replicas > 1) {
                double var = (sum2[i] - sum[i] * e.value[i]) / static_cast<double>(replicas - 1);
                if (var < 0.0) var = 0.0;
                e.stderr_[i] = std::sqrt(var / r);
            }
            hits += count[i];
        }
    }
    e.empty_flag = hits == 0;
    return e;
}

std::string DensityEstimate::to_csv() const {
    std::string out;
    for (int d = 1; d <= spec.dim; ++d) {
        out += "bin_lo_" + std::to_string(d) + ",";
    }
    out += "value,stderr,count\n";
    char buf[64];
    const auto t = static_cast<std::int64_t>(value.size());
    for (std::int64_t i = 0; i < t; ++i) {
        const auto lo_v = spec.bin_lo(i);
        for (double v : lo_v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += buf;
            out += ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", value[static_cast<std::size_t>(i)]);
        out += buf;
        out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", stderr_[static_cast<std::size_t>(i)]);
        out += buf;
        out += ',';
        out += std::to_string(count[static_cast<std::size_t>(i)]);
        out += '\n';
    }
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

double gaussian_density(int dim, std::span<const double> center, double variance,
                        std::span<const double> z) {
    if (!(variance > 0.0))
        throw std::invalid_argument("gaussian_density: variance must be positive");
    if (static_cast<int>(center.size()) != dim || static_cast<int>(z.size()) != dim)
        throw std::invalid_argument("gaussian_density: dimension mismatch");
    double q = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = z[static_cast<std::size_t>(d)] - center[static_cast<std::size_t>(d)];
        q += diff * diff;
    }
    constexpr double two_pi = 6.283185307179586476925;
    return std::pow(two_pi * variance, -0.5 * dim) * std::exp(-q / (2.0 * variance));
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_statistic: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double x = sa[i] <= sb[j] ? sa[i] : sb[j];
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(sa.size());
        const double fb = static_cast<double>(j) / static_cast<double>(sb.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

double ks_critical_1pct(std::size_t na, std::size_t nb) {
    const double c = 1.6276236115189501; // sqrt(-0.5 ln(0.005))
    return c * std::sqrt(static_cast<double>(na + nb) /
                         (static_cast<double>(na) * static_cast<double>(nb)));
}

} // namespace coalflow
