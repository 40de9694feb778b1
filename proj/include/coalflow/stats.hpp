// Estimation plumbing: scalar and weighted accumulators with exact merges,
// multi-dimensional histograms with per-replica variance tracking, and the
// small closed-form statistics the oracles need.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coalflow {

struct MCEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::int64_t replicas = 0;
    double ess = 0.0;        // effective sample size; = replicas when unweighted
    bool empty_flag = false; // flagged: no replica qualified (not an estimated zero)
    std::int64_t retained = 0; // replicas that actually contributed (binned estimators)
};

// Plain running moments; merge order is fixed by the caller, so pooled results
// are reproducible bit-for-bit.
struct Accum {
    std::int64_t count = 0;
    double sum = 0.0;
    double sum2 = 0.0;

    void add(double x) {
        ++count;
        sum += x;
        sum2 += x * x;
    }
    void merge(const Accum& o) {
        count += o.count;
        sum += o.sum;
        sum2 += o.sum2;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double variance() const {
        if (count < 2) return 0.0;
        const double v = (sum2 - sum * mean()) / static_cast<double>(count - 1);
        return v > 0.0 ? v : 0.0;
    }
    MCEstimate estimate() const {
        MCEstimate e;
        e.mean = mean();
        e.stderr_ = count ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
        e.replicas = count;
        e.ess = static_cast<double>(count);
        return e;
    }
};

// Accumulator for weighted means (importance sampling); tracks the weight
// totals needed for the effective sample size (sum w)^2 / sum w^2.
struct WeightedAccum {
    Accum raw; // raw per-replica contributions
    double wsum = 0.0;
    double w2sum = 0.0;

    void add(double contribution, double weight) {
        raw.add(contribution);
        wsum += weight;
        w2sum += weight * weight;
    }
    void merge(const WeightedAccum& o) {
        raw.merge(o.raw);
        wsum += o.wsum;
        w2sum += o.w2sum;
    }
    MCEstimate estimate() const {
        MCEstimate e = raw.estimate();
        e.ess = w2sum > 0.0 ? wsum * wsum / w2sum : 0.0;
        return e;
    }
};

// Histogram over a j-dimensional window of half-open congruent bins
// [v, v+delta). Per-replica contribution sums make bin-level standard errors
// replica-based rather than tuple-based.
struct HistSpec {
    int dim = 1;
    double lo = 0.0;
    double hi = 1.0;
    double delta = 0.1;
    bool ordered_sector = false; // window restricted to y_1 < ... < y_j

    int bins_per_axis() const;
    std::int64_t total_bins() const;
    // flat bin index or -1 when out of window (or out of sector)
    std::int64_t locate(std::span<const double> y) const;
    std::vector<double> bin_lo(std::int64_t flat) const;
    void validate() const;
};

struct DensityEstimate {
    HistSpec spec;
    std::int64_t replicas = 0;
    std::vector<double> value;   // per bin
    std::vector<double> stderr_; // per bin
    std::vector<std::int64_t> count; // raw tuple counts per bin
    double ess = 0.0;
    bool empty_flag = false; // no tuple landed anywhere

    std::string to_csv() const;
};

// Accumulates one replica's sparse bin contributions, then folds them into
// running per-bin sums. Contributions are already divided by delta^j; the
// value reported is the replica mean of the per-replica bin contribution.
struct Histogram {
    HistSpec spec;
    std::int64_t replicas = 0;
    std::vector<double> sum;
    std::vector<double> sum2;
    std::vector<std::int64_t> count;
    double wsum = 0.0, w2sum = 0.0;

    Histogram() = default;
    explicit Histogram(const HistSpec& s);

    // one replica's contributions: (flat bin, contribution) pairs with distinct bins
    void add_replica(std::span<const std::pair<std::int64_t, double>> contribs,
                     std::span<const std::int64_t> tuple_counts, double weight);
    void merge(const Histogram& o);
    DensityEstimate estimate() const;
};

// Scratch helper: collect tuple hits for one replica, then commit.
struct ReplicaBins {
    std::vector<std::pair<std::int64_t, double>> contribs;
    std::vector<std::int64_t> tuple_counts;

    void clear() {
        contribs.clear();
        tuple_counts.clear();
    }
    void hit(std::int64_t flat, double amount) {
        for (std::size_t i = 0; i < contribs.size(); ++i) {
            if (contribs[i].first == flat) {
                contribs[i].second += amount;
                ++tuple_counts[i];
                return;
            }
        }
        contribs.emplace_back(flat, amount);
        tuple_counts.push_back(1);
    }
    void commit(Histogram& h, double weight) {
        h.add_replica(contribs, tuple_counts, weight);
    }
};

// standard normal distribution function
double normal_cdf(double x);
// g^m_T(u; z) = (2 pi T)^{-m/2} exp(-||z-u||^2 / (2T))
double gaussian_density(int dim, std::span<const double> center, double variance,
                        std::span<const double> z);

// Two-sample Kolmogorov-Smirnov statistic and the alpha = 0.01 critical value.
double ks_statistic(std::span<const double> a, std::span<const double> b);
double ks_critical_1pct(std::size_t na, std::size_t nb);

} // namespace coalflow
