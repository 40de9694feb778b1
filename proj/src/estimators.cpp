#include "coalflow/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace coalflow {

namespace {

void check_replicas(long replicas) {
    if (replicas < 1)
        throw std::invalid_argument("estimator: need at least one replica");
}

// increasing j-element subsets of {1..k}, lexicographic
std::vector<std::vector<int>> increasing_subsets(int k, int j) {
    std::vector<std::vector<int>> out;
    if (j < 0 || j > k) return out;
    std::vector<int> cur(static_cast<std::size_t>(j));
    for (int i = 0; i < j; ++i)
        cur[static_cast<std::size_t>(i)] = i + 1;
    while (true) {
        out.push_back(cur);
        int pos = j - 1;
        while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == k - (j - 1 - pos))
            --pos;
        if (pos < 0) break;
        ++cur[static_cast<std::size_t>(pos)];
        for (int q = pos + 1; q < j; ++q)
            cur[static_cast<std::size_t>(q)] = cur[static_cast<std::size_t>(q) - 1] + 1;
    }
    return out;
}

// ordered tuples of `j` distinct indices in 0..sz-1, lexicographic
template <class F>
void for_each_ordered_tuple(int sz, int j, F&& f) {
    if (j < 1 || j > sz) return;
    std::vector<int> idx(static_cast<std::size_t>(j));
    std::vector<char> used(static_cast<std::size_t>(sz), 0);
    // depth-first over tuple positions
    int d = 0;
    idx[0] = -1;
    while (d >= 0) {
        int& i = idx[static_cast<std::size_t>(d)];
        if (i >= 0) used[static_cast<std::size_t>(i)] = 0;
        ++i;
        while (i < sz && used[static_cast<std::size_t>(i)]) ++i;
        if (i >= sz) {
            --d;
            continue;
        }
        used[static_cast<std::size_t>(i)] = 1;
        if (d + 1 == j) {
            f(std::span<const int>(idx.data(), idx.size()));
        } else {
            ++d;
            idx[static_cast<std::size_t>(d)] = -1;
        }
    }
}

struct AccumBox {
    Accum acc;
    void merge(const AccumBox& o) { acc.merge(o.acc); }
};

double epanechnikov(double v) {
    const double t = 1.0 - v * v;
    return t > 0.0 ? 0.75 * t : 0.0;
}

} // namespace

QLSample ql_sample(const CoalescedBundle& cb, const IndexSet& L) {
    if (L.members.empty())
        throw std::invalid_argument("ql_sample: L must be nonempty");
    if (L.members.back() > cb.n)
        throw std::invalid_argument("ql_sample: position exceeds point count");
    QLSample q;
    const std::vector<double> survivors = cb.terminal_points();
    if (static_cast<int>(survivors.size()) < L.members.back())
        return q; // cemetery
    q.cemetery = false;
    q.values.reserve(L.members.size());
    for (int pos : L.members)
        q.values.push_back(survivors[static_cast<std::size_t>(pos) - 1]);
    return q;
}

CoalProbResult coalescence_probability(std::span<const double> u, const TimeGrid& grid,
                                       long replicas, RngStream rng) {
    if (u.size() != 2)
        throw std::invalid_argument("coalescence_probability: exactly two starting points");
    check_replicas(replicas);
    std::vector<double> start(u.begin(), u.end());
    const auto box = parallel_replicas<AccumBox>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, AccumBox& acc) {
            const WienerBundle w = sample_wiener(grid, 2, rng.replica(r));
            const CoalescedBundle cb = coalesce_bundle(w, start);
            acc.acc.add(cb.survivors() == 1 ? 1.0 : 0.0);
        });
    CoalProbResult out;
    out.estimate = box.acc.estimate();
    out.oracle = 2.0 * (1.0 - normal_cdf((u[1] - u[0]) / std::sqrt(2.0 * grid.horizon)));
    return out;
}

MCEstimate thm1_rhs(std::span<const double> u, std::span<const double> y, const Scheme& s,
                    const DriftSpec& drift, const TimeGrid& grid, long replicas, RngStream rng,
                    BridgeForm form, EtaSign sign, BridgeMode mode) {
    check_replicas(replicas);
    if (u.size() != y.size() || static_cast<int>(u.size()) != s.n)
        throw std::invalid_argument("thm1_rhs: u, y and scheme size must agree");
    std::vector<double> start(u.begin(), u.end());
    std::vector<double> end(y.begin(), y.end());
    const bool zero = drift.is_zero();
    const auto box = parallel_replicas<AccumBox>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, AccumBox& acc) {
            const PinnedBundle pb = sample_pinned(grid, start, end, rng.replica(r), mode);
            const CoalescedBundle cb = coalesce_bundle(pb);
            if (extract_scheme(cb) != s) {
                acc.acc.add(0.0);
                return;
            }
            double w = 1.0;
            if (!zero)
                w = std::exp(bridge_logweight(pb, cb.tau_node, drift, form, sign).total());
            acc.acc.add(w);
        });
    return box.acc.estimate();
}

std::vector<MCEstimate> thm1_lhs_binned_multi(std::span<const double> u,
                                              const std::vector<Thm1LhsSpec>& specs,
                                              const DriftSpec& drift, const TimeGrid& grid,
                                              long replicas, double halfwidth, RngStream rng) {
    check_replicas(replicas);
    if (!(halfwidth > 0.0))
        throw std::invalid_argument("thm1_lhs_binned: halfwidth must be positive");
    const int n = static_cast<int>(u.size());
    for (const auto& sp : specs) {
        if (static_cast<int>(sp.y.size()) != n || sp.s.n != n)
            throw std::invalid_argument("thm1_lhs_binned: spec size mismatch");
    }
    std::vector<double> start(u.begin(), u.end());
    const bool zero = drift.is_zero();
    const int m = grid.steps;

    struct MultiAcc {
        std::vector<Accum> per_spec;
        void merge(const MultiAcc& o) {
            if (per_spec.empty()) per_spec.resize(o.per_spec.size());
            for (std::size_t i = 0; i < o.per_spec.size(); ++i)
                per_spec[i].merge(o.per_spec[i]);
        }
    };

    long total = 0;
    const auto box = parallel_replicas<MultiAcc>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, MultiAcc& acc) {
            if (acc.per_spec.empty()) acc.per_spec.resize(specs.size());
            const WienerBundle w = sample_wiener(grid, n, rng.replica(r));
            const CoalescedBundle cb = coalesce_bundle(w, start);
            const Scheme realized = extract_scheme(cb);
            double lw = 0.0;
            bool lw_done = zero;
            for (std::size_t q = 0; q < specs.size(); ++q) {
                bool inside = true;
                for (int k = 0; k < n && inside; ++k) {
                    const double wT = w.values[static_cast<std::size_t>(k) * (m + 1) + m];
                    const double target = specs[q].y[static_cast<std::size_t>(k)] -
                                          start[static_cast<std::size_t>(k)];
                    inside = std::abs(wT - target) <= halfwidth;
                }
                if (!inside) continue;
                double x = 0.0;
                if (realized == specs[q].s) {
                    if (!lw_done) {
                        lw = flow_logweight(cb, drift).total();
                        lw_done = true;
                    }
                    x = zero ? 1.0 : std::exp(lw);
                }
                acc.per_spec[q].add(x);
            }
        });
    total = replicas;

    std::vector<MCEstimate> out;
    out.reserve(specs.size());
    for (std::size_t q = 0; q < specs.size(); ++q) {
        const Accum& a = box.per_spec.empty() ? Accum{} : box.per_spec[q];
        MCEstimate e = a.estimate();
        e.retained = a.count;
        e.replicas = total;
        e.ess = static_cast<double>(a.count);
        e.empty_flag = a.count == 0;
        out.push_back(e);
    }
    return out;
}

MCEstimate thm1_lhs_binned(std::span<const double> u, std::span<const double> y, const Scheme& s,
                           const DriftSpec& drift, const TimeGrid& grid, long replicas,
                           double halfwidth, RngStream rng) {
    Thm1LhsSpec sp;
    sp.y.assign(y.begin(), y.end());
    sp.s = s;
    return thm1_lhs_binned_multi(u, {sp}, drift, grid, replicas, halfwidth, rng)[0];
}

namespace {

struct HistBox {
    Histogram hist;
    void merge(const HistBox& o) {
        if (hist.sum.empty())
            hist = o.hist;
        else
            hist.merge(o.hist);
    }
};

// shared accumulation core for density_direct / density_girsanov
DensityEstimate density_core(std::span<const double> u, const DriftSpec& drift,
                             const DensityTarget& target, const HistSpec& window,
                             const TimeGrid& grid, long replicas, RngStream rng, bool weighted) {
    check_replicas(replicas);
    window.validate();
    const int j = target.tuple;
    if (j < 1)
        throw std::invalid_argument("density: tuple size must be at least 1");
    if (window.dim != j)
        throw std::invalid_argument("density: window dimension must equal tuple size");
    if (target.by_scheme && target.scheme.n != static_cast<int>(u.size()))
        throw std::invalid_argument("density: scheme size mismatch");
    std::vector<double> start(u.begin(), u.end());
    const int n = static_cast<int>(start.size());
    const bool zero = drift.is_zero();
    const double inv_vol = std::pow(window.delta, -static_cast<double>(j));

    const auto box = parallel_replicas<HistBox>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, HistBox& hb) {
            if (hb.hist.sum.empty()) hb.hist = Histogram(window);
            CoalescedBundle cb =
                (weighted || zero)
                    ? coalesce_bundle(sample_wiener(grid, n, rng.replica(r)), start)
                    : sample_drifted_flow(grid, start, drift, rng.replica(r));
            double weight = 1.0;
            if (weighted && !zero)
                weight = std::exp(flow_logweight(cb, drift).total());
            ReplicaBins bins;
            const bool scheme_ok = !target.by_scheme || extract_scheme(cb) == target.scheme;
            if (scheme_ok) {
                const std::vector<double> survivors = cb.terminal_points();
                const int sz = static_cast<int>(survivors.size());
                if (sz >= j) {
                    std::vector<double> y(static_cast<std::size_t>(j));
                    for_each_ordered_tuple(sz, j, [&](std::span<const int> idx) {
                        for (int d = 0; d < j; ++d)
                            y[static_cast<std::size_t>(d)] =
                                survivors[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
                        const std::int64_t flat = window.locate(y);
                        if (flat >= 0) bins.hit(flat, inv_vol);
                    });
                }
            }
            bins.commit(hb.hist, weight);
        });
    Histogram h = box.hist;
    if (h.sum.empty()) h = Histogram(window);
    return h.estimate();
}

} // namespace

DensityEstimate density_direct(std::span<const double> u, const DriftSpec& drift,
                               const DensityTarget& target, const HistSpec& window,
                               const TimeGrid& grid, long replicas, RngStream rng) {
    return density_core(u, drift, target, window, grid, replicas, rng, false);
}

DensityEstimate density_girsanov(std::span<const double> u, const DriftSpec& drift,
                                 const DensityTarget& target, const HistSpec& window,
                                 const TimeGrid& grid, long replicas, RngStream rng) {
    return density_core(u, drift, target, window, grid, replicas, rng, true);
}

DensityEstimate density_thm2(std::span<const double> u, const Scheme& s, int j,
                             const DriftSpec& drift, const HistSpec& window,
                             const TimeGrid& grid, long outer_replicas, long inner_replicas,
                             RngStream rng, EtaSign sign) {
    window.validate();
    check_replicas(outer_replicas);
    check_replicas(inner_replicas);
    const int n = static_cast<int>(u.size());
    if (s.n != n)
        throw std::invalid_argument("density_thm2: scheme size mismatch");
    const int k = s.survivors();
    if (j < 1 || j > k)
        throw std::invalid_argument("density_thm2: need 1 <= j <= survivor count");
    if (window.dim != j)
        throw std::invalid_argument("density_thm2: window dimension must equal j");
    const SchemeReplay replay = scheme_replay(s);
    std::vector<int> surv1(replay.survivors.begin(), replay.survivors.end());
    const IndexSet I(n, surv1);
    const std::vector<double> u_I = slice(u, I, SliceKeep::keep);
    const std::vector<double> u_notI = slice(u, I, SliceKeep::drop);
    const auto subsets = increasing_subsets(k, j);
    const double T = grid.horizon;
    const double sqT = std::sqrt(T);

    DensityEstimate out;
    out.spec = window;
    const auto total_bins = static_cast<std::size_t>(window.total_bins());
    out.value.assign(total_bins, 0.0);
    out.stderr_.assign(total_bins, 0.0);
    out.count.assign(total_bins, 0);
    out.replicas = outer_replicas;
    out.ess = static_cast<double>(outer_replicas);

    std::vector<double> center(static_cast<std::size_t>(j));
    bool any = false;
    for (std::size_t bin = 0; bin < total_bins; ++bin) {
        const std::vector<double> lo = window.bin_lo(static_cast<std::int64_t>(bin));
        for (int d = 0; d < j; ++d)
            center[static_cast<std::size_t>(d)] = lo[static_cast<std::size_t>(d)] + 0.5 * window.delta;
        bool ascending = true;
        for (int d = 0; d + 1 < j; ++d)
            ascending = ascending && center[static_cast<std::size_t>(d)] < center[static_cast<std::size_t>(d) + 1];
        if (window.ordered_sector && !ascending) continue;

        double value = 0.0, var = 0.0;
        for (std::size_t li = 0; li < subsets.size(); ++li) {
            const IndexSet L(k, subsets[li]);
            const std::vector<double> u_IL = slice(u_I, L, SliceKeep::keep);
            const double g = gaussian_density(j, u_IL, T, center);
            if (g == 0.0) continue;
            const RngStream sbase =
                rng.substream(static_cast<std::uint64_t>(bin) * 256 + li);
            const RngStream souter = sbase.substream(0xA);
            const RngStream sinner = sbase.substream(0xB);
            Accum outer;
            const int free_surv = k - j;
            const int free_rest = n - k;
            std::vector<double> zI(static_cast<std::size_t>(free_surv));
            std::vector<double> zRest(static_cast<std::size_t>(free_rest));
            const std::vector<double> u_I_notL = slice(u_I, L, SliceKeep::drop);
            for (long o = 0; o < outer_replicas; ++o) {
                Philox eng = souter.replica(static_cast<std::uint64_t>(o)).engine();
                for (int d = 0; d < free_surv; ++d)
                    zI[static_cast<std::size_t>(d)] =
                        u_I_notL[static_cast<std::size_t>(d)] + sqT * eng.next_normal();
                for (int d = 0; d < free_rest; ++d)
                    zRest[static_cast<std::size_t>(d)] =
                        u_notI[static_cast<std::size_t>(d)] + sqT * eng.next_normal();
                const std::vector<double> z_surv = scatter(L, center, zI);
                const std::vector<double> z = scatter(I, z_surv, zRest);
                const MCEstimate inner =
                    thm1_rhs(u, z, s, drift, grid, inner_replicas,
                             sinner.substream(static_cast<std::uint64_t>(o)),
                             BridgeForm::cancelled, sign);
                outer.add(inner.mean);
            }
            const MCEstimate oe = outer.estimate();
            value += g * oe.mean;
            var += g * g * oe.stderr_ * oe.stderr_;
            any = true;
        }
        out.value[bin] = value;
        out.stderr_[bin] = std::sqrt(var);
        out.count[bin] = outer_replicas;
    }
    out.empty_flag = !any;
    return out;
}

DensityEstimate density_thm4(std::span<const double> u, int k, const DriftSpec& drift,
                             const HistSpec& window, const TimeGrid& grid, long replicas,
                             double bandwidth, RngStream rng) {
    window.validate();
    check_replicas(replicas);
    const int n = static_cast<int>(u.size());
    if (k < 1 || k > n)
        throw std::invalid_argument("density_thm4: need 1 <= k <= n");
    if (window.dim != k)
        throw std::invalid_argument("density_thm4: window dimension must equal k");
    std::vector<double> start(u.begin(), u.end());
    const bool zero = drift.is_zero();
    const auto subsets = increasing_subsets(n, k);
    const std::size_t nl = subsets.size();

    // pass 1: simulate and store (weight, survivor tuple per L; NaN = cemetery)
    struct Rows {
        std::vector<double> w;
        std::vector<double> xs; // replica-major, nl * k entries each
        void merge(const Rows& o) {
            w.insert(w.end(), o.w.begin(), o.w.end());
            xs.insert(xs.end(), o.xs.begin(), o.xs.end());
        }
    };
    std::vector<IndexSet> lsets;
    lsets.reserve(nl);
    for (const auto& sub : subsets)
        lsets.emplace_back(n, sub);
    const Rows rows = parallel_replicas<Rows>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, Rows& acc) {
            const WienerBundle wb = sample_wiener(grid, n, rng.replica(r));
            const CoalescedBundle cb = coalesce_bundle(wb, start);
            const double w =
                zero ? 1.0 : std::exp(flow_logweight(cb, drift).total());
            acc.w.push_back(w);
            const std::vector<double> survivors = cb.terminal_points();
            for (const IndexSet& L : lsets) {
                if (static_cast<int>(survivors.size()) < L.members.back()) {
                    for (int d = 0; d < k; ++d)
                        acc.xs.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    for (int pos : L.members)
                        acc.xs.push_back(survivors[static_cast<std::size_t>(pos) - 1]);
                }
            }
        });

    const auto R = static_cast<std::size_t>(replicas);
    // per-L bandwidths: plug-in rule per axis unless an explicit bandwidth is given
    std::vector<std::vector<double>> bw(nl, std::vector<double>(static_cast<std::size_t>(k), 0.0));
    std::vector<long> alive(nl, 0);
    for (std::size_t li = 0; li < nl; ++li) {
        std::vector<Accum> axis(static_cast<std::size_t>(k));
        for (std::size_t r = 0; r < R; ++r) {
            const double* x = rows.xs.data() + (r * nl + li) * static_cast<std::size_t>(k);
            if (std::isnan(x[0])) continue;
            ++alive[li];
            for (int d = 0; d < k; ++d)
                axis[static_cast<std::size_t>(d)].add(x[d]);
        }
        for (int d = 0; d < k; ++d) {
            if (bandwidth > 0.0) {
                bw[li][static_cast<std::size_t>(d)] = bandwidth;
            } else if (alive[li] > 1) {
                const double sd = std::sqrt(axis[static_cast<std::size_t>(d)].variance());
                const double base = sd > 0.0 ? sd : window.delta;
                // Epanechnikov plug-in constant (2.345 at k=1), reused per axis
                bw[li][static_cast<std::size_t>(d)] =
                    2.345 * base *
                    std::pow(static_cast<double>(alive[li]), -1.0 / (k + 4.0));
            } else {
                bw[li][static_cast<std::size_t>(d)] = window.delta;
            }
        }
    }

    DensityEstimate out;
    out.spec = window;
    const auto total_bins = static_cast<std::size_t>(window.total_bins());
    out.value.assign(total_bins, 0.0);
    out.stderr_.assign(total_bins, 0.0);
    out.count.assign(total_bins, 0);
    out.replicas = replicas;
    double wsum = 0.0, w2sum = 0.0;
    for (double w : rows.w) {
        wsum += w;
        w2sum += w * w;
    }
    out.ess = w2sum > 0.0 ? wsum * wsum / w2sum : 0.0;
    out.empty_flag =
        std::all_of(alive.begin(), alive.end(), [](long a) { return a == 0; });

    std::vector<double> center(static_cast<std::size_t>(k));
    for (std::size_t bin = 0; bin < total_bins; ++bin) {
        const std::vector<double> lo = window.bin_lo(static_cast<std::int64_t>(bin));
        for (int d = 0; d < k; ++d)
            center[static_cast<std::size_t>(d)] = lo[static_cast<std::size_t>(d)] + 0.5 * window.delta;
        if (window.ordered_sector) {
            bool ascending = true;
            for (int d = 0; d + 1 < k; ++d)
                ascending = ascending &&
                            center[static_cast<std::size_t>(d)] < center[static_cast<std::size_t>(d) + 1];
            if (!ascending) continue;
        }
        Accum xi;
        std::int64_t hits = 0;
        for (std::size_t r = 0; r < R; ++r) {
            double contrib = 0.0;
            for (std::size_t li = 0; li < nl; ++li) {
                const double* x = rows.xs.data() + (r * nl + li) * static_cast<std::size_t>(k);
                if (std::isnan(x[0])) continue;
                double kern = 1.0;
                for (int d = 0; d < k && kern > 0.0; ++d) {
                    const double h = bw[li][static_cast<std::size_t>(d)];
                    kern *= epanechnikov((center[static_cast<std::size_t>(d)] - x[d]) / h) / h;
                }
                if (kern > 0.0) {
                    contrib += rows.w[r] * kern;
                    ++hits;
                }
            }
            xi.add(contrib);
        }
        const MCEstimate e = xi.estimate();
        out.value[bin] = e.mean;
        out.stderr_[bin] = e.stderr_;
        out.count[bin] = hits;
    }
    return out;
}

CheckReport lemma7_check(std::span<const double> u, int k, const DriftSpec& drift,
                         const HistSpec& window, const TimeGrid& grid, long replicas,
                         RngStream rng, double tolerance) {
    window.validate();
    check_replicas(replicas);
    const int n = static_cast<int>(u.size());
    if (k < 1 || k > n)
        throw std::invalid_argument("lemma7_check: need 1 <= k <= n");
    if (window.dim != k)
        throw std::invalid_argument("lemma7_check: window dimension must equal k");
    std::vector<double> start(u.begin(), u.end());
    const bool zero = drift.is_zero();
    // schemes with at least k survivors
    std::vector<Scheme> schemes;
    for (int l = 0; l <= n - k; ++l) {
        auto part = enumerate_schemes(n, l);
        schemes.insert(schemes.end(), part.begin(), part.end());
    }
    const double inv_vol = std::pow(window.delta, -static_cast<double>(k));

    struct MultiHist {
        Histogram total;
        std::vector<Histogram> per_scheme;
        void merge(const MultiHist& o) {
            if (total.sum.empty()) {
                total = o.total;
                per_scheme = o.per_scheme;
            } else {
                total.merge(o.total);
                for (std::size_t i = 0; i < per_scheme.size(); ++i)
                    per_scheme[i].merge(o.per_scheme[i]);
            }
        }
    };

    const MultiHist mh = parallel_replicas<MultiHist>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, MultiHist& acc) {
            if (acc.total.sum.empty()) {
                acc.total = Histogram(window);
                acc.per_scheme.assign(schemes.size(), Histogram(window));
            }
            const WienerBundle wb = sample_wiener(grid, n, rng.replica(r));
            const CoalescedBundle cb = coalesce_bundle(wb, start);
            const double w =
                zero ? 1.0 : std::exp(flow_logweight(cb, drift).total());
            const Scheme realized = extract_scheme(cb);
            ReplicaBins bins;
            const std::vector<double> survivors = cb.terminal_points();
            const int sz = static_cast<int>(survivors.size());
            if (sz >= k) {
                std::vector<double> y(static_cast<std::size_t>(k));
                for_each_ordered_tuple(sz, k, [&](std::span<const int> idx) {
                    for (int d = 0; d < k; ++d)
                        y[static_cast<std::size_t>(d)] =
                            survivors[static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
                    const std::int64_t flat = window.locate(y);
                    if (flat >= 0) bins.hit(flat, inv_vol);
                });
            }
            bins.commit(acc.total, w);
            for (std::size_t si = 0; si < schemes.size(); ++si) {
                if (schemes[si] == realized)
                    bins.commit(acc.per_scheme[si], w);
                else
                    acc.per_scheme[si].add_replica({}, {}, w);
            }
        });

    CheckReport report;
    const DensityEstimate total = mh.total.estimate();
    std::vector<DensityEstimate> parts;
    parts.reserve(schemes.size());
    for (const auto& h : mh.per_scheme)
        parts.push_back(h.estimate());
    double worst = 0.0;
    for (std::size_t b = 0; b < total.value.size(); ++b) {
        double sum = 0.0;
        for (const auto& p : parts)
            sum += p.value[b];
        worst = std::max(worst, std::abs(sum - total.value[b]));
    }
    CheckRow row;
    char label[96];
    std::snprintf(label, sizeof label, "partition n=%d k=%d (%zu schemes) max bin gap", n, k,
                  schemes.size());
    row.label = label;
    row.a = worst;
    row.b = 0.0;
    row.tolerance = tolerance;
    row.pass = worst <= tolerance;
    report.rows.push_back(row);
    return report;
}

CheckReport lemma8_check(std::span<const double> u_m, int n, const DriftSpec& drift,
                         const TimeGrid& grid, long replicas, double halfwidth, RngStream rng,
                         double kappa) {
    check_replicas(replicas);
    const int mtot = static_cast<int>(u_m.size());
    if (n < 1 || n >= mtot)
        throw std::invalid_argument("lemma8_check: need 1 <= n < point count");
    if (!(halfwidth > 0.0))
        throw std::invalid_argument("lemma8_check: halfwidth must be positive");
    std::vector<double> start(u_m.begin(), u_m.end());
    double lo = start[0], hi = start[0];
    for (int i = 0; i < n; ++i) {
        lo = std::min(lo, start[static_cast<std::size_t>(i)]);
        hi = std::max(hi, start[static_cast<std::size_t>(i)]);
    }
    HistSpec bins;
    bins.dim = n;
    bins.lo = lo - 3.0;
    bins.hi = hi + 3.0;
    bins.delta = 2.0 * halfwidth;
    bins.validate();

    struct TowerAcc {
        Accum norm_big, norm_small;
        Histogram big, small;
        void merge(const TowerAcc& o) {
            norm_big.merge(o.norm_big);
            norm_small.merge(o.norm_small);
            if (big.sum.empty()) {
                big = o.big;
                small = o.small;
            } else {
                big.merge(o.big);
                small.merge(o.small);
            }
        }
    };

    const int msteps = grid.steps;
    const TowerAcc acc = parallel_replicas<TowerAcc>(
        static_cast<std::uint64_t>(replicas), [&](std::uint64_t r, TowerAcc& a) {
            if (a.big.sum.empty()) {
                a.big = Histogram(bins);
                a.small = Histogram(bins);
            }
            const WienerBundle wb = sample_wiener(grid, mtot, rng.replica(r));
            const CoalescedBundle cb = coalesce_bundle(wb, start);
            const LogWeight lw_big = flow_logweight(cb, drift);
            const LogWeight lw_small = flow_logweight_prefix(cb, drift, n);
            const double wb_ = std::exp(lw_big.total());
            const double ws_ = std::exp(lw_small.total());
            a.norm_big.add(wb_);
            a.norm_small.add(ws_);
            std::vector<double> term(static_cast<std::size_t>(n));
            for (int kk = 0; kk < n; ++kk)
                term[static_cast<std::size_t>(kk)] =
                    cb.values[static_cast<std::size_t>(kk) * (msteps + 1) + msteps];
            const std::int64_t flat = bins.locate(term);
            ReplicaBins rbins;
            if (flat >= 0) rbins.hit(flat, 1.0);
            rbins.commit(a.big, wb_);
            ReplicaBins rbins2;
            if (flat >= 0) rbins2.hit(flat, 1.0);
            rbins2.commit(a.small, ws_);
        });

    CheckReport report;
    {
        const MCEstimate e = acc.norm_big.estimate();
        CheckRow row;
        row.label = "normalization n=" + std::to_string(mtot);
        row.a = e.mean;
        row.a_stderr = e.stderr_;
        row.b = 1.0;
        row.tolerance = 3.0 * e.stderr_;
        row.pass = std::abs(e.mean - 1.0) <= row.tolerance;
        report.rows.push_back(row);
    }
    {
        const MCEstimate e = acc.norm_small.estimate();
        CheckRow row;
        row.label = "normalization n=" + std::to_string(n);
        row.a = e.mean;
        row.a_stderr = e.stderr_;
        row.b = 1.0;
        row.tolerance = 3.0 * e.stderr_;
        row.pass = std::abs(e.mean - 1.0) <= row.tolerance;
        report.rows.push_back(row);
    }
    const DensityEstimate big = acc.big.estimate();
    const DensityEstimate small = acc.small.estimate();
    for (std::size_t b = 0; b < big.value.size(); ++b) {
        if (big.count[b] == 0 && small.count[b] == 0) continue;
        CheckRow row;
        const auto blo = bins.bin_lo(static_cast<std::int64_t>(b));
        std::string label = "tower bin@";
        for (std::size_t d = 0; d < blo.size(); ++d) {
            char piece[32];
            std::snprintf(piece, sizeof piece, "%s%.3g", d ? ";" : "", blo[d]);
            label += piece;
        }
        row.label = label;
        row.a = big.value[b];
        row.a_stderr = big.stderr_[b];
        row.b = small.value[b];
        row.b_stderr = small.stderr_[b];
        row.tolerance =
            kappa * std::sqrt(big.stderr_[b] * big.stderr_[b] + small.stderr_[b] * small.stderr_[b]);
        row.pass = std::abs(row.a - row.b) <= row.tolerance;
        report.rows.push_back(row);
    }
    return report;
}

CheckReport thm3_monotonicity(const std::vector<std::vector<double>>& nested_u, int k,
                              const DriftSpec& drift, const HistSpec& window,
                              const TimeGrid& grid, long replicas, RngStream rng, double kappa) {
    if (nested_u.size() < 2)
        throw std::invalid_argument("thm3_monotonicity: need at least two configurations");
    std::vector<DensityEstimate> est;
    est.reserve(nested_u.size());
    for (std::size_t i = 0; i < nested_u.size(); ++i) {
        const auto& u = nested_u[i];
        if (static_cast<int>(u.size()) < k) {
            // fewer than k survivors possible: identically zero density
            DensityEstimate z;
            z.spec = window;
            const auto t = static_cast<std::size_t>(window.total_bins());
            z.value.assign(t, 0.0);
            z.stderr_.assign(t, 0.0);
            z.count.assign(t, 0);
            est.push_back(std::move(z));
            continue;
        }
        est.push_back(density_direct(u, drift, DensityTarget::for_k(k), window, grid, replicas,
                                     rng.substream(i)));
    }
    CheckReport report;
    for (std::size_t i = 0; i + 1 < est.size(); ++i) {
        for (std::size_t b = 0; b < est[i].value.size(); ++b) {
            const double lo_v = est[i].value[b], hi_v = est[i + 1].value[b];
            const double se = std::sqrt(est[i].stderr_[b] * est[i].stderr_[b] +
                                        est[i + 1].stderr_[b] * est[i + 1].stderr_[b]);
            CheckRow row;
            const auto blo = window.bin_lo(static_cast<std::int64_t>(b));
            char label[96];
            std::snprintf(label, sizeof label, "n=%zu<=n=%zu bin@%.3g",
                          nested_u[i].size(), nested_u[i + 1].size(), blo[0]);
            row.label = label;
            row.a = lo_v;
            row.a_stderr = est[i].stderr_[b];
            row.b = hi_v;
            row.b_stderr = est[i + 1].stderr_[b];
            row.tolerance = kappa * se;
            row.pass = hi_v >= lo_v - row.tolerance;
            report.rows.push_back(row);
        }
    }
    return report;
}

CheckRow compare_estimates(const std::string& label, const MCEstimate& a, const MCEstimate& b,
                           double kappa, double extra_allowance) {
    CheckRow row;
    row.label = label;
    row.a = a.mean;
    row.a_stderr = a.stderr_;
    row.b = b.mean;
    row.b_stderr = b.stderr_;
    row.tolerance =
        kappa * std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_) + extra_allowance;
    if (a.empty_flag || b.empty_flag) {
        row.inconclusive = true;
        row.pass = false;
        return row;
    }
    row.pass = std::abs(a.mean - b.mean) <= row.tolerance;
    return row;
}

} // namespace coalflow
