// Coalescence schemes: which ordered merges an n-point configuration performs.
// A scheme for n points with k merges is a tuple (j_1, ..., j_k), j_i in
// {1, ..., n-i}: at the i-th merge the j_i-th and (j_i+1)-th of the currently
// surviving blocks (counted left to right) glue together.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace coalflow {

struct Scheme {
    int n = 0;
    std::vector<int> entries; // 1-based block positions, entries.size() == k

    int merges() const { return static_cast<int>(entries.size()); }
    int survivors() const { return n - merges(); }

    bool operator==(const Scheme&) const = default;
};

// "n:k:j1,j2,...,jk"; k == 0 renders as "n:0:"
std::string format_scheme(const Scheme& s);
Scheme parse_scheme(const std::string& text);

// all schemes for n points with exactly k merges, lexicographic in entries
std::vector<Scheme> enumerate_schemes(int n, int k);
// all schemes for n points, k = 0..n-1, ordered by k then lexicographic
std::vector<Scheme> enumerate_schemes(int n);
// product (n-1)(n-2)...(n-k)
std::uint64_t scheme_count(int n, int k);

// Structural unfolding of a scheme. Blocks are contiguous index intervals of
// the original coordinates 1..n; each merge event records the two blocks that
// glued, the meeting pair (lambda) = (max of left block's minima chain, min of
// right block), and the coordinate whose path gets absorbed.
struct SchemeReplay {
    struct Event {
        int left_lo = 0, left_hi = 0;   // left block interval before merging
        int right_lo = 0, right_hi = 0; // right block interval before merging
        int meet_left = 0;  // lambda first component  (min of left block)
        int meet_right = 0; // lambda second component (min of right block)
        int absorbed = 0;   // coordinate newly following its left neighbor (= meet_right)
    };

    int n = 0;
    Scheme scheme;
    std::vector<Event> events;                      // in merge order
    std::vector<std::pair<int, int>> final_blocks;  // contiguous intervals, ascending
    std::vector<int> survivors;                     // I(s), ascending block minima (1-based)
    std::vector<int> cutoff_event;                  // per coordinate 1..n: absorbing event index, -1 if survivor
};

SchemeReplay scheme_replay(const Scheme& s);

// Sorted subset of {1, ..., n}, 1-based.
struct IndexSet {
    int n = 0;
    std::vector<int> members;

    IndexSet() = default;
    IndexSet(int n_, std::vector<int> members_);

    int size() const { return static_cast<int>(members.size()); }
    bool contains(int i) const;
    IndexSet complement() const;
};

// components of z indexed by K (keep) or by its complement (drop)
enum class SliceKeep { keep, drop };
std::vector<double> slice(std::span<const double> z, const IndexSet& K, SliceKeep mode = SliceKeep::keep);

// Inverse of slicing along a subset L of positions 1..|z|:
// place `inside` at the positions listed in L and `outside` at the rest.
std::vector<double> scatter(const IndexSet& L, std::span<const double> inside,
                            std::span<const double> outside);

} // namespace coalflow
