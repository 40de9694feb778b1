#include "coalflow/scheme.hpp"

#include <algorithm>
#include <stdexcept>

namespace coalflow {

namespace {

void check_scheme(const Scheme& s) {
    if (s.n < 1)
        throw std::invalid_argument("scheme: n must be at least 1");
    if (s.merges() > s.n - 1)
        throw std::invalid_argument("scheme: at most n-1 merges possible");
    for (int i = 0; i < s.merges(); ++i) {
        const int j = s.entries[static_cast<std::size_t>(i)];
        if (j < 1 || j > s.n - 1 - i)
            throw std::invalid_argument("scheme: entry " + std::to_string(i + 1) + " out of range");
    }
}

} // namespace

std::string format_scheme(const Scheme& s) {
    check_scheme(s);
    std::string out = std::to_string(s.n) + ":" + std::to_string(s.merges()) + ":";
    for (int i = 0; i < s.merges(); ++i) {
        if (i) out += ',';
        out += std::to_string(s.entries[static_cast<std::size_t>(i)]);
    }
    return out;
}

Scheme parse_scheme(const std::string& text) {
    const std::size_t c1 = text.find(':');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw std::invalid_argument("parse_scheme: expected 'n:k:j1,...,jk'");
    Scheme s;
    try {
        s.n = std::stoi(text.substr(0, c1));
        const int k = std::stoi(text.substr(c1 + 1, c2 - c1 - 1));
        std::size_t pos = c2 + 1;
        while (pos < text.size()) {
            std::size_t next = text.find(',', pos);
            if (next == std::string::npos) next = text.size();
            s.entries.push_back(std::stoi(text.substr(pos, next - pos)));
            pos = next + 1;
        }
        if (static_cast<int>(s.entries.size()) != k)
            throw std::invalid_argument("entry count mismatch");
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("parse_scheme: malformed scheme '" + text + "'");
    }
    check_scheme(s);
    return s;
}

std::uint64_t scheme_count(int n, int k) {
    if (n < 1 || k < 0 || k > n - 1)
        throw std::invalid_argument("scheme_count: need 0 <= k <= n-1");
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i)
        c *= static_cast<std::uint64_t>(n - i);
    return c;
}

std::vector<Scheme> enumerate_schemes(int n, int k) {
    scheme_count(n, k); // validates
    std::vector<Scheme> out;
    Scheme cur;
    cur.n = n;
    cur.entries.assign(static_cast<std::size_t>(k), 1);
    if (k == 0) {
        out.push_back(cur);
        return out;
    }
    // odometer over mixed radix (n-1, n-2, ..., n-k)
    while (true) {
        out.push_back(cur);
        int pos = k - 1;
        while (pos >= 0 && cur.entries[static_cast<std::size_t>(pos)] == n - 1 - pos) {
            cur.entries[static_cast<std::size_t>(pos)] = 1;
            --pos;
        }
        if (pos < 0) break;
        ++cur.entries[static_cast<std::size_t>(pos)];
    }
    return out;
}

std::vector<Scheme> enumerate_schemes(int n) {
    std::vector<Scheme> out;
    for (int k = 0; k <= n - 1; ++k) {
        auto part = enumerate_schemes(n, k);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

SchemeReplay scheme_replay(const Scheme& s) {
    check_scheme(s);
    SchemeReplay r;
    r.n = s.n;
    r.scheme = s;
    r.cutoff_event.assign(static_cast<std::size_t>(s.n) + 1, -1); // 1-based
    std::vector<std::pair<int, int>> blocks;
    blocks.reserve(static_cast<std::size_t>(s.n));
    for (int i = 1; i <= s.n; ++i)
        blocks.emplace_back(i, i);
    for (int e = 0; e < s.merges(); ++e) {
        const int j = s.entries[static_cast<std::size_t>(e)]; // 1-based block position
        const auto left = blocks[static_cast<std::size_t>(j) - 1];
        const auto right = blocks[static_cast<std::size_t>(j)];
        SchemeReplay::Event ev;
        ev.left_lo = left.first;
        ev.left_hi = left.second;
        ev.right_lo = right.first;
        ev.right_hi = right.second;
        ev.meet_left = left.first;
        ev.meet_right = right.first;
        ev.absorbed = right.first;
        r.events.push_back(ev);
        r.cutoff_event[static_cast<std::size_t>(right.first)] = e;
        blocks[static_cast<std::size_t>(j) - 1] = {left.first, right.second};
        blocks.erase(blocks.begin() + j);
    }
    r.final_blocks = blocks;
    for (const auto& b : blocks)
        r.survivors.push_back(b.first);
    return r;
}

IndexSet::IndexSet(int n_, std::vector<int> members_) : n(n_), members(std::move(members_)) {
    if (n < 0)
        throw std::invalid_argument("IndexSet: n must be nonnegative");
    if (!std::is_sorted(members.begin(), members.end()))
        throw std::invalid_argument("IndexSet: members must be sorted ascending");
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i] < 1 || members[i] > n)
            throw std::invalid_argument("IndexSet: member out of range 1..n");
        if (i > 0 && members[i] == members[i - 1])
            throw std::invalid_argument("IndexSet: duplicate member");
    }
}

bool IndexSet::contains(int i) const {
    return std::binary_search(members.begin(), members.end(), i);
}

IndexSet IndexSet::complement() const {
    std::vector<int> rest;
    rest.reserve(static_cast<std::size_t>(n) - members.size());
    std::size_t p = 0;
    for (int i = 1; i <= n; ++i) {
        if (p < members.size() && members[p] == i) {
            ++p;
        } else {
            rest.push_back(i);
        }
    }
    return IndexSet(n, std::move(rest));
}

std::vector<double> slice(std::span<const double> z, const IndexSet& K, SliceKeep mode) {
    if (static_cast<int>(z.size()) != K.n)
        throw std::invalid_argument("slice: vector length must equal the index set's n");
    const IndexSet& pick = K;
    std::vector<double> out;
    if (mode == SliceKeep::keep) {
        out.reserve(pick.members.size());
        for (int i : pick.members)
            out.push_back(z[static_cast<std::size_t>(i) - 1]);
    } else {
        out.reserve(z.size() - pick.members.size());
        std::size_t p = 0;
        for (int i = 1; i <= K.n; ++i) {
            if (p < pick.members.size() && pick.members[p] == i) {
                ++p;
            } else {
                out.push_back(z[static_cast<std::size_t>(i) - 1]);
            }
        }
    }
    return out;
}

std::vector<double> scatter(const IndexSet& L, std::span<const double> inside,
                            std::span<const double> outside) {
    if (static_cast<int>(inside.size()) != L.size())
        throw std::invalid_argument("scatter: inside length must equal |L|");
    if (inside.size() + outside.size() != static_cast<std::size_t>(L.n))
        throw std::invalid_argument("scatter: total length must equal the index set's n");
    std::vector<double> out(static_cast<std::size_t>(L.n));
    std::size_t p = 0, q = 0;
    for (int i = 1; i <= L.n; ++i) {
        if (p < L.members.size() && L.members[p] == i) {
            out[static_cast<std::size_t>(i) - 1] = inside[p];
            ++p;
        } else {
            out[static_cast<std::size_t>(i) - 1] = outside[q];
            ++q;
        }
    }
    return out;
}

} // namespace coalflow
