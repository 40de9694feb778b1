#include "coalflow/drift.hpp"

#include <vector>

namespace coalflow {

namespace {

std::vector<double> parse_args(const std::string& text, std::size_t from, std::size_t want_max,
                               const std::string& what) {
    std::vector<double> out;
    std::size_t pos = from;
    while (pos < text.size()) {
        std::size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        const std::string tok = text.substr(pos, next - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw std::invalid_argument("DriftSpec::parse: bad number '" + tok + "' in " + what);
        }
        pos = next + 1;
    }
    if (out.empty() || out.size() > want_max)
        throw std::invalid_argument("DriftSpec::parse: wrong argument count for " + what);
    return out;
}

} // namespace

DriftSpec DriftSpec::parse(const std::string& text) {
    if (text == "zero" || text.empty())
        return DriftSpec::zero();
    const std::size_t colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (colon == std::string::npos || colon + 1 >= text.size())
        throw std::invalid_argument("DriftSpec::parse: expected '" + head + ":<args>'");
    if (head == "constant") {
        const auto a = parse_args(text, colon + 1, 1, head);
        return DriftSpec::constant(a[0]);
    }
    if (head == "tanh") {
        const auto a = parse_args(text, colon + 1, 2, head);
        return DriftSpec::tanh_wave(a[0], a.size() > 1 ? a[1] : 1.0);
    }
    if (head == "sine") {
        const auto a = parse_args(text, colon + 1, 3, head);
        return DriftSpec::sine(a[0], a.size() > 1 ? a[1] : 1.0, a.size() > 2 ? a[2] : 0.0);
    }
    throw std::invalid_argument("DriftSpec::parse: unknown drift family '" + head + "'");
}

} // namespace coalflow
