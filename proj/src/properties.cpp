#include "verdoc/properties.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "verdoc/error.hpp"

namespace verdoc {

PropertySpec PropertySpec::preset(char letter, std::size_t n_subtrees) {
    switch (letter) {
        case 'A': return {PropertyKind::SubtreeDeletion, 1, "A"};
        case 'B': return {PropertyKind::SubtreeInsertion, 1, "B"};
        case 'C': return {PropertyKind::SubtreeDeletion, 2, "C"};
        case 'D': return {PropertyKind::SubtreeInsertion, n_subtrees > 0 ? n_subtrees - 1 : 0, "D"};
        case 'E': return {PropertyKind::SubtreeInsertion, n_subtrees, "E"};
        default: throw ConfigError(std::string("unknown property preset '") + letter + "'");
    }
}

PropertySpec PropertySpec::point() { return {PropertyKind::SubtreeDeletion, 0, "point"}; }

std::string PropertySpec::label() const {
    if (!name.empty()) return name;
    return std::string(is_insertion() ? "ins:" : "del:") + std::to_string(distance);
}

PropertySpec parse_property(const std::string& text, std::size_t n_subtrees) {
    if (text.size() == 1) return PropertySpec::preset(text[0], n_subtrees);
    if (text == "point") return PropertySpec::point();
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        std::string kind = text.substr(0, colon);
        std::size_t k = 0;
        try {
            k = std::stoul(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad property distance in '" + text + "'");
        }
        if (k > n_subtrees) {
            throw ConfigError("property distance " + std::to_string(k) + " exceeds " + std::to_string(n_subtrees) +
                              " subtrees");
        }
        if (kind == "del") return {PropertyKind::SubtreeDeletion, k, text};
        if (kind == "ins") return {PropertyKind::SubtreeInsertion, k, text};
    }
    throw ConfigError("unknown property '" + text + "'");
}

std::vector<std::size_t> IntervalRegion::free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (lower[i] != upper[i]) out.push_back(i);
    }
    return out;
}

std::vector<std::vector<std::size_t>> k_subsets(std::size_t n, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    if (k > n) return out;
    std::vector<std::size_t> cur(k);
    for (std::size_t i = 0; i < k; ++i) cur[i] = i;
    while (true) {
        out.push_back(cur);
        std::size_t i = k;
        while (i > 0 && cur[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++cur[i - 1];
        for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
    return out;
}

namespace {

std::vector<std::size_t> candidate_subtrees(const FeatureVector& x, const Vocabulary& vocab, const PropertySpec& spec) {
    std::vector<std::size_t> cand;
    const auto& ranges = vocab.subtree_ranges();
    for (std::size_t s = 0; s < ranges.size(); ++s) {
        if (spec.is_insertion()) {
            cand.push_back(s);
            continue;
        }
        for (std::size_t i = ranges[s].begin; i < ranges[s].end; ++i) {
            if (x[i]) {
                cand.push_back(s);
                break;
            }
        }
    }
    return cand;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::size_t region_count(const FeatureVector& x, const Vocabulary& vocab, const PropertySpec& spec) {
    if (x.size() != vocab.dim()) throw DimensionMismatch("feature vector does not match vocabulary");
    if (spec.distance == 0) return 1;
    return binomial(candidate_subtrees(x, vocab, spec).size(), spec.distance);
}

std::vector<IntervalRegion> regions_for(const FeatureVector& x, const Vocabulary& vocab, const PropertySpec& spec,
                                        const std::string& origin) {
    if (x.size() != vocab.dim()) throw DimensionMismatch("feature vector does not match vocabulary");
    std::vector<IntervalRegion> out;
    if (spec.distance == 0) {
        out.push_back({x, x, origin, {}});
        return out;
    }
    auto cand = candidate_subtrees(x, vocab, spec);
    const auto& ranges = vocab.subtree_ranges();
    for (const auto& combo : k_subsets(cand.size(), spec.distance)) {
        IntervalRegion r{x, x, origin, {}};
        for (auto c : combo) {
            const auto& range = ranges[cand[c]];
            r.subtree_choice.push_back(range.name);
            for (std::size_t i = range.begin; i < range.end; ++i) {
                if (spec.is_insertion()) {
                    r.upper.set(i, true);
                } else {
                    r.lower.set(i, false);
                }
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

bool contains(const IntervalRegion& region, const FeatureVector& x) {
    if (x.size() != region.dim()) throw DimensionMismatch("point does not match region dimension");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < region.lower[i] || x[i] > region.upper[i]) return false;
    }
    return true;
}

std::vector<FeatureVector> sample_region(const IntervalRegion& region, std::uint64_t seed, std::size_t n,
                                         const std::optional<FeatureVector>& origin_x) {
    std::vector<FeatureVector> out;
    auto push_unique = [&](const FeatureVector& v) {
        if (out.size() < n && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    };
    push_unique(region.lower);
    push_unique(region.upper);
    if (origin_x && contains(region, *origin_x)) push_unique(*origin_x);
    auto free = region.free_indices();
    if (free.empty()) return out;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    while (out.size() < n) {
        FeatureVector v = region.lower;
        for (auto i : free) v.set(i, coin(rng));
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<FeatureVector> enumerate_region(const IntervalRegion& region, std::size_t max_free) {
    auto free = region.free_indices();
    if (free.size() > max_free) throw DimensionMismatch("region has too many free bits to enumerate");
    std::vector<FeatureVector> out;
    out.reserve(std::size_t{1} << free.size());
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free.size()); ++mask) {
        FeatureVector v = region.lower;
        for (std::size_t j = 0; j < free.size(); ++j) v.set(free[j], (mask >> j) & 1);
        out.push_back(std::move(v));
    }
    return out;
}

std::string dump_regions(const std::vector<IntervalRegion>& regions) {
    std::ostringstream os;
    for (const auto& r : regions) {
        os << (r.origin.empty() ? "-" : r.origin) << ' ';
        if (r.subtree_choice.empty()) os << '-';
        for (std::size_t i = 0; i < r.subtree_choice.size(); ++i) os << (i ? "+" : "") << r.subtree_choice[i];
        for (auto i : r.lower.indices()) os << ' ' << i;
        os << " |";
        for (auto i : r.upper.indices()) os << ' ' << i;
        os << '\n';
    }
    return os.str();
}

}  // namespace verdoc
