#pragma once

// Robustness properties as sets of box regions over binary feature vectors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verdoc/featurespace.hpp"

namespace verdoc {

enum class PropertyKind { SubtreeDeletion, SubtreeInsertion };

struct PropertySpec {
    PropertyKind kind = PropertyKind::SubtreeDeletion;
    /// Number of subtrees touched. 0 is the degenerate point property.
    std::size_t distance = 1;
    std::string name;

    /// Presets A=(Del,1) B=(Ins,1) C=(Del,2) D=(Ins,N-1) E=(Ins,N).
    static PropertySpec preset(char letter, std::size_t n_subtrees);
    static PropertySpec point();
    bool is_insertion() const { return kind == PropertyKind::SubtreeInsertion; }
    std::string label() const;
};

/// Parses "A".."E", "point", or "del:<k>" / "ins:<k>".
PropertySpec parse_property(const std::string& text, std::size_t n_subtrees);

struct IntervalRegion {
    FeatureVector lower;
    FeatureVector upper;
    std::string origin;
    std::vector<std::string> subtree_choice;

    std::size_t dim() const { return lower.size(); }
    /// Indices where lower != upper.
    std::vector<std::size_t> free_indices() const;
};

std::vector<IntervalRegion> regions_for(const FeatureVector& x, const Vocabulary& vocab, const PropertySpec& spec,
                                        const std::string& origin = {});

/// Number of regions regions_for would produce, without building them.
std::size_t region_count(const FeatureVector& x, const Vocabulary& vocab, const PropertySpec& spec);

bool contains(const IntervalRegion& region, const FeatureVector& x);

/// Deterministic samples; the first ones are lower, upper and `origin_x` when it is a member.
std::vector<FeatureVector> sample_region(const IntervalRegion& region, std::uint64_t seed, std::size_t n,
                                         const std::optional<FeatureVector>& origin_x = std::nullopt);

/// Every point of the region (2^free points). Only for small regions.
std::vector<FeatureVector> enumerate_region(const IntervalRegion& region, std::size_t max_free = 20);

/// `origin subtree_choice lower_sparse | upper_sparse`, choice joined by '+', '-' when empty.
std::string dump_regions(const std::vector<IntervalRegion>& regions);

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> k_subsets(std::size_t n, std::size_t k);

}  // namespace verdoc
