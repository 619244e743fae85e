#pragma once

// Bag-of-path feature space: every structural path becomes one binary
// feature. Paths are sorted component-wise, so all paths below one root key
// occupy a contiguous index range (a "subtree range").

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "verdoc/doctree.hpp"

namespace verdoc {

/// Binary feature vector.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::size_t dim, std::uint8_t fill = 0) : bits_(dim, fill) {}
    explicit FeatureVector(std::vector<std::uint8_t> bits);

    static FeatureVector from_indices(std::size_t dim, std::span<const std::size_t> indices);

    std::size_t size() const { return bits_.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
    void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }
    void flip(std::size_t i) { bits_[i] ^= 1; }
    /// Indices of set bits (sparse view).
    std::vector<std::size_t> indices() const;
    std::size_t count() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::vector<double> as_doubles() const { return {bits_.begin(), bits_.end()}; }

    auto operator<=>(const FeatureVector&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

struct SubtreeRange {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    std::size_t size() const { return end - begin; }
    bool contains(std::size_t i) const { return i >= begin && i < end; }
};

class Vocabulary {
public:
    Vocabulary() = default;
    /// Paths are sorted and deduplicated; empty paths are rejected.
    explicit Vocabulary(std::vector<Path> paths);

    std::size_t dim() const { return paths_.size(); }
    std::size_t n_subtrees() const { return ranges_.size(); }
    const std::vector<Path>& paths() const { return paths_; }
    const std::vector<SubtreeRange>& subtree_ranges() const { return ranges_; }
    const SubtreeRange* range_of(const std::string& root_key) const;
    /// Index of the subtree range containing feature `i`.
    std::size_t subtree_of(std::size_t i) const { return owner_.at(i); }
    std::optional<std::size_t> index_of(const Path& path) const;

    /// Stable 64-bit hash of the path list (used in model metadata).
    std::uint64_t hash() const;

    /// Text form: header line `# verdoc-vocab dim=<d> n_subtrees=<n> ...`, then one
    /// path per line; line k (0-based after the header) is feature k.
    std::string to_text(const std::string& provenance = {}) const;
    static Vocabulary from_text(std::string_view text);

    bool operator==(const Vocabulary& other) const { return paths_ == other.paths_; }

private:
    std::vector<Path> paths_;
    std::map<Path, std::size_t> index_;
    std::vector<SubtreeRange> ranges_;
    std::vector<std::size_t> owner_;
};

Vocabulary build_vocabulary(std::span<const DocTree> corpus, std::size_t min_df = 1);
FeatureVector extract_features(const DocTree& tree, const Vocabulary& vocab);

/// Number of root-key slots whose full subtrees differ (a missing slot counts
/// as different).
std::size_t subtree_distance(const DocTree& a, const DocTree& b);
std::size_t l0_distance(const FeatureVector& x, const FeatureVector& y);

/// Sparse feature file: one `<label> i1 i2 ...` line per document, '#' comments.
struct LabeledVector {
    std::string id;
    FeatureVector x;
    int label = 0;
};
std::string write_feature_file(std::span<const LabeledVector> rows, const std::string& provenance = {});
std::vector<LabeledVector> read_feature_file(std::string_view text, std::size_t dim);

}  // namespace verdoc
