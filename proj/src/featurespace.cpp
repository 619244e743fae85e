#include "verdoc/featurespace.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <string>

#include "verdoc/error.hpp"

namespace verdoc {

FeatureVector::FeatureVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
}

FeatureVector FeatureVector::from_indices(std::size_t dim, std::span<const std::size_t> indices) {
    FeatureVector v(dim);
    for (auto i : indices) {
        if (i >= dim) throw DimensionMismatch("feature index " + std::to_string(i) + " >= dim " + std::to_string(dim));
        v.set(i, true);
    }
    return v;
}

std::vector<std::size_t> FeatureVector::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out.push_back(i);
    }
    return out;
}

std::size_t FeatureVector::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Vocabulary::Vocabulary(std::vector<Path> paths) : paths_(std::move(paths)) {
    std::sort(paths_.begin(), paths_.end());
    paths_.erase(std::unique(paths_.begin(), paths_.end()), paths_.end());
    owner_.resize(paths_.size());
    for (std::size_t i = 0; i < paths_.size(); ++i) {
        if (paths_[i].empty()) throw SchemaViolation("vocabulary paths must be non-empty");
        index_[paths_[i]] = i;
        const std::string& head = paths_[i].front();
        if (ranges_.empty() || ranges_.back().name != head) ranges_.push_back(SubtreeRange{head, i, i});
        ranges_.back().end = i + 1;
        owner_[i] = ranges_.size() - 1;
    }
}

const SubtreeRange* Vocabulary::range_of(const std::string& root_key) const {
    for (const auto& r : ranges_) {
        if (r.name == root_key) return &r;
    }
    return nullptr;
}

std::optional<std::size_t> Vocabulary::index_of(const Path& path) const {
    auto it = index_.find(path);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 1099511628211ULL;
    };
    for (const auto& p : paths_) {
        for (const auto& c : format_path(p)) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    return h;
}

std::string Vocabulary::to_text(const std::string& provenance) const {
    std::ostringstream os;
    os << "# verdoc-vocab dim=" << dim() << " n_subtrees=" << n_subtrees();
    if (!provenance.empty()) os << " " << provenance;
    os << "\n";
    for (const auto& p : paths_) os << format_path(p) << "\n";
    return os.str();
}

Vocabulary Vocabulary::from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line.rfind("# verdoc-vocab", 0) != 0) {
        throw SchemaViolation("vocabulary file lacks '# verdoc-vocab' header");
    }
    std::size_t declared = 0;
    auto pos = line.find("dim=");
    if (pos != std::string::npos) declared = std::stoul(line.substr(pos + 4));
    std::vector<Path> paths;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        paths.push_back(parse_path(line));
    }
    Vocabulary v(paths);
    if (v.dim() != paths.size() || v.dim() != declared) {
        throw SchemaViolation("vocabulary file is not a sorted unique path list of the declared dim");
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (paths[i] != v.paths()[i]) throw SchemaViolation("vocabulary file is not sorted");
    }
    return v;
}

Vocabulary build_vocabulary(std::span<const DocTree> corpus, std::size_t min_df) {
    if (corpus.empty()) throw EmptyVocabulary("empty corpus");
    if (min_df == 0) min_df = 1;
    std::map<Path, std::size_t> df;
    for (const auto& tree : corpus) {
        for (const auto& p : tree.structural_paths()) ++df[p];
    }
    std::vector<Path> kept;
    for (const auto& [p, n] : df) {
        if (n >= min_df) kept.push_back(p);
    }
    if (kept.empty()) throw EmptyVocabulary("no path occurs in at least " + std::to_string(min_df) + " documents");
    return Vocabulary(std::move(kept));
}

FeatureVector extract_features(const DocTree& tree, const Vocabulary& vocab) {
    FeatureVector x(vocab.dim());
    for (const auto& p : tree.structural_paths()) {
        if (auto i = vocab.index_of(p)) x.set(*i, true);
    }
    return x;
}

namespace {

std::map<std::string, std::string> slot_forms(const DocTree& t) {
    std::map<std::string, std::string> out;
    const DocNode& root = t.node(t.root());
    for (const auto& [key, child] : root.dict) {
        std::string form;
        if (t.contains(child) && t.in_tree(child) && child != t.root() && t.edge(child).parent == t.root()) {
            form = t.canonical(child);
        } else if (t.contains(child) && t.in_tree(child)) {
            form = "@" + format_path(t.path_of(child));
        } else {
            form = "?";
        }
        out.emplace(key, std::move(form));
    }
    return out;
}

}  // namespace

std::size_t subtree_distance(const DocTree& a, const DocTree& b) {
    auto fa = slot_forms(a);
    auto fb = slot_forms(b);
    std::set<std::string> keys;
    for (const auto& [k, v] : fa) keys.insert(k);
    for (const auto& [k, v] : fb) keys.insert(k);
    std::size_t d = 0;
    for (const auto& k : keys) {
        auto ia = fa.find(k);
        auto ib = fb.find(k);
        if (ia == fa.end() || ib == fb.end() || ia->second != ib->second) ++d;
    }
    return d;
}

std::size_t l0_distance(const FeatureVector& x, const FeatureVector& y) {
    if (x.size() != y.size()) {
        throw DimensionMismatch("l0_distance: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] != y[i]);
    return d;
}

std::string write_feature_file(std::span<const LabeledVector> rows, const std::string& provenance) {
    std::ostringstream os;
    os << "# verdoc-features";
    if (!provenance.empty()) os << " " << provenance;
    os << "\n";
    for (const auto& r : rows) {
        os << r.label;
        for (auto i : r.x.indices()) os << ' ' << i;
        if (!r.id.empty()) os << " # " << r.id;
        os << "\n";
    }
    return os.str();
}

std::vector<LabeledVector> read_feature_file(std::string_view text, std::size_t dim) {
    std::vector<LabeledVector> out;
    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line)) {
        std::string id;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            id = line.substr(hash + 1);
            id.erase(0, id.find_first_not_of(' '));
            line.resize(hash);
        }
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        LabeledVector row;
        if (tok != "0" && tok != "1") throw SchemaViolation("feature line label must be 0 or 1, got " + tok);
        row.label = tok == "1";
        std::vector<std::size_t> idx;
        while (ls >> tok) {
            std::size_t v = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size()) throw SchemaViolation("bad feature index " + tok);
            idx.push_back(v);
        }
        row.x = FeatureVector::from_indices(dim, idx);
        row.id = id.empty() ? "row" + std::to_string(out.size()) : id;
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace verdoc
