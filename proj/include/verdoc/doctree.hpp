#pragma once

// Structured document trees (PDF-like object graphs) and the edit
// operations used by attacks and property construction.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace verdoc {

using NodeId = std::uint64_t;

/// Sequence of dictionary keys from the document root. The root itself has
/// the empty path and is printed as "/Root".
using Path = std::vector<std::string>;

std::string format_path(const Path& path);
/// Accepts "/Root/A/B" as well as "/A/B".
Path parse_path(std::string_view text);
bool is_prefix(const Path& prefix, const Path& path);

enum class NodeKind { Dictionary, Array, Name, String, Number, Boolean, Stream, Null, Reference };

std::string_view kind_name(NodeKind kind);
NodeKind kind_from_name(std::string_view name);

struct StreamMeta {
    std::uint64_t length = 0;
    std::string filter;

    bool operator==(const StreamMeta&) const = default;
};

struct DocNode {
    NodeKind kind = NodeKind::Null;
    /// Dictionary entries; also the stream dictionary for streams.
    std::map<std::string, NodeId> dict;
    /// Array elements.
    std::vector<NodeId> items;
    /// Scalar payload: decoded name, raw string token, number text, "true"/"false".
    std::string value;
    /// Target of a reference node.
    NodeId target = 0;
    std::optional<StreamMeta> stream;
    /// "N G" for objects parsed from a PDF file; empty for direct or synthetic nodes.
    std::string object_label;

    bool is_container() const {
        return kind == NodeKind::Dictionary || kind == NodeKind::Stream || kind == NodeKind::Array;
    }
    bool has_keys() const { return kind == NodeKind::Dictionary || kind == NodeKind::Stream; }

    bool operator==(const DocNode&) const = default;

    static DocNode dictionary() { return DocNode{.kind = NodeKind::Dictionary}; }
    static DocNode array() { return DocNode{.kind = NodeKind::Array}; }
    static DocNode name(std::string v) { return DocNode{.kind = NodeKind::Name, .value = std::move(v)}; }
    static DocNode string(std::string v) { return DocNode{.kind = NodeKind::String, .value = std::move(v)}; }
    static DocNode number(std::string v) { return DocNode{.kind = NodeKind::Number, .value = std::move(v)}; }
    static DocNode boolean(bool v) { return DocNode{.kind = NodeKind::Boolean, .value = v ? "true" : "false"}; }
    static DocNode null() { return DocNode{.kind = NodeKind::Null}; }
    static DocNode reference(NodeId t) { return DocNode{.kind = NodeKind::Reference, .target = t}; }
};

/// How a tree node hangs off its spanning-tree parent.
enum class EdgeKind { Key, Index, Ref };

struct TreeEdge {
    NodeId parent = 0;
    EdgeKind kind = EdgeKind::Key;
    std::string key;  // dictionary key for EdgeKind::Key
    std::size_t index = 0;  // array position for EdgeKind::Index
    std::size_t depth = 0;
};

/// Exploit marker used by the static maliciousness proxy: a payload is
/// recognised by its structural fingerprint wherever it sits, and counts as
/// live only when hosted at one of the trigger paths.
struct ExploitMarker {
    std::set<Path> marker_paths;
    std::set<Path> trigger_points;
    std::string payload_fingerprint;

    static std::set<Path> default_trigger_points();
    std::set<Path> hosting_paths() const;
};

/// Immutable document value. The node store is an id -> node graph; the
/// spanning structure is the BFS shortest-path tree from the root, visiting
/// dictionary keys in lexicographic order and array items in index order.
class DocTree {
public:
    /// A document whose root is an empty dictionary.
    DocTree();
    DocTree(NodeId root, std::map<NodeId, DocNode> nodes);

    NodeId root() const { return root_; }
    const std::map<NodeId, DocNode>& nodes() const { return nodes_; }
    const DocNode& node(NodeId id) const;
    bool contains(NodeId id) const { return nodes_.count(id) != 0; }
    NodeId max_id() const;

    // ---- spanning structure ----
    const std::vector<NodeId>& bfs_order() const { return bfs_; }
    bool in_tree(NodeId id) const { return edges_.count(id) != 0 || id == root_; }
    const TreeEdge& edge(NodeId id) const;
    const Path& path_of(NodeId id) const;
    std::size_t depth_of(NodeId id) const;
    std::vector<NodeId> tree_children(NodeId id) const;
    /// Tree nodes whose structural path equals `path`, in BFS order.
    std::vector<NodeId> nodes_at(const Path& path) const;
    /// Every non-root structural path present in the tree.
    std::set<Path> structural_paths() const;
    /// Root-level keys, i.e. the subtree slots.
    std::vector<std::string> root_keys() const;

    // ---- structural identity ----
    /// Canonical text of the spanning subtree under `id`; independent of node ids.
    std::string canonical(NodeId id) const;
    std::string canonical() const { return canonical(root_); }
    /// Placement-independent fingerprint following references (cycle safe).
    std::string fingerprint(NodeId id) const;

    // ---- edits (each returns a new tree) ----
    DocTree delete_subtree(const Path& path) const;
    /// Removes a single tree edge (the keyed entry or array slot holding `id`).
    DocTree delete_node(NodeId id) const;
    /// Grafts `subtree` (a self-contained tree) under the first container at
    /// `parent_path`. A key is required for dictionaries and forbidden for
    /// arrays. An existing key is replaced.
    DocTree insert_subtree(const Path& parent_path, const std::optional<std::string>& key,
                           const DocTree& subtree) const;
    DocTree replace_subtree(const Path& path, const DocTree& subtree) const;
    /// Sets `path` to `subtree`, creating intermediate dictionaries as needed.
    /// Arrays on the way are entered through their first dictionary element.
    DocTree graft_at(const Path& path, const DocTree& subtree) const;
    /// Sets `path` to a reference to the first node at `target`.
    DocTree link_at(const Path& path, const Path& target) const;
    /// Copy of the spanning subtree under `id`; references leaving it are dropped.
    DocTree extract(NodeId id) const;

    // ---- exploit handling ----
    /// Node hosting the marker payload at `trigger`, if any.
    std::optional<NodeId> find_payload(const Path& trigger, const ExploitMarker& marker) const;
    DocTree move_exploit(const Path& from, const Path& to, const ExploitMarker& marker) const;
    bool is_malicious_proxy(const ExploitMarker& marker) const;

    std::size_t size() const { return nodes_.size(); }
    bool operator==(const DocTree& other) const { return canonical() == other.canonical(); }

private:
    friend class TreeEditor;
    void rebuild();

    NodeId root_ = 0;
    std::map<NodeId, DocNode> nodes_;
    std::vector<NodeId> bfs_;
    std::unordered_map<NodeId, TreeEdge> edges_;
    std::unordered_map<NodeId, Path> paths_;
};

bool is_malicious_proxy(const DocTree& tree, const ExploitMarker& marker);

/// Incremental construction of a node store; ids are allocated sequentially.
class TreeBuilder {
public:
    NodeId add(DocNode node);
    NodeId dict() { return add(DocNode::dictionary()); }
    NodeId array() { return add(DocNode::array()); }
    NodeId name(std::string v) { return add(DocNode::name(std::move(v))); }
    NodeId string(std::string v) { return add(DocNode::string("(" + std::move(v) + ")")); }
    NodeId number(double v);
    NodeId integer(long long v) { return add(DocNode::number(std::to_string(v))); }
    NodeId boolean(bool v) { return add(DocNode::boolean(v)); }
    NodeId null() { return add(DocNode::null()); }
    NodeId ref(NodeId target) { return add(DocNode::reference(target)); }
    NodeId stream(std::uint64_t length, std::string filter);

    void set(NodeId parent, const std::string& key, NodeId child);
    void push(NodeId array, NodeId child);
    DocNode& at(NodeId id) { return nodes_.at(id); }

    DocTree build(NodeId root) const { return DocTree(root, nodes_); }

private:
    NodeId next_ = 1;
    std::map<NodeId, DocNode> nodes_;
};

}  // namespace verdoc
