#include "verdoc/doctree.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_set>

#include "verdoc/error.hpp"

namespace verdoc {

std::string format_path(const Path& path) {
    std::string out = "/Root";
    for (const auto& key : path) {
        out += '/';
        out += key;
    }
    return out;
}

Path parse_path(std::string_view text) {
    Path path;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == '/') {
            ++pos;
            continue;
        }
        auto end = text.find('/', pos);
        if (end == std::string_view::npos) end = text.size();
        path.emplace_back(text.substr(pos, end - pos));
        pos = end;
    }
    if (!path.empty() && path.front() == "Root") path.erase(path.begin());
    return path;
}

bool is_prefix(const Path& prefix, const Path& path) {
    return prefix.size() <= path.size() && std::equal(prefix.begin(), prefix.end(), path.begin());
}

std::string_view kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::Dictionary: return "dictionary";
        case NodeKind::Array: return "array";
        case NodeKind::Name: return "name";
        case NodeKind::String: return "string";
        case NodeKind::Number: return "number";
        case NodeKind::Boolean: return "boolean";
        case NodeKind::Stream: return "stream";
        case NodeKind::Null: return "null";
        case NodeKind::Reference: return "reference";
    }
    return "null";
}

NodeKind kind_from_name(std::string_view name) {
    static const std::pair<std::string_view, NodeKind> table[] = {
        {"dictionary", NodeKind::Dictionary}, {"array", NodeKind::Array},
        {"name", NodeKind::Name},             {"string", NodeKind::String},
        {"number", NodeKind::Number},         {"boolean", NodeKind::Boolean},
        {"stream", NodeKind::Stream},         {"null", NodeKind::Null},
        {"reference", NodeKind::Reference},
    };
    for (const auto& [text, kind] : table) {
        if (text == name) return kind;
    }
    throw SchemaViolation("unknown node kind '" + std::string(name) + "'");
}

std::set<Path> ExploitMarker::default_trigger_points() {
    return {
        {"Pages", "Kids", "AA"},
        {"Names", "JavaScript", "Names"},
        {"OpenAction", "JS"},
        {"StructTreeRoot", "JS"},
    };
}

std::set<Path> ExploitMarker::hosting_paths() const {
    std::set<Path> out = trigger_points;
    out.insert(marker_paths.begin(), marker_paths.end());
    return out;
}

namespace {

template <typename Fn>
void for_each_out_edge(const DocNode& node, Fn&& fn) {
    for (const auto& [key, child] : node.dict) fn(child);
    for (auto child : node.items) fn(child);
    if (node.kind == NodeKind::Reference && node.target != 0) fn(node.target);
}

}  // namespace

/// Mutable working copy used to implement the value-returning edits.
class TreeEditor {
public:
    explicit TreeEditor(const DocTree& tree)
        : root_(tree.root_), nodes_(tree.nodes_), next_(tree.max_id() + 1) {}

    DocNode& at(NodeId id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw PathNotFound("node " + std::to_string(id) + " missing");
        return it->second;
    }
    bool contains(NodeId id) const { return nodes_.count(id) != 0; }

    NodeId add(DocNode node) {
        nodes_.emplace(next_, std::move(node));
        return next_++;
    }

    /// Copies every node of `sub` with fresh ids; returns the new id of its root.
    NodeId import(const DocTree& sub) {
        std::map<NodeId, NodeId> remap;
        for (const auto& [id, node] : sub.nodes()) remap[id] = next_++;
        auto map_id = [&](NodeId id) -> NodeId {
            auto it = remap.find(id);
            return it == remap.end() ? 0 : it->second;
        };
        for (const auto& [id, node] : sub.nodes()) {
            DocNode copy = node;
            for (auto& [key, child] : copy.dict) child = map_id(child);
            for (auto& child : copy.items) child = map_id(child);
            if (copy.kind == NodeKind::Reference) copy.target = map_id(copy.target);
            // entries pointing nowhere are dropped rather than aliased
            std::erase_if(copy.dict, [](const auto& kv) { return kv.second == 0; });
            std::erase(copy.items, NodeId{0});
            copy.object_label.clear();
            nodes_.emplace(remap[id], std::move(copy));
        }
        return remap.at(sub.root());
    }

    /// Called after an edge into `child` was removed: drops every node whose
    /// incoming count falls to zero as a consequence. Nodes that were already
    /// unreferenced before the edit are left alone.
    void release(NodeId child) {
        std::unordered_map<NodeId, std::size_t> incoming;
        for (const auto& [id, node] : nodes_) {
            for_each_out_edge(node, [&](NodeId c) { ++incoming[c]; });
        }
        std::vector<NodeId> work{child};
        while (!work.empty()) {
            NodeId id = work.back();
            work.pop_back();
            if (id == root_ || !contains(id) || incoming[id] > 0) continue;
            std::vector<NodeId> outs;
            for_each_out_edge(nodes_.at(id), [&](NodeId c) { outs.push_back(c); });
            nodes_.erase(id);
            for (auto c : outs) {
                if (incoming[c] > 0) --incoming[c];
                work.push_back(c);
            }
        }
    }

    void remove_key(NodeId parent, const std::string& key) {
        auto& node = at(parent);
        auto it = node.dict.find(key);
        if (it == node.dict.end()) return;
        NodeId child = it->second;
        node.dict.erase(it);
        release(child);
    }

    void remove_index(NodeId parent, std::size_t index) {
        auto& node = at(parent);
        if (index >= node.items.size()) return;
        NodeId child = node.items[index];
        node.items.erase(node.items.begin() + static_cast<std::ptrdiff_t>(index));
        release(child);
    }

    void set_key(NodeId parent, const std::string& key, NodeId child) {
        auto& node = at(parent);
        auto it = node.dict.find(key);
        if (it != node.dict.end()) {
            NodeId old = it->second;
            it->second = child;
            release(old);
        } else {
            node.dict.emplace(key, child);
        }
    }

    NodeId resolve(NodeId id) {
        std::unordered_set<NodeId> seen;
        while (contains(id) && at(id).kind == NodeKind::Reference && seen.insert(id).second) {
            if (!contains(at(id).target)) break;
            id = at(id).target;
        }
        return id;
    }

    /// Walks `path`, creating dictionaries where keys are missing; returns the
    /// dictionary that should receive the final key.
    NodeId ensure_parent(const Path& path) {
        NodeId cur = resolve(root_);
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            if (!at(cur).has_keys()) throw KindMismatch("cannot descend into non-dictionary at " +
                                                        format_path(Path(path.begin(), path.begin() + i)));
            auto it = at(cur).dict.find(path[i]);
            if (it == at(cur).dict.end()) {
                NodeId fresh = add(DocNode::dictionary());
                at(cur).dict.emplace(path[i], fresh);
                cur = fresh;
                continue;
            }
            NodeId next = resolve(it->second);
            if (at(next).kind == NodeKind::Array) {
                NodeId chosen = 0;
                for (auto item : at(next).items) {
                    NodeId r = resolve(item);
                    if (at(r).has_keys()) {
                        chosen = r;
                        break;
                    }
                }
                if (chosen == 0) {
                    chosen = add(DocNode::dictionary());
                    at(next).items.push_back(chosen);
                }
                next = chosen;
            }
            if (!at(next).has_keys()) throw KindMismatch("cannot descend into non-dictionary at " +
                                                         format_path(Path(path.begin(), path.begin() + i + 1)));
            cur = next;
        }
        if (!at(cur).has_keys()) throw KindMismatch("graft parent is not a dictionary");
        return cur;
    }

    DocTree finish() { return DocTree(root_, std::move(nodes_)); }

private:
    NodeId root_;
    std::map<NodeId, DocNode> nodes_;
    NodeId next_;
};

DocTree::DocTree() {
    root_ = 1;
    nodes_.emplace(1, DocNode::dictionary());
    rebuild();
}

DocTree::DocTree(NodeId root, std::map<NodeId, DocNode> nodes) : root_(root), nodes_(std::move(nodes)) {
    if (!nodes_.count(root_)) throw SchemaViolation("root node " + std::to_string(root_) + " not in store");
    rebuild();
}

const DocNode& DocTree::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw PathNotFound("node " + std::to_string(id) + " not in store");
    return it->second;
}

NodeId DocTree::max_id() const { return nodes_.empty() ? 0 : nodes_.rbegin()->first; }

void DocTree::rebuild() {
    bfs_.clear();
    edges_.clear();
    paths_.clear();
    std::deque<NodeId> queue{root_};
    paths_[root_] = {};
    std::unordered_map<NodeId, std::size_t> depth{{root_, 0}};
    while (!queue.empty()) {
        NodeId id = queue.front();
        queue.pop_front();
        bfs_.push_back(id);
        const DocNode& n = nodes_.at(id);
        const Path& here = paths_.at(id);
        auto visit = [&](NodeId child, EdgeKind kind, const std::string& key, std::size_t index) {
            if (child == root_ || !nodes_.count(child) || paths_.count(child)) return;
            edges_[child] = TreeEdge{id, kind, key, index, depth[id] + 1};
            depth[child] = depth[id] + 1;
            Path p = here;
            if (kind == EdgeKind::Key) p.push_back(key);
            paths_[child] = std::move(p);
            queue.push_back(child);
        };
        for (const auto& [key, child] : n.dict) visit(child, EdgeKind::Key, key, 0);
        for (std::size_t i = 0; i < n.items.size(); ++i) visit(n.items[i], EdgeKind::Index, {}, i);
        if (n.kind == NodeKind::Reference) visit(n.target, EdgeKind::Ref, {}, 0);
    }
}

const TreeEdge& DocTree::edge(NodeId id) const {
    auto it = edges_.find(id);
    if (it == edges_.end()) throw PathNotFound("node " + std::to_string(id) + " has no tree edge");
    return it->second;
}

const Path& DocTree::path_of(NodeId id) const {
    auto it = paths_.find(id);
    if (it == paths_.end()) throw PathNotFound("node " + std::to_string(id) + " is not in the tree");
    return it->second;
}

std::size_t DocTree::depth_of(NodeId id) const { return id == root_ ? 0 : edge(id).depth; }

std::vector<NodeId> DocTree::tree_children(NodeId id) const {
    std::vector<NodeId> out;
    const DocNode& n = node(id);
    auto take = [&](NodeId c) {
        auto it = edges_.find(c);
        if (it != edges_.end() && it->second.parent == id) out.push_back(c);
    };
    for (const auto& [key, child] : n.dict) take(child);
    for (auto child : n.items) take(child);
    if (n.kind == NodeKind::Reference) take(n.target);
    // an id can appear twice among siblings (shared direct child); keep first
    std::vector<NodeId> unique;
    for (auto c : out) {
        if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
    }
    return unique;
}

std::vector<NodeId> DocTree::nodes_at(const Path& path) const {
    std::vector<NodeId> out;
    for (auto id : bfs_) {
        if (paths_.at(id) == path) out.push_back(id);
    }
    return out;
}

std::set<Path> DocTree::structural_paths() const {
    std::set<Path> out;
    for (auto id : bfs_) {
        const Path& p = paths_.at(id);
        if (!p.empty()) out.insert(p);
    }
    return out;
}

std::vector<std::string> DocTree::root_keys() const {
    std::set<std::string> keys;
    for (auto id : bfs_) {
        const Path& p = paths_.at(id);
        if (!p.empty()) keys.insert(p.front());
    }
    return {keys.begin(), keys.end()};
}

std::string DocTree::canonical(NodeId id) const {
    const DocNode& n = node(id);
    auto child_text = [&](NodeId c) -> std::string {
        auto it = edges_.find(c);
        if (it != edges_.end() && it->second.parent == id) return canonical(c);
        if (!nodes_.count(c)) return "?";
        auto p = paths_.find(c);
        return p == paths_.end() ? std::string("~") : "@" + format_path(p->second);
    };
    std::string out;
    out += kind_name(n.kind);
    switch (n.kind) {
        case NodeKind::Dictionary:
        case NodeKind::Stream:
            if (n.stream) out += "<" + std::to_string(n.stream->length) + "," + n.stream->filter + ">";
            out += "{";
            for (const auto& [key, child] : n.dict) out += key + "=" + child_text(child) + ";";
            out += "}";
            break;
        case NodeKind::Array:
            out += "[";
            for (auto child : n.items) out += child_text(child) + ";";
            out += "]";
            break;
        case NodeKind::Reference:
            out += "(" + child_text(n.target) + ")";
            break;
        default:
            out += ":" + n.value;
    }
    return out;
}

std::string DocTree::fingerprint(NodeId id) const {
    std::vector<NodeId> stack;
    auto rec = [&](auto&& self, NodeId cur) -> std::string {
        auto it = nodes_.find(cur);
        if (it == nodes_.end()) return "dangling";
        if (std::find(stack.begin(), stack.end(), cur) != stack.end()) return "cycle";
        const DocNode& n = it->second;
        if (n.kind == NodeKind::Reference) return self(self, n.target);
        stack.push_back(cur);
        std::string out{kind_name(n.kind)};
        if (n.stream) out += "<" + std::to_string(n.stream->length) + "," + n.stream->filter + ">";
        if (n.has_keys()) {
            out += "{";
            for (const auto& [key, child] : n.dict) out += key + "=" + self(self, child) + ";";
            out += "}";
        } else if (n.kind == NodeKind::Array) {
            out += "[";
            for (auto child : n.items) out += self(self, child) + ";";
            out += "]";
        } else {
            out += ":" + n.value;
        }
        stack.pop_back();
        return out;
    };
    return rec(rec, id);
}

DocTree DocTree::delete_subtree(const Path& path) const {
    if (path.empty()) throw PathNotFound("cannot delete the root");
    std::vector<NodeId> targets;
    for (auto id : bfs_) {
        if (id != root_ && paths_.at(id) == path && edges_.at(id).kind == EdgeKind::Key) targets.push_back(id);
    }
    if (targets.empty()) throw PathNotFound("no subtree at " + format_path(path));
    TreeEditor ed(*this);
    for (auto id : targets) {
        const TreeEdge& e = edges_.at(id);
        if (ed.contains(e.parent)) ed.remove_key(e.parent, e.key);
    }
    return ed.finish();
}

DocTree DocTree::delete_node(NodeId id) const {
    if (id == root_) throw PathNotFound("cannot delete the root");
    NodeId cur = id;
    // a reference target is detached by removing the reference that reaches it
    while (edge(cur).kind == EdgeKind::Ref) cur = edge(cur).parent;
    if (cur == root_) throw PathNotFound("cannot delete the root");
    const TreeEdge& e = edge(cur);
    TreeEditor ed(*this);
    if (e.kind == EdgeKind::Key) {
        ed.remove_key(e.parent, e.key);
    } else {
        ed.remove_index(e.parent, e.index);
    }
    return ed.finish();
}

DocTree DocTree::insert_subtree(const Path& parent_path, const std::optional<std::string>& key,
                                const DocTree& subtree) const {
    auto candidates = nodes_at(parent_path);
    if (candidates.empty()) throw PathNotFound("no node at " + format_path(parent_path));
    NodeId parent = 0;
    for (auto c : candidates) {
        const DocNode& n = nodes_.at(c);
        if (key ? n.has_keys() : n.kind == NodeKind::Array) {
            parent = c;
            break;
        }
    }
    if (parent == 0) {
        throw KindMismatch(std::string(key ? "keyed insertion" : "positional insertion") + " at " +
                           format_path(parent_path) + " has no matching container");
    }
    TreeEditor ed(*this);
    NodeId fresh = ed.import(subtree);
    if (key) {
        ed.set_key(parent, *key, fresh);
    } else {
        ed.at(parent).items.push_back(fresh);
    }
    return ed.finish();
}

DocTree DocTree::replace_subtree(const Path& path, const DocTree& subtree) const {
    if (path.empty()) throw PathNotFound("cannot replace the root");
    Path parent(path.begin(), path.end() - 1);
    return delete_subtree(path).insert_subtree(parent, path.back(), subtree);
}

DocTree DocTree::graft_at(const Path& path, const DocTree& subtree) const {
    if (path.empty()) throw PathNotFound("cannot graft at the root");
    TreeEditor ed(*this);
    NodeId parent = ed.ensure_parent(path);
    NodeId fresh = ed.import(subtree);
    ed.set_key(parent, path.back(), fresh);
    return ed.finish();
}

DocTree DocTree::link_at(const Path& path, const Path& target) const {
    if (path.empty()) throw PathNotFound("cannot link at the root");
    auto hits = nodes_at(target);
    if (hits.empty()) throw PathNotFound("no node at " + format_path(target));
    TreeEditor ed(*this);
    NodeId parent = ed.ensure_parent(path);
    NodeId ref = ed.add(DocNode::reference(hits.front()));
    ed.set_key(parent, path.back(), ref);
    return ed.finish();
}

DocTree DocTree::extract(NodeId id) const {
    if (!in_tree(id)) throw PathNotFound("node " + std::to_string(id) + " is not in the tree");
    if (node(id).kind == NodeKind::Reference) {
        auto kids = tree_children(id);
        if (!kids.empty()) id = kids.front();
    }
    std::unordered_set<NodeId> keep;
    std::vector<NodeId> work{id};
    while (!work.empty()) {
        NodeId cur = work.back();
        work.pop_back();
        if (!keep.insert(cur).second) continue;
        for (auto c : tree_children(cur)) work.push_back(c);
    }
    auto inside = [&](NodeId c) {
        if (!keep.count(c)) return false;
        const DocNode& n = nodes_.at(c);
        return n.kind != NodeKind::Reference || keep.count(n.target) != 0;
    };
    std::map<NodeId, DocNode> out;
    for (auto k : keep) {
        DocNode copy = nodes_.at(k);
        std::erase_if(copy.dict, [&](const auto& kv) { return !inside(kv.second); });
        std::erase_if(copy.items, [&](NodeId c) { return !inside(c); });
        if (copy.kind == NodeKind::Reference && !keep.count(copy.target)) copy = DocNode::null();
        out.emplace(k, std::move(copy));
    }
    // drop nodes orphaned by the filtering above
    DocTree raw(id, std::move(out));
    std::map<NodeId, DocNode> reachable;
    for (auto n : raw.bfs_order()) reachable.emplace(n, raw.node(n));
    return DocTree(id, std::move(reachable));
}

std::optional<NodeId> DocTree::find_payload(const Path& trigger, const ExploitMarker& marker) const {
    if (marker.payload_fingerprint.empty()) return std::nullopt;
    for (auto id : nodes_at(trigger)) {
        NodeId cand = id;
        const DocNode& n = nodes_.at(id);
        if (n.kind == NodeKind::Reference) {
            if (!nodes_.count(n.target)) continue;
            cand = n.target;
        }
        if (fingerprint(cand) == marker.payload_fingerprint) return cand;
    }
    return std::nullopt;
}

DocTree DocTree::move_exploit(const Path& from, const Path& to, const ExploitMarker& marker) const {
    auto payload = find_payload(from, marker);
    if (!payload) throw NoPayloadAtSource("no payload at " + format_path(from));
    if (from == to) return *this;
    NodeId holder = 0;
    for (auto id : nodes_at(from)) {
        const DocNode& n = nodes_.at(id);
        if (id == *payload || (n.kind == NodeKind::Reference && n.target == *payload)) {
            holder = id;
            break;
        }
    }
    while (edge(holder).kind == EdgeKind::Ref) holder = edge(holder).parent;
    const TreeEdge old = edge(holder);

    TreeEditor ed(*this);
    NodeId parent = ed.ensure_parent(to);
    NodeId link = ed.add(DocNode::reference(*payload));
    ed.set_key(parent, to.back(), link);
    if (old.kind == EdgeKind::Key) {
        ed.remove_key(old.parent, old.key);
    } else {
        ed.remove_index(old.parent, old.index);
    }
    return ed.finish();
}

bool DocTree::is_malicious_proxy(const ExploitMarker& marker) const {
    for (const auto& p : marker.hosting_paths()) {
        if (find_payload(p, marker)) return true;
    }
    return false;
}

bool is_malicious_proxy(const DocTree& tree, const ExploitMarker& marker) {
    return tree.is_malicious_proxy(marker);
}

NodeId TreeBuilder::add(DocNode node) {
    nodes_.emplace(next_, std::move(node));
    return next_++;
}

NodeId TreeBuilder::number(double v) {
    std::ostringstream os;
    os << v;
    return add(DocNode::number(os.str()));
}

NodeId TreeBuilder::stream(std::uint64_t length, std::string filter) {
    DocNode n{.kind = NodeKind::Stream};
    n.stream = StreamMeta{length, filter};
    NodeId id = add(std::move(n));
    set(id, "Length", integer(static_cast<long long>(length)));
    if (!filter.empty()) set(id, "Filter", name(filter));
    return id;
}

void TreeBuilder::set(NodeId parent, const std::string& key, NodeId child) {
    nodes_.at(parent).dict[key] = child;
}

void TreeBuilder::push(NodeId array, NodeId child) { nodes_.at(array).items.push_back(child); }

}  // namespace verdoc
