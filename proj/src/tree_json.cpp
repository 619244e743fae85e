#include "verdoc/tree_json.hpp"

#include <charconv>

#include "verdoc/error.hpp"

namespace verdoc {

using nlohmann::json;

namespace {

NodeId parse_id(const json& j, bool allow_zero = false) {
    if (!j.is_string()) throw SchemaViolation("node id must be a string");
    const auto& s = j.get_ref<const std::string&>();
    NodeId id = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc() || ptr != s.data() + s.size() || (id == 0 && !allow_zero)) {
        throw SchemaViolation("node id '" + s + "' is not a positive integer");
    }
    return id;
}

json paths_to_json(const std::set<Path>& paths) {
    json out = json::array();
    for (const auto& p : paths) out.push_back(format_path(p));
    return out;
}

std::set<Path> paths_from_json(const json& j) {
    std::set<Path> out;
    if (!j.is_array()) throw SchemaViolation("path list must be an array");
    for (const auto& p : j) out.insert(parse_path(p.get<std::string>()));
    return out;
}

}  // namespace

json marker_to_json(const ExploitMarker& marker) {
    return json{{"payload_fingerprint", marker.payload_fingerprint},
                {"trigger_points", paths_to_json(marker.trigger_points)},
                {"marker_paths", paths_to_json(marker.marker_paths)}};
}

ExploitMarker marker_from_json(const json& j) {
    if (!j.is_object()) throw SchemaViolation("markers must be an object");
    ExploitMarker m;
    m.payload_fingerprint = j.value("payload_fingerprint", "");
    m.trigger_points = j.contains("trigger_points") ? paths_from_json(j["trigger_points"])
                                                    : ExploitMarker::default_trigger_points();
    if (j.contains("marker_paths")) m.marker_paths = paths_from_json(j["marker_paths"]);
    return m;
}

TreeDocument load_tree_document(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaViolation(std::string("invalid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("root") || !j.contains("nodes") || !j["nodes"].is_object()) {
            throw SchemaViolation("tree document needs 'root' and 'nodes'");
        }
        std::map<NodeId, DocNode> nodes;
        for (const auto& [key, value] : j["nodes"].items()) {
            NodeId id = parse_id(json(key));
            DocNode n;
            n.kind = kind_from_name(value.at("kind").get<std::string>());
            if (value.contains("entries")) {
                const auto& e = value["entries"];
                if (n.has_keys()) {
                    if (!e.is_object()) throw SchemaViolation("dictionary entries must be an object");
                    for (const auto& [k, child] : e.items()) n.dict[k] = parse_id(child);
                } else if (n.kind == NodeKind::Array) {
                    if (!e.is_array()) throw SchemaViolation("array entries must be a list");
                    for (const auto& child : e) n.items.push_back(parse_id(child));
                } else {
                    throw SchemaViolation("node " + key + " of kind " + std::string(kind_name(n.kind)) +
                                          " cannot have entries");
                }
            }
            if (value.contains("value")) n.value = value["value"].get<std::string>();
            if (n.kind == NodeKind::Boolean && n.value != "true" && n.value != "false") {
                throw SchemaViolation("boolean node " + key + " needs value true/false");
            }
            if (n.kind == NodeKind::Reference) {
                if (!value.contains("target")) throw SchemaViolation("reference " + key + " lacks target");
                n.target = parse_id(value["target"], /*allow_zero=*/true);  // 0 = dangling
            }
            if (value.contains("stream_meta")) {
                if (n.kind != NodeKind::Stream) throw SchemaViolation("stream_meta on non-stream " + key);
                const auto& m = value["stream_meta"];
                n.stream = StreamMeta{m.at("length").get<std::uint64_t>(), m.value("filter", "")};
            } else if (n.kind == NodeKind::Stream) {
                n.stream = StreamMeta{};
            }
            n.object_label = value.value("object", "");
            nodes.emplace(id, std::move(n));
        }
        for (const auto& [id, n] : nodes) {
            for (const auto& [k, child] : n.dict) {
                if (!nodes.count(child)) throw SchemaViolation("entry " + k + " points to missing node");
            }
            for (auto child : n.items) {
                if (!nodes.count(child)) throw SchemaViolation("array item points to missing node");
            }
        }
        NodeId root = parse_id(j["root"]);
        if (!nodes.count(root)) throw SchemaViolation("root id not present in nodes");
        TreeDocument doc{DocTree(root, std::move(nodes)), std::nullopt};
        if (j.contains("markers") && !j["markers"].is_null()) doc.marker = marker_from_json(j["markers"]);
        return doc;
    } catch (const json::exception& e) {
        throw SchemaViolation(std::string("tree document: ") + e.what());
    }
}

DocTree load_tree(std::string_view text) { return load_tree_document(text).tree; }

std::string save_tree(const DocTree& tree, const std::optional<ExploitMarker>& marker) {
    json nodes = json::object();
    for (const auto& [id, n] : tree.nodes()) {
        json v{{"kind", std::string(kind_name(n.kind))}};
        if (n.has_keys()) {
            json e = json::object();
            for (const auto& [k, child] : n.dict) e[k] = std::to_string(child);
            v["entries"] = std::move(e);
        } else if (n.kind == NodeKind::Array) {
            json e = json::array();
            for (auto child : n.items) e.push_back(std::to_string(child));
            v["entries"] = std::move(e);
        }
        if (!n.value.empty()) v["value"] = n.value;
        if (n.kind == NodeKind::Reference) v["target"] = std::to_string(n.target);
        if (n.stream) v["stream_meta"] = json{{"length", n.stream->length}, {"filter", n.stream->filter}};
        if (!n.object_label.empty()) v["object"] = n.object_label;
        nodes[std::to_string(id)] = std::move(v);
    }
    json j{{"format", "verdoc-tree/1"}, {"root", std::to_string(tree.root())}, {"nodes", std::move(nodes)}};
    if (marker) j["markers"] = marker_to_json(*marker);
    return j.dump(1) + "\n";
}

}  // namespace verdoc
