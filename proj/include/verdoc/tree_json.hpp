#pragma once

// JSON tree-exchange format:
//   {"format": "verdoc-tree/1",
//    "root": "<id>",
//    "nodes": {"<id>": {"kind": ..., "entries": {key: id} | [id, ...],
//                       "value": ..., "target": "<id>",
//                       "stream_meta": {"length": n, "filter": name},
//                       "object": "N G"}},
//    "markers": {"payload_fingerprint": ..., "trigger_points": [...],
//                "marker_paths": [...]}}
// Keys are emitted sorted, which is the canonical form.

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "verdoc/doctree.hpp"

namespace verdoc {

struct TreeDocument {
    DocTree tree;
    std::optional<ExploitMarker> marker;
};

nlohmann::json marker_to_json(const ExploitMarker& marker);
ExploitMarker marker_from_json(const nlohmann::json& j);

TreeDocument load_tree_document(std::string_view text);
DocTree load_tree(std::string_view text);
std::string save_tree(const DocTree& tree, const std::optional<ExploitMarker>& marker = std::nullopt);

}  // namespace verdoc
