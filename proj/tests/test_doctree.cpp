#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <random>

#include "verdoc/doctree.hpp"
#include "verdoc/error.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/pdf.hpp"
#include "verdoc/synth.hpp"
#include "verdoc/tree_json.hpp"

using namespace verdoc;

namespace {

std::set<std::string> path_strings(const DocTree& t) {
    std::set<std::string> out;
    for (const auto& p : t.structural_paths()) out.insert(format_path(p));
    return out;
}

// Independent BFS over the raw node graph: dictionary entries in key order,
// array items in order, reference targets.
std::map<NodeId, std::size_t> graph_depths(const DocTree& t) {
    std::map<NodeId, std::size_t> depth{{t.root(), 0}};
    std::deque<NodeId> q{t.root()};
    while (!q.empty()) {
        NodeId id = q.front();
        q.pop_front();
        const DocNode& n = t.node(id);
        std::vector<NodeId> next;
        for (const auto& [k, c] : n.dict) next.push_back(c);
        for (auto c : n.items) next.push_back(c);
        if (n.kind == NodeKind::Reference && t.contains(n.target)) next.push_back(n.target);
        for (auto c : next) {
            if (depth.count(c)) continue;
            depth[c] = depth[id] + 1;
            q.push_back(c);
        }
    }
    return depth;
}

DocTree small_tree(std::initializer_list<std::pair<std::string, std::string>> entries) {
    TreeBuilder b;
    NodeId root = b.dict();
    for (const auto& [k, v] : entries) b.set(root, k, b.name(v));
    return b.build(root);
}

const std::set<std::string> kExamplePaths{
    "/Root/OpenAction", "/Root/OpenAction/JS",  "/Root/OpenAction/JS/Filter", "/Root/OpenAction/JS/Length",
    "/Root/OpenAction/S", "/Root/Pages",        "/Root/Pages/Count",          "/Root/Pages/Kids",
    "/Root/Pages/Kids/Parent", "/Root/Pages/Kids/Type", "/Root/Pages/Type",   "/Root/Type"};

}  // namespace

TEST(Pdf, ExampleFileGivesCatalogTree) {
    DocTree t = parse_pdf(example_pdf());
    EXPECT_EQ(t.root_keys(), (std::vector<std::string>{"OpenAction", "Pages", "Type"}));
    EXPECT_EQ(path_strings(t), kExamplePaths);
}

TEST(Pdf, SingleObject) {
    DocTree t = parse_pdf("%PDF-1.4\n1 0 obj\n<< /Type /Catalog >>\nendobj\ntrailer\n<< /Root 1 0 R >>\n%%EOF\n");
    EXPECT_EQ(t.root_keys(), std::vector<std::string>{"Type"});
    EXPECT_EQ(path_strings(t), std::set<std::string>{"/Root/Type"});
}

TEST(Pdf, MutualReferencesAppearOnceAtShortestDepth) {
    DocTree t = parse_pdf(example_pdf());
    std::map<std::string, int> seen;
    for (auto id : t.bfs_order()) {
        if (!t.node(id).object_label.empty()) ++seen[t.node(id).object_label];
    }
    EXPECT_EQ(seen, (std::map<std::string, int>{{"1 0", 1}, {"2 0", 1}, {"3 0", 1}, {"4 0", 1}}));
    auto depths = graph_depths(t);
    for (auto id : t.bfs_order()) EXPECT_EQ(t.depth_of(id), depths.at(id));
}

TEST(Pdf, MissingRootIsMalformed) {
    EXPECT_THROW(parse_pdf("%PDF-1.4\n1 0 obj\n<< /Type /Page >>\nendobj\n%%EOF\n"), MalformedDocument);
    EXPECT_THROW(parse_pdf("%PDF-1.4\ntrailer\n<< /Root 9 0 R >>\n"), MalformedDocument);
}

TEST(Pdf, MissingTrailerFallsBackToCatalog) {
    DocTree t = parse_pdf("%PDF-1.4\n1 0 obj\n<< /Type /Catalog >>\nendobj\n%%EOF\n");
    EXPECT_EQ(t.root_keys(), std::vector<std::string>{"Type"});
}

TEST(Pdf, WrongXrefFallsBackToScan) {
    std::string pdf = serialize_pdf(parse_pdf(example_pdf()));
    auto pos = pdf.find("0000000015 00000 n");
    ASSERT_NE(pos, std::string::npos);
    pdf.replace(pos, 10, "0000000999");
    EXPECT_EQ(path_strings(parse_pdf(pdf)), kExamplePaths);
}

TEST(Pdf, SerializeRoundTripKeepsPaths) {
    DocTree doc = parse_pdf(example_pdf());
    EXPECT_EQ(path_strings(parse_pdf(serialize_pdf(doc))), kExamplePaths);
    DocTree empty;
    EXPECT_TRUE(parse_pdf(serialize_pdf(empty)).structural_paths().empty());
    for (const auto& d : generate_synthetic(25, 25, 11)) {
        EXPECT_EQ(parse_pdf(serialize_pdf(d.tree)).structural_paths(), d.tree.structural_paths()) << d.id;
    }
}

TEST(TreeJson, RoundTrip) {
    for (const auto& d : generate_synthetic(25, 25, 12)) {
        auto text = save_tree(d.tree, d.marker);
        auto back = load_tree_document(text);
        EXPECT_EQ(back.tree, d.tree);
        EXPECT_EQ(save_tree(back.tree, back.marker), text);
        ASSERT_EQ(back.marker.has_value(), d.marker.has_value());
        if (d.marker) EXPECT_EQ(back.marker->payload_fingerprint, d.marker->payload_fingerprint);
    }
    DocTree empty;
    EXPECT_TRUE(load_tree(save_tree(empty)).root_keys().empty());
}

TEST(TreeJson, HandWrittenExampleMatchesParser) {
    const char* text = R"({"format": "verdoc-tree/1", "root": "1", "nodes": {
      "1": {"kind": "dictionary", "entries": {"Type": "5", "Pages": "6", "OpenAction": "9"}},
      "5": {"kind": "name", "value": "Catalog"},
      "6": {"kind": "reference", "target": "3"},
      "9": {"kind": "dictionary", "entries": {"JS": "7", "S": "8"}},
      "7": {"kind": "reference", "target": "2"},
      "8": {"kind": "name", "value": "JavaScript"},
      "2": {"kind": "stream", "entries": {"Filter": "11", "Length": "12"},
            "stream_meta": {"length": 12, "filter": "FlateDecode"}},
      "11": {"kind": "name", "value": "FlateDecode"},
      "12": {"kind": "number", "value": "12"},
      "3": {"kind": "dictionary", "entries": {"Kids": "15", "Count": "16", "Type": "17"}},
      "15": {"kind": "array", "entries": ["14"]},
      "14": {"kind": "reference", "target": "4"},
      "16": {"kind": "number", "value": "1"},
      "17": {"kind": "name", "value": "Pages"},
      "4": {"kind": "dictionary", "entries": {"Parent": "19", "Type": "20"}},
      "19": {"kind": "reference", "target": "3"},
      "20": {"kind": "name", "value": "Page"}}})";
    DocTree t = load_tree(text);
    EXPECT_EQ(path_strings(t), kExamplePaths);
    EXPECT_EQ(t.structural_paths(), parse_pdf(example_pdf()).structural_paths());
}

TEST(TreeJson, SchemaViolations) {
    EXPECT_THROW(load_tree("{}"), SchemaViolation);
    EXPECT_THROW(load_tree(R"({"format": "verdoc-tree/1", "root": "1", "nodes": {"1": {"kind": "widget"}}})"),
                 SchemaViolation);
    EXPECT_THROW(load_tree(R"({"format": "verdoc-tree/1", "root": "1", "nodes": {"1": {"kind": "reference"}}})"),
                 SchemaViolation);
    EXPECT_THROW(load_tree("not json"), SchemaViolation);
}

TEST(Edit, DeleteOpenActionDropsOnlyUnreferencedObjects) {
    DocTree t = parse_pdf(example_pdf());
    DocTree d = t.delete_subtree({"OpenAction"});
    std::set<std::string> labels;
    for (const auto& [id, n] : d.nodes()) {
        if (!n.object_label.empty()) labels.insert(n.object_label);
    }
    EXPECT_EQ(labels, (std::set<std::string>{"1 0", "3 0", "4 0"}));
    EXPECT_EQ(d.root_keys(), (std::vector<std::string>{"Pages", "Type"}));
    EXPECT_THROW(t.delete_subtree({"Nope"}), PathNotFound);
}

TEST(Edit, DeleteOnlyChild) {
    DocTree t = small_tree({{"Type", "Catalog"}});
    EXPECT_TRUE(t.delete_subtree({"Type"}).root_keys().empty());
}

TEST(Edit, SharedNodeSurvivesOneDeletion) {
    TreeBuilder b;
    NodeId root = b.dict();
    NodeId shared = b.dict();
    b.set(shared, "K", b.integer(1));
    b.set(root, "A", b.ref(shared));
    b.set(root, "B", b.ref(shared));
    DocTree t = b.build(root);
    EXPECT_EQ(path_strings(t), (std::set<std::string>{"/Root/A", "/Root/A/K", "/Root/B"}));
    DocTree d = t.delete_subtree({"A"});
    EXPECT_TRUE(d.contains(shared));
    EXPECT_EQ(path_strings(d), (std::set<std::string>{"/Root/B", "/Root/B/K"}));
}

TEST(Edit, InsertMetadataIsDistanceOneAndInvertible) {
    DocTree t = parse_pdf(example_pdf());
    TreeBuilder b;
    NodeId md = b.dict();
    b.set(md, "Length", b.integer(10));
    b.set(md, "Type", b.name("Metadata"));
    DocTree sub = b.build(md);
    DocTree ins = t.insert_subtree({}, std::string("Metadata"), sub);
    EXPECT_EQ(subtree_distance(t, ins), 1u);
    EXPECT_TRUE(ins.structural_paths().count({"Metadata", "Length"}));
    EXPECT_TRUE(ins.structural_paths().count({"Metadata", "Type"}));
    EXPECT_EQ(ins.delete_subtree({"Metadata"}), t);
    EXPECT_THROW(t.insert_subtree({"Type"}, std::string("X"), sub), KindMismatch);
    EXPECT_THROW(t.insert_subtree({"Pages"}, std::nullopt, sub), KindMismatch);
    EXPECT_THROW(t.insert_subtree({"Missing"}, std::string("X"), sub), PathNotFound);
}

TEST(Edit, ReplaceEqualsDeleteThenInsert) {
    auto docs = generate_synthetic(50, 50, 13);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const DocTree& t = docs[rng() % docs.size()].tree;
        const DocTree& donor = docs[rng() % docs.size()].tree;
        auto keys = t.root_keys();
        auto dkeys = donor.root_keys();
        const std::string key = keys[rng() % keys.size()];
        const DocTree sub = donor.extract(donor.nodes_at({dkeys[rng() % dkeys.size()]}).front());
        DocTree a = t.replace_subtree({key}, sub);
        DocTree b = t.delete_subtree({key}).insert_subtree({}, key, sub);
        EXPECT_EQ(a.canonical(), b.canonical()) << trial;
    }
}

TEST(Edit, SpanningDepthIsShortestPath) {
    for (const auto& d : generate_synthetic(30, 30, 14)) {
        auto depths = graph_depths(d.tree);
        for (auto id : d.tree.bfs_order()) EXPECT_EQ(d.tree.depth_of(id), depths.at(id)) << d.id;
        EXPECT_EQ(d.tree.bfs_order().size(), depths.size()) << d.id;
    }
}

TEST(Exploit, ProxyAndMoves) {
    auto docs = generate_synthetic(0, 40, 15);
    for (const auto& d : docs) {
        ASSERT_TRUE(d.marker);
        EXPECT_TRUE(d.tree.is_malicious_proxy(*d.marker)) << d.id;
        const Path from = *d.marker->marker_paths.begin();
        EXPECT_FALSE(d.tree.delete_subtree({from.front()}).is_malicious_proxy(*d.marker)) << d.id;
        EXPECT_EQ(d.tree.move_exploit(from, from, *d.marker), d.tree);
        for (const auto& to : ExploitMarker::default_trigger_points()) {
            DocTree moved = d.tree.move_exploit(from, to, *d.marker);
            EXPECT_TRUE(moved.is_malicious_proxy(*d.marker)) << d.id << " -> " << format_path(to);
            EXPECT_TRUE(moved.find_payload(to, *d.marker).has_value());
        }
    }
}

TEST(Exploit, OpenActionToPageAction) {
    DocTree t = parse_pdf(example_pdf());
    ExploitMarker m;
    m.trigger_points = ExploitMarker::default_trigger_points();
    m.marker_paths = {{"OpenAction", "JS"}};
    m.payload_fingerprint = t.fingerprint(t.nodes_at({"OpenAction", "JS"}).back());
    ASSERT_TRUE(t.is_malicious_proxy(m));
    DocTree moved = t.move_exploit({"OpenAction", "JS"}, {"Pages", "Kids", "AA"}, m);
    EXPECT_TRUE(moved.is_malicious_proxy(m));
    EXPECT_FALSE(moved.find_payload({"OpenAction", "JS"}, m).has_value());
    EXPECT_TRUE(moved.find_payload({"Pages", "Kids", "AA"}, m).has_value());
    EXPECT_THROW(moved.move_exploit({"OpenAction", "JS"}, {"StructTreeRoot", "JS"}, m), NoPayloadAtSource);
}
