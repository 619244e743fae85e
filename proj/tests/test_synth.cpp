#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "verdoc/error.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/synth.hpp"
#include "verdoc/tree_json.hpp"

using namespace verdoc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("verdoc_synth_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Synth, OneOfEach) {
    auto docs = generate_synthetic(1, 1, 0);
    ASSERT_EQ(docs.size(), 2u);
    int mal = 0;
    for (const auto& d : docs) {
        if (d.label == 1) {
            ++mal;
            ASSERT_TRUE(d.marker.has_value());
            EXPECT_TRUE(d.tree.is_malicious_proxy(*d.marker));
        } else {
            EXPECT_FALSE(d.marker.has_value());
        }
    }
    EXPECT_EQ(mal, 1);
    EXPECT_NE(docs[0].id, docs[1].id);
}

TEST(Synth, SeedDeterminesCorpus) {
    auto a = generate_synthetic(20, 10, 4);
    auto b = generate_synthetic(20, 10, 4);
    auto c = generate_synthetic(20, 10, 5);
    ASSERT_EQ(a.size(), b.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(save_tree(a[i].tree, a[i].marker), save_tree(b[i].tree, b[i].marker));
        differs = differs || save_tree(a[i].tree, a[i].marker) != save_tree(c[i].tree, c[i].marker);
    }
    EXPECT_TRUE(differs);
}

TEST(Synth, PayloadsAtTriggerPoints) {
    const auto triggers = ExploitMarker::default_trigger_points();
    std::set<Path> used;
    for (const auto& d : generate_synthetic(0, 60, 2)) {
        ASSERT_TRUE(d.marker);
        for (const auto& p : d.marker->marker_paths) {
            EXPECT_TRUE(triggers.count(p)) << format_path(p);
            EXPECT_TRUE(d.tree.find_payload(p, *d.marker).has_value());
            used.insert(p);
        }
    }
    EXPECT_EQ(used.size(), triggers.size());
}

TEST(Synth, WriteReadByteIdentical) {
    auto docs = generate_synthetic(6, 4, 9);
    auto d1 = scratch("a"), d2 = scratch("b");
    write_corpus(d1.string(), docs);
    auto back = read_corpus(d1.string());
    ASSERT_EQ(back.size(), docs.size());
    write_corpus(d2.string(), back);
    for (const auto& e : fs::recursive_directory_iterator(d1)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), d1);
        EXPECT_EQ(slurp(e.path()), slurp(d2 / rel)) << rel;
    }
    auto labels = slurp(d1 / "labels.csv");
    EXPECT_EQ(labels.rfind("id,label\n", 0), 0u);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Synth, ReadCorpusErrors) {
    EXPECT_THROW(read_corpus("/nonexistent/verdoc/corpus"), DataError);
    auto d = scratch("bad");
    write_corpus(d.string(), generate_synthetic(1, 1, 1));
    {
        std::ofstream out(d / "trees" / "b00000.json");
        out << "{ not json";
    }
    EXPECT_THROW(read_corpus(d.string()), DataError);
    fs::remove_all(d);
}

TEST(Synth, ClassesAreStructurallyDistinct) {
    auto docs = generate_synthetic(100, 100, 3);
    std::vector<DocTree> trees;
    for (const auto& d : docs) trees.push_back(d.tree);
    auto vocab = build_vocabulary(trees, 1);
    double benign_bits = 0, mal_bits = 0;
    for (const auto& d : docs) {
        auto n = static_cast<double>(extract_features(d.tree, vocab).count());
        (d.label ? mal_bits : benign_bits) += n;
    }
    EXPECT_GT(benign_bits / 100, mal_bits / 100);
}
