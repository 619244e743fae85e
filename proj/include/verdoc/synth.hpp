#pragma once

// Synthetic PDF-like corpus: templated benign documents and malicious ones
// carrying a payload stream at one of the trigger points.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verdoc/doctree.hpp"

namespace verdoc {

struct CorpusDoc {
    std::string id;
    DocTree tree;
    int label = 0;
    std::optional<ExploitMarker> marker;
};

std::vector<CorpusDoc> generate_synthetic(std::size_t n_benign, std::size_t n_malicious, std::uint64_t seed);

/// Layout: <dir>/trees/<id>.json (tree + marker) and <dir>/labels.csv (id,label).
void write_corpus(const std::string& dir, const std::vector<CorpusDoc>& docs);
/// Reads a tree-JSON corpus, or a directory of .pdf files with labels.csv.
std::vector<CorpusDoc> read_corpus(const std::string& dir);

/// Small example document: catalog, JS OpenAction, pages tree.
std::string example_pdf();

}  // namespace verdoc
