#pragma once

// Minimal PDF object-graph reader/writer. Covers the subset needed for
// structural features: indirect objects, dictionaries, arrays, names,
// strings, numbers, booleans, null, streams and references. No encryption,
// no object streams; the cross-reference table is trusted only when every
// in-use entry points at a matching object header, otherwise the body is
// byte-scanned for `N G obj` markers.

#include <string>
#include <string_view>

#include "verdoc/doctree.hpp"

namespace verdoc {

DocTree parse_pdf(std::string_view bytes);
std::string serialize_pdf(const DocTree& tree);

}  // namespace verdoc
