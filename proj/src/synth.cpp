#include "verdoc/synth.hpp"

#include <filesystem>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "verdoc/error.hpp"
#include "verdoc/pdf.hpp"
#include "verdoc/tree_json.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

namespace {

struct Gen {
    TreeBuilder b;
    std::mt19937_64& rng;

    bool chance(double p) { return std::bernoulli_distribution(p)(rng); }
    long long uniform(long long lo, long long hi) { return std::uniform_int_distribution<long long>(lo, hi)(rng); }
    template <typename T>
    const T& choose(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(uniform(0, static_cast<long long>(v.size()) - 1))];
    }

    NodeId name(const std::string& v) { return b.name(v); }
    NodeId typed(const std::string& type) {
        NodeId d = b.dict();
        b.set(d, "Type", name(type));
        return d;
    }
    NodeId rect() {
        NodeId a = b.array();
        for (int i = 0; i < 4; ++i) b.push(a, b.integer(uniform(0, 800)));
        return a;
    }

    NodeId font(int i) {
        NodeId f = typed("Font");
        b.set(f, "Subtype", name(choose<std::string>({"Type1", "TrueType", "Type0"})));
        b.set(f, "BaseFont", name(choose<std::string>({"Helvetica", "Times-Roman", "Courier", "Arial"})));
        if (chance(0.5)) b.set(f, "Encoding", name("WinAnsiEncoding"));
        if (chance(0.3)) {
            NodeId fd = typed("FontDescriptor");
            b.set(fd, "Flags", b.integer(32));
            b.set(fd, "FontBBox", rect());
            b.set(fd, "ItalicAngle", b.integer(0));
            if (chance(0.5)) b.set(fd, "FontFile2", b.ref(b.stream(static_cast<std::uint64_t>(uniform(100, 9000)), "FlateDecode")));
            b.set(f, "FontDescriptor", b.ref(fd));
        }
        if (chance(0.3)) {
            NodeId w = b.array();
            for (int k = 0; k < 3; ++k) b.push(w, b.integer(500 + i));
            b.set(f, "Widths", w);
            b.set(f, "FirstChar", b.integer(32));
            b.set(f, "LastChar", b.integer(126));
        }
        return f;
    }

    NodeId resources(bool rich) {
        NodeId r = b.dict();
        NodeId fonts = b.dict();
        int nf = rich ? static_cast<int>(uniform(1, 4)) : 1;
        for (int i = 1; i <= nf; ++i) b.set(fonts, "F" + std::to_string(i), b.ref(font(i)));
        b.set(r, "Font", fonts);
        NodeId ps = b.array();
        b.push(ps, name("PDF"));
        b.push(ps, name("Text"));
        if (rich && chance(0.5)) b.push(ps, name("ImageB"));
        b.set(r, "ProcSet", ps);
        if (rich && chance(0.5)) {
            NodeId xo = b.dict();
            NodeId im = b.stream(static_cast<std::uint64_t>(uniform(500, 40000)), "DCTDecode");
            b.set(im, "Type", name("XObject"));
            b.set(im, "Subtype", name("Image"));
            b.set(im, "Width", b.integer(uniform(10, 1000)));
            b.set(im, "Height", b.integer(uniform(10, 1000)));
            b.set(im, "ColorSpace", name("DeviceRGB"));
            b.set(im, "BitsPerComponent", b.integer(8));
            b.set(xo, "Im1", b.ref(im));
            b.set(r, "XObject", xo);
        }
        if (rich && chance(0.4)) {
            NodeId gs = b.dict();
            NodeId g1 = typed("ExtGState");
            b.set(g1, "CA", b.number(1.0));
            b.set(g1, "ca", b.number(1.0));
            b.set(gs, "GS1", g1);
            b.set(r, "ExtGState", gs);
        }
        return r;
    }

    NodeId page(NodeId pages, bool rich) {
        NodeId p = typed("Page");
        b.set(p, "Parent", b.ref(pages));
        b.set(p, "MediaBox", rect());
        b.set(p, "Resources", resources(rich));
        b.set(p, "Contents", b.ref(b.stream(static_cast<std::uint64_t>(uniform(50, 5000)), "FlateDecode")));
        if (rich && chance(0.3)) b.set(p, "Rotate", b.integer(0));
        if (rich && chance(0.35)) {
            NodeId annots = b.array();
            NodeId a = typed("Annot");
            b.set(a, "Subtype", name("Link"));
            b.set(a, "Rect", rect());
            NodeId border = b.array();
            for (int i = 0; i < 3; ++i) b.push(border, b.integer(0));
            b.set(a, "Border", border);
            NodeId act = b.dict();
            b.set(act, "S", name("URI"));
            b.set(act, "URI", b.string("http://example.org/" + std::to_string(uniform(0, 999))));
            b.set(a, "A", act);
            b.push(annots, b.ref(a));
            b.set(p, "Annots", annots);
        }
        if (rich && chance(0.2)) b.set(p, "Group", [&] {
            NodeId g = typed("Group");
            b.set(g, "S", name("Transparency"));
            b.set(g, "CS", name("DeviceRGB"));
            return g;
        }());
        return p;
    }

    NodeId pages(bool rich, int n, std::vector<NodeId>* out_pages = nullptr) {
        NodeId ps = typed("Pages");
        NodeId kids = b.array();
        for (int i = 0; i < n; ++i) {
            NodeId p = page(ps, rich);
            if (out_pages) out_pages->push_back(p);
            b.push(kids, b.ref(p));
        }
        b.set(ps, "Kids", kids);
        b.set(ps, "Count", b.integer(n));
        return ps;
    }

    NodeId metadata() {
        NodeId m = b.stream(static_cast<std::uint64_t>(uniform(800, 6000)), "");
        b.at(m).dict.erase("Filter");
        b.at(m).stream->filter.clear();
        b.set(m, "Type", name("Metadata"));
        b.set(m, "Subtype", name("XML"));
        return b.ref(m);
    }

    NodeId struct_tree(NodeId first_page) {
        NodeId st = typed("StructTreeRoot");
        NodeId k = b.dict();
        b.set(k, "S", name("Document"));
        b.set(k, "P", b.ref(st));
        if (first_page) b.set(k, "Pg", b.ref(first_page));
        NodeId kk = b.array();
        int n = static_cast<int>(uniform(1, 3));
        for (int i = 0; i < n; ++i) {
            NodeId e = b.dict();
            b.set(e, "S", name(choose<std::string>({"P", "H1", "Figure", "Table"})));
            b.set(e, "K", b.integer(i));
            if (chance(0.3)) b.set(e, "Alt", b.string("figure " + std::to_string(i)));
            b.push(kk, e);
        }
        b.set(k, "K", kk);
        b.set(st, "K", k);
        NodeId pt = b.dict();
        NodeId nums = b.array();
        b.push(nums, b.integer(0));
        b.push(nums, b.ref(k));
        b.set(pt, "Nums", nums);
        b.set(st, "ParentTree", pt);
        if (chance(0.5)) {
            NodeId rm = b.dict();
            b.set(rm, "Heading", name("H1"));
            b.set(st, "RoleMap", rm);
        }
        if (chance(0.3)) b.set(st, "ParentTreeNextKey", b.integer(1));
        return st;
    }

    NodeId outlines() {
        NodeId o = typed("Outlines");
        NodeId item = b.dict();
        b.set(item, "Title", b.string("Chapter 1"));
        b.set(item, "Parent", b.ref(o));
        NodeId dest = b.array();
        b.push(dest, b.integer(0));
        b.push(dest, name("XYZ"));
        b.set(item, "Dest", dest);
        if (chance(0.4)) b.set(item, "Count", b.integer(0));
        b.set(o, "First", b.ref(item));
        b.set(o, "Last", b.ref(item));
        b.set(o, "Count", b.integer(1));
        return o;
    }

    NodeId names_benign() {
        NodeId n = b.dict();
        NodeId dests = b.dict();
        NodeId arr = b.array();
        b.push(arr, b.string("section1"));
        b.push(arr, b.integer(uniform(0, 9)));
        b.set(dests, "Names", arr);
        b.set(n, "Dests", dests);
        if (chance(0.3)) {
            NodeId ef = b.dict();
            NodeId arr2 = b.array();
            NodeId spec = typed("Filespec");
            b.set(spec, "F", b.string("attachment.txt"));
            NodeId efd = b.dict();
            NodeId s = b.stream(static_cast<std::uint64_t>(uniform(10, 4000)), "FlateDecode");
            b.set(s, "Type", name("EmbeddedFile"));
            b.set(efd, "F", b.ref(s));
            b.set(spec, "EF", efd);
            b.push(arr2, b.string("attachment"));
            b.push(arr2, b.ref(spec));
            b.set(ef, "Names", arr2);
            b.set(n, "EmbeddedFiles", ef);
        }
        return n;
    }

    NodeId acroform(bool xfa) {
        NodeId af = b.dict();
        NodeId fields = b.array();
        NodeId f = b.dict();
        b.set(f, "FT", name("Tx"));
        b.set(f, "T", b.string("name"));
        b.set(f, "Rect", rect());
        if (chance(0.5)) b.set(f, "V", b.string("value"));
        b.push(fields, b.ref(f));
        b.set(af, "Fields", fields);
        b.set(af, "DA", b.string("/Helv 0 Tf 0 g"));
        if (chance(0.4)) b.set(af, "NeedAppearances", b.boolean(true));
        if (xfa) b.set(af, "XFA", b.ref(b.stream(static_cast<std::uint64_t>(uniform(100, 3000)), "FlateDecode")));
        return af;
    }

    NodeId payload() {
        std::uint64_t len = static_cast<std::uint64_t>(uniform(200, 20000));
        NodeId s = b.stream(len, choose<std::string>({"FlateDecode", "ASCIIHexDecode", "FlateDecode"}));
        if (chance(0.4)) {
            NodeId dp = b.dict();
            b.set(dp, "Predictor", b.integer(12));
            b.set(dp, "Columns", b.integer(uniform(1, 8)));
            b.set(s, "DecodeParms", b.ref(dp));
        }
        return s;
    }
};

DocTree benign_doc(std::mt19937_64& rng) {
    Gen g{TreeBuilder{}, rng};
    NodeId root = g.typed("Catalog");
    std::vector<NodeId> pgs;
    g.b.set(root, "Pages", g.b.ref(g.pages(true, static_cast<int>(g.uniform(1, 4)), &pgs)));
    if (g.chance(0.7)) g.b.set(root, "Metadata", g.metadata());
    if (g.chance(0.5)) g.b.set(root, "StructTreeRoot", g.b.ref(g.struct_tree(pgs.front())));
    if (g.chance(0.5)) {
        NodeId mi = g.b.dict();
        g.b.set(mi, "Marked", g.b.boolean(true));
        g.b.set(root, "MarkInfo", mi);
    }
    if (g.chance(0.4)) g.b.set(root, "Outlines", g.b.ref(g.outlines()));
    if (g.chance(0.4)) g.b.set(root, "Names", g.names_benign());
    if (g.chance(0.2)) g.b.set(root, "AcroForm", g.acroform(false));
    if (g.chance(0.3)) {
        NodeId vp = g.b.dict();
        g.b.set(vp, "DisplayDocTitle", g.b.boolean(true));
        if (g.chance(0.5)) g.b.set(vp, "HideToolbar", g.b.boolean(false));
        g.b.set(root, "ViewerPreferences", vp);
    }
    if (g.chance(0.3)) {
        NodeId pl = g.b.dict();
        NodeId nums = g.b.array();
        g.b.push(nums, g.b.integer(0));
        NodeId style = g.b.dict();
        g.b.set(style, "S", g.name("D"));
        g.b.push(nums, style);
        g.b.set(pl, "Nums", nums);
        g.b.set(root, "PageLabels", pl);
    }
    if (g.chance(0.4)) g.b.set(root, "Lang", g.b.string("en-US"));
    if (g.chance(0.3)) g.b.set(root, "PageLayout", g.name(g.choose<std::string>({"OneColumn", "SinglePage"})));
    if (g.chance(0.3)) g.b.set(root, "PageMode", g.name(g.choose<std::string>({"UseOutlines", "UseNone"})));
    if (g.chance(0.15)) {
        NodeId oc = g.b.dict();
        NodeId ocg = g.typed("OCG");
        g.b.set(ocg, "Name", g.b.string("Layer"));
        NodeId ocgs = g.b.array();
        g.b.push(ocgs, g.b.ref(ocg));
        g.b.set(oc, "OCGs", ocgs);
        NodeId d = g.b.dict();
        NodeId on = g.b.array();
        g.b.push(on, g.b.ref(ocg));
        g.b.set(d, "ON", on);
        g.b.set(oc, "D", d);
        g.b.set(root, "OCProperties", oc);
    }
    if (g.chance(0.1)) g.b.set(root, "Version", g.name("1.7"));
    if (g.chance(0.03)) {
        // rare benign script: a print dialog
        NodeId oa = g.b.dict();
        g.b.set(oa, "S", g.name("JavaScript"));
        g.b.set(oa, "JS", g.b.string("this.print()"));
        g.b.set(root, "OpenAction", oa);
    }
    return g.b.build(root);
}

CorpusDoc malicious_doc(std::mt19937_64& rng) {
    Gen g{TreeBuilder{}, rng};
    NodeId root = g.typed("Catalog");
    std::vector<NodeId> pgs;
    NodeId pages = g.pages(g.chance(0.2), 1, &pgs);
    g.b.set(root, "Pages", g.b.ref(pages));
    NodeId pay = g.payload();
    auto triggers = ExploitMarker::default_trigger_points();
    std::vector<Path> tp(triggers.begin(), triggers.end());
    const Path& where = g.choose(tp);
    const std::string head = where.front();
    if (head == "OpenAction") {
        NodeId oa = g.b.dict();
        g.b.set(oa, "S", g.name("JavaScript"));
        g.b.set(oa, "JS", g.b.ref(pay));
        g.b.set(root, "OpenAction", oa);
    } else if (head == "Names") {
        NodeId names = g.b.dict();
        NodeId js = g.b.dict();
        NodeId arr = g.b.array();
        g.b.push(arr, g.b.string("js" + std::to_string(g.uniform(0, 99))));
        g.b.push(arr, g.b.ref(pay));
        g.b.set(js, "Names", arr);
        g.b.set(names, "JavaScript", js);
        g.b.set(root, "Names", names);
    } else if (head == "Pages") {
        g.b.set(pgs.front(), "AA", g.b.ref(pay));
    } else {
        NodeId st = g.typed("StructTreeRoot");
        g.b.set(st, "JS", g.b.ref(pay));
        g.b.set(root, "StructTreeRoot", g.b.ref(st));
    }
    if (g.chance(0.3)) g.b.set(root, "AcroForm", g.acroform(true));
    if (g.chance(0.1)) g.b.set(root, "Outlines", g.b.ref(g.outlines()));
    if (g.chance(0.08)) g.b.set(root, "Metadata", g.metadata());
    if (g.chance(0.1)) g.b.set(root, "Lang", g.b.string("en-US"));
    if (g.chance(0.2)) g.b.set(root, "PageMode", g.name("UseNone"));
    DocTree tree = g.b.build(root);
    ExploitMarker marker;
    marker.trigger_points = triggers;
    marker.marker_paths = {where};
    marker.payload_fingerprint = tree.fingerprint(pay);
    return {"", std::move(tree), 1, std::move(marker)};
}

}  // namespace

std::vector<CorpusDoc> generate_synthetic(std::size_t n_benign, std::size_t n_malicious, std::uint64_t seed) {
    std::vector<CorpusDoc> out;
    std::mt19937_64 brng(derive_seed(seed, "synth:benign"));
    for (std::size_t i = 0; i < n_benign; ++i) {
        std::ostringstream id;
        id << "b" << std::setw(5) << std::setfill('0') << i;
        out.push_back({id.str(), benign_doc(brng), 0, std::nullopt});
    }
    std::mt19937_64 mrng(derive_seed(seed, "synth:malicious"));
    for (std::size_t i = 0; i < n_malicious; ++i) {
        auto d = malicious_doc(mrng);
        std::ostringstream id;
        id << "m" << std::setw(5) << std::setfill('0') << i;
        d.id = id.str();
        out.push_back(std::move(d));
    }
    return out;
}

void write_corpus(const std::string& dir, const std::vector<CorpusDoc>& docs) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "trees");
    std::ostringstream labels;
    labels << "id,label\n";
    for (const auto& d : docs) {
        write_file((fs::path(dir) / "trees" / (d.id + ".json")).string(), save_tree(d.tree, d.marker));
        labels << d.id << ',' << d.label << '\n';
    }
    write_file((fs::path(dir) / "labels.csv").string(), labels.str());
}

std::vector<CorpusDoc> read_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path base(dir);
    if (!fs::is_directory(base)) throw DataError("corpus directory not found: " + dir);
    std::map<std::string, int> labels;
    {
        std::istringstream is(read_file((base / "labels.csv").string()));
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line.rfind("id,", 0) == 0) continue;
            auto comma = line.find(',');
            if (comma == std::string::npos) throw DataError("bad labels.csv line: " + line);
            std::string lab = line.substr(comma + 1);
            if (lab != "0" && lab != "1") throw DataError("label must be 0 or 1: " + line);
            labels[line.substr(0, comma)] = lab == "1";
        }
    }
    std::vector<CorpusDoc> out;
    for (const auto& [id, label] : labels) {
        fs::path json = base / "trees" / (id + ".json");
        fs::path pdf = base / (id + ".pdf");
        CorpusDoc d{id, DocTree(), label, std::nullopt};
        try {
            if (fs::exists(json)) {
                auto td = load_tree_document(read_file(json.string()));
                d.tree = std::move(td.tree);
                d.marker = std::move(td.marker);
            } else if (fs::exists(pdf)) {
                d.tree = parse_pdf(read_file(pdf.string()));
            } else {
                throw DataError("no tree or pdf for document " + id);
            }
        } catch (const MalformedDocument& e) {
            throw DataError(id + ": " + e.what());
        } catch (const SchemaViolation& e) {
            throw DataError(id + ": " + e.what());
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::string example_pdf() {
    return "%PDF-1.4\n"
           "1 0 obj\n<< /Type /Catalog /Pages 3 0 R /OpenAction << /JS 2 0 R /S /JavaScript >> >>\nendobj\n"
           "2 0 obj\n<< /Filter /FlateDecode /Length 12 >>\nstream\nxxxxxxxxxxxx\nendstream\nendobj\n"
           "3 0 obj\n<< /Kids [4 0 R] /Count 1 /Type /Pages >>\nendobj\n"
           "4 0 obj\n<< /Parent 3 0 R /Type /Page >>\nendobj\n"
           "trailer\n<< /Size 5 /Root 1 0 R >>\n%%EOF\n";
}

}  // namespace verdoc
