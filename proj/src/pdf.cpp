#include "verdoc/pdf.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>

#include "verdoc/error.hpp"

namespace verdoc {
namespace {

bool is_white(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\0'; }
bool is_delim(char c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' ||
           c == '/' || c == '%';
}
bool is_regular(char c) { return !is_white(c) && !is_delim(c); }

struct ObjKey {
    long num = 0;
    long gen = 0;
    auto operator<=>(const ObjKey&) const = default;
};

/// Recursive-descent reader over the raw bytes. Indirect objects are parsed
/// lazily; references become Reference nodes whose targets are patched once
/// every object has an id.
class Reader {
public:
    explicit Reader(std::string_view bytes) : s_(bytes) {}

    DocTree run() {
        locate_objects();
        auto root_key = find_root();
        if (!root_key) throw MalformedDocument("no trailer /Root and no catalog object");
        for (const auto& [key, offset] : offsets_) object_id(key);
        for (const auto& [key, offset] : offsets_) parse_object(key, offset);
        for (auto& [ref_id, key] : pending_refs_) {
            auto it = ids_.find(key);
            // references to objects that do not exist stay dangling (target 0)
            nodes_.at(ref_id).target = (it != ids_.end() && nodes_.count(it->second)) ? it->second : 0;
        }
        auto root_it = ids_.find(*root_key);
        if (root_it == ids_.end() || !nodes_.count(root_it->second)) {
            throw MalformedDocument("trailer /Root does not resolve to an object");
        }
        return DocTree(root_it->second, std::move(nodes_));
    }

private:
    // ---- object location ----
    void locate_objects() {
        if (!read_xref()) scan_objects();
    }

    std::optional<ObjKey> header_at(std::size_t pos, std::size_t* body = nullptr) const {
        std::size_t p = pos;
        auto num = read_int(p);
        if (!num) return std::nullopt;
        skip_white_only(p);
        auto gen = read_int(p);
        if (!gen) return std::nullopt;
        skip_white_only(p);
        if (s_.compare(p, 3, "obj") != 0) return std::nullopt;
        p += 3;
        if (body) *body = p;
        return ObjKey{*num, *gen};
    }

    bool read_xref() {
        auto sx = s_.rfind("startxref");
        if (sx == std::string_view::npos) return false;
        std::size_t p = sx + 9;
        skip_white_only(p);
        auto off = read_int(p);
        if (!off || *off < 0 || static_cast<std::size_t>(*off) >= s_.size()) return false;
        p = static_cast<std::size_t>(*off);
        if (s_.compare(p, 4, "xref") != 0) return false;
        p += 4;
        std::map<ObjKey, std::size_t> found;
        while (true) {
            skip_white_only(p);
            if (s_.compare(p, 7, "trailer") == 0) break;
            auto first = read_int(p);
            skip_white_only(p);
            auto count = read_int(p);
            if (!first || !count || *count < 0) return false;
            for (long i = 0; i < *count; ++i) {
                skip_white_only(p);
                auto offset = read_int(p);
                skip_white_only(p);
                auto gen = read_int(p);
                skip_white_only(p);
                if (!offset || !gen || p >= s_.size()) return false;
                char kind = s_[p++];
                if (kind == 'n') {
                    if (*offset < 0 || static_cast<std::size_t>(*offset) >= s_.size()) return false;
                    auto hdr = header_at(static_cast<std::size_t>(*offset));
                    if (!hdr || hdr->num != *first + i) return false;
                    found[*hdr] = static_cast<std::size_t>(*offset);
                } else if (kind != 'f') {
                    return false;
                }
            }
        }
        if (found.empty()) return false;
        for (const auto& [key, offset] : found) offsets_[key] = offset;
        return true;
    }

    void scan_objects() {
        std::size_t pos = 0;
        while ((pos = s_.find("obj", pos)) != std::string_view::npos) {
            std::size_t end = pos + 3;
            bool token_end = end >= s_.size() || !is_regular(s_[end]);
            bool token_start = pos > 0 && is_white(s_[pos - 1]);
            if (token_end && token_start) {
                // walk back over "<num> <gen> "
                std::size_t p = pos;
                while (p > 0 && is_white(s_[p - 1])) --p;
                while (p > 0 && std::isdigit(static_cast<unsigned char>(s_[p - 1]))) --p;
                while (p > 0 && is_white(s_[p - 1])) --p;
                while (p > 0 && std::isdigit(static_cast<unsigned char>(s_[p - 1]))) --p;
                if (auto hdr = header_at(p)) offsets_[*hdr] = p;  // later definitions win
            }
            pos = end;
        }
    }

    std::optional<ObjKey> find_root() {
        std::size_t pos = s_.size();
        while ((pos = s_.rfind("trailer", pos)) != std::string_view::npos) {
            std::size_t p = pos + 7;
            skip_ws(p);
            if (p + 1 < s_.size() && s_[p] == '<' && s_[p + 1] == '<') {
                auto root = scan_dict_for_ref(p, "Root");
                if (root) return root;
            }
            if (pos == 0) break;
            --pos;
        }
        // lenient fallback: first object typed /Catalog
        for (const auto& [key, offset] : offsets_) {
            std::size_t body = 0;
            header_at(offset, &body);
            std::size_t end = s_.find("endobj", body);
            auto text = s_.substr(body, end == std::string_view::npos ? std::string_view::npos : end - body);
            auto t = text.find("/Type");
            if (t != std::string_view::npos) {
                std::size_t q = t + 5;
                while (q < text.size() && is_white(text[q])) ++q;
                if (text.compare(q, 8, "/Catalog") == 0) return key;
            }
        }
        return std::nullopt;
    }

    std::optional<ObjKey> scan_dict_for_ref(std::size_t p, std::string_view key) {
        // parse the trailer dictionary into a scratch store and pull out the ref
        std::size_t saved_next = next_;
        auto saved_nodes = nodes_;
        auto saved_refs = pending_refs_;
        std::optional<ObjKey> out;
        try {
            NodeId dict = parse_value(p, 0);
            const DocNode& n = nodes_.at(dict);
            auto it = n.dict.find(std::string(key));
            if (it != n.dict.end()) {
                for (const auto& [rid, k] : pending_refs_) {
                    if (rid == it->second) out = k;
                }
            }
        } catch (const MalformedDocument&) {
        }
        next_ = saved_next;
        nodes_ = std::move(saved_nodes);
        pending_refs_ = std::move(saved_refs);
        return out;
    }

    // ---- ids ----
    NodeId object_id(const ObjKey& key) {
        auto it = ids_.find(key);
        if (it != ids_.end()) return it->second;
        NodeId id = next_++;
        ids_[key] = id;
        return id;
    }

    NodeId fresh(DocNode node) {
        NodeId id = next_++;
        nodes_.emplace(id, std::move(node));
        return id;
    }

    void parse_object(const ObjKey& key, std::size_t offset) {
        std::size_t body = 0;
        if (!header_at(offset, &body)) return;
        std::size_t p = body;
        NodeId id = object_id(key);
        try {
            NodeId value = parse_value(p, 0);
            DocNode node = nodes_.at(value);
            nodes_.erase(value);
            if (node.kind == NodeKind::Reference) {
                // `N 0 obj M 0 R endobj`: keep the indirection as a reference node
                pending_refs_[id] = pending_refs_.at(value);
                pending_refs_.erase(value);
            }
            skip_ws(p);
            if (node.kind == NodeKind::Dictionary && s_.compare(p, 6, "stream") == 0) {
                read_stream(p, node);
            }
            node.object_label = std::to_string(key.num) + " " + std::to_string(key.gen);
            nodes_[id] = std::move(node);
        } catch (const MalformedDocument&) {
            // unparseable body: keep an empty placeholder so references resolve
            DocNode placeholder = DocNode::null();
            placeholder.object_label = std::to_string(key.num) + " " + std::to_string(key.gen);
            nodes_[id] = std::move(placeholder);
        }
    }

    void read_stream(std::size_t& p, DocNode& node) {
        p += 6;
        if (p < s_.size() && s_[p] == '\r') ++p;
        if (p < s_.size() && s_[p] == '\n') ++p;
        std::size_t data_start = p;
        std::optional<std::size_t> declared;
        auto len_it = node.dict.find("Length");
        if (len_it != node.dict.end()) {
            const DocNode& ln = nodes_.at(len_it->second);
            if (ln.kind == NodeKind::Number) {
                long v = 0;
                auto [ptr, ec] = std::from_chars(ln.value.data(), ln.value.data() + ln.value.size(), v);
                if (ec == std::errc() && v >= 0) declared = static_cast<std::size_t>(v);
            }
        }
        std::size_t length = 0;
        bool trusted = false;
        if (declared && data_start + *declared <= s_.size()) {
            std::size_t q = data_start + *declared;
            while (q < s_.size() && is_white(s_[q])) ++q;
            trusted = s_.compare(q, 9, "endstream") == 0;
        }
        if (trusted) {
            length = *declared;
        } else {
            auto end = s_.find("endstream", data_start);
            if (end == std::string_view::npos) end = s_.size();
            std::size_t e = end;
            if (e > data_start && s_[e - 1] == '\n') --e;
            if (e > data_start && s_[e - 1] == '\r') --e;
            length = e - data_start;
        }
        std::string filter;
        auto f_it = node.dict.find("Filter");
        if (f_it != node.dict.end()) {
            const DocNode& fn = nodes_.at(f_it->second);
            if (fn.kind == NodeKind::Name) {
                filter = fn.value;
            } else if (fn.kind == NodeKind::Array) {
                for (auto item : fn.items) {
                    const DocNode& in = nodes_.at(item);
                    if (in.kind != NodeKind::Name) continue;
                    if (!filter.empty()) filter += ",";
                    filter += in.value;
                }
            }
        }
        node.kind = NodeKind::Stream;
        node.stream = StreamMeta{length, filter};
        p = data_start + length;
    }

    // ---- lexing ----
    void skip_white_only(std::size_t& p) const {
        while (p < s_.size() && is_white(s_[p])) ++p;
    }

    void skip_ws(std::size_t& p) const {
        while (p < s_.size()) {
            if (is_white(s_[p])) {
                ++p;
            } else if (s_[p] == '%') {
                while (p < s_.size() && s_[p] != '\n' && s_[p] != '\r') ++p;
            } else {
                break;
            }
        }
    }

    std::optional<long> read_int(std::size_t& p) const {
        std::size_t start = p;
        while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
        if (p == start) return std::nullopt;
        long v = 0;
        auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + p, v);
        if (ec != std::errc()) return std::nullopt;
        return v;
    }

    std::string read_name(std::size_t& p) const {
        ++p;  // '/'
        std::string out;
        while (p < s_.size() && is_regular(s_[p])) {
            if (s_[p] == '#' && p + 2 < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[p + 1])) &&
                std::isxdigit(static_cast<unsigned char>(s_[p + 2]))) {
                out += static_cast<char>(std::stoi(std::string(s_.substr(p + 1, 2)), nullptr, 16));
                p += 3;
            } else {
                out += s_[p++];
            }
        }
        return out;
    }

    NodeId parse_value(std::size_t& p, int depth) {
        if (depth > 256) throw MalformedDocument("nesting too deep");
        skip_ws(p);
        if (p >= s_.size()) throw MalformedDocument("unexpected end of input");
        char c = s_[p];
        if (c == '<' && p + 1 < s_.size() && s_[p + 1] == '<') return parse_dict(p, depth);
        if (c == '[') return parse_array(p, depth);
        if (c == '/') return fresh(DocNode::name(read_name(p)));
        if (c == '(') return parse_literal_string(p);
        if (c == '<') {
            auto end = s_.find('>', p);
            if (end == std::string_view::npos) throw MalformedDocument("unterminated hex string");
            std::string raw(s_.substr(p, end - p + 1));
            p = end + 1;
            return fresh(DocNode::string(std::move(raw)));
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            // try `num gen R`
            std::size_t q = p;
            if (auto num = read_int(q)) {
                std::size_t r = q;
                skip_white_only(r);
                if (auto gen = read_int(r)) {
                    skip_white_only(r);
                    if (r < s_.size() && s_[r] == 'R' && (r + 1 >= s_.size() || !is_regular(s_[r + 1]))) {
                        p = r + 1;
                        NodeId id = fresh(DocNode::reference(0));
                        pending_refs_[id] = ObjKey{*num, *gen};
                        return id;
                    }
                }
            }
            std::size_t start = p;
            ++p;
            while (p < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p])) || s_[p] == '.')) ++p;
            return fresh(DocNode::number(std::string(s_.substr(start, p - start))));
        }
        std::size_t start = p;
        while (p < s_.size() && is_regular(s_[p])) ++p;
        std::string_view word = s_.substr(start, p - start);
        if (word == "true" || word == "false") return fresh(DocNode::boolean(word == "true"));
        if (word == "null") return fresh(DocNode::null());
        if (word.empty()) ++p;
        throw MalformedDocument("unexpected token '" + std::string(word) + "'");
    }

    NodeId parse_dict(std::size_t& p, int depth) {
        p += 2;
        DocNode node = DocNode::dictionary();
        while (true) {
            skip_ws(p);
            if (p + 1 < s_.size() && s_[p] == '>' && s_[p + 1] == '>') {
                p += 2;
                break;
            }
            if (p >= s_.size()) throw MalformedDocument("unterminated dictionary");
            if (s_[p] != '/') {
                // malformed entry: skip one token and carry on
                std::size_t before = p;
                try {
                    parse_value(p, depth + 1);
                } catch (const MalformedDocument&) {
                    p = before + 1;
                }
                continue;
            }
            std::string key = read_name(p);
            skip_ws(p);
            if (p + 1 < s_.size() && s_[p] == '>' && s_[p + 1] == '>') {
                node.dict[key] = fresh(DocNode::null());
                continue;
            }
            NodeId value = parse_value(p, depth + 1);
            node.dict[key] = value;  // a repeated key keeps the last value
        }
        return fresh(std::move(node));
    }

    NodeId parse_array(std::size_t& p, int depth) {
        ++p;
        DocNode node = DocNode::array();
        while (true) {
            skip_ws(p);
            if (p >= s_.size()) throw MalformedDocument("unterminated array");
            if (s_[p] == ']') {
                ++p;
                break;
            }
            node.items.push_back(parse_value(p, depth + 1));
        }
        return fresh(std::move(node));
    }

    NodeId parse_literal_string(std::size_t& p) {
        std::size_t start = p;
        int level = 0;
        while (p < s_.size()) {
            char c = s_[p++];
            if (c == '\\') {
                ++p;
            } else if (c == '(') {
                ++level;
            } else if (c == ')') {
                if (--level == 0) break;
            }
        }
        if (level != 0) throw MalformedDocument("unterminated string");
        return fresh(DocNode::string(std::string(s_.substr(start, p - start))));
    }

    std::string_view s_;
    std::map<ObjKey, std::size_t> offsets_;
    std::map<ObjKey, NodeId> ids_;
    std::map<NodeId, DocNode> nodes_;
    std::map<NodeId, ObjKey> pending_refs_;
    NodeId next_ = 1;
};

// ---- writer ----

std::string encode_name(const std::string& name) {
    std::string out = "/";
    for (unsigned char c : name) {
        if (c < '!' || c > '~' || c == '#' || is_delim(static_cast<char>(c))) {
            char buf[4];
            std::snprintf(buf, sizeof buf, "#%02X", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

bool valid_number(const std::string& text) {
    if (text.empty()) return false;
    std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
    bool digit = false;
    bool dot = false;
    for (; i < text.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            digit = true;
        } else if (text[i] == '.' && !dot) {
            dot = true;
        } else {
            return false;
        }
    }
    return digit;
}

class Writer {
public:
    explicit Writer(const DocTree& tree) : t_(tree) {}

    std::string run() {
        // objects: the root, every reference target and every stream
        number(t_.root());
        std::deque<NodeId> queue{t_.root()};
        std::map<NodeId, bool> seen{{t_.root(), true}};
        while (!queue.empty()) {
            NodeId id = queue.front();
            queue.pop_front();
            const DocNode& n = t_.node(id);
            auto visit = [&](NodeId c, bool via_ref) {
                if (!t_.contains(c)) return;
                if (via_ref || t_.node(c).kind == NodeKind::Stream) number(c);
                if (seen[c]) return;
                seen[c] = true;
                queue.push_back(c);
            };
            for (const auto& [key, c] : n.dict) visit(c, false);
            for (auto c : n.items) visit(c, false);
            if (n.kind == NodeKind::Reference) visit(n.target, true);
        }

        std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
        std::vector<std::size_t> offsets(order_.size() + 1, 0);
        for (std::size_t i = 0; i < order_.size(); ++i) {
            offsets[i + 1] = out.size();
            out += std::to_string(i + 1) + " 0 obj\n";
            write_value(out, order_[i], /*top=*/true);
            out += "\nendobj\n";
        }
        std::size_t xref = out.size();
        out += "xref\n0 " + std::to_string(order_.size() + 1) + "\n";
        out += "0000000000 65535 f \n";
        for (std::size_t i = 1; i <= order_.size(); ++i) {
            char line[24];
            std::snprintf(line, sizeof line, "%010zu 00000 n \n", offsets[i]);
            out += line;
        }
        out += "trailer\n<< /Size " + std::to_string(order_.size() + 1) + " /Root 1 0 R >>\n";
        out += "startxref\n" + std::to_string(xref) + "\n%%EOF\n";
        return out;
    }

private:
    void number(NodeId id) {
        if (numbers_.count(id)) return;
        order_.push_back(id);
        numbers_[id] = order_.size();
    }

    void write_ref_or_value(std::string& out, NodeId id) {
        if (!t_.contains(id)) {
            out += "null";
            return;
        }
        auto it = numbers_.find(id);
        if (it != numbers_.end()) {
            out += std::to_string(it->second) + " 0 R";
        } else {
            write_value(out, id, false);
        }
    }

    void write_value(std::string& out, NodeId id, bool top) {
        const DocNode& n = t_.node(id);
        if (!top && numbers_.count(id)) {
            write_ref_or_value(out, id);
            return;
        }
        if (++depth_ > 512) throw Unserializable("nesting too deep (cyclic direct objects?)");
        switch (n.kind) {
            case NodeKind::Dictionary:
            case NodeKind::Stream: {
                out += "<<";
                for (const auto& [key, c] : n.dict) {
                    out += " " + encode_name(key) + " ";
                    write_ref_or_value(out, c);
                }
                out += " >>";
                if (n.kind == NodeKind::Stream) {
                    if (!top) throw Unserializable("stream must be an indirect object");
                    std::uint64_t len = n.stream ? n.stream->length : 0;
                    out += "\nstream\n" + std::string(len, 'x') + "\nendstream";
                }
                break;
            }
            case NodeKind::Array:
                out += "[";
                for (std::size_t i = 0; i < n.items.size(); ++i) {
                    if (i) out += " ";
                    write_ref_or_value(out, n.items[i]);
                }
                out += "]";
                break;
            case NodeKind::Name: out += encode_name(n.value); break;
            case NodeKind::String:
                if (n.value.size() < 2 || !((n.value.front() == '(' && n.value.back() == ')') ||
                                            (n.value.front() == '<' && n.value.back() == '>'))) {
                    throw Unserializable("string value is not a PDF string token: " + n.value);
                }
                out += n.value;
                break;
            case NodeKind::Number:
                if (!valid_number(n.value)) throw Unserializable("invalid number '" + n.value + "'");
                out += n.value;
                break;
            case NodeKind::Boolean:
                if (n.value != "true" && n.value != "false") throw Unserializable("invalid boolean");
                out += n.value;
                break;
            case NodeKind::Null: out += "null"; break;
            case NodeKind::Reference: write_ref_or_value(out, n.target); break;
        }
        --depth_;
    }

    const DocTree& t_;
    std::vector<NodeId> order_;
    std::map<NodeId, std::size_t> numbers_;
    int depth_ = 0;
};

}  // namespace

DocTree parse_pdf(std::string_view bytes) {
    if (bytes.substr(0, 5) != "%PDF-" && bytes.find("%PDF-") == std::string_view::npos) {
        throw MalformedDocument("missing %PDF- header");
    }
    return Reader(bytes).run();
}

std::string serialize_pdf(const DocTree& tree) { return Writer(tree).run(); }

}  // namespace verdoc
