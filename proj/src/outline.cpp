#include "docqa/outline.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "docqa/clients.hpp"
#include "docqa/errors.hpp"
#include "docqa/prompts.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

std::vector<int> cluster_title_levels(const std::vector<double>& heights,
                                      const OutlineOptions& opts) {
    std::vector<int> levels(heights.size(), 1);
    if (heights.empty()) return levels;

    std::set<double, std::greater<double>> distinct(heights.begin(), heights.end());
    std::map<double, int> level_of;
    int cluster = 1;
    double prev = 0;
    bool first = true;
    for (double h : distinct) {
        if (!first) {
            double rel = prev > 0 ? (prev - h) / prev : 0.0;
            if (rel > opts.level_gap) ++cluster;
        }
        level_of[h] = std::min(cluster, opts.max_levels);
        prev = h;
        first = false;
    }
    for (size_t i = 0; i < heights.size(); ++i) levels[i] = level_of[heights[i]];
    return levels;
}

namespace {

struct TNode {
    SectionNode sec;
    std::vector<std::unique_ptr<TNode>> kids;
};

SectionNode materialize(TNode&& t) {
    SectionNode s = std::move(t.sec);
    s.children.reserve(t.kids.size());
    for (auto& k : t.kids) s.children.push_back(materialize(std::move(*k)));
    return s;
}

void fix_spans(SectionNode& s) {
    int last = s.first_page;
    for (const auto& e : s.elements) last = std::max(last, e.page_num);
    for (auto& c : s.children) {
        fix_spans(c);
        last = std::max(last, c.last_page);
    }
    s.last_page = last;
}

void index_section(const SectionNode& s, Outline& out) {
    for (size_t i = 0; i < s.elements.size(); ++i)
        out.element_index[s.elements[i].element_id] = ElementLocator{s.section_id, i};
    for (int p = s.first_page; p <= s.last_page; ++p)
        out.page_index[p].push_back(s.section_id);
    for (const auto& c : s.children) index_section(c, out);
}

}  // namespace

void rebuild_indexes(Outline& out);

void rebuild_indexes(Outline& out) {
    out.element_index.clear();
    out.page_index.clear();
    for (const auto& r : out.roots) index_section(r, out);
}

Outline build_outline(const ParsedDocument& doc, const OutlineOptions& opts) {
    Outline out;
    out.doc_id = doc.doc_id;

    struct Flat {
        const Block* block;
        int page;
    };
    std::vector<Flat> flat;
    std::vector<double> title_heights;
    for (const auto& page : doc.pages) {
        if (!page.screenshot_ref.empty()) out.page_screenshots[page.page_num] = page.screenshot_ref;
        for (const auto& b : page.blocks) {
            if (is_structural_noise(b.kind)) continue;
            flat.push_back(Flat{&b, page.page_num});
            if (b.kind == ElementKind::title) title_heights.push_back(b.title_height);
        }
    }
    std::vector<int> title_levels = cluster_title_levels(title_heights, opts);

    std::vector<std::unique_ptr<TNode>> roots;
    std::vector<TNode*> stack;
    TNode* front_matter = nullptr;
    int root_counter = 0;
    int sub_counter = 0;
    std::map<std::string, int> kind_counters;
    size_t title_i = 0;

    auto push_front_matter = [&](int page) {
        if (front_matter == nullptr) {
            auto node = std::make_unique<TNode>();
            node->sec.section_id = "0";
            node->sec.title = "(front matter)";
            node->sec.level = 1;
            node->sec.first_page = page;
            front_matter = node.get();
            roots.insert(roots.begin(), std::move(node));
        }
        stack.assign(1, front_matter);
    };

    for (const auto& f : flat) {
        const Block& b = *f.block;
        if (b.kind == ElementKind::title) {
            int level = title_levels[title_i++];
            auto node = std::make_unique<TNode>();
            node->sec.title = trim(b.text);
            node->sec.first_page = f.page;
            if (level == 1) {
                ++root_counter;
                node->sec.section_id = std::to_string(root_counter);
                node->sec.level = 1;
                stack.assign(1, node.get());
                roots.push_back(std::move(node));
            } else {
                while (!stack.empty() && stack.back()->sec.level >= level) stack.pop_back();
                if (stack.empty()) push_front_matter(f.page);
                TNode* parent = stack.back();
                sub_counter = b.title_seq > sub_counter ? b.title_seq : sub_counter + 1;
                std::string root_id = parent->sec.section_id;
                size_t dot = root_id.find('.');
                if (dot != std::string::npos) root_id = root_id.substr(0, dot);
                node->sec.section_id = root_id + "." + std::to_string(sub_counter);
                node->sec.level = parent->sec.level + 1;
                stack.push_back(node.get());
                parent->kids.push_back(std::move(node));
            }
            continue;
        }
        if (stack.empty()) push_front_matter(f.page);
        Element e;
        int n = ++kind_counters[kind_name(b.kind)];
        e.element_id = std::string(kind_name(b.kind)) + "-" + std::to_string(n);
        e.kind = b.kind;
        e.text = b.text;
        e.caption = b.caption;
        e.page_num = f.page;
        e.media_ref = b.media_ref;
        e.table_html = b.table_html;
        stack.back()->sec.elements.push_back(std::move(e));
    }

    out.roots.reserve(roots.size());
    for (auto& r : roots) out.roots.push_back(materialize(std::move(*r)));
    for (auto& r : out.roots) fix_spans(r);
    rebuild_indexes(out);
    return out;
}

namespace {

const SectionNode* find_in(const SectionNode& s, const std::string& id) {
    if (s.section_id == id) return &s;
    for (const auto& c : s.children) {
        if (const SectionNode* hit = find_in(c, id)) return hit;
    }
    return nullptr;
}

void collect(const SectionNode& s, std::vector<const SectionNode*>& out) {
    out.push_back(&s);
    for (const auto& c : s.children) collect(c, out);
}

}  // namespace

const SectionNode* find_section(const Outline& outline, const std::string& section_id) {
    for (const auto& r : outline.roots) {
        if (const SectionNode* hit = find_in(r, section_id)) return hit;
    }
    return nullptr;
}

std::vector<const SectionNode*> all_sections(const Outline& outline) {
    std::vector<const SectionNode*> out;
    for (const auto& r : outline.roots) collect(r, out);
    return out;
}

const Element* find_element(const Outline& outline, const std::string& element_id) {
    auto it = outline.element_index.find(element_id);
    if (it == outline.element_index.end()) return nullptr;
    const SectionNode* sec = find_section(outline, it->second.section_id);
    if (sec == nullptr || it->second.index >= sec->elements.size()) return nullptr;
    return &sec->elements[it->second.index];
}

namespace {

std::string effective_caption(const Element& e) {
    return e.caption.empty() ? e.generated_caption : e.caption;
}

void emit_section(const SectionNode& s, int indent, std::string& out) {
    std::string pad(static_cast<size_t>(indent), ' ');
    out += pad + "<section section_id=\"" + xml_escape(s.section_id) + "\" title=\"" +
           xml_escape(s.title) + "\" page=\"" + std::to_string(s.first_page) + "\"";
    if (s.elements.empty() && s.children.empty()) {
        out += "/>\n";
        return;
    }
    out += ">\n";
    std::string epad(static_cast<size_t>(indent + 2), ' ');
    for (const auto& e : s.elements) {
        out += epad + "<element element_id=\"" + xml_escape(e.element_id) + "\" kind=\"" +
               kind_name(e.kind) + "\" page=\"" + std::to_string(e.page_num) + "\"";
        std::string cap = effective_caption(e);
        if (!cap.empty()) out += " caption=\"" + xml_escape(cap) + "\"";
        out += "/>\n";
    }
    for (const auto& c : s.children) emit_section(c, indent + 2, out);
    out += pad + "</section>\n";
}

}  // namespace

std::string serialize_xml(const Outline& outline) {
    std::string out = "<document doc_id=\"" + xml_escape(outline.doc_id) + "\"";
    if (outline.roots.empty()) return out + "/>\n";
    out += ">\n";
    for (const auto& r : outline.roots) emit_section(r, 2, out);
    out += "</document>\n";
    return out;
}

namespace {

struct Tag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    bool self_closing = false;
};

std::string xml_unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        auto match = [&](std::string_view ent, char ch) {
            if (s.compare(i, ent.size(), ent) == 0) {
                out.push_back(ch);
                i += ent.size();
                return true;
            }
            return false;
        };
        if (match("&amp;", '&') || match("&lt;", '<') || match("&gt;", '>') ||
            match("&quot;", '"') || match("&apos;", '\''))
            continue;
        out.push_back(s[i++]);
    }
    return out;
}

struct Cursor {
    const std::string& text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n' || text[pos] == '\t' ||
                                     text[pos] == '\r'))
            ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= text.size();
    }
};

Tag read_tag(Cursor& c) {
    c.skip_ws();
    if (c.pos >= c.text.size() || c.text[c.pos] != '<')
        throw MalformedLayout("outline xml: expected a tag at offset " + std::to_string(c.pos));
    ++c.pos;
    Tag t;
    if (c.pos < c.text.size() && c.text[c.pos] == '/') {
        t.closing = true;
        ++c.pos;
    }
    while (c.pos < c.text.size() && (isalnum(static_cast<unsigned char>(c.text[c.pos])) ||
                                     c.text[c.pos] == '_'))
        t.name.push_back(c.text[c.pos++]);
    while (true) {
        c.skip_ws();
        if (c.pos >= c.text.size()) throw MalformedLayout("outline xml: unterminated tag");
        if (c.text[c.pos] == '>') {
            ++c.pos;
            return t;
        }
        if (c.text[c.pos] == '/') {
            t.self_closing = true;
            ++c.pos;
            continue;
        }
        std::string name;
        while (c.pos < c.text.size() && c.text[c.pos] != '=' && c.text[c.pos] != ' ')
            name.push_back(c.text[c.pos++]);
        if (c.pos >= c.text.size() || c.text[c.pos] != '=')
            throw MalformedLayout("outline xml: attribute " + name + " missing value");
        ++c.pos;
        if (c.pos >= c.text.size() || c.text[c.pos] != '"')
            throw MalformedLayout("outline xml: attribute " + name + " not quoted");
        ++c.pos;
        size_t start = c.pos;
        while (c.pos < c.text.size() && c.text[c.pos] != '"') ++c.pos;
        if (c.pos >= c.text.size()) throw MalformedLayout("outline xml: unterminated attribute");
        t.attrs[name] = xml_unescape(std::string_view(c.text).substr(start, c.pos - start));
        ++c.pos;
    }
}

Tag peek_tag(Cursor& c) {
    Cursor copy = c;
    return read_tag(copy);
}

int attr_int(const Tag& t, const std::string& name) {
    auto it = t.attrs.find(name);
    return it == t.attrs.end() ? 0 : std::atoi(it->second.c_str());
}

std::string attr_str(const Tag& t, const std::string& name) {
    auto it = t.attrs.find(name);
    return it == t.attrs.end() ? "" : it->second;
}

SectionNode parse_section(Cursor& c, int level) {
    Tag t = read_tag(c);
    if (t.name != "section" || t.closing)
        throw MalformedLayout("outline xml: expected <section>");
    SectionNode s;
    s.section_id = attr_str(t, "section_id");
    s.title = attr_str(t, "title");
    s.level = level;
    s.first_page = attr_int(t, "page");
    if (!t.self_closing) {
        while (true) {
            Tag next = peek_tag(c);
            if (next.closing) {
                read_tag(c);
                if (next.name != "section")
                    throw MalformedLayout("outline xml: mismatched close tag " + next.name);
                break;
            }
            if (next.name == "element") {
                Tag et = read_tag(c);
                Element e;
                e.element_id = attr_str(et, "element_id");
                if (auto k = kind_from_name(attr_str(et, "kind"))) e.kind = *k;
                e.page_num = attr_int(et, "page");
                e.caption = attr_str(et, "caption");
                s.elements.push_back(std::move(e));
            } else if (next.name == "section") {
                s.children.push_back(parse_section(c, level + 1));
            } else {
                throw MalformedLayout("outline xml: unexpected tag " + next.name);
            }
        }
    }
    fix_spans(s);
    return s;
}

}  // namespace

Outline parse_outline_xml(const std::string& xml) {
    Cursor c{xml, 0};
    Tag t = read_tag(c);
    if (t.name != "document" || t.closing)
        throw MalformedLayout("outline xml: expected <document> root");
    Outline out;
    out.doc_id = attr_str(t, "doc_id");
    if (!t.self_closing) {
        while (true) {
            Tag next = peek_tag(c);
            if (next.closing && next.name == "document") {
                read_tag(c);
                break;
            }
            out.roots.push_back(parse_section(c, 1));
        }
    }
    rebuild_indexes(out);
    return out;
}

namespace {

bool section_equal(const SectionNode& a, const SectionNode& b) {
    if (a.section_id != b.section_id || a.title != b.title || a.level != b.level ||
        a.first_page != b.first_page || a.last_page != b.last_page)
        return false;
    if (a.elements.size() != b.elements.size() || a.children.size() != b.children.size())
        return false;
    for (size_t i = 0; i < a.elements.size(); ++i) {
        const Element& x = a.elements[i];
        const Element& y = b.elements[i];
        if (x.element_id != y.element_id || x.kind != y.kind || x.page_num != y.page_num ||
            effective_caption(x) != effective_caption(y))
            return false;
    }
    for (size_t i = 0; i < a.children.size(); ++i) {
        if (!section_equal(a.children[i], b.children[i])) return false;
    }
    return true;
}

json section_to_json(const SectionNode& s) {
    json elems = json::array();
    for (const auto& e : s.elements) {
        elems.push_back({{"element_id", e.element_id},
                         {"kind", kind_name(e.kind)},
                         {"text", e.text},
                         {"caption", e.caption},
                         {"generated_caption", e.generated_caption},
                         {"page_num", e.page_num},
                         {"media_ref", e.media_ref},
                         {"table_html", e.table_html}});
    }
    json kids = json::array();
    for (const auto& c : s.children) kids.push_back(section_to_json(c));
    return {{"section_id", s.section_id}, {"title", s.title},       {"level", s.level},
            {"first_page", s.first_page}, {"last_page", s.last_page}, {"elements", elems},
            {"children", kids}};
}

SectionNode section_from_json(const json& j) {
    SectionNode s;
    s.section_id = j.value("section_id", "");
    s.title = j.value("title", "");
    s.level = j.value("level", 1);
    s.first_page = j.value("first_page", 0);
    s.last_page = j.value("last_page", 0);
    for (const auto& ej : j.value("elements", json::array())) {
        Element e;
        e.element_id = ej.value("element_id", "");
        if (auto k = kind_from_name(ej.value("kind", "paragraph"))) e.kind = *k;
        e.text = ej.value("text", "");
        e.caption = ej.value("caption", "");
        e.generated_caption = ej.value("generated_caption", "");
        e.page_num = ej.value("page_num", 0);
        e.media_ref = ej.value("media_ref", "");
        e.table_html = ej.value("table_html", "");
        s.elements.push_back(std::move(e));
    }
    for (const auto& cj : j.value("children", json::array()))
        s.children.push_back(section_from_json(cj));
    return s;
}

}  // namespace

bool outline_structurally_equal(const Outline& a, const Outline& b) {
    if (a.doc_id != b.doc_id || a.roots.size() != b.roots.size()) return false;
    for (size_t i = 0; i < a.roots.size(); ++i) {
        if (!section_equal(a.roots[i], b.roots[i])) return false;
    }
    return true;
}

std::string save_outline_index(const Outline& outline) {
    json shots = json::object();
    for (const auto& [page, ref] : outline.page_screenshots)
        shots[std::to_string(page)] = ref;
    json sections = json::array();
    for (const auto& r : outline.roots) sections.push_back(section_to_json(r));
    json root = {{"doc_id", outline.doc_id}, {"page_screenshots", shots}, {"sections", sections}};
    return root.dump(2) + "\n";
}

Outline load_outline_index(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw MalformedLayout("outline index: not a JSON object");
    Outline out;
    out.doc_id = root.value("doc_id", "");
    json shots = root.value("page_screenshots", json::object());
    for (const auto& [k, v] : shots.items())
        out.page_screenshots[std::atoi(k.c_str())] = v.get<std::string>();
    for (const auto& sj : root.value("sections", json::array()))
        out.roots.push_back(section_from_json(sj));
    rebuild_indexes(out);
    return out;
}

namespace {

void enrich_section(SectionNode& s, SummarizerClient& captioner, EnrichResult& result) {
    for (auto& e : s.elements) {
        if (!is_visual(e.kind)) continue;
        if (!e.caption.empty() || !e.generated_caption.empty()) continue;
        try {
            std::vector<std::string> media;
            if (!e.media_ref.empty()) media.push_back(e.media_ref);
            std::string caption = trim(captioner.summarize(prompts::kCaptionGoal, e.text, media));
            if (caption.empty()) {
                result.notes.push_back(e.element_id + ": captioner returned empty text");
            } else {
                e.generated_caption = caption;
                ++result.generated;
            }
        } catch (const Error& err) {
            result.notes.push_back(e.element_id + ": " + err.what());
        }
    }
    for (auto& c : s.children) enrich_section(c, captioner, result);
}

}  // namespace

EnrichResult enrich_captions(const Outline& outline, SummarizerClient& captioner) {
    EnrichResult result;
    result.outline = outline;
    for (auto& r : result.outline.roots) enrich_section(r, captioner, result);
    rebuild_indexes(result.outline);
    return result;
}

}  // namespace docqa
