#include "docqa/document.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "docqa/errors.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

namespace {

constexpr double kDefaultPageWidth = 1224.0;
constexpr double kDefaultPageHeight = 1584.0;

struct KindNames {
    ElementKind kind;
    const char* snake;
    const char* display;
};

constexpr std::array<KindNames, kElementKindCount> kKindNames{{
    {ElementKind::title, "title", "Title"},
    {ElementKind::paragraph, "paragraph", "Paragraph"},
    {ElementKind::list, "list", "List"},
    {ElementKind::table, "table", "HTML_Table"},
    {ElementKind::table_caption, "table_caption", "TableCaption"},
    {ElementKind::table_footnote, "table_footnote", "TableFootnote"},
    {ElementKind::image, "image", "Image"},
    {ElementKind::image_caption, "image_caption", "ImageCaption"},
    {ElementKind::image_footnote, "image_footnote", "ImageFootnote"},
    {ElementKind::chart, "chart", "Chart"},
    {ElementKind::formula, "formula", "Formula"},
    {ElementKind::code, "code", "Code"},
    {ElementKind::footnote, "footnote", "Footnote"},
    {ElementKind::header, "header", "Header"},
    {ElementKind::footer, "footer", "Footer"},
    {ElementKind::page_number, "page_number", "PageNumber"},
    {ElementKind::toc_entry, "toc_entry", "TocEntry"},
}};

const KindNames& entry(ElementKind k) {
    return kKindNames[static_cast<size_t>(k)];
}

}  // namespace

const char* kind_name(ElementKind k) {
    return entry(k).snake;
}

const char* kind_display_name(ElementKind k) {
    return entry(k).display;
}

std::optional<ElementKind> kind_from_name(std::string_view name) {
    for (const auto& e : kKindNames) {
        if (name == e.snake) return e.kind;
    }
    return std::nullopt;
}

ElementKind kind_from_label(std::string_view label) {
    std::string l = to_lower(trim(label));
    constexpr std::string_view discarded = "discarded/";
    if (l.rfind(discarded, 0) == 0) l = l.substr(discarded.size());

    if (auto k = kind_from_name(l)) return *k;
    if (l == "text" || l == "plain_text") return ElementKind::paragraph;
    if (l == "figure" || l == "img") return ElementKind::image;
    if (l == "figure_caption") return ElementKind::image_caption;
    if (l == "figure_footnote") return ElementKind::image_footnote;
    if (l == "equation" || l == "interline_equation" || l == "inline_equation")
        return ElementKind::formula;
    if (l == "code_block" || l == "algorithm") return ElementKind::code;
    if (l == "page_footnote") return ElementKind::footnote;
    if (l == "page_header") return ElementKind::header;
    if (l == "page_footer") return ElementKind::footer;
    if (l == "page_no") return ElementKind::page_number;
    if (l == "toc" || l == "catalog" || l == "table_of_contents") return ElementKind::toc_entry;
    return ElementKind::paragraph;
}

bool is_structural_noise(ElementKind k) {
    return k == ElementKind::header || k == ElementKind::footer || k == ElementKind::page_number;
}

bool is_visual(ElementKind k) {
    return k == ElementKind::image || k == ElementKind::chart;
}

namespace {

std::string join_caption(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::vector<std::string> parts;
        for (const auto& item : v) {
            if (item.is_string() && !item.get<std::string>().empty())
                parts.push_back(item.get<std::string>());
        }
        return join(parts, "\n");
    }
    return "";
}

BBox parse_bbox(const json& blk, size_t idx) {
    if (!blk.contains("bbox") || !blk["bbox"].is_array() || blk["bbox"].size() < 4)
        throw MalformedLayout("block " + std::to_string(idx) + " missing bbox");
    const json& b = blk["bbox"];
    for (int i = 0; i < 4; ++i) {
        if (!b[static_cast<size_t>(i)].is_number())
            throw MalformedLayout("block " + std::to_string(idx) + " has non-numeric bbox");
    }
    return BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
}

int parse_page_num(const json& blk, size_t idx) {
    if (blk.contains("page_idx") && blk["page_idx"].is_number_integer())
        return blk["page_idx"].get<int>() + 1;
    if (blk.contains("page_num") && blk["page_num"].is_number_integer())
        return blk["page_num"].get<int>();
    throw MalformedLayout("block " + std::to_string(idx) + " missing page number");
}

std::string stem_of(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    constexpr std::string_view suffix = ".mineru.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        return name.substr(0, name.size() - suffix.size());
    size_t dot = name.find_last_of('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

ParsedDocument ingest_mineru_json(const std::string& doc_id, const std::string& json_text,
                                  const std::string& source_path) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded()) throw MalformedLayout("layout file is not valid JSON");
    if (!root.is_array()) throw MalformedLayout("expected a top-level JSON array of blocks");

    struct PageAccum {
        double w = kDefaultPageWidth;
        double h = kDefaultPageHeight;
        std::vector<Block> blocks;
        std::string screenshot;
    };
    std::map<int, PageAccum> pages;

    size_t idx = 0;
    for (const auto& blk : root) {
        if (!blk.is_object())
            throw MalformedLayout("block " + std::to_string(idx) + " is not an object");
        int page = parse_page_num(blk, idx);
        if (page < 1)
            throw MalformedLayout("block " + std::to_string(idx) + " has page number < 1");
        BBox bbox = parse_bbox(blk, idx);

        Block b;
        b.bbox = bbox;
        std::string label = blk.value("type", "text");
        b.kind = kind_from_label(label);
        if (b.kind == ElementKind::paragraph && blk.value("text_level", 0) >= 1)
            b.kind = ElementKind::title;
        b.text = blk.value("text", "");
        if (b.kind == ElementKind::title) {
            b.title_height =
                blk.contains("title_height") && blk["title_height"].is_number()
                    ? blk["title_height"].get<double>()
                    : bbox.y1 - bbox.y0;
            b.title_seq = blk.value("title_seq", 0);
        }
        if (blk.contains("img_path")) b.media_ref = blk.value("img_path", "");
        if (blk.contains("table_body")) b.table_html = blk.value("table_body", "");
        if (blk.contains("table_caption")) b.caption = join_caption(blk["table_caption"]);
        if (blk.contains("img_caption")) b.caption = join_caption(blk["img_caption"]);

        auto& acc = pages[page];
        if (blk.contains("page_size") && blk["page_size"].is_array() &&
            blk["page_size"].size() >= 2) {
            acc.w = blk["page_size"][0].get<double>();
            acc.h = blk["page_size"][1].get<double>();
        }
        if (blk.contains("page_screenshot") && blk["page_screenshot"].is_string())
            acc.screenshot = blk["page_screenshot"].get<std::string>();
        acc.blocks.push_back(std::move(b));
        ++idx;
    }

    ParsedDocument doc;
    doc.doc_id = doc_id;
    doc.source_path = source_path;
    doc.pages.reserve(pages.size());
    for (auto& [num, acc] : pages) {
        PageLayout p;
        p.page_num = num;
        p.width_px = acc.w;
        p.height_px = acc.h;
        p.blocks = std::move(acc.blocks);
        p.screenshot_ref = std::move(acc.screenshot);
        doc.pages.push_back(std::move(p));
    }
    return doc;
}

ParsedDocument ingest_parsed(const std::string& path, const std::string& format) {
    if (format != "mineru_json")
        throw MalformedLayout("unrecognized layout format: " + format);
    std::string text = read_file(path);
    return ingest_mineru_json(stem_of(path), text, path);
}

}  // namespace docqa
