#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace docqa {

/// The fixed 17-kind content taxonomy blocks are classified into.
enum class ElementKind {
    title,
    paragraph,
    list,
    table,
    table_caption,
    table_footnote,
    image,
    image_caption,
    image_footnote,
    chart,
    formula,
    code,
    footnote,
    header,
    footer,
    page_number,
    toc_entry,
};

inline constexpr size_t kElementKindCount = 17;

/// Canonical snake_case name ("table_caption").
const char* kind_name(ElementKind k);

/// Observation-facing label ("Paragraph", "HTML_Table", "TableCaption").
const char* kind_display_name(ElementKind k);

/// Maps an upstream layout label onto the taxonomy. A "discarded/" prefix is
/// stripped first; labels with no mapping fall back to paragraph.
ElementKind kind_from_label(std::string_view label);

/// Attempts the inverse of kind_name.
std::optional<ElementKind> kind_from_name(std::string_view name);

/// Headers, footers and page numbers carry no content and never reach outlines.
bool is_structural_noise(ElementKind k);

bool is_visual(ElementKind k);

struct BBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct Block {
    ElementKind kind = ElementKind::paragraph;
    std::string text;
    BBox bbox;
    double title_height = 0.0;  // rendered glyph height; titles only
    int title_seq = 0;          // optional pinned subsection ordinal (subset inputs)
    std::string media_ref;      // visual kinds only
    std::string table_html;
    std::string caption;        // caption carried inline on a table/image block
};

struct PageLayout {
    int page_num = 0;  // 1-based
    double width_px = 0;
    double height_px = 0;
    std::vector<Block> blocks;  // reading order
    std::string screenshot_ref;
};

struct ParsedDocument {
    std::string doc_id;
    std::vector<PageLayout> pages;  // page_num strictly increasing
    std::string source_path;

    size_t block_count() const {
        size_t n = 0;
        for (const auto& p : pages) n += p.blocks.size();
        return n;
    }
};

/// Reads a layout file into a ParsedDocument. The only format currently
/// recognized is "mineru_json"; docs/formats.md describes the accepted shape.
ParsedDocument ingest_parsed(const std::string& path, const std::string& format = "mineru_json");

/// Same adapter over an in-memory JSON string.
ParsedDocument ingest_mineru_json(const std::string& doc_id, const std::string& json_text,
                                  const std::string& source_path = "");

}  // namespace docqa
