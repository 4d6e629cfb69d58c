#pragma once

#include <map>
#include <string>
#include <vector>

#include "docqa/document.hpp"

namespace docqa {

class SummarizerClient;

struct Element {
    std::string element_id;  // per-kind counter, e.g. "table-5"
    ElementKind kind = ElementKind::paragraph;
    std::string text;
    std::string caption;
    std::string generated_caption;
    int page_num = 0;
    std::string media_ref;
    std::string table_html;
};

struct SectionNode {
    std::string section_id;  // "3", "3.19"; the first component names the root
    std::string title;
    int level = 1;
    int first_page = 0;
    int last_page = 0;
    std::vector<Element> elements;
    std::vector<SectionNode> children;
};

struct ElementLocator {
    std::string section_id;
    size_t index = 0;  // position in that section's element list
};

struct Outline {
    std::string doc_id;
    std::vector<SectionNode> roots;
    std::map<std::string, ElementLocator> element_index;
    std::map<int, std::vector<std::string>> page_index;
    std::map<int, std::string> page_screenshots;
};

struct OutlineOptions {
    int max_levels = 4;
    double level_gap = 0.15;  // relative height drop that opens a new level
};

/// Builds the hierarchical outline. Total: degenerate inputs yield at most the
/// synthetic front-matter root "0"; header/footer/page_number blocks are dropped.
Outline build_outline(const ParsedDocument& doc, const OutlineOptions& opts = {});

/// Clusters title glyph heights into levels; exposed for direct testing.
/// Returns one level (1-based, capped at max_levels) per input height.
std::vector<int> cluster_title_levels(const std::vector<double>& heights,
                                      const OutlineOptions& opts = {});

const SectionNode* find_section(const Outline& outline, const std::string& section_id);

std::vector<const SectionNode*> all_sections(const Outline& outline);

const Element* find_element(const Outline& outline, const std::string& element_id);

/// Nested XML with section/element stubs; deterministic bytes.
std::string serialize_xml(const Outline& outline);

/// Parses serialize_xml output back into a structural outline (element text
/// bodies are not carried by the XML and come back empty).
Outline parse_outline_xml(const std::string& xml);

/// Equality over everything the XML carries: the section tree and element stubs.
bool outline_structurally_equal(const Outline& a, const Outline& b);

/// Full-fidelity JSON sidecar, round-trips the complete outline.
std::string save_outline_index(const Outline& outline);
Outline load_outline_index(const std::string& json_text);

struct EnrichResult {
    Outline outline;
    int generated = 0;
    std::vector<std::string> notes;  // per-element failure notes
};

/// Generates captions for image/chart elements that have none. Existing
/// captions are never touched; reruns are no-ops for enriched elements.
EnrichResult enrich_captions(const Outline& outline, SummarizerClient& captioner);

}  // namespace docqa
