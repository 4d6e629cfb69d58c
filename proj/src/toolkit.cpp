#include "docqa/toolkit.hpp"

#include <algorithm>
#include <set>

#include "docqa/clients.hpp"
#include "docqa/errors.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

namespace {

const std::string kSearchSchema = R"SCHEMA({
    "type": "function",
    "function": {
        "name": "search",
        "description": "Find and extract all paragraphs and sections where any of the provided search terms appear",
        "parameters": {
            "type": "object",
            "properties": {
                "keywords": {
                    "type": "array",
                    "items": {
                        "type": "string"
                    },
                    "description": "A list of query keywords for searching"
                }
            },
            "required": ["keywords"]
        }
    }
})SCHEMA";

const std::string kReadSchema = R"SCHEMA({
    "type": "function",
    "function": {
        "name": "read",
        "description": "Read multiple sections by section IDs and extract useful information from all content contained in those sections, including both visual elements and textual elements.",
        "parameters": {
            "type": "object",
            "properties": {
                "section_ids": {
                    "type": "array",
                    "items": {
                        "type": "string"
                    },
                    "description": "A list of section IDs to read from the document"
                },
                "goal": {
                    "type": "string",
                    "description": "The user goal that guides what useful information should be extracted from the selected sections"
                }
            },
            "required": ["section_ids", "goal"]
        }
    }
})SCHEMA";

}  // namespace

const std::string& search_schema() {
    return kSearchSchema;
}

const std::string& read_schema() {
    return kReadSchema;
}

std::vector<std::string> tool_schemas() {
    return {kSearchSchema, kReadSchema};
}

std::string tools_json() {
    return "[\n" + kSearchSchema + ",\n" + kReadSchema + "\n]";
}

std::string validate_tool_args(const std::string& name, const json& args) {
    if (!args.is_object()) return "arguments must be a JSON object";
    auto require_string_array = [&](const char* field) -> std::string {
        if (!args.contains(field))
            return std::string("missing required field `") + field + "`";
        if (!args[field].is_array())
            return std::string("field `") + field + "` must be an array of strings";
        for (const auto& item : args[field]) {
            if (!item.is_string())
                return std::string("field `") + field + "` must contain only strings";
        }
        return "";
    };
    if (name == "search") return require_string_array("keywords");
    if (name == "read") {
        std::string problem = require_string_array("section_ids");
        if (!problem.empty()) return problem;
        if (!args.contains("goal")) return "missing required field `goal`";
        if (!args["goal"].is_string()) return "field `goal` must be a string";
        return "";
    }
    return "unknown tool name";
}

bool section_id_less(const std::string& a, const std::string& b) {
    std::vector<std::string> sa = split(a, '.');
    std::vector<std::string> sb = split(b, '.');
    for (size_t i = 0; i < std::min(sa.size(), sb.size()); ++i) {
        long na = std::atol(sa[i].c_str());
        long nb = std::atol(sb[i].c_str());
        if (na != nb) return na < nb;
        if (sa[i] != sb[i]) return sa[i] < sb[i];
    }
    return sa.size() < sb.size();
}

namespace {

std::string searchable_text(const Element& e) {
    std::string buf = e.text;
    auto add = [&](const std::string& part) {
        if (part.empty()) return;
        if (!buf.empty()) buf += "\n";
        buf += part;
    };
    add(e.table_html);
    add(e.caption);
    add(e.generated_caption);
    return normalize_ws(buf);
}

std::string format_page(int page) {
    return std::to_string(page) + ".0";
}

struct SectionOrder {
    int page;
    std::string section_id;
    size_t element_pos;
};

}  // namespace

std::vector<SearchHit> search(const Outline& outline, const std::vector<std::string>& keywords,
                              int window) {
    std::vector<std::string> terms;
    size_t max_kw = 0;
    for (const auto& k : keywords) {
        std::string t = trim(k);
        if (t.empty()) continue;
        terms.push_back(t);
        max_kw = std::max(max_kw, t.size());
    }
    if (terms.empty()) throw EmptyKeywords("search requires at least one non-blank keyword");

    struct Scored {
        SearchHit hit;
        SectionOrder order;
    };
    std::vector<Scored> scored;

    size_t elem_pos = 0;
    for (const SectionNode* sec : all_sections(outline)) {
        for (const Element& e : sec->elements) {
            ++elem_pos;
            std::string text = searchable_text(e);
            if (text.empty()) continue;
            std::vector<MatchSpan> matches;
            for (const auto& term : terms) {
                for (size_t pos : find_all_ci(text, term))
                    matches.push_back(MatchSpan{pos, term.size()});
            }
            if (matches.empty()) continue;
            std::sort(matches.begin(), matches.end(), [](const MatchSpan& a, const MatchSpan& b) {
                return a.start != b.start ? a.start < b.start : a.len < b.len;
            });

            size_t w = static_cast<size_t>(window);
            size_t i = 0;
            while (i < matches.size()) {
                size_t j = i;
                size_t cluster_end = matches[i].start + matches[i].len;
                while (j + 1 < matches.size() && matches[j + 1].start <= cluster_end + 2 * w) {
                    ++j;
                    cluster_end = std::max(cluster_end, matches[j].start + matches[j].len);
                }
                const MatchSpan& first = matches[i];
                size_t snip_begin = first.start >= w ? first.start - w : 0;
                size_t snip_end = std::min(text.size(), first.start + first.len + w);

                SearchHit hit;
                hit.item_type = kind_display_name(e.kind);
                hit.section_id = sec->section_id;
                hit.page_num = e.page_num;
                hit.snippet = text.substr(snip_begin, snip_end - snip_begin);
                hit.match_spans.assign(matches.begin() + static_cast<long>(i),
                                       matches.begin() + static_cast<long>(j) + 1);
                hit.element_id = e.element_id;
                hit.clipped_front = snip_begin > 0;
                hit.clipped_back = snip_end < text.size();
                scored.push_back(Scored{std::move(hit),
                                        SectionOrder{e.page_num, sec->section_id, elem_pos}});
                i = j + 1;
            }
        }
    }

    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.order.page != b.order.page) return a.order.page < b.order.page;
        if (a.order.section_id != b.order.section_id)
            return section_id_less(a.order.section_id, b.order.section_id);
        return a.order.element_pos < b.order.element_pos;
    });

    std::vector<SearchHit> hits;
    hits.reserve(scored.size());
    for (auto& s : scored) hits.push_back(std::move(s.hit));
    return hits;
}

std::string render_search_observation(const std::vector<std::string>& keywords,
                                      const std::vector<SearchHit>& hits, int hit_cap) {
    std::vector<std::string> shown;
    for (const auto& k : keywords) {
        std::string t = trim(k);
        if (!t.empty()) shown.push_back("`" + t + "`");
    }
    std::string out = "A Document search for " + join(shown, ", ") + " found " +
                      std::to_string(hits.size()) +
                      (hits.size() == 1 ? " result:" : " results:");
    size_t limit = std::min(hits.size(), static_cast<size_t>(std::max(0, hit_cap)));
    for (size_t i = 0; i < limit; ++i) {
        const SearchHit& h = hits[i];
        out += "\n<Item type=\"" + h.item_type + "\"";
        if (h.item_type == std::string(kind_display_name(ElementKind::table))) {
            std::string num = h.element_id;
            size_t dash = num.find_last_of('-');
            if (dash != std::string::npos) num = num.substr(dash + 1);
            out += " table_id=\"" + num + "\"";
        }
        out += " section_id=\"" + h.section_id + "\" page_num=\"" + format_page(h.page_num) +
               "\">\n";
        if (h.clipped_front) out += "... ";
        out += h.snippet;
        if (h.clipped_back) out += " ...";
        out += "\n</Item>";
    }
    if (hits.size() > limit)
        out += "\n(only the first " + std::to_string(limit) + " of " +
               std::to_string(hits.size()) + " results are shown)";
    return out;
}

namespace {

void render_caption_line(const Element& e, std::vector<std::string>& lines) {
    if (!e.caption.empty())
        lines.push_back("Caption: " + normalize_ws(e.caption));
    else if (!e.generated_caption.empty())
        lines.push_back("Caption: " + normalize_ws(e.generated_caption));
}

void render_element(const Element& e, std::vector<std::string>& lines,
                    std::vector<std::string>& media) {
    switch (e.kind) {
        case ElementKind::paragraph:
            lines.push_back("Paragraph: " + normalize_ws(e.text));
            break;
        case ElementKind::list:
            lines.push_back("List: " + normalize_ws(e.text));
            break;
        case ElementKind::table:
            lines.push_back("<HTML_Table>");
            lines.push_back(e.table_html.empty() ? normalize_ws(e.text) : e.table_html);
            lines.push_back("</HTML_Table>");
            render_caption_line(e, lines);
            break;
        case ElementKind::table_caption:
        case ElementKind::image_caption:
            lines.push_back("Caption: " + normalize_ws(e.text));
            break;
        case ElementKind::table_footnote:
        case ElementKind::image_footnote:
        case ElementKind::footnote:
            lines.push_back("Footnote: " + normalize_ws(e.text));
            break;
        case ElementKind::image:
        case ElementKind::chart: {
            std::string label = e.kind == ElementKind::chart ? "Chart" : "Image";
            lines.push_back(label + ": " + (e.media_ref.empty() ? "(no file)" : e.media_ref));
            render_caption_line(e, lines);
            if (!e.media_ref.empty()) media.push_back(e.media_ref);
            break;
        }
        case ElementKind::formula:
            lines.push_back("Formula: " + normalize_ws(e.text));
            break;
        case ElementKind::code:
            lines.push_back("Code: " + e.text);
            break;
        case ElementKind::toc_entry:
            lines.push_back("TocEntry: " + normalize_ws(e.text));
            break;
        case ElementKind::title:
            lines.push_back("Heading: " + normalize_ws(e.text));
            break;
        default:
            break;
    }
}

}  // namespace

ReadResult read(const Outline& outline, const std::vector<std::string>& section_ids,
                const std::string& goal, SummarizerClient& summarizer) {
    ReadResult result;
    result.goal = goal;

    std::vector<const SectionNode*> sections;
    std::set<std::string> seen;
    for (const auto& id : section_ids) {
        std::string sid = trim(id);
        if (sid.empty() || seen.count(sid)) continue;
        seen.insert(sid);
        const SectionNode* sec = find_section(outline, sid);
        if (sec == nullptr)
            result.unknown_ids.push_back(sid);
        else {
            sections.push_back(sec);
            result.sections_read.push_back(sid);
        }
    }
    if (sections.empty())
        throw UnknownSectionId("no requested section id resolves: " +
                               (section_ids.empty() ? "(empty request)"
                                                    : join(result.unknown_ids, ", ")));

    std::vector<std::string> lines;
    std::vector<std::string> media;
    std::set<int> pages;
    for (const SectionNode* sec : sections) {
        if (!sec->title.empty()) lines.push_back("Heading: " + normalize_ws(sec->title));
        for (const Element& e : sec->elements) render_element(e, lines, media);
        for (int p = sec->first_page; p <= sec->last_page; ++p) pages.insert(p);
    }
    for (int p : pages) {
        auto it = outline.page_screenshots.find(p);
        if (it != outline.page_screenshots.end()) media.push_back(it->second);
    }
    result.evidence = join(lines, "\n");

    try {
        std::string bundle = result.evidence;
        if (!media.empty() && !summarizer.supports_media())
            bundle += "\nMedia files:\n" + join(media, "\n");
        result.summary = trim(summarizer.summarize(goal, bundle, media));
        if (result.summary.empty()) result.summary = "(summarizer returned no text)";
    } catch (const Error& e) {
        result.summary = std::string("(summary unavailable: ") + e.what() + ")";
    }
    return result;
}

std::string render_read_observation(const ReadResult& result) {
    std::string out = "The useful information from the document section (section_id=" +
                      join(result.sections_read, ",") + ") for user goal `" + result.goal +
                      "` is as follows:\nEvidence in document:\n" + result.evidence +
                      "\nSummary:\n" + result.summary;
    if (!result.unknown_ids.empty())
        out += "\nNote: these section ids do not exist and were skipped: " +
               join(result.unknown_ids, ", ");
    return out;
}

ToolResult Toolkit::dispatch(const ToolCall& call) const {
    ToolResult result;
    if (call.name != "search" && call.name != "read") {
        result.ok = false;
        result.error_note = "unknown tool";
        result.rendered = "Unknown tool `" + call.name +
                          "`. The available tools are `search` and `read`.";
        return result;
    }
    std::string problem = validate_tool_args(call.name, call.arguments);
    if (!problem.empty()) {
        result.ok = false;
        result.error_note = problem;
        result.rendered =
            "Invalid arguments for tool `" + call.name + "`: " + problem + ".";
        return result;
    }
    if (call.name == "search") {
        std::vector<std::string> keywords;
        for (const auto& k : call.arguments["keywords"]) keywords.push_back(k.get<std::string>());
        try {
            std::vector<SearchHit> hits = search(outline_, keywords, config_.window);
            result.ok = true;
            result.rendered = render_search_observation(keywords, hits, config_.hit_cap);
        } catch (const EmptyKeywords& e) {
            result.ok = false;
            result.error_note = e.what();
            result.rendered = std::string("Search failed: ") + e.what() + ".";
        }
        return result;
    }
    std::vector<std::string> ids;
    for (const auto& s : call.arguments["section_ids"]) ids.push_back(s.get<std::string>());
    std::string goal = call.arguments["goal"].get<std::string>();
    if (trim(goal).empty()) {
        result.ok = false;
        result.error_note = "empty goal";
        result.rendered = "Invalid arguments for tool `read`: field `goal` must not be empty.";
        return result;
    }
    try {
        ReadResult rr = read(outline_, ids, goal, summarizer_);
        result.ok = true;
        result.rendered = render_read_observation(rr);
        if (!rr.unknown_ids.empty()) result.error_note = "unknown ids: " + join(rr.unknown_ids, ", ");
    } catch (const UnknownSectionId& e) {
        result.ok = false;
        result.error_note = e.what();
        result.rendered = std::string("Read failed: ") + e.what() +
                          ". Use section_id values that appear in the document outline.";
    }
    return result;
}

}  // namespace docqa
