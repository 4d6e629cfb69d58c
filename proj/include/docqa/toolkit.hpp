#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docqa/outline.hpp"

namespace docqa {

class SummarizerClient;

struct MatchSpan {
    size_t start = 0;
    size_t len = 0;
};

struct SearchHit {
    std::string item_type;  // display label, e.g. "Paragraph", "HTML_Table"
    std::string section_id;
    int page_num = 0;
    std::string snippet;
    std::vector<MatchSpan> match_spans;  // offsets into the normalized element text
    std::string element_id;
    bool clipped_front = false;  // snippet starts after the text begins
    bool clipped_back = false;   // snippet ends before the text ends
};

struct ReadResult {
    std::string evidence;
    std::string summary;
    std::vector<std::string> sections_read;
    std::string goal;
    std::vector<std::string> unknown_ids;
};

struct ToolCall {
    std::string name;
    nlohmann::json arguments;
};

struct ToolResult {
    std::string rendered;  // fed back to the agent as the observation
    bool ok = false;
    std::string error_note;
};

struct ToolkitConfig {
    int window = 300;  // snippet chars kept on each side of a match
    int hit_cap = 50;  // hits rendered per search observation
};

/// Byte-exact JSON schema documents for the two tools.
const std::string& search_schema();
const std::string& read_schema();
std::vector<std::string> tool_schemas();

/// Both schemas as one JSON array, the form attached to policy requests.
std::string tools_json();

/// Validates arguments against the named tool's schema.
/// Returns an empty string when valid, else a human-readable problem.
std::string validate_tool_args(const std::string& name, const nlohmann::json& args);

/// Case-insensitive OR search over element text, table markup and captions.
/// One hit per cluster of overlapping match windows; ordered by (page,
/// section, element). Throws EmptyKeywords when no usable keyword remains.
std::vector<SearchHit> search(const Outline& outline, const std::vector<std::string>& keywords,
                              int window = 300);

/// Goal-directed reading of whole sections. Unknown ids are reported in
/// unknown_ids while known ones are still processed; throws UnknownSectionId
/// only when nothing resolves.
ReadResult read(const Outline& outline, const std::vector<std::string>& section_ids,
                const std::string& goal, SummarizerClient& summarizer);

std::string render_search_observation(const std::vector<std::string>& keywords,
                                      const std::vector<SearchHit>& hits, int hit_cap = 50);

std::string render_read_observation(const ReadResult& result);

/// Routes a parsed tool call to search/read; never throws, failures come back
/// as corrective observations the agent can react to.
class Toolkit {
public:
    Toolkit(const Outline& outline, SummarizerClient& summarizer, ToolkitConfig config = {})
        : outline_(outline), summarizer_(summarizer), config_(config) {}

    ToolResult dispatch(const ToolCall& call) const;

    const Outline& outline() const { return outline_; }
    const ToolkitConfig& config() const { return config_; }

private:
    const Outline& outline_;
    SummarizerClient& summarizer_;
    ToolkitConfig config_;
};

/// Orders dotted section ids numerically per segment ("8.9" before "8.20").
bool section_id_less(const std::string& a, const std::string& b);

}  // namespace docqa
