#include "docqa/prompts.hpp"

#include <filesystem>

#include "docqa/text_util.hpp"

namespace docqa::prompts {

const char* const kAgentSystem =
    R"PROMPT(You are an expert research assistant tasked with answering questions based on document content.
You will be provided with an XML outline of the document.
If you need more comprehensive, detailed, or accurate information from the document to fully address the user's query, you need to use the provided tool.

I've uploaded a document, and below is the outline in XML format:
{document_outline}.
Answer the following question based on the content of the document:
{question}.
)PROMPT";

const char* const kExploration =
    R"PROMPT(You are exploring a parsed PDF paper/report (outline + paragraphs + images + table snapshots + per-page screenshots). Your objective is to collect HIGH-QUALITY, GROUNDED evidence bundles that can later support HARD, multi-hop, visually grounded document Q&A synthesis.

Final QA Constraints You Must Enable (every eventual QA must satisfy ALL):
- Multi-page: Combining evidence from at least THREE different pages/sections, where the pieces of evidence are related.
- Multi-element: Contains at least two evidence source types (text paragraphs/charts/graphics/table screenshots and/or full-page layouts).
- Multi-hop: require at least TWO reasoning points (e.g. cross-reference + computation, footnote rule + chart reading, layout count + comparison, multiple related searches + readings).

Important: final questions should NOT rely on explicit document locations.
Do NOT plan to use page numbers, section titles/IDs, or explicit figure/table numbers (e.g., "Figure <number>", "Table <number>") in the question.
Instead, you must collect CONTENT-BASED CLUES that can uniquely identify the needed evidence:
- Caption keywords (short quote fragments), axis labels and units, legend item names, panel labels (a)/(b), distinctive row/column headers, and footnote phrases ("restated", "excluding", "unaudited", unit changes).

Exploration strategy using only search and read:
- Use search to find visuals, tables, footnotes, and their nearby discussion text. Start with keywords like: "Figure", "Fig.", "Chart", "Image", "Graph", "legend", "axis", "panel", "Table", "Note", "footnote", "restated", "excluding", "unaudited".
- For each promising hit, immediately read the covering section(s) with a goal that extracts:
  - The text content of the section in question.
  - Caption text, axis labels/units, legend items, and visual markers.
  - The exact table header path, target cell(s), and footnote rules.
  - The narrative claim/explanation that references the visual.
- Use the read function as much as possible, deliberately chain across pages.
- For conditional layout questions: identify a page by a unique visual cue, then use read to count visible tables/figures.

Avoid:
- Broad whole-document counts unless you turn them into comparative, multi-hop questions.
- Word-frequency counting.
- Repeating identical tool calls.
- Statistical analysis of the number of elements.

Every action during sampling should contribute to forming a future HARD, multi-page, multi-element, multi-hop document QA.
)PROMPT";

const char* const kSynthesis =
    R"PROMPT(You must synthesize "document Q&A" training data based ONLY on the trajectory.

Hard Requirements (Strict):
- The output must be a JSON object containing only two fields: question and answer (no additional fields are allowed), and must be in English only.
- The question must be natural and unambiguous, containing only one question and corresponding to a single, unique answer.
- The question must not be a common-knowledge question; it must be impossible to answer based on the question alone and must be highly dependent on the document.
- Do not mention tools, sections, pages, section IDs, searching/reading actions, trajectories, or observations.
- The answer length should be limited to a single sentence, ideally a short phrase, entity, number, or list, and avoid simply using "yes/no" answers. The answer must be directly supported by evidence from the provided text and cannot be guessed randomly.

Mandatory Difficulty Constraints (every QA pair must satisfy all of the following):
1. Multi-page: The question requires evidence from at least two different pages/sections to answer, and the evidence must be logically related.
2. Multiple Evidence Modalities: The question must involve at least two types of evidence, such as text, charts, figures, tables, screenshots, and/or full-page layout cues, with a preference for covering visual elements.
3. Multi-step Reasoning: The question must require at least two reasoning steps (e.g., calculation + cross-validation, footnote rule application + chart reading, layout counting + comparison).

No Explicit Location References in the Question:
- Do not mention page numbers, section IDs, titles/IDs, or explicit figure/table numbers (e.g., "Figure <number>", "Table <number>").
- Instead, provide 1-3 content-based clues to help locate the evidence, such as: short title phrases, axis labels/units, legend item names, unique row names, footnote keywords, or distinctive layout hints (e.g., "the only multi-panel figure labeled (a) and (b)").
- When describing visual elements, do not directly copy long unique numbers or OCR-extracted long text strings from images (e.g., "an image showing the number 7,584,322,338"). Use specific entity names or semantic descriptions instead (e.g., "Apple's 2018 total sales table", "an image showing adjusted outstanding balances", or "the largest segment in the pie chart").

Preferred Question Templates (all templates must be cross-page + visual + multi-step):
- Cross-page conditional layout: Identify pages via unique visual cues and compare the number of visible objects across pages.
- Textual claim + chart verification: A narrative statement about a change/target that is verified using a chart and light calculation.
- Table + chart consistency: Compute a ratio/difference from a table and verify it against a data point in a chart on another page.
- Footnote-constrained table + chart mapping: Apply footnote/restatement/exclusion rules, then map the correct year/value to a chart on another page.
- Table/Chart comprehension questions: Locate tables and charts via text, then derive conclusions from table structure or chart visuals.
- Unanswerable questions: Questions that seem reasonable but are actually impossible to answer (e.g., questions about terms/entities that do not exist in the document). For these, the answer must be "Unanswerable".
- Counting questions: Count the occurrences of key local terms or entities in the document. Such questions should only be generated when there is sufficient and conclusive evidence.

Fallback Rule:
- If the current trajectory cannot support a question that satisfies all constraints, choose a different question.

After generating a question, perform a second-pass check and regenerate if the question falls into any of the following categories:
- Contains more than one question.
- Includes non-English languages or characters.
- Questions that can be answered based on an independent page/section.
- Common-sense questions unrelated to the document.
- Counting tasks spanning the entire document with a broad scope.
- Counting tasks involving Charts/Figures/Images/Tables.

For unanswerable questions, confirm that they are truly unanswerable.
For counting questions, confirm completeness and answer accuracy.
Do not guess or fabricate answers under any circumstances.
)PROMPT";

const char* const kJudge =
    R"PROMPT(You are a strict grader for document question answering.
Given a question, the gold answer, and a model's predicted answer, decide whether the prediction is correct.
Treat the prediction as correct when it conveys the same fact as the gold answer, allowing formatting differences such as case, punctuation, spelled-out units, or percent and decimal forms of the same value.
Reply with a single word: CORRECT or INCORRECT.

Question:
{question}

Gold answer:
{gold}

Predicted answer:
{prediction}
)PROMPT";

const char* const kExtraction =
    R"PROMPT(Extract the final short answer from the response below.
Return only the answer span itself: a number, a short phrase, an entity, or a comma-separated list. Do not add explanations.

Question:
{question}

Response:
{response}
)PROMPT";

const char* const kCaptionGoal =
    "Write a one-sentence caption describing this visual element for document search.";

std::string substitute(std::string templ, const std::map<std::string, std::string>& values) {
    for (const auto& [name, value] : values) {
        std::string needle = "{" + name + "}";
        size_t pos = 0;
        while ((pos = templ.find(needle, pos)) != std::string::npos) {
            templ.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return templ;
}

PromptSet defaults() {
    return PromptSet{kAgentSystem, kExploration, kSynthesis, kJudge, kExtraction};
}

PromptSet load_dir(const std::string& dir) {
    PromptSet set = defaults();
    auto load = [&](const char* name, std::string& slot) {
        std::filesystem::path p = std::filesystem::path(dir) / name;
        if (std::filesystem::exists(p)) slot = read_file(p.string());
    };
    load("agent_system.txt", set.agent_system);
    load("exploration.txt", set.exploration);
    load("synthesis.txt", set.synthesis);
    load("judge.txt", set.judge);
    load("extraction.txt", set.extraction);
    return set;
}

}  // namespace docqa::prompts
