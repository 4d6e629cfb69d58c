#pragma once

#include <map>
#include <string>

namespace docqa::prompts {

/// Episode template; substitute {document_outline} and {question}.
extern const char* const kAgentSystem;

/// Exploration-stage instructions for the explorer model.
extern const char* const kExploration;

/// Synthesis-stage instructions for the QA generator model.
extern const char* const kSynthesis;

/// Binary grading instructions; substitute {question}, {gold}, {prediction}.
extern const char* const kJudge;

/// Short-answer extraction instructions; substitute {question}, {response}.
extern const char* const kExtraction;

/// Goal string sent to the summarizer when captioning visual elements.
extern const char* const kCaptionGoal;

/// Replaces every "{name}" placeholder with its value.
std::string substitute(std::string templ, const std::map<std::string, std::string>& values);

struct PromptSet {
    std::string agent_system;
    std::string exploration;
    std::string synthesis;
    std::string judge;
    std::string extraction;
};

PromptSet defaults();

/// Loads template files from a directory; missing files keep their defaults.
/// Recognized names: agent_system.txt, exploration.txt, synthesis.txt,
/// judge.txt, extraction.txt.
PromptSet load_dir(const std::string& dir);

}  // namespace docqa::prompts
