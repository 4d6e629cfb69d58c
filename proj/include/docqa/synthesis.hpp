#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docqa/agent.hpp"
#include "docqa/prompts.hpp"
#include "docqa/toolkit.hpp"

namespace docqa {

struct ExplorationStep {
    std::string intent;
    ToolCall action;
    std::string observation;
    bool suppressed = false;  // duplicate call kept for the record but never executed
    std::string raw;          // explorer output verbatim
};

struct ExplorationTrajectory {
    std::string doc_id;
    std::string source_tag;
    std::vector<ExplorationStep> steps;
    bool flagged_incomplete = false;
    std::vector<std::string> notes;
};

struct QAPair {
    std::string question;
    std::string answer;
    std::vector<std::string> raw_fields;  // keys seen in the synthesizer output
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string note;
};

struct SynthesisConfig {
    std::map<std::string, int> max_depth_by_source{
        {"longdocurl", 20}, {"mmdocrag", 20}, {"dude", 15}, {"cuad", 15}, {"other", 15}};
    int k_rejection_samples = 3;
    std::string acceptance_rule = "judge";  // judge | exact_match
    AgentConfig agent;                      // teacher episode settings
};

int max_depth_for(const SynthesisConfig& cfg, const std::string& source_tag);

ExplorationTrajectory explore(const Outline& outline, PolicyClient& explorer,
                              const Toolkit& toolkit, const SynthesisConfig& cfg,
                              const std::string& source_tag,
                              const std::string& exploration_prompt = "");

struct SynthesisResult {
    std::optional<QAPair> qa;
    bool parsed = false;
    bool valid = false;
    std::vector<CheckResult> checks;
    int attempts = 0;
};

/// Asks the synthesizer for a question/answer pair grounded in the exploration.
/// Parse or validation failures are resubmitted once with failure notes.
SynthesisResult synthesize(const ExplorationTrajectory& exploration,
                           PolicyClient& synthesizer,
                           const std::string& synthesis_prompt = "");

std::vector<CheckResult> validate_qa(const QAPair& qa);
bool qa_valid(const std::vector<CheckResult>& checks);

/// QA pairs serialize with exactly the two content fields.
nlohmann::json serialize_qa(const QAPair& qa);

struct TrainingTrajectory {
    Trajectory trajectory;
    QAPair qa;
    std::string doc_id;
    std::string exploration_ref;
    int attempt = 0;  // 1-based teacher attempt that was accepted
};

/// Runs up to k teacher episodes; the first accepted one wins.
std::optional<TrainingTrajectory> reject_sample(const QAPair& qa, const Outline& outline,
                                                const Toolkit& toolkit, PolicyClient& teacher,
                                                PolicyClient* judge, const SynthesisConfig& cfg,
                                                const prompts::PromptSet& prompts,
                                                std::vector<std::string>* notes = nullptr);

struct CorpusEntry {
    std::string path;
    std::string source_tag;
};

std::vector<CorpusEntry> load_corpus_manifest(const std::string& path);

struct DocReport {
    std::string doc_id;
    std::string source_tag;
    int explored = 0;
    int synthesized = 0;
    int validated = 0;
    int accepted = 0;
    bool failed = false;
    std::vector<std::string> notes;
};

struct StageReport {
    std::vector<DocReport> docs;
    int documents = 0;
    int explored = 0;
    int synthesized = 0;
    int validated = 0;
    int accepted = 0;
    int failed_documents = 0;
};

nlohmann::json stage_report_to_json(const StageReport& report);

struct DocClientSet {
    std::unique_ptr<PolicyClient> explorer;
    std::unique_ptr<PolicyClient> synthesizer;
    std::unique_ptr<PolicyClient> teacher;
    std::unique_ptr<PolicyClient> judge;  // optional
    std::unique_ptr<SummarizerClient> summarizer;
};

using ClientFactory = std::function<DocClientSet(const CorpusEntry&)>;

struct DocOutcome {
    DocReport report;
    ExplorationTrajectory exploration;
    std::vector<TrainingTrajectory> accepted;
};

DocOutcome run_document(const Outline& outline, const CorpusEntry& entry,
                        const DocClientSet& clients, const SynthesisConfig& cfg,
                        const prompts::PromptSet& prompts);

struct PipelineResult {
    StageReport report;
    std::vector<TrainingTrajectory> dataset;  // manifest order
};

/// Per-document failures are isolated: they mark the doc failed in the report
/// and the run continues. The dataset order matches the manifest regardless
/// of worker count.
PipelineResult run_pipeline(const std::vector<CorpusEntry>& manifest,
                            const ClientFactory& factory, const SynthesisConfig& cfg,
                            const prompts::PromptSet& prompts, int parallel = 1);

nlohmann::json training_trajectory_to_json(const TrainingTrajectory& tt);
TrainingTrajectory training_trajectory_from_json(const nlohmann::json& j);

std::string dataset_to_jsonl(const std::vector<TrainingTrajectory>& dataset);
std::vector<TrainingTrajectory> dataset_from_jsonl(const std::string& text);

}  // namespace docqa
