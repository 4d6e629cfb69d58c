#include "docqa/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <regex>
#include <sstream>
#include <thread>

#include "docqa/errors.hpp"
#include "docqa/eval.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

int max_depth_for(const SynthesisConfig& cfg, const std::string& source_tag) {
    auto it = cfg.max_depth_by_source.find(source_tag);
    if (it != cfg.max_depth_by_source.end()) return it->second;
    it = cfg.max_depth_by_source.find("other");
    return it != cfg.max_depth_by_source.end() ? it->second : 15;
}

namespace {

std::string canonical_call_json(const ToolCall& call) {
    json j = {{"arguments", call.arguments}, {"name", call.name}};
    return j.dump();
}

std::string exploration_assistant_turn(const ExplorationStep& step) {
    if (!step.raw.empty()) return step.raw;
    std::string out;
    if (!step.intent.empty()) out += "<think>\n" + step.intent + "\n</think>\n\n";
    out += "<tool_call>\n" + canonical_call_json(step.action) + "\n</tool_call>";
    return out;
}

const char* kDuplicateNotice =
    "Duplicate tool call detected: this call is identical to the previous one and was not "
    "executed. Vary the keywords or section ids to explore new content.";

}  // namespace

ExplorationTrajectory explore(const Outline& outline, PolicyClient& explorer,
                              const Toolkit& toolkit, const SynthesisConfig& cfg,
                              const std::string& source_tag,
                              const std::string& exploration_prompt) {
    ExplorationTrajectory traj;
    traj.doc_id = outline.doc_id;
    traj.source_tag = source_tag;

    std::string system = exploration_prompt.empty() ? prompts::kExploration : exploration_prompt;
    if (!system.empty() && system.back() != '\n') system += "\n";
    system += "\nI've uploaded a document, and below is the outline in XML format:\n" +
              serialize_xml(outline);

    const int depth = max_depth_for(cfg, source_tag);
    while (static_cast<int>(traj.steps.size()) < depth) {
        std::vector<ChatMessage> messages;
        messages.push_back({"system", system});
        for (const ExplorationStep& s : traj.steps) {
            messages.push_back({"assistant", exploration_assistant_turn(s)});
            messages.push_back({"tool", s.observation});
        }

        std::string raw;
        try {
            raw = explorer.complete(messages, tools_json(), cfg.agent.sampling);
        } catch (const Error& e) {
            traj.flagged_incomplete = true;
            traj.notes.push_back(std::string("explorer unavailable: ") + e.what());
            break;
        }

        ParsedPolicyOutput parsed = parse_policy_output(raw);
        if (parsed.malformed) {
            traj.notes.push_back("explorer output malformed (" + parsed.problem +
                                 "); exploration stopped");
            break;
        }
        if (!parsed.call.has_value()) break;  // the explorer decided it is done

        ExplorationStep step;
        step.intent = parsed.thought;
        step.action = *parsed.call;
        step.raw = raw;

        const ExplorationStep* prev = traj.steps.empty() ? nullptr : &traj.steps.back();
        if (prev && prev->action.name == step.action.name &&
            prev->action.arguments == step.action.arguments) {
            step.suppressed = true;
            step.observation = kDuplicateNotice;
        } else {
            step.observation = toolkit.dispatch(step.action).rendered;
        }
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

namespace {

std::string render_exploration(const ExplorationTrajectory& traj) {
    std::string out;
    for (size_t i = 0; i < traj.steps.size(); ++i) {
        const ExplorationStep& s = traj.steps[i];
        out += "Step " + std::to_string(i + 1) + "\n";
        out += "Intent: " + (s.intent.empty() ? std::string("(none)") : s.intent) + "\n";
        out += "Action: " + canonical_call_json(s.action) + "\n";
        out += "Observation: " + s.observation + "\n\n";
    }
    return out;
}

struct QaParse {
    std::optional<QAPair> pair;
    std::string problem;
};

std::string json_to_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

QaParse parse_qa_output(const std::string& raw) {
    QaParse out;
    size_t open = raw.find('{');
    size_t close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        out.problem = "no JSON object found";
        return out;
    }
    json j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        out.problem = "text between braces is not a JSON object";
        return out;
    }
    if (!j.contains("question") || !j.contains("answer")) {
        out.problem = "object is missing the question or answer field";
        return out;
    }
    QAPair pair;
    pair.question = json_to_text(j["question"]);
    pair.answer = json_to_text(j["answer"]);
    for (auto it = j.begin(); it != j.end(); ++it) pair.raw_fields.push_back(it.key());
    out.pair = std::move(pair);
    return out;
}

std::string failed_check_summary(const std::vector<CheckResult>& checks) {
    std::vector<std::string> parts;
    for (const auto& c : checks)
        if (!c.passed) parts.push_back(c.name + (c.note.empty() ? "" : " (" + c.note + ")"));
    return join(parts, "; ");
}

}  // namespace

SynthesisResult synthesize(const ExplorationTrajectory& exploration, PolicyClient& synthesizer,
                           const std::string& synthesis_prompt) {
    if (exploration.steps.empty())
        throw ConfigError("synthesize requires an exploration with at least one step");

    SynthesisResult result;
    std::vector<ChatMessage> messages;
    messages.push_back(
        {"system", synthesis_prompt.empty() ? prompts::kSynthesis : synthesis_prompt});
    messages.push_back({"user", "Exploration trajectory:\n\n" + render_exploration(exploration)});

    std::string raw1 = synthesizer.complete(messages, "", SamplingParams{});
    result.attempts = 1;
    QaParse first = parse_qa_output(raw1);

    auto resubmit = [&](const std::string& complaint) {
        messages.push_back({"assistant", raw1});
        messages.push_back({"user", complaint});
        result.attempts = 2;
        return synthesizer.complete(messages, "", SamplingParams{});
    };

    if (!first.pair.has_value()) {
        std::string raw2 = resubmit(
            "Your previous output could not be parsed (" + first.problem +
            "). Respond with exactly one JSON object containing only the fields "
            "\"question\" and \"answer\".");
        QaParse second = parse_qa_output(raw2);
        if (!second.pair.has_value())
            throw UnparseableOutput("synthesizer output unparseable after retry: " +
                                    second.problem);
        result.qa = second.pair;
        result.parsed = true;
        result.checks = validate_qa(*result.qa);
        result.valid = qa_valid(result.checks);
        return result;
    }

    result.qa = first.pair;
    result.parsed = true;
    result.checks = validate_qa(*result.qa);
    result.valid = qa_valid(result.checks);
    if (result.valid) return result;

    std::string raw2 = resubmit(
        "The generated pair failed validation checks: " + failed_check_summary(result.checks) +
        ". Regenerate the JSON object fixing these issues, with exactly the fields "
        "\"question\" and \"answer\".");
    QaParse second = parse_qa_output(raw2);
    if (second.pair.has_value()) {
        result.qa = second.pair;
        result.checks = validate_qa(*result.qa);
        result.valid = qa_valid(result.checks);
    }
    return result;
}

namespace {

bool latin_only_text(const std::string& s) {
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = utf8_next(s, i);
        if (cp <= 0x24F) continue;
        if (cp >= 0x2010 && cp <= 0x203E) continue;  // typographic punctuation
        return false;
    }
    return true;
}

bool has_location_refs(const std::string& question) {
    static const std::regex patterns[] = {
        std::regex(R"(\b(figure|fig\.?|table)\s*\d)", std::regex::icase),
        std::regex(R"(\bpages?\b)", std::regex::icase),
        std::regex(R"(\bsection\s*_?\s*ids?\b)", std::regex::icase),
        std::regex(R"(\bsection\s+\d)", std::regex::icase),
    };
    for (const auto& re : patterns)
        if (std::regex_search(question, re)) return true;
    return false;
}

}  // namespace

std::vector<CheckResult> validate_qa(const QAPair& qa) {
    std::vector<CheckResult> checks;

    {
        CheckResult c{"two_fields", true, ""};
        if (!qa.raw_fields.empty()) {
            std::vector<std::string> extras;
            bool has_q = false, has_a = false;
            for (const auto& f : qa.raw_fields) {
                if (f == "question")
                    has_q = true;
                else if (f == "answer")
                    has_a = true;
                else
                    extras.push_back(f);
            }
            if (!has_q || !has_a || !extras.empty()) {
                c.passed = false;
                c.note = extras.empty() ? "missing question or answer"
                                        : "extra fields: " + join(extras, ", ");
            }
        }
        checks.push_back(std::move(c));
    }
    {
        CheckResult c{"non_empty", true, ""};
        if (trim(qa.question).empty() || trim(qa.answer).empty()) {
            c.passed = false;
            c.note = "question and answer must both be non-empty";
        }
        checks.push_back(std::move(c));
    }
    {
        CheckResult c{"latin_only", true, ""};
        if (!latin_only_text(qa.question) || !latin_only_text(qa.answer)) {
            c.passed = false;
            c.note = "non-Latin characters present";
        }
        checks.push_back(std::move(c));
    }
    {
        CheckResult c{"single_question", true, ""};
        size_t marks = static_cast<size_t>(std::count(qa.question.begin(), qa.question.end(), '?'));
        if (marks > 1) {
            c.passed = false;
            c.note = std::to_string(marks) + " question marks";
        }
        checks.push_back(std::move(c));
    }
    {
        CheckResult c{"no_location_refs", true, ""};
        if (has_location_refs(qa.question)) {
            c.passed = false;
            c.note = "question references figures, tables, pages or section ids";
        }
        checks.push_back(std::move(c));
    }
    {
        CheckResult c{"answer_length", true, ""};
        if (qa.answer.size() > 200) {
            c.passed = false;
            c.note = "answer longer than 200 characters";
        } else if (qa.answer.find("\n\n") != std::string::npos) {
            c.passed = false;
            c.note = "answer spans multiple paragraphs";
        }
        checks.push_back(std::move(c));
    }
    return checks;
}

bool qa_valid(const std::vector<CheckResult>& checks) {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

json serialize_qa(const QAPair& qa) {
    return json{{"question", qa.question}, {"answer", qa.answer}};
}

std::optional<TrainingTrajectory> reject_sample(const QAPair& qa, const Outline& outline,
                                                const Toolkit& toolkit, PolicyClient& teacher,
                                                PolicyClient* judge, const SynthesisConfig& cfg,
                                                const prompts::PromptSet& prompts,
                                                std::vector<std::string>* notes) {
    auto log = [&](std::string msg) {
        if (notes) notes->push_back(std::move(msg));
    };
    bool use_judge = cfg.acceptance_rule == "judge" && judge != nullptr;

    for (int attempt = 1; attempt <= cfg.k_rejection_samples; ++attempt) {
        Trajectory traj =
            run_episode(qa.question, outline, toolkit, teacher, cfg.agent, prompts.agent_system);
        if (traj.terminated_by == TerminatedBy::policy_error)
            throw PolicyUnavailable("teacher unavailable: " + join(traj.notes, "; "));

        bool accepted = false;
        bool scored = false;
        if (use_judge) {
            try {
                JudgeVerdict verdict =
                    judge_score(qa.question, qa.answer, traj.answer, *judge, prompts.judge);
                if (!verdict.parsed)
                    log("attempt " + std::to_string(attempt) +
                        ": judge verdict unparseable, scored incorrect");
                accepted = verdict.correct;
                scored = true;
            } catch (const Error& e) {
                log("attempt " + std::to_string(attempt) + ": judge unavailable (" + e.what() +
                    "), falling back to the answer rule");
            }
        }
        if (!scored) {
            std::string extracted = extract_answer_rule(traj.answer);
            accepted = rule_score(extracted, GoldAnswer::infer(qa.answer)).correct;
        }
        log("attempt " + std::to_string(attempt) + (accepted ? ": accepted" : ": rejected"));
        if (accepted) {
            TrainingTrajectory tt;
            tt.trajectory = std::move(traj);
            tt.qa = qa;
            tt.doc_id = outline.doc_id;
            tt.attempt = attempt;
            return tt;
        }
    }
    return std::nullopt;
}

std::vector<CorpusEntry> load_corpus_manifest(const std::string& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw ConfigError("corpus manifest must be a JSON array: " + path);
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<CorpusEntry> entries;
    for (size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        if (!e.is_object() || !e.contains("path") || !e["path"].is_string())
            throw ConfigError("corpus manifest entry " + std::to_string(i) +
                              " must be {path, source_tag}");
        for (auto it = e.begin(); it != e.end(); ++it)
            if (it.key() != "path" && it.key() != "source_tag")
                throw ConfigError("corpus manifest entry " + std::to_string(i) +
                                  ": unknown key: " + it.key());
        CorpusEntry entry;
        std::filesystem::path p = e["path"].get<std::string>();
        entry.path = p.is_absolute() ? p.string() : (base / p).string();
        entry.source_tag = e.value("source_tag", std::string("other"));
        entries.push_back(std::move(entry));
    }
    return entries;
}

DocOutcome run_document(const Outline& outline, const CorpusEntry& entry,
                        const DocClientSet& clients, const SynthesisConfig& cfg,
                        const prompts::PromptSet& prompts) {
    if (!clients.explorer || !clients.synthesizer || !clients.teacher || !clients.summarizer)
        throw ConfigError("synthesis needs explorer, synthesizer, teacher and summarizer clients");

    DocOutcome outcome;
    outcome.report.doc_id = outline.doc_id;
    outcome.report.source_tag = entry.source_tag;
    DocReport& report = outcome.report;

    Toolkit toolkit(outline, *clients.summarizer);
    outcome.exploration =
        explore(outline, *clients.explorer, toolkit, cfg, entry.source_tag, prompts.exploration);
    report.explored = 1;
    for (const auto& n : outcome.exploration.notes) report.notes.push_back(n);
    if (outcome.exploration.steps.empty()) {
        report.notes.push_back("exploration produced no steps; synthesis skipped");
        return outcome;
    }

    SynthesisResult synth;
    try {
        synth = synthesize(outcome.exploration, *clients.synthesizer, prompts.synthesis);
    } catch (const UnparseableOutput& e) {
        report.notes.push_back(e.what());
        return outcome;
    }
    report.synthesized = synth.parsed ? 1 : 0;
    if (!synth.valid) {
        report.notes.push_back("validation failed: " + failed_check_summary(synth.checks));
        return outcome;
    }
    report.validated = 1;

    auto tt = reject_sample(*synth.qa, outline, toolkit, *clients.teacher, clients.judge.get(),
                            cfg, prompts, &report.notes);
    if (tt.has_value()) {
        tt->exploration_ref = outline.doc_id + "#exploration-1";
        report.accepted = 1;
        outcome.accepted.push_back(std::move(*tt));
    } else {
        report.notes.push_back("no teacher attempt accepted (k=" +
                               std::to_string(cfg.k_rejection_samples) + ")");
    }
    return outcome;
}

namespace {

std::string path_stem(const std::string& path) {
    std::string name = std::filesystem::path(path).filename().string();
    const std::string suffix = ".mineru.json";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        return name.substr(0, name.size() - suffix.size());
    auto dot = name.rfind('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

DocOutcome process_entry(const CorpusEntry& entry, const ClientFactory& factory,
                         const SynthesisConfig& cfg, const prompts::PromptSet& prompts) {
    try {
        DocClientSet clients = factory(entry);
        ParsedDocument doc = ingest_parsed(entry.path);
        Outline outline = build_outline(doc);
        return run_document(outline, entry, clients, cfg, prompts);
    } catch (const std::exception& e) {
        DocOutcome outcome;
        outcome.report.doc_id = path_stem(entry.path);
        outcome.report.source_tag = entry.source_tag;
        outcome.report.failed = true;
        outcome.report.notes.push_back(e.what());
        return outcome;
    }
}

}  // namespace

PipelineResult run_pipeline(const std::vector<CorpusEntry>& manifest, const ClientFactory& factory,
                            const SynthesisConfig& cfg, const prompts::PromptSet& prompts,
                            int parallel) {
    std::vector<DocOutcome> outcomes(manifest.size());
    if (parallel <= 1 || manifest.size() <= 1) {
        for (size_t i = 0; i < manifest.size(); ++i)
            outcomes[i] = process_entry(manifest[i], factory, cfg, prompts);
    } else {
        std::atomic<size_t> next{0};
        size_t workers = std::min<size_t>(static_cast<size_t>(parallel), manifest.size());
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= manifest.size()) break;
                    outcomes[i] = process_entry(manifest[i], factory, cfg, prompts);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    PipelineResult result;
    for (auto& outcome : outcomes) {
        result.report.documents += 1;
        result.report.explored += outcome.report.explored;
        result.report.synthesized += outcome.report.synthesized;
        result.report.validated += outcome.report.validated;
        result.report.accepted += outcome.report.accepted;
        if (outcome.report.failed) result.report.failed_documents += 1;
        result.report.docs.push_back(std::move(outcome.report));
        for (auto& tt : outcome.accepted) result.dataset.push_back(std::move(tt));
    }
    return result;
}

json stage_report_to_json(const StageReport& report) {
    json docs = json::array();
    for (const auto& d : report.docs) {
        docs.push_back({{"doc_id", d.doc_id},
                        {"source_tag", d.source_tag},
                        {"explored", d.explored},
                        {"synthesized", d.synthesized},
                        {"validated", d.validated},
                        {"accepted", d.accepted},
                        {"failed", d.failed},
                        {"notes", d.notes}});
    }
    return {{"docs", docs},
            {"totals",
             {{"documents", report.documents},
              {"explored", report.explored},
              {"synthesized", report.synthesized},
              {"validated", report.validated},
              {"accepted", report.accepted},
              {"failed_documents", report.failed_documents}}}};
}

json training_trajectory_to_json(const TrainingTrajectory& tt) {
    return {{"record", "training_trajectory"},
            {"doc_id", tt.doc_id},
            {"exploration_ref", tt.exploration_ref},
            {"attempt", tt.attempt},
            {"qa", serialize_qa(tt.qa)},
            {"trajectory", trajectory_to_json(tt.trajectory)}};
}

TrainingTrajectory training_trajectory_from_json(const json& j) {
    if (!j.is_object() || j.value("record", "") != "training_trajectory")
        throw IOFailure("dataset record is not a training_trajectory");
    TrainingTrajectory tt;
    tt.doc_id = j.value("doc_id", "");
    tt.exploration_ref = j.value("exploration_ref", "");
    tt.attempt = j.value("attempt", 0);
    const json& qa = j.value("qa", json::object());
    tt.qa.question = qa.value("question", "");
    tt.qa.answer = qa.value("answer", "");
    for (auto it = qa.begin(); it != qa.end(); ++it) tt.qa.raw_fields.push_back(it.key());
    tt.trajectory = trajectory_from_json(j.value("trajectory", json::object()));
    return tt;
}

std::string dataset_to_jsonl(const std::vector<TrainingTrajectory>& dataset) {
    std::string out;
    for (const auto& tt : dataset) out += training_trajectory_to_json(tt).dump() + "\n";
    return out;
}

std::vector<TrainingTrajectory> dataset_from_jsonl(const std::string& text) {
    std::vector<TrainingTrajectory> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw IOFailure("dataset line " + std::to_string(lineno) + " is not valid JSON");
        out.push_back(training_trajectory_from_json(j));
    }
    return out;
}

}  // namespace docqa
