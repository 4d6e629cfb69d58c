#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "docqa/agent.hpp"
#include "docqa/config.hpp"
#include "docqa/document.hpp"
#include "docqa/errors.hpp"
#include "docqa/eval.hpp"
#include "docqa/outline.hpp"
#include "docqa/prompts.hpp"
#include "docqa/sft.hpp"
#include "docqa/synthesis.hpp"
#include "docqa/text_util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace docqa;
using nlohmann::json;

namespace {

// exit codes: 0 success, 1 partial failure, 2 usage or schema, 3 upstream service
int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const AuthFailure*>(&e) || dynamic_cast<const PolicyUnavailable*>(&e) ||
        dynamic_cast<const SummarizerUnavailable*>(&e) ||
        dynamic_cast<const ContextOverflow*>(&e) || dynamic_cast<const ScenarioExhausted*>(&e) ||
        dynamic_cast<const KeyMiss*>(&e))
        return 3;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnreadableFile*>(&e) ||
        dynamic_cast<const MalformedLayout*>(&e) || dynamic_cast<const IOFailure*>(&e))
        return 2;
    return 1;
}

class NullSummarizer : public SummarizerClient {
public:
    std::string summarize(const std::string&, const std::string&,
                          const std::vector<std::string>&) override {
        throw SummarizerUnavailable("no summarizer endpoint or scenario configured");
    }
    std::string identity() const override { return "null-summarizer"; }
};

struct GlobalOpts {
    std::string config_path;
    std::string prompts_dir;
};

RunConfig effective_config(const GlobalOpts& g) {
    RunConfig cfg = g.config_path.empty() ? default_config() : load_config(g.config_path);
    apply_env_overrides(cfg);
    if (!g.prompts_dir.empty()) cfg.prompts_dir = g.prompts_dir;
    return cfg;
}

prompts::PromptSet prompts_for(const RunConfig& cfg) {
    return cfg.prompts_dir.empty() ? prompts::defaults() : prompts::load_dir(cfg.prompts_dir);
}

bool endpoint_for(const RunConfig& cfg, const std::string& role, EndpointConfig* out) {
    auto it = cfg.endpoints.find(role);
    if (it == cfg.endpoints.end() || it->second.url.empty()) {
        it = cfg.endpoints.find("policy");
        if (it == cfg.endpoints.end() || it->second.url.empty()) return false;
    }
    out->base_url = it->second.url;
    out->api_key = it->second.key;
    out->model = it->second.model;
    return true;
}

std::unique_ptr<PolicyClient> policy_for(const RunConfig& cfg, const ScenarioSet* scenario,
                                         const std::string& role) {
    if (scenario) return scenario->make_policy(role);
    EndpointConfig ep;
    if (!endpoint_for(cfg, role, &ep))
        throw ConfigError("no endpoint configured for role " + role +
                          " and no scenario file given");
    return std::make_unique<HttpPolicyClient>(ep);
}

std::unique_ptr<SummarizerClient> summarizer_for(const RunConfig& cfg,
                                                 const ScenarioSet* scenario) {
    if (scenario) {
        if (scenario->has("summarizer")) return scenario->make_summarizer("summarizer");
        return std::make_unique<NullSummarizer>();
    }
    EndpointConfig ep;
    if (!endpoint_for(cfg, "summarizer", &ep)) return std::make_unique<NullSummarizer>();
    return std::make_unique<HttpSummarizerClient>(ep);
}

Outline load_document_arg(const std::string& path) {
    std::string text = read_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_array()) {
        ParsedDocument doc = ingest_parsed(path);
        return build_outline(doc);
    }
    if (j.is_object()) return load_outline_index(text);
    throw ConfigError("--doc must point to a layout JSON array or an outline index JSON: " + path);
}

struct IngestOpts {
    std::string layout_path;
    std::string format = "mineru_json";
    std::string out_dir = ".";
    std::string scenario_path;
    bool captions = false;
};

int cmd_ingest(const GlobalOpts& g, const IngestOpts& o) {
    RunConfig cfg = effective_config(g);
    ParsedDocument doc = ingest_parsed(o.layout_path, o.format);
    Outline outline = build_outline(doc);

    if (o.captions) {
        std::unique_ptr<SummarizerClient> captioner;
        if (!o.scenario_path.empty()) {
            ScenarioSet set = load_scenario_file(o.scenario_path);
            captioner = set.make_summarizer("summarizer");
        } else {
            EndpointConfig ep;
            if (!endpoint_for(cfg, "summarizer", &ep))
                throw ConfigError("--captions needs a summarizer endpoint or --scenario");
            captioner = std::make_unique<HttpSummarizerClient>(ep);
        }
        EnrichResult enriched = enrich_captions(outline, *captioner);
        outline = std::move(enriched.outline);
        for (const auto& n : enriched.notes) std::cerr << "caption: " << n << "\n";
        std::cout << "generated " << enriched.generated << " captions\n";
    }

    fs::create_directories(o.out_dir);
    fs::path xml_path = fs::path(o.out_dir) / (outline.doc_id + ".outline.xml");
    fs::path index_path = fs::path(o.out_dir) / (outline.doc_id + ".index.json");
    write_file(xml_path.string(), serialize_xml(outline));
    write_file(index_path.string(), save_outline_index(outline));

    std::cout << "ingested " << outline.doc_id << ": " << doc.pages.size() << " pages, "
              << doc.block_count() << " blocks, " << all_sections(outline).size()
              << " sections\n";
    std::cout << xml_path.string() << "\n" << index_path.string() << "\n";
    return 0;
}

struct AskOpts {
    std::string question;
    std::string doc_path;
    std::string scenario_path;
    std::string trace_path;
    int max_steps = 0;
};

int cmd_ask(const GlobalOpts& g, const AskOpts& o) {
    RunConfig cfg = effective_config(g);
    Outline outline = load_document_arg(o.doc_path);

    std::unique_ptr<ScenarioSet> scenario;
    if (!o.scenario_path.empty())
        scenario = std::make_unique<ScenarioSet>(load_scenario_file(o.scenario_path));

    auto policy = policy_for(cfg, scenario.get(), "policy");
    auto summarizer = summarizer_for(cfg, scenario.get());
    Toolkit toolkit(outline, *summarizer, ToolkitConfig{cfg.window, cfg.hit_cap});

    AgentConfig acfg = agent_config_from(cfg);
    if (o.max_steps > 0) acfg.max_steps = o.max_steps;
    prompts::PromptSet prompts = prompts_for(cfg);

    Trajectory traj = run_episode(o.question, outline, toolkit, *policy, acfg, prompts.agent_system);
    if (!o.trace_path.empty()) write_file(o.trace_path, trajectory_to_jsonl(traj));

    std::cout << traj.answer << "\n";
    std::cerr << "steps=" << traj.steps.size()
              << " terminated_by=" << terminated_by_name(traj.terminated_by) << "\n";
    for (const auto& n : traj.notes) std::cerr << "note: " << n << "\n";
    return traj.terminated_by == TerminatedBy::policy_error ? 3 : 0;
}

struct SynthOpts {
    std::string manifest_path;
    std::string out_dir;
    std::string scenario_dir;
    int parallel = 1;
};

int cmd_synthesize(const GlobalOpts& g, const SynthOpts& o) {
    RunConfig cfg = effective_config(g);
    std::vector<CorpusEntry> manifest = load_corpus_manifest(o.manifest_path);
    SynthesisConfig scfg = synthesis_config_from(cfg);
    prompts::PromptSet prompts = prompts_for(cfg);

    ClientFactory factory = [&](const CorpusEntry& entry) {
        DocClientSet set;
        if (!o.scenario_dir.empty()) {
            std::string stem = fs::path(entry.path).filename().string();
            const std::string suffix = ".mineru.json";
            if (stem.size() > suffix.size() &&
                stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
                stem = stem.substr(0, stem.size() - suffix.size());
            else if (auto dot = stem.rfind('.'); dot != std::string::npos)
                stem = stem.substr(0, dot);
            fs::path file = fs::path(o.scenario_dir) / (stem + ".scenario.json");
            ScenarioSet sc = load_scenario_file(file.string());
            set.explorer = sc.make_policy("explorer");
            set.synthesizer = sc.make_policy("synthesizer");
            set.teacher = sc.make_policy("teacher");
            if (sc.has("judge")) set.judge = sc.make_policy("judge");
            if (sc.has("summarizer"))
                set.summarizer = sc.make_summarizer("summarizer");
            else
                set.summarizer = std::make_unique<NullSummarizer>();
            return set;
        }
        set.explorer = policy_for(cfg, nullptr, "explorer");
        set.synthesizer = policy_for(cfg, nullptr, "synthesizer");
        set.teacher = policy_for(cfg, nullptr, "teacher");
        EndpointConfig ep;
        if (endpoint_for(cfg, "judge", &ep)) set.judge = std::make_unique<HttpPolicyClient>(ep);
        set.summarizer = summarizer_for(cfg, nullptr);
        return set;
    };

    PipelineResult result = run_pipeline(manifest, factory, scfg, prompts, o.parallel);

    fs::create_directories(o.out_dir);
    fs::path dataset_path = fs::path(o.out_dir) / "dataset.jsonl";
    fs::path report_path = fs::path(o.out_dir) / "report.json";
    write_file(dataset_path.string(), dataset_to_jsonl(result.dataset));
    write_file(report_path.string(), stage_report_to_json(result.report).dump(2) + "\n");

    const StageReport& r = result.report;
    std::cout << "documents=" << r.documents << " explored=" << r.explored
              << " synthesized=" << r.synthesized << " validated=" << r.validated
              << " accepted=" << r.accepted << " failed=" << r.failed_documents << "\n";
    return r.failed_documents > 0 ? 1 : 0;
}

struct ExportOpts {
    std::string dataset_path;
    std::string out_path;
    std::string tokenizer = "whitespace";
};

int cmd_export_sft(const GlobalOpts&, const ExportOpts& o) {
    std::vector<TrainingTrajectory> dataset = dataset_from_jsonl(read_file(o.dataset_path));
    std::vector<TrainingSample> samples;
    samples.reserve(dataset.size());
    for (const auto& tt : dataset) samples.push_back(build_sample(tt.trajectory));

    std::unique_ptr<TokenizerAdapter> tok;
    if (o.tokenizer == "whitespace")
        tok = std::make_unique<WhitespaceTokenizer>();
    else if (o.tokenizer != "none")
        throw ConfigError("unknown tokenizer: " + o.tokenizer);

    write_file(o.out_path, export_sft_jsonl(samples, tok.get()));
    std::cout << "exported " << samples.size() << " samples to " << o.out_path << "\n";
    return 0;
}

struct EvalOpts {
    std::string pred_path;
    std::string gold_path;
    std::string judge_scenario;
    std::string report_path;
    bool use_judge = false;
};

int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
    RunConfig cfg = effective_config(g);
    prompts::PromptSet prompts = prompts_for(cfg);

    std::vector<GoldItem> gold = load_gold_jsonl(read_file(o.gold_path));

    std::vector<std::string> responses;
    {
        std::istringstream in(read_file(o.pred_path));
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_string())
                responses.push_back(j.get<std::string>());
            else if (j.is_object() && j.contains("response") && j["response"].is_string())
                responses.push_back(j["response"].get<std::string>());
            else
                throw ConfigError("prediction line " + std::to_string(lineno) +
                                  " must be a string or {\"response\": ...}");
        }
    }
    if (responses.size() != gold.size())
        throw ConfigError("prediction count (" + std::to_string(responses.size()) +
                          ") does not match gold count (" + std::to_string(gold.size()) + ")");

    std::unique_ptr<PolicyClient> judge;
    if (!o.judge_scenario.empty()) {
        ScenarioSet set = load_scenario_file(o.judge_scenario);
        judge = set.make_policy("judge");
    } else if (o.use_judge) {
        judge = policy_for(cfg, nullptr, "judge");
    }

    std::vector<ScoreResult> scores;
    std::vector<JudgeVerdict> verdicts;
    for (size_t i = 0; i < responses.size(); ++i) {
        std::string extracted = extract_answer_rule(responses[i]);
        scores.push_back(rule_score(extracted, gold[i].gold));
        if (judge)
            verdicts.push_back(judge_score(gold[i].question, gold[i].gold.raw, responses[i],
                                           *judge, prompts.judge));
    }

    AggregateReport rep = aggregate(scores, judge ? &verdicts : nullptr);
    char buf[160];
    if (rep.has_lasj)
        std::snprintf(buf, sizeof(buf), "count=%zu acc=%.4f f1=%.4f lasj=%.4f", rep.count,
                      rep.acc, rep.f1, rep.lasj);
    else
        std::snprintf(buf, sizeof(buf), "count=%zu acc=%.4f f1=%.4f", rep.count, rep.acc, rep.f1);
    std::cout << buf << (rep.empty ? " (empty)" : "") << "\n";

    if (!o.report_path.empty()) {
        json items = json::array();
        for (size_t i = 0; i < scores.size(); ++i) {
            json item = {{"extracted", scores[i].extracted},
                         {"correct", scores[i].correct},
                         {"partial_f1", scores[i].partial_f1}};
            if (judge) item["judge_correct"] = verdicts[i].correct;
            items.push_back(std::move(item));
        }
        json out = {{"count", rep.count}, {"acc", rep.acc},   {"f1", rep.f1},
                    {"empty", rep.empty}, {"items", items}};
        if (rep.has_lasj) out["lasj"] = rep.lasj;
        write_file(o.report_path, out.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"document-grounded agentic QA toolkit"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--config", global.config_path, "run configuration JSON");
    app.add_option("--prompts-dir", global.prompts_dir, "directory with prompt template files");

    IngestOpts ingest;
    CLI::App* ingest_cmd = app.add_subcommand("ingest", "parse a layout file into an outline");
    ingest_cmd->add_option("layout", ingest.layout_path, "layout JSON produced by the PDF parser")
        ->required();
    ingest_cmd->add_option("--format", ingest.format, "layout dialect (mineru_json)");
    ingest_cmd->add_option("--out", ingest.out_dir, "output directory");
    ingest_cmd->add_flag("--captions", ingest.captions, "caption visual elements missing one");
    ingest_cmd->add_option("--scenario", ingest.scenario_path, "scripted summarizer scenario");

    AskOpts ask;
    CLI::App* ask_cmd = app.add_subcommand("ask", "answer one question against a document");
    ask_cmd->add_option("question", ask.question, "the question to answer")->required();
    ask_cmd->add_option("--doc", ask.doc_path, "layout JSON or outline index JSON")->required();
    ask_cmd->add_option("--scenario", ask.scenario_path, "scripted client scenario file");
    ask_cmd->add_option("--trace", ask.trace_path, "write the trajectory JSONL here");
    ask_cmd->add_option("--max-steps", ask.max_steps, "step budget override");

    SynthOpts synth;
    CLI::App* synth_cmd = app.add_subcommand("synthesize", "generate QA training data");
    synth_cmd->add_option("--manifest", synth.manifest_path, "corpus manifest JSON")->required();
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--scenario-dir", synth.scenario_dir,
                          "directory of per-document scenario files");
    synth_cmd->add_option("--parallel", synth.parallel, "worker threads");

    ExportOpts exp;
    CLI::App* export_cmd = app.add_subcommand("export-sft", "convert a dataset to SFT samples");
    export_cmd->add_option("--dataset", exp.dataset_path, "dataset JSONL")->required();
    export_cmd->add_option("--out", exp.out_path, "output JSONL path")->required();
    export_cmd->add_option("--tokenizer", exp.tokenizer, "whitespace or none");

    EvalOpts ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against gold answers");
    eval_cmd->add_option("--pred", ev.pred_path, "predictions JSONL")->required();
    eval_cmd->add_option("--gold", ev.gold_path, "gold answers JSONL")->required();
    eval_cmd->add_option("--judge-scenario", ev.judge_scenario, "scripted judge scenario file");
    eval_cmd->add_flag("--judge", ev.use_judge, "also score with the judge endpoint");
    eval_cmd->add_option("--report", ev.report_path, "write a score report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(ingest_cmd)) return cmd_ingest(global, ingest);
        if (app.got_subcommand(ask_cmd)) return cmd_ask(global, ask);
        if (app.got_subcommand(synth_cmd)) return cmd_synthesize(global, synth);
        if (app.got_subcommand(export_cmd)) return cmd_export_sft(global, exp);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(global, ev);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
