#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "docqa/clients.hpp"
#include "docqa/errors.hpp"
#include "docqa/prompts.hpp"
#include "docqa/synthesis.hpp"
#include "test_support.hpp"

using namespace docqa;
using namespace docqa::testsupport;
using nlohmann::json;

namespace {

ScriptedSpec ordered(std::vector<std::string> responses) {
    ScriptedSpec spec;
    spec.ordered = std::move(responses);
    return spec;
}

ScriptedSpec always(std::string response) {
    ScriptedSpec spec;
    spec.mode = "keyed";
    spec.has_default = true;
    spec.default_response = std::move(response);
    return spec;
}

std::string call_raw(const std::string& name, const std::string& args_json,
                     const std::string& think = "") {
    std::string out;
    if (!think.empty()) out += "<think>\n" + think + "\n</think>\n\n";
    out += "<tool_call>\n{\"name\": \"" + name + "\", \"arguments\": " + args_json +
           "}\n</tool_call>";
    return out;
}

std::string search_raw(const std::string& keyword, const std::string& think = "") {
    return call_raw("search", "{\"keywords\": [\"" + keyword + "\"]}", think);
}

class RecordingPolicy : public PolicyClient {
public:
    explicit RecordingPolicy(ScriptedSpec spec) : inner_(std::move(spec)) {}

    std::string complete(const std::vector<ChatMessage>& messages, const std::string& tools,
                         const SamplingParams& sampling) override {
        seen_messages.push_back(messages);
        seen_tools.push_back(tools);
        return inner_.complete(messages, tools, sampling);
    }
    std::string identity() const override { return "recording"; }

    std::vector<std::vector<ChatMessage>> seen_messages;
    std::vector<std::string> seen_tools;

private:
    ScriptedPolicyClient inner_;
};

class StaticSummarizer : public SummarizerClient {
public:
    std::string summarize(const std::string&, const std::string&,
                          const std::vector<std::string>&) override {
        return "Condensed.";
    }
    std::string identity() const override { return "static"; }
};

class FailingPolicy : public PolicyClient {
public:
    std::string complete(const std::vector<ChatMessage>&, const std::string&,
                         const SamplingParams&) override {
        throw PolicyUnavailable("endpoint down");
    }
    std::string identity() const override { return "failing"; }
};

Outline tiny_outline() {
    std::string body = R"([
        {"type": "title", "text": "Overview", "page_idx": 0, "bbox": [0, 0, 9, 20],
         "title_height": 20},
        {"type": "text", "text": "Budget detail for the year.", "page_idx": 0,
         "bbox": [0, 30, 9, 40]}
    ])";
    return build_outline(ingest_mineru_json("tiny", body));
}

ExplorationTrajectory one_step_exploration() {
    ExplorationTrajectory t;
    t.doc_id = "tiny";
    t.source_tag = "other";
    ExplorationStep s;
    s.intent = "probe";
    s.action.name = "search";
    s.action.arguments = json::parse(R"({"keywords": ["budget"]})");
    s.observation = "A Document search for `budget` found 1 result:";
    t.steps.push_back(std::move(s));
    return t;
}

QAPair qa_pair(const std::string& q, const std::string& a,
               std::vector<std::string> fields = {"question", "answer"}) {
    QAPair qa;
    qa.question = q;
    qa.answer = a;
    qa.raw_fields = std::move(fields);
    return qa;
}

const CheckResult* check_named(const std::vector<CheckResult>& checks, const std::string& name) {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

bool check_failed(const std::vector<CheckResult>& checks, const std::string& name) {
    const CheckResult* c = check_named(checks, name);
    return c != nullptr && !c->passed;
}

}  // namespace

TEST_CASE("exploration depth caps by source tag") {
    SynthesisConfig cfg;
    CHECK(max_depth_for(cfg, "longdocurl") == 20);
    CHECK(max_depth_for(cfg, "mmdocrag") == 20);
    CHECK(max_depth_for(cfg, "dude") == 15);
    CHECK(max_depth_for(cfg, "cuad") == 15);
    CHECK(max_depth_for(cfg, "other") == 15);
    CHECK(max_depth_for(cfg, "never_heard_of_it") == 15);

    cfg.max_depth_by_source["other"] = 7;
    CHECK(max_depth_for(cfg, "unmapped") == 7);
    cfg.max_depth_by_source.erase("other");
    CHECK(max_depth_for(cfg, "unmapped") == 15);
}

TEST_CASE("exploration stops exactly at the depth cap") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    SynthesisConfig cfg;

    SUBCASE("longdocurl runs 20 steps") {
        RecordingPolicy explorer(always(search_raw("budget")));
        ExplorationTrajectory t = explore(o, explorer, kit, cfg, "longdocurl");
        CHECK(t.steps.size() == 20);
        CHECK(!t.flagged_incomplete);
    }

    SUBCASE("cuad runs 15 steps") {
        RecordingPolicy explorer(always(search_raw("budget")));
        ExplorationTrajectory t = explore(o, explorer, kit, cfg, "cuad");
        CHECK(t.steps.size() == 15);
    }

    SUBCASE("unknown tags use the other cap") {
        RecordingPolicy explorer(always(search_raw("budget")));
        ExplorationTrajectory t = explore(o, explorer, kit, cfg, "mystery");
        CHECK(t.steps.size() == 15);
    }
}

TEST_CASE("exploration system message embeds the outline") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    RecordingPolicy explorer(ordered({"done here"}));

    explore(o, explorer, kit, SynthesisConfig{}, "other", "EXPLORE THE DOC");
    REQUIRE(explorer.seen_messages.size() == 1);
    const ChatMessage& system = explorer.seen_messages[0][0];
    CHECK(system.role == "system");
    CHECK(system.content.rfind("EXPLORE THE DOC\n", 0) == 0);
    CHECK(system.content.find(
              "\nI've uploaded a document, and below is the outline in XML format:\n") !=
          std::string::npos);
    CHECK(system.content.find("<document doc_id=\"tiny\">") != std::string::npos);
    CHECK(explorer.seen_tools[0] == tools_json());
}

TEST_CASE("exploration records intents, observations and raw turns") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    RecordingPolicy explorer(ordered({
        search_raw("budget", "find the numbers"),
        "I have enough now.",
    }));

    ExplorationTrajectory t = explore(o, explorer, kit, SynthesisConfig{}, "other");
    REQUIRE(t.steps.size() == 1);
    CHECK(t.doc_id == "tiny");
    CHECK(t.source_tag == "other");
    CHECK(t.steps[0].intent == "find the numbers");
    CHECK(t.steps[0].action.name == "search");
    CHECK(!t.steps[0].suppressed);
    CHECK(t.steps[0].observation.find("found 1 result:") != std::string::npos);
    CHECK(t.steps[0].raw.find("<tool_call>") != std::string::npos);
    CHECK(!t.flagged_incomplete);
    CHECK(t.notes.empty());

    REQUIRE(explorer.seen_messages.size() == 2);
    REQUIRE(explorer.seen_messages[1].size() == 3);
    CHECK(explorer.seen_messages[1][1].role == "assistant");
    CHECK(explorer.seen_messages[1][1].content == t.steps[0].raw);
    CHECK(explorer.seen_messages[1][2].role == "tool");
}

TEST_CASE("consecutive duplicate calls are suppressed, not executed") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    RecordingPolicy explorer(ordered({
        search_raw("budget"),
        search_raw("budget"),
        search_raw("year"),
        "done",
    }));

    ExplorationTrajectory t = explore(o, explorer, kit, SynthesisConfig{}, "other");
    REQUIRE(t.steps.size() == 3);
    CHECK(!t.steps[0].suppressed);
    CHECK(t.steps[1].suppressed);
    CHECK(t.steps[1].observation.rfind("Duplicate tool call detected", 0) == 0);
    CHECK(!t.steps[2].suppressed);
    CHECK(t.steps[2].observation.find("found") != std::string::npos);

    SUBCASE("a repeat after an intervening call is executed again") {
        RecordingPolicy explorer2(ordered({
            search_raw("budget"),
            search_raw("year"),
            search_raw("budget"),
            "done",
        }));
        ExplorationTrajectory t2 = explore(o, explorer2, kit, SynthesisConfig{}, "other");
        REQUIRE(t2.steps.size() == 3);
        CHECK(!t2.steps[2].suppressed);
    }
}

TEST_CASE("exploration stopping conditions") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);

    SUBCASE("malformed output stops with a note") {
        RecordingPolicy explorer(ordered({"<tool_call>\n{broken\n</tool_call>"}));
        ExplorationTrajectory t = explore(o, explorer, kit, SynthesisConfig{}, "other");
        CHECK(t.steps.empty());
        CHECK(!t.flagged_incomplete);
        REQUIRE(t.notes.size() == 1);
        CHECK(t.notes[0].find("explorer output malformed") != std::string::npos);
    }

    SUBCASE("explorer errors flag the trajectory incomplete") {
        FailingPolicy bad;
        ExplorationTrajectory t = explore(o, bad, kit, SynthesisConfig{}, "other");
        CHECK(t.steps.empty());
        CHECK(t.flagged_incomplete);
        REQUIRE(t.notes.size() == 1);
        CHECK(t.notes[0].find("explorer unavailable") != std::string::npos);
    }

    SUBCASE("errors mid-run keep the earlier steps") {
        RecordingPolicy explorer(ordered({search_raw("budget")}));
        ExplorationTrajectory t = explore(o, explorer, kit, SynthesisConfig{}, "other");
        CHECK(t.steps.size() == 1);
        CHECK(t.flagged_incomplete);
    }
}

TEST_CASE("synthesize accepts a clean pair on the first attempt") {
    ScriptedPolicyClient synthesizer(ordered({
        R"(Here is the pair: {"question": "What was the total budget?", "answer": "$42.0 million"})",
    }));
    SynthesisResult r = synthesize(one_step_exploration(), synthesizer);
    CHECK(r.parsed);
    CHECK(r.valid);
    CHECK(r.attempts == 1);
    REQUIRE(r.qa.has_value());
    CHECK(r.qa->question == "What was the total budget?");
    CHECK(r.qa->answer == "$42.0 million");
    CHECK(r.qa->raw_fields == std::vector<std::string>{"answer", "question"});
}

TEST_CASE("synthesize shows the exploration transcript to the model") {
    RecordingPolicy synthesizer(ordered({R"({"question": "q", "answer": "a"})"}));
    synthesize(one_step_exploration(), synthesizer, "MAKE A PAIR");
    REQUIRE(synthesizer.seen_messages.size() == 1);
    const auto& msgs = synthesizer.seen_messages[0];
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == "system");
    CHECK(msgs[0].content == "MAKE A PAIR");
    CHECK(msgs[1].role == "user");
    CHECK(msgs[1].content.rfind("Exploration trajectory:\n\nStep 1\nIntent: probe\nAction: ", 0) ==
          0);
    CHECK(msgs[1].content.find("{\"arguments\":{\"keywords\":[\"budget\"]},\"name\":\"search\"}") !=
          std::string::npos);
    CHECK(msgs[1].content.find("Observation: A Document search") != std::string::npos);
    CHECK(synthesizer.seen_tools[0].empty());
}

TEST_CASE("synthesize resubmits once after a parse failure") {
    RecordingPolicy synthesizer(ordered({
        "no json in sight",
        R"({"question": "ok?", "answer": "yes"})",
    }));
    SynthesisResult r = synthesize(one_step_exploration(), synthesizer);
    CHECK(r.attempts == 2);
    CHECK(r.parsed);
    CHECK(r.valid);
    CHECK(r.qa->question == "ok?");

    const auto& retry = synthesizer.seen_messages[1];
    REQUIRE(retry.size() == 4);
    CHECK(retry[2].role == "assistant");
    CHECK(retry[2].content == "no json in sight");
    CHECK(retry[3].role == "user");
    CHECK(retry[3].content.find("could not be parsed") != std::string::npos);
}

TEST_CASE("synthesize gives up after two unparseable outputs") {
    ScriptedPolicyClient synthesizer(ordered({"nothing", "still nothing"}));
    CHECK_THROWS_AS(synthesize(one_step_exploration(), synthesizer), UnparseableOutput);
}

TEST_CASE("synthesize resubmits once after failed validation") {
    RecordingPolicy synthesizer(ordered({
        R"({"question": "What? And also why?", "answer": "a"})",
        R"({"question": "What changed?", "answer": "The budget."})",
    }));
    SynthesisResult r = synthesize(one_step_exploration(), synthesizer);
    CHECK(r.attempts == 2);
    CHECK(r.valid);
    CHECK(r.qa->question == "What changed?");
    CHECK(synthesizer.seen_messages[1][3].content.find("failed validation checks") !=
          std::string::npos);
    CHECK(synthesizer.seen_messages[1][3].content.find("single_question") != std::string::npos);

    SUBCASE("a second invalid pair is returned as invalid, not thrown") {
        RecordingPolicy stubborn(ordered({
            R"({"question": "What? And why?", "answer": "a"})",
            R"({"question": "How? And when?", "answer": "b"})",
        }));
        SynthesisResult r2 = synthesize(one_step_exploration(), stubborn);
        CHECK(r2.parsed);
        CHECK(!r2.valid);
        CHECK(r2.attempts == 2);
        CHECK(r2.qa->question == "How? And when?");
        CHECK(check_failed(r2.checks, "single_question"));
    }

    SUBCASE("an unparseable retry keeps the first pair") {
        RecordingPolicy worse(ordered({
            R"({"question": "What? And why?", "answer": "a"})",
            "garbage",
        }));
        SynthesisResult r3 = synthesize(one_step_exploration(), worse);
        CHECK(r3.parsed);
        CHECK(!r3.valid);
        CHECK(r3.qa->question == "What? And why?");
    }
}

TEST_CASE("synthesize requires a non-empty exploration") {
    ScriptedPolicyClient synthesizer(ordered({"x"}));
    ExplorationTrajectory empty;
    CHECK_THROWS_AS(synthesize(empty, synthesizer), ConfigError);
}

TEST_CASE("synthesize coerces non-string fields to text") {
    ScriptedPolicyClient synthesizer(ordered({R"({"question": "How many?", "answer": 42})"}));
    SynthesisResult r = synthesize(one_step_exploration(), synthesizer);
    CHECK(r.qa->answer == "42");
}

TEST_CASE("qa validation checks") {
    auto names = [](const QAPair& qa) {
        std::vector<std::string> failed;
        for (const auto& c : validate_qa(qa))
            if (!c.passed) failed.push_back(c.name);
        return failed;
    };

    CHECK(names(qa_pair("What is the total?", "42")).empty());
    CHECK(names(qa_pair("", "a")) == std::vector<std::string>{"non_empty"});
    CHECK(names(qa_pair("q?", "   ")) == std::vector<std::string>{"non_empty"});
    CHECK(names(qa_pair("\xE4\xBD\xA0\xE5\xA5\xBD?", "a")) ==
          std::vector<std::string>{"latin_only"});
    CHECK(names(qa_pair("ok?", "\xE7\xAD\x94")) == std::vector<std::string>{"latin_only"});
    CHECK(names(qa_pair("What? Or what else?", "a")) ==
          std::vector<std::string>{"single_question"});
    CHECK(names(qa_pair("See Figure 3 for details?", "a")) ==
          std::vector<std::string>{"no_location_refs"});
    CHECK(names(qa_pair("q", std::string(201, 'x'))) ==
          std::vector<std::string>{"answer_length"});
    CHECK(names(qa_pair("q", "first\n\nsecond")) == std::vector<std::string>{"answer_length"});
    CHECK(names(qa_pair("q", "a", {"question", "answer", "source"})) ==
          std::vector<std::string>{"two_fields"});

    SUBCASE("boundary cases that must pass") {
        CHECK(names(qa_pair("q", std::string(200, 'x'))).empty());
        CHECK(names(qa_pair("q", "line one\nline two")).empty());
        CHECK(names(qa_pair("caf\xC3\xA9 menu?", "r\xC3\xA9sum\xC3\xA9")).empty());
        CHECK(names(qa_pair("spend \xE2\x80\x94 total?", "a")).empty());
        CHECK(names(qa_pair("Which sections of the report grew?", "a")).empty());
        CHECK(names(qa_pair("What does the summary table show overall?", "a")).empty());
        CHECK(names(qa_pair("q", "See page 5")).empty());
    }

    SUBCASE("location reference variants") {
        for (const char* q : {"As in fig. 2?", "Is Table 7 right?", "What is on page 12?",
                              "Across pages, what grew?", "In section 4, what is stated?",
                              "Which section_id holds it?", "What section ids matter?"}) {
            INFO(q);
            CHECK(names(qa_pair(q, "a")) == std::vector<std::string>{"no_location_refs"});
        }
    }

    SUBCASE("typographic punctuation stays latin") {
        CHECK(names(qa_pair("cost \xE2\x80\x9Cnet\xE2\x80\x9D of fees?", "a")).empty());
        CHECK(!names(qa_pair("price \xE2\x82\xAC 50?", "a")).empty());
    }

    SUBCASE("hand-built pairs without raw fields skip the field check") {
        QAPair qa = qa_pair("q", "a", {});
        CHECK(check_named(validate_qa(qa), "two_fields")->passed);
    }

    SUBCASE("missing answer field fails two_fields") {
        CHECK(names(qa_pair("q", "a", {"question"})) == std::vector<std::string>{"two_fields"});
    }
}

TEST_CASE("qa serialization keeps exactly two fields") {
    json j = serialize_qa(qa_pair("q", "a", {"question", "answer", "junk"}));
    CHECK(j.size() == 2);
    CHECK(j["question"] == "q");
    CHECK(j["answer"] == "a");
}

TEST_CASE("rejection sampling accepts the first judged-correct attempt") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    SynthesisConfig cfg;
    prompts::PromptSet ps = prompts::defaults();
    QAPair qa = qa_pair("What is the parks share?", "0.18");

    SUBCASE("first attempt accepted") {
        ScriptedPolicyClient teacher(ordered({"The share is **0.18**."}));
        ScriptedPolicyClient judge(ordered({"CORRECT"}));
        std::vector<std::string> notes;
        auto tt = reject_sample(qa, o, kit, teacher, &judge, cfg, ps, &notes);
        REQUIRE(tt.has_value());
        CHECK(tt->attempt == 1);
        CHECK(tt->doc_id == "tiny");
        CHECK(tt->qa.answer == "0.18");
        CHECK(tt->trajectory.answer == "The share is **0.18**.");
        CHECK(notes == std::vector<std::string>{"attempt 1: accepted"});
    }

    SUBCASE("rejected then accepted lands on attempt 2") {
        ScriptedPolicyClient teacher(ordered({"It is **0.25**.", "It is **0.18**."}));
        ScriptedPolicyClient judge(ordered({"incorrect", "correct"}));
        std::vector<std::string> notes;
        auto tt = reject_sample(qa, o, kit, teacher, &judge, cfg, ps, &notes);
        REQUIRE(tt.has_value());
        CHECK(tt->attempt == 2);
        CHECK(notes ==
              std::vector<std::string>{"attempt 1: rejected", "attempt 2: accepted"});
    }

    SUBCASE("k failures return nothing") {
        ScriptedPolicyClient teacher(ordered({"a", "b", "c"}));
        ScriptedPolicyClient judge(ordered({"no", "no", "no"}));
        std::vector<std::string> notes;
        auto tt = reject_sample(qa, o, kit, teacher, &judge, cfg, ps, &notes);
        CHECK(!tt.has_value());
        CHECK(notes.size() == 3);
    }
}

TEST_CASE("rejection sampling falls back to the rule when the judge fails") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    SynthesisConfig cfg;
    prompts::PromptSet ps = prompts::defaults();
    QAPair qa = qa_pair("share?", "0.18");

    ScriptedPolicyClient teacher(ordered({"The answer is **0.18**."}));
    FailingPolicy judge;
    std::vector<std::string> notes;
    auto tt = reject_sample(qa, o, kit, teacher, &judge, cfg, ps, &notes);
    REQUIRE(tt.has_value());
    bool fell_back = false;
    for (const auto& n : notes)
        if (n.find("falling back to the answer rule") != std::string::npos) fell_back = true;
    CHECK(fell_back);

    SUBCASE("gibberish verdicts score incorrect, never correct") {
        ScriptedPolicyClient teacher2(ordered({"**0.18**", "**0.18**", "**0.18**"}));
        ScriptedPolicyClient vague(ordered({"hmm", "maybe", "unclear"}));
        std::vector<std::string> notes2;
        auto tt2 = reject_sample(qa, o, kit, teacher2, &vague, cfg, ps, &notes2);
        CHECK(!tt2.has_value());
        bool unparseable_note = false;
        for (const auto& n : notes2)
            if (n.find("judge verdict unparseable") != std::string::npos) unparseable_note = true;
        CHECK(unparseable_note);
    }
}

TEST_CASE("rejection sampling with the exact_match rule ignores the judge") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    SynthesisConfig cfg;
    cfg.acceptance_rule = "exact_match";
    prompts::PromptSet ps = prompts::defaults();

    ScriptedPolicyClient teacher(ordered({"Roughly **14.92%** over the hurdle."}));
    ScriptedPolicyClient judge(ordered({}));  // would throw if consulted
    auto tt = reject_sample(qa_pair("gap?", "14.92%"), o, kit, teacher, &judge, cfg, ps);
    REQUIRE(tt.has_value());
    CHECK(tt->attempt == 1);
}

TEST_CASE("a dead teacher aborts rejection sampling loudly") {
    Outline o = tiny_outline();
    StaticSummarizer sum;
    Toolkit kit(o, sum);
    FailingPolicy teacher;
    ScriptedPolicyClient judge(ordered({"correct"}));
    CHECK_THROWS_AS(reject_sample(qa_pair("q?", "a"), o, kit, teacher, &judge,
                                  SynthesisConfig{}, prompts::defaults()),
                    PolicyUnavailable);
}

TEST_CASE("corpus manifest loading") {
    std::vector<CorpusEntry> entries =
        load_corpus_manifest(repo_path("fixtures/corpus/manifest.json"));
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].path == repo_path("fixtures/corpus/netflix10k.mineru.json"));
    CHECK(entries[0].source_tag == "longdocurl");
    CHECK(entries[1].source_tag == "dude");
    CHECK(entries[2].source_tag == "cuad");

    SUBCASE("rejects unknown keys and bad shapes") {
        write_file("/tmp/docqa_bad_manifest.json", R"([{"path": "x.json", "extra": 1}])");
        CHECK_THROWS_AS(load_corpus_manifest("/tmp/docqa_bad_manifest.json"), ConfigError);
        write_file("/tmp/docqa_bad_manifest.json", R"({"path": "x.json"})");
        CHECK_THROWS_AS(load_corpus_manifest("/tmp/docqa_bad_manifest.json"), ConfigError);
        write_file("/tmp/docqa_bad_manifest.json", R"([{"source_tag": "dude"}])");
        CHECK_THROWS_AS(load_corpus_manifest("/tmp/docqa_bad_manifest.json"), ConfigError);
    }

    SUBCASE("missing source tags default to other") {
        write_file("/tmp/docqa_manifest_other.json", R"([{"path": "/abs/doc.json"}])");
        std::vector<CorpusEntry> e = load_corpus_manifest("/tmp/docqa_manifest_other.json");
        REQUIRE(e.size() == 1);
        CHECK(e[0].source_tag == "other");
        CHECK(e[0].path == "/abs/doc.json");
    }
}

TEST_CASE("run_document demands the full client set") {
    Outline o = tiny_outline();
    DocClientSet clients;
    clients.explorer = std::make_unique<ScriptedPolicyClient>(ordered({"x"}));
    CHECK_THROWS_AS(
        run_document(o, CorpusEntry{"p", "other"}, clients, SynthesisConfig{},
                     prompts::defaults()),
        ConfigError);
}

TEST_CASE("an empty exploration skips synthesis but counts as explored") {
    Outline o = tiny_outline();
    DocClientSet clients;
    clients.explorer = std::make_unique<ScriptedPolicyClient>(ordered({"nothing to do"}));
    clients.synthesizer = std::make_unique<ScriptedPolicyClient>(ordered({}));
    clients.teacher = std::make_unique<ScriptedPolicyClient>(ordered({}));
    clients.summarizer = std::make_unique<ScriptedSummarizerClient>(always("s"));

    DocOutcome outcome = run_document(o, CorpusEntry{"p", "other"}, clients, SynthesisConfig{},
                                      prompts::defaults());
    CHECK(outcome.report.explored == 1);
    CHECK(outcome.report.synthesized == 0);
    CHECK(outcome.report.validated == 0);
    CHECK(outcome.report.accepted == 0);
    CHECK(!outcome.report.failed);
    bool noted = false;
    for (const auto& n : outcome.report.notes)
        if (n.find("exploration produced no steps") != std::string::npos) noted = true;
    CHECK(noted);
}

namespace {

ClientFactory fixture_factory() {
    return [](const CorpusEntry& entry) {
        std::string name = entry.path.substr(entry.path.find_last_of('/') + 1);
        std::string stem = name.substr(0, name.size() - std::string(".mineru.json").size());
        ScenarioSet sc = load_scenario_file(
            repo_path("fixtures/scenarios/synth/" + stem + ".scenario.json"));
        DocClientSet set;
        set.explorer = sc.make_policy("explorer");
        set.synthesizer = sc.make_policy("synthesizer");
        set.teacher = sc.make_policy("teacher");
        if (sc.has("judge")) set.judge = sc.make_policy("judge");
        if (sc.has("summarizer"))
            set.summarizer = sc.make_summarizer("summarizer");
        else
            set.summarizer = std::make_unique<ScriptedSummarizerClient>(always("(none)"));
        return set;
    };
}

}  // namespace

TEST_CASE("pipeline conserves counts over the fixture corpus") {
    std::vector<CorpusEntry> manifest =
        load_corpus_manifest(repo_path("fixtures/corpus/manifest.json"));
    PipelineResult r =
        run_pipeline(manifest, fixture_factory(), SynthesisConfig{}, prompts::defaults());

    CHECK(r.report.documents == 3);
    CHECK(r.report.explored == 3);
    CHECK(r.report.synthesized == 3);
    CHECK(r.report.validated == 2);
    CHECK(r.report.accepted == 2);
    CHECK(r.report.failed_documents == 0);
    CHECK(r.report.explored >= r.report.synthesized);
    CHECK(r.report.synthesized >= r.report.validated);
    CHECK(r.report.validated >= r.report.accepted);

    REQUIRE(r.dataset.size() == 2);
    CHECK(r.dataset[0].doc_id == "netflix10k");
    CHECK(r.dataset[0].attempt == 2);
    CHECK(r.dataset[0].exploration_ref == "netflix10k#exploration-1");
    CHECK(r.dataset[1].doc_id == "doc_a");
    CHECK(r.dataset[1].attempt == 1);

    SUBCASE("parallel execution yields identical bytes in manifest order") {
        PipelineResult r3 =
            run_pipeline(manifest, fixture_factory(), SynthesisConfig{}, prompts::defaults(), 3);
        CHECK(dataset_to_jsonl(r3.dataset) == dataset_to_jsonl(r.dataset));
        CHECK(stage_report_to_json(r3.report) == stage_report_to_json(r.report));
    }
}

TEST_CASE("pipeline isolates per-document failures") {
    std::vector<CorpusEntry> manifest = {
        CorpusEntry{"/nonexistent/void.mineru.json", "other"},
        CorpusEntry{repo_path("fixtures/corpus/doc_a.mineru.json"), "dude"},
    };
    PipelineResult r =
        run_pipeline(manifest, fixture_factory(), SynthesisConfig{}, prompts::defaults());
    CHECK(r.report.documents == 2);
    CHECK(r.report.failed_documents == 1);
    REQUIRE(r.report.docs.size() == 2);
    CHECK(r.report.docs[0].failed);
    CHECK(r.report.docs[0].doc_id == "void");
    CHECK(!r.report.docs[0].notes.empty());
    CHECK(!r.report.docs[1].failed);
    CHECK(r.report.docs[1].accepted == 1);
    CHECK(r.dataset.size() == 1);
}

TEST_CASE("dataset jsonl round-trips") {
    std::vector<CorpusEntry> manifest =
        load_corpus_manifest(repo_path("fixtures/corpus/manifest.json"));
    PipelineResult r =
        run_pipeline(manifest, fixture_factory(), SynthesisConfig{}, prompts::defaults());

    std::string jsonl = dataset_to_jsonl(r.dataset);
    std::vector<TrainingTrajectory> back = dataset_from_jsonl(jsonl);
    CHECK(dataset_to_jsonl(back) == jsonl);
    REQUIRE(back.size() == r.dataset.size());
    CHECK(back[0].qa.question == r.dataset[0].qa.question);
    CHECK(back[0].trajectory.steps.size() == r.dataset[0].trajectory.steps.size());

    CHECK_THROWS_AS(dataset_from_jsonl("{\"record\": \"other\"}\n"), IOFailure);
    CHECK_THROWS_AS(dataset_from_jsonl("broken\n"), IOFailure);
    CHECK(dataset_from_jsonl("").empty());
}

TEST_CASE("stage report serialization shape") {
    StageReport report;
    DocReport doc;
    doc.doc_id = "d";
    doc.source_tag = "dude";
    doc.explored = 1;
    doc.notes.push_back("note");
    report.docs.push_back(doc);
    report.documents = 1;
    report.explored = 1;

    json j = stage_report_to_json(report);
    CHECK(j["docs"].size() == 1);
    CHECK(j["docs"][0]["doc_id"] == "d");
    CHECK(j["docs"][0]["notes"][0] == "note");
    json totals = j["totals"];
    for (const char* key : {"documents", "explored", "synthesized", "validated", "accepted",
                            "failed_documents"})
        CHECK(totals.contains(key));
    CHECK(totals["documents"] == 1);
}
