#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "docqa/agent.hpp"
#include "docqa/errors.hpp"
#include "docqa/sft.hpp"
#include "docqa/text_util.hpp"
#include "test_support.hpp"

using namespace docqa;
using namespace docqa::testsupport;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    q += "'";
    return q;
}

RunResult run_cli(const std::vector<std::string>& args) {
    static int counter = 0;
    fs::path errfile =
        fs::temp_directory_path() / ("docqa_cli_err_" + std::to_string(counter++) + ".txt");
    std::string cmd = shell_quote(DOCQA_CLI_BIN);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " 2>" + shell_quote(errfile.string());

    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(errfile.string());
    fs::remove(errfile);
    return r;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("docqa_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    for (auto& part : split(text, '\n'))
        if (!part.empty()) out.push_back(part);
    return out;
}

const std::string kAskQuestion =
    "What is the ratio of advertising expenses to consolidated revenues for fiscal year 2015?";

}  // namespace

TEST_CASE("help and argument errors") {
    CHECK(run_cli({"--help"}).exit_code == 0);
    CHECK(run_cli({"ask", "--help"}).exit_code == 0);
    CHECK(run_cli({}).exit_code == 2);
    CHECK(run_cli({"unknown-subcommand"}).exit_code == 2);
    CHECK(run_cli({"ingest"}).exit_code == 2);
    CHECK(run_cli({"ask", "q", "--doc", "x", "--bogus-flag"}).exit_code == 2);
}

TEST_CASE("ingest writes the outline artifacts") {
    fs::path out = fresh_dir("ingest");
    RunResult r = run_cli(
        {"ingest", repo_path("fixtures/corpus/netflix10k.mineru.json"), "--out", out.string()});
    CHECK(r.exit_code == 0);
    auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "ingested netflix10k: 33 pages, 73 blocks, 17 sections");
    CHECK(lines[1] == (out / "netflix10k.outline.xml").string());
    CHECK(lines[2] == (out / "netflix10k.index.json").string());
    REQUIRE(fs::exists(lines[1]));
    REQUIRE(fs::exists(lines[2]));

    std::string xml = read_file(lines[1]);
    CHECK(xml.find("<document doc_id=\"netflix10k\">") != std::string::npos);
    json index = json::parse(read_file(lines[2]));
    CHECK(index["doc_id"] == "netflix10k");

    SUBCASE("the index round-trips through ask --doc") {
        RunResult ask = run_cli({"ask", kAskQuestion, "--doc", lines[2], "--scenario",
                                 repo_path("fixtures/scenarios/ask_netflix.scenario.json")});
        CHECK(ask.exit_code == 0);
        CHECK(ask.out.find("**0.105**") != std::string::npos);
    }
}

TEST_CASE("ingest failures use the schema exit code") {
    CHECK(run_cli({"ingest", "/nonexistent/layout.json"}).exit_code == 2);

    fs::path bad = fresh_dir("ingest_bad") / "broken.mineru.json";
    write_file(bad.string(), "this is not json");
    CHECK(run_cli({"ingest", bad.string()}).exit_code == 2);

    fs::path cfg = fresh_dir("ingest_cfg") / "config.json";
    write_file(cfg.string(), R"({"bogus": 1})");
    RunResult r = run_cli({"--config", cfg.string(), "ingest",
                           repo_path("fixtures/corpus/doc_a.mineru.json")});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("ask answers from a scripted scenario and writes a trace") {
    fs::path dir = fresh_dir("ask");
    fs::path trace = dir / "trace.jsonl";
    RunResult r = run_cli({"ask", kAskQuestion, "--doc",
                           repo_path("fixtures/corpus/netflix10k.mineru.json"), "--scenario",
                           repo_path("fixtures/scenarios/ask_netflix.scenario.json"), "--trace",
                           trace.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("approximately **0.105**") != std::string::npos);
    CHECK(r.err.find("steps=5 terminated_by=final_answer") != std::string::npos);

    REQUIRE(fs::exists(trace));
    Trajectory traj = trajectory_from_jsonl(read_file(trace.string()));
    CHECK(traj.doc_id == "netflix10k");
    CHECK(traj.question == kAskQuestion);
    CHECK(traj.steps.size() == 5);
    CHECK(traj.terminated_by == TerminatedBy::final_answer);
    CHECK(traj.task_context.find(kAskQuestion) != std::string::npos);
}

TEST_CASE("ask maps failures to the right exit codes") {
    SUBCASE("missing document is a schema error") {
        RunResult r = run_cli({"ask", "q", "--doc", "/nonexistent/doc.json"});
        CHECK(r.exit_code == 2);
    }

    SUBCASE("an exhausted scenario is a policy error") {
        fs::path dir = fresh_dir("ask_exhausted");
        fs::path scenario = dir / "empty.scenario.json";
        write_file(scenario.string(),
                   R"({"policy": {"mode": "ordered", "responses": []}})");
        fs::path trace = dir / "trace.jsonl";
        RunResult r = run_cli({"ask", "q", "--doc",
                               repo_path("fixtures/corpus/doc_a.mineru.json"), "--scenario",
                               scenario.string(), "--trace", trace.string()});
        CHECK(r.exit_code == 3);
        CHECK(r.err.find("terminated_by=policy_error") != std::string::npos);
        Trajectory traj = trajectory_from_jsonl(read_file(trace.string()));
        CHECK(traj.terminated_by == TerminatedBy::policy_error);
    }
}

TEST_CASE("synthesize produces a dataset, report and stable counts") {
    fs::path out = fresh_dir("synth");
    RunResult r = run_cli({"synthesize", "--manifest",
                           repo_path("fixtures/corpus/manifest.json"), "--out", out.string(),
                           "--scenario-dir", repo_path("fixtures/scenarios/synth")});
    CHECK(r.exit_code == 0);
    CHECK(r.out ==
          "documents=3 explored=3 synthesized=3 validated=2 accepted=2 failed=0\n");

    std::string dataset = read_file((out / "dataset.jsonl").string());
    CHECK(lines_of(dataset).size() == 2);
    json report = json::parse(read_file((out / "report.json").string()));
    CHECK(report["totals"]["accepted"] == 2);
    CHECK(report["totals"]["failed_documents"] == 0);
    CHECK(report["docs"].size() == 3);

    SUBCASE("parallel runs are byte-identical") {
        fs::path out3 = fresh_dir("synth_par");
        RunResult r3 = run_cli({"synthesize", "--manifest",
                                repo_path("fixtures/corpus/manifest.json"), "--out",
                                out3.string(), "--scenario-dir",
                                repo_path("fixtures/scenarios/synth"), "--parallel", "3"});
        CHECK(r3.exit_code == 0);
        CHECK(read_file((out3 / "dataset.jsonl").string()) == dataset);
        CHECK(read_file((out3 / "report.json").string()) ==
              read_file((out / "report.json").string()));
    }

    SUBCASE("a broken document yields a partial-failure exit") {
        fs::path dir = fresh_dir("synth_partial");
        fs::path manifest = dir / "manifest.json";
        write_file(manifest.string(),
                   json::array({json{{"path", "/nonexistent/void.mineru.json"},
                                     {"source_tag", "other"}},
                                json{{"path", repo_path("fixtures/corpus/doc_a.mineru.json")},
                                     {"source_tag", "dude"}}})
                       .dump());
        RunResult rp = run_cli({"synthesize", "--manifest", manifest.string(), "--out",
                                (dir / "out").string(), "--scenario-dir",
                                repo_path("fixtures/scenarios/synth")});
        CHECK(rp.exit_code == 1);
        CHECK(rp.out.find("failed=1") != std::string::npos);
        CHECK(lines_of(read_file((dir / "out" / "dataset.jsonl").string())).size() == 1);
    }
}

TEST_CASE("export-sft writes masked samples from a dataset") {
    fs::path synth_out = fresh_dir("export_src");
    REQUIRE(run_cli({"synthesize", "--manifest", repo_path("fixtures/corpus/manifest.json"),
                     "--out", synth_out.string(), "--scenario-dir",
                     repo_path("fixtures/scenarios/synth")})
                .exit_code == 0);

    fs::path sft = synth_out / "sft.jsonl";
    RunResult r = run_cli({"export-sft", "--dataset", (synth_out / "dataset.jsonl").string(),
                           "--out", sft.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.out == "exported 2 samples to " + sft.string() + "\n");

    std::string text = read_file(sft.string());
    auto lines = lines_of(text);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == R"({"record":"manifest","samples":2,"tokenizer":"whitespace","version":1})");
    std::vector<TrainingSample> samples = import_sft_jsonl(text);
    REQUIRE(samples.size() == 2);
    CHECK(!samples[0].task_context.empty());

    SUBCASE("tokenizer none omits mask data") {
        fs::path bare = synth_out / "sft_none.jsonl";
        REQUIRE(run_cli({"export-sft", "--dataset", (synth_out / "dataset.jsonl").string(),
                         "--out", bare.string(), "--tokenizer", "none"})
                    .exit_code == 0);
        auto bare_lines = lines_of(read_file(bare.string()));
        CHECK(bare_lines[0] ==
              R"({"record":"manifest","samples":2,"tokenizer":null,"version":1})");
        CHECK(json::parse(bare_lines[1]).contains("token_flags") == false);
    }

    SUBCASE("bad inputs are schema errors") {
        CHECK(run_cli({"export-sft", "--dataset", "/nonexistent.jsonl", "--out",
                       (synth_out / "x.jsonl").string()})
                  .exit_code == 2);
        CHECK(run_cli({"export-sft", "--dataset", (synth_out / "dataset.jsonl").string(),
                       "--out", (synth_out / "x.jsonl").string(), "--tokenizer", "bpe"})
                  .exit_code == 2);
    }
}

TEST_CASE("eval scores predictions against gold answers") {
    fs::path dir = fresh_dir("eval");
    fs::path pred = dir / "pred.jsonl";
    fs::path gold = dir / "gold.jsonl";
    write_file(pred.string(),
               "\"The margin was **14.92%** for the year.\"\n"
               R"({"response": "Parks take roughly 0.18 of the total."})"
               "\n");
    write_file(gold.string(),
               R"({"question": "Margin?", "answer": "14.92%", "type": "number", "precision": 4})"
               "\n"
               R"({"question": "Share?", "answer": "0.18", "type": "number"})"
               "\n");

    RunResult r = run_cli({"eval", "--pred", pred.string(), "--gold", gold.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.out == "count=2 acc=1.0000 f1=1.0000\n");

    SUBCASE("a judge scenario adds the lasj column and report items") {
        fs::path scenario = dir / "judge.scenario.json";
        write_file(scenario.string(),
                   R"({"judge": {"mode": "ordered", "responses": ["correct", "incorrect"]}})");
        fs::path report = dir / "report.json";
        RunResult rj = run_cli({"eval", "--pred", pred.string(), "--gold", gold.string(),
                                "--judge-scenario", scenario.string(), "--report",
                                report.string()});
        CHECK(rj.exit_code == 0);
        CHECK(rj.out == "count=2 acc=1.0000 f1=1.0000 lasj=0.5000\n");
        json rep = json::parse(read_file(report.string()));
        CHECK(rep["count"] == 2);
        CHECK(rep["lasj"] == doctest::Approx(0.5));
        REQUIRE(rep["items"].size() == 2);
        CHECK(rep["items"][0]["judge_correct"] == true);
        CHECK(rep["items"][1]["judge_correct"] == false);
        CHECK(rep["items"][0]["extracted"] == "14.92%");
    }

    SUBCASE("count mismatches and bad files are schema errors") {
        fs::path short_pred = dir / "short.jsonl";
        write_file(short_pred.string(), "\"only one\"\n");
        CHECK(run_cli({"eval", "--pred", short_pred.string(), "--gold", gold.string()})
                  .exit_code == 2);
        CHECK(run_cli({"eval", "--pred", "/nonexistent.jsonl", "--gold", gold.string()})
                  .exit_code == 2);
    }
}
