#include "docqa/sft.hpp"

#include <cctype>
#include <sstream>

#include "docqa/errors.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

const char* segment_role_name(SegmentRole role) {
    switch (role) {
        case SegmentRole::thought: return "thought";
        case SegmentRole::action: return "action";
        case SegmentRole::observation: return "observation";
    }
    return "thought";
}

SegmentRole segment_role_from_name(const std::string& name) {
    if (name == "thought") return SegmentRole::thought;
    if (name == "action") return SegmentRole::action;
    if (name == "observation") return SegmentRole::observation;
    throw IOFailure("unknown segment role: " + name);
}

TrainingSample build_sample(const Trajectory& traj) {
    TrainingSample sample;
    sample.task_context = traj.task_context;
    for (const Step& step : traj.steps) {
        Segment thought;
        thought.role = SegmentRole::thought;
        if (!step.thought.empty()) thought.text = "<think>\n" + step.thought + "\n</think>\n\n";
        sample.segments.push_back(std::move(thought));

        Segment action;
        action.role = SegmentRole::action;
        if (step.action.kind == Action::Kind::tool_call)
            action.text = render_action(step.action) + "\n";
        else
            action.text = step.action.text;
        sample.segments.push_back(std::move(action));

        if (step.observation.has_value()) {
            Segment obs;
            obs.role = SegmentRole::observation;
            obs.text = "<tool_response>\n" + *step.observation + "\n</tool_response>\n";
            sample.segments.push_back(std::move(obs));
        }
    }
    return sample;
}

std::vector<TokenizerAdapter::Token> WhitespaceTokenizer::tokenize(const std::string& text) const {
    std::vector<Token> out;
    size_t n = text.size();
    size_t start = 0, i = 0;
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    while (i < n) {
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        out.push_back({start, i});
        start = i;
    }
    if (start < n) out.push_back({start, n});  // all-whitespace text
    return out;
}

LossMask build_loss_mask(const TrainingSample& sample, const TokenizerAdapter& tokenizer) {
    LossMask mask;
    for (const Segment& seg : sample.segments) {
        auto tokens = tokenizer.tokenize(seg.text);
        int flag = seg.role == SegmentRole::observation ? 0 : 1;
        for (size_t i = 0; i < tokens.size(); ++i) mask.token_flags.push_back(flag);
        if (flag == 1) mask.kept_count += tokens.size();
    }
    return mask;
}

double masked_nll(const std::vector<double>& token_logprobs, const LossMask& mask) {
    if (token_logprobs.size() != mask.token_flags.size())
        throw ConfigError("logprob count does not match the mask length");
    if (mask.kept_count == 0) throw EmptyKeptSet("loss mask keeps no tokens");
    double sum = 0.0;
    for (size_t i = 0; i < token_logprobs.size(); ++i)
        if (mask.token_flags[i]) sum += token_logprobs[i];
    return -sum / static_cast<double>(mask.kept_count);
}

json sample_to_json(const TrainingSample& sample, const TokenizerAdapter* tokenizer) {
    json segments = json::array();
    for (const Segment& seg : sample.segments)
        segments.push_back({{"text", seg.text}, {"role", segment_role_name(seg.role)}});
    json j = {{"record", "sample"}, {"task_context", sample.task_context}, {"segments", segments}};
    if (tokenizer) {
        LossMask mask = build_loss_mask(sample, *tokenizer);
        j["token_flags"] = mask.token_flags;
        j["kept_count"] = mask.kept_count;
    }
    return j;
}

TrainingSample sample_from_json(const json& j) {
    if (!j.is_object() || j.value("record", "") != "sample")
        throw IOFailure("SFT record is not a sample");
    TrainingSample sample;
    sample.task_context = j.value("task_context", "");
    for (const auto& js : j.value("segments", json::array())) {
        Segment seg;
        seg.text = js.value("text", "");
        seg.role = segment_role_from_name(js.value("role", ""));
        sample.segments.push_back(std::move(seg));
    }
    return sample;
}

std::string export_sft_jsonl(const std::vector<TrainingSample>& samples,
                             const TokenizerAdapter* tokenizer) {
    json manifest = {{"record", "manifest"},
                     {"version", 1},
                     {"samples", samples.size()},
                     {"tokenizer", tokenizer ? json(tokenizer->name()) : json(nullptr)}};
    std::string out = manifest.dump() + "\n";
    for (const auto& s : samples) out += sample_to_json(s, tokenizer).dump() + "\n";
    return out;
}

std::vector<TrainingSample> import_sft_jsonl(const std::string& text) {
    std::vector<TrainingSample> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    bool saw_manifest = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw IOFailure("SFT file line " + std::to_string(lineno) + " is not a JSON object");
        std::string record = j.value("record", "");
        if (record == "manifest") {
            saw_manifest = true;
            continue;
        }
        out.push_back(sample_from_json(j));
    }
    if (!saw_manifest) throw IOFailure("SFT file is missing its manifest line");
    return out;
}

bool samples_structurally_equal(const TrainingSample& a, const TrainingSample& b) {
    if (a.task_context != b.task_context) return false;
    if (a.segments.size() != b.segments.size()) return false;
    for (size_t i = 0; i < a.segments.size(); ++i) {
        if (a.segments[i].text != b.segments[i].text) return false;
        if (a.segments[i].role != b.segments[i].role) return false;
    }
    return true;
}

}  // namespace docqa
