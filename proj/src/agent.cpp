#include "docqa/agent.hpp"

#include <sstream>

#include "docqa/errors.hpp"
#include "docqa/prompts.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

const char* terminated_by_name(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::final_answer: return "final_answer";
        case TerminatedBy::step_limit: return "step_limit";
        case TerminatedBy::policy_error: return "policy_error";
    }
    return "final_answer";
}

std::optional<TerminatedBy> terminated_by_from_name(std::string_view name) {
    if (name == "final_answer") return TerminatedBy::final_answer;
    if (name == "step_limit") return TerminatedBy::step_limit;
    if (name == "policy_error") return TerminatedBy::policy_error;
    return std::nullopt;
}

namespace {

struct TagBlock {
    size_t open_start = std::string::npos;
    size_t body_start = 0;
    size_t body_end = 0;
    size_t close_end = 0;
    bool found = false;
};

TagBlock find_block(const std::string& text, const std::string& tag, size_t from) {
    TagBlock b;
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    size_t s = text.find(open, from);
    if (s == std::string::npos) return b;
    size_t e = text.find(close, s + open.size());
    if (e == std::string::npos) return b;
    b.open_start = s;
    b.body_start = s + open.size();
    b.body_end = e;
    b.close_end = e + close.size();
    b.found = true;
    return b;
}

}  // namespace

ParsedPolicyOutput parse_policy_output(const std::string& raw) {
    ParsedPolicyOutput out;
    std::string rest = raw;

    TagBlock think = find_block(rest, "think", 0);
    if (think.found) {
        out.thought = trim(rest.substr(think.body_start, think.body_end - think.body_start));
        rest = rest.substr(0, think.open_start) + rest.substr(think.close_end);
    }

    TagBlock call_block = find_block(rest, "tool_call", 0);
    if (!call_block.found) {
        out.final_text = trim(rest);
        return out;
    }

    size_t extra = 0;
    TagBlock next = find_block(rest, "tool_call", call_block.close_end);
    while (next.found) {
        ++extra;
        next = find_block(rest, "tool_call", next.close_end);
    }
    if (extra > 0)
        out.warnings.push_back(std::to_string(extra) +
                               " additional tool_call block(s) ignored; only the first is used");

    std::string body =
        trim(rest.substr(call_block.body_start, call_block.body_end - call_block.body_start));
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        out.malformed = true;
        out.problem = "tool_call content is not a JSON object";
        return out;
    }
    if (!parsed.contains("name") || !parsed["name"].is_string()) {
        out.malformed = true;
        out.problem = "tool_call JSON has no string `name` field";
        return out;
    }
    ToolCall call;
    call.name = parsed["name"].get<std::string>();
    if (!parsed.contains("arguments")) {
        call.arguments = json::object();
    } else if (parsed["arguments"].is_object()) {
        call.arguments = parsed["arguments"];
    } else if (parsed["arguments"].is_string()) {
        json args = json::parse(parsed["arguments"].get<std::string>(), nullptr, false);
        if (args.is_discarded() || !args.is_object()) {
            out.malformed = true;
            out.problem = "tool_call `arguments` string is not valid JSON";
            return out;
        }
        call.arguments = args;
    } else {
        out.malformed = true;
        out.problem = "tool_call `arguments` must be an object or a JSON-encoded string";
        return out;
    }
    out.call = std::move(call);
    return out;
}

std::string render_action(const Action& action) {
    if (action.kind == Action::Kind::final_answer) return action.text;
    json j;
    j["name"] = action.call.name;
    j["arguments"] = action.call.arguments;
    return "<tool_call>\n" + j.dump() + "\n</tool_call>";
}

std::string render_assistant_turn(const Step& step) {
    std::string out;
    if (!step.thought.empty()) out += "<think>\n" + step.thought + "\n</think>\n\n";
    out += render_action(step.action);
    return out;
}

std::string render_task_context(const std::string& system_template,
                                const std::string& outline_xml, const std::string& question) {
    const std::string& templ =
        system_template.empty() ? prompts::kAgentSystem : system_template;
    return prompts::substitute(templ,
                               {{"document_outline", outline_xml}, {"question", question}});
}

std::vector<ChatMessage> format_history(const std::string& task_context,
                                        const std::vector<Step>& steps) {
    std::vector<ChatMessage> messages;
    messages.push_back(ChatMessage{"system", task_context});
    for (const auto& step : steps) {
        std::string content = step.raw.empty() ? render_assistant_turn(step) : step.raw;
        messages.push_back(ChatMessage{"assistant", content});
        if (step.observation.has_value())
            messages.push_back(ChatMessage{"tool", *step.observation});
    }
    return messages;
}

namespace {

size_t history_chars(const std::vector<ChatMessage>& messages) {
    size_t n = 0;
    for (const auto& m : messages) n += m.content.size();
    return n;
}

/// Asks for the final answer with tools disabled; used at the step limit and
/// after repeated malformed output.
void force_answer(Trajectory& traj, PolicyClient& policy, const AgentConfig& config,
                  const std::string& why) {
    std::vector<ChatMessage> messages = format_history(traj.task_context, traj.steps);
    messages.push_back(ChatMessage{
        "user", "Stop using tools. Provide your final answer to the question now."});
    traj.notes.push_back("forced answer: " + why);
    std::string raw;
    try {
        raw = policy.complete(messages, "", config.sampling);
    } catch (const Error& e) {
        traj.terminated_by = TerminatedBy::policy_error;
        traj.notes.push_back(std::string("policy failure during forced answer: ") + e.what());
        return;
    }
    ParsedPolicyOutput parsed = parse_policy_output(raw);
    std::string text = parsed.call.has_value() ? "" : parsed.final_text;
    Step step;
    step.thought = parsed.thought;
    step.action = Action::make_final(text);
    step.raw = raw;
    traj.steps.push_back(std::move(step));
    traj.answer = text;
    traj.terminated_by = TerminatedBy::step_limit;
}

}  // namespace

Trajectory run_episode(const std::string& question, const Outline& outline,
                       const Toolkit& toolkit, PolicyClient& policy, const AgentConfig& config,
                       const std::string& system_template) {
    Trajectory traj;
    traj.doc_id = outline.doc_id;
    traj.question = question;
    traj.task_context = render_task_context(system_template, serialize_xml(outline), question);
    if (traj.task_context.size() > config.max_context_chars)
        throw ContextOverflow("task context (" + std::to_string(traj.task_context.size()) +
                              " chars) exceeds the budget of " +
                              std::to_string(config.max_context_chars));

    int malformed_count = 0;
    std::string tools = tools_json();
    while (true) {
        if (static_cast<int>(traj.steps.size()) >= config.max_steps) {
            force_answer(traj, policy, config, "step limit reached");
            return traj;
        }
        std::vector<ChatMessage> messages = format_history(traj.task_context, traj.steps);
        if (history_chars(messages) > config.max_context_chars) {
            force_answer(traj, policy, config, "context budget reached");
            return traj;
        }
        std::string raw;
        try {
            raw = policy.complete(messages, tools, config.sampling);
        } catch (const Error& e) {
            traj.terminated_by = TerminatedBy::policy_error;
            traj.notes.push_back(std::string("policy failure: ") + e.what());
            return traj;
        }
        ParsedPolicyOutput parsed = parse_policy_output(raw);
        for (const auto& w : parsed.warnings) traj.notes.push_back(w);

        if (parsed.malformed) {
            ++malformed_count;
            if (malformed_count > config.retry_on_malformed) {
                force_answer(traj, policy, config, "malformed output retry limit reached");
                return traj;
            }
            Step step;
            step.thought = parsed.thought;
            ToolCall broken;
            broken.name = "(malformed)";
            broken.arguments = json::object();
            step.action = Action::make_call(broken);
            step.observation = "Your tool call could not be used: " + parsed.problem +
                               ". Reply with one <tool_call> block containing a JSON object "
                               "with `name` and `arguments`.";
            step.raw = raw;
            traj.steps.push_back(std::move(step));
            continue;
        }

        if (parsed.call.has_value()) {
            ToolResult result = toolkit.dispatch(*parsed.call);
            Step step;
            step.thought = parsed.thought;
            step.action = Action::make_call(*parsed.call);
            step.observation = result.rendered;
            step.raw = raw;
            traj.steps.push_back(std::move(step));
            continue;
        }

        Step step;
        step.thought = parsed.thought;
        step.action = Action::make_final(parsed.final_text);
        step.raw = raw;
        traj.steps.push_back(std::move(step));
        traj.answer = parsed.final_text;
        traj.terminated_by = TerminatedBy::final_answer;
        return traj;
    }
}

namespace {

json action_to_json(const Action& a) {
    if (a.kind == Action::Kind::tool_call)
        return {{"kind", "tool_call"}, {"name", a.call.name}, {"arguments", a.call.arguments}};
    return {{"kind", "final_answer"}, {"text", a.text}};
}

Action action_from_json(const json& j) {
    if (j.value("kind", "") == "tool_call") {
        ToolCall c;
        c.name = j.value("name", "");
        c.arguments = j.contains("arguments") ? j["arguments"] : json::object();
        return Action::make_call(std::move(c));
    }
    return Action::make_final(j.value("text", ""));
}

}  // namespace

nlohmann::json trajectory_to_json(const Trajectory& traj) {
    json steps = json::array();
    for (const Step& s : traj.steps) {
        json step = {{"thought", s.thought}, {"action", action_to_json(s.action)}, {"raw", s.raw}};
        if (s.observation.has_value()) step["observation"] = *s.observation;
        steps.push_back(std::move(step));
    }
    return {{"doc_id", traj.doc_id},
            {"question", traj.question},
            {"task_context", traj.task_context},
            {"steps", steps},
            {"answer", traj.answer},
            {"terminated_by", terminated_by_name(traj.terminated_by)},
            {"notes", traj.notes}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory traj;
    traj.doc_id = j.value("doc_id", "");
    traj.question = j.value("question", "");
    traj.task_context = j.value("task_context", "");
    for (const auto& js : j.value("steps", json::array())) {
        Step s;
        s.thought = js.value("thought", "");
        s.action = action_from_json(js.value("action", json::object()));
        if (js.contains("observation")) s.observation = js["observation"].get<std::string>();
        s.raw = js.value("raw", "");
        traj.steps.push_back(std::move(s));
    }
    traj.answer = j.value("answer", "");
    if (auto t = terminated_by_from_name(j.value("terminated_by", "")))
        traj.terminated_by = *t;
    for (const auto& n : j.value("notes", json::array())) traj.notes.push_back(n.get<std::string>());
    return traj;
}

std::string trajectory_to_jsonl(const Trajectory& traj) {
    std::string out;
    json manifest = {{"record", "manifest"},
                     {"version", 1},
                     {"doc_id", traj.doc_id},
                     {"question", traj.question},
                     {"task_context", traj.task_context}};
    out += manifest.dump() + "\n";
    for (size_t i = 0; i < traj.steps.size(); ++i) {
        const Step& s = traj.steps[i];
        json line = {{"record", "step"},
                     {"index", i},
                     {"thought", s.thought},
                     {"action", action_to_json(s.action)},
                     {"raw", s.raw}};
        if (s.observation.has_value()) line["observation"] = *s.observation;
        out += line.dump() + "\n";
    }
    json result = {{"record", "result"},
                   {"answer", traj.answer},
                   {"terminated_by", terminated_by_name(traj.terminated_by)},
                   {"steps", traj.steps.size()},
                   {"notes", traj.notes}};
    out += result.dump() + "\n";
    return out;
}

Trajectory trajectory_from_jsonl(const std::string& text) {
    Trajectory traj;
    bool saw_manifest = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw IOFailure("trajectory stream: line is not a JSON object");
        std::string record = j.value("record", "");
        if (record == "manifest") {
            saw_manifest = true;
            traj.doc_id = j.value("doc_id", "");
            traj.question = j.value("question", "");
            traj.task_context = j.value("task_context", "");
        } else if (record == "step") {
            Step s;
            s.thought = j.value("thought", "");
            s.action = action_from_json(j.value("action", json::object()));
            if (j.contains("observation")) s.observation = j["observation"].get<std::string>();
            s.raw = j.value("raw", "");
            traj.steps.push_back(std::move(s));
        } else if (record == "result") {
            traj.answer = j.value("answer", "");
            if (auto t = terminated_by_from_name(j.value("terminated_by", "")))
                traj.terminated_by = *t;
            for (const auto& n : j.value("notes", json::array()))
                traj.notes.push_back(n.get<std::string>());
        } else {
            throw IOFailure("trajectory stream: unknown record type: " + record);
        }
    }
    if (!saw_manifest) throw IOFailure("trajectory stream: missing manifest line");
    return traj;
}

}  // namespace docqa
