#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docqa/clients.hpp"
#include "docqa/toolkit.hpp"

namespace docqa {

struct Action {
    enum class Kind { tool_call, final_answer };
    Kind kind = Kind::final_answer;
    ToolCall call;     // kind == tool_call
    std::string text;  // kind == final_answer

    static Action make_call(ToolCall c) {
        Action a;
        a.kind = Kind::tool_call;
        a.call = std::move(c);
        return a;
    }
    static Action make_final(std::string t) {
        Action a;
        a.kind = Kind::final_answer;
        a.text = std::move(t);
        return a;
    }
};

struct Step {
    std::string thought;
    Action action;
    std::optional<std::string> observation;  // absent on the final step
    std::string raw;  // exact assistant turn text as produced by the policy
};

enum class TerminatedBy { final_answer, step_limit, policy_error };

const char* terminated_by_name(TerminatedBy t);
std::optional<TerminatedBy> terminated_by_from_name(std::string_view name);

struct Trajectory {
    std::string doc_id;
    std::string question;
    std::string task_context;  // system template with outline and question filled in
    std::vector<Step> steps;
    TerminatedBy terminated_by = TerminatedBy::final_answer;
    std::string answer;
    std::vector<std::string> notes;
};

struct AgentConfig {
    int max_steps = 20;
    SamplingParams sampling;
    int retry_on_malformed = 2;
    size_t max_context_chars = 500000;
};

struct ParsedPolicyOutput {
    std::string thought;
    std::optional<ToolCall> call;
    std::string final_text;
    bool malformed = false;  // a tool_call block exists but is not valid JSON
    std::string problem;
    std::vector<std::string> warnings;
};

/// Splits raw policy text into the <think> block, one tool call and/or final
/// answer text. Extra tool_call blocks are ignored with a warning.
ParsedPolicyOutput parse_policy_output(const std::string& raw);

/// Canonical textual form of an action ("<tool_call>...</tool_call>" or the
/// final answer itself).
std::string render_action(const Action& action);

/// Canonical assistant turn: optional think block followed by the action.
std::string render_assistant_turn(const Step& step);

/// Fills the episode template with the serialized outline and the question.
std::string render_task_context(const std::string& system_template,
                                const std::string& outline_xml, const std::string& question);

/// [system, assistant, tool, assistant, tool, ...]; deterministic.
std::vector<ChatMessage> format_history(const std::string& task_context,
                                        const std::vector<Step>& steps);

/// Runs one ReAct episode. Policy failures do not throw: the partial
/// trajectory comes back with terminated_by == policy_error so callers can
/// persist what happened. Throws ContextOverflow only when the task context
/// alone exceeds the configured budget.
Trajectory run_episode(const std::string& question, const Outline& outline,
                       const Toolkit& toolkit, PolicyClient& policy, const AgentConfig& config,
                       const std::string& system_template = "");

/// One manifest line, one line per step, one result line.
std::string trajectory_to_jsonl(const Trajectory& traj);
Trajectory trajectory_from_jsonl(const std::string& text);

/// Object form, used when a trajectory is embedded in a larger record.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

}  // namespace docqa
