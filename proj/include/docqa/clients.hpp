#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace docqa {

struct ChatMessage {
    std::string role;  // system | assistant | tool | user
    std::string content;
};

struct SamplingParams {
    double temperature = 0.6;
    double top_p = 0.95;
    double presence_penalty = 1.1;
};

/// Chat-with-tools endpoint; drives the policy, explorer, synthesizer,
/// teacher and judge roles.
class PolicyClient {
public:
    virtual ~PolicyClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages,
                                 const std::string& tools_json,
                                 const SamplingParams& sampling) = 0;
    virtual std::string identity() const = 0;
};

/// Multimodal summarize/caption endpoint.
class SummarizerClient {
public:
    virtual ~SummarizerClient() = default;
    virtual std::string summarize(const std::string& goal, const std::string& text_bundle,
                                  const std::vector<std::string>& media_refs) = 0;
    virtual std::string identity() const = 0;
    virtual bool supports_media() const { return false; }
};

/// Fingerprint of one client invocation, kept for fixture drift detection.
struct ClientCallRecord {
    size_t index = 0;
    std::string input_hash;  // fnv1a64 hex of the serialized inputs
    std::string response_head;
};

/// Hash key a keyed policy scenario looks up; exposed so fixtures can be built.
std::string scenario_policy_key(const std::vector<ChatMessage>& messages,
                                const std::string& tools_json);

struct ScriptedSpec {
    std::string mode = "ordered";  // ordered | keyed
    std::vector<std::string> ordered;
    std::map<std::string, std::string> keyed;
    bool has_default = false;
    std::string default_response;
};

class ScriptedPolicyClient : public PolicyClient {
public:
    explicit ScriptedPolicyClient(ScriptedSpec spec, std::string name = "scripted-policy");

    std::string complete(const std::vector<ChatMessage>& messages, const std::string& tools_json,
                         const SamplingParams& sampling) override;
    std::string identity() const override { return name_; }

    const std::vector<ClientCallRecord>& call_log() const { return log_; }
    size_t calls() const { return log_.size(); }

private:
    ScriptedSpec spec_;
    std::string name_;
    size_t next_ = 0;
    std::vector<ClientCallRecord> log_;
    std::mutex mu_;
};

/// Keyed mode looks responses up by the goal string.
class ScriptedSummarizerClient : public SummarizerClient {
public:
    explicit ScriptedSummarizerClient(ScriptedSpec spec, std::string name = "scripted-summarizer");

    std::string summarize(const std::string& goal, const std::string& text_bundle,
                          const std::vector<std::string>& media_refs) override;
    std::string identity() const override { return name_; }

    const std::vector<ClientCallRecord>& call_log() const { return log_; }

private:
    ScriptedSpec spec_;
    std::string name_;
    size_t next_ = 0;
    std::vector<ClientCallRecord> log_;
    std::mutex mu_;
};

/// One scenario file holds the scripted responses for every model role a
/// command may touch; see docs/formats.md for the schema.
struct ScenarioSet {
    std::map<std::string, ScriptedSpec> roles;

    bool has(const std::string& role) const { return roles.count(role) > 0; }
    std::unique_ptr<ScriptedPolicyClient> make_policy(const std::string& role) const;
    std::unique_ptr<ScriptedSummarizerClient> make_summarizer(const std::string& role) const;
};

ScenarioSet load_scenario_file(const std::string& path);
ScenarioSet parse_scenario_json(const std::string& json_text);

struct EndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8000/v1
    std::string api_key;
    std::string model;
    int max_attempts = 3;
    int timeout_sec = 60;
    int backoff_ms = 100;  // doubled per retry
    std::string replay_log_path;
};

/// One OpenAI-compatible chat completion with retry/backoff. Tool calls and
/// reasoning content in the response are re-rendered as <tool_call>/<think>
/// text so downstream parsing is uniform.
std::string http_complete(const EndpointConfig& cfg, const std::vector<ChatMessage>& messages,
                          const std::string& tools_json, const SamplingParams& sampling);

class HttpPolicyClient : public PolicyClient {
public:
    explicit HttpPolicyClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(const std::vector<ChatMessage>& messages, const std::string& tools_json,
                         const SamplingParams& sampling) override;
    std::string identity() const override { return "http:" + cfg_.model; }

private:
    EndpointConfig cfg_;
};

/// Summarizer over the same chat dialect; media refs are appended to the
/// request text as path strings (no binary upload).
class HttpSummarizerClient : public SummarizerClient {
public:
    explicit HttpSummarizerClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {}

    std::string summarize(const std::string& goal, const std::string& text_bundle,
                          const std::vector<std::string>& media_refs) override;
    std::string identity() const override { return "http:" + cfg_.model; }

private:
    EndpointConfig cfg_;
};

}  // namespace docqa
