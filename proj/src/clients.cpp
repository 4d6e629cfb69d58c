#include "docqa/clients.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "docqa/errors.hpp"
#include "docqa/text_util.hpp"

namespace docqa {

using nlohmann::json;

std::string scenario_policy_key(const std::vector<ChatMessage>& messages,
                                const std::string& tools_json) {
    std::string buf;
    for (const auto& m : messages) {
        buf += m.role;
        buf.push_back('\x1f');
        buf += m.content;
        buf.push_back('\x1e');
    }
    buf.push_back('\x1d');
    buf += tools_json;
    return to_hex(fnv1a64(buf));
}

namespace {

std::string head_of(const std::string& s) {
    return s.size() <= 48 ? s : s.substr(0, 48);
}

size_t common_prefix(const std::string& a, const std::string& b) {
    size_t n = std::min(a.size(), b.size());
    size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

const std::string* nearest_key(const std::map<std::string, std::string>& keyed,
                               const std::string& key) {
    const std::string* best = nullptr;
    size_t best_len = 0;
    for (const auto& [k, _] : keyed) {
        size_t len = common_prefix(k, key);
        if (best == nullptr || len > best_len) {
            best = &k;
            best_len = len;
        }
    }
    return best;
}

std::string take_response(ScriptedSpec& spec, size_t& next, const std::string& key,
                          const std::string& who) {
    if (spec.mode == "keyed") {
        auto it = spec.keyed.find(key);
        if (it != spec.keyed.end()) return it->second;
        if (spec.has_default) return spec.default_response;
        const std::string* near = nearest_key(spec.keyed, key);
        throw KeyMiss(who + ": no scripted response for key " + key +
                      (near ? ", nearest key is " + *near : ", scenario has no keys"));
    }
    if (next >= spec.ordered.size())
        throw ScenarioExhausted(who + ": ordered scenario exhausted after " +
                                std::to_string(spec.ordered.size()) + " responses");
    return spec.ordered[next++];
}

}  // namespace

ScriptedPolicyClient::ScriptedPolicyClient(ScriptedSpec spec, std::string name)
    : spec_(std::move(spec)), name_(std::move(name)) {}

std::string ScriptedPolicyClient::complete(const std::vector<ChatMessage>& messages,
                                           const std::string& tools_json,
                                           const SamplingParams& sampling) {
    (void)sampling;
    std::lock_guard<std::mutex> lock(mu_);
    std::string key = scenario_policy_key(messages, tools_json);
    std::string response = take_response(spec_, next_, key, name_);
    log_.push_back(ClientCallRecord{log_.size(), key, head_of(response)});
    return response;
}

ScriptedSummarizerClient::ScriptedSummarizerClient(ScriptedSpec spec, std::string name)
    : spec_(std::move(spec)), name_(std::move(name)) {}

std::string ScriptedSummarizerClient::summarize(const std::string& goal,
                                                const std::string& text_bundle,
                                                const std::vector<std::string>& media_refs) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string fingerprint =
        to_hex(fnv1a64(goal + "\x1f" + text_bundle + "\x1f" + join(media_refs, ",")));
    std::string response = take_response(spec_, next_, goal, name_);
    log_.push_back(ClientCallRecord{log_.size(), fingerprint, head_of(response)});
    return response;
}

namespace {

ScriptedSpec parse_spec(const json& j, const std::string& role) {
    ScriptedSpec spec;
    if (!j.is_object()) throw ConfigError("scenario role " + role + " must be an object");
    spec.mode = j.value("mode", "ordered");
    if (spec.mode != "ordered" && spec.mode != "keyed")
        throw ConfigError("scenario role " + role + " has unknown mode " + spec.mode);
    if (spec.mode == "ordered") {
        if (!j.contains("responses") || !j["responses"].is_array())
            throw ConfigError("scenario role " + role + " needs a responses array");
        for (const auto& r : j["responses"]) spec.ordered.push_back(r.get<std::string>());
    } else {
        if (!j.contains("responses") || !j["responses"].is_object())
            throw ConfigError("scenario role " + role + " needs a responses object");
        for (const auto& [k, v] : j["responses"].items()) spec.keyed[k] = v.get<std::string>();
        if (j.contains("default")) {
            spec.has_default = true;
            spec.default_response = j["default"].get<std::string>();
        }
    }
    return spec;
}

}  // namespace

ScenarioSet parse_scenario_json(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw ConfigError("scenario file is not a JSON object");
    ScenarioSet set;
    for (const auto& [role, spec] : root.items()) set.roles[role] = parse_spec(spec, role);
    return set;
}

ScenarioSet load_scenario_file(const std::string& path) {
    return parse_scenario_json(read_file(path));
}

std::unique_ptr<ScriptedPolicyClient> ScenarioSet::make_policy(const std::string& role) const {
    auto it = roles.find(role);
    if (it == roles.end()) throw ConfigError("scenario file has no role: " + role);
    return std::make_unique<ScriptedPolicyClient>(it->second, "scripted-" + role);
}

std::unique_ptr<ScriptedSummarizerClient> ScenarioSet::make_summarizer(
    const std::string& role) const {
    auto it = roles.find(role);
    if (it == roles.end()) throw ConfigError("scenario file has no role: " + role);
    return std::make_unique<ScriptedSummarizerClient>(it->second, "scripted-" + role);
}

namespace {

/// Renders an assistant message object back into the textual wire form the
/// rest of the system parses.
std::string render_response_text(const json& message) {
    std::string out;
    if (message.contains("reasoning_content") && message["reasoning_content"].is_string()) {
        std::string rc = message["reasoning_content"].get<std::string>();
        if (!rc.empty()) out += "<think>\n" + rc + "\n</think>\n\n";
    }
    if (message.contains("content") && message["content"].is_string())
        out += message["content"].get<std::string>();
    if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
        for (const auto& tc : message["tool_calls"]) {
            if (!tc.contains("function")) continue;
            const json& fn = tc["function"];
            json call;
            call["name"] = fn.value("name", "");
            std::string args = fn.value("arguments", "");
            json parsed = json::parse(args, nullptr, false);
            if (parsed.is_discarded())
                call["arguments"] = args;
            else
                call["arguments"] = parsed;
            if (!out.empty() && out.back() != '\n') out += "\n";
            out += "<tool_call>\n" + call.dump() + "\n</tool_call>";
        }
    }
    return out;
}

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix, no trailing slash
};

UrlParts split_url(const std::string& url) {
    size_t scheme = url.find("://");
    size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start == std::string::npos) return UrlParts{url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return UrlParts{url.substr(0, path_start), path};
}

void append_replay(const std::string& path, const json& request, const std::string& response,
                   int attempts) {
    if (path.empty()) return;
    json line = {{"request", request}, {"response_text", response}, {"attempts", attempts}};
    std::string existing;
    try {
        existing = read_file(path);
    } catch (const UnreadableFile&) {
    }
    write_file(path, existing + line.dump() + "\n");
}

}  // namespace

std::string http_complete(const EndpointConfig& cfg, const std::vector<ChatMessage>& messages,
                          const std::string& tools_json, const SamplingParams& sampling) {
    if (cfg.api_key.empty())
        throw AuthFailure("no api key configured for endpoint " + cfg.base_url);
    if (cfg.base_url.empty()) throw PolicyUnavailable("endpoint url not configured");

    json body;
    body["model"] = cfg.model;
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = msgs;
    if (!tools_json.empty()) {
        json tools = json::parse(tools_json, nullptr, false);
        if (!tools.is_discarded()) body["tools"] = tools;
    }
    body["temperature"] = sampling.temperature;
    body["top_p"] = sampling.top_p;
    body["presence_penalty"] = sampling.presence_penalty;

    UrlParts url = split_url(cfg.base_url);
    std::string payload = body.dump();
    std::string last_error;
    int attempts = 0;
    for (int attempt = 0; attempt < std::max(1, cfg.max_attempts); ++attempt) {
        if (attempt > 0) {
            int delay = cfg.backoff_ms << (attempt - 1);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        ++attempts;
        httplib::Client client(url.origin);
        client.set_connection_timeout(cfg.timeout_sec, 0);
        client.set_read_timeout(cfg.timeout_sec, 0);
        httplib::Headers headers = {{"Authorization", "Bearer " + cfg.api_key}};
        auto res = client.Post(url.path + "/chat/completions", headers, payload,
                               "application/json");
        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthFailure("endpoint rejected credentials (status " +
                              std::to_string(res->status) + ")");
        if (res->status == 400) {
            std::string lower = to_lower(res->body);
            if (lower.find("context") != std::string::npos)
                throw ContextOverflow("endpoint reports context overflow: " + res->body);
            throw PolicyUnavailable("bad request: " + res->body);
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw PolicyUnavailable("unexpected status " +
                                                        std::to_string(res->status));
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty())
            throw PolicyUnavailable("endpoint returned malformed completion body");
        std::string text = render_response_text(parsed["choices"][0].value("message", json()));
        append_replay(cfg.replay_log_path, body, text, attempts);
        return text;
    }
    throw PolicyUnavailable("endpoint unavailable after " + std::to_string(attempts) +
                            " attempts: " + last_error);
}

std::string HttpPolicyClient::complete(const std::vector<ChatMessage>& messages,
                                       const std::string& tools_json,
                                       const SamplingParams& sampling) {
    return http_complete(cfg_, messages, tools_json, sampling);
}

std::string HttpSummarizerClient::summarize(const std::string& goal,
                                            const std::string& text_bundle,
                                            const std::vector<std::string>& media_refs) {
    std::string content = "Goal: " + goal + "\n\n" + text_bundle;
    if (!media_refs.empty()) content += "\n\nMedia:\n" + join(media_refs, "\n");
    std::vector<ChatMessage> messages = {{"user", content}};
    try {
        return http_complete(cfg_, messages, "", SamplingParams{});
    } catch (const PolicyUnavailable& e) {
        throw SummarizerUnavailable(e.what());
    }
}

}  // namespace docqa
