#include "docqa/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "docqa/errors.hpp"
#include "docqa/text_util.hpp"
#include "json.hpp"

namespace docqa {

using nlohmann::json;

const std::vector<std::string>& known_roles() {
    static const std::vector<std::string> roles{
        "policy", "summarizer", "explorer", "synthesizer", "teacher", "judge", "extractor"};
    return roles;
}

RunConfig default_config() { return RunConfig{}; }

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& prefix) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown config key: " + prefix + it.key());
    }
}

int require_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw ConfigError("config key " + path + " must be an integer");
    return v.get<int>();
}

double require_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("config key " + path + " must be a number");
    return v.get<double>();
}

std::string require_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("config key " + path + " must be a string");
    return v.get<std::string>();
}

RoleEndpoint parse_endpoint(const json& obj, const std::string& prefix) {
    if (!obj.is_object()) throw ConfigError("config key " + prefix + " must be an object");
    reject_unknown_keys(obj, {"url", "key", "model"}, prefix + ".");
    RoleEndpoint ep;
    if (obj.contains("url")) ep.url = require_string(obj["url"], prefix + ".url");
    if (obj.contains("key")) ep.key = require_string(obj["key"], prefix + ".key");
    if (obj.contains("model")) ep.model = require_string(obj["model"], prefix + ".model");
    return ep;
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ConfigError("config must be a JSON object");

    reject_unknown_keys(j,
                        {"endpoints", "sampling", "depths", "window", "hit_cap", "max_steps",
                         "retry_on_malformed", "max_context_chars", "k_rejection_samples",
                         "acceptance_rule", "prompts_dir", "parallel"},
                        "");

    RunConfig cfg;
    if (j.contains("endpoints")) {
        const json& eps = j["endpoints"];
        if (!eps.is_object()) throw ConfigError("config key endpoints must be an object");
        for (auto it = eps.begin(); it != eps.end(); ++it) {
            const auto& roles = known_roles();
            if (std::find(roles.begin(), roles.end(), it.key()) == roles.end())
                throw ConfigError("unknown config key: endpoints." + it.key());
            cfg.endpoints[it.key()] = parse_endpoint(it.value(), "endpoints." + it.key());
        }
    }
    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        if (!s.is_object()) throw ConfigError("config key sampling must be an object");
        reject_unknown_keys(s, {"temperature", "top_p", "presence_penalty"}, "sampling.");
        if (s.contains("temperature"))
            cfg.sampling.temperature = require_number(s["temperature"], "sampling.temperature");
        if (s.contains("top_p")) cfg.sampling.top_p = require_number(s["top_p"], "sampling.top_p");
        if (s.contains("presence_penalty"))
            cfg.sampling.presence_penalty =
                require_number(s["presence_penalty"], "sampling.presence_penalty");
    }
    if (j.contains("depths")) {
        const json& d = j["depths"];
        if (!d.is_object()) throw ConfigError("config key depths must be an object");
        for (auto it = d.begin(); it != d.end(); ++it) {
            int v = require_int(it.value(), "depths." + it.key());
            if (v < 1) throw ConfigError("config key depths." + it.key() + " must be >= 1");
            cfg.depths[it.key()] = v;
        }
    }
    if (j.contains("window")) cfg.window = require_int(j["window"], "window");
    if (j.contains("hit_cap")) cfg.hit_cap = require_int(j["hit_cap"], "hit_cap");
    if (j.contains("max_steps")) cfg.max_steps = require_int(j["max_steps"], "max_steps");
    if (j.contains("retry_on_malformed"))
        cfg.retry_on_malformed = require_int(j["retry_on_malformed"], "retry_on_malformed");
    if (j.contains("max_context_chars"))
        cfg.max_context_chars = require_int(j["max_context_chars"], "max_context_chars");
    if (j.contains("k_rejection_samples"))
        cfg.k_rejection_samples = require_int(j["k_rejection_samples"], "k_rejection_samples");
    if (j.contains("acceptance_rule")) {
        cfg.acceptance_rule = require_string(j["acceptance_rule"], "acceptance_rule");
        if (cfg.acceptance_rule != "judge" && cfg.acceptance_rule != "exact_match")
            throw ConfigError("acceptance_rule must be \"judge\" or \"exact_match\"");
    }
    if (j.contains("prompts_dir")) cfg.prompts_dir = require_string(j["prompts_dir"], "prompts_dir");
    if (j.contains("parallel")) {
        cfg.parallel = require_int(j["parallel"], "parallel");
        if (cfg.parallel < 1) throw ConfigError("config key parallel must be >= 1");
    }
    if (cfg.window < 0) throw ConfigError("config key window must be >= 0");
    if (cfg.max_steps < 1) throw ConfigError("config key max_steps must be >= 1");
    if (cfg.k_rejection_samples < 1)
        throw ConfigError("config key k_rejection_samples must be >= 1");
    return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config_json(read_file(path)); }

void apply_env_overrides(RunConfig& cfg) {
    for (const std::string& role : known_roles()) {
        std::string upper = role;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        std::string base = "DOCQA_" + upper + "_";
        if (const char* v = std::getenv((base + "URL").c_str())) cfg.endpoints[role].url = v;
        if (const char* v = std::getenv((base + "KEY").c_str())) cfg.endpoints[role].key = v;
        if (const char* v = std::getenv((base + "MODEL").c_str())) cfg.endpoints[role].model = v;
    }
}

AgentConfig agent_config_from(const RunConfig& cfg) {
    AgentConfig a;
    a.max_steps = cfg.max_steps;
    a.sampling = cfg.sampling;
    a.retry_on_malformed = cfg.retry_on_malformed;
    a.max_context_chars = cfg.max_context_chars;
    return a;
}

SynthesisConfig synthesis_config_from(const RunConfig& cfg) {
    SynthesisConfig s;
    for (const auto& [tag, depth] : cfg.depths) s.max_depth_by_source[tag] = depth;
    s.k_rejection_samples = cfg.k_rejection_samples;
    s.acceptance_rule = cfg.acceptance_rule;
    s.agent = agent_config_from(cfg);
    return s;
}

}  // namespace docqa
