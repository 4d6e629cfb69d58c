#pragma once

#include <map>
#include <string>
#include <vector>

#include "docqa/agent.hpp"
#include "docqa/synthesis.hpp"

namespace docqa {

struct RoleEndpoint {
    std::string url;
    std::string key;
    std::string model;
};

struct RunConfig {
    std::map<std::string, RoleEndpoint> endpoints;
    SamplingParams sampling;
    std::map<std::string, int> depths{
        {"longdocurl", 20}, {"mmdocrag", 20}, {"dude", 15}, {"cuad", 15}, {"other", 15}};
    int window = 300;
    int hit_cap = 50;
    int max_steps = 20;
    int retry_on_malformed = 2;
    int max_context_chars = 500000;
    int k_rejection_samples = 3;
    std::string acceptance_rule = "judge";  // judge | exact_match
    std::string prompts_dir;
    int parallel = 1;
};

/// Roles a config may define endpoints for.
const std::vector<std::string>& known_roles();

RunConfig default_config();

/// Strict parse: any key outside the schema raises ConfigError with its
/// dotted path.
RunConfig parse_config_json(const std::string& text);

RunConfig load_config(const std::string& path);

/// DOCQA_<ROLE>_URL / _KEY / _MODEL override or create role endpoints.
void apply_env_overrides(RunConfig& cfg);

AgentConfig agent_config_from(const RunConfig& cfg);
SynthesisConfig synthesis_config_from(const RunConfig& cfg);

}  // namespace docqa
