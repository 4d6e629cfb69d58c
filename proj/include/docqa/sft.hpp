#pragma once

#include <memory>
#include <string>
#include <vector>

#include "docqa/agent.hpp"

namespace docqa {

enum class SegmentRole { thought, action, observation };

const char* segment_role_name(SegmentRole role);
SegmentRole segment_role_from_name(const std::string& name);

struct Segment {
    std::string text;
    SegmentRole role = SegmentRole::thought;
};

struct TrainingSample {
    std::string task_context;
    std::vector<Segment> segments;
};

/// Splits a trajectory into loss-maskable segments. Thought and action
/// segments reproduce the canonical assistant renders; observations are
/// wrapped as tool responses. Concatenating all segments yields the episode
/// text after the task context.
TrainingSample build_sample(const Trajectory& traj);

class TokenizerAdapter {
public:
    virtual ~TokenizerAdapter() = default;
    struct Token {
        size_t begin = 0;
        size_t end = 0;  // [begin, end) byte span
    };
    /// Spans must tile the text exactly: concatenating them restores it.
    virtual std::vector<Token> tokenize(const std::string& text) const = 0;
    virtual std::string name() const = 0;
};

/// Token = run of non-space bytes plus any whitespace that follows it;
/// leading whitespace sticks to the first token.
class WhitespaceTokenizer : public TokenizerAdapter {
public:
    std::vector<Token> tokenize(const std::string& text) const override;
    std::string name() const override { return "whitespace"; }
};

struct LossMask {
    std::vector<int> token_flags;  // 1 kept, 0 masked; segment order
    size_t kept_count = 0;
};

/// Flags every thought and action token 1 and every observation token 0.
/// The task context is not tokenized at all.
LossMask build_loss_mask(const TrainingSample& sample, const TokenizerAdapter& tokenizer);

/// Mean negative logprob over kept tokens only. Masked positions affect
/// neither the sum nor the normalizer. Throws EmptyKeptSet when no token
/// is kept, and never divides by the full sequence length.
double masked_nll(const std::vector<double>& token_logprobs, const LossMask& mask);

nlohmann::json sample_to_json(const TrainingSample& sample, const TokenizerAdapter* tokenizer);
TrainingSample sample_from_json(const nlohmann::json& j);

/// JSONL with a leading manifest line; an empty dataset still gets the
/// manifest.
std::string export_sft_jsonl(const std::vector<TrainingSample>& samples,
                             const TokenizerAdapter* tokenizer);
std::vector<TrainingSample> import_sft_jsonl(const std::string& text);

bool samples_structurally_equal(const TrainingSample& a, const TrainingSample& b);

}  // namespace docqa
