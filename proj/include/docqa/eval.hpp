#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docqa/clients.hpp"

namespace docqa {

struct GoldAnswer {
    enum class Type { integer, number, string, list, unanswerable };
    Type type = Type::string;
    std::string raw;  // answer as written in the gold file
    long long int_value = 0;
    double num_value = 0.0;
    int float_precision = -1;  // decimal digits; -1 means unspecified
    std::vector<std::string> items;

    static GoldAnswer make_integer(long long v);
    static GoldAnswer make_number(double v, int precision = -1);
    static GoldAnswer make_string(std::string s);
    static GoldAnswer make_list(std::vector<std::string> items);
    static GoldAnswer make_unanswerable();

    /// Builds from gold-file fields; type is one of integer|number|string|list|unanswerable.
    static GoldAnswer from_fields(const std::string& answer, const std::string& type,
                                  int precision);

    /// Guesses the type from a bare answer string (used by rejection sampling).
    static GoldAnswer infer(const std::string& answer);
};

struct ScoreResult {
    bool correct = false;
    double partial_f1 = 0.0;
    std::string extracted;
    std::string reason;
};

/// Regex-rule extraction: last bold span, else the first numeric token of the
/// last sentence, else the last sentence itself.
std::string extract_answer_rule(const std::string& response);

/// Client-backed extraction with rule fallback; flag reports the fallback.
std::string extract_answer(const std::string& response, PolicyClient* extractor,
                           const std::string& question = "",
                           const std::string& prompt_template = "",
                           bool* used_fallback = nullptr);

ScoreResult rule_score(const std::string& extracted, const GoldAnswer& gold);

struct JudgeVerdict {
    bool correct = false;
    bool parsed = false;  // false means the verdict text was unusable (scored incorrect)
    std::string raw;
};

JudgeVerdict judge_score(const std::string& question, const std::string& gold,
                         const std::string& prediction, PolicyClient& judge,
                         const std::string& prompt_template = "");

struct AggregateReport {
    double acc = 0.0;
    double f1 = 0.0;
    bool has_lasj = false;
    double lasj = 0.0;
    size_t count = 0;
    bool empty = false;
};

AggregateReport aggregate(const std::vector<ScoreResult>& items,
                          const std::vector<JudgeVerdict>* judges = nullptr);

/// casefold + punctuation and article stripping + whitespace collapse.
std::string normalize_answer_text(std::string_view s);

/// Numeric parse that strips $ and , and applies strict percent
/// reconciliation: "x%" always means x/100.
std::optional<double> parse_numeric(const std::string& token);

struct GoldItem {
    std::string question;
    GoldAnswer gold;
};

/// Gold file: JSONL of {question, answer, type, precision?}.
std::vector<GoldItem> load_gold_jsonl(const std::string& text);

}  // namespace docqa
