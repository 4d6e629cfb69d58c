#include "docqa/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "docqa/errors.hpp"
#include "docqa/prompts.hpp"
#include "docqa/text_util.hpp"
#include "json.hpp"

namespace docqa {

using nlohmann::json;

GoldAnswer GoldAnswer::make_integer(long long v) {
    GoldAnswer g;
    g.type = Type::integer;
    g.int_value = v;
    g.num_value = static_cast<double>(v);
    g.raw = std::to_string(v);
    return g;
}

GoldAnswer GoldAnswer::make_number(double v, int precision) {
    GoldAnswer g;
    g.type = Type::number;
    g.num_value = v;
    g.float_precision = precision;
    std::ostringstream os;
    os << v;
    g.raw = os.str();
    return g;
}

GoldAnswer GoldAnswer::make_string(std::string s) {
    GoldAnswer g;
    g.type = Type::string;
    g.raw = std::move(s);
    return g;
}

GoldAnswer GoldAnswer::make_list(std::vector<std::string> items) {
    GoldAnswer g;
    g.type = Type::list;
    g.items = std::move(items);
    g.raw = join(g.items, ", ");
    return g;
}

GoldAnswer GoldAnswer::make_unanswerable() {
    GoldAnswer g;
    g.type = Type::unanswerable;
    g.raw = "unanswerable";
    return g;
}

namespace {

bool is_unanswerable_text(const std::string& normalized) {
    return normalized == "unanswerable" || normalized == "not answerable" ||
           normalized == "cannot be answered";
}

int decimal_digits(const std::string& text) {
    auto dot = text.find('.');
    if (dot == std::string::npos) return 0;
    int n = 0;
    for (size_t i = dot + 1; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i)
        ++n;
    return n;
}

double round_to(double v, int digits) {
    double scale = std::pow(10.0, digits);
    return std::round(v * scale) / scale;
}

std::vector<std::string> split_list_items(const std::string& text) {
    std::string work = text;
    // unify separators: ";" "," " and "
    for (const char* sep : {" and ", " AND ", " And "}) {
        size_t pos = 0;
        std::string s(sep);
        while ((pos = work.find(s, pos)) != std::string::npos) {
            work.replace(pos, s.size(), " ; ");
            pos += 3;
        }
    }
    for (char& c : work)
        if (c == ',') c = ';';
    std::vector<std::string> out;
    for (auto& part : split(work, ';')) {
        auto t = trim(part);
        if (!t.empty()) out.push_back(std::string(t));
    }
    return out;
}

}  // namespace

GoldAnswer GoldAnswer::from_fields(const std::string& answer, const std::string& type,
                                   int precision) {
    if (type == "integer" || type == "int") {
        auto v = parse_numeric(answer);
        if (!v) throw ConfigError("gold answer is not an integer: " + answer);
        return make_integer(static_cast<long long>(std::llround(*v)));
    }
    if (type == "number" || type == "float") {
        auto v = parse_numeric(answer);
        if (!v) throw ConfigError("gold answer is not a number: " + answer);
        GoldAnswer g = make_number(*v, precision >= 0 ? precision : decimal_digits(answer));
        g.raw = answer;
        return g;
    }
    if (type == "list") return make_list(split_list_items(answer));
    if (type == "unanswerable" || type == "none") return make_unanswerable();
    if (type == "string" || type == "str" || type.empty()) return make_string(answer);
    throw ConfigError("unknown gold answer type: " + type);
}

GoldAnswer GoldAnswer::infer(const std::string& answer) {
    std::string t(trim(answer));
    if (is_unanswerable_text(normalize_answer_text(t))) return make_unanswerable();
    auto v = parse_numeric(t);
    if (v) {
        bool percent = !t.empty() && t.back() == '%';
        bool has_dot = t.find('.') != std::string::npos;
        if (!percent && !has_dot && std::abs(*v) < 9.2e18)
            return make_integer(static_cast<long long>(std::llround(*v)));
        int prec = decimal_digits(t) + (percent ? 2 : 0);
        GoldAnswer g = make_number(*v, prec);
        g.raw = t;
        return g;
    }
    return make_string(t);
}

std::optional<double> parse_numeric(const std::string& token) {
    std::string t(trim(token));
    if (t.empty()) return std::nullopt;
    // trailing sentence punctuation
    while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == ')' ||
                          t.back() == ']' || t.back() == ':' || t.back() == ';'))
        t.pop_back();
    while (!t.empty() && (t.front() == '(' || t.front() == '[')) t.erase(t.begin());
    bool percent = false;
    if (!t.empty() && t.back() == '%') {
        percent = true;
        t.pop_back();
    }
    std::string digits;
    digits.reserve(t.size());
    for (char c : t) {
        if (c == '$' || c == ',') continue;
        digits.push_back(c);
    }
    digits = std::string(trim(digits));
    if (digits.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(digits.c_str(), &end);
    if (end == digits.c_str() || end != digits.c_str() + digits.size()) return std::nullopt;
    if (percent) v /= 100.0;
    return v;
}

std::string normalize_answer_text(std::string_view s) {
    std::string spaced;
    spaced.reserve(s.size());
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            spaced.push_back(static_cast<char>(std::tolower(u)));
        else
            spaced.push_back(' ');
    }
    std::vector<std::string> kept;
    for (auto& tok : split(spaced, ' ')) {
        if (tok.empty()) continue;
        if (tok == "a" || tok == "an" || tok == "the") continue;
        kept.push_back(tok);
    }
    return join(kept, " ");
}

namespace {

// sentence boundary: . ! ? followed by whitespace or end, but not a decimal point
std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        bool at_end = i + 1 >= text.size();
        bool next_ws = !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (!at_end && !next_ws) continue;
        if (c == '.' && i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
            !at_end && std::isdigit(static_cast<unsigned char>(text[i + 1])))
            continue;
        auto sent = trim(text.substr(start, i + 1 - start));
        if (!sent.empty()) out.push_back(std::string(sent));
        start = i + 1;
    }
    auto tail = trim(text.substr(start));
    if (!tail.empty()) out.push_back(std::string(tail));
    return out;
}

bool token_has_digit(const std::string& tok) {
    return std::any_of(tok.begin(), tok.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string extract_answer_rule(const std::string& response) {
    // last **bold** span wins
    size_t best = std::string::npos, best_len = 0;
    size_t pos = 0;
    while (true) {
        size_t open = response.find("**", pos);
        if (open == std::string::npos) break;
        size_t close = response.find("**", open + 2);
        if (close == std::string::npos) break;
        if (close > open + 2) {
            best = open + 2;
            best_len = close - open - 2;
        }
        pos = close + 2;
    }
    if (best != std::string::npos) return std::string(trim(response.substr(best, best_len)));

    auto sentences = split_sentences(response);
    if (sentences.empty()) return std::string(trim(response));
    const std::string& last = sentences.back();
    std::istringstream is(last);
    std::string tok;
    while (is >> tok) {
        if (!token_has_digit(tok)) continue;
        // trim grouping punctuation around the token
        size_t b = 0, e = tok.size();
        while (b < e && (tok[b] == '(' || tok[b] == '[' || tok[b] == '"' || tok[b] == '\'')) ++b;
        while (e > b && (tok[e - 1] == ')' || tok[e - 1] == ']' || tok[e - 1] == '"' ||
                         tok[e - 1] == '\'' || tok[e - 1] == ',' || tok[e - 1] == ';' ||
                         tok[e - 1] == ':' || tok[e - 1] == '.'))
            --e;
        std::string inner = tok.substr(b, e - b);
        if (!inner.empty() && token_has_digit(inner)) return inner;
    }
    return last;
}

std::string extract_answer(const std::string& response, PolicyClient* extractor,
                           const std::string& question, const std::string& prompt_template,
                           bool* used_fallback) {
    if (used_fallback) *used_fallback = false;
    if (extractor) {
        try {
            const std::string& templ =
                prompt_template.empty() ? prompts::kExtraction : prompt_template;
            std::string prompt =
                prompts::substitute(templ, {{"question", question}, {"response", response}});
            std::vector<ChatMessage> msgs{{"user", prompt}};
            std::string out(trim(extractor->complete(msgs, "", SamplingParams{})));
            if (!out.empty()) return out;
        } catch (const Error&) {
            // fall through to the rule
        }
        if (used_fallback) *used_fallback = true;
    }
    return extract_answer_rule(response);
}

namespace {

double list_f1(const std::vector<std::string>& gold_items, const std::vector<std::string>& pred_items) {
    if (gold_items.empty() || pred_items.empty()) return 0.0;
    std::vector<std::string> gold_norm, pred_norm;
    for (auto& g : gold_items) gold_norm.push_back(normalize_answer_text(g));
    for (auto& p : pred_items) pred_norm.push_back(normalize_answer_text(p));
    std::vector<bool> used(pred_norm.size(), false);
    size_t matched = 0;
    for (auto& g : gold_norm) {
        for (size_t i = 0; i < pred_norm.size(); ++i) {
            if (used[i] || g.empty() || pred_norm[i].empty()) continue;
            if (g == pred_norm[i]) {
                used[i] = true;
                ++matched;
                break;
            }
        }
    }
    if (matched == 0) return 0.0;
    double precision = static_cast<double>(matched) / pred_norm.size();
    double recall = static_cast<double>(matched) / gold_norm.size();
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

ScoreResult rule_score(const std::string& extracted, const GoldAnswer& gold) {
    ScoreResult r;
    r.extracted = extracted;
    switch (gold.type) {
        case GoldAnswer::Type::integer: {
            auto v = parse_numeric(extracted);
            if (!v) {
                r.reason = "no numeric value in extraction";
                break;
            }
            double rounded = std::round(*v);
            if (std::abs(*v - rounded) < 1e-9 &&
                static_cast<long long>(std::llround(*v)) == gold.int_value) {
                r.correct = true;
            } else {
                r.reason = "integer mismatch";
            }
            break;
        }
        case GoldAnswer::Type::number: {
            auto v = parse_numeric(extracted);
            if (!v) {
                r.reason = "no numeric value in extraction";
                break;
            }
            double got = *v;
            if (gold.float_precision >= 0) got = round_to(got, gold.float_precision);
            double tol = 1e-9 * std::max(1.0, std::abs(gold.num_value));
            if (std::abs(got - gold.num_value) <= tol) {
                r.correct = true;
            } else {
                r.reason = "number mismatch";
            }
            break;
        }
        case GoldAnswer::Type::string: {
            std::string a = normalize_answer_text(extracted);
            std::string b = normalize_answer_text(gold.raw);
            if (!a.empty() && !b.empty() &&
                (a == b || a.find(b) != std::string::npos || b.find(a) != std::string::npos)) {
                r.correct = true;
            } else {
                r.reason = "string mismatch";
            }
            break;
        }
        case GoldAnswer::Type::list: {
            double f1 = list_f1(gold.items, split_list_items(extracted));
            r.partial_f1 = f1;
            r.correct = f1 >= 1.0 - 1e-12;
            if (!r.correct) r.reason = "list partial match";
            break;
        }
        case GoldAnswer::Type::unanswerable: {
            r.correct = is_unanswerable_text(normalize_answer_text(extracted));
            if (!r.correct) r.reason = "expected an unanswerable marker";
            break;
        }
    }
    if (gold.type != GoldAnswer::Type::list) r.partial_f1 = r.correct ? 1.0 : 0.0;
    return r;
}

JudgeVerdict judge_score(const std::string& question, const std::string& gold,
                         const std::string& prediction, PolicyClient& judge,
                         const std::string& prompt_template) {
    const std::string& templ = prompt_template.empty() ? prompts::kJudge : prompt_template;
    std::string prompt = prompts::substitute(
        templ, {{"question", question}, {"gold", gold}, {"prediction", prediction}});
    std::vector<ChatMessage> msgs{{"user", prompt}};
    JudgeVerdict v;
    v.raw = judge.complete(msgs, "", SamplingParams{});
    std::string low = to_lower(v.raw);
    // negative markers checked first so "incorrect" can never read as "correct"
    if (low.find("incorrect") != std::string::npos || low.find("wrong") != std::string::npos) {
        v.correct = false;
        v.parsed = true;
    } else if (low.find("correct") != std::string::npos) {
        v.correct = true;
        v.parsed = true;
    } else {
        std::string t(trim(low));
        if (t == "yes" || t == "true") {
            v.correct = true;
            v.parsed = true;
        } else if (t == "no" || t == "false") {
            v.correct = false;
            v.parsed = true;
        } else {
            v.correct = false;  // fail closed
            v.parsed = false;
        }
    }
    return v;
}

AggregateReport aggregate(const std::vector<ScoreResult>& items,
                          const std::vector<JudgeVerdict>* judges) {
    AggregateReport rep;
    rep.count = items.size();
    if (items.empty()) {
        rep.empty = true;
        if (judges) rep.has_lasj = true;
        return rep;
    }
    double acc = 0.0, f1 = 0.0;
    for (auto& it : items) {
        acc += it.correct ? 1.0 : 0.0;
        f1 += it.partial_f1;
    }
    rep.acc = acc / items.size();
    rep.f1 = f1 / items.size();
    if (judges) {
        rep.has_lasj = true;
        if (!judges->empty()) {
            double j = 0.0;
            for (auto& v : *judges) j += v.correct ? 1.0 : 0.0;
            rep.lasj = j / judges->size();
        }
    }
    return rep;
}

std::vector<GoldItem> load_gold_jsonl(const std::string& text) {
    std::vector<GoldItem> out;
    std::istringstream is(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError("gold file line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("question") || !j.contains("answer"))
            throw ConfigError("gold file line " + std::to_string(lineno) +
                              ": expected {question, answer, type}");
        GoldItem item;
        item.question = j["question"].get<std::string>();
        std::string answer;
        if (j["answer"].is_string())
            answer = j["answer"].get<std::string>();
        else if (j["answer"].is_array()) {
            std::vector<std::string> items;
            for (auto& e : j["answer"]) items.push_back(e.is_string() ? e.get<std::string>() : e.dump());
            answer = join(items, "; ");
        } else
            answer = j["answer"].dump();
        std::string type = j.value("type", std::string("string"));
        int precision = j.value("precision", -1);
        item.gold = GoldAnswer::from_fields(answer, type, precision);
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace docqa
