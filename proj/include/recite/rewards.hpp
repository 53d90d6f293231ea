#pragma once

// Scalar rewards for structured QA responses: token-F1 accuracy against the
// gold answer, binary format reward over the tag grammar, binary retrieval
// reward requiring at least one quoted span with every span present in the
// context, and their weighted sum
//
//   r_total = lambda_acc * r_acc + lambda_fmt * r_fmt + lambda_ret * r_ret
//
// All functions are pure and stateless.

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "structured_text.hpp"

namespace recite {

struct RewardWeights {
    double lambda_acc = 0.7;
    double lambda_fmt = 0.1;
    double lambda_ret = 0.2;
};

struct RewardBreakdown {
    double r_acc = 0.0;
    double r_fmt = 0.0;
    double r_ret = 0.0;
    double r_total = 0.0;
};

// SQuAD-style answer normalization, applied in this order: lowercase, strip
// punctuation, drop English articles (a/an/the), collapse whitespace. Each
// step is toggleable; normalization is idempotent.
struct TextNormalizationPolicy {
    bool lowercase = true;
    bool strip_punctuation = true;
    bool drop_articles = true;
    bool collapse_whitespace = true;

    static TextNormalizationPolicy squad() { return {}; }
    static TextNormalizationPolicy none() { return {false, false, false, false}; }
};

namespace detail {

inline bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

inline std::string normalize_text(std::string_view text, const TextNormalizationPolicy& policy) {
    std::string stage;
    stage.reserve(text.size());
    for (char c : text) {
        if (policy.strip_punctuation && detail::is_ascii_punct(c)) continue;
        stage.push_back(policy.lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                                         : c);
    }
    if (!policy.drop_articles && !policy.collapse_whitespace) return stage;

    // Article dropping rejoins tokens, so it collapses whitespace as a side
    // effect regardless of the collapse flag.
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < stage.size()) {
        while (i < stage.size() && detail::is_space(stage[i])) ++i;
        std::size_t start = i;
        while (i < stage.size() && !detail::is_space(stage[i])) ++i;
        if (i > start) tokens.emplace_back(stage.substr(start, i - start));
    }
    if (policy.drop_articles) {
        std::erase_if(tokens, [](const std::string& t) {
            return t == "a" || t == "an" || t == "the";
        });
    }
    std::string out;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (k > 0) out += ' ';
        out += tokens[k];
    }
    return out;
}

inline std::vector<std::string> normalized_tokens(std::string_view text,
                                                  const TextNormalizationPolicy& policy) {
    const std::string normalized = normalize_text(text, policy);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < normalized.size()) {
        while (i < normalized.size() && detail::is_space(normalized[i])) ++i;
        std::size_t start = i;
        while (i < normalized.size() && !detail::is_space(normalized[i])) ++i;
        if (i > start) tokens.emplace_back(normalized.substr(start, i - start));
    }
    return tokens;
}

// Bag-of-tokens F1 after normalization: overlap counts token multiplicity,
// P = overlap/|pred|, R = overlap/|gold|, F1 = 2PR/(P+R). Zero when either
// bag or the overlap is empty.
inline double token_f1(std::string_view prediction, std::string_view gold,
                       const TextNormalizationPolicy& policy = TextNormalizationPolicy::squad()) {
    const auto pred = normalized_tokens(prediction, policy);
    const auto ref = normalized_tokens(gold, policy);
    if (pred.empty() || ref.empty()) return 0.0;

    std::unordered_map<std::string, int> counts;
    for (const auto& t : ref) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

// Runs of whitespace become single spaces; leading/trailing whitespace is
// dropped. Used for substring containment checks.
inline std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (detail::is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

inline double accuracy_reward(std::string_view raw_response, std::string_view gold_answer,
                              const TextNormalizationPolicy& policy = TextNormalizationPolicy::squad()) {
    try {
        return token_f1(extract_answer(raw_response), gold_answer, policy);
    } catch (const NoAnswerFound&) {
        return 0.0;
    }
}

inline double format_reward(std::string_view raw_response) {
    return check_format(raw_response).ok ? 1.0 : 0.0;
}

// 1 iff the response has at least one balanced retrieval pair and every span,
// after whitespace collapse, appears verbatim in the collapsed context.
inline double retrieval_reward(std::string_view raw_response, std::string_view context) {
    const auto extracted = extract_retrieval_spans(raw_response);
    if (extracted.spans.empty()) return 0.0;
    const std::string haystack = collapse_whitespace(context);
    for (const auto& span : extracted.spans) {
        if (haystack.find(collapse_whitespace(span)) == std::string::npos) return 0.0;
    }
    return 1.0;
}

inline RewardBreakdown total_reward(std::string_view raw_response, std::string_view gold_answer,
                                    std::string_view context, const RewardWeights& weights = {},
                                    const TextNormalizationPolicy& policy =
                                        TextNormalizationPolicy::squad()) {
    RewardBreakdown out;
    out.r_acc = accuracy_reward(raw_response, gold_answer, policy);
    out.r_fmt = format_reward(raw_response);
    out.r_ret = retrieval_reward(raw_response, context);
    out.r_total = weights.lambda_acc * out.r_acc + weights.lambda_fmt * out.r_fmt +
                  weights.lambda_ret * out.r_ret;
    return out;
}

}  // namespace recite
