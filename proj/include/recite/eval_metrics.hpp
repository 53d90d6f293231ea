#pragma once

// QA evaluation metrics: token-F1 over normalized answers, corpus BLEU with
// the reference scorer's defaults, ROUGE-L F1, and span-vs-facts retrieval
// scoring.
//
// BLEU notes, pinned bit-exactly:
//   - 13a tokenization. After unescaping &quot; &amp; &lt; &gt; and mapping
//     newlines to spaces, these characters are padded with spaces:
//     { | } ~ [ \ ] ^ _ ` space ! " # $ % & ( ) * + : ; < = > ? @ /
//     then "." and "," are padded unless both neighbours are digits, and "-"
//     is padded when preceded by a digit. Tokens are whitespace-split.
//   - modified n-gram precision pooled over the corpus for n = 1..4.
//   - exponential smoothing: the k-th n-gram order with zero matches scores
//     100 / (2^k * total_n).
//   - brevity penalty exp(1 - ref_len/hyp_len) when hyp_len < ref_len.
//   - score in [0, 100], geometric mean of the four precisions times BP.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jsonl.hpp"
#include "rewards.hpp"
#include "structured_text.hpp"

namespace recite {

struct LengthMismatch : std::invalid_argument {
    LengthMismatch() : std::invalid_argument("aligned lists differ in length") {}
};

struct EmptyCorpus : std::invalid_argument {
    EmptyCorpus() : std::invalid_argument("corpus metrics need at least one pair") {}
};

struct MetricReport {
    std::vector<std::string> ids;
    std::vector<double> scores;
    double aggregate = 0.0;

    std::size_t count() const { return scores.size(); }

    void finalize() {
        aggregate = 0.0;
        for (double s : scores) aggregate += s;
        if (!scores.empty()) aggregate /= static_cast<double>(scores.size());
    }
};

// Answer F1: token_f1 under the SQuAD-style normalization policy.
inline double qa_f1(std::string_view prediction, std::string_view gold) {
    return token_f1(prediction, gold, TextNormalizationPolicy::squad());
}

namespace detail {

inline bool is_13a_punct(char c) {
    return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') ||
           (c >= '(' && c <= '+') || (c >= ':' && c <= '@') || c == '/';
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// International (13a) tokenization of the reference BLEU scorer.
inline std::vector<std::string> tokenize_13a(std::string_view text) {
    std::string norm(text);
    replace_all(norm, "<skipped>", "");
    replace_all(norm, "-\n", "");
    replace_all(norm, "\n", " ");
    if (norm.find('&') != std::string::npos) {
        replace_all(norm, "&quot;", "\"");
        replace_all(norm, "&amp;", "&");
        replace_all(norm, "&lt;", "<");
        replace_all(norm, "&gt;", ">");
    }

    std::string line = " " + norm + " ";

    // pad general punctuation (single-character class, so a plain expansion
    // is exactly the regex substitution)
    std::string stage;
    stage.reserve(line.size() * 2);
    for (char c : line) {
        if (is_13a_punct(c)) {
            stage += ' ';
            stage += c;
            stage += ' ';
        } else {
            stage += c;
        }
    }

    // left-to-right non-overlapping pair rewrites, same semantics as the
    // reference scorer's sequential regex substitutions
    auto rewrite = [](const std::string& s, auto&& matches, auto&& emit) {
        std::string out;
        out.reserve(s.size() * 2);
        std::size_t i = 0;
        while (i < s.size()) {
            if (i + 1 < s.size() && matches(s[i], s[i + 1])) {
                emit(out, s[i], s[i + 1]);
                i += 2;
            } else {
                out += s[i];
                ++i;
            }
        }
        return out;
    };

    // ([^0-9])([.,]) -> "\1 \2 "
    stage = rewrite(
        stage, [](char a, char b) { return !is_digit(a) && (b == '.' || b == ','); },
        [](std::string& out, char a, char b) {
            out += a;
            out += ' ';
            out += b;
            out += ' ';
        });
    // ([.,])([^0-9]) -> " \1 \2"
    stage = rewrite(
        stage, [](char a, char b) { return (a == '.' || a == ',') && !is_digit(b); },
        [](std::string& out, char a, char b) {
            out += ' ';
            out += a;
            out += ' ';
            out += b;
        });
    // ([0-9])(-) -> "\1 - "
    stage = rewrite(
        stage, [](char a, char b) { return is_digit(a) && b == '-'; },
        [](std::string& out, char a, char b) {
            out += a;
            out += ' ';
            out += b;
            out += ' ';
        });

    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < stage.size()) {
        while (i < stage.size() && is_space(stage[i])) ++i;
        std::size_t start = i;
        while (i < stage.size() && !is_space(stage[i])) ++i;
        if (i > start) tokens.push_back(stage.substr(start, i - start));
    }
    return tokens;
}

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens,
                                                            int n) {
    std::map<std::vector<std::string>, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    }
    return counts;
}

}  // namespace detail

inline double corpus_bleu(const std::vector<std::string>& hypotheses,
                          const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) throw LengthMismatch{};
    if (hypotheses.empty()) throw EmptyCorpus{};

    constexpr int max_order = 4;
    long long correct[max_order] = {0, 0, 0, 0};
    long long total[max_order] = {0, 0, 0, 0};
    long long hyp_len = 0, ref_len = 0;

    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto hyp = detail::tokenize_13a(hypotheses[i]);
        const auto ref = detail::tokenize_13a(references[i]);
        hyp_len += static_cast<long long>(hyp.size());
        ref_len += static_cast<long long>(ref.size());
        for (int n = 1; n <= max_order; ++n) {
            const auto hyp_ngrams = detail::ngram_counts(hyp, n);
            const auto ref_ngrams = detail::ngram_counts(ref, n);
            for (const auto& [gram, count] : hyp_ngrams) {
                total[n - 1] += count;
                auto it = ref_ngrams.find(gram);
                if (it != ref_ngrams.end()) correct[n - 1] += std::min(count, it->second);
            }
        }
    }

    double smooth = 1.0;
    double precisions[max_order] = {0.0, 0.0, 0.0, 0.0};
    for (int n = 1; n <= max_order; ++n) {
        if (total[n - 1] == 0) break;
        if (correct[n - 1] == 0) {
            smooth *= 2.0;
            precisions[n - 1] = 100.0 / (smooth * static_cast<double>(total[n - 1]));
        } else {
            precisions[n - 1] =
                100.0 * static_cast<double>(correct[n - 1]) / static_cast<double>(total[n - 1]);
        }
    }

    double bp = 1.0;
    if (hyp_len < ref_len) {
        bp = hyp_len > 0 ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                         : 0.0;
    }

    // geometric mean of equal precisions is that value; taking it directly
    // keeps a perfect corpus at exactly 100
    if (precisions[0] == precisions[1] && precisions[1] == precisions[2] &&
        precisions[2] == precisions[3]) {
        return bp * precisions[0];
    }
    double log_sum = 0.0;
    for (double p : precisions) log_sum += p > 0.0 ? std::log(p) : -9999999999.0;
    return bp * std::exp(log_sum / max_order);
}

// LCS over whitespace tokens; P = LCS/|hyp|, R = LCS/|ref|.
inline double rouge_l_f1(std::string_view hypothesis, std::string_view reference) {
    const auto hyp = normalized_tokens(hypothesis, TextNormalizationPolicy::none());
    const auto ref = normalized_tokens(reference, TextNormalizationPolicy::none());
    if (hyp.empty() || ref.empty()) return 0.0;

    std::vector<std::vector<int>> lcs(hyp.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            lcs[i][j] = hyp[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1
                                                 : std::max(lcs[i - 1][j], lcs[i][j - 1]);
        }
    }
    const int common = lcs[hyp.size()][ref.size()];
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(hyp.size());
    const double recall = static_cast<double>(common) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

struct RetrievalEvalReport {
    MetricReport bleu;
    MetricReport rouge_l;
};

// Per instance: retrieval spans (newline-joined, document order) against the
// newline-joined gold facts. Instances with zero spans score 0 on both
// metrics. Aggregates are arithmetic means.
inline RetrievalEvalReport retrieval_eval(const std::vector<std::string>& responses,
                                          const std::vector<std::vector<std::string>>& gold_facts) {
    if (responses.size() != gold_facts.size()) throw LengthMismatch{};
    RetrievalEvalReport report;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto spans = extract_retrieval_spans(responses[i]).spans;
        std::string predicted;
        for (std::size_t k = 0; k < spans.size(); ++k) {
            if (k > 0) predicted += '\n';
            predicted += spans[k];
        }
        std::string gold;
        for (std::size_t k = 0; k < gold_facts[i].size(); ++k) {
            if (k > 0) gold += '\n';
            gold += gold_facts[i][k];
        }
        const std::string id = std::to_string(i);
        report.bleu.ids.push_back(id);
        report.rouge_l.ids.push_back(id);
        if (spans.empty()) {
            report.bleu.scores.push_back(0.0);
            report.rouge_l.scores.push_back(0.0);
        } else {
            report.bleu.scores.push_back(corpus_bleu({predicted}, {gold}));
            report.rouge_l.scores.push_back(rouge_l_f1(predicted, gold));
        }
    }
    report.bleu.finalize();
    report.rouge_l.finalize();
    return report;
}

// Predictions JSONL {id, prediction} scored against gold JSONL
// {id, answers: [...]}; qa_f1 takes the max over the gold answers.
inline MetricReport evaluate_dataset(const std::filesystem::path& predictions_file,
                                     const std::filesystem::path& gold_file) {
    const auto id_of = [](const nlohmann::json& row) -> std::string {
        if (!row.contains("id")) throw SchemaError{"record without id: " + row.dump()};
        const auto& id = row.at("id");
        return id.is_string() ? id.get<std::string>() : id.dump();
    };

    std::unordered_map<std::string, std::string> predictions;
    for (const auto& row : read_jsonl(predictions_file)) {
        try {
            predictions[id_of(row)] = row.at("prediction").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError{std::string("bad prediction record: ") + e.what()};
        }
    }

    MetricReport report;
    for (const auto& row : read_jsonl(gold_file)) {
        const std::string id = id_of(row);
        std::vector<std::string> answers;
        try {
            answers = row.at("answers").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError{std::string("bad gold record: ") + e.what()};
        }
        auto it = predictions.find(id);
        if (it == predictions.end()) throw MissingId{id};
        double best = 0.0;
        for (const auto& answer : answers) best = std::max(best, qa_f1(it->second, answer));
        report.ids.push_back(id);
        report.scores.push_back(best);
    }
    report.finalize();
    return report;
}

}  // namespace recite
