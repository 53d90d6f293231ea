#pragma once

// Three-stage training-data generation: a reasoning model drafts a
// think/answer response for each (context, question) pair, an injection
// model weaves the labeled supporting facts into the extracted reasoning
// chain, and retrieval markers are inserted around every fact occurrence.
// Two filters gate the stages: the drafted answer must match the gold answer
// (token F1 at a configurable threshold, default exact), and the integrated
// chain must contain every supporting fact (whitespace-collapsed). The
// report accounts for every input instance.

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "qa.hpp"
#include "rewards.hpp"
#include "structured_text.hpp"

namespace recite {

struct PromptTemplates {
    std::string reasoning_prompt =
        "You're an expert reader. Your goal is to read a context to answer a question. Note "
        "that during your thinking process, before you make *any reasoning step that requires "
        "retrieving information from the context*, summarize what information you would need "
        "to complete this reasoning step, such as \"I need to know X for this\" or similar "
        "phrases before you reason about the context. This will help you to be more "
        "systematic in your reasoning process. Put your final answer as a minimum phrase or "
        "word at the end after \"Answer:\".\n\nContext:\n{context}\n\nQuestion:\n{question}";

    std::string injection_prompt =
        "I'll provide you with a question, a reasoning process to solve this question, and "
        "several evidence sentences. Insert *all* evidence sentences into the reasoning "
        "process at appropriate locations and give me the updated reasoning process. Each "
        "evidence sentence usually should be placed just before any conclusions or deductions "
        "that depend on it. The evidence sentences may need to be distributed throughout "
        "different parts of the reasoning and may appear more than once. *Do not modify any "
        "evidence sentences* - insert them exactly as provided. Return only the completed "
        "reasoning process without explanations or additional text scaffolds.\n\nQuestion:\n"
        "{question}\n\nReasoning process:\n{reasoning_content}\n\nEvidence sentences (One "
        "sentence per line):\n{evidence_sentence_string}\n\nThe rewritten reasoning process:";

    std::string model_system_prompt =
        "You FIRST think about the reasoning process as an internal monologue and then "
        "provide the final answer. The reasoning process MUST BE enclosed within <think> "
        "</think> tags. WITHIN the thinking process, make reference to the relevant texts in "
        "the prompt that provide critical information to move the reasoning process forward. "
        "The referenced texts MUST BE enclosed within <retrieval> </retrieval> tags, and MUST "
        "BE placed within the reasoning process only. The final answer MUST BE put at the end "
        "of the response after \"Answer:\".";
};

// Replaces every {name} occurrence for each provided slot.
inline std::string render_template(std::string_view tpl,
                                   const std::vector<std::pair<std::string, std::string>>& slots) {
    std::string out(tpl);
    for (const auto& [name, value] : slots) {
        const std::string placeholder = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

// A chat service reduced to prompt -> completion; must be callable from
// multiple worker threads.
using ChatFn = std::function<std::string(const std::string& prompt)>;

struct SftRecord {
    std::string question;
    std::string context;
    std::string answer;
    std::string structured_response;
};

struct MissingThink : std::runtime_error {
    MissingThink() : std::runtime_error("response has no balanced think pair") {}
};

struct PipelineConfig {
    PromptTemplates templates;
    double answer_match_threshold = 1.0;  // token F1; 1.0 means exact normalized match
    TextNormalizationPolicy normalization = TextNormalizationPolicy::squad();
    int parallel = 1;  // bounded in-flight service requests
};

struct PipelineReport {
    std::size_t generated = 0;  // instances that entered the pipeline
    std::size_t answer_match_kept = 0;
    std::size_t containment_kept = 0;
    std::size_t emitted = 0;
    std::map<std::string, std::size_t> drops;                      // reason -> count
    std::vector<std::pair<std::size_t, std::string>> drop_detail;  // (input index, reason)

    std::size_t total_drops() const {
        std::size_t n = 0;
        for (const auto& [reason, count] : drops) n += count;
        return n;
    }
};

inline std::string generate_reasoning(const QAInstance& instance, const ChatFn& reasoner,
                                      const PromptTemplates& templates = {}) {
    return reasoner(render_template(templates.reasoning_prompt,
                                    {{"context", instance.context},
                                     {"question", instance.question}}));
}

inline bool answer_matches(std::string_view raw, std::string_view gold, double threshold = 1.0,
                           const TextNormalizationPolicy& normalization =
                               TextNormalizationPolicy::squad()) {
    try {
        return token_f1(extract_answer(raw), gold, normalization) >= threshold;
    } catch (const NoAnswerFound&) {
        return false;
    }
}

inline std::string extract_reasoning_chain(std::string_view raw) {
    const std::size_t open = raw.find(TagGrammar::think_open);
    if (open == std::string_view::npos) throw MissingThink{};
    const std::size_t inner = open + TagGrammar::think_open.size();
    const std::size_t close = raw.find(TagGrammar::think_close, inner);
    if (close == std::string_view::npos) throw MissingThink{};
    return std::string(raw.substr(inner, close - inner));
}

inline std::string integrate_evidence(std::string_view question, std::string_view chain,
                                      const std::vector<std::string>& facts, const ChatFn& injector,
                                      const PromptTemplates& templates = {}) {
    if (facts.empty()) throw std::invalid_argument("evidence integration needs >= 1 fact");
    std::string fact_lines;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (i > 0) fact_lines += '\n';
        fact_lines += facts[i];
    }
    return injector(render_template(templates.injection_prompt,
                                    {{"question", std::string(question)},
                                     {"reasoning_content", std::string(chain)},
                                     {"evidence_sentence_string", fact_lines}}));
}

inline bool containment_filter(std::string_view integrated, const std::vector<std::string>& facts) {
    const std::string haystack = collapse_whitespace(integrated);
    for (const auto& fact : facts) {
        if (haystack.find(collapse_whitespace(fact)) == std::string::npos) return false;
    }
    return true;
}

// Wraps fact occurrences in retrieval pairs (whitespace-flexible matching)
// and rebuilds the full structured response around the integrated chain.
inline std::string mark_retrieval(std::string_view integrated, const std::vector<std::string>& facts,
                                  std::string_view final_answer) {
    std::string marked =
        insert_retrieval_tokens(integrated, facts, FactMatch::whitespace_flexible);
    std::string out;
    out.reserve(marked.size() + 32);
    out += TagGrammar::think_open;
    out += marked;
    out += TagGrammar::think_close;
    out += "\n";
    out += TagGrammar::answer_prefix;
    out += " ";
    out += final_answer;
    return out;
}

namespace detail {

// every fact must sit inside some retrieval span of the finished record
inline bool facts_inside_spans(const std::string& record, const std::vector<std::string>& facts) {
    const auto spans = extract_retrieval_spans(record).spans;
    for (const auto& fact : facts) {
        const std::string needle = collapse_whitespace(fact);
        bool found = false;
        for (const auto& span : spans) {
            if (collapse_whitespace(span).find(needle) != std::string::npos) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

struct InstanceOutcome {
    std::optional<SftRecord> record;
    std::string drop_reason;        // empty when emitted
    bool passed_answer_filter = false;
    bool passed_containment = false;
};

inline InstanceOutcome process_instance(const QAInstance& instance, const ChatFn& reasoner,
                                        const ChatFn& injector, const PipelineConfig& config) {
    InstanceOutcome outcome;
    if (instance.supporting_facts.empty()) {
        outcome.drop_reason = "no_supporting_facts";
        return outcome;
    }

    std::string raw;
    try {
        raw = generate_reasoning(instance, reasoner, config.templates);
    } catch (const std::exception&) {
        outcome.drop_reason = "reasoner_error";
        return outcome;
    }

    if (!answer_matches(raw, instance.answer, config.answer_match_threshold,
                        config.normalization)) {
        outcome.drop_reason = "answer_mismatch";
        return outcome;
    }
    outcome.passed_answer_filter = true;

    std::string chain;
    try {
        chain = extract_reasoning_chain(raw);
    } catch (const MissingThink&) {
        outcome.drop_reason = "missing_think";
        return outcome;
    }

    std::string integrated;
    try {
        integrated = integrate_evidence(instance.question, chain, instance.supporting_facts,
                                        injector, config.templates);
    } catch (const std::exception&) {
        outcome.drop_reason = "injector_error";
        return outcome;
    }

    if (!containment_filter(integrated, instance.supporting_facts)) {
        outcome.drop_reason = "missing_fact";
        return outcome;
    }
    outcome.passed_containment = true;

    std::string response;
    try {
        response = mark_retrieval(integrated, instance.supporting_facts, extract_answer(raw));
    } catch (const std::exception&) {
        outcome.drop_reason = "fact_not_found";
        return outcome;
    }

    if (!check_format(response).ok ||
        !facts_inside_spans(response, instance.supporting_facts)) {
        outcome.drop_reason = "malformed_record";
        return outcome;
    }

    outcome.record = SftRecord{instance.question, instance.context, instance.answer, response};
    return outcome;
}

}  // namespace detail

// Runs every instance through generate -> answer filter -> chain extraction
// -> integrate -> containment filter -> mark. Per-instance failures become
// drop reasons, never exceptions. Instances are processed by up to
// config.parallel workers; outputs keep input order.
inline std::pair<std::vector<SftRecord>, PipelineReport> run_pipeline(
    const std::vector<QAInstance>& source, const ChatFn& reasoner, const ChatFn& injector,
    const PipelineConfig& config = {}) {
    std::vector<detail::InstanceOutcome> outcomes(source.size());

    const int workers = std::max(1, std::min<int>(config.parallel,
                                                  static_cast<int>(source.size() ? source.size() : 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < source.size(); ++i) {
            outcomes[i] = detail::process_instance(source[i], reasoner, injector, config);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= source.size()) break;
                    outcomes[i] = detail::process_instance(source[i], reasoner, injector, config);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    std::vector<SftRecord> records;
    PipelineReport report;
    report.generated = source.size();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        auto& outcome = outcomes[i];
        if (outcome.passed_answer_filter) ++report.answer_match_kept;
        if (outcome.passed_containment) ++report.containment_kept;
        if (outcome.record) {
            ++report.emitted;
            records.push_back(std::move(*outcome.record));
        } else {
            ++report.drops[outcome.drop_reason];
            report.drop_detail.emplace_back(i, outcome.drop_reason);
        }
    }
    return {std::move(records), std::move(report)};
}

inline nlohmann::json report_to_json(const PipelineReport& report) {
    nlohmann::json drops = nlohmann::json::object();
    for (const auto& [reason, count] : report.drops) drops[reason] = count;
    nlohmann::json detail = nlohmann::json::array();
    for (const auto& [index, reason] : report.drop_detail) {
        detail.push_back({{"index", index}, {"reason", reason}});
    }
    return {
        {"generated", report.generated},
        {"answer_match_kept", report.answer_match_kept},
        {"containment_kept", report.containment_kept},
        {"emitted", report.emitted},
        {"drops", drops},
        {"drop_detail", detail},
    };
}

}  // namespace recite
