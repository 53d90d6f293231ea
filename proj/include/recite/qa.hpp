#pragma once

// The (question, context, answer, supporting facts) record that the pipeline
// and the curriculum sample over. Supporting facts, when present, are
// verbatim context sentences (verified after whitespace collapse).

#include <string>
#include <vector>

#include "json.hpp"
#include "jsonl.hpp"
#include "rewards.hpp"

namespace recite {

struct QAInstance {
    std::string question;
    std::string context;
    std::string answer;
    std::vector<std::string> supporting_facts;

    bool facts_in_context() const {
        const std::string haystack = collapse_whitespace(context);
        for (const auto& fact : supporting_facts) {
            if (haystack.find(collapse_whitespace(fact)) == std::string::npos) return false;
        }
        return true;
    }
};

inline QAInstance qa_from_json(const nlohmann::json& j) {
    QAInstance out;
    try {
        out.question = j.at("question").get<std::string>();
        out.context = j.at("context").get<std::string>();
        out.answer = j.at("answer").get<std::string>();
        if (j.contains("supporting_facts")) {
            out.supporting_facts = j.at("supporting_facts").get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError{std::string("bad QA record: ") + e.what()};
    }
    return out;
}

inline nlohmann::json qa_to_json(const QAInstance& instance) {
    nlohmann::json j = {
        {"question", instance.question},
        {"context", instance.context},
        {"answer", instance.answer},
    };
    if (!instance.supporting_facts.empty()) j["supporting_facts"] = instance.supporting_facts;
    return j;
}

inline std::vector<QAInstance> load_qa_jsonl(const std::filesystem::path& path) {
    std::vector<QAInstance> out;
    for (const auto& row : read_jsonl(path)) out.push_back(qa_from_json(row));
    return out;
}

}  // namespace recite
