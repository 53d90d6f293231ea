#pragma once

// JSONL file helpers shared by the pipeline, metrics and CLI.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace recite {

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingId : std::runtime_error {
    explicit MissingId(const std::string& id)
        : std::runtime_error("no matching record for id \"" + id + "\"") {}
};

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError{"cannot open " + path.string()};
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError{path.string() + ":" + std::to_string(line_no) + ": " + e.what()};
        }
    }
    return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
    std::ofstream out(path);
    if (!out) throw SchemaError{"cannot write " + path.string()};
    for (const auto& row : rows) out << row.dump() << '\n';
}

}  // namespace recite
