#include "doctest.h"

// End-to-end checks of the installed CLI binary (path injected by CMake).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "support/tempdir.hpp"

#ifndef RECITE_CLI_PATH
#error "RECITE_CLI_PATH must be defined by the build"
#endif

namespace {

struct RunResult {
    int exit_code;
    std::string stdout_text;
};

RunResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out_file = scratch / "cli_stdout.txt";
    const std::string command =
        std::string(RECITE_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>/dev/null";
    const int status = std::system(command.c_str());
    std::ifstream in(out_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return {WEXITSTATUS(status), buffer.str()};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("cli: exit code contract") {
    testsupport::TempDir dir("cli");
    CHECK(run_cli("--help", dir.path()).exit_code == 0);
    CHECK(run_cli("no-such-command", dir.path()).exit_code == 2);
    CHECK(run_cli("score --responses missing.jsonl --gold missing.jsonl", dir.path()).exit_code ==
          2);
    CHECK(run_cli("grad-check --trials 0", dir.path()).exit_code == 2);
    CHECK(run_cli("grad-check --unknown-flag", dir.path()).exit_code == 2);
}

TEST_CASE("cli: grad-check passes clean and fails when corrupted") {
    testsupport::TempDir dir("cli");
    auto clean = run_cli("grad-check --trials 5 --seed 9", dir.path());
    CHECK(clean.exit_code == 0);
    CHECK(clean.stdout_text.find("max relative error") != std::string::npos);

    CHECK(run_cli("grad-check --trials 5 --seed 9 --corrupt-analytic", dir.path()).exit_code == 1);
}

TEST_CASE("cli: score echoes default weights and scores a perfect fixture") {
    testsupport::TempDir dir("cli");
    dir.write("resp.jsonl",
              "{\"id\":\"a\",\"response\":\"<think>see <retrieval>beta gamma</retrieval>"
              "</think>Answer: epsilon\"}\n");
    dir.write("gold.jsonl",
              "{\"id\":\"a\",\"answer\":\"epsilon\",\"context\":\"alpha beta gamma delta\"}\n");

    auto result = run_cli("score --responses " + (dir.path() / "resp.jsonl").string() + " --gold " +
                              (dir.path() / "gold.jsonl").string() + " --output " +
                              (dir.path() / "report.json").string(),
                          dir.path());
    REQUIRE(result.exit_code == 0);
    // resolved config on the first stdout line carries the default weights
    const auto config = nlohmann::json::parse(result.stdout_text.substr(0, result.stdout_text.find('\n')));
    CHECK(config["config"]["weights"] == nlohmann::json({0.7, 0.1, 0.2}));

    const auto report = nlohmann::json::parse(read_file(dir.path() / "report.json"));
    CHECK(report["mean"]["r_total"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli: score flags fabricated spans") {
    testsupport::TempDir dir("cli");
    dir.write("resp.jsonl",
              "{\"id\":\"a\",\"response\":\"<think><retrieval>made up</retrieval></think>"
              "Answer: epsilon\"}\n");
    dir.write("gold.jsonl",
              "{\"id\":\"a\",\"answer\":\"epsilon\",\"context\":\"alpha beta gamma delta\"}\n");
    auto result = run_cli("score --responses " + (dir.path() / "resp.jsonl").string() + " --gold " +
                              (dir.path() / "gold.jsonl").string() + " --output " +
                              (dir.path() / "report.json").string(),
                          dir.path());
    REQUIRE(result.exit_code == 0);
    const auto report = nlohmann::json::parse(read_file(dir.path() / "report.json"));
    CHECK(report["mean"]["r_ret"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("cli: train-toy is deterministic per seed") {
    testsupport::TempDir dir("cli");
    const auto config = dir.write("config.json", "{\"steps\": 25, \"seed\": 5}");
    const auto trace_a = (dir.path() / "a.csv").string();
    const auto trace_b = (dir.path() / "b.csv").string();

    CHECK(run_cli("train-toy --config " + config.string() + " --trace " + trace_a, dir.path())
              .exit_code == 0);
    CHECK(run_cli("train-toy --config " + config.string() + " --trace " + trace_b, dir.path())
              .exit_code == 0);
    const std::string a = read_file(trace_a);
    CHECK(a == read_file(trace_b));

    // 25 steps -> header + 25 rows
    CHECK(std::count(a.begin(), a.end(), '\n') == 26);

    // steps=1 -> single-row trace
    const auto single = dir.write("single.json", "{\"steps\": 1}");
    const auto trace_c = (dir.path() / "c.csv").string();
    CHECK(run_cli("train-toy --config " + single.string() + " --trace " + trace_c, dir.path())
              .exit_code == 0);
    const std::string c = read_file(trace_c);
    CHECK(std::count(c.begin(), c.end(), '\n') == 2);

    // malformed config -> schema error
    const auto broken = dir.write("broken.json", "{\"steps\": \"oops\"}");
    CHECK(run_cli("train-toy --config " + broken.string(), dir.path()).exit_code == 2);
}

TEST_CASE("cli: train-toy default config runs the full 350 steps") {
    testsupport::TempDir dir("cli");
    const auto trace = (dir.path() / "default.csv").string();
    CHECK(run_cli("train-toy --trace " + trace, dir.path()).exit_code == 0);
    const std::string text = read_file(trace);
    CHECK(std::count(text.begin(), text.end(), '\n') == 351);  // header + 350 rows
}

namespace {

// Chat endpoint good enough for the pipeline: answers with the token after
// "code:" in the prompt, and echoes reasoning + evidence for injection.
class PipelineEndpoint {
  public:
    PipelineEndpoint() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
            ++calls_;
            const auto body = nlohmann::json::parse(req.body);
            const std::string prompt = body["messages"][0]["content"].get<std::string>();
            std::string content;
            if (prompt.starts_with("You're an expert reader")) {
                const auto pos = prompt.find("code:");
                const auto end = prompt.find_first_of(" \n.", pos + 5);
                content = "<think>scanning the notes.</think>\nAnswer: " +
                          prompt.substr(pos + 5, end - pos - 5);
            } else {
                const auto chain_begin = prompt.find("Reasoning process:\n") + 19;
                const auto chain_end = prompt.find("\n\nEvidence sentences");
                const auto ev_begin = prompt.find("(One sentence per line):\n") + 25;
                const auto ev_end = prompt.find("\n\nThe rewritten");
                content = prompt.substr(chain_begin, chain_end - chain_begin) + " " +
                          prompt.substr(ev_begin, ev_end - ev_begin);
            }
            res.set_content(nlohmann::json{{"choices",
                                            {{{"message",
                                               {{"role", "assistant"}, {"content", content}}}}}}}
                                .dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~PipelineEndpoint() {
        server_.stop();
        thread_.join();
    }
    int calls() const { return calls_.load(); }
    std::string url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

  private:
    httplib::Server server_;
    std::thread thread_;
    std::atomic<int> calls_{0};
    int port_ = 0;
};

}  // namespace

TEST_CASE("cli: gen-sft against a mock endpoint, with warm cache rerun") {
    testsupport::TempDir dir("cli");
    PipelineEndpoint endpoint;

    std::string input;
    for (int i = 0; i < 4; ++i) {
        nlohmann::json row = {
            {"question", "what is the code in note " + std::to_string(i) + "?"},
            {"context", "fact alpha " + std::to_string(i) + ". code:word" + std::to_string(i) + " end."},
            {"answer", "word" + std::to_string(i)},
            {"supporting_facts", {"fact alpha " + std::to_string(i)}},
        };
        input += row.dump() + "\n";
    }
    const auto input_path = dir.write("input.jsonl", input);
    const auto base = "gen-sft --input " + input_path.string() + " --output " +
                      (dir.path() / "out.jsonl").string() + " --report " +
                      (dir.path() / "report.json").string() + " --endpoint " + endpoint.url() +
                      " --cache-dir " + (dir.path() / "cache").string();

    REQUIRE(run_cli(base, dir.path()).exit_code == 0);
    const auto report = nlohmann::json::parse(read_file(dir.path() / "report.json"));
    CHECK(report["generated"].get<int>() == 4);
    CHECK(report["emitted"].get<int>() == 4);
    std::size_t total_drops = 0;
    for (const auto& [reason, count] : report["drops"].items()) {
        total_drops += count.get<std::size_t>();
    }
    CHECK(report["generated"].get<std::size_t>() ==
          report["emitted"].get<std::size_t>() + total_drops);
    const int cold_calls = endpoint.calls();
    CHECK(cold_calls == 8);  // one reasoning + one injection per instance

    // warm rerun: all completions come from the cache
    REQUIRE(run_cli(base, dir.path()).exit_code == 0);
    CHECK(endpoint.calls() == cold_calls);

    // emitted records carry the documented field names
    std::istringstream out(read_file(dir.path() / "out.jsonl"));
    std::string line;
    int rows = 0;
    while (std::getline(out, line)) {
        const auto row = nlohmann::json::parse(line);
        CHECK(row.contains("question"));
        CHECK(row.contains("context"));
        CHECK(row.contains("answer"));
        CHECK(row.contains("response"));
        ++rows;
    }
    CHECK(rows == 4);

    // missing input file is a usage error
    CHECK(run_cli("gen-sft --input missing.jsonl --output x.jsonl", dir.path()).exit_code == 2);
}

TEST_CASE("cli: eval metrics") {
    testsupport::TempDir dir("cli");
    dir.write("pred.jsonl",
              "{\"id\":\"a\",\"prediction\":\"Paris\"}\n"
              "{\"id\":\"b\",\"prediction\":\"The Nile river\"}\n");
    dir.write("gold.jsonl",
              "{\"id\":\"a\",\"answers\":[\"paris\"]}\n"
              "{\"id\":\"b\",\"answers\":[\"nile river\"]}\n");
    auto qa = run_cli("eval --predictions " + (dir.path() / "pred.jsonl").string() + " --gold " +
                          (dir.path() / "gold.jsonl").string() + " --metric qa_f1 --output " +
                          (dir.path() / "qa.json").string(),
                      dir.path());
    REQUIRE(qa.exit_code == 0);
    CHECK(nlohmann::json::parse(read_file(dir.path() / "qa.json"))["aggregate"].get<double>() ==
          doctest::Approx(1.0));

    // retrieval metric on a gold-span fixture
    dir.write("resp.jsonl",
              "{\"id\":\"a\",\"prediction\":\"<think><retrieval>fact one</retrieval>\\n"
              "<retrieval>fact two</retrieval></think>Answer: x\"}\n");
    dir.write("facts.jsonl", "{\"id\":\"a\",\"facts\":[\"fact one\",\"fact two\"]}\n");
    auto ret = run_cli("eval --predictions " + (dir.path() / "resp.jsonl").string() + " --gold " +
                           (dir.path() / "facts.jsonl").string() + " --metric retrieval --output " +
                           (dir.path() / "ret.json").string(),
                       dir.path());
    REQUIRE(ret.exit_code == 0);
    const auto report = nlohmann::json::parse(read_file(dir.path() / "ret.json"));
    CHECK(report["rouge_l"]["aggregate"].get<double>() == doctest::Approx(1.0));

    // schema problems exit 2
    dir.write("bad.jsonl", "{\"id\":\"a\"}\n");
    CHECK(run_cli("eval --predictions " + (dir.path() / "bad.jsonl").string() + " --gold " +
                      (dir.path() / "gold.jsonl").string() + " --metric qa_f1",
                  dir.path())
              .exit_code == 2);
}
