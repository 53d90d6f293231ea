// recite — structured retrieval-reasoning toolkit CLI.
//
// Subcommands:
//   gen-sft     three-stage SFT data generation against a chat endpoint
//   score       reward breakdowns for response/gold JSONL pairs
//   grad-check  analytic-vs-numeric GRPO gradient verification
//   train-toy   curriculum GRPO on synthetic needle pools
//   eval        QA / retrieval metrics over prediction files
//
// Exit codes: 0 success, 1 check failure, 2 usage or schema error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include <recite/eval_metrics.hpp>
#include <recite/grpo.hpp>
#include <recite/jsonl.hpp>
#include <recite/model_client.hpp>
#include <recite/qa.hpp>
#include <recite/sft_pipeline.hpp>
#include <recite/structured_text.hpp>
#include <recite/toy_lab.hpp>

namespace {

using nlohmann::json;

void print_resolved_config(const std::string& command, const json& config) {
    std::cout << json{{"command", command}, {"config", config}}.dump() << "\n";
}

void write_or_print(const std::string& output_path, const json& report) {
    if (output_path.empty()) {
        std::cout << report.dump() << "\n";
    } else {
        std::ofstream out(output_path);
        if (!out) throw recite::SchemaError{"cannot write " + output_path};
        out << report.dump(2) << "\n";
    }
}

// ---------------------------------------------------------------- gen-sft

struct GenSftArgs {
    std::string input, output, report;
    std::string endpoint = "http://localhost:8000/v1/chat/completions";
    std::string reasoner_model = "reasoner";
    std::string injector_model = "injector";
    std::string cache_dir;
    std::string token_env = "RECITE_API_TOKEN";
    double reasoner_temp = 0.7;
    double injector_temp = 0.0;
    int parallel = 1;
    int max_tokens = 2048;
};

int run_gen_sft(const GenSftArgs& args, bool verbose) {
    print_resolved_config("gen-sft", {{"input", args.input},
                                      {"output", args.output},
                                      {"report", args.report},
                                      {"endpoint", args.endpoint},
                                      {"reasoner_model", args.reasoner_model},
                                      {"injector_model", args.injector_model},
                                      {"cache_dir", args.cache_dir},
                                      {"reasoner_temperature", args.reasoner_temp},
                                      {"injector_temperature", args.injector_temp},
                                      {"parallel", args.parallel}});

    const auto instances = recite::load_qa_jsonl(args.input);

    recite::ClientConfig client;
    client.endpoint_url = args.endpoint;
    client.auth_token_env = args.token_env;
    client.cache_dir = args.cache_dir;

    const auto service = [&](const std::string& model, double temperature) {
        return recite::ChatFn([=](const std::string& prompt) {
            recite::ChatRequest request;
            request.model_name = model;
            request.messages = {{"user", prompt}};
            request.temperature = temperature;
            request.max_output_tokens = args.max_tokens;
            return recite::complete(request, client);
        });
    };

    recite::PipelineConfig config;
    config.parallel = args.parallel;
    auto [records, report] = recite::run_pipeline(
        instances, service(args.reasoner_model, args.reasoner_temp),
        service(args.injector_model, args.injector_temp), config);

    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        rows.push_back({{"question", r.question},
                        {"context", r.context},
                        {"answer", r.answer},
                        {"response", r.structured_response}});
    }
    recite::write_jsonl(args.output, rows);
    write_or_print(args.report, recite::report_to_json(report));
    if (verbose) {
        for (const auto& [index, reason] : report.drop_detail) {
            std::cerr << "dropped instance " << index << ": " << reason << "\n";
        }
    }
    std::cout << "gen-sft: " << report.emitted << "/" << report.generated << " instances emitted\n";
    return 0;
}

// ------------------------------------------------------------------ score

struct ScoreArgs {
    std::string responses, gold, output;
    std::vector<double> weights = {0.7, 0.1, 0.2};
};

int run_score(const ScoreArgs& args) {
    if (args.weights.size() != 3) throw recite::SchemaError{"--weights needs exactly a,b,c"};
    recite::RewardWeights weights{args.weights[0], args.weights[1], args.weights[2]};
    print_resolved_config("score", {{"responses", args.responses},
                                    {"gold", args.gold},
                                    {"weights", args.weights},
                                    {"output", args.output}});

    std::map<std::string, std::pair<std::string, std::string>> gold;  // id -> (answer, context)
    for (const auto& row : recite::read_jsonl(args.gold)) {
        try {
            const auto id = row.at("id").is_string() ? row.at("id").get<std::string>()
                                                     : row.at("id").dump();
            gold[id] = {row.at("answer").get<std::string>(), row.at("context").get<std::string>()};
        } catch (const json::exception& e) {
            throw recite::SchemaError{std::string("bad gold record: ") + e.what()};
        }
    }

    json instances = json::array();
    recite::RewardBreakdown mean;
    std::size_t n = 0;
    for (const auto& row : recite::read_jsonl(args.responses)) {
        std::string id, response;
        try {
            id = row.at("id").is_string() ? row.at("id").get<std::string>() : row.at("id").dump();
            response = row.at("response").get<std::string>();
        } catch (const json::exception& e) {
            throw recite::SchemaError{std::string("bad response record: ") + e.what()};
        }
        auto it = gold.find(id);
        if (it == gold.end()) throw recite::MissingId{id};
        const auto b = recite::total_reward(response, it->second.first, it->second.second, weights);
        instances.push_back({{"id", id},
                             {"r_acc", b.r_acc},
                             {"r_fmt", b.r_fmt},
                             {"r_ret", b.r_ret},
                             {"r_total", b.r_total}});
        mean.r_acc += b.r_acc;
        mean.r_fmt += b.r_fmt;
        mean.r_ret += b.r_ret;
        mean.r_total += b.r_total;
        ++n;
    }
    if (n > 0) {
        mean.r_acc /= static_cast<double>(n);
        mean.r_fmt /= static_cast<double>(n);
        mean.r_ret /= static_cast<double>(n);
        mean.r_total /= static_cast<double>(n);
    }

    write_or_print(args.output, json{{"weights", args.weights},
                                     {"instances", instances},
                                     {"mean",
                                      {{"r_acc", mean.r_acc},
                                       {"r_fmt", mean.r_fmt},
                                       {"r_ret", mean.r_ret},
                                       {"r_total", mean.r_total}}}});
    std::cout << "score: " << n << " instances, mean total " << mean.r_total << "\n";
    return 0;
}

// ------------------------------------------------------------- grad-check

struct GradCheckArgs {
    std::uint64_t seed = 1;
    int horizon = 3;
    int vocab = 5;
    int trials = 20;
    bool corrupt = false;  // test hook: breaks the analytic gradient on purpose
};

recite::RolloutGroup make_verification_group(const recite::ToyPolicy& policy, int group_size,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.4);
    std::uniform_real_distribution<double> reward(0.0, 1.0);

    recite::ToyPolicy old_policy = policy;
    recite::ToyPolicy ref_policy = policy;
    for (double& v : old_policy.raw_logits()) v += noise(rng);
    for (double& v : ref_policy.raw_logits()) v += noise(rng);

    recite::RolloutGroup group;
    group.query_id = "grad-check";
    for (int i = 0; i < group_size; ++i) {
        auto symbols = old_policy.sample(rng);
        group.logp_new.push_back(policy.sequence_log_probs(symbols));
        group.logp_old.push_back(old_policy.sequence_log_probs(symbols));
        group.logp_ref.push_back(ref_policy.sequence_log_probs(symbols));
        group.outputs.push_back(std::move(symbols));
        group.rewards.push_back(reward(rng));
    }
    return group;
}

bool group_near_clip_boundary(const recite::RolloutGroup& group, double epsilon) {
    for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        for (std::size_t t = 0; t < group.outputs[i].size(); ++t) {
            const double w = std::exp(group.logp_new[i][t] - group.logp_old[i][t]);
            if (std::fabs(w - (1.0 - epsilon)) < 1e-6 || std::fabs(w - (1.0 + epsilon)) < 1e-6) {
                return true;
            }
        }
    }
    return false;
}

int run_grad_check(const GradCheckArgs& args) {
    print_resolved_config("grad-check", {{"seed", args.seed},
                                         {"horizon", args.horizon},
                                         {"vocab", args.vocab},
                                         {"trials", args.trials}});
    recite::GrpoConfig config;
    double worst = 0.0;
    int checked = 0;
    std::uint64_t seed = args.seed;
    while (checked < args.trials) {
        auto policy = recite::ToyPolicy::random_init(args.horizon, args.vocab, seed);
        auto group = make_verification_group(policy, config.group_size, seed + 0x51ed);
        ++seed;
        if (group_near_clip_boundary(group, config.clip_epsilon)) continue;

        auto analytic = recite::grpo_gradient(policy, group, config);
        const auto numeric = recite::finite_diff_gradient(policy, group, config, 1e-5);
        if (args.corrupt) analytic[0] += 1e-2;

        for (std::size_t k = 0; k < analytic.size(); ++k) {
            const double denom = std::max({std::fabs(analytic[k]), std::fabs(numeric[k]), 1e-6});
            worst = std::max(worst, std::fabs(analytic[k] - numeric[k]) / denom);
        }
        ++checked;
    }
    std::cout << "grad-check: " << checked << " trials, max relative error " << worst << "\n";
    return worst <= 1e-4 ? 0 : 1;
}

// -------------------------------------------------------------- train-toy

struct TrainToyArgs {
    std::string config_path;
    std::string trace_path = "trace.csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_train_toy(const TrainToyArgs& args, bool verbose) {
    recite::TrainConfig config;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw recite::SchemaError{"cannot open config " + args.config_path};
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw recite::SchemaError{"config is not valid JSON"};
        config = recite::train_config_from_json(j);
    }
    if (args.seed_set) config.seed = args.seed;
    print_resolved_config("train-toy", recite::train_config_to_json(config));

    const auto pools =
        recite::make_pools(config.seed, config.easy_count, config.hard_count, config.vocab);
    const auto started = std::chrono::steady_clock::now();
    const auto result = recite::run_curriculum_grpo(config, pools);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (verbose) {
        for (const auto& record : result.trace.records) {
            if (record.step % 50 == 0) {
                std::cerr << "step " << record.step << ": alpha " << record.alpha
                          << ", mean reward " << record.mean_reward << "\n";
            }
        }
    }

    recite::emit_trace(result.trace, args.trace_path);
    const auto& records = result.trace.records;
    const double final_reward = records.empty() ? 0.0 : records.back().mean_reward;
    std::cout << "train-toy: " << records.size() << " steps in " << seconds
              << "s, final mean reward " << final_reward << ", trace written to "
              << args.trace_path << "\n";
    return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
    std::string predictions, gold, metric = "qa_f1", output;
};

int run_eval(const EvalArgs& args) {
    print_resolved_config("eval", {{"predictions", args.predictions},
                                   {"gold", args.gold},
                                   {"metric", args.metric},
                                   {"output", args.output}});

    const auto id_of = [](const json& row) -> std::string {
        if (!row.contains("id")) throw recite::SchemaError{"record without id: " + row.dump()};
        return row.at("id").is_string() ? row.at("id").get<std::string>() : row.at("id").dump();
    };

    json report;
    if (args.metric == "qa_f1") {
        const auto metric = recite::evaluate_dataset(args.predictions, args.gold);
        json instances = json::array();
        for (std::size_t i = 0; i < metric.count(); ++i) {
            instances.push_back({{"id", metric.ids[i]}, {"score", metric.scores[i]}});
        }
        report = {{"metric", "qa_f1"}, {"aggregate", metric.aggregate}, {"instances", instances}};
        std::cout << "eval qa_f1: mean " << metric.aggregate << " over " << metric.count()
                  << " instances\n";
    } else {
        // align the two files by id
        std::unordered_map<std::string, std::string> predictions;
        for (const auto& row : recite::read_jsonl(args.predictions)) {
            try {
                predictions[id_of(row)] = row.at("prediction").get<std::string>();
            } catch (const json::exception& e) {
                throw recite::SchemaError{std::string("bad prediction record: ") + e.what()};
            }
        }
        std::vector<std::string> preds;
        std::vector<std::string> first_answers;
        std::vector<std::vector<std::string>> fact_lists;
        for (const auto& row : recite::read_jsonl(args.gold)) {
            const std::string id = id_of(row);
            auto it = predictions.find(id);
            if (it == predictions.end()) throw recite::MissingId{id};
            preds.push_back(it->second);
            try {
                if (args.metric == "retrieval") {
                    fact_lists.push_back(row.at("facts").get<std::vector<std::string>>());
                } else {
                    first_answers.push_back(row.at("answers").at(0).get<std::string>());
                }
            } catch (const json::exception& e) {
                throw recite::SchemaError{std::string("bad gold record: ") + e.what()};
            }
        }

        if (args.metric == "bleu") {
            const double score = recite::corpus_bleu(preds, first_answers);
            report = {{"metric", "bleu"}, {"corpus_score", score}};
            std::cout << "eval bleu: corpus score " << score << "\n";
        } else if (args.metric == "rouge_l") {
            recite::MetricReport metric;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                metric.ids.push_back(std::to_string(i));
                metric.scores.push_back(recite::rouge_l_f1(preds[i], first_answers[i]));
            }
            metric.finalize();
            report = {{"metric", "rouge_l"}, {"aggregate", metric.aggregate}};
            std::cout << "eval rouge_l: mean " << metric.aggregate << "\n";
        } else if (args.metric == "retrieval") {
            const auto result = recite::retrieval_eval(preds, fact_lists);
            report = {{"metric", "retrieval"},
                      {"bleu", {{"aggregate", result.bleu.aggregate}, {"scores", result.bleu.scores}}},
                      {"rouge_l",
                       {{"aggregate", result.rouge_l.aggregate}, {"scores", result.rouge_l.scores}}}};
            std::cout << "eval retrieval: BLEU " << result.bleu.aggregate << ", ROUGE-L "
                      << result.rouge_l.aggregate << "\n";
        } else {
            throw recite::SchemaError{"unknown metric " + args.metric};
        }
    }
    write_or_print(args.output, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured retrieval-reasoning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    bool verbose = false;
    app.add_flag("--verbose", verbose, "extra progress detail on stderr");

    GenSftArgs gen_args;
    auto* gen = app.add_subcommand("gen-sft", "generate SFT records through a chat endpoint");
    gen->add_option("--input", gen_args.input, "QA instances JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--output", gen_args.output, "emitted records JSONL")->required();
    gen->add_option("--report", gen_args.report, "pipeline report JSON (stdout if omitted)");
    gen->add_option("--endpoint", gen_args.endpoint, "chat completion endpoint URL");
    gen->add_option("--reasoner-model", gen_args.reasoner_model, "reasoning model name");
    gen->add_option("--injector-model", gen_args.injector_model, "fact injection model name");
    gen->add_option("--cache-dir", gen_args.cache_dir, "response cache directory");
    gen->add_option("--token-env", gen_args.token_env, "env var holding the bearer token");
    gen->add_option("--reasoner-temp", gen_args.reasoner_temp, "reasoning sampling temperature");
    gen->add_option("--injector-temp", gen_args.injector_temp, "injection sampling temperature");
    gen->add_option("--parallel", gen_args.parallel, "in-flight request limit")
        ->check(CLI::PositiveNumber);
    gen->add_option("--max-tokens", gen_args.max_tokens, "completion token cap")
        ->check(CLI::PositiveNumber);

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "reward breakdowns for responses against gold");
    score->add_option("--responses", score_args.responses, "JSONL {id, response}")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_option("--gold", score_args.gold, "JSONL {id, answer, context}")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_option("--weights", score_args.weights, "lambda_acc,lambda_fmt,lambda_ret")
        ->delimiter(',')
        ->expected(3);
    score->add_option("--output", score_args.output, "report JSON path (stdout if omitted)");

    GradCheckArgs grad_args;
    auto* grad = app.add_subcommand("grad-check", "verify the analytic GRPO gradient");
    grad->add_option("--seed", grad_args.seed, "base seed");
    grad->add_option("--horizon", grad_args.horizon, "toy policy horizon")
        ->check(CLI::Range(1, 16));
    grad->add_option("--vocab", grad_args.vocab, "toy policy vocabulary")->check(CLI::Range(2, 64));
    grad->add_option("--trials", grad_args.trials, "number of seeded trials")
        ->check(CLI::PositiveNumber);
    grad->add_flag("--corrupt-analytic", grad_args.corrupt,
                   "deliberately corrupt the analytic gradient (self-test)")
        ->group("");  // hidden

    TrainToyArgs train_args;
    auto* train = app.add_subcommand("train-toy", "run curriculum GRPO on needle pools");
    train->add_option("--config", train_args.config_path, "TrainConfig JSON")
        ->check(CLI::ExistingFile);
    train->add_option("--trace", train_args.trace_path, "trace CSV output path");
    train->add_option("--seed", train_args.seed, "override the config seed")
        ->trigger_on_parse()
        ->each([&train_args](const std::string&) { train_args.seed_set = true; });

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate predictions with QA/retrieval metrics");
    eval->add_option("--predictions", eval_args.predictions, "JSONL {id, prediction}")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--gold", eval_args.gold, "JSONL {id, answers:[...]} or {id, facts:[...]}")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--metric", eval_args.metric, "qa_f1 | bleu | rouge_l | retrieval")
        ->check(CLI::IsMember({"qa_f1", "bleu", "rouge_l", "retrieval"}));
    eval->add_option("--output", eval_args.output, "report JSON path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen_sft(gen_args, verbose);
        if (score->parsed()) return run_score(score_args);
        if (grad->parsed()) return run_grad_check(grad_args);
        if (train->parsed()) return run_train_toy(train_args, verbose);
        if (eval->parsed()) return run_eval(eval_args);
    } catch (const recite::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const recite::MissingId& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
