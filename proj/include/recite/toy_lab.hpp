#pragma once

// Desk-scale needle-retrieval environments plus the curriculum training loop.
//
// Each task hides one (easy) or two (hard) needle spans inside a slotted
// context; the tabular policy emits three symbols that a fixed template
// renders into a structured response: symbol 0 picks one of six layouts
// (well-formed with real quotes, well-formed without quotes, well-formed
// with a fabricated quote, and three malformed variants), symbols 1..2 pick
// which context slots to quote and answer with. The needle slots are drawn
// once per pool from the pool seed and shared between the easy and hard
// sides, so the slot-selection skill learned on easy tasks transfers to hard
// ones while the second needle still has to be learned there.
//
// The training loop is Algorithm-style on-policy GRPO: per step draw the
// source pool from the curriculum, sample a task, roll out G responses,
// score them with the reward suite, and ascend the analytic objective
// gradient. The reference policy stays frozen at initialization; the old
// policy is re-snapshotted every step (updates_per_batch > 1 reuses a batch
// against the same snapshot).

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "curriculum.hpp"
#include "grpo.hpp"
#include "jsonl.hpp"
#include "rewards.hpp"

namespace recite {

struct NeedleTask {
    std::string task_id;
    bool hard = false;
    std::vector<std::string> slot_texts;
    std::vector<int> needle_slots;  // one entry for easy, two for hard
    std::string question_text;
    std::string context_text;
    std::string answer_text;

    std::string render(const std::vector<int>& symbols) const {
        const int layout = symbols.empty() ? 5 : symbols[0] % 6;

        std::vector<std::string> picks;
        for (std::size_t k = 0; k < needle_slots.size(); ++k) {
            const std::size_t sym_index = 1 + k;
            const int sym = sym_index < symbols.size() ? symbols[sym_index] : 0;
            picks.push_back(slot_texts[static_cast<std::size_t>(sym) % slot_texts.size()]);
        }
        std::string answer;
        std::string quoted;
        for (std::size_t k = 0; k < picks.size(); ++k) {
            if (k > 0) {
                answer += ' ';
                quoted += " and ";
            }
            answer += picks[k];
            quoted += "<retrieval>" + picks[k] + "</retrieval>";
        }

        switch (layout) {
            case 0:
                return "<think>I need the hidden span. The evidence is " + quoted +
                       ". That settles it.</think>\nAnswer: " + answer;
            case 1:
                return "<think>I answer from memory without quoting.</think>\nAnswer: " + answer;
            case 2:
                return "<think>I quote <retrieval>glimmer vapor citadel</retrieval> as "
                       "evidence.</think>\nAnswer: " +
                       answer;
            case 3:
                return quoted + "<think>the quote landed outside</think>";
            case 4:
                return "<think>this reasoning never closes " + picks[0];
            default:
                return "<think>crossed <retrieval>" + picks[0] + "</think></retrieval>";
        }
    }

    std::string context() const { return context_text; }
    std::string gold_answer() const { return answer_text; }
    std::string id() const { return task_id; }
};

struct TrainConfig {
    CurriculumSchedule schedule;  // eta = 1, T = 350
    GrpoConfig grpo;              // eps = 0.2, beta = 0.001, G = 5
    RewardWeights weights;        // 0.7 / 0.1 / 0.2
    double learning_rate = 0.15;
    int steps = 350;
    std::uint64_t seed = 0;
    int updates_per_batch = 1;
    int vocab = 6;
    int easy_count = 16;
    int hard_count = 16;
};

struct TraceRecord {
    int step = 0;
    double alpha = 0.0;
    PoolSource source = PoolSource::easy;
    double mean_reward = 0.0;
    double mean_acc = 0.0;
    double mean_fmt = 0.0;
    double mean_ret = 0.0;
    double objective = 0.0;
};

struct TrainingTrace {
    std::vector<TraceRecord> records;
};

struct TrainResult {
    TrainingTrace trace;
    ToyPolicy policy;
    ToyPolicy initial_policy;
};

namespace toywords {

inline const std::vector<std::string>& filler() {
    static const std::vector<std::string> words = {
        "basalt", "mirror", "orchard", "thimble", "walnut", "sequin", "bridge", "candle",
        "drizzle", "faucet", "gravel", "hollow", "iodine", "jasper", "kettle", "lichen",
    };
    return words;
}

inline const std::vector<std::string>& needles() {
    static const std::vector<std::string> words = {
        "quasar", "trellis", "umlaut", "vortex", "wicker", "xylem", "yarrow", "zircon",
        "ampere", "bramble", "crocus", "dynamo",
    };
    return words;
}

}  // namespace toywords

// Easy tasks carry two-word slots and a single needle; hard tasks carry
// three-word slots (strictly longer contexts) and two needles. The needle
// slots are fixed per pool so a non-contextual policy can learn them;
// fillers and needle words are redrawn per task.
inline DatasetPool<NeedleTask> make_pools(std::uint64_t seed, int easy_count, int hard_count,
                                          int n_slots = 6) {
    if (easy_count < 1 || hard_count < 1) {
        throw std::invalid_argument("pool sizes must be at least 1");
    }
    if (n_slots < 2) throw std::invalid_argument("needle pools need at least 2 slots");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> filler_pick(0, toywords::filler().size() - 1);
    std::uniform_int_distribution<std::size_t> needle_pick(0, toywords::needles().size() - 1);
    std::uniform_int_distribution<int> slot_pick(0, n_slots - 1);

    const int first_slot = slot_pick(rng);
    std::uniform_int_distribution<int> offset_pick(1, n_slots - 1);
    const int second_slot = (first_slot + offset_pick(rng)) % n_slots;

    const auto make_task = [&](bool hard, int index) {
        NeedleTask task;
        task.hard = hard;
        task.task_id = std::string(hard ? "hard" : "easy") + "-" + std::to_string(index);
        task.needle_slots = hard ? std::vector<int>{first_slot, second_slot}
                                 : std::vector<int>{first_slot};
        const int words_per_slot = hard ? 3 : 2;
        for (int s = 0; s < n_slots; ++s) {
            const bool is_needle =
                s == first_slot || (hard && s == second_slot);
            std::string slot;
            for (int w = 0; w < words_per_slot; ++w) {
                if (w > 0) slot += ' ';
                slot += is_needle ? toywords::needles()[needle_pick(rng)]
                                  : toywords::filler()[filler_pick(rng)];
            }
            task.slot_texts.push_back(slot);
        }
        task.context_text = "Notes:";
        for (const auto& slot : task.slot_texts) task.context_text += " " + slot;
        task.question_text = hard ? "Recover both needle spans hidden in the notes."
                                  : "Recover the needle span hidden in the notes.";
        task.answer_text = task.slot_texts[static_cast<std::size_t>(first_slot)];
        if (hard) {
            task.answer_text += " " + task.slot_texts[static_cast<std::size_t>(second_slot)];
        }
        return task;
    };

    DatasetPool<NeedleTask> pools;
    for (int i = 0; i < easy_count; ++i) pools.easy.push_back(make_task(false, i));
    for (int i = 0; i < hard_count; ++i) pools.hard.push_back(make_task(true, i));
    return pools;
}

// One policy-gradient step per training step; fully deterministic per seed.
// The recorded objective is evaluated after the update(s) of the step.
inline TrainResult run_curriculum_grpo(const TrainConfig& config,
                                       const DatasetPool<NeedleTask>& pools) {
    if (pools.easy.empty() || pools.hard.empty()) throw EmptyPool{};

    constexpr int horizon = 3;  // layout symbol + two slot symbols
    ToyPolicy policy = ToyPolicy::random_init(horizon, config.vocab, config.seed ^ 0x9e3779b97f4a7c15ull, 0.1);
    const ToyPolicy reference = policy;
    const ToyPolicy initial = policy;

    std::mt19937_64 rng(config.seed);
    TrainResult result{TrainingTrace{}, policy, initial};

    for (int t = 0; t < config.steps; ++t) {
        const double alpha = mixing_ratio(t, config.schedule);
        const PoolSource source = sample_source(t, config.schedule, rng);
        const auto& side = source == PoolSource::easy ? pools.easy : pools.hard;
        std::uniform_int_distribution<std::size_t> pick(0, side.size() - 1);
        const NeedleTask& task = side[pick(rng)];

        const auto sampled = sample_rollouts(result.policy, reference, task,
                                             config.grpo.group_size, rng(), config.weights);

        for (int u = 0; u < config.updates_per_batch; ++u) {
            const auto grad = grpo_gradient(result.policy, sampled.group, config.grpo);
            auto& logits = result.policy.raw_logits();
            for (std::size_t k = 0; k < logits.size(); ++k) {
                logits[k] += config.learning_rate * grad[k];
            }
        }

        TraceRecord record;
        record.step = t;
        record.alpha = alpha;
        record.source = source;
        for (const auto& b : sampled.breakdowns) {
            record.mean_reward += b.r_total;
            record.mean_acc += b.r_acc;
            record.mean_fmt += b.r_fmt;
            record.mean_ret += b.r_ret;
        }
        const double g = static_cast<double>(sampled.breakdowns.size());
        record.mean_reward /= g;
        record.mean_acc /= g;
        record.mean_fmt /= g;
        record.mean_ret /= g;
        record.objective = objective_for_policy(result.policy, sampled.group, config.grpo);
        result.trace.records.push_back(record);
    }
    return result;
}

namespace detail {

inline std::string format_double(double v) {
    char buffer[32];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, ptr);
}

}  // namespace detail

inline void emit_trace(const TrainingTrace& trace, const std::filesystem::path& path) {
    if (trace.records.empty()) throw std::invalid_argument("refusing to emit an empty trace");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace to " + path.string());
    out << "step,alpha,source,mean_reward,r_acc,r_fmt,r_ret,objective\n";
    for (const auto& r : trace.records) {
        out << r.step << ',' << detail::format_double(r.alpha) << ','
            << (r.source == PoolSource::easy ? "easy" : "hard") << ','
            << detail::format_double(r.mean_reward) << ',' << detail::format_double(r.mean_acc)
            << ',' << detail::format_double(r.mean_fmt) << ',' << detail::format_double(r.mean_ret)
            << ',' << detail::format_double(r.objective) << '\n';
    }
}

inline nlohmann::json train_config_to_json(const TrainConfig& config) {
    return {
        {"schedule", {{"eta", config.schedule.eta}, {"total_steps", config.schedule.total_steps}}},
        {"grpo",
         {{"clip_epsilon", config.grpo.clip_epsilon},
          {"kl_coeff", config.grpo.kl_coeff},
          {"group_size", config.grpo.group_size},
          {"advantage_std_floor", config.grpo.advantage_std_floor}}},
        {"weights",
         {{"lambda_acc", config.weights.lambda_acc},
          {"lambda_fmt", config.weights.lambda_fmt},
          {"lambda_ret", config.weights.lambda_ret}}},
        {"learning_rate", config.learning_rate},
        {"steps", config.steps},
        {"seed", config.seed},
        {"updates_per_batch", config.updates_per_batch},
        {"vocab", config.vocab},
        {"easy_count", config.easy_count},
        {"hard_count", config.hard_count},
    };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig config;
    try {
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            config.schedule.eta = s.value("eta", config.schedule.eta);
            config.schedule.total_steps = s.value("total_steps", config.schedule.total_steps);
        }
        if (j.contains("grpo")) {
            const auto& g = j.at("grpo");
            config.grpo.clip_epsilon = g.value("clip_epsilon", config.grpo.clip_epsilon);
            config.grpo.kl_coeff = g.value("kl_coeff", config.grpo.kl_coeff);
            config.grpo.group_size = g.value("group_size", config.grpo.group_size);
            config.grpo.advantage_std_floor =
                g.value("advantage_std_floor", config.grpo.advantage_std_floor);
        }
        if (j.contains("weights")) {
            const auto& w = j.at("weights");
            config.weights.lambda_acc = w.value("lambda_acc", config.weights.lambda_acc);
            config.weights.lambda_fmt = w.value("lambda_fmt", config.weights.lambda_fmt);
            config.weights.lambda_ret = w.value("lambda_ret", config.weights.lambda_ret);
        }
        config.learning_rate = j.value("learning_rate", config.learning_rate);
        config.steps = j.value("steps", config.steps);
        config.seed = j.value("seed", config.seed);
        config.updates_per_batch = j.value("updates_per_batch", config.updates_per_batch);
        config.vocab = j.value("vocab", config.vocab);
        config.easy_count = j.value("easy_count", config.easy_count);
        config.hard_count = j.value("hard_count", config.hard_count);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError{std::string("bad train config: ") + e.what()};
    }
    return config;
}

}  // namespace recite
