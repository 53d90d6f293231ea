#pragma once

// Group-relative policy optimization on rollout groups.
//
// For a group of G outputs o_i sampled from the snapshot policy, with
// per-token log-probabilities under the live policy (new), the snapshot
// (old) and a frozen reference (ref), the objective is
//
//   J = (1/G) sum_i (1/|o_i|) sum_t [ min(w_it * A_i,
//                                         clip(w_it, 1-eps, 1+eps) * A_i)
//                                     - beta * k3_it ]
//
//   w_it = exp(logp_new - logp_old)                    importance ratio
//   A_i  = (r_i - mean(r)) / max(std(r), floor)        group advantage,
//                                                      population std,
//                                                      broadcast per token
//   k3_it = exp(logp_ref - logp_new)
//           - (logp_ref - logp_new) - 1                KL estimate, >= 0
//
// The toy policy is a per-position softmax table over a fixed horizon and
// vocabulary — a desk-scale stand-in for an autoregressive LM — with exact
// analytic gradients of J and a central finite-difference oracle to check
// them against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rewards.hpp"

namespace recite {

struct GrpoConfig {
    double clip_epsilon = 0.2;
    double kl_coeff = 0.001;
    int group_size = 5;
    double advantage_std_floor = 1e-8;
};

struct RolloutGroup {
    std::string query_id;
    std::vector<std::vector<int>> outputs;
    std::vector<std::vector<double>> logp_new;
    std::vector<std::vector<double>> logp_old;
    std::vector<std::vector<double>> logp_ref;
    std::vector<double> rewards;
};

struct AdvantageVector {
    std::vector<double> values;
};

struct ShapeMismatch : std::invalid_argument {
    explicit ShapeMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct GroupTooSmall : std::invalid_argument {
    GroupTooSmall() : std::invalid_argument("rollout group needs at least 2 outputs") {}
};

// A_i = (r_i - mean) / max(population std, floor). A zero-variance group
// yields all zeros.
inline AdvantageVector group_advantages(const std::vector<double>& rewards,
                                        const GrpoConfig& config = {}) {
    const std::size_t g = rewards.size();
    if (g < 2) throw GroupTooSmall{};
    bool constant = true;
    for (double r : rewards) constant = constant && r == rewards.front();
    if (constant) return AdvantageVector{std::vector<double>(g, 0.0)};
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(g);
    const double denom = std::max(std::sqrt(var), config.advantage_std_floor);
    AdvantageVector out;
    out.values.reserve(g);
    for (double r : rewards) out.values.push_back((r - mean) / denom);
    return out;
}

inline std::vector<double> importance_ratio(const std::vector<double>& logp_new,
                                            const std::vector<double>& logp_old) {
    if (logp_new.size() != logp_old.size()) {
        throw ShapeMismatch{"importance_ratio: per-token arrays differ in length"};
    }
    std::vector<double> out(logp_new.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::exp(logp_new[t] - logp_old[t]);
    return out;
}

inline double clipped_term(double ratio, double advantage, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

// k3 estimator: with x = exp(logp_ref - logp_new), k3 = x - ln x - 1 >= 0.
inline std::vector<double> kl_estimate(const std::vector<double>& logp_new,
                                       const std::vector<double>& logp_ref) {
    if (logp_new.size() != logp_ref.size()) {
        throw ShapeMismatch{"kl_estimate: per-token arrays differ in length"};
    }
    std::vector<double> out(logp_new.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const double d = logp_ref[t] - logp_new[t];
        out[t] = std::exp(d) - d - 1.0;
    }
    return out;
}

namespace detail {

inline void validate_group(const RolloutGroup& group) {
    const std::size_t g = group.outputs.size();
    if (g < 2) throw GroupTooSmall{};
    if (group.rewards.size() != g || group.logp_new.size() != g || group.logp_old.size() != g ||
        group.logp_ref.size() != g) {
        throw ShapeMismatch{"rollout group arrays disagree on group size"};
    }
    for (std::size_t i = 0; i < g; ++i) {
        const std::size_t len = group.outputs[i].size();
        if (len == 0) throw ShapeMismatch{"empty output sequence in rollout group"};
        if (group.logp_new[i].size() != len || group.logp_old[i].size() != len ||
            group.logp_ref[i].size() != len) {
            throw ShapeMismatch{"per-token log-prob arrays disagree with output length"};
        }
    }
}

}  // namespace detail

inline double grpo_objective(const RolloutGroup& group, const GrpoConfig& config = {}) {
    detail::validate_group(group);
    const auto adv = group_advantages(group.rewards, config);
    const std::size_t g = group.outputs.size();
    double total = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        const auto ratios = importance_ratio(group.logp_new[i], group.logp_old[i]);
        const auto kls = kl_estimate(group.logp_new[i], group.logp_ref[i]);
        double seq = 0.0;
        for (std::size_t t = 0; t < ratios.size(); ++t) {
            seq += clipped_term(ratios[t], adv.values[i], config.clip_epsilon) -
                   config.kl_coeff * kls[t];
        }
        total += seq / static_cast<double>(ratios.size());
    }
    return total / static_cast<double>(g);
}

// Tabular policy: one categorical per position, parameterized by logits.
class ToyPolicy {
  public:
    ToyPolicy(int horizon, int vocab)
        : horizon_(horizon), vocab_(vocab), logits_(static_cast<std::size_t>(horizon) * vocab, 0.0) {
        if (horizon < 1 || vocab < 2) {
            throw std::invalid_argument("toy policy needs horizon >= 1 and vocab >= 2");
        }
    }

    static ToyPolicy random_init(int horizon, int vocab, std::uint64_t seed, double scale = 0.5) {
        ToyPolicy p(horizon, vocab);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, scale);
        for (double& v : p.logits_) v = noise(rng);
        return p;
    }

    int horizon() const { return horizon_; }
    int vocab() const { return vocab_; }

    double& logit(int pos, int symbol) { return logits_[index(pos, symbol)]; }
    double logit(int pos, int symbol) const { return logits_[index(pos, symbol)]; }
    std::vector<double>& raw_logits() { return logits_; }
    const std::vector<double>& raw_logits() const { return logits_; }

    // softmax over the row at `pos`
    std::vector<double> probabilities(int pos) const {
        std::vector<double> out(static_cast<std::size_t>(vocab_));
        double max_logit = logits_[index(pos, 0)];
        for (int v = 1; v < vocab_; ++v) max_logit = std::max(max_logit, logits_[index(pos, v)]);
        double norm = 0.0;
        for (int v = 0; v < vocab_; ++v) {
            out[static_cast<std::size_t>(v)] = std::exp(logits_[index(pos, v)] - max_logit);
            norm += out[static_cast<std::size_t>(v)];
        }
        for (double& p : out) p /= norm;
        return out;
    }

    double log_prob(int pos, int symbol) const {
        double max_logit = logits_[index(pos, 0)];
        for (int v = 1; v < vocab_; ++v) max_logit = std::max(max_logit, logits_[index(pos, v)]);
        double norm = 0.0;
        for (int v = 0; v < vocab_; ++v) norm += std::exp(logits_[index(pos, v)] - max_logit);
        return logits_[index(pos, symbol)] - max_logit - std::log(norm);
    }

    std::vector<double> sequence_log_probs(const std::vector<int>& symbols) const {
        if (symbols.size() != static_cast<std::size_t>(horizon_)) {
            throw ShapeMismatch{"sequence length does not match policy horizon"};
        }
        std::vector<double> out(symbols.size());
        for (int t = 0; t < horizon_; ++t) out[static_cast<std::size_t>(t)] = log_prob(t, symbols[static_cast<std::size_t>(t)]);
        return out;
    }

    std::vector<int> sample(std::mt19937_64& rng) const {
        std::vector<int> out(static_cast<std::size_t>(horizon_));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int t = 0; t < horizon_; ++t) {
            const auto probs = probabilities(t);
            const double u = unit(rng);
            double acc = 0.0;
            int chosen = vocab_ - 1;
            for (int v = 0; v < vocab_; ++v) {
                acc += probs[static_cast<std::size_t>(v)];
                if (u < acc) {
                    chosen = v;
                    break;
                }
            }
            out[static_cast<std::size_t>(t)] = chosen;
        }
        return out;
    }

  private:
    std::size_t index(int pos, int symbol) const {
        return static_cast<std::size_t>(pos) * static_cast<std::size_t>(vocab_) +
               static_cast<std::size_t>(symbol);
    }

    int horizon_;
    int vocab_;
    std::vector<double> logits_;
};

// J with logp_new recomputed from `policy` (old/ref stay as recorded in the
// group). This is the function both gradient routes differentiate.
inline double objective_for_policy(const ToyPolicy& policy, const RolloutGroup& group,
                                   const GrpoConfig& config = {}) {
    RolloutGroup probe = group;
    for (std::size_t i = 0; i < probe.outputs.size(); ++i) {
        probe.logp_new[i] = policy.sequence_log_probs(probe.outputs[i]);
    }
    return grpo_objective(probe, config);
}

// Exact gradient of objective_for_policy with respect to the policy logits.
//
// Per token: d/dlogp_new of the clipped term is A*w when the unclipped branch
// is active (w*A <= clip(w)*A) and 0 otherwise; the kl term contributes
// -beta * (1 - exp(logp_ref - logp_new)). The chain rule through the softmax
// row at position t gives d logp / d logit(t,v) = 1{v == o_t} - p_t(v).
inline std::vector<double> grpo_gradient(const ToyPolicy& policy, const RolloutGroup& group,
                                         const GrpoConfig& config = {}) {
    detail::validate_group(group);
    const auto adv = group_advantages(group.rewards, config);
    const std::size_t g = group.outputs.size();
    std::vector<double> grad(policy.raw_logits().size(), 0.0);

    for (std::size_t i = 0; i < g; ++i) {
        const auto& output = group.outputs[i];
        if (output.size() != static_cast<std::size_t>(policy.horizon())) {
            throw ShapeMismatch{"output length does not match policy horizon"};
        }
        const double scale = 1.0 / (static_cast<double>(g) * static_cast<double>(output.size()));
        for (int t = 0; t < policy.horizon(); ++t) {
            const int symbol = output[static_cast<std::size_t>(t)];
            const double lp_new = policy.log_prob(t, symbol);
            const double w = std::exp(lp_new - group.logp_old[i][static_cast<std::size_t>(t)]);
            const double a = adv.values[i];
            const double clipped = std::clamp(w, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
            const bool unclipped_active = w * a <= clipped * a;
            double dterm = unclipped_active ? a * w : 0.0;
            const double d = group.logp_ref[i][static_cast<std::size_t>(t)] - lp_new;
            dterm -= config.kl_coeff * (1.0 - std::exp(d));

            const auto probs = policy.probabilities(t);
            for (int v = 0; v < policy.vocab(); ++v) {
                const double indicator = (v == symbol) ? 1.0 : 0.0;
                grad[static_cast<std::size_t>(t) * static_cast<std::size_t>(policy.vocab()) +
                     static_cast<std::size_t>(v)] +=
                    scale * dterm * (indicator - probs[static_cast<std::size_t>(v)]);
            }
        }
    }
    return grad;
}

// Central differences (J(theta + h e) - J(theta - h e)) / 2h, one probe pair
// per parameter; old/ref log-probs stay frozen in the group.
inline std::vector<double> finite_diff_gradient(const ToyPolicy& policy, const RolloutGroup& group,
                                                const GrpoConfig& config = {}, double h = 1e-5) {
    if (h <= 0.0) throw std::invalid_argument("finite difference step must be positive");
    ToyPolicy probe = policy;
    std::vector<double> grad(policy.raw_logits().size(), 0.0);
    for (std::size_t k = 0; k < grad.size(); ++k) {
        const double saved = probe.raw_logits()[k];
        probe.raw_logits()[k] = saved + h;
        const double plus = objective_for_policy(probe, group, config);
        probe.raw_logits()[k] = saved - h;
        const double minus = objective_for_policy(probe, group, config);
        probe.raw_logits()[k] = saved;
        grad[k] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

// Everything a rollout environment must expose to be sampled against: a
// textual rendering of a symbol sequence plus the scoring inputs.
template <typename Task>
concept RolloutTask = requires(const Task& task, const std::vector<int>& symbols) {
    { task.render(symbols) } -> std::convertible_to<std::string>;
    { task.context() } -> std::convertible_to<std::string>;
    { task.gold_answer() } -> std::convertible_to<std::string>;
    { task.id() } -> std::convertible_to<std::string>;
};

struct SampledGroup {
    RolloutGroup group;
    std::vector<std::string> decoded;
    std::vector<RewardBreakdown> breakdowns;
};

// Samples G sequences from `policy` (acting as both the live and the
// snapshot policy, so logp_new == logp_old at sampling time), records
// log-probs under the frozen reference, renders each sequence through the
// task and scores it with the reward suite. Deterministic per seed.
template <RolloutTask Task>
SampledGroup sample_rollouts(const ToyPolicy& policy, const ToyPolicy& reference, const Task& task,
                             int group_size, std::uint64_t seed, const RewardWeights& weights = {},
                             const TextNormalizationPolicy& norm =
                                 TextNormalizationPolicy::squad()) {
    if (group_size < 2) throw GroupTooSmall{};
    SampledGroup out;
    out.group.query_id = task.id();
    std::mt19937_64 rng(seed);
    for (int i = 0; i < group_size; ++i) {
        auto symbols = policy.sample(rng);
        auto logp = policy.sequence_log_probs(symbols);
        out.group.logp_new.push_back(logp);
        out.group.logp_old.push_back(logp);
        out.group.logp_ref.push_back(reference.sequence_log_probs(symbols));
        std::string text = task.render(symbols);
        auto breakdown = total_reward(text, task.gold_answer(), task.context(), weights, norm);
        out.group.rewards.push_back(breakdown.r_total);
        out.group.outputs.push_back(std::move(symbols));
        out.decoded.push_back(std::move(text));
        out.breakdowns.push_back(breakdown);
    }
    return out;
}

}  // namespace recite
