#pragma once

// Linear-decay curriculum over an easy and a hard pool. The mixing ratio
//
//   alpha_t = max(0, 1 - eta * t / T)
//
// is the probability of drawing from the easy pool at step t; it is a pure
// function of t, so the training loop carries no curriculum state. Within a
// pool, selection is uniform with replacement. Callers own the rng.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace recite {

struct CurriculumSchedule {
    double eta = 1.0;
    int total_steps = 350;
};

enum class PoolSource { easy, hard };

template <typename Instance>
struct DatasetPool {
    std::vector<Instance> easy;
    std::vector<Instance> hard;
};

struct EmptyPool : std::runtime_error {
    EmptyPool() : std::runtime_error("dataset pool has an empty side") {}
};

inline double mixing_ratio(int t, const CurriculumSchedule& schedule) {
    if (t < 0) throw std::invalid_argument("step index must be non-negative");
    const double alpha =
        1.0 - schedule.eta * static_cast<double>(t) / static_cast<double>(schedule.total_steps);
    return std::max(0.0, alpha);
}

inline PoolSource sample_source(int t, const CurriculumSchedule& schedule, std::mt19937_64& rng) {
    const double alpha = mixing_ratio(t, schedule);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < alpha ? PoolSource::easy : PoolSource::hard;
}

template <typename Instance>
const Instance& sample_instance(const DatasetPool<Instance>& pool, int t,
                                const CurriculumSchedule& schedule, std::mt19937_64& rng) {
    if (pool.easy.empty() || pool.hard.empty()) throw EmptyPool{};
    const auto& side = sample_source(t, schedule, rng) == PoolSource::easy ? pool.easy : pool.hard;
    std::uniform_int_distribution<std::size_t> pick(0, side.size() - 1);
    return side[pick(rng)];
}

template <typename Instance>
std::vector<Instance> sample_batch(const DatasetPool<Instance>& pool, int t, int n,
                                   const CurriculumSchedule& schedule, std::mt19937_64& rng) {
    std::vector<Instance> batch;
    batch.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) batch.push_back(sample_instance(pool, t, schedule, rng));
    return batch;
}

}  // namespace recite
