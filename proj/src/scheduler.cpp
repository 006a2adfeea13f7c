// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/scheduler.hpp"

#include "progsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace progsplat {

void TrainingState::record(ImageId id) {
    ++counts_[id];
    ++global_;
}

std::uint64_t TrainingState::iterations(ImageId id) const {
    const auto it = counts_.find(id);
    return it == counts_.end() ? 0 : it->second;
}

double lr_single(double trained_iters, const LrSchedule& schedule) {
    const double t = std::clamp(trained_iters / schedule.target_iters, 0.0, 1.0);
    if (t <= 0.0) return schedule.initial;
    if (t >= 1.0) return schedule.final;
    const double r = std::exp(std::log(schedule.initial) * (1.0 - t) + std::log(schedule.final) * t);
    return std::clamp(r, std::min(schedule.initial, schedule.final), std::max(schedule.initial, schedule.final));
}

double lr_blended(ImageId id, const MatchMatrix& matrix, const TrainingState& state, const LrSchedule& schedule) {
    double sum = lr_single(static_cast<double>(state.iterations(id)), schedule);
    int neighbours = 0;
    for (const auto& [other, count] : matrix.neighbors(id)) {
        const double m = matrix.normalized_overlap(other, id);
        if (m <= 0.0) continue;
        sum += m * lr_single(static_cast<double>(state.iterations(other)), schedule);
        ++neighbours;
    }
    return sum / (neighbours + 1);
}

std::vector<int> allocate_proportional(std::span<const double> weights, int total) {
    if (weights.empty()) fail(ErrorCode::InvalidParameter, "allocation needs at least one key image");
    if (total < 0) fail(ErrorCode::InvalidParameter, "allocation total must be >= 0");
    const std::size_t n = weights.size();
    std::vector<double> share(n);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0.0)) fail(ErrorCode::InvalidParameter, "key-image weights must be >= 0");
        share[i] = 1.0 - std::exp(-weights[i]);
        denom += share[i];
    }
    std::vector<double> ideal(n);
    for (std::size_t i = 0; i < n; ++i) {
        ideal[i] = denom > 0.0 ? share[i] / denom * total : static_cast<double>(total) / n;
    }

    std::vector<int> alloc(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        alloc[i] = static_cast<int>(std::floor(ideal[i]));
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ideal[a] - alloc[a] > ideal[b] - alloc[b];
    });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++alloc[order[r % n]];

    // Every positive weight gets at least one iteration when the budget allows
    // and a donor at or above its ideal share can give one up without leaving
    // the +-1 band; the donor is the entry furthest above its share.
    if (static_cast<std::size_t>(total) >= n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (alloc[i] > 0 || weights[i] <= 0.0) continue;
            std::size_t donor = n;
            for (std::size_t j = 0; j < n; ++j) {
                if (alloc[j] < 2 || alloc[j] < ideal[j]) continue;
                if (donor == n || alloc[j] - ideal[j] > alloc[donor] - ideal[donor]) donor = j;
            }
            if (donor == n) break;
            --alloc[donor];
            ++alloc[i];
        }
    }
    return alloc;
}

std::vector<int> allocate_local(std::span<const double> weights, int iterations_per_event) {
    if (iterations_per_event % 2 != 0) fail(ErrorCode::InvalidParameter, "iterations per event must be even");
    return allocate_proportional(weights, iterations_per_event / 2);
}

IterationPlan build_plan(const ImageWeights& weights, std::span<const ImageId> registration_order,
                         const PlanOptions& options, std::uint64_t seed) {
    if (registration_order.empty()) fail(ErrorCode::InvalidParameter, "plan needs at least one registered image");
    if (options.iterations_per_event <= 0 || options.iterations_per_event % 2 != 0) {
        fail(ErrorCode::InvalidParameter, "iterations per event must be positive and even");
    }
    if (options.key_images < 1) fail(ErrorCode::InvalidParameter, "key image count must be >= 1");

    auto weight_of = [&](ImageId id) {
        const auto it = weights.find(id);
        return it == weights.end() ? 0.0 : it->second;
    };
    // Rank by weight, ties to the most recently registered.
    std::vector<std::size_t> ranked(registration_order.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        const double wa = weight_of(registration_order[a]);
        const double wb = weight_of(registration_order[b]);
        if (wa != wb) return wa > wb;
        return a > b;
    });

    IterationPlan plan;
    const std::size_t key_count = std::min<std::size_t>(options.key_images, ranked.size());
    std::vector<double> key_weights;
    for (std::size_t r = 0; r < key_count; ++r) {
        const ImageId id = registration_order[ranked[r]];
        plan.keys.push_back(id);
        key_weights.push_back(options.uniform_key_weights ? 1.0 : weight_of(id));
    }
    const int half = options.iterations_per_event / 2;
    const int local_budget = options.semi_global ? half : options.iterations_per_event;
    plan.key_allocation = allocate_proportional(key_weights, local_budget);

    std::mt19937_64 rng(seed);
    std::vector<ImageId> local;
    for (std::size_t i = 0; i < plan.keys.size(); ++i) local.insert(local.end(), plan.key_allocation[i], plan.keys[i]);
    std::shuffle(local.begin(), local.end(), rng);

    std::vector<ImageId> semi;
    if (options.semi_global) {
        const std::set<ImageId> key_set(plan.keys.begin(), plan.keys.end());
        std::vector<ImageId> pool;
        for (ImageId id : registration_order) {
            if (!key_set.count(id)) pool.push_back(id);
        }
        if (pool.empty()) pool.assign(registration_order.begin(), registration_order.end());
        std::vector<ImageId> bag;
        while (static_cast<int>(semi.size()) < half) {
            if (bag.empty()) {
                bag = pool;
                std::shuffle(bag.begin(), bag.end(), rng);
            }
            semi.push_back(bag.back());
            bag.pop_back();
        }
    }
    plan.local_total = static_cast<int>(local.size());
    plan.semi_global_total = static_cast<int>(semi.size());

    if (options.interleave) {
        std::size_t li = 0, si = 0;
        while (li < local.size() || si < semi.size()) {
            if (li < local.size()) plan.entries.push_back(local[li++]);
            if (si < semi.size()) plan.entries.push_back(semi[si++]);
        }
    } else {
        plan.entries = local;
        plan.entries.insert(plan.entries.end(), semi.begin(), semi.end());
    }
    return plan;
}

} // namespace progsplat
