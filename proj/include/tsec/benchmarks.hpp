#pragma once

// Industry baselines built on Beta-Bernoulli Thompson sampling:
//   B1 keeps one random fraction as the active set for the whole study,
//   B2 drops arms whose probability of being best falls under a threshold and
//      refills with random arms,
//   B3 re-picks the top K arms of the whole space by probability of being best.

#include "tsec/arm_space.hpp"
#include "tsec/bandit.hpp"
#include "tsec/errors.hpp"
#include "tsec/tsec_engine.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

namespace tsec {

enum class BenchmarkVariant { B1 = 1, B2 = 2, B3 = 3 };

inline std::string to_string(BenchmarkVariant v) {
    switch (v) {
    case BenchmarkVariant::B1: return "B1";
    case BenchmarkVariant::B2: return "B2";
    case BenchmarkVariant::B3: return "B3";
    }
    return "?";
}

struct BenchmarkConfig {
    BenchmarkVariant variant = BenchmarkVariant::B1;
    int K = 16;
    int n = 100;
    int T = 50;
    int S = 5;
    double discard_threshold = 0.05;
    int prob_best_rounds = 1000;
    /// B2: re-added arms restart at Beta(1,1) instead of resuming stored counts.
    bool reset_readded = false;

    void validate(const FactorSpace& space) const {
        detail::require(K >= 1 && static_cast<std::uint64_t>(K) <= space.num_arms(), "K must lie in [1, N]");
        detail::require(n >= 1 && T >= 1 && S >= 1, "n, T and S must be positive");
        detail::require(discard_threshold > 0.0 && discard_threshold < 1.0, "discard threshold must lie in (0, 1)");
        detail::require(prob_best_rounds >= 1, "prob_best needs at least one round");
    }
};

struct BenchmarkResult {
    RegretSeries regret;
    SwitchHistory history;
    std::vector<AllocationRecord> records;
    BetaState states;
};

namespace detail {

template <class URBG>
AllocationRecord thompson_period(const BernoulliEnv& env, BetaState& states, std::span<const ArmIndex> active, int n,
                                 int s, int t, URBG& rng) {
    AllocationRecord rec;
    rec.switch_period = s;
    rec.period = t;
    for (int j = 0; j < n; ++j) {
        const ArmIndex a = ts_select(states, active, rng);
        const int y = pull(env, a, rng);
        beta_update(states, a, y);
        rec.record(a, y);
    }
    return rec;
}

/// B2 switch: discard low prob-best arms, refill uniformly from arms not active before the switch.
template <class URBG>
std::vector<ArmIndex> discard_and_refill(const FactorSpace& space, BetaState& states,
                                         const std::vector<ArmIndex>& active, const BenchmarkConfig& config,
                                         URBG& rng) {
    const auto pb = prob_best(states, std::span<const ArmIndex>(active), config.prob_best_rounds, rng);
    std::vector<ArmIndex> kept;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (pb[i] < config.discard_threshold) ++dropped;
        else kept.push_back(active[i]);
    }
    if (dropped == 0) return active;
    const std::set<ArmIndex> excluded(active.begin(), active.end());
    const std::uint64_t pool_size = space.num_arms() - excluded.size();
    const std::size_t fill = static_cast<std::size_t>(std::min<std::uint64_t>(dropped, pool_size));
    // rejection draws from the complement; the complement is large relative to K
    std::set<ArmIndex> fresh;
    if (pool_size > 4 * fill) {
        std::uniform_int_distribution<std::uint64_t> dist(0, space.num_arms() - 1);
        while (fresh.size() < fill) {
            const auto a = static_cast<ArmIndex>(dist(rng));
            if (!excluded.contains(a)) fresh.insert(a);
        }
    } else {
        std::vector<ArmIndex> pool;
        for (std::uint64_t a = 0; a < space.num_arms(); ++a)
            if (!excluded.contains(static_cast<ArmIndex>(a))) pool.push_back(static_cast<ArmIndex>(a));
        std::shuffle(pool.begin(), pool.end(), rng);
        fresh.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(fill));
    }
    std::vector<ArmIndex> added(fresh.begin(), fresh.end());
    std::shuffle(added.begin(), added.end(), rng);
    for (auto a : added) {
        if (config.reset_readded) states.reset(a);
        kept.push_back(a);
    }
    // pool exhausted: keep the best discarded arms so the set stays at K
    if (kept.size() < active.size()) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < active.size(); ++i)
            if (pb[i] < config.discard_threshold) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pb[a] > pb[b]; });
        for (std::size_t i = 0; kept.size() < active.size(); ++i) kept.push_back(active[order[i]]);
    }
    return kept;
}

/// B3 switch: top K of all N arms by joint probability of being best.
template <class URBG>
std::vector<ArmIndex> top_k_prob_best(const FactorSpace& space, const BetaState& states,
                                      const BenchmarkConfig& config, URBG& rng) {
    std::vector<ArmIndex> all(static_cast<std::size_t>(space.num_arms()));
    for (std::size_t a = 0; a < all.size(); ++a) all[a] = static_cast<ArmIndex>(a);
    const auto pb = prob_best(states, std::span<const ArmIndex>(all), config.prob_best_rounds, rng);
    std::vector<ArmIndex> out;
    for (auto i : top_k_random_ties<URBG>(pb, static_cast<std::size_t>(config.K), rng)) out.push_back(all[i]);
    return out;
}

} // namespace detail

template <class URBG>
BenchmarkResult run_benchmark(const FactorSpace& space, const BernoulliEnv& env, const BenchmarkConfig& config,
                              URBG& rng) {
    config.validate(space);
    detail::require(env.num_arms() == space.num_arms(), "environment size does not match the arm space");
    BenchmarkResult result;
    result.states = BetaState(static_cast<std::size_t>(space.num_arms()));
    std::vector<ArmIndex> active = initial_arm_set(space, config.K, InitDesign::RegularFraction, rng);
    result.history.push_back(make_switch_record(1, {}, active));

    for (int s = 1; s <= config.S; ++s) {
        for (int t = 1; t <= config.T; ++t)
            result.records.push_back(detail::thompson_period(env, result.states, active, config.n, s, t, rng));
        if (s == config.S || config.variant == BenchmarkVariant::B1) continue;
        std::vector<ArmIndex> next = config.variant == BenchmarkVariant::B2
                                         ? detail::discard_and_refill(space, result.states, active, config, rng)
                                         : detail::top_k_prob_best(space, result.states, config, rng);
        result.history.push_back(make_switch_record(s + 1, active, next));
        active = std::move(next);
    }
    result.regret = cumulative_regret(env, result.records);
    return result;
}

template <class URBG>
BenchmarkResult run_benchmark1(const FactorSpace& space, const BernoulliEnv& env, BenchmarkConfig config, URBG& rng) {
    config.variant = BenchmarkVariant::B1;
    return run_benchmark(space, env, config, rng);
}

template <class URBG>
BenchmarkResult run_benchmark2(const FactorSpace& space, const BernoulliEnv& env, BenchmarkConfig config, URBG& rng) {
    config.variant = BenchmarkVariant::B2;
    return run_benchmark(space, env, config, rng);
}

template <class URBG>
BenchmarkResult run_benchmark3(const FactorSpace& space, const BernoulliEnv& env, BenchmarkConfig config, URBG& rng) {
    config.variant = BenchmarkVariant::B3;
    return run_benchmark(space, env, config, rng);
}

} // namespace tsec
