#include "tsec/benchmarks.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace tsec;

namespace {

BenchmarkConfig config(BenchmarkVariant v, int K = 8, int n = 20, int T = 5, int S = 4) {
    BenchmarkConfig c;
    c.variant = v;
    c.K = K;
    c.n = n;
    c.T = T;
    c.S = S;
    c.prob_best_rounds = 500;
    return c;
}

} // namespace

TEST(BenchmarkConfig, Validation) {
    const FactorSpace space = FactorSpace::binary(3);
    auto c = config(BenchmarkVariant::B1);
    EXPECT_NO_THROW(c.validate(space));
    c.discard_threshold = 1.0;
    EXPECT_THROW(c.validate(space), ValidationError);
    c = config(BenchmarkVariant::B1, 9);
    EXPECT_THROW(c.validate(space), ValidationError);
}

TEST(Benchmark1, FixedSetAndConservation) {
    const FactorSpace space = FactorSpace::binary(5);
    std::vector<double> mu(32);
    for (int a = 0; a < 32; ++a) mu[static_cast<std::size_t>(a)] = (a % 9) / 10.0;
    const BernoulliEnv env(mu);
    Rng rng(1);
    const auto res = run_benchmark1(space, env, config(BenchmarkVariant::B2), rng);
    ASSERT_EQ(res.history.size(), 1u);
    const std::set<ArmIndex> active(res.history[0].active.begin(), res.history[0].active.end());
    EXPECT_EQ(active.size(), 8u);
    long runs = 0;
    for (const auto& rec : res.records) {
        runs += rec.total_runs();
        for (const auto& [a, n] : rec.runs) EXPECT_TRUE(active.contains(a));
    }
    EXPECT_EQ(runs, 4 * 5 * 20);
    EXPECT_EQ(res.regret.size(), 20u);
}

TEST(Benchmark1, ConcentratesOnBestFractionArm) {
    const FactorSpace space = FactorSpace::binary(4);
    std::vector<double> shares;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        // learn the fraction this seed will draw, then make one of its arms the best
        Rng probe(seed);
        const auto fraction = initial_arm_set(space, 8, InitDesign::RegularFraction, probe);
        std::vector<double> mu(16, 0.1);
        mu[fraction[3]] = 0.9;
        Rng rng(seed);
        const auto res = run_benchmark1(space, BernoulliEnv(mu), config(BenchmarkVariant::B1, 8, 20, 10, 4), rng);
        ASSERT_EQ(res.history[0].active, fraction);
        long best = 0, total = 0;
        for (std::size_t i = res.records.size() * 3 / 4; i < res.records.size(); ++i) {
            const auto& rec = res.records[i];
            total += rec.total_runs();
            if (rec.runs.contains(fraction[3])) best += rec.runs.at(fraction[3]);
        }
        shares.push_back(double(best) / total);
    }
    std::sort(shares.begin(), shares.end());
    EXPECT_GT(0.5 * (shares[9] + shares[10]), 0.8);
}

TEST(Benchmark2, ActiveSetStaysAtK) {
    const FactorSpace space = FactorSpace::binary(6);
    std::vector<double> mu(64, 0.4);
    const BernoulliEnv env(mu);
    Rng rng(3);
    const auto c = config(BenchmarkVariant::B2, 16, 32, 3, 4);
    const auto res = run_benchmark2(space, env, c, rng);
    ASSERT_EQ(res.history.size(), 4u);
    for (std::size_t s = 0; s < res.history.size(); ++s) {
        const auto& h = res.history[s];
        EXPECT_EQ(std::set<ArmIndex>(h.active.begin(), h.active.end()).size(), 16u);
        EXPECT_LE(h.added.size(), 16u);
        if (s > 0) EXPECT_EQ(h.added.size(), h.removed.size());
    }
}

TEST(Benchmark2, DiscardsHopelessArm) {
    const FactorSpace space = FactorSpace::binary(4);
    BetaState states(16);
    states[0] = BetaParams{1, 200};
    for (ArmIndex a : {1u, 2u, 3u}) states[a] = BetaParams{30, 30};
    auto c = config(BenchmarkVariant::B2, 4);
    c.prob_best_rounds = 2000;
    Rng rng(4);
    const std::vector<ArmIndex> active{0, 1, 2, 3};
    const auto next = detail::discard_and_refill(space, states, active, c, rng);
    EXPECT_EQ(next.size(), 4u);
    EXPECT_TRUE(std::find(next.begin(), next.end(), 0u) == next.end());
    for (ArmIndex a : {1u, 2u, 3u}) EXPECT_TRUE(std::find(next.begin(), next.end(), a) != next.end());
}

TEST(Benchmark3, SelectsDominantArmAndKeepsCounts) {
    const FactorSpace space = FactorSpace::binary(4);
    BetaState states(16);
    states[9] = BetaParams{100, 2};
    auto c = config(BenchmarkVariant::B3, 4);
    c.prob_best_rounds = 1000;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto next = detail::top_k_prob_best(space, states, c, rng);
        EXPECT_EQ(next.size(), 4u);
        EXPECT_TRUE(std::find(next.begin(), next.end(), 9u) != next.end());
    }
    EXPECT_EQ(states[9].observations(), 100);
}

TEST(Benchmark3, FreshStatesGiveUniformSubsets) {
    const FactorSpace space = FactorSpace::binary(3);
    const BetaState states(8);
    auto c = config(BenchmarkVariant::B3, 2);
    c.prob_best_rounds = 200;
    Rng rng(6);
    std::vector<int> hits(8, 0);
    const int reps = 4000;
    for (int i = 0; i < reps; ++i)
        for (auto a : detail::top_k_prob_best(space, states, c, rng)) ++hits[a];
    for (int h : hits) EXPECT_NEAR(h / double(reps), 0.25, 0.04);
}

TEST(Benchmark3, RunKeepsStatesAcrossSwitches) {
    const FactorSpace space = FactorSpace::binary(4);
    std::vector<double> mu(16, 0.2);
    mu[5] = 0.8;
    Rng rng(7);
    const auto res = run_benchmark3(space, BernoulliEnv(mu), config(BenchmarkVariant::B3, 4, 20, 4, 3), rng);
    long observed = 0;
    for (std::size_t a = 0; a < res.states.size(); ++a) observed += res.states[static_cast<ArmIndex>(a)].observations();
    EXPECT_EQ(observed, 3 * 4 * 20);
    EXPECT_EQ(res.history.size(), 3u);
}
