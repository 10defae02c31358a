#include "oracles.hpp"
#include "tsec/tsec_engine.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace tsec;

namespace {

std::map<ArmIndex, int> count_plan(const std::vector<ArmIndex>& plan) {
    std::map<ArmIndex, int> out;
    for (auto a : plan) ++out[a];
    return out;
}

TsecConfig small_config() {
    TsecConfig c;
    c.K = 4;
    c.n = 40;
    c.T = 5;
    c.S = 3;
    return c;
}

} // namespace

TEST(EqualAllocation, RemainderGoesToDistinctArms) {
    std::vector<ArmIndex> active(16);
    for (ArmIndex a = 0; a < 16; ++a) active[a] = a * 3;
    Rng rng(1);
    const auto plan = equal_allocation(std::span<const ArmIndex>(active), 100, rng);
    ASSERT_EQ(plan.size(), 100u);
    int six = 0, seven = 0;
    for (const auto& [a, c] : count_plan(plan)) {
        EXPECT_TRUE(std::find(active.begin(), active.end(), a) != active.end());
        six += c == 6;
        seven += c == 7;
    }
    EXPECT_EQ(six, 12);
    EXPECT_EQ(seven, 4);

    std::vector<ArmIndex> ten(10);
    for (ArmIndex a = 0; a < 10; ++a) ten[a] = a;
    for (const auto& [a, c] : count_plan(equal_allocation(std::span<const ArmIndex>(ten), 100, rng))) EXPECT_EQ(c, 10);
}

TEST(Initialize, RegularFractionAndLedger) {
    const FactorSpace space = FactorSpace::binary(10);
    const BernoulliEnv env(std::vector<double>(1024, 0.5));
    TsecConfig config;
    Rng rng(2);
    const auto init = initialize(space, config, env, rng);
    ASSERT_EQ(init.active.size(), 16u);
    for (int m = 0; m < 10; ++m) {
        int high = 0;
        for (auto a : init.active) high += decode_arm(space, a).levels[static_cast<std::size_t>(m)] == 2;
        EXPECT_EQ(high, 8);
    }
    EXPECT_EQ(init.ledger.size(), 100u);
    EXPECT_EQ(init.record.total_runs(), 100);
    for (const auto& row : init.ledger.rows()) {
        EXPECT_EQ(row.switch_period, 1);
        EXPECT_EQ(row.period, 0);
    }
}

TEST(TsecConfig, Validation) {
    const FactorSpace space = FactorSpace::binary(3);
    TsecConfig c;
    c.K = 9;
    EXPECT_THROW(c.validate(space), ValidationError);
    c.K = 4;
    c.n = 3;
    EXPECT_THROW(c.validate(space), ValidationError);
    c.n = 10;
    c.alpha = 1.0;
    EXPECT_THROW(c.validate(space), ValidationError);
    c.alpha = 0.05;
    EXPECT_NO_THROW(c.validate(space));
}

TEST(AllocatePeriod, IdenticalDrawsPickOneArm) {
    const FactorSpace space = FactorSpace::binary(3);
    const DesignLayout layout(space);
    const BernoulliEnv env(std::vector<double>(8, 0.5));
    EffectVector b = EffectVector::Zero(layout.dimension());
    b[layout.main_effect_column(0, 2)] = 1.0;
    b[layout.main_effect_column(1, 2)] = 0.5;
    const std::vector<EffectVector> draws(30, b);
    const std::vector<ArmIndex> active{0, 1, 2, 7};
    TrialLedger ledger;
    Rng rng(3);
    const auto rec = allocate_period(draws, active, layout, env, 1, 1, ledger, rng);
    ASSERT_EQ(rec.runs.size(), 1u);
    EXPECT_EQ(rec.runs.begin()->first, 7u);
    EXPECT_EQ(rec.total_runs(), 30);
    EXPECT_EQ(ledger.size(), 30u);
}

TEST(AllocatePeriod, DominantArmTakesAllRuns) {
    const FactorSpace space = FactorSpace::binary(2);
    const DesignLayout layout(space);
    const BernoulliEnv env({0.1, 0.2, 0.3, 0.4});
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    std::vector<EffectVector> draws;
    for (int k = 0; k < 50; ++k) {
        EffectVector b(layout.dimension());
        for (int j = 0; j < b.size(); ++j) b[j] = nd(gen);
        // arm 3 = (2,2) exceeds arm 0 = (1,1) whenever ME + ME + 2FI > 0
        b[layout.two_factor_column(0, 2, 1, 2)] = 10.0 + std::abs(b[1]) + std::abs(b[2]);
        draws.push_back(b);
    }
    TrialLedger ledger;
    Rng rng(5);
    const auto rec = allocate_period(draws, std::vector<ArmIndex>{0, 3}, layout, env, 2, 3, ledger, rng);
    EXPECT_EQ(rec.runs.at(3), 50);
    EXPECT_EQ(rec.switch_period, 2);
    EXPECT_EQ(rec.period, 3);
}

TEST(QuantileRank, Values) {
    EXPECT_EQ(quantile_rank(0.25, 4), 3u);
    EXPECT_EQ(quantile_rank(0.05, 20), 19u);
    EXPECT_EQ(quantile_rank(0.05, 500), 475u);
    EXPECT_EQ(quantile_rank(0.05, 1), 1u);
    EXPECT_EQ(quantile_rank(0.999, 10), 1u);
}

TEST(SelectFromScores, HandWorkedExample) {
    Eigen::MatrixXd m(3, 4);
    m << .1, .2, .3, .4, .5, .5, .5, .5, .2, .2, .2, .9;
    Rng rng(6);
    const std::vector<ArmIndex> arms{1, 2, 3};
    auto chosen = select_from_scores(m, arms, 2, 0.25, rng);
    std::sort(chosen.begin(), chosen.end());
    EXPECT_EQ(chosen, (std::vector<ArmIndex>{1, 2}));
    EXPECT_EQ(row_quantiles(m, 0.25), (std::vector<double>{.3, .5, .2}));
}

TEST(SelectFromScores, MatchesSortedOrderStatistics) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u;
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 5 + trial % 20, cols = 1 + trial % 37, k = 1 + trial % rows;
        const double alpha = 0.01 + 0.9 * u(gen);
        Eigen::MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = u(gen);
        std::vector<ArmIndex> arms(static_cast<std::size_t>(rows));
        for (int i = 0; i < rows; ++i) arms[static_cast<std::size_t>(i)] = static_cast<ArmIndex>(i);
        const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * cols - 1e-9));
        const auto q = oracle::sorted_order_statistics(m, std::max<std::size_t>(rank, 1));
        std::vector<std::size_t> order(q.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return q[a] > q[b]; });
        std::set<ArmIndex> expect;
        for (int i = 0; i < k; ++i) expect.insert(static_cast<ArmIndex>(order[static_cast<std::size_t>(i)]));
        const auto got = select_from_scores(m, arms, k, alpha, rng);
        EXPECT_EQ(std::set<ArmIndex>(got.begin(), got.end()), expect);
    }
}

TEST(SelectArmSet, FullBudgetAndSingleDraw) {
    const FactorSpace space = FactorSpace::binary(4);
    const DesignLayout layout(space);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd;
    EffectVector b(layout.dimension());
    for (int j = 0; j < b.size(); ++j) b[j] = nd(gen);
    Rng rng(10);
    const std::vector<EffectVector> one{b};
    auto all = select_arm_set(one, layout, 16, 0.05, rng);
    std::sort(all.begin(), all.end());
    for (ArmIndex a = 0; a < 16; ++a) EXPECT_EQ(all[a], a);

    const auto arms = enumerate_arms(space);
    const auto mu = posterior_mu_matrix(one, arms, layout);
    Eigen::Index best = 0;
    mu.col(0).maxCoeff(&best);
    const auto top = select_arm_set(one, layout, 1, 1e-6, rng);
    EXPECT_EQ(top.front(), static_cast<ArmIndex>(best));
}

TEST(SelectArmSet, AgreesWithMuScaleSelection) {
    const FactorSpace space(std::vector<int>{3, 2, 4});
    const DesignLayout layout(space);
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd(0.0, 0.7);
    std::vector<EffectVector> draws;
    for (int k = 0; k < 40; ++k) {
        EffectVector b(layout.dimension());
        for (int j = 0; j < b.size(); ++j) b[j] = nd(gen);
        draws.push_back(b);
    }
    const auto arms = enumerate_arms(space);
    const auto mu = posterior_mu_matrix(draws, arms, layout);
    const auto q = oracle::sorted_order_statistics(mu, 38);
    std::vector<std::size_t> order(q.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return q[a] > q[b]; });
    Rng rng(12);
    const auto got = select_arm_set(draws, layout, 5, 0.05, rng);
    std::set<ArmIndex> expect;
    for (int i = 0; i < 5; ++i) expect.insert(static_cast<ArmIndex>(order[static_cast<std::size_t>(i)]));
    EXPECT_EQ(std::set<ArmIndex>(got.begin(), got.end()), expect);
}

TEST(SwitchRecord, AddedRemoved) {
    const auto rec = make_switch_record(2, {1, 2, 3}, {3, 4, 1});
    EXPECT_EQ(rec.added, std::vector<ArmIndex>{4});
    EXPECT_EQ(rec.removed, std::vector<ArmIndex>{2});
    std::ostringstream out;
    write_armsets_header(out);
    write_armsets_rows(out, "TSEC", 0, SwitchHistory{rec});
    EXPECT_EQ(out.str(), "method,replicate,s,arm_index,action\nTSEC,0,2,1,kept\nTSEC,0,2,3,kept\nTSEC,0,2,4,added\n"
                         "TSEC,0,2,2,removed\n");
}

TEST(RunTsec, SingleSwitchKeepsActiveSet) {
    const FactorSpace space = FactorSpace::binary(3);
    std::vector<double> mu{0.2, 0.3, 0.4, 0.5, 0.6, 0.2, 0.1, 0.7};
    const BernoulliEnv env(mu);
    TsecConfig c = small_config();
    c.S = 1;
    c.mcmc.iterations = 600;
    c.mcmc.burn_in = 100;
    Rng rng(13);
    const auto res = run_tsec(space, env, c, rng);
    ASSERT_EQ(res.history.size(), 1u);
    const std::set<ArmIndex> active(res.history[0].active.begin(), res.history[0].active.end());
    for (const auto& rec : res.records)
        for (const auto& [a, n] : rec.runs) EXPECT_TRUE(active.contains(a));
    EXPECT_EQ(res.regret.size(), 5u);
}

TEST(RunTsec, ConservationAndIdentity) {
    const FactorSpace space = FactorSpace::binary(4);
    std::vector<double> mu(16);
    for (int a = 0; a < 16; ++a) mu[static_cast<std::size_t>(a)] = 0.05 + 0.05 * (a % 7);
    const BernoulliEnv env(mu);
    TsecConfig c = small_config();
    c.mcmc.iterations = 800;
    c.mcmc.burn_in = 200;
    Rng rng(14);
    const auto res = run_tsec(space, env, c, rng);
    long runs = 0;
    double reward = 0.0;
    for (const auto& rec : res.records) {
        EXPECT_EQ(rec.total_runs(), c.n);
        runs += rec.total_runs();
        reward += period_reward(env, rec);
    }
    EXPECT_EQ(runs, c.S * c.T * c.n);
    EXPECT_EQ(res.ledger.size(), static_cast<std::size_t>(runs + c.n));
    EXPECT_NEAR(res.regret.back().cum_regret + reward, c.S * c.T * c.n * env.mu_star(), 1e-9);
    ASSERT_EQ(res.history.size(), static_cast<std::size_t>(c.S));
    for (std::size_t s = 0; s < res.history.size(); ++s) {
        EXPECT_EQ(res.history[s].active.size(), static_cast<std::size_t>(c.K));
        if (s == 0) continue;
        const auto& prev = res.history[s - 1].active;
        const auto expect = make_switch_record(static_cast<int>(s + 1), prev, res.history[s].active);
        EXPECT_EQ(res.history[s].added, expect.added);
        EXPECT_EQ(res.history[s].removed, expect.removed);
    }
}

TEST(RunTsec, FindsDominantArm) {
    // additive probit truth: each factor has one favoured level, so the best arm is unique
    const FactorSpace space = FactorSpace::binary(4);
    int found = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed(2024, seed, 0));
        const auto dominant = static_cast<ArmIndex>(std::uniform_int_distribution<int>(0, 15)(rng));
        const Arm best = decode_arm(space, dominant);
        std::vector<double> mu(16);
        for (ArmIndex a = 0; a < 16; ++a) {
            const Arm arm = decode_arm(space, a);
            double eta = -1.5;
            for (int f = 0; f < 4; ++f) eta += arm.levels[static_cast<std::size_t>(f)] == best.levels[static_cast<std::size_t>(f)] ? 0.7 : 0.0;
            mu[a] = normal_cdf(eta);
        }
        const auto res = run_tsec(space, BernoulliEnv(mu), small_config(), rng);
        const auto& last = res.history.back().active;
        found += std::find(last.begin(), last.end(), dominant) != last.end();
    }
    EXPECT_GE(found, 18);
}
