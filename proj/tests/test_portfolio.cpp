#include "oracles.hpp"
#include "price_fixtures.hpp"
#include "tsec/portfolio.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace tsec;
using namespace tsec::portfolio;

namespace {

PriceTable load(const std::string& prices, const std::string& industries, double max_missing = 0.02) {
    std::istringstream p(prices), i(industries);
    return load_prices(p, i, max_missing);
}

long ingestion_row(const std::string& prices, const std::string& industries) {
    try {
        load(prices, industries);
    } catch (const IngestionError& e) {
        return e.row();
    }
    return -1;
}

BacktestConfig quick_config() {
    BacktestConfig c;
    c.K = 20;
    c.S = 4;
    c.n = 30;
    c.mcmc.iterations = 400;
    c.mcmc.burn_in = 100;
    return c;
}

// Sample mean exactly m and sample sd exactly s over four points.
std::vector<double> series_with(double m, double s) {
    const double d = s * std::sqrt(3.0) / 2.0;
    return {m + d, m - d, m + d, m - d};
}

} // namespace

TEST(LoadPrices, SimpleReturn) {
    const auto t = load("date,ticker,adj_close\n2020-01-02,AAA,100\n2020-01-03,AAA,101\n", "ticker,industry\nAAA,X\n");
    ASSERT_EQ(t.num_days(), 2);
    EXPECT_NEAR(t.simple_return(1, 0), 0.01, 1e-15);
    ASSERT_EQ(t.industries.size(), 1u);
    EXPECT_EQ(t.industries[0].name, "X");
}

TEST(LoadPrices, ForwardFillsIsolatedGap) {
    std::string prices = "date,ticker,adj_close\n";
    for (int d = 1; d <= 60; ++d) {
        char date[16];
        std::snprintf(date, sizeof date, "2020-%02d-%02d", 1 + (d - 1) / 28, 1 + (d - 1) % 28);
        prices += std::string(date) + ",AAA," + std::to_string(100 + d) + "\n";
        if (d != 30) prices += std::string(date) + ",BBB," + std::to_string(50 + d) + "\n";
    }
    const auto t = load(prices, "ticker,industry\nAAA,X\nBBB,X\n");
    EXPECT_EQ(t.prices(29, 1), t.prices(28, 1));
    ASSERT_EQ(t.report.size(), 1u);
    EXPECT_NE(t.report[0].find("forward-filled BBB"), std::string::npos);
}

TEST(LoadPrices, DropsSparseTickers) {
    std::string prices = "date,ticker,adj_close\n";
    for (int d = 1; d <= 28; ++d) {
        char date[16];
        std::snprintf(date, sizeof date, "2020-02-%02d", d);
        prices += std::string(date) + ",AAA,10\n" + std::string(date) + ",CCC,10\n";
        if (d % 2) prices += std::string(date) + ",BBB,10\n";
    }
    const auto t = load(prices, "ticker,industry\nAAA,X\nBBB,X\nCCC,Y\n");
    EXPECT_EQ(t.tickers, (std::vector<std::string>{"AAA", "CCC"}));
    EXPECT_NE(t.report[0].find("dropped BBB"), std::string::npos);
    EXPECT_THROW(load(prices, "ticker,industry\nAAA,X\nBBB,Z\nCCC,Y\n"), IngestionError);
}

TEST(LoadPrices, ErrorsCarryRowNumbers) {
    const std::string map = "ticker,industry\nAAA,X\n";
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,1\n2020-01-03,ZZZ,1\n", map), 3);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,-1\n", map), 2);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,1\n2020-13-02,AAA,1\n", map), 3);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA\n", map), 2);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,abc\n", map), 2);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,1\n2020-01-02,AAA,2\n", map), 3);
    EXPECT_EQ(ingestion_row("date,ticker,price\n", map), 1);
    EXPECT_EQ(ingestion_row("date,ticker,adj_close\n2020-01-02,AAA,1\n", "ticker,industry\nAAA,X\nAAA,Y\n"), 3);
}

TEST(LoadPrices, RoundTripsFixtureCsv) {
    const auto table = fixture::random_walk_table(40, 1);
    const auto [p, i] = fixture::to_csv(table);
    const auto back = load(p, i);
    EXPECT_EQ(back.dates, table.dates);
    EXPECT_EQ(back.tickers, table.tickers);
    EXPECT_EQ(back.prices, table.prices);
    EXPECT_TRUE(back.report.empty());
}

TEST(Dates, ParseAndFormat) {
    EXPECT_FALSE(parse_date("2021-02-29"));
    EXPECT_FALSE(parse_date("2021-2-01"));
    EXPECT_EQ(format_date(*parse_date("2020-02-29")), "2020-02-29");
}

TEST(IndustryWeights, SoldAllAndEqual) {
    const auto t = fixture::random_walk_table(120, 2);
    const StrategyParams params;
    const auto sold = industry_weights(StrategyCode::SoldAll, t, t.industries[0], 100, params);
    EXPECT_EQ(sold.assets, std::vector<double>(5, 0.0));
    EXPECT_EQ(sold.cash, 1.0);
    const auto eq = industry_weights(StrategyCode::EquallyWeighted, t, t.industries[0], 100, params);
    EXPECT_EQ(eq.assets, std::vector<double>(5, 0.2));
    EXPECT_EQ(eq.cash, 0.0);
}

TEST(IndustryWeights, ValueWeightedClampsAndNormalizes) {
    // prices move once after day 0 and then stay flat until as_of
    const std::vector<double> ret{0.02, 0.02, -0.01, 0.0, 0.0};
    const auto t = fixture::make_table(100, 1, 5, [&](int day, int c) {
        return day < 10 ? 100.0 : 100.0 * (1.0 + ret[static_cast<std::size_t>(c)]);
    });
    StrategyParams params;
    params.window = 20;
    const int as_of = 95;
    // previous period starts exactly at day 0
    params.rebalance_days = static_cast<int>((t.dates[95] - t.dates[0]).count());
    const auto w = industry_weights(StrategyCode::ValueWeighted, t, t.industries[0], as_of, params);
    ASSERT_EQ(w.assets.size(), 5u);
    EXPECT_NEAR(w.assets[0], 0.5, 1e-12);
    EXPECT_NEAR(w.assets[1], 0.5, 1e-12);
    EXPECT_EQ(w.assets[2], 0.0);
    EXPECT_EQ(w.assets[3], 0.0);
    EXPECT_EQ(w.assets[4], 0.0);

    const auto down = fixture::make_table(100, 1, 5, [](int day, int) { return 100.0 - 0.1 * day; });
    params.rebalance_days = 30;
    const auto fallback = industry_weights(StrategyCode::ValueWeighted, down, down.industries[0], 95, params);
    EXPECT_EQ(fallback.assets, std::vector<double>(5, 0.2));
}

TEST(IndustryWeights, InsufficientHistoryNamesDate) {
    const auto t = fixture::random_walk_table(100, 3);
    try {
        industry_weights(StrategyCode::MeanVariance, t, t.industries[0], 30, StrategyParams{});
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(format_date(t.dates[61])), std::string::npos) << e.what();
    }
}

TEST(IndustryWeights, AlwaysOnTheSimplex) {
    const auto t = fixture::random_walk_table(200, 4);
    for (int level = 1; level <= 4; ++level)
        for (const auto& ind : t.industries)
            for (int day : {90, 130, 199}) {
                const auto w = industry_weights(strategy_from_level(level), t, ind, day, StrategyParams{});
                double total = w.cash;
                for (double x : w.assets) {
                    EXPECT_GE(x, 0.0);
                    total += x;
                }
                EXPECT_NEAR(total, 1.0, 1e-9);
            }
}

TEST(MeanVariance, SymmetricAssetsSplitEvenly) {
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(5, 0.001);
    const Eigen::MatrixXd sigma = 0.0004 * Eigen::MatrixXd::Identity(5, 5);
    const auto w = mean_variance_weights(mu, sigma, 1.0);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(w[i], 0.2, 1e-6);
}

TEST(MeanVariance, SatisfiesKktConditions) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 4;
        Eigen::VectorXd mu(n);
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i) {
            mu[i] = nd(rng);
            for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
        }
        const Eigen::MatrixXd sigma = a * a.transpose() / n + 0.01 * Eigen::MatrixXd::Identity(n, n);
        const double lambda = 0.5 + trial % 3;
        const Eigen::VectorXd w = mean_variance_weights(mu, sigma, lambda);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
        const Eigen::VectorXd g = mu - 2.0 * lambda * sigma * w;
        double level = -INFINITY;
        for (int i = 0; i < n; ++i)
            if (w[i] > 1e-9) level = std::max(level, g[i]);
        for (int i = 0; i < n; ++i) {
            EXPECT_GE(w[i], 0.0);
            if (w[i] > 1e-9) EXPECT_NEAR(g[i], level, 1e-8);
            else EXPECT_LE(g[i], level + 1e-8);
        }
        std::mt19937_64 search_rng(trial);
        EXPECT_GE(mean_variance_objective(w, mu, sigma, lambda),
                  oracle::simplex_search(mu, sigma, lambda, 20000, search_rng) - 1e-12);
    }
}

TEST(Sharpe, Conventions) {
    EXPECT_NEAR(sharpe(series_with(0.001, 0.02)), 0.05, 1e-12);
    EXPECT_EQ(sharpe(std::vector<double>(5, 0.0)), 0.0);
    EXPECT_TRUE(std::isinf(sharpe(std::vector<double>(5, 0.001))));
    EXPECT_GT(sharpe(std::vector<double>(5, 0.001)), 0.0);
    EXPECT_LT(sharpe(std::vector<double>(5, -0.001)), 0.0);
    EXPECT_THROW(sharpe(std::vector<double>{0.1}), ValidationError);
    EXPECT_EQ(sharpe_reward(sharpe(series_with(0.001, 0.02)), 0.05), 1);
    EXPECT_EQ(sharpe_reward(0.05, 0.05), 1);
    EXPECT_EQ(sharpe_reward(0.05, 0.05, true), 0);
    EXPECT_EQ(sharpe_reward(-0.2, 0.05), 0);
    EXPECT_EQ(sharpe_reward(INFINITY, 0.05), 1);
}

TEST(ArmReturns, SoldAllAndEqualWeight) {
    const auto t = fixture::make_table(150, 5, 5, [](int day, int) { return 100.0 * std::pow(1.001, day); });
    BacktestConfig c = quick_config();
    const auto periods = make_periods(t, c);
    const auto params = c.strategy_params();
    const FactorSpace space = strategy_space(t);
    const auto sold = arm_return_series(make_arm(space, {2, 2, 2, 2, 2}), t, periods[0], params);
    EXPECT_EQ(sold, std::vector<double>(static_cast<std::size_t>(periods[0].length()), 0.0));
    for (double r : arm_return_series(make_arm(space, {3, 3, 3, 3, 3}), t, periods[1], params)) EXPECT_NEAR(r, 0.001, 1e-12);
    EXPECT_EQ(period_reward(make_arm(space, {2, 2, 2, 2, 2}), t, periods[0], params, 0.05), 0);
    EXPECT_EQ(period_reward(make_arm(space, {3, 3, 3, 3, 3}), t, periods[0], params, 0.05), 1);
}

TEST(Periods, CalendarWindows) {
    const auto t = fixture::random_walk_table(300, 6);
    const BacktestConfig c = quick_config();
    const auto periods = make_periods(t, c);
    ASSERT_EQ(periods.size(), 4u);
    EXPECT_GE(periods[0].first, c.window + 1);
    for (std::size_t p = 0; p < periods.size(); ++p) {
        const auto start = t.dates[static_cast<std::size_t>(periods[0].first)] + std::chrono::days{30 * static_cast<int>(p)};
        int expect = 0;
        for (const auto& d : t.dates) expect += d >= start && d < start + std::chrono::days{30};
        EXPECT_EQ(periods[p].length(), expect);
        if (p) EXPECT_EQ(periods[p].first, periods[p - 1].last + 1);
    }
    BacktestConfig too_long = c;
    too_long.S = 40;
    EXPECT_THROW(make_periods(t, too_long), ValidationError);
    BacktestConfig early = c;
    early.start = t.dates[10];
    EXPECT_THROW(make_periods(t, early), ValidationError);
}

TEST(Backtest, FlatPricesKeepWealthAtOne) {
    const auto t = fixture::make_table(200, 5, 5, [](int, int) { return 50.0; });
    Rng rng(1);
    const auto res = backtest(t, quick_config(), rng);
    for (const auto& series : res.wealth)
        for (double w : series) EXPECT_EQ(w, 1.0);
}

TEST(Backtest, EqualWeightBaselineMatchesDirectComputation) {
    const auto t = fixture::random_walk_table(260, 7);
    Rng rng(2);
    const auto res = backtest(t, quick_config(), rng);
    // equal capital per industry and 1/5 per ticker is 1/25 on every ticker, rebalanced daily
    double wealth = 1.0;
    for (std::size_t p = 0; p < res.periods.size(); ++p) {
        double growth = 1.0;
        for (int d = res.periods[p].first; d <= res.periods[p].last; ++d) {
            double r = 0.0;
            for (int c = 0; c < 25; ++c) r += (t.prices(d, c) / t.prices(d - 1, c) - 1.0) / 25.0;
            growth *= 1.0 + r;
        }
        wealth *= growth;
        EXPECT_NEAR(res.wealth[3][p + 1], wealth, 1e-12);
    }
}

TEST(Backtest, Deterministic) {
    const auto t = fixture::random_walk_table(260, 8);
    auto run = [&]() {
        Rng rng(3);
        const auto res = backtest(t, quick_config(), rng);
        std::ostringstream w, r;
        write_wealth_csv(w, res);
        write_rewards_csv(r, res);
        return w.str() + r.str();
    };
    EXPECT_EQ(run(), run());
}

TEST(Backtest, SchemaAndAccounting) {
    const auto t = fixture::random_walk_table(260, 9);
    const auto c = quick_config();
    Rng rng(4);
    const auto res = backtest(t, c, rng);
    std::ostringstream w;
    write_wealth_csv(w, res);
    std::istringstream in(w.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "date,method,wealth");
    std::map<std::string, int> rows;
    while (std::getline(in, line)) ++rows[line.substr(11, line.find(',', 11) - 11)];
    for (const auto& name : backtest_methods()) EXPECT_EQ(rows[name], c.S + 1);
    EXPECT_EQ(res.ledger.size(), static_cast<std::size_t>(c.S * c.n));
    EXPECT_EQ(res.history.size(), static_cast<std::size_t>(c.S));
    for (std::size_t p = 0; p < res.records.size(); ++p) {
        EXPECT_EQ(res.records[p].total_runs(), c.n);
        EXPECT_GE(res.reward_shortfall[p], 0);
        for (const auto& [a, n] : res.records[p].runs)
            EXPECT_EQ(res.records[p].successes.at(a), n * res.outcomes[p].reward[a]);
    }
    for (const auto& series : res.wealth)
        for (double x : series) EXPECT_GT(x, 0.0);
}

TEST(Backtest, HighThresholdZeroesRewards) {
    const auto t = fixture::random_walk_table(260, 10);
    auto c = quick_config();
    c.tau = 10.0;
    Rng rng(5);
    const auto res = backtest(t, c, rng);
    for (const auto& o : res.outcomes)
        for (int r : o.reward) EXPECT_EQ(r, 0);
}
