#pragma once

// Historical backtest: TSEC over the industry-strategy arm space against the four
// pure-strategy portfolios.

#include "tsec/arm_space.hpp"
#include "tsec/errors.hpp"
#include "tsec/portfolio/prices.hpp"
#include "tsec/portfolio/strategies.hpp"
#include "tsec/probit_model.hpp"
#include "tsec/tsec_engine.hpp"

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace tsec::portfolio {

struct BacktestConfig {
    int K = 75;
    int S = 20;
    int T = 1;
    int rebalance_days = 30;
    double tau = 0.05;
    bool strict_reward = false;
    int window = 60;
    double risk_aversion = 1.0;
    int n = 100;
    double alpha = 0.05;
    std::optional<Date> start;
    ChainSettings mcmc{};
    bool warm_start = true;

    StrategyParams strategy_params() const { return StrategyParams{window, risk_aversion, rebalance_days}; }

    void validate() const {
        detail::require(K >= 1, "K must be at least 1");
        detail::require(S >= 1 && T >= 1, "S and T must be at least 1");
        detail::require(rebalance_days >= 1, "rebalance_days must be at least 1");
        detail::require(std::isfinite(tau), "tau must be a real number");
        detail::require(window >= 2, "estimation window must be at least 2");
        detail::require(risk_aversion > 0.0, "risk aversion must be positive");
        detail::require(n >= 1, "n must be at least 1");
        detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        mcmc.validate();
    }
};

/// The strategy space: one 4-level factor per industry.
inline FactorSpace strategy_space(const PriceTable& table) {
    return FactorSpace(std::vector<int>(table.industries.size(), kNumStrategies));
}

/// One rebalance window: weights fixed at trading day `first`, returns realized on
/// trading days first..last inclusive.
struct Period {
    int first = 0;
    int last = 0;

    int length() const noexcept { return last - first + 1; }
};

/// Consecutive calendar windows of `rebalance_days`, the first starting at the
/// earliest trading day with enough lookback (or on/after config.start).
inline std::vector<Period> make_periods(const PriceTable& table, const BacktestConfig& config) {
    config.validate();
    const int days = table.num_days();
    detail::require(days >= 2, "price table needs at least two days");
    // W returns before the first day need W + 1 prices; value weighting needs a
    // full previous period
    int first = config.window + 1;
    while (first < days &&
           table.dates[static_cast<std::size_t>(first)] - std::chrono::days{config.rebalance_days} < table.dates.front())
        ++first;
    if (config.start) {
        const int requested = table.first_on_or_after(*config.start);
        if (requested < first)
            throw ValidationError("insufficient history before start date; first usable date is " +
                                  (first < days ? format_date(table.dates[static_cast<std::size_t>(first)])
                                                : std::string("beyond the data")));
        first = requested;
    }
    const int total = config.S * config.T;
    std::vector<Period> periods;
    Date begin = first < days ? table.dates[static_cast<std::size_t>(first)] : table.dates.back();
    for (int p = 0; p < total; ++p) {
        const Date end = begin + std::chrono::days{config.rebalance_days};
        const int a = table.first_on_or_after(begin);
        const int b = table.first_on_or_after(end) - 1;
        if (a >= days || end - std::chrono::days{1} > table.dates.back())
            throw ValidationError("price data ends before period " + std::to_string(p + 1) + " of " +
                                  std::to_string(total) + " is complete");
        if (b - a + 1 < 2)
            throw ValidationError("period starting " + format_date(begin) + " has fewer than two trading days");
        periods.push_back(Period{a, b});
        begin = end;
    }
    return periods;
}

/// Daily sleeve returns for every (industry, strategy) in one period.
class PeriodReturns {
public:
    PeriodReturns(const PriceTable& table, const Period& period, const StrategyParams& params) : period_(period) {
        const std::size_t m = table.industries.size();
        sleeves_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Industry& industry = table.industries[i];
            for (int s = 1; s <= kNumStrategies; ++s) {
                const SleeveWeights w = industry_weights(strategy_from_level(s), table, industry, period.first, params);
                std::vector<double> series(static_cast<std::size_t>(period.length()), 0.0);
                for (int d = period.first; d <= period.last; ++d) {
                    double r = 0.0;
                    for (std::size_t k = 0; k < industry.tickers.size(); ++k)
                        r += w.assets[k] * table.simple_return(d, industry.tickers[k]);
                    series[static_cast<std::size_t>(d - period.first)] = r;
                }
                sleeves_[i][static_cast<std::size_t>(s - 1)] = std::move(series);
            }
        }
    }

    const Period& period() const noexcept { return period_; }

    const std::vector<double>& sleeve(std::size_t industry, int level) const {
        return sleeves_.at(industry).at(static_cast<std::size_t>(level - 1));
    }

    /// Equal capital per industry sleeve: the mean of the sleeve returns each day.
    std::vector<double> arm_series(const Arm& arm) const {
        detail::require(arm.levels.size() == sleeves_.size(), "arm does not match the number of industries");
        std::vector<double> out(static_cast<std::size_t>(period_.length()), 0.0);
        for (std::size_t i = 0; i < sleeves_.size(); ++i) {
            const auto& s = sleeve(i, arm.levels[i]);
            for (std::size_t d = 0; d < out.size(); ++d) out[d] += s[d];
        }
        for (double& r : out) r /= static_cast<double>(sleeves_.size());
        return out;
    }

private:
    Period period_;
    std::vector<std::array<std::vector<double>, kNumStrategies>> sleeves_;
};

inline std::vector<double> arm_return_series(const Arm& arm, const PriceTable& table, const Period& period,
                                             const StrategyParams& params) {
    return PeriodReturns(table, period, params).arm_series(arm);
}

/// Compounded return of a daily series.
inline double compound(std::span<const double> daily) {
    double growth = 1.0;
    for (double r : daily) growth *= 1.0 + r;
    return growth - 1.0;
}

inline int period_reward(const Arm& arm, const PriceTable& table, const Period& period, const StrategyParams& params,
                         double tau, bool strict = false) {
    const auto series = arm_return_series(arm, table, period, params);
    return sharpe_reward(sharpe(series), tau, strict);
}

/// Sharpe ratio, reward and compounded return of every arm in one period.
struct ArmOutcomes {
    std::vector<double> sharpe;
    std::vector<int> reward;
    std::vector<double> period_return;

    int best_reward() const { return *std::max_element(reward.begin(), reward.end()); }
};

inline ArmOutcomes evaluate_arms(const PeriodReturns& returns, const FactorSpace& space, double tau, bool strict) {
    ArmOutcomes out;
    const auto n = static_cast<std::size_t>(space.num_arms());
    out.sharpe.resize(n);
    out.reward.resize(n);
    out.period_return.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        const auto series = returns.arm_series(decode_arm(space, static_cast<ArmIndex>(a)));
        out.sharpe[a] = sharpe(series);
        out.reward[a] = sharpe_reward(out.sharpe[a], tau, strict);
        out.period_return[a] = compound(series);
    }
    return out;
}

inline const std::array<std::string, 5>& backtest_methods() {
    static const std::array<std::string, 5> names{"TSEC", "MeanVariance", "SoldAll", "EquallyWeighted", "ValueWeighted"};
    return names;
}

struct WealthPoint {
    Date date;
    std::string method;
    double wealth = 1.0;
};

using WealthSeries = std::vector<WealthPoint>;

struct BacktestResult {
    std::vector<Period> periods;
    /// Period-end dates, preceded by the day before the first period.
    std::vector<Date> dates;
    /// [method][0..S*T], method order as in backtest_methods().
    std::vector<std::vector<double>> wealth;
    std::vector<ArmOutcomes> outcomes;
    /// Per period: TSEC capital units that earned reward 1.
    std::vector<int> tsec_successes;
    /// Per period: n * best reward minus TSEC successes.
    std::vector<int> reward_shortfall;
    std::vector<AllocationRecord> records;
    SwitchHistory history;
    TrialLedger ledger;

    WealthSeries wealth_series() const {
        WealthSeries out;
        const auto& names = backtest_methods();
        for (std::size_t m = 0; m < wealth.size(); ++m)
            for (std::size_t p = 0; p < dates.size(); ++p) out.push_back(WealthPoint{dates[p], names[m], wealth[m][p]});
        return out;
    }
};

/// TSEC over the strategy space plus the four pure-strategy baselines.
///
/// The first period spends the n capital units by equal allocation over a random
/// initial set of K arms; later periods allocate one unit per thinned posterior
/// draw. After every switch block but the last a chain on all rewards so far picks
/// the next K arms. Rewards are deterministic: the thresholded Sharpe ratio of the
/// arm over the period. TSEC wealth grows by the mean period return over units.
template <class URBG>
BacktestResult backtest(const PriceTable& table, const BacktestConfig& config, URBG& rng) {
    config.validate();
    const FactorSpace space = strategy_space(table);
    detail::require(static_cast<std::uint64_t>(config.K) <= space.num_arms(), "K exceeds the number of portfolios");
    const DesignLayout layout(space);
    const StrategyParams params = config.strategy_params();

    BacktestResult result;
    result.periods = make_periods(table, config);
    result.dates.push_back(table.dates[static_cast<std::size_t>(result.periods.front().first - 1)]);
    result.wealth.assign(backtest_methods().size(), std::vector<double>{1.0});

    std::vector<ArmIndex> active = initial_arm_set(space, config.K, InitDesign::RandomSubset, rng);
    result.history.push_back(make_switch_record(1, {}, active));
    std::optional<EffectVector> warm;
    std::optional<PosteriorChain> chain;
    auto refit = [&]() {
        chain = run_chain(result.ledger, layout, config.mcmc, warm, rng);
        if (config.warm_start) warm = chain->mean_beta();
    };

    std::size_t p = 0;
    for (int s = 1; s <= config.S; ++s) {
        for (int t = 1; t <= config.T; ++t, ++p) {
            const Period& period = result.periods[p];
            const PeriodReturns returns(table, period, params);
            ArmOutcomes outcomes = evaluate_arms(returns, space, config.tau, config.strict_reward);

            std::vector<ArmIndex> plan;
            if (p == 0) {
                plan = equal_allocation(std::span<const ArmIndex>(active), config.n, rng);
            } else {
                if (!chain) refit();
                const auto draws = thin(*chain, static_cast<std::size_t>(config.n), rng);
                plan = thompson_choices(draws, active, layout, rng);
                chain.reset();
            }
            AllocationRecord rec;
            rec.switch_period = s;
            rec.period = t;
            double mean_return = 0.0;
            int successes = 0;
            for (ArmIndex a : plan) {
                const int y = outcomes.reward[a];
                result.ledger.add(a, s, t, y);
                rec.record(a, y);
                mean_return += outcomes.period_return[a];
                successes += y;
            }
            mean_return /= static_cast<double>(plan.size());

            auto& w = result.wealth;
            w[0].push_back(w[0].back() * (1.0 + mean_return));
            for (int level = 1; level <= kNumStrategies; ++level) {
                const ArmIndex pure = encode_index(space, std::vector<int>(table.industries.size(), level));
                w[static_cast<std::size_t>(level)].push_back(w[static_cast<std::size_t>(level)].back() *
                                                             (1.0 + outcomes.period_return[pure]));
            }
            result.dates.push_back(table.dates[static_cast<std::size_t>(period.last)]);
            result.tsec_successes.push_back(successes);
            result.reward_shortfall.push_back(config.n * outcomes.best_reward() - successes);
            result.records.push_back(std::move(rec));
            result.outcomes.push_back(std::move(outcomes));
        }
        if (s < config.S) {
            // the same chain drives the next period's allocation: no new data in between
            refit();
            std::vector<ArmIndex> next = select_arm_set(chain_betas(*chain), layout, config.K, config.alpha, rng);
            result.history.push_back(make_switch_record(s + 1, active, next));
            active = std::move(next);
        }
    }
    return result;
}

inline void write_wealth_csv(std::ostream& out, const BacktestResult& result) {
    out << "date,method,wealth\n";
    const auto old = out.precision(17);
    for (const auto& row : result.wealth_series()) out << format_date(row.date) << ',' << row.method << ',' << row.wealth << '\n';
    out.precision(old);
}

inline void write_rewards_csv(std::ostream& out, const BacktestResult& result) {
    out << "period,arm_index,sharpe,reward\n";
    const auto old = out.precision(17);
    for (std::size_t p = 0; p < result.outcomes.size(); ++p) {
        const auto& o = result.outcomes[p];
        for (std::size_t a = 0; a < o.sharpe.size(); ++a)
            out << p + 1 << ',' << a << ',' << o.sharpe[a] << ',' << o.reward[a] << '\n';
    }
    out.precision(old);
}

} // namespace tsec::portfolio
