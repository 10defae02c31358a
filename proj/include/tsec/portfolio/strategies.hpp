#pragma once

// Per-industry investment strategies, the Sharpe ratio, and the binary reward.

#include "tsec/errors.hpp"
#include "tsec/portfolio/prices.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tsec::portfolio {

enum class StrategyCode { MeanVariance = 1, SoldAll = 2, EquallyWeighted = 3, ValueWeighted = 4 };

inline constexpr int kNumStrategies = 4;

inline std::string to_string(StrategyCode s) {
    switch (s) {
    case StrategyCode::MeanVariance: return "MeanVariance";
    case StrategyCode::SoldAll: return "SoldAll";
    case StrategyCode::EquallyWeighted: return "EquallyWeighted";
    case StrategyCode::ValueWeighted: return "ValueWeighted";
    }
    return "?";
}

inline StrategyCode strategy_from_level(int level) {
    detail::require(level >= 1 && level <= kNumStrategies, "strategy level must be 1..4");
    return static_cast<StrategyCode>(level);
}

struct SleeveWeights {
    std::vector<double> assets;
    double cash = 0.0;
};

struct StrategyParams {
    /// Trailing daily returns used for mean-variance estimates.
    int window = 60;
    double risk_aversion = 1.0;
    /// Calendar length of the previous period used by value weighting.
    int rebalance_days = 30;
};

inline double mean_variance_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                      double risk_aversion) {
    return w.dot(mu) - risk_aversion * w.dot(sigma * w);
}

/// argmax over the simplex of w'mu - lambda w'Sigma w, by enumerating supports.
///
/// For each nonempty support the equality-constrained optimum solves
///   [2 lambda Sigma_S  1] [w]   [mu_S]
///   [1'                0] [nu] = [1   ]
/// and the best feasible (w >= 0) candidate over all supports is the global
/// optimum of the concave program. Sigma should already be regularized.
inline Eigen::VectorXd mean_variance_weights(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                             double risk_aversion) {
    const int n = static_cast<int>(mu.size());
    detail::require(n >= 1 && n <= 20, "mean-variance supports 1..20 assets");
    detail::require(sigma.rows() == n && sigma.cols() == n, "covariance has the wrong shape");
    detail::require(risk_aversion > 0.0, "risk aversion must be positive");
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<int> support;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        support.clear();
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) support.push_back(i);
        const int k = static_cast<int>(support.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
        Eigen::VectorXd rhs(k + 1);
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) kkt(a, b) = 2.0 * risk_aversion * sigma(support[a], support[b]);
            kkt(a, k) = 1.0;
            kkt(k, a) = 1.0;
            rhs[a] = mu[support[a]];
        }
        rhs[k] = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        bool feasible = true;
        for (int a = 0; a < k; ++a) {
            if (sol[a] < -1e-12) {
                feasible = false;
                break;
            }
            w[support[a]] = std::max(0.0, sol[a]);
        }
        if (!feasible) continue;
        w /= w.sum();
        const double value = mean_variance_objective(w, mu, sigma, risk_aversion);
        if (value > best_value) {
            best_value = value;
            best = w;
        }
    }
    return best;
}

/// Sample mean and (n-1) covariance of the daily returns on days [first, last].
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> return_moments(const PriceTable& table, std::span<const int> tickers,
                                                                   int first, int last) {
    const int n = static_cast<int>(tickers.size());
    const int obs = last - first + 1;
    detail::require(obs >= 2, "need at least two returns for moments");
    Eigen::MatrixXd r(obs, n);
    for (int d = 0; d < obs; ++d)
        for (int k = 0; k < n; ++k) r(d, k) = table.simple_return(first + d, tickers[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd mean = r.colwise().mean();
    const Eigen::MatrixXd centered = r.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(obs - 1);
    return {mean, cov};
}

/// Weights for one industry sleeve, fixed at the trading day `as_of` using only
/// data strictly before it.
inline SleeveWeights industry_weights(StrategyCode strategy, const PriceTable& table, const Industry& industry,
                                      int as_of, const StrategyParams& params) {
    const int n = static_cast<int>(industry.tickers.size());
    detail::require(n >= 1, "industry has no tickers");
    detail::require(params.window >= 2, "estimation window must be at least 2");
    // returns on days as_of - window .. as_of - 1 need prices from as_of - window - 1
    const int first_return = as_of - params.window;
    if (first_return < 1) {
        const int usable = params.window + 1;
        throw ValidationError("insufficient history for " + std::to_string(params.window) +
                              "-day estimation; first usable date is " +
                              (usable < table.num_days() ? format_date(table.dates[static_cast<std::size_t>(usable)])
                                                         : std::string("beyond the data")));
    }
    SleeveWeights out;
    out.assets.assign(static_cast<std::size_t>(n), 0.0);
    switch (strategy) {
    case StrategyCode::SoldAll:
        out.cash = 1.0;
        break;
    case StrategyCode::EquallyWeighted:
        for (auto& w : out.assets) w = 1.0 / n;
        break;
    case StrategyCode::ValueWeighted: {
        const Date start = table.dates[static_cast<std::size_t>(as_of)] - std::chrono::days{params.rebalance_days};
        // last trading day on or before the previous period's start
        int prev = table.first_on_or_after(start);
        if (prev >= table.num_days() || table.dates[static_cast<std::size_t>(prev)] > start) --prev;
        if (prev < 0) throw ValidationError("insufficient history for value weighting before " + format_date(table.dates[static_cast<std::size_t>(as_of)]));
        double total = 0.0;
        for (int k = 0; k < n; ++k) {
            const int c = industry.tickers[static_cast<std::size_t>(k)];
            const double ret = table.prices(as_of - 1, c) / table.prices(prev, c) - 1.0;
            out.assets[static_cast<std::size_t>(k)] = std::max(ret, 0.0);
            total += out.assets[static_cast<std::size_t>(k)];
        }
        if (total > 0.0)
            for (auto& w : out.assets) w /= total;
        else
            for (auto& w : out.assets) w = 1.0 / n;
        break;
    }
    case StrategyCode::MeanVariance: {
        auto [mu, sigma] = return_moments(table, industry.tickers, first_return, as_of - 1);
        const double trace = sigma.trace();
        sigma.diagonal().array() += 1e-8 * (trace > 0.0 ? trace : 1.0);
        const Eigen::VectorXd w = mean_variance_weights(mu, sigma, params.risk_aversion);
        for (int k = 0; k < n; ++k) out.assets[static_cast<std::size_t>(k)] = w[k];
        break;
    }
    }
    return out;
}

/// Mean over sample standard deviation. Zero spread gives +inf, -inf or 0 by the
/// sign of the mean.
inline double sharpe(std::span<const double> returns) {
    detail::require(returns.size() >= 2, "Sharpe ratio needs at least two observations");
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(returns.size() - 1));
    // a constant series can leave rounding residue in sd
    if (sd == 0.0 || sd <= 1e-12 * std::fabs(mean)) {
        if (mean > 0.0) return std::numeric_limits<double>::infinity();
        if (mean < 0.0) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }
    return mean / sd;
}

/// Binary reward from a Sharpe ratio: SR >= tau, or SR > tau when strict. The
/// non-strict comparison treats values within 1e-12 of tau as ties.
inline int sharpe_reward(double sr, double tau, bool strict = false) {
    if (strict) return sr > tau ? 1 : 0;
    return sr >= tau - 1e-12 * std::max(1.0, std::fabs(tau)) ? 1 : 0;
}

} // namespace tsec::portfolio
