#pragma once

// Bernoulli environments, Beta-Bernoulli Thompson sampling and regret accounting
// under arm budget constraints.

#include "tsec/arm_space.hpp"
#include "tsec/errors.hpp"
#include "tsec/random.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace tsec {

class BernoulliEnv {
public:
    BernoulliEnv() = default;

    explicit BernoulliEnv(std::vector<double> true_mu) : mu_(std::move(true_mu)) {
        detail::require(!mu_.empty(), "environment needs at least one arm");
        for (double m : mu_) detail::require(m >= 0.0 && m <= 1.0, "reward probabilities must lie in [0, 1]");
        mu_star_ = *std::max_element(mu_.begin(), mu_.end());
        for (std::size_t a = 0; a < mu_.size(); ++a)
            if (mu_[a] == mu_star_) best_.push_back(static_cast<ArmIndex>(a));
    }

    std::size_t num_arms() const noexcept { return mu_.size(); }
    double mu(ArmIndex a) const { return mu_.at(a); }
    const std::vector<double>& true_mu() const noexcept { return mu_; }
    double mu_star() const noexcept { return mu_star_; }
    const std::vector<ArmIndex>& optimal_arms() const noexcept { return best_; }

private:
    std::vector<double> mu_;
    double mu_star_ = 0.0;
    std::vector<ArmIndex> best_;
};

template <class URBG>
int pull(const BernoulliEnv& env, ArmIndex arm, URBG& rng) {
    return std::bernoulli_distribution(env.mu(arm))(rng) ? 1 : 0;
}

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    long observations() const noexcept { return static_cast<long>(alpha + beta - 2.0); }
};

/// Independent Beta posteriors, one per arm, starting at Beta(1, 1).
class BetaState {
public:
    BetaState() = default;
    explicit BetaState(std::size_t num_arms) : params_(num_arms) {}

    std::size_t size() const noexcept { return params_.size(); }
    const BetaParams& operator[](ArmIndex a) const { return params_.at(a); }
    BetaParams& operator[](ArmIndex a) { return params_.at(a); }

    void reset(ArmIndex a) { params_.at(a) = BetaParams{}; }

private:
    std::vector<BetaParams> params_;
};

inline void beta_update(BetaState& states, ArmIndex arm, int reward) {
    detail::require(reward == 0 || reward == 1, "rewards must be binary");
    auto& p = states[arm];
    (reward ? p.alpha : p.beta) += 1.0;
}

namespace detail {

/// Index of the largest value, ties broken uniformly at random.
template <class URBG>
std::size_t argmax_random_ties(std::span<const double> values, URBG& rng) {
    std::size_t best = 0;
    std::size_t ties = 1;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
            ties = 1;
        } else if (values[i] == values[best]) {
            ++ties;
            if (std::uniform_int_distribution<std::size_t>(0, ties - 1)(rng) == 0) best = i;
        }
    }
    return best;
}

/// Indices of the k largest values (descending), ties broken uniformly at random.
template <class URBG>
std::vector<std::size_t> top_k_random_ties(std::span<const double> values, std::size_t k, URBG& rng) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    k = std::min(k, order.size());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(k);
    return order;
}

} // namespace detail

/// One Thompson draw per candidate; returns the candidate with the largest draw.
template <class URBG>
ArmIndex ts_select(const BetaState& states, std::span<const ArmIndex> candidates, URBG& rng) {
    if (candidates.empty()) throw ValidationError("Thompson sampling needs at least one candidate arm");
    std::vector<double> theta(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& p = states[candidates[i]];
        theta[i] = beta_draw(p.alpha, p.beta, rng);
    }
    return candidates[detail::argmax_random_ties<URBG>(theta, rng)];
}

/// Monte Carlo probability that each candidate is the best, from R joint rounds.
/// Tied maxima share the round's unit mass equally.
template <class URBG>
std::vector<double> prob_best(const BetaState& states, std::span<const ArmIndex> candidates, int rounds, URBG& rng) {
    detail::require(rounds >= 1, "prob_best needs at least one round");
    detail::require(!candidates.empty(), "prob_best needs at least one candidate");
    std::vector<double> freq(candidates.size(), 0.0);
    if (candidates.size() == 1) {
        freq[0] = 1.0;
        return freq;
    }
    std::vector<double> theta(candidates.size());
    std::vector<std::size_t> winners;
    for (int round = 0; round < rounds; ++round) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& p = states[candidates[i]];
            theta[i] = beta_draw(p.alpha, p.beta, rng);
        }
        const double top = *std::max_element(theta.begin(), theta.end());
        winners.clear();
        for (std::size_t i = 0; i < theta.size(); ++i)
            if (theta[i] == top) winners.push_back(i);
        for (auto w : winners) freq[w] += 1.0 / static_cast<double>(winners.size());
    }
    for (double& f : freq) f /= rounds;
    return freq;
}

/// Runs and successes per arm in one (switch, period) cell.
struct AllocationRecord {
    int switch_period = 0;
    int period = 0;
    std::map<ArmIndex, long> runs;
    std::map<ArmIndex, long> successes;

    void record(ArmIndex arm, int reward) {
        runs[arm] += 1;
        successes[arm] += reward;
    }

    long total_runs() const {
        long n = 0;
        for (const auto& [a, c] : runs) n += c;
        return n;
    }
};

/// sum_a n_a (mu* - mu_a) for one period.
inline double period_regret(const BernoulliEnv& env, const AllocationRecord& rec) {
    double regret = 0.0;
    for (const auto& [a, n] : rec.runs) regret += static_cast<double>(n) * (env.mu_star() - env.mu(a));
    return regret;
}

/// sum_a n_a mu_a for one period.
inline double period_reward(const BernoulliEnv& env, const AllocationRecord& rec) {
    double reward = 0.0;
    for (const auto& [a, n] : rec.runs) reward += static_cast<double>(n) * env.mu(a);
    return reward;
}

struct RegretPoint {
    int switch_period = 0;
    int period = 0;
    double period_regret = 0.0;
    double cum_regret = 0.0;
};

using RegretSeries = std::vector<RegretPoint>;

inline RegretSeries cumulative_regret(const BernoulliEnv& env, std::span<const AllocationRecord> records) {
    RegretSeries series;
    series.reserve(records.size());
    double total = 0.0;
    for (const auto& rec : records) {
        const double r = period_regret(env, rec);
        total += r;
        series.push_back(RegretPoint{rec.switch_period, rec.period, r, total});
    }
    return series;
}

inline void write_regret_header(std::ostream& out) { out << "method,replicate,s,t,period_regret,cum_regret\n"; }

inline void write_regret_rows(std::ostream& out, const std::string& method, int replicate, const RegretSeries& series) {
    const auto old = out.precision(17);
    for (const auto& pt : series)
        out << method << ',' << replicate << ',' << pt.switch_period << ',' << pt.period << ',' << pt.period_regret
            << ',' << pt.cum_regret << '\n';
    out.precision(old);
}

} // namespace tsec
