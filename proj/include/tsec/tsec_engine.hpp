#pragma once

// Thompson sampling under experimental constraints: a probit interaction model
// refit every period drives run allocation inside the active set, and an upper
// posterior quantile rule picks the next active set at each switch.

#include "tsec/arm_space.hpp"
#include "tsec/bandit.hpp"
#include "tsec/errors.hpp"
#include "tsec/probit_model.hpp"
#include "tsec/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tsec {

enum class InitDesign { RandomSubset, RegularFraction };

struct TsecConfig {
    int K = 16;
    int n = 100;
    int T = 50;
    int S = 5;
    double alpha = 0.05;
    InitDesign init_design = InitDesign::RegularFraction;
    ChainSettings mcmc{};
    /// Start each refit at the previous chain's posterior mean.
    bool warm_start = true;

    void validate(const FactorSpace& space) const {
        detail::require(K >= 1 && static_cast<std::uint64_t>(K) <= space.num_arms(), "K must lie in [1, N]");
        detail::require(n >= K, "runs per period n must be at least K");
        detail::require(T >= 1 && S >= 1, "T and S must be positive");
        detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        mcmc.validate();
    }
};

/// q such that K = 2^(M - q) for an all-binary space, if a regular fraction fits.
inline std::optional<int> fraction_power(const FactorSpace& space, int k) {
    if (!space.all_binary() || k < 1 || !std::has_single_bit(static_cast<unsigned>(k))) return std::nullopt;
    const int basic = std::countr_zero(static_cast<unsigned>(k));
    const int q = space.num_factors() - basic;
    if (q < 1 || q >= space.num_factors()) return std::nullopt;
    const long words = (1L << basic) - 1 - basic;
    if (q > words) return std::nullopt;
    return q;
}

/// K arms from a random regular fraction when one exists, else a uniform random subset.
template <class URBG>
std::vector<ArmIndex> initial_arm_set(const FactorSpace& space, int k, InitDesign design, URBG& rng) {
    std::vector<Arm> arms;
    const auto q = fraction_power(space, k);
    if (design == InitDesign::RegularFraction && q) arms = random_regular_fraction(space, *q, rng);
    else arms = random_arm_subset(space, static_cast<std::uint64_t>(k), rng);
    std::vector<ArmIndex> out;
    out.reserve(arms.size());
    for (const auto& a : arms) out.push_back(a.index);
    return out;
}

struct SwitchRecord {
    int switch_period = 0;
    std::vector<ArmIndex> active;
    std::vector<ArmIndex> added;
    std::vector<ArmIndex> removed;
};

using SwitchHistory = std::vector<SwitchRecord>;

inline SwitchRecord make_switch_record(int s, const std::vector<ArmIndex>& previous, const std::vector<ArmIndex>& next) {
    SwitchRecord rec{s, next, {}, {}};
    const std::set<ArmIndex> prev(previous.begin(), previous.end());
    const std::set<ArmIndex> now(next.begin(), next.end());
    for (auto a : now)
        if (!prev.contains(a)) rec.added.push_back(a);
    for (auto a : prev)
        if (!now.contains(a)) rec.removed.push_back(a);
    return rec;
}

inline void write_armsets_header(std::ostream& out) { out << "method,replicate,s,arm_index,action\n"; }

inline void write_armsets_rows(std::ostream& out, const std::string& method, int replicate, const SwitchHistory& history) {
    for (const auto& rec : history) {
        const std::set<ArmIndex> added(rec.added.begin(), rec.added.end());
        std::vector<ArmIndex> active = rec.active;
        std::sort(active.begin(), active.end());
        for (auto a : active)
            out << method << ',' << replicate << ',' << rec.switch_period << ',' << a << ','
                << (added.contains(a) ? "added" : "kept") << '\n';
        for (auto a : rec.removed)
            out << method << ',' << replicate << ',' << rec.switch_period << ',' << a << ",removed\n";
    }
}

struct InitialExperiment {
    std::vector<ArmIndex> active;
    TrialLedger ledger;
    AllocationRecord record;
};

/// Arm for each of n runs under equal allocation: floor(n/K) runs per arm, with
/// the n mod K leftover runs given to distinct, uniformly chosen arms.
template <class URBG>
std::vector<ArmIndex> equal_allocation(std::span<const ArmIndex> active, int n, URBG& rng) {
    detail::require(!active.empty(), "active arm set is empty");
    detail::require(n >= 0, "run count must be nonnegative");
    const int k = static_cast<int>(active.size());
    std::vector<int> runs(static_cast<std::size_t>(k), n / k);
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n % k; ++i) runs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] += 1;
    std::vector<ArmIndex> plan;
    plan.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < runs[static_cast<std::size_t>(i)]; ++j) plan.push_back(active[static_cast<std::size_t>(i)]);
    return plan;
}

/// Picks the first active set and spends n runs on it before the first model
/// period, using equal_allocation. Rows are logged as switch 1, period 0.
template <class URBG>
InitialExperiment initialize(const FactorSpace& space, const TsecConfig& config, const BernoulliEnv& env, URBG& rng) {
    config.validate(space);
    detail::require(env.num_arms() == space.num_arms(), "environment size does not match the arm space");
    InitialExperiment init;
    init.active = initial_arm_set(space, config.K, config.init_design, rng);
    init.record.switch_period = 1;
    init.record.period = 0;
    for (ArmIndex arm : equal_allocation(std::span<const ArmIndex>(init.active), config.n, rng)) {
        const int y = pull(env, arm, rng);
        init.ledger.add(arm, 1, 0, y);
        init.record.record(arm, y);
    }
    return init;
}

/// Arm chosen by each draw: the active arm with the largest mu_a(draw), ties uniform.
///
/// Arms are compared on the linear-predictor scale; Phi is strictly increasing,
/// so this is the same argmax without ties from Phi saturating at 0 or 1.
template <class URBG>
std::vector<ArmIndex> thompson_choices(std::span<const EffectVector> draws, std::span<const ArmIndex> active,
                                       const DesignLayout& layout, URBG& rng) {
    if (active.empty()) throw ValidationError("active arm set is empty");
    detail::require(!draws.empty(), "allocation needs at least one posterior draw");
    std::vector<Arm> arms;
    arms.reserve(active.size());
    for (auto a : active) arms.push_back(decode_arm(layout.space(), a));
    const Eigen::MatrixXd eta = layout.encode(arms) * stack_draws(draws);
    std::vector<ArmIndex> out;
    out.reserve(draws.size());
    std::vector<double> column(active.size());
    for (Eigen::Index j = 0; j < eta.cols(); ++j) {
        for (Eigen::Index i = 0; i < eta.rows(); ++i) column[static_cast<std::size_t>(i)] = eta(i, j);
        out.push_back(active[detail::argmax_random_ties<URBG>(column, rng)]);
    }
    return out;
}

/// Plays one run per draw on the arm that draw favours and logs the rewards.
template <class URBG>
AllocationRecord allocate_period(std::span<const EffectVector> draws, std::span<const ArmIndex> active,
                                 const DesignLayout& layout, const BernoulliEnv& env, int switch_period, int period,
                                 TrialLedger& ledger, URBG& rng) {
    AllocationRecord rec;
    rec.switch_period = switch_period;
    rec.period = period;
    for (ArmIndex arm : thompson_choices(draws, active, layout, rng)) {
        const int y = pull(env, arm, rng);
        ledger.add(arm, switch_period, period, y);
        rec.record(arm, y);
    }
    return rec;
}

/// 1-based order statistic used as the empirical (1 - alpha) quantile of `count` values.
inline std::size_t quantile_rank(double alpha, std::size_t count) {
    detail::require(count >= 1, "quantile of an empty sample");
    // guard against (1 - alpha) * count landing a hair above an integer
    const double x = (1.0 - alpha) * static_cast<double>(count);
    auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
    return std::clamp<std::size_t>(k, 1, count);
}

/// Per-row (1 - alpha) empirical quantile of a [arms x draws] score matrix.
inline std::vector<double> row_quantiles(const Eigen::MatrixXd& scores, double alpha) {
    const auto cols = static_cast<std::size_t>(scores.cols());
    const std::size_t k = quantile_rank(alpha, cols);
    std::vector<double> out(static_cast<std::size_t>(scores.rows()));
    std::vector<double> row(cols);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) row[j] = scores(i, static_cast<Eigen::Index>(j));
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
        out[static_cast<std::size_t>(i)] = row[k - 1];
    }
    return out;
}

/// K-argmax of per-arm upper quantiles over a [arms x draws] score matrix whose
/// rows correspond to `arms`. Ties broken uniformly at random.
template <class URBG>
std::vector<ArmIndex> select_from_scores(const Eigen::MatrixXd& scores, std::span<const ArmIndex> arms, int k,
                                         double alpha, URBG& rng) {
    detail::require(scores.rows() == static_cast<Eigen::Index>(arms.size()), "score rows do not match arms");
    detail::require(scores.cols() >= 1, "arm selection needs at least one draw");
    detail::require(k >= 1 && static_cast<std::size_t>(k) <= arms.size(), "K must lie in [1, N]");
    const std::vector<double> q = row_quantiles(scores, alpha);
    std::vector<ArmIndex> out;
    for (auto i : detail::top_k_random_ties<URBG>(q, static_cast<std::size_t>(k), rng)) out.push_back(arms[i]);
    return out;
}

/// Active set for the next switch: the K arms of the whole space with the largest
/// posterior (1 - alpha) quantile of mu_a. Scores are evaluated on the linear
/// predictor scale in blocks of arms; quantiles and ranks are unchanged by Phi.
template <class URBG>
std::vector<ArmIndex> select_arm_set(std::span<const EffectVector> draws, const DesignLayout& layout, int k,
                                     double alpha, URBG& rng) {
    const FactorSpace& space = layout.space();
    detail::require(k >= 1 && static_cast<std::uint64_t>(k) <= space.num_arms(), "K must lie in [1, N]");
    const Eigen::MatrixXd b = stack_draws(draws);
    detail::require(b.rows() == layout.dimension(), "draw dimension does not match layout");
    const auto n_arms = static_cast<std::size_t>(space.num_arms());
    std::vector<double> q(n_arms);
    constexpr std::size_t block = 2048;
    std::vector<Arm> arms;
    for (std::size_t start = 0; start < n_arms; start += block) {
        const std::size_t end = std::min(n_arms, start + block);
        arms.clear();
        for (std::size_t a = start; a < end; ++a) arms.push_back(decode_arm(space, static_cast<ArmIndex>(a)));
        const Eigen::MatrixXd eta = layout.encode(arms) * b;
        const auto part = row_quantiles(eta, alpha);
        std::copy(part.begin(), part.end(), q.begin() + static_cast<std::ptrdiff_t>(start));
    }
    std::vector<ArmIndex> out;
    for (auto i : detail::top_k_random_ties<URBG>(q, static_cast<std::size_t>(k), rng))
        out.push_back(static_cast<ArmIndex>(i));
    return out;
}

struct TsecResult {
    /// The equal-allocation warm-up; not part of the regret series.
    AllocationRecord initial;
    RegretSeries regret;
    SwitchHistory history;
    std::vector<AllocationRecord> records;
    TrialLedger ledger;
};

/// Full TSEC loop over S switches of T periods with n runs each.
///
/// After the equal-allocation warm-up, every period refits the chain on all data
/// so far, thins it to n draws and allocates. At the end of each switch block
/// except the last, a chain fitted to all data picks the next active set over the
/// whole arm space. The regret series covers the S*T model-driven periods.
template <class URBG>
TsecResult run_tsec(const FactorSpace& space, const BernoulliEnv& env, const TsecConfig& config, URBG& rng) {
    config.validate(space);
    const DesignLayout layout(space);
    TsecResult result;
    InitialExperiment init = initialize(space, config, env, rng);
    std::vector<ArmIndex> active = std::move(init.active);
    result.ledger = std::move(init.ledger);
    result.initial = std::move(init.record);
    result.history.push_back(make_switch_record(1, {}, active));

    std::optional<EffectVector> warm;
    auto refit = [&]() {
        PosteriorChain chain = run_chain(result.ledger, layout, config.mcmc, warm, rng);
        if (config.warm_start) warm = chain.mean_beta();
        return chain;
    };

    for (int s = 1; s <= config.S; ++s) {
        for (int t = 1; t <= config.T; ++t) {
            const PosteriorChain chain = refit();
            const auto draws = thin(chain, static_cast<std::size_t>(config.n), rng);
            result.records.push_back(allocate_period(draws, active, layout, env, s, t, result.ledger, rng));
        }
        if (s < config.S) {
            const PosteriorChain chain = refit();
            const auto betas = chain_betas(chain);
            std::vector<ArmIndex> next = select_arm_set(betas, layout, config.K, config.alpha, rng);
            result.history.push_back(make_switch_record(s + 1, active, next));
            active = std::move(next);
        }
    }
    result.regret = cumulative_regret(env, result.records);
    return result;
}

} // namespace tsec
