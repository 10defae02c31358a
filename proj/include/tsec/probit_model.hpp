#pragma once

// Bayesian probit two-factor-interaction model with an effect-hierarchy prior:
//   beta_0 ~ N(0, tau2), ME ~ N(0, tau2 r), 2FI ~ N(0, tau2 r^2),
//   [tau2] prop. to 1/tau2, r ~ Unif(0, 1).
// Posterior sampling uses Albert-Chib data augmentation with one latent per trial.

#include "tsec/arm_space.hpp"
#include "tsec/errors.hpp"
#include "tsec/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tsec {

/// Free coefficients aligned to a DesignLayout.
using EffectVector = Eigen::VectorXd;

struct Hyperparams {
    double tau2 = 1.0;
    double r = 0.5;

    void validate() const {
        detail::require(tau2 > 0.0 && std::isfinite(tau2), "tau2 must be positive");
        detail::require(r > 0.0 && r < 1.0, "r must lie in (0, 1)");
    }
};

/// Per-column prior variance multipliers: 1 (intercept), r (ME), r^2 (2FI).
class PriorMultipliers {
public:
    PriorMultipliers() = default;

    explicit PriorMultipliers(const DesignLayout& layout) {
        tiers_.reserve(static_cast<std::size_t>(layout.dimension()));
        for (const Column& c : layout.columns()) tiers_.push_back(c.tier);
        num_me_ = layout.num_main_effects();
        num_tfi_ = layout.num_two_factor();
    }

    explicit PriorMultipliers(std::vector<Tier> tiers) : tiers_(std::move(tiers)) {
        for (Tier t : tiers_) {
            num_me_ += t == Tier::MainEffect;
            num_tfi_ += t == Tier::TwoFactor;
        }
    }

    int dimension() const noexcept { return static_cast<int>(tiers_.size()); }
    int num_main_effects() const noexcept { return num_me_; }
    int num_two_factor() const noexcept { return num_tfi_; }
    const std::vector<Tier>& tiers() const noexcept { return tiers_; }

    static double multiplier(Tier tier, double r) noexcept {
        switch (tier) {
        case Tier::Intercept: return 1.0;
        case Tier::MainEffect: return r;
        case Tier::TwoFactor: return r * r;
        }
        return 1.0;
    }

    Eigen::VectorXd evaluate(double r) const {
        Eigen::VectorXd c(dimension());
        for (int j = 0; j < dimension(); ++j) c[j] = multiplier(tiers_[static_cast<std::size_t>(j)], r);
        return c;
    }

    /// Prior variances tau2 * c_j(r).
    Eigen::VectorXd variances(const Hyperparams& h) const { return h.tau2 * evaluate(h.r); }

private:
    std::vector<Tier> tiers_;
    int num_me_ = 0;
    int num_tfi_ = 0;
};

struct Trial {
    ArmIndex arm = 0;
    int switch_period = 0;
    int period = 0;
    std::uint8_t reward = 0;
};

struct ArmTally {
    long successes = 0;
    long failures = 0;

    long trials() const noexcept { return successes + failures; }
};

/// Every Bernoulli observation, in arrival order, with cached per-arm tallies.
class TrialLedger {
public:
    void add(ArmIndex arm, int switch_period, int period, int reward) {
        detail::require(reward == 0 || reward == 1, "rewards must be binary");
        rows_.push_back(Trial{arm, switch_period, period, static_cast<std::uint8_t>(reward)});
        auto& t = tallies_[arm];
        (reward ? t.successes : t.failures) += 1;
    }

    const std::vector<Trial>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    ArmTally tally(ArmIndex arm) const {
        auto it = tallies_.find(arm);
        return it == tallies_.end() ? ArmTally{} : it->second;
    }

    const std::unordered_map<ArmIndex, ArmTally>& tallies() const noexcept { return tallies_; }

private:
    std::vector<Trial> rows_;
    std::unordered_map<ArmIndex, ArmTally> tallies_;
};

struct ChainSettings {
    int iterations = 2000;
    int burn_in = 500;
    int stride = 3;
    int r_grid_size = 200;
    /// Starting hyperparameters when they are sampled.
    Hyperparams initial{1.0, 0.5};
    /// When set, tau2 and r are held fixed and only latents and beta are updated.
    std::optional<Hyperparams> fixed;

    void validate() const {
        detail::require(iterations > burn_in && burn_in >= 0, "chain needs iterations > burn_in >= 0");
        detail::require(stride >= 1, "thinning stride must be >= 1");
        detail::require(r_grid_size >= 1, "r grid needs at least one point");
        initial.validate();
        if (fixed) fixed->validate();
    }

    int retained() const noexcept { return (iterations - burn_in) / stride; }
};

struct ChainDraw {
    EffectVector beta;
    double tau2 = 1.0;
    double r = 0.5;
};

struct PosteriorChain {
    std::vector<ChainDraw> draws;
    int iterations = 0;
    int burn_in = 0;
    int stride = 1;
    /// Number of tau2 updates that hit the all-zero-beta fallback.
    int degenerate_tau2 = 0;

    std::size_t size() const noexcept { return draws.size(); }

    EffectVector mean_beta() const {
        detail::require(!draws.empty(), "empty chain");
        EffectVector m = EffectVector::Zero(draws.front().beta.size());
        for (const auto& d : draws) m += d.beta;
        return m / static_cast<double>(draws.size());
    }
};

/// Called once per iteration with the freshly drawn latents (ledger order).
using LatentHook = std::function<void(int iteration, std::span<const double> latents, const TrialLedger& ledger)>;

inline double mu_of_arm(const EffectVector& beta, const Eigen::VectorXd& row) {
    if (beta.size() != row.size())
        throw ValidationError("feature row has length " + std::to_string(row.size()) + ", beta has " +
                              std::to_string(beta.size()));
    return normal_cdf(row.dot(beta));
}

struct Tau2Draw {
    double value = 1.0;
    bool degenerate = false;
};

/// Inverse-gamma full conditional of tau2: shape p/2, rate sum_j beta_j^2 / (2 c_j(r)).
inline double tau2_rate(const EffectVector& beta, const PriorMultipliers& prior, double r) {
    detail::require(beta.size() == prior.dimension(), "beta does not match prior dimension");
    double rate = 0.0;
    for (int j = 0; j < beta.size(); ++j)
        rate += beta[j] * beta[j] / PriorMultipliers::multiplier(prior.tiers()[static_cast<std::size_t>(j)], r);
    return 0.5 * rate;
}

template <class URBG>
Tau2Draw sample_tau2(const EffectVector& beta, const PriorMultipliers& prior, double r, URBG& rng) {
    detail::require(r > 0.0 && r < 1.0, "r must lie in (0, 1)");
    const double shape = 0.5 * static_cast<double>(beta.size());
    const double rate = tau2_rate(beta, prior, r);
    if (!(rate > 0.0)) {
        // log-uniform on [1e-6, 1e6], i.e. the 1/tau2 prior truncated to that range
        const double u = uniform_open(rng);
        return Tau2Draw{std::exp(std::log(1e-6) + u * (std::log(1e6) - std::log(1e-6))), true};
    }
    const double precision = std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
    return Tau2Draw{1.0 / precision, false};
}

/// Unnormalized log full conditional of r at the given grid point.
inline double log_r_conditional(double r, double me_sumsq, double tfi_sumsq, int num_me, int num_tfi, double tau2) {
    const double lr = std::log(r);
    return -0.5 * num_me * lr - num_tfi * lr - me_sumsq / (2.0 * tau2 * r) - tfi_sumsq / (2.0 * tau2 * r * r);
}

/// Grid Gibbs step for r over midpoints (k - 1/2) / grid_size.
template <class URBG>
double sample_r(const EffectVector& beta, const PriorMultipliers& prior, double tau2, int grid_size, URBG& rng) {
    detail::require(tau2 > 0.0, "tau2 must be positive");
    detail::require(grid_size >= 1, "r grid needs at least one point");
    detail::require(beta.size() == prior.dimension(), "beta does not match prior dimension");
    double me_ss = 0.0;
    double tfi_ss = 0.0;
    for (int j = 0; j < beta.size(); ++j) {
        const Tier t = prior.tiers()[static_cast<std::size_t>(j)];
        if (t == Tier::MainEffect) me_ss += beta[j] * beta[j];
        else if (t == Tier::TwoFactor) tfi_ss += beta[j] * beta[j];
    }
    std::vector<double> logf(static_cast<std::size_t>(grid_size));
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_size; ++k) {
        const double r = (k + 0.5) / grid_size;
        const double v = log_r_conditional(r, me_ss, tfi_ss, prior.num_main_effects(), prior.num_two_factor(), tau2);
        logf[static_cast<std::size_t>(k)] = v;
        if (std::isfinite(v) && v > peak) peak = v;
    }
    if (!std::isfinite(peak)) throw SamplerError("r full conditional is not finite anywhere on the grid");
    double total = 0.0;
    for (double& v : logf) {
        v = std::isfinite(v) ? std::exp(v - peak) : 0.0;
        total += v;
    }
    double u = uniform_open(rng) * total;
    for (int k = 0; k < grid_size; ++k) {
        u -= logf[static_cast<std::size_t>(k)];
        if (u <= 0.0) return (k + 0.5) / grid_size;
    }
    for (int k = grid_size - 1; k >= 0; --k)
        if (logf[static_cast<std::size_t>(k)] > 0.0) return (k + 0.5) / grid_size;
    return 0.5;
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> factor_precision(Eigen::MatrixXd q) {
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    if (llt.info() == Eigen::Success) return llt;
    q.diagonal().array() += 1e-10;
    llt.compute(q);
    if (llt.info() != Eigen::Success) {
        throw SamplerError("beta conditional precision is not positive definite (p = " + std::to_string(q.rows()) +
                           ", min diagonal = " + std::to_string(q.diagonal().minCoeff()) + ")");
    }
    return llt;
}

} // namespace detail

/// Data-augmentation Gibbs sampler for the probit interaction model.
///
/// Each sweep draws one truncated-normal latent per trial, then beta from its
/// Gaussian conditional, then tau2 and r (unless `settings.fixed` is set).
/// Trials are grouped by arm so that X'X and X'z are formed from the distinct
/// arm rows; the latents themselves are not aggregated.
template <class URBG>
PosteriorChain run_chain(const TrialLedger& ledger, const DesignLayout& layout, const ChainSettings& settings,
                         const std::optional<EffectVector>& init, URBG& rng, const LatentHook& hook = {}) {
    settings.validate();
    if (ledger.empty()) throw ValidationError("cannot fit the probit model to an empty ledger");
    const int p = layout.dimension();
    const PriorMultipliers prior(layout);

    // distinct arms and their encoded rows
    std::unordered_map<ArmIndex, int> slot_of;
    std::vector<ArmIndex> slot_arm;
    std::vector<int> trial_slot;
    trial_slot.reserve(ledger.size());
    for (const Trial& tr : ledger.rows()) {
        auto [it, inserted] = slot_of.try_emplace(tr.arm, static_cast<int>(slot_arm.size()));
        if (inserted) slot_arm.push_back(tr.arm);
        trial_slot.push_back(it->second);
    }
    const auto u_count = static_cast<Eigen::Index>(slot_arm.size());
    Eigen::MatrixXd xu = Eigen::MatrixXd::Zero(u_count, p);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(u_count);
    for (Eigen::Index i = 0; i < u_count; ++i) {
        const Arm arm = decode_arm(layout.space(), slot_arm[static_cast<std::size_t>(i)]);
        for (int c : layout.active_columns(arm.levels)) xu(i, c) = 1.0;
    }
    for (int s : trial_slot) counts[s] += 1.0;
    const Eigen::MatrixXd gram = xu.transpose() * counts.asDiagonal() * xu;

    EffectVector beta = EffectVector::Zero(p);
    if (init) {
        detail::require(init->size() == p, "initial beta has the wrong dimension");
        beta = *init;
    }
    Hyperparams hyper = settings.fixed ? *settings.fixed : settings.initial;

    PosteriorChain chain;
    chain.iterations = settings.iterations;
    chain.burn_in = settings.burn_in;
    chain.stride = settings.stride;
    chain.draws.reserve(static_cast<std::size_t>(settings.retained()));

    std::vector<double> latents(ledger.size());
    Eigen::VectorXd zsum(u_count);
    Eigen::VectorXd above_tail(u_count);
    Eigen::VectorXd below_tail(u_count);
    Eigen::VectorXd eps(p);
    std::normal_distribution<double> std_normal(0.0, 1.0);

    for (int iter = 1; iter <= settings.iterations; ++iter) {
        // (a) latents
        const Eigen::VectorXd eta = xu * beta;
        for (Eigen::Index i = 0; i < u_count; ++i) {
            above_tail[i] = normal_cdf(eta[i]);
            below_tail[i] = normal_cdf(-eta[i]);
        }
        zsum.setZero();
        const auto& rows = ledger.rows();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const int s = trial_slot[i];
            const double m = eta[s];
            // y = 1: z = m + x with x >= -m; y = 0: z = m - x with x >= m
            const double z = rows[i].reward ? m + standard_normal_above(-m, above_tail[s], rng)
                                            : m - standard_normal_above(m, below_tail[s], rng);
            latents[i] = z;
            zsum[s] += z;
        }
        if (hook) hook(iter, latents, ledger);

        // (b) beta | z, tau2, r
        Eigen::MatrixXd q = gram;
        const Eigen::VectorXd var = prior.variances(hyper);
        q.diagonal().array() += var.array().inverse();
        const auto llt = detail::factor_precision(std::move(q));
        const Eigen::VectorXd mean = llt.solve(xu.transpose() * zsum);
        for (int j = 0; j < p; ++j) eps[j] = std_normal(rng);
        beta = mean + llt.matrixU().solve(eps);
        if (!beta.allFinite()) throw SamplerError("non-finite beta draw at iteration " + std::to_string(iter));

        // (c), (d) hyperparameters
        if (!settings.fixed) {
            const Tau2Draw t = sample_tau2(beta, prior, hyper.r, rng);
            hyper.tau2 = t.value;
            chain.degenerate_tau2 += t.degenerate;
            hyper.r = sample_r(beta, prior, hyper.tau2, settings.r_grid_size, rng);
        }

        if (iter > settings.burn_in && (iter - settings.burn_in) % settings.stride == 0)
            chain.draws.push_back(ChainDraw{beta, hyper.tau2, hyper.r});
    }
    return chain;
}

/// n draws at evenly spaced positions through the retained draws, in random order.
/// With fewer retained draws than requested, positions wrap around.
template <class URBG>
std::vector<EffectVector> thin(const PosteriorChain& chain, std::size_t n, URBG& rng) {
    if (chain.draws.empty()) throw ValidationError("cannot thin an empty chain");
    const std::size_t retained = chain.draws.size();
    std::vector<EffectVector> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t pos = retained >= n ? (j * retained) / n : j % retained;
        out.push_back(chain.draws[pos].beta);
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

/// Stack draws as the columns of a [p x draws] matrix.
inline Eigen::MatrixXd stack_draws(std::span<const EffectVector> draws) {
    detail::require(!draws.empty(), "no posterior draws");
    const auto p = draws.front().size();
    Eigen::MatrixXd b(p, static_cast<Eigen::Index>(draws.size()));
    for (std::size_t k = 0; k < draws.size(); ++k) {
        detail::require(draws[k].size() == p, "posterior draws have inconsistent dimension");
        b.col(static_cast<Eigen::Index>(k)) = draws[k];
    }
    return b;
}

inline Eigen::MatrixXd normal_cdf(const Eigen::MatrixXd& eta) {
    return eta.unaryExpr([](double v) { return normal_cdf(v); });
}

/// [arms x draws] matrix of mu_a(beta_k) = Phi(x_a . beta_k).
inline Eigen::MatrixXd posterior_mu_matrix(std::span<const EffectVector> draws, std::span<const Arm> arms,
                                           const DesignLayout& layout) {
    detail::require(!arms.empty(), "no arms");
    const Eigen::MatrixXd b = stack_draws(draws);
    if (b.rows() != layout.dimension())
        throw ValidationError("draw dimension " + std::to_string(b.rows()) + " does not match layout dimension " +
                              std::to_string(layout.dimension()));
    return normal_cdf(Eigen::MatrixXd(layout.encode(arms) * b));
}

inline std::vector<EffectVector> chain_betas(const PosteriorChain& chain) {
    std::vector<EffectVector> out;
    out.reserve(chain.draws.size());
    for (const auto& d : chain.draws) out.push_back(d.beta);
    return out;
}

/// Trace dump: iteration, tau2, r, beta_0 .. beta_{p-1}.
inline void write_chain_csv(std::ostream& out, const PosteriorChain& chain) {
    const auto p = chain.draws.empty() ? 0 : chain.draws.front().beta.size();
    out << "iteration,tau2,r";
    for (Eigen::Index j = 0; j < p; ++j) out << ",beta_" << j;
    out << '\n';
    out.precision(17);
    for (std::size_t k = 0; k < chain.draws.size(); ++k) {
        const auto& d = chain.draws[k];
        out << chain.burn_in + chain.stride * static_cast<int>(k + 1) << ',' << d.tau2 << ',' << d.r;
        for (Eigen::Index j = 0; j < p; ++j) out << ',' << d.beta[j];
        out << '\n';
    }
}

} // namespace tsec
