#pragma once

// Simulated truths for website-style studies: spike-and-slab main effects, and
// two- and three-factor interactions whose activity depends on how many parent
// main effects are active (effect heredity). Same baseline indicator coding as
// the fitted model, extended to triples.

#include "tsec/arm_space.hpp"
#include "tsec/bandit.hpp"
#include "tsec/errors.hpp"
#include "tsec/random.hpp"

#include <array>
#include <span>
#include <ostream>
#include <string>
#include <vector>

namespace tsec {

struct SpikeSlab {
    double spike_sd = 1.0;
    double slab_sd = 10.0;
};

struct SpikeSlabSpec {
    SpikeSlab me{1.0, 10.0};
    double me_active = 0.41;
    SpikeSlab tfi{0.278, 2.78};
    /// Activity probability indexed by the number of active parents (0, 1, 2).
    std::array<double, 3> tfi_active{0.0048, 0.045, 0.33};
    SpikeSlab thfi{0.137, 1.37};
    /// Indexed by the number of active parents (0 .. 3).
    std::array<double, 4> thfi_active{0.012, 0.035, 0.067, 0.15};
    double intercept = 0.0;
    /// Multiplies every drawn effect value.
    double effect_scale = 1.0;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        detail::require(prob(me_active), "ME activity probability must lie in [0, 1]");
        for (double p : tfi_active) detail::require(prob(p), "2FI activity probabilities must lie in [0, 1]");
        for (double p : thfi_active) detail::require(prob(p), "3FI activity probabilities must lie in [0, 1]");
        for (const SpikeSlab* s : {&me, &tfi, &thfi})
            detail::require(s->spike_sd > 0.0 && s->slab_sd > 0.0, "spike and slab scales must be positive");
        detail::require(effect_scale > 0.0, "effect scale must be positive");
    }
};

enum class EffectKind { MainEffect = 1, TwoFactor = 2, ThreeFactor = 3 };

/// One free effect cell: factors ascending, each at level >= 2.
struct TruthEffect {
    EffectKind kind = EffectKind::MainEffect;
    std::array<int, 3> factors{-1, -1, -1};
    std::array<int, 3> levels{0, 0, 0};
    bool active = false;
    /// Active parent main effects at draw time (0 for main effects).
    int active_parents = 0;
    double value = 0.0;

    int order() const noexcept { return static_cast<int>(kind); }

    bool applies_to(std::span<const int> arm_levels) const {
        for (int i = 0; i < order(); ++i)
            if (arm_levels[static_cast<std::size_t>(factors[static_cast<std::size_t>(i)])] !=
                levels[static_cast<std::size_t>(i)])
                return false;
        return true;
    }
};

struct TruthEffects {
    FactorSpace space;
    double intercept = 0.0;
    std::vector<TruthEffect> effects;

    double linear_predictor(std::span<const int> arm_levels) const {
        double eta = intercept;
        for (const auto& e : effects)
            if (e.applies_to(arm_levels)) eta += e.value;
        return eta;
    }
};

template <class URBG>
TruthEffects sample_truth(const FactorSpace& space, const SpikeSlabSpec& spec, URBG& rng) {
    spec.validate();
    TruthEffects truth;
    truth.space = space;
    truth.intercept = spec.intercept;
    const int m_count = space.num_factors();

    auto draw_value = [&](const SpikeSlab& ss, bool active) {
        const double sd = active ? ss.slab_sd : ss.spike_sd;
        return spec.effect_scale * sd * standard_normal(rng);
    };
    auto flip = [&](double p) { return std::bernoulli_distribution(p)(rng); };

    // me_active_flag[m][l]
    std::vector<std::vector<bool>> me_flag(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        me_flag[static_cast<std::size_t>(m)].assign(static_cast<std::size_t>(space.levels(m)) + 1, false);
        for (int l = 2; l <= space.levels(m); ++l) {
            TruthEffect e;
            e.kind = EffectKind::MainEffect;
            e.factors[0] = m;
            e.levels[0] = l;
            e.active = flip(spec.me_active);
            e.value = draw_value(spec.me, e.active);
            me_flag[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)] = e.active;
            truth.effects.push_back(e);
        }
    }
    auto parent = [&](int m, int l) { return me_flag[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)] ? 1 : 0; };

    for (int a = 0; a < m_count; ++a)
        for (int b = a + 1; b < m_count; ++b)
            for (int la = 2; la <= space.levels(a); ++la)
                for (int lb = 2; lb <= space.levels(b); ++lb) {
                    TruthEffect e;
                    e.kind = EffectKind::TwoFactor;
                    e.factors = {a, b, -1};
                    e.levels = {la, lb, 0};
                    e.active_parents = parent(a, la) + parent(b, lb);
                    e.active = flip(spec.tfi_active[static_cast<std::size_t>(e.active_parents)]);
                    e.value = draw_value(spec.tfi, e.active);
                    truth.effects.push_back(e);
                }

    for (int a = 0; a < m_count; ++a)
        for (int b = a + 1; b < m_count; ++b)
            for (int c = b + 1; c < m_count; ++c)
                for (int la = 2; la <= space.levels(a); ++la)
                    for (int lb = 2; lb <= space.levels(b); ++lb)
                        for (int lc = 2; lc <= space.levels(c); ++lc) {
                            TruthEffect e;
                            e.kind = EffectKind::ThreeFactor;
                            e.factors = {a, b, c};
                            e.levels = {la, lb, lc};
                            e.active_parents = parent(a, la) + parent(b, lb) + parent(c, lc);
                            e.active = flip(spec.thfi_active[static_cast<std::size_t>(e.active_parents)]);
                            e.value = draw_value(spec.thfi, e.active);
                            truth.effects.push_back(e);
                        }
    return truth;
}

inline double true_mu(const TruthEffects& truth, const Arm& arm) {
    detail::require(static_cast<int>(arm.levels.size()) == truth.space.num_factors(), "arm does not match the truth's space");
    encode_index(truth.space, arm.levels); // validates levels
    return normal_cdf(truth.linear_predictor(arm.levels));
}

inline BernoulliEnv build_env(const TruthEffects& truth, const FactorSpace& space) {
    detail::require(truth.space == space, "truth was drawn for a different arm space");
    std::vector<double> mu(static_cast<std::size_t>(space.num_arms()));
    for (std::size_t a = 0; a < mu.size(); ++a)
        mu[a] = normal_cdf(truth.linear_predictor(decode_arm(space, static_cast<ArmIndex>(a)).levels));
    return BernoulliEnv(std::move(mu));
}

inline const char* to_string(EffectKind k) {
    switch (k) {
    case EffectKind::MainEffect: return "ME";
    case EffectKind::TwoFactor: return "2FI";
    case EffectKind::ThreeFactor: return "3FI";
    }
    return "?";
}

/// effect_kind,factors,levels,active,value with 1-based ';'-joined factor lists.
inline void write_truth_csv(std::ostream& out, const TruthEffects& truth) {
    const auto old = out.precision(17);
    out << "effect_kind,factors,levels,active,value\n";
    out << "intercept,,,1," << truth.intercept << '\n';
    for (const auto& e : truth.effects) {
        out << to_string(e.kind) << ',';
        for (int i = 0; i < e.order(); ++i) out << (i ? ";" : "") << e.factors[static_cast<std::size_t>(i)] + 1;
        out << ',';
        for (int i = 0; i < e.order(); ++i) out << (i ? ";" : "") << e.levels[static_cast<std::size_t>(i)];
        out << ',' << (e.active ? 1 : 0) << ',' << e.value << '\n';
    }
    out.precision(old);
}

} // namespace tsec
