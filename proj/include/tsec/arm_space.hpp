#pragma once

// Factorial arm spaces: arm indexing, baseline-constrained indicator coding and
// initial designs (random subsets, random regular two-level fractions).

#include "tsec/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace tsec {

inline constexpr std::uint64_t kMaxArms = std::uint64_t{1} << 20;

using ArmIndex = std::uint32_t;

class FactorSpace {
public:
    FactorSpace() = default;

    explicit FactorSpace(std::vector<int> levels) : levels_(std::move(levels)) {
        detail::require(!levels_.empty(), "factor space needs at least one factor");
        std::uint64_t n = 1;
        for (int l : levels_) {
            detail::require(l >= 2, "every factor needs at least two levels");
            n *= static_cast<std::uint64_t>(l);
            if (n > kMaxArms)
                throw CapacityError("factor space has more than 2^20 arms");
        }
        num_arms_ = n;
    }

    /// M binary factors.
    static FactorSpace binary(int num_factors) {
        detail::require(num_factors >= 1, "factor space needs at least one factor");
        return FactorSpace(std::vector<int>(static_cast<std::size_t>(num_factors), 2));
    }

    int num_factors() const noexcept { return static_cast<int>(levels_.size()); }
    int levels(int factor) const { return levels_.at(static_cast<std::size_t>(factor)); }
    const std::vector<int>& levels() const noexcept { return levels_; }
    std::uint64_t num_arms() const noexcept { return num_arms_; }

    bool all_binary() const noexcept {
        return std::all_of(levels_.begin(), levels_.end(), [](int l) { return l == 2; });
    }

    friend bool operator==(const FactorSpace&, const FactorSpace&) = default;

private:
    std::vector<int> levels_;
    std::uint64_t num_arms_ = 0;
};

/// A level combination. Levels are 1-based; the index is mixed-radix with
/// factor 1 as the most significant digit.
struct Arm {
    std::vector<int> levels;
    ArmIndex index = 0;

    friend bool operator==(const Arm& a, const Arm& b) { return a.index == b.index && a.levels == b.levels; }
};

inline Arm decode_arm(const FactorSpace& space, ArmIndex index) {
    if (index >= space.num_arms()) throw ValidationError("arm index out of range");
    Arm arm;
    arm.index = index;
    arm.levels.resize(static_cast<std::size_t>(space.num_factors()));
    std::uint64_t rest = index;
    for (int m = space.num_factors() - 1; m >= 0; --m) {
        const auto base = static_cast<std::uint64_t>(space.levels(m));
        arm.levels[static_cast<std::size_t>(m)] = static_cast<int>(rest % base) + 1;
        rest /= base;
    }
    return arm;
}

inline ArmIndex encode_index(const FactorSpace& space, std::span<const int> levels) {
    if (static_cast<int>(levels.size()) != space.num_factors())
        throw ValidationError("arm has " + std::to_string(levels.size()) + " levels, space has " +
                              std::to_string(space.num_factors()) + " factors");
    std::uint64_t index = 0;
    for (int m = 0; m < space.num_factors(); ++m) {
        const int x = levels[static_cast<std::size_t>(m)];
        if (x < 1 || x > space.levels(m))
            throw ValidationError("level " + std::to_string(x) + " out of range for factor " + std::to_string(m + 1));
        index = index * static_cast<std::uint64_t>(space.levels(m)) + static_cast<std::uint64_t>(x - 1);
    }
    return static_cast<ArmIndex>(index);
}

inline Arm make_arm(const FactorSpace& space, std::vector<int> levels) {
    const ArmIndex index = encode_index(space, levels);
    return Arm{std::move(levels), index};
}

inline std::vector<Arm> enumerate_arms(const FactorSpace& space) {
    if (space.num_arms() > kMaxArms) throw CapacityError("factor space has more than 2^20 arms");
    std::vector<Arm> arms;
    arms.reserve(space.num_arms());
    for (std::uint64_t i = 0; i < space.num_arms(); ++i) arms.push_back(decode_arm(space, static_cast<ArmIndex>(i)));
    return arms;
}

enum class Tier { Intercept, MainEffect, TwoFactor };

/// One model column. For main effects only (factor_a, level_a) is meaningful.
struct Column {
    Tier tier = Tier::Intercept;
    int factor_a = -1;
    int level_a = 0;
    int factor_b = -1;
    int level_b = 0;
};

/// Feature columns of the two-factor-interaction probit model under baseline
/// constraints: level-1 effects have no column.
class DesignLayout {
public:
    DesignLayout() = default;

    explicit DesignLayout(FactorSpace space) : space_(std::move(space)) {
        const int m_count = space_.num_factors();
        columns_.push_back(Column{});
        me_offset_.resize(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m) {
            me_offset_[static_cast<std::size_t>(m)] = static_cast<int>(columns_.size());
            for (int l = 2; l <= space_.levels(m); ++l) columns_.push_back(Column{Tier::MainEffect, m, l, -1, 0});
        }
        num_me_ = static_cast<int>(columns_.size()) - 1;
        pair_offset_.assign(static_cast<std::size_t>(m_count * m_count), -1);
        for (int a = 0; a < m_count; ++a) {
            for (int b = a + 1; b < m_count; ++b) {
                pair_offset_[static_cast<std::size_t>(a * m_count + b)] = static_cast<int>(columns_.size());
                for (int la = 2; la <= space_.levels(a); ++la)
                    for (int lb = 2; lb <= space_.levels(b); ++lb)
                        columns_.push_back(Column{Tier::TwoFactor, a, la, b, lb});
            }
        }
        num_tfi_ = static_cast<int>(columns_.size()) - 1 - num_me_;
    }

    const FactorSpace& space() const noexcept { return space_; }
    int dimension() const noexcept { return static_cast<int>(columns_.size()); }
    int num_main_effects() const noexcept { return num_me_; }
    int num_two_factor() const noexcept { return num_tfi_; }
    const std::vector<Column>& columns() const noexcept { return columns_; }
    Tier tier(int column) const { return columns_.at(static_cast<std::size_t>(column)).tier; }

    int main_effect_column(int factor, int level) const {
        if (level < 2) return -1;
        return me_offset_.at(static_cast<std::size_t>(factor)) + level - 2;
    }

    int two_factor_column(int fa, int la, int fb, int lb) const {
        if (fa > fb) {
            std::swap(fa, fb);
            std::swap(la, lb);
        }
        if (la < 2 || lb < 2 || fa == fb) return -1;
        const int base = pair_offset_.at(static_cast<std::size_t>(fa * space_.num_factors() + fb));
        return base + (la - 2) * (space_.levels(fb) - 1) + (lb - 2);
    }

    /// Columns equal to one for the given levels, ascending. Always starts with 0.
    std::vector<int> active_columns(std::span<const int> levels) const {
        validate(levels);
        std::vector<int> cols{0};
        const int m_count = space_.num_factors();
        for (int m = 0; m < m_count; ++m) {
            const int c = main_effect_column(m, levels[static_cast<std::size_t>(m)]);
            if (c >= 0) cols.push_back(c);
        }
        for (int a = 0; a < m_count; ++a)
            for (int b = a + 1; b < m_count; ++b) {
                const int c = two_factor_column(a, levels[static_cast<std::size_t>(a)], b, levels[static_cast<std::size_t>(b)]);
                if (c >= 0) cols.push_back(c);
            }
        return cols;
    }

    Eigen::VectorXd encode(std::span<const int> levels) const {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(dimension());
        for (int c : active_columns(levels)) row[c] = 1.0;
        return row;
    }

    Eigen::VectorXd encode(const Arm& arm) const { return encode(std::span<const int>(arm.levels)); }

    /// Dense [arms x p] indicator matrix.
    Eigen::MatrixXd encode(std::span<const Arm> arms) const {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arms.size()), dimension());
        for (std::size_t i = 0; i < arms.size(); ++i)
            for (int c : active_columns(arms[i].levels)) x(static_cast<Eigen::Index>(i), c) = 1.0;
        return x;
    }

private:
    void validate(std::span<const int> levels) const {
        if (static_cast<int>(levels.size()) != space_.num_factors())
            throw ValidationError("arm has wrong number of factors");
        for (int m = 0; m < space_.num_factors(); ++m) {
            const int x = levels[static_cast<std::size_t>(m)];
            if (x < 1 || x > space_.levels(m))
                throw ValidationError("level " + std::to_string(x) + " out of range for factor " + std::to_string(m + 1));
        }
    }

    FactorSpace space_;
    std::vector<Column> columns_;
    std::vector<int> me_offset_;
    std::vector<int> pair_offset_;
    int num_me_ = 0;
    int num_tfi_ = 0;
};

/// 1 + sum(L_m - 1) + sum_{m<m'} (L_m - 1)(L_m' - 1)
inline int layout_dimension(const FactorSpace& space) {
    long me = 0;
    long tfi = 0;
    long prefix = 0;
    for (int l : space.levels()) {
        me += l - 1;
        tfi += prefix * (l - 1);
        prefix += l - 1;
    }
    return static_cast<int>(1 + me + tfi);
}

inline Eigen::VectorXd encode_arm(const DesignLayout& layout, const Arm& arm) { return layout.encode(arm); }

/// K distinct arms, uniform over K-subsets, in random order (Floyd's algorithm).
template <class URBG>
std::vector<Arm> random_arm_subset(const FactorSpace& space, std::uint64_t k, URBG& rng) {
    const std::uint64_t n = space.num_arms();
    if (k < 1 || k > n)
        throw ValidationError("subset size " + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::uint64_t> picked;
    picked.reserve(k);
    for (std::uint64_t j = n - k; j < n; ++j) {
        const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
        const std::uint64_t v = chosen.contains(t) ? j : t;
        chosen.insert(v);
        picked.push_back(v);
    }
    std::shuffle(picked.begin(), picked.end(), rng);
    std::vector<Arm> arms;
    arms.reserve(k);
    for (auto v : picked) arms.push_back(decode_arm(space, static_cast<ArmIndex>(v)));
    return arms;
}

/// Random regular 2^(M-q) fraction of an all-binary space.
///
/// M-q basic factors are drawn at random and run in full factorial; each of the
/// q remaining factors is aliased with the product of a random subset (size >= 2)
/// of basic columns, resampled until all generator words are distinct. Coded
/// -1 maps to level 1 and +1 to level 2.
template <class URBG>
std::vector<Arm> random_regular_fraction(const FactorSpace& space, int q, URBG& rng) {
    detail::require(space.all_binary(), "regular fractions need an all two-level space");
    const int m_count = space.num_factors();
    detail::require(q >= 1 && q < m_count, "fraction power q must satisfy 1 <= q < M");
    const int basic = m_count - q;
    // words of size >= 2 over `basic` columns
    const std::uint64_t available = (std::uint64_t{1} << basic) - 1 - static_cast<std::uint64_t>(basic);
    detail::require(static_cast<std::uint64_t>(q) <= available,
                    "not enough distinct generator words for a 2^(" + std::to_string(m_count) + "-" +
                        std::to_string(q) + ") fraction");

    std::vector<int> factors(static_cast<std::size_t>(m_count));
    std::iota(factors.begin(), factors.end(), 0);
    std::shuffle(factors.begin(), factors.end(), rng);
    const std::vector<int> basic_factors(factors.begin(), factors.begin() + basic);
    const std::vector<int> added_factors(factors.begin() + basic, factors.end());

    std::vector<std::uint32_t> words;
    std::uniform_int_distribution<std::uint32_t> word_dist(0, (1u << basic) - 1);
    while (static_cast<int>(words.size()) < q) {
        const std::uint32_t w = word_dist(rng);
        if (std::popcount(w) < 2) continue;
        if (std::find(words.begin(), words.end(), w) != words.end()) continue;
        words.push_back(w);
    }

    const std::uint32_t runs = 1u << basic;
    std::vector<Arm> arms;
    arms.reserve(runs);
    for (std::uint32_t run = 0; run < runs; ++run) {
        // bit j of `run` set means basic column j is at +1
        std::vector<int> levels(static_cast<std::size_t>(m_count));
        for (int j = 0; j < basic; ++j)
            levels[static_cast<std::size_t>(basic_factors[static_cast<std::size_t>(j)])] = ((run >> j) & 1u) ? 2 : 1;
        for (int g = 0; g < q; ++g) {
            // product of +-1 entries is -1 iff an odd number of them are -1
            const int minus = std::popcount(words[static_cast<std::size_t>(g)] & ~run);
            levels[static_cast<std::size_t>(added_factors[static_cast<std::size_t>(g)])] = (minus % 2 == 0) ? 2 : 1;
        }
        arms.push_back(make_arm(space, std::move(levels)));
    }
    return arms;
}

inline void write_arms_csv(std::ostream& out, const FactorSpace& space, std::span<const Arm> arms) {
    out << "arm_index";
    for (int m = 1; m <= space.num_factors(); ++m) out << ",x_" << m;
    out << '\n';
    for (const Arm& a : arms) {
        out << a.index;
        for (int x : a.levels) out << ',' << x;
        out << '\n';
    }
}

} // namespace tsec
