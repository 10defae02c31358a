#pragma once

// Experiment orchestration: INI run configs, replicated simulations, sweeps, the
// portfolio backtest, and CSV emission.

#include "tsec/arm_space.hpp"
#include "tsec/bandit.hpp"
#include "tsec/benchmarks.hpp"
#include "tsec/errors.hpp"
#include "tsec/ground_truth.hpp"
#include "tsec/portfolio.hpp"
#include "tsec/random.hpp"
#include "tsec/tsec_engine.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tsec::experiment {

namespace fs = std::filesystem;

/// Seed streams per replicate. Truth draws use stream 0.
enum class Method { TSEC = 1, B1 = 2, B2 = 3, B3 = 4 };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::TSEC: return "TSEC";
    case Method::B1: return "B1";
    case Method::B2: return "B2";
    case Method::B3: return "B3";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "TSEC") return Method::TSEC;
    if (s == "B1") return Method::B1;
    if (s == "B2") return Method::B2;
    if (s == "B3") return Method::B3;
    throw ValidationError("unknown method '" + s + "' (expected TSEC, B1, B2 or B3)");
}

inline constexpr std::uint64_t kTruthStream = 0;

struct SweepSpec {
    /// "K" (arm budget) or "M" (number of binary factors).
    std::string parameter;
    std::vector<int> values;
};

struct BacktestSetup {
    std::string prices;
    std::string industries;
    double max_missing = 0.02;
    portfolio::BacktestConfig config;
};

struct RunConfig {
    std::uint64_t seed = 1;
    int replicates = 20;
    std::string out = "out";
    int workers = 1;
    bool dump_truth = true;
    std::vector<Method> methods{Method::TSEC, Method::B1, Method::B2, Method::B3};
    FactorSpace space = FactorSpace::binary(6);
    /// K, n, T and S here are shared with the benchmarks.
    TsecConfig tsec;
    BenchmarkConfig bench;
    SpikeSlabSpec truth;
    std::optional<SweepSpec> sweep;
    std::optional<BacktestSetup> backtest;

    BenchmarkConfig benchmark_config(BenchmarkVariant v) const {
        BenchmarkConfig b = bench;
        b.variant = v;
        b.K = tsec.K;
        b.n = tsec.n;
        b.T = tsec.T;
        b.S = tsec.S;
        return b;
    }

    void validate() const {
        detail::require(replicates >= 1, "replicates must be at least 1");
        detail::require(workers >= 1, "workers must be at least 1");
        detail::require(!methods.empty(), "at least one method is required");
        tsec.validate(space);
        benchmark_config(BenchmarkVariant::B1).validate(space);
        truth.validate();
        if (sweep) {
            detail::require(sweep->parameter == "K" || sweep->parameter == "M", "sweep parameter must be K or M");
            detail::require(!sweep->values.empty(), "sweep needs at least one value");
            for (int v : sweep->values) {
                RunConfig point = *this;
                point.sweep.reset();
                point.apply_sweep_value(sweep->parameter, v);
                point.validate();
            }
        }
        if (backtest) backtest->config.validate();
    }

    void apply_sweep_value(const std::string& parameter, int value) {
        if (parameter == "K") tsec.K = value;
        else if (parameter == "M") space = FactorSpace::binary(value);
        else throw ValidationError("sweep parameter must be K or M");
    }
};

namespace detail {

using tsec::detail::require;
using boost::property_tree::ptree;

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        throw ValidationError("config key '" + key + "': expected true or false, got '" + text + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else {
        in >> value;
        if (in.fail() || !(in >> std::ws).eof())
            throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ValidationError("config key '" + key + "': empty list item");
        out.push_back(parse_value<T>(key, item.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ValidationError("config key '" + key + "': empty list");
    return out;
}

/// Reads the keys of one section, rejecting any key not in `handlers`.
inline void read_section(const ptree& root, const std::string& section,
                         const std::map<std::string, std::function<void(const std::string&, const std::string&)>>& handlers) {
    const auto node = root.get_child_optional(section);
    if (!node) return;
    for (const auto& [key, value] : *node) {
        const auto it = handlers.find(key);
        const std::string full = section + "." + key;
        if (it == handlers.end()) throw ValidationError("unknown config key '" + full + "'");
        it->second(full, value.data());
    }
}

template <class T>
auto setter(T& field) {
    return [&field](const std::string& key, const std::string& text) { field = parse_value<T>(key, text); };
}

} // namespace detail

/// Parses the INI run config. Relative data paths resolve against `base_dir`.
inline RunConfig parse_run_config(std::istream& in, const fs::path& base_dir = {}) {
    using detail::setter;
    boost::property_tree::ptree root;
    try {
        boost::property_tree::read_ini(in, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    static const std::set<std::string> sections{"run", "space", "study", "tsec", "mcmc", "benchmarks",
                                                "truth", "sweep", "backtest"};
    for (const auto& [name, node] : root) {
        if (!sections.contains(name))
            throw ValidationError(node.empty() ? "config key '" + name + "' is outside any section"
                                               : "unknown config section [" + name + "]");
    }

    RunConfig c;
    detail::read_section(root, "run", {
        {"seed", setter(c.seed)},
        {"replicates", setter(c.replicates)},
        {"out", setter(c.out)},
        {"workers", setter(c.workers)},
        {"dump_truth", setter(c.dump_truth)},
        {"methods", [&](const std::string& k, const std::string& v) {
             c.methods.clear();
             for (const auto& m : detail::parse_list<std::string>(k, v)) c.methods.push_back(method_from_string(m));
         }},
    });
    std::optional<FactorSpace> space;
    detail::read_section(root, "space", {
        {"factors", [&](const std::string& k, const std::string& v) {
             space = FactorSpace::binary(detail::parse_value<int>(k, v));
         }},
        {"levels", [&](const std::string& k, const std::string& v) {
             space = FactorSpace(detail::parse_list<int>(k, v));
         }},
    });
    if (space) c.space = *space;
    detail::read_section(root, "study", {
        {"K", setter(c.tsec.K)},
        {"n", setter(c.tsec.n)},
        {"T", setter(c.tsec.T)},
        {"S", setter(c.tsec.S)},
    });
    detail::read_section(root, "tsec", {
        {"alpha", setter(c.tsec.alpha)},
        {"warm_start", setter(c.tsec.warm_start)},
        {"init_design", [&](const std::string& k, const std::string& v) {
             if (v == "regular_fraction") c.tsec.init_design = InitDesign::RegularFraction;
             else if (v == "random_subset") c.tsec.init_design = InitDesign::RandomSubset;
             else throw ValidationError("config key '" + k + "': expected regular_fraction or random_subset");
         }},
    });
    detail::read_section(root, "mcmc", {
        {"iterations", setter(c.tsec.mcmc.iterations)},
        {"burn_in", setter(c.tsec.mcmc.burn_in)},
        {"stride", setter(c.tsec.mcmc.stride)},
        {"r_grid_size", setter(c.tsec.mcmc.r_grid_size)},
    });
    detail::read_section(root, "benchmarks", {
        {"discard_threshold", setter(c.bench.discard_threshold)},
        {"prob_best_rounds", setter(c.bench.prob_best_rounds)},
        {"reset_readded", setter(c.bench.reset_readded)},
    });
    auto array_setter = [](auto& arr) {
        return [&arr](const std::string& k, const std::string& v) {
            const auto values = detail::parse_list<double>(k, v);
            if (values.size() != arr.size())
                throw ValidationError("config key '" + k + "': expected " + std::to_string(arr.size()) + " values");
            std::copy(values.begin(), values.end(), arr.begin());
        };
    };
    SpikeSlabSpec& t = c.truth;
    detail::read_section(root, "truth", {
        {"me_active", setter(t.me_active)},
        {"me_spike_sd", setter(t.me.spike_sd)},
        {"me_slab_sd", setter(t.me.slab_sd)},
        {"tfi_active", array_setter(t.tfi_active)},
        {"tfi_spike_sd", setter(t.tfi.spike_sd)},
        {"tfi_slab_sd", setter(t.tfi.slab_sd)},
        {"thfi_active", array_setter(t.thfi_active)},
        {"thfi_spike_sd", setter(t.thfi.spike_sd)},
        {"thfi_slab_sd", setter(t.thfi.slab_sd)},
        {"intercept", setter(t.intercept)},
        {"effect_scale", setter(t.effect_scale)},
    });
    if (root.get_child_optional("sweep")) {
        SweepSpec sw;
        detail::read_section(root, "sweep", {
            {"parameter", setter(sw.parameter)},
            {"values", [&](const std::string& k, const std::string& v) { sw.values = detail::parse_list<int>(k, v); }},
        });
        c.sweep = sw;
    }
    if (root.get_child_optional("backtest")) {
        BacktestSetup b;
        auto& bc = b.config;
        bc.mcmc = c.tsec.mcmc;
        bc.warm_start = c.tsec.warm_start;
        auto path_setter = [&](std::string& field) {
            return [&field, &base_dir](const std::string&, const std::string& v) {
                const fs::path p(v);
                field = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
            };
        };
        detail::read_section(root, "backtest", {
            {"prices", path_setter(b.prices)},
            {"industries", path_setter(b.industries)},
            {"max_missing", setter(b.max_missing)},
            {"K", setter(bc.K)},
            {"S", setter(bc.S)},
            {"T", setter(bc.T)},
            {"n", setter(bc.n)},
            {"rebalance_days", setter(bc.rebalance_days)},
            {"tau", setter(bc.tau)},
            {"strict_reward", setter(bc.strict_reward)},
            {"window", setter(bc.window)},
            {"risk_aversion", setter(bc.risk_aversion)},
            {"alpha", setter(bc.alpha)},
            {"start", [&](const std::string& k, const std::string& v) {
                 const auto d = portfolio::parse_date(v);
                 if (!d) throw ValidationError("config key '" + k + "': expected YYYY-MM-DD");
                 bc.start = *d;
             }},
        });
        detail::require(!b.prices.empty() && !b.industries.empty(), "backtest needs prices and industries paths");
        c.backtest = b;
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse_run_config(in, fs::path(path).parent_path());
}

/// Runs job(i) for i in [0, count) on `workers` threads and returns the results in
/// index order. The first exception (by index) is rethrown after all threads join.
template <class Result>
std::vector<Result> run_pool(int count, int workers, const std::function<Result(int)>& job) {
    std::vector<std::optional<Result>> slots(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next++; i < count; i = next++) {
            try {
                slots[static_cast<std::size_t>(i)] = job(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min(workers, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<Result> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

struct MethodRun {
    Method method = Method::TSEC;
    RegretSeries regret;
    SwitchHistory history;
    /// sum over model-driven periods of sum_a n_a mu_a.
    double expected_reward = 0.0;
    long total_runs = 0;

    double final_regret() const { return regret.empty() ? 0.0 : regret.back().cum_regret; }
};

struct ReplicateResult {
    int replicate = 0;
    TruthEffects truth;
    double mu_star = 0.0;
    std::vector<MethodRun> runs;

    const MethodRun& run(Method m) const {
        for (const auto& r : runs)
            if (r.method == m) return r;
        throw ValidationError("method " + to_string(m) + " was not run");
    }
};

inline double expected_reward(const BernoulliEnv& env, std::span<const AllocationRecord> records) {
    double total = 0.0;
    for (const auto& rec : records) total += period_reward(env, rec);
    return total;
}

inline long total_runs(std::span<const AllocationRecord> records) {
    long total = 0;
    for (const auto& rec : records) total += rec.total_runs();
    return total;
}

/// One replicate: a truth drawn from stream 0, then every method on its own stream.
inline ReplicateResult simulate_replicate(const RunConfig& config, int replicate) {
    ReplicateResult out;
    out.replicate = replicate;
    const auto r = static_cast<std::uint64_t>(replicate);
    Rng truth_rng(derive_seed(config.seed, r, kTruthStream));
    out.truth = sample_truth(config.space, config.truth, truth_rng);
    const BernoulliEnv env = build_env(out.truth, config.space);
    out.mu_star = env.mu_star();
    for (Method m : config.methods) {
        Rng rng(derive_seed(config.seed, r, static_cast<std::uint64_t>(m)));
        MethodRun run;
        run.method = m;
        if (m == Method::TSEC) {
            const TsecResult res = run_tsec(config.space, env, config.tsec, rng);
            run.regret = res.regret;
            run.history = res.history;
            run.expected_reward = expected_reward(env, res.records);
            run.total_runs = total_runs(res.records);
        } else {
            const auto variant = static_cast<BenchmarkVariant>(static_cast<int>(m) - 1);
            const BenchmarkResult res = run_benchmark(config.space, env, config.benchmark_config(variant), rng);
            run.regret = res.regret;
            run.history = res.history;
            run.expected_reward = expected_reward(env, res.records);
            run.total_runs = total_runs(res.records);
        }
        out.runs.push_back(std::move(run));
    }
    return out;
}

inline std::vector<ReplicateResult> simulate(const RunConfig& config) {
    config.validate();
    return run_pool<ReplicateResult>(config.replicates, config.workers,
                                     [&config](int r) { return simulate_replicate(config, r); });
}

inline std::ofstream open_output(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

inline std::string replicate_tag(int replicate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "replicate_%03d.csv", replicate);
    return buf;
}

inline void write_simulation(const fs::path& dir, const RunConfig& config, const std::vector<ReplicateResult>& results) {
    auto regret = open_output(dir / "regret.csv");
    auto armsets = open_output(dir / "armsets.csv");
    write_regret_header(regret);
    write_armsets_header(armsets);
    for (const auto& rep : results) {
        for (const auto& run : rep.runs) {
            write_regret_rows(regret, to_string(run.method), rep.replicate, run.regret);
            write_armsets_rows(armsets, to_string(run.method), rep.replicate, run.history);
        }
        if (config.dump_truth) {
            auto truth = open_output(dir / "truth" / replicate_tag(rep.replicate));
            write_truth_csv(truth, rep.truth);
        }
    }
}

/// Replicated study; writes regret.csv, armsets.csv and truth/replicate_NNN.csv.
inline std::vector<ReplicateResult> cmd_simulate(const RunConfig& config) {
    auto results = simulate(config);
    write_simulation(config.out, config, results);
    return results;
}

struct SummaryRow {
    int sweep_value = 0;
    Method method = Method::TSEC;
    double mean_final_regret = 0.0;
    /// 1.96 times the standard error of the replicate finals.
    double ci_half_width = 0.0;
};

inline SummaryRow summarize(int sweep_value, Method method, const std::vector<ReplicateResult>& results) {
    std::vector<double> finals;
    for (const auto& rep : results) finals.push_back(rep.run(method).final_regret());
    const double n = static_cast<double>(finals.size());
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= n;
    double ss = 0.0;
    for (double f : finals) ss += (f - mean) * (f - mean);
    const double half = finals.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    return SummaryRow{sweep_value, method, mean, half};
}

/// One simulation per sweep value, all from the same master seed. Writes
/// summary.csv plus each point's files under <param>_<value>/.
inline std::vector<SummaryRow> cmd_sweep(const RunConfig& config) {
    detail::require(config.sweep.has_value(), "sweep needs a [sweep] section");
    config.validate();
    std::vector<SummaryRow> rows;
    const fs::path dir(config.out);
    for (int value : config.sweep->values) {
        RunConfig point = config;
        point.sweep.reset();
        point.apply_sweep_value(config.sweep->parameter, value);
        const auto results = simulate(point);
        write_simulation(dir / (config.sweep->parameter + "_" + std::to_string(value)), point, results);
        for (Method m : config.methods) rows.push_back(summarize(value, m, results));
    }
    auto out = open_output(dir / "summary.csv");
    out.precision(17);
    out << "sweep_value,method,mean_final_regret,ci_half_width\n";
    for (const auto& r : rows)
        out << r.sweep_value << ',' << to_string(r.method) << ',' << r.mean_final_regret << ',' << r.ci_half_width << '\n';
    return rows;
}

/// Portfolio backtest; writes wealth.csv, rewards.csv and armsets.csv.
inline portfolio::BacktestResult cmd_backtest(const RunConfig& config, std::ostream* log = nullptr) {
    detail::require(config.backtest.has_value(), "backtest needs a [backtest] section");
    config.validate();
    const auto& setup = *config.backtest;
    const auto table = portfolio::load_prices(setup.prices, setup.industries, setup.max_missing);
    if (log)
        for (const auto& line : table.report) *log << line << '\n';
    Rng rng(derive_seed(config.seed, 0, static_cast<std::uint64_t>(Method::TSEC)));
    auto result = portfolio::backtest(table, setup.config, rng);
    const fs::path dir(config.out);
    auto wealth = open_output(dir / "wealth.csv");
    portfolio::write_wealth_csv(wealth, result);
    auto rewards = open_output(dir / "rewards.csv");
    portfolio::write_rewards_csv(rewards, result);
    auto armsets = open_output(dir / "armsets.csv");
    write_armsets_header(armsets);
    write_armsets_rows(armsets, "TSEC", 0, result.history);
    return result;
}

/// Draws and writes one truth per replicate, on the same streams cmd_simulate uses.
inline void cmd_truth_gen(const RunConfig& config) {
    config.validate();
    const fs::path dir(config.out);
    for (int r = 0; r < config.replicates; ++r) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r), kTruthStream));
        const TruthEffects truth = sample_truth(config.space, config.truth, rng);
        auto out = open_output(dir / "truth" / replicate_tag(r));
        write_truth_csv(out, truth);
    }
}

} // namespace tsec::experiment
