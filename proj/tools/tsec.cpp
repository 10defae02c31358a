#include "tsec/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace ex = tsec::experiment;

int main(int argc, char** argv) {
    CLI::App app{"Thompson sampling under experimental constraints: simulations and portfolio backtest"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "INI run configuration")->required();
        cmd->add_option("--seed", seed, "master seed (overrides run.seed)");
        cmd->add_option("--out", out, "output directory (overrides run.out)");
        cmd->add_option("--workers", workers, "worker threads (overrides run.workers)");
    };
    auto* simulate = app.add_subcommand("simulate", "replicated TSEC vs benchmark study");
    auto* sweep = app.add_subcommand("sweep", "final regret across K or M values");
    auto* backtest = app.add_subcommand("backtest", "portfolio backtest on price files");
    auto* truth_gen = app.add_subcommand("truth-gen", "write sampled ground truths");
    for (auto* cmd : {simulate, sweep, backtest, truth_gen}) add_common(cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ex::RunConfig config;
    try {
        config = ex::load_run_config(config_path);
        if (seed) config.seed = *seed;
        if (out) config.out = *out;
        if (workers) config.workers = *workers;
        config.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (simulate->parsed()) {
            const auto results = ex::cmd_simulate(config);
            for (auto m : config.methods) {
                const auto row = ex::summarize(0, m, results);
                std::cout << ex::to_string(m) << ": mean final regret " << row.mean_final_regret << " +/- "
                          << row.ci_half_width << '\n';
            }
        } else if (sweep->parsed()) {
            for (const auto& row : ex::cmd_sweep(config))
                std::cout << config.sweep->parameter << '=' << row.sweep_value << ' ' << ex::to_string(row.method)
                          << ": " << row.mean_final_regret << " +/- " << row.ci_half_width << '\n';
        } else if (backtest->parsed()) {
            const auto result = ex::cmd_backtest(config, &std::cerr);
            const auto& names = tsec::portfolio::backtest_methods();
            for (std::size_t m = 0; m < names.size(); ++m)
                std::cout << names[m] << ": final wealth " << result.wealth[m].back() << '\n';
        } else if (truth_gen->parsed()) {
            ex::cmd_truth_gen(config);
        }
    } catch (const tsec::ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
