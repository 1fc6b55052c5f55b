// Command-line driver: one experiment per invocation.
#include "kgp/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Spectral field-particle simulator and verification driver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;

    std::vector<std::pair<std::string, kgp::ExperimentKind>> kinds = {
        {"check-model", kgp::ExperimentKind::check_model},
        {"simulate", kgp::ExperimentKind::simulate},
        {"energy-decay", kgp::ExperimentKind::energy_decay},
        {"resolvent", kgp::ExperimentKind::resolvent},
        {"plemelj", kgp::ExperimentKind::plemelj},
        {"equilibrium", kgp::ExperimentKind::equilibrium},
        {"scattering", kgp::ExperimentKind::scattering},
    };

    for (auto& [name, kind] : kinds) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "configuration file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "base seed (overrides config)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", threads, "worker threads (overrides config)");
    }

    CLI11_PARSE(app, argc, argv);

    kgp::ExperimentKind kind = kinds.front().second;
    for (auto& [name, k] : kinds)
        if (app.get_subcommand(name)->parsed()) kind = k;

    kgp::ExperimentConfig cfg;
    try {
        cfg = kgp::parse_config(config_path);
    } catch (const kgp::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    cfg.experiment = kind;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    if (threads >= 0) cfg.threads = threads;
    else if (const char* env = std::getenv("KGPARTICLE_THREADS")) cfg.threads = std::atoi(env);

    return kgp::run_experiment(cfg);
}
