// Command-line driver: one subcommand per experiment plus `verify`.
// Flags mirror RFIM_* environment variables; --config reads the same keys
// from an INI-style file. Outputs land in --out as results.csv, summary.json,
// run.log and, for curdling, grid.txt.

#include <cstdio>
#include <exception>
#include <thread>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfim/harness.hpp"
#include "rfim/verify.hpp"

namespace {

void add_common_options(CLI::App* cmd, rfim::ExperimentConfig& config) {
    cmd->add_option("--j", config.j, "nearest-neighbor coupling strength")
        ->envname("RFIM_J")
        ->capture_default_str();
    cmd->add_option("--h-field", config.params.h, "uniform external field")
        ->envname("RFIM_H")
        ->capture_default_str();
    cmd->add_option("--epsilon", config.params.epsilon, "random-field intensity")
        ->envname("RFIM_EPSILON")
        ->capture_default_str();
    cmd->add_option("--temperature", config.params.temperature, "temperature (0 = ground states)")
        ->envname("RFIM_TEMPERATURE")
        ->capture_default_str();
    cmd->add_option("--scales", config.scales, "scale list (L or ell values)")
        ->envname("RFIM_SCALES")
        ->delimiter(',');
    cmd->add_option("--replicas", config.replicas, "disorder replicas")
        ->envname("RFIM_REPLICAS")
        ->capture_default_str();
    cmd->add_option("--seed", config.base_seed, "base seed")
        ->envname("RFIM_SEED")
        ->capture_default_str();
    cmd->add_option("--threads", config.threads, "worker threads (0 = hardware)")
        ->envname("RFIM_THREADS")
        ->capture_default_str();
    cmd->add_option("--engine", config.engine, "exact|mcmc")
        ->envname("RFIM_ENGINE")
        ->check(CLI::IsMember({"exact", "mcmc"}))
        ->capture_default_str();
    cmd->add_option("--sweeps", config.sweeps, "MCMC sweeps")->capture_default_str();
    cmd->add_option("--burn-in", config.burn_in, "MCMC burn-in (-1 = plateau detection)")
        ->capture_default_str();
    cmd->add_option("--out", config.out_dir, "output directory")
        ->envname("RFIM_OUT")
        ->capture_default_str();
}

int run_experiment(rfim::ExperimentConfig& config) {
    config.validate();
    auto record = rfim::run(config);
    rfim::write_outputs(record);
    std::printf("%s: %zu rows, %zu verdicts -> %s (%.2fs)\n",
                rfim::to_string(config.kind).c_str(), record.rows.size(),
                record.verdicts.size(), config.out_dir.c_str(), record.wall_seconds);
    for (const auto& verdict : record.verdicts)
        std::printf("  [%s] %s (margin %g)\n", rfim::to_string(verdict.verdict).c_str(),
                    verdict.claim.c_str(), verdict.margin);
    if (!record.failed_replicas.empty()) {
        std::printf("  %zu replicas failed; see summary.json\n",
                    record.failed_replicas.size());
        return 2;
    }
    for (const auto& verdict : record.verdicts)
        if (verdict.verdict == rfim::Verdict::Fail) return 3;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"random-field Ising model laboratory"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file with the same keys as the flags");

    struct Job {
        rfim::ExperimentKind kind;
        const char* description;
    };
    const std::vector<Job> jobs = {
        {rfim::ExperimentKind::MScan, "boundary-influence order parameter over scales"},
        {rfim::ExperimentKind::Tension, "T=0 surface tension and the 4B bound"},
        {rfim::ExperimentKind::Variance, "disagreement-count moments and anti-concentration"},
        {rfim::ExperimentKind::Covariance, "decoupling bounds on a plus-boundary proxy"},
        {rfim::ExperimentKind::PosT, "positive-temperature surface tension"},
        {rfim::ExperimentKind::Curdle, "hierarchical spin construction"},
        {rfim::ExperimentKind::Mandelbrot, "hierarchical block-removal percolation"},
        {rfim::ExperimentKind::HighDisorder, "forced-site percolation regime check"},
        {rfim::ExperimentKind::Avalanche, "ground-state flips along an h sweep"},
    };

    std::vector<std::unique_ptr<rfim::ExperimentConfig>> configs;
    std::vector<CLI::App*> commands;
    for (const auto& job : jobs) {
        auto config = std::make_unique<rfim::ExperimentConfig>();
        config->kind = job.kind;
        auto* cmd = app.add_subcommand(rfim::to_string(job.kind), job.description);
        add_common_options(cmd, *config);
        switch (job.kind) {
            case rfim::ExperimentKind::Tension:
                cmd->add_flag("--identity", config->check_identity,
                              "also check the flip-threshold identity");
                break;
            case rfim::ExperimentKind::Variance:
                cmd->add_option("--alpha", config->alpha,
                                "conditional-variance diagnostic exponent (0 disables)")
                    ->capture_default_str();
                break;
            case rfim::ExperimentKind::Mandelbrot:
                cmd->add_option("--p", config->removal_p, "block removal probability")
                    ->capture_default_str();
                cmd->add_option("--levels", config->levels, "hierarchy depth")
                    ->capture_default_str();
                break;
            case rfim::ExperimentKind::Curdle:
                cmd->add_option("--max-level", config->max_level, "hierarchy depth (window 3^n)")
                    ->capture_default_str();
                break;
            case rfim::ExperimentKind::HighDisorder:
                cmd->add_option("--radius", config->window_radius, "percolation window radius")
                    ->capture_default_str();
                break;
            case rfim::ExperimentKind::Avalanche:
                cmd->add_option("--h-min", config->h_min, "sweep start")->capture_default_str();
                cmd->add_option("--h-max", config->h_max, "sweep end")->capture_default_str();
                cmd->add_option("--h-steps", config->h_steps, "sweep points")
                    ->capture_default_str();
                break;
            default: break;
        }
        commands.push_back(cmd);
        configs.push_back(std::move(config));
    }

    auto* verify_cmd = app.add_subcommand("verify", "run the verification suite");
    std::string level = "quick";
    int verify_threads = 0;
    verify_cmd->add_option("--level", level, "quick|full")
        ->check(CLI::IsMember({"quick", "full"}))
        ->capture_default_str();
    verify_cmd->add_option("--threads", verify_threads, "worker threads (0 = hardware)")
        ->envname("RFIM_THREADS")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify_cmd->parsed()) {
            const int threads = verify_threads > 0
                                    ? verify_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
            auto results = rfim::run_verification(
                level == "full" ? rfim::VerifyLevel::Full : rfim::VerifyLevel::Quick,
                threads > 0 ? threads : 1);
            return rfim::print_verification(results) ? 0 : 1;
        }
        for (std::size_t k = 0; k < commands.size(); ++k) {
            if (commands[k]->parsed()) return run_experiment(*configs[k]);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
