// fedgc: run experiments, self-checks and privacy calibration from the shell.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedgc/experiment.hpp"
#include "fedgc/federation.hpp"
#include "fedgc/privacy.hpp"

namespace {

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::string> out_dir, std::optional<std::string> mode) {
    const std::filesystem::path dir = out_dir ? std::filesystem::path(*out_dir) : fedgc::default_output_dir();
    std::string stage = "config";
    try {
        fedgc::ExperimentConfig config = fedgc::load_config(config_path);
        if (seed) {
            config.seed = *seed;
            config.training.seed = *seed;
        }
        if (mode) config.training.mode = fedgc::parse_mode(*mode);

        stage = "run";
        const fedgc::MetricsOutput metrics = fedgc::run_experiment(config);

        stage = "emit";
        const fedgc::OutputPaths paths = fedgc::emit_outputs(metrics, dir);
        std::cout << "rounds: " << metrics.log.rounds.size() << "\n"
                  << "wrote " << paths.losses_csv.string() << "\n"
                  << "wrote " << paths.params_csv.string() << "\n"
                  << "wrote " << paths.metrics_json.string() << "\n"
                  << "wrote " << paths.runtime_json.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "fedgc run failed during " << stage << ": " << e.what() << "\n";
        try {
            fedgc::emit_failure(dir, stage, e.what());
        } catch (...) {
        }
        return 2;
    }
}

int verify_command(std::uint64_t seed) {
    bool ok = true;
    for (const fedgc::CheckResult& c : fedgc::run_verification(seed)) {
        std::printf("%-4s %-48s value=%.3e threshold=%.3e\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.value, c.threshold);
        ok = ok && c.pass;
    }
    return ok ? 0 : 1;
}

int calibrate_command(const fedgc::PrivacyParams& input) {
    try {
        const fedgc::PrivacyParams p = fedgc::calibrate(input);
        const fedgc::PrivacyBudget client = fedgc::composed_client_budget(p);
        std::printf("sigma_c %.10g\nsigma_a %.10g\nsigma_g %.10g\n", p.sigma_c, p.sigma_a, p.sigma_g);
        std::printf("client budget per message: eps=%.10g delta=%.10g\n", client.eps, client.delta);
        std::printf("note: %s\n", fedgc::composition_warning().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "calibrate-dp: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated Granger-causality simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> mode;
    auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out-dir", out_dir, "Output directory (default: $FEDGC_OUT_DIR or ./fedgc-out)");
    run->add_option("--mode", mode, "full | no_augmentation | no_server | pretrained_clients");

    std::uint64_t verify_seed = 1;
    auto* verify = app.add_subcommand("verify", "Run the built-in numerical self-checks");
    verify->add_option("--seed", verify_seed, "Seed for the random instances");

    fedgc::PrivacyParams dp;
    auto* cal = app.add_subcommand("calibrate-dp", "Print the minimal Gaussian noise scales");
    cal->add_option("--eps-c", dp.eps_c);
    cal->add_option("--delta-c", dp.delta_c);
    cal->add_option("--eps-a", dp.eps_a);
    cal->add_option("--delta-a", dp.delta_a);
    cal->add_option("--eps-g", dp.eps_g);
    cal->add_option("--delta-g", dp.delta_g);
    cal->add_option("--B-y", dp.B_y, "Measurement norm bound");
    cal->add_option("--B-K", dp.B_K, "Kalman gain norm bound");
    cal->add_option("--B-theta", dp.B_theta, "Augmentation parameter norm bound");
    cal->add_option("--C-g", dp.C_g, "Gradient clip threshold");

    CLI11_PARSE(app, argc, argv);

    if (*run) return run_command(config_path, seed, out_dir, mode);
    if (*verify) return verify_command(verify_seed);
    return calibrate_command(dp);
}
