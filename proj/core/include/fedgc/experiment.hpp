#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedgc/block_system.hpp"
#include "fedgc/federation.hpp"
#include "fedgc/oracle.hpp"
#include "fedgc/privacy.hpp"
#include "fedgc/theory.hpp"

namespace fedgc {

/// Random system policy. `mask[m][n]` switches the Granger link n -> m on.
struct GenerationPolicy {
    std::vector<std::vector<bool>> mask;  // M x M, diagonal ignored; empty = all off
    double diag_scale = 0.5;
    double off_scale = 0.3;
    double rho_max = 0.95;
    double q_proc = 0.01;
    double r_meas = 0.01;
};

/// Block-structured A with the masked off-diagonal blocks non-zero, whole-matrix
/// rescaling to rho(A) <= rho_max, and full-rank random C blocks.
BlockSystem generate_system(const BlockSpec& spec, const GenerationPolicy& policy,
                            std::uint64_t seed);

struct AnalysisOptions {
    std::vector<std::size_t> recurrence_times;  // frozen t values for H; empty = {T}
    bool oracle = true;
    double lipschitz = 1.0;
    std::optional<double> mu;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    BlockSpec spec{{1, 1}, {1, 1}};
    std::optional<Matrix> A;  // explicit ground truth; otherwise generated
    std::optional<Matrix> C;
    GenerationPolicy generation;
    std::optional<Vector> initial_state;
    std::optional<RegimeSwitch> regime_switch;
    std::size_t T = 200;
    TrainingConfig training;
    AnalysisOptions analysis;
};

/// Parses the JSON config document. Throws std::invalid_argument with the
/// offending key on malformed input.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON echo of a config (sorted keys).
std::string config_to_json(const ExperimentConfig& config);

struct ParameterError {
    std::size_t m = 0;
    std::size_t n = 0;
    double initial = 0.0;  // ||A_hat_mn^0 - A_mn||_F
    double final = 0.0;
};

struct RecurrenceRecord {
    std::size_t m = 0;
    std::size_t t = 0;
    double rho = 0.0;
    bool convergent = false;
    bool near_singular = false;
    double rate_norm = 0.0;
    bool sublinear_ok = false;
    std::optional<bool> linear_ok;
};

struct MetricsOutput {
    ExperimentConfig config;
    Matrix A_true;
    Matrix C_true;
    TrainingLog log;
    std::vector<Matrix> thetas;
    BlockGrid A_hat;
    std::vector<ParameterError> parameter_errors;
    std::optional<OracleGapReport> oracle_gap;
    std::vector<GrangerBound> granger_bounds;
    std::optional<OptimalityResiduals> optimality;
    std::vector<RecurrenceRecord> recurrence;
    std::optional<NonIidReport> non_iid;
    std::optional<SteadyStateCovariance> covariance;
    std::vector<double> gain_radii;  // closed-loop radius of each client filter
    double oracle_radius = 0.0;
    std::size_t final_epoch = 0, final_t = 0, final_k = 0;
};

/// simulate -> client pre-pass -> training -> analysis.
MetricsOutput run_experiment(const ExperimentConfig& config);

struct OutputPaths {
    std::filesystem::path losses_csv;
    std::filesystem::path params_csv;
    std::filesystem::path metrics_json;
    std::filesystem::path runtime_json;
};

/// Writes losses.csv, params.csv, metrics.json (all byte-deterministic for a
/// fixed config) and runtime.json (wall clock) into `dir`.
OutputPaths emit_outputs(const MetricsOutput& metrics, const std::filesystem::path& dir);

/// Writes a failure marker next to partial outputs.
void emit_failure(const std::filesystem::path& dir, const std::string& stage,
                  const std::string& message);

std::string losses_csv(const MetricsOutput& metrics);
std::string params_csv(const MetricsOutput& metrics);
std::string metrics_json(const MetricsOutput& metrics);

/// $FEDGC_OUT_DIR if set, otherwise ./fedgc-out.
std::filesystem::path default_output_dir();

/// Quick self-checks of the numerical identities, one line each.
struct CheckResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};
std::vector<CheckResult> run_verification(std::uint64_t seed);

}  // namespace fedgc
