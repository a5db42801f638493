#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgc/block_system.hpp"
#include "fedgc/client.hpp"
#include "fedgc/message_bus.hpp"
#include "fedgc/privacy.hpp"
#include "fedgc/server.hpp"

namespace fedgc {

enum class TrainingMode { full, no_augmentation, no_server, pretrained_clients };

std::string to_string(TrainingMode mode);
/// Throws std::invalid_argument for unknown names.
TrainingMode parse_mode(const std::string& name);

enum class PrivacyMode {
    enforce,  // user bounds, noise added at the message boundaries
    audit,    // no noise; observed maxima reported as the implied bounds
};

struct TrainingConfig {
    double eta1 = 0.05;
    double eta2 = 0.005;
    double gamma = 0.05;
    std::size_t epochs = 1;
    double tol = 1e-12;  // stop once an epoch's mean L_s is at or below this
    TrainingMode mode = TrainingMode::full;
    std::optional<PrivacyParams> privacy;
    PrivacyMode privacy_mode = PrivacyMode::enforce;
    std::size_t window = 500;
    std::uint64_t seed = 0;
    std::size_t snapshot_every = 0;   // 0: every round for scalar systems, every T rounds otherwise
    std::size_t pretrain_epochs = 0;  // pretrained_clients only; 0 means `epochs`
    std::optional<std::vector<Matrix>> initial_theta;  // default zero
    std::optional<BlockGrid> initial_A_hat;            // default zero
    bool through_wire = false;  // route every message through the NDJSON codec

    /// Throws std::invalid_argument when tol <= 0, epochs == 0 or a rate is negative.
    void validate() const;
};

/// Everything the federation needs from the system and the client pre-pass.
struct FederationSetup {
    BlockSpec spec;
    std::vector<Matrix> a_diag;
    std::vector<Matrix> c_diag;
    std::vector<Matrix> gains;
    std::vector<std::vector<Vector>> measurements;  // [m][t], t = 0..T
    std::vector<ClientTrace> traces;                // client filter outputs, t = 0..T

    std::size_t horizon() const;
};

/// Steady-state client gains (unless given) and the full client filter pre-pass.
FederationSetup prepare_federation(const BlockSystem& system, const Trajectory& trajectory,
                                   const std::optional<std::vector<Matrix>>& gains = std::nullopt);

struct RoundRecord {
    std::size_t epoch = 0;
    std::size_t t = 0;
    std::size_t k = 0;
    bool pretraining = false;
    std::optional<double> server_loss;  // absent when no server takes part
    std::vector<double> client_losses;  // (L_m)_a
    double grad_A_norm = 0.0;           // Frobenius norm over all A_hat gradients
    std::vector<double> theta_grad_norms;  // client-loss gradient norms
    std::size_t c2s = 0;
    std::size_t s2c = 0;
};

struct ParameterSnapshot {
    std::size_t epoch = 0;
    std::size_t t = 0;
    std::size_t k = 0;
    std::vector<Matrix> thetas;
    BlockGrid A_hat;
};

struct EpochRecord {
    std::size_t epoch = 0;
    bool pretraining = false;
    std::optional<double> mean_server_loss;
    std::vector<double> mean_client_losses;
};

struct TrainingLog {
    TrainingMode mode = TrainingMode::full;
    std::vector<RoundRecord> rounds;
    std::vector<ParameterSnapshot> snapshots;
    std::vector<EpochRecord> epochs;
    BusStats messages;
    bool stopped_on_tol = false;
    std::optional<PrivacyParams> privacy;  // calibrated parameters in effect
    std::optional<SensitivityAudit> audit;
    double wall_clock_seconds = 0.0;  // not part of the deterministic record
};

struct TrainingResult {
    TrainingLog log;
    std::vector<Matrix> thetas;
    BlockGrid A_hat;
};

/// Runs the federated loop: per time step every client sends its tuple, the
/// server computes L_s, returns state gradients and updates A_hat, and every
/// client updates theta. Clients and server are separate actors that only
/// exchange data through an InProcessBus.
TrainingResult run_training(const FederationSetup& setup, const TrainingConfig& config);

/// run_training restricted to the three baseline modes.
TrainingResult run_baseline(TrainingMode mode, const FederationSetup& setup,
                            TrainingConfig config);

/// One noise-free update at time t from the given parameters, computed directly
/// (no actors). run_training performs exactly this arithmetic per round.
struct RoundUpdate {
    ServerRound round;
    ServerGradients server_grads;
    std::vector<Matrix> client_grads;
    std::vector<double> client_losses;
    std::vector<Matrix> thetas;  // after the update
    BlockGrid A_hat;             // after the update
};

RoundUpdate federation_round(const FederationSetup& setup, const std::vector<Matrix>& thetas,
                             const ServerModel& server, std::size_t t, double eta1, double eta2);

/// Mean L_s over t in [t_begin, t_end] with frozen parameters.
double evaluate_server_loss(const FederationSetup& setup, const std::vector<Matrix>& thetas,
                            const ServerModel& server, std::size_t t_begin, std::size_t t_end);

/// Noise stream used for a privacy release of client m in round k.
CounterRng privacy_stream(std::uint64_t seed, StreamKind kind, std::size_t client, std::size_t k);

}  // namespace fedgc
