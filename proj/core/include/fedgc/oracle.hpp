#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fedgc/block_system.hpp"
#include "fedgc/client.hpp"
#include "fedgc/kalman.hpp"

namespace fedgc {

/// Kalman filter with the full ground-truth A (including off-diagonal blocks).
class CentralizedOracle {
public:
    CentralizedOracle(Matrix a, Matrix c, Matrix gain);

    KalmanStep step(const Vector& y);

    const Matrix& A() const { return filter_.A(); }
    const Matrix& C() const { return filter_.C(); }
    const Matrix& K() const { return filter_.K(); }
    const Vector& h_hat() const { return filter_.estimate(); }

    /// rho(A - A K_o C) < 1.
    bool convergent() const { return filter_.closed_loop_radius() < 1.0; }
    double closed_loop_radius() const { return filter_.closed_loop_radius(); }

private:
    KalmanFilter filter_;
};

struct OracleTrace {
    std::vector<Vector> estimates;    // h_hat_o^t, t = 0..T
    std::vector<Vector> predictions;  // h_o^t, entry 0 is zero
    std::vector<Vector> residuals;    // r_o^t, entry 0 is zero
    Matrix gain;
    double closed_loop_radius = 0.0;
};

/// Runs the oracle over y^1..y^T from h_hat_o^0 = 0. Uses the steady-state
/// gain of the full system unless `gain` is supplied.
OracleTrace run_oracle(const BlockSystem& system, const std::vector<Vector>& measurements,
                       const std::optional<Matrix>& gain = std::nullopt);

/// Time-aligned oracle and decentralized trajectories, index t = 0..T.
struct AlignedTrajectories {
    std::vector<Vector> oracle_predicted;                  // (h^t)_o, global
    std::vector<Vector> oracle_estimated;                  // (h_hat^t)_o, global
    std::vector<std::vector<Vector>> client_predicted;    // (h_m^t)_a, [m][t]
    std::vector<std::vector<Vector>> client_estimated;    // (h_hat_m^t)_c, [m][t]

    std::size_t horizon() const {
        return oracle_predicted.empty() ? 0 : oracle_predicted.size() - 1;
    }
};

/// Pairs the oracle with the augmented predictions
/// (h_m^t)_a = A_mm (h_hat_c^{t-1} + theta_m y_m^{t-1}) for fixed final thetas.
AlignedTrajectories align_trajectories(const BlockSpec& spec, const OracleTrace& oracle,
                                       const std::vector<ClientTrace>& clients,
                                       const std::vector<Matrix>& a_diag,
                                       const std::vector<Matrix>& thetas,
                                       const std::vector<std::vector<Vector>>& client_measurements);

struct OracleGapReport {
    std::vector<Vector> state_gap_means;  // mean of (h_m)_a - (h_m)_o over the window
    std::vector<double> delta_max;        // max ||(h_hat_m)_o - (h_hat_m)_c|| over the window
    double gap_norm = 0.0;                // norm of the concatenated mean gap
    double mean_oracle_norm = 0.0;        // mean ||(h)_o|| over the window
    double relative_gap = 0.0;            // gap_norm / mean_oracle_norm (0 if both vanish)
    std::size_t window = 0;
};

/// Window statistics over t = T - window + 1 .. T. Throws std::invalid_argument
/// for window = 0 or window > T.
OracleGapReport oracle_gap(const BlockSpec& spec, const AlignedTrajectories& traj,
                           std::size_t window);

struct GrangerBound {
    double lhs = 0.0;  // mean ||sum_n (A_hat_mn - A_mn) h_hat_o_n^{t-1}||
    double rhs = 0.0;  // ||A_mm|| delta_m + ||sum_n A_hat_mn delta_n||
    bool holds = false;
    double corollary_lhs = 0.0;  // ||sum_n (A_hat_mn - A_mn)||_F
    double corollary_rhs = 0.0;  // rhs / sigma_min
    double sigma_min = 0.0;      // min_n mean ||h_hat_o_n^{t-1}||
    bool corollary_applicable = false;
    bool corollary_holds = false;
};

/// Both sides of the Granger-causal error bound for every client. `a_hat` and
/// `a_true` are full matrices; only their off-diagonal blocks are used.
std::vector<GrangerBound> granger_error_bound(const BlockSpec& spec, const Matrix& a_hat,
                                              const Matrix& a_true,
                                              const std::vector<double>& delta_max,
                                              const std::vector<Vector>& oracle_estimated,
                                              std::size_t window);

}  // namespace fedgc
