#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedgc/linalg.hpp"

namespace fedgc {

/// Partition of the global state and measurement vectors into M clients.
class BlockSpec {
public:
    BlockSpec(std::vector<Index> dims, std::vector<Index> obs_dims);

    std::size_t clients() const { return dims_.size(); }
    Index dim(std::size_t m) const { return dims_.at(m); }
    Index obs_dim(std::size_t m) const { return obs_dims_.at(m); }
    Index state_dim() const { return state_offsets_.back(); }
    Index obs_dim() const { return obs_offsets_.back(); }
    Index state_offset(std::size_t m) const { return state_offsets_.at(m); }
    Index obs_offset(std::size_t m) const { return obs_offsets_.at(m); }
    const std::vector<Index>& dims() const { return dims_; }
    const std::vector<Index>& obs_dims() const { return obs_dims_; }

    /// Every client has a scalar state and a scalar measurement.
    bool scalar() const;

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;

private:
    std::vector<Index> dims_;
    std::vector<Index> obs_dims_;
    std::vector<Index> state_offsets_;
    std::vector<Index> obs_offsets_;
};

/// Assembles a block-diagonal matrix from square or rectangular blocks.
Matrix block_diagonal(const std::vector<Matrix>& blocks);

/// Ground-truth LTI system h^t = A h^{t-1} + w, y^t = C h^t + v with
/// w ~ N(0, q I), v ~ N(0, r I) and C block-diagonal.
class BlockSystem {
public:
    BlockSystem(BlockSpec spec, Matrix a, Matrix c, double q_proc, double r_meas);

    const BlockSpec& spec() const { return spec_; }
    const Matrix& A() const { return a_; }
    const Matrix& C() const { return c_; }
    double q_proc() const { return q_proc_; }
    double r_meas() const { return r_meas_; }

    Matrix A_block(std::size_t m, std::size_t n) const;
    Matrix C_block(std::size_t m) const;
    std::vector<Matrix> A_diagonal() const;
    std::vector<Matrix> C_diagonal() const;

    /// Copy with a different state matrix (same partition, C and noise).
    BlockSystem with_A(Matrix a) const;

private:
    BlockSpec spec_;
    Matrix a_;
    Matrix c_;
    double q_proc_;
    double r_meas_;
};

/// Sampled states h^0..h^T and measurements y^0..y^T.
struct Trajectory {
    std::vector<Vector> states;
    std::vector<Vector> measurements;

    std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
};

/// Splits global measurements into per-client streams, indexed [m][t].
std::vector<std::vector<Vector>> split_measurements(const BlockSpec& spec,
                                                    const std::vector<Vector>& measurements);

/// Optional structural change: from time `at` onwards the state matrix is
/// `A_after` (used for causality-change scenarios).
struct RegimeSwitch {
    std::size_t at = 0;
    Matrix A_after;
};

/// Simulates T steps from h^0. Noise for client m at time t comes from its own
/// counter-based stream, so results are a pure function of the arguments.
Trajectory simulate(const BlockSystem& system, std::size_t T, std::uint64_t seed,
                    const Vector& initial_state,
                    const std::optional<RegimeSwitch>& regime_switch = std::nullopt);

/// Stationary covariance of h^t = A h^{t-1} + w with w ~ N(0, qI).
struct SteadyStateCovariance {
    Matrix sigma;
    double relative_residual = 0.0;  // ||S - A S A^T - qI||_F / ||S||_F
    double condition = 0.0;          // condition estimate of (I - A (x) A)

    Matrix block(const BlockSpec& spec, std::size_t m, std::size_t n) const;
};

/// Solves the discrete Lyapunov equation through vec(S) = (I - A (x) A)^{-1} vec(qI).
/// Throws NumericalError for rho(A) >= 1 or a condition estimate above 1e12.
SteadyStateCovariance steady_state_covariance(const Matrix& a, double q_proc);

struct NonIidReport {
    bool identical = false;    // all diagonal-block spectra equal (1e-9)
    bool independent = false;  // all cross blocks have Frobenius norm < 1e-9
    double variance_gap = 0.0; // largest spectrum mismatch between two clients
    double cross_norm = 0.0;   // largest cross-block Frobenius norm
};

NonIidReport non_iid_diagnostics(const SteadyStateCovariance& cov, const BlockSpec& spec);

}  // namespace fedgc
