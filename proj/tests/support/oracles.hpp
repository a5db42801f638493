#pragma once

// Reference computations used by the tests. Each one is written independently of
// the library code it checks: plain loops, finite differences, fixed-point
// iteration, or probing a map column by column.

#include <functional>

#include "fedgc/block_system.hpp"
#include "fedgc/federation.hpp"
#include "fedgc/linalg.hpp"
#include "fedgc/rng.hpp"
#include "fedgc/server.hpp"

namespace oracles {

using fedgc::Index;
using fedgc::Matrix;
using fedgc::Vector;

Matrix random_matrix(fedgc::CounterRng& rng, Index rows, Index cols, double scale = 1.0);
Vector random_vector(fedgc::CounterRng& rng, Index n, double scale = 1.0);

/// Kronecker product from the entry formula (X (x) Y)(i p + k, j q + l) = X_ij Y_kl.
Matrix brute_kron(const Matrix& x, const Matrix& y);

/// Column stacking by explicit index arithmetic.
Vector brute_vec(const Matrix& z);

/// Central differences of a scalar function of a matrix.
Matrix numerical_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double step = 1e-6);

/// max |a - b| / max(|b|, floor), entrywise.
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

/// Sigma <- A Sigma A^T + q I until the update is below `tol`.
Matrix lyapunov_fixed_point(const Matrix& a, double q, double tol = 1e-14, int max_iterations = 1000000);

/// Sample covariance of states[burn_in..], with the sample mean removed.
Matrix sample_covariance(const std::vector<Vector>& states, std::size_t burn_in);

/// Probes an affine map f(x) = H x + J column by column: J = f(0), H e_i = f(e_i) - J.
struct AffineProbe {
    Matrix H;
    Vector J;
};
AffineProbe probe_affine(const std::function<Vector(const Vector&)>& f, Index n);

/// Full matrix with the known diagonal blocks and the off-diagonal blocks of `grid`.
Matrix assemble(const fedgc::BlockSpec& spec, const std::vector<Matrix>& a_diag,
                const fedgc::BlockGrid& grid);

/// Two scalar clients, one round written out by hand with plain doubles.
struct ScalarState {
    double theta[2];
    double a12, a21;
};
struct ScalarRound {
    ScalarState next;
    double server_loss;
    double client_loss[2];
};
ScalarRound hand_round(const ScalarState& s, const double a[2], const double c[2], const double hc_prev[2],
                       const double y_prev[2], const double y_t[2], double eta1, double eta2,
                       double gamma);

/// Setup for a simulated system with a given horizon and seed (h^0 = 0 unless given).
fedgc::FederationSetup simulated_setup(const fedgc::BlockSystem& system, std::size_t T, std::uint64_t seed,
                                       const Vector* h0 = nullptr);

/// Random system with the given partition, stable diagonal and coupled off-diagonal blocks.
fedgc::BlockSystem random_system(const fedgc::BlockSpec& spec, std::uint64_t seed, double rho = 0.8,
                                 double q = 0.01, double r = 0.01);

}  // namespace oracles
