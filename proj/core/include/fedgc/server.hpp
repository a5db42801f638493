#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fedgc/block_system.hpp"

namespace fedgc {

/// Square grid of per-pair matrices indexed [m][n]; diagonal cells are unused.
using BlockGrid = std::vector<std::vector<Matrix>>;

/// Zero-filled grid of P_m x P_n blocks for every ordered pair m != n.
BlockGrid zero_off_diagonal(const BlockSpec& spec);

/// Server model: known diagonal blocks, learnable off-diagonal blocks A_hat_mn.
class ServerModel {
public:
    ServerModel(BlockSpec spec, std::vector<Matrix> a_diag, double gamma);
    ServerModel(BlockSpec spec, std::vector<Matrix> a_diag, double gamma, BlockGrid a_hat);

    const BlockSpec& spec() const { return spec_; }
    const Matrix& A_diag(std::size_t m) const { return a_diag_.at(m); }
    const std::vector<Matrix>& A_diag() const { return a_diag_; }
    double gamma() const { return gamma_; }

    /// Throws std::invalid_argument for m == n (diagonal blocks are known).
    const Matrix& A_hat(std::size_t m, std::size_t n) const;
    void set_A_hat(std::size_t m, std::size_t n, Matrix block);
    const BlockGrid& A_hat_grid() const { return a_hat_; }

    /// Full estimated state matrix: known diagonals plus A_hat off the diagonal.
    Matrix assembled() const;

private:
    BlockSpec spec_;
    std::vector<Matrix> a_diag_;
    double gamma_;
    BlockGrid a_hat_;
};

/// H_s: (h_m)_s = A_mm h_hat_c_m + sum_{n != m} A_hat_mn h_hat_c_n, concatenated.
Vector server_predict(const ServerModel& model, const std::vector<Vector>& h_hat_c_all);

/// H_a: (h_m)_a = A_mm h_hat_a_m, concatenated.
Vector server_labels(const std::vector<Vector>& h_hat_a_all, const std::vector<Matrix>& a_diag);

double server_loss(const Vector& h_a, const Vector& h_s);

/// Everything the server holds for one time step.
struct ServerRound {
    std::size_t t = 0;
    std::vector<Vector> h_hat_c_all;  // (h_hat_m^{t-1})_c
    std::vector<Vector> h_hat_a_all;  // (h_hat_m^{t-1})_a
    Vector H_s;
    Vector H_a;
    double loss = 0.0;
};

ServerRound make_round(const ServerModel& model, std::size_t t, std::vector<Vector> h_hat_c_all,
                       std::vector<Vector> h_hat_a_all);

/// dL_s / dA_hat_mn = -2 e_m h_hat_c_n^T with e_m = (H_a - H_s)_m.
Matrix grad_A(const ServerModel& model, const ServerRound& round, std::size_t m, std::size_t n);

/// dL_s / d(h_hat_a_m) = 2 A_mm^T e_m; the vector sent back to client m.
Vector grad_state(const ServerModel& model, const ServerRound& round, std::size_t m);

struct ServerGradients {
    BlockGrid grad_A;              // [m][n], n != m
    std::vector<Vector> grad_state;  // per client
};

/// All gradients of one round, computed from the current parameters.
ServerGradients server_gradients(const ServerModel& model, const ServerRound& round);

/// A_hat_mn <- A_hat_mn - gamma * grad, every pair updated from the same round.
void A_update(ServerModel& model, const BlockGrid& grads);

}  // namespace fedgc
