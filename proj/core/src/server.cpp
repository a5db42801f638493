#include "fedgc/server.hpp"

#include <sstream>

namespace fedgc {

BlockGrid zero_off_diagonal(const BlockSpec& spec) {
    const std::size_t M = spec.clients();
    BlockGrid grid(M, std::vector<Matrix>(M));
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            if (m != n) grid[m][n] = Matrix::Zero(spec.dim(m), spec.dim(n));
        }
    }
    return grid;
}

ServerModel::ServerModel(BlockSpec spec, std::vector<Matrix> a_diag, double gamma)
    : ServerModel(spec, std::move(a_diag), gamma, zero_off_diagonal(spec)) {}

ServerModel::ServerModel(BlockSpec spec, std::vector<Matrix> a_diag, double gamma,
                         BlockGrid a_hat)
    : spec_(std::move(spec)), a_diag_(std::move(a_diag)), gamma_(gamma), a_hat_(std::move(a_hat)) {
    const std::size_t M = spec_.clients();
    if (a_diag_.size() != M) {
        std::ostringstream msg;
        msg << "ServerModel: " << a_diag_.size() << " diagonal blocks for " << M << " clients";
        throw std::invalid_argument(msg.str());
    }
    if (gamma_ < 0.0) throw std::invalid_argument("ServerModel: gamma must be non-negative");
    for (std::size_t m = 0; m < M; ++m) {
        require_shape(a_diag_[m], spec_.dim(m), spec_.dim(m), "ServerModel: A_mm");
    }
    if (a_hat_.size() != M) throw std::invalid_argument("ServerModel: A_hat grid has wrong size");
    for (std::size_t m = 0; m < M; ++m) {
        if (a_hat_[m].size() != M) {
            throw std::invalid_argument("ServerModel: A_hat grid has wrong size");
        }
        for (std::size_t n = 0; n < M; ++n) {
            if (m == n) {
                a_hat_[m][n] = Matrix();
                continue;
            }
            require_shape(a_hat_[m][n], spec_.dim(m), spec_.dim(n), "ServerModel: A_hat_mn");
        }
    }
}

const Matrix& ServerModel::A_hat(std::size_t m, std::size_t n) const {
    if (m == n) throw std::invalid_argument("A_hat: diagonal blocks are known, not estimated");
    return a_hat_.at(m).at(n);
}

void ServerModel::set_A_hat(std::size_t m, std::size_t n, Matrix block) {
    if (m == n) throw std::invalid_argument("set_A_hat: diagonal blocks are known, not estimated");
    require_shape(block, spec_.dim(m), spec_.dim(n), "set_A_hat");
    a_hat_.at(m).at(n) = std::move(block);
}

Matrix ServerModel::assembled() const {
    const std::size_t M = spec_.clients();
    Matrix out(spec_.state_dim(), spec_.state_dim());
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            out.block(spec_.state_offset(m), spec_.state_offset(n), spec_.dim(m), spec_.dim(n)) =
                (m == n) ? a_diag_[m] : a_hat_[m][n];
        }
    }
    return out;
}

namespace {

void check_states(const BlockSpec& spec, const std::vector<Vector>& states, const char* what) {
    if (states.size() != spec.clients()) {
        std::ostringstream msg;
        msg << what << ": expected " << spec.clients() << " client states, got " << states.size();
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t m = 0; m < states.size(); ++m) require_size(states[m], spec.dim(m), what);
}

// Predicted block for client m only.
Vector predict_block(const ServerModel& model, const std::vector<Vector>& h_hat_c_all,
                     std::size_t m) {
    Vector out = model.A_diag(m) * h_hat_c_all[m];
    for (std::size_t n = 0; n < model.spec().clients(); ++n) {
        if (n != m) out.noalias() += model.A_hat(m, n) * h_hat_c_all[n];
    }
    return out;
}

}  // namespace

Vector server_predict(const ServerModel& model, const std::vector<Vector>& h_hat_c_all) {
    const BlockSpec& spec = model.spec();
    check_states(spec, h_hat_c_all, "server_predict");
    Vector out(spec.state_dim());
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        out.segment(spec.state_offset(m), spec.dim(m)) = predict_block(model, h_hat_c_all, m);
    }
    return out;
}

Vector server_labels(const std::vector<Vector>& h_hat_a_all, const std::vector<Matrix>& a_diag) {
    if (h_hat_a_all.size() != a_diag.size()) {
        throw std::invalid_argument("server_labels: one augmented state per diagonal block");
    }
    Index total = 0;
    for (const auto& a : a_diag) total += a.rows();
    Vector out(total);
    Index offset = 0;
    for (std::size_t m = 0; m < a_diag.size(); ++m) {
        require_shape(a_diag[m], a_diag[m].rows(), a_diag[m].rows(), "server_labels: A_mm");
        require_size(h_hat_a_all[m], a_diag[m].rows(), "server_labels: augmented state");
        out.segment(offset, a_diag[m].rows()) = a_diag[m] * h_hat_a_all[m];
        offset += a_diag[m].rows();
    }
    return out;
}

double server_loss(const Vector& h_a, const Vector& h_s) {
    require_size(h_s, h_a.size(), "server_loss");
    return (h_a - h_s).squaredNorm();
}

ServerRound make_round(const ServerModel& model, std::size_t t, std::vector<Vector> h_hat_c_all,
                       std::vector<Vector> h_hat_a_all) {
    check_states(model.spec(), h_hat_c_all, "make_round: client estimates");
    check_states(model.spec(), h_hat_a_all, "make_round: augmented estimates");
    ServerRound round;
    round.t = t;
    round.h_hat_c_all = std::move(h_hat_c_all);
    round.h_hat_a_all = std::move(h_hat_a_all);
    round.H_s = server_predict(model, round.h_hat_c_all);
    round.H_a = server_labels(round.h_hat_a_all, model.A_diag());
    round.loss = server_loss(round.H_a, round.H_s);
    return round;
}

namespace {

Vector label_error(const ServerModel& model, const ServerRound& round, std::size_t m) {
    const BlockSpec& spec = model.spec();
    return round.H_a.segment(spec.state_offset(m), spec.dim(m)) -
           round.H_s.segment(spec.state_offset(m), spec.dim(m));
}

}  // namespace

Matrix grad_A(const ServerModel& model, const ServerRound& round, std::size_t m, std::size_t n) {
    if (m == n) throw std::invalid_argument("grad_A: diagonal blocks are known, not estimated");
    const std::size_t M = model.spec().clients();
    if (m >= M || n >= M) throw std::out_of_range("grad_A: client index out of range");
    return -2.0 * label_error(model, round, m) * round.h_hat_c_all[n].transpose();
}

Vector grad_state(const ServerModel& model, const ServerRound& round, std::size_t m) {
    if (m >= model.spec().clients()) throw std::out_of_range("grad_state: client index out of range");
    return 2.0 * model.A_diag(m).transpose() * label_error(model, round, m);
}

ServerGradients server_gradients(const ServerModel& model, const ServerRound& round) {
    const std::size_t M = model.spec().clients();
    ServerGradients out;
    out.grad_A.assign(M, std::vector<Matrix>(M));
    out.grad_state.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        const Vector e = label_error(model, round, m);
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) out.grad_A[m][n] = -2.0 * e * round.h_hat_c_all[n].transpose();
        }
        out.grad_state.push_back(2.0 * model.A_diag(m).transpose() * e);
    }
    return out;
}

void A_update(ServerModel& model, const BlockGrid& grads) {
    const std::size_t M = model.spec().clients();
    if (grads.size() != M) throw std::invalid_argument("A_update: gradient grid has wrong size");
    // Validate everything first so a bad grid leaves the model untouched.
    for (std::size_t m = 0; m < M; ++m) {
        if (grads[m].size() != M) throw std::invalid_argument("A_update: gradient grid has wrong size");
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) {
                require_shape(grads[m][n], model.spec().dim(m), model.spec().dim(n),
                              "A_update: gradient block");
            }
        }
    }
    const double gamma = model.gamma();
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) model.set_A_hat(m, n, model.A_hat(m, n) - gamma * grads[m][n]);
        }
    }
}

}  // namespace fedgc
