#pragma once

#include <cstddef>
#include <vector>

#include "fedgc/kalman.hpp"

namespace fedgc {

/// Local Kalman filter of client m. Uses only the diagonal blocks A_mm, C_mm.
class ClientModel {
public:
    ClientModel(std::size_t client_id, Matrix a_mm, Matrix c_mm, Matrix gain);

    std::size_t id() const { return id_; }
    const Matrix& A() const { return filter_.A(); }
    const Matrix& C() const { return filter_.C(); }
    const Matrix& K() const { return filter_.K(); }
    Index dim() const { return filter_.A().rows(); }
    Index obs_dim() const { return filter_.C().rows(); }

    /// One predict/correct step: (h_pred, r, h_hat).
    KalmanStep step(const Vector& y);

    const Vector& h_hat() const { return filter_.estimate(); }
    const Vector& h_pred() const { return last_.predicted; }
    const Vector& last_residual() const { return last_.residual; }
    void reset(const Vector& estimate) { filter_.reset(estimate); }

private:
    std::size_t id_;
    KalmanFilter filter_;
    KalmanStep last_;
};

struct FilterStability {
    double rho = 0.0;
    bool stable = false;
};

FilterStability filter_stability(const ClientModel& model);
FilterStability filter_stability(const Matrix& a_mm, const Matrix& k, const Matrix& c_mm);

/// h_hat_a = h_hat_c + theta y.
Vector augmented_estimate(const Vector& h_hat_c, const Matrix& theta, const Vector& y);

/// (L_m)_a = ||y^t - C A (h_hat_c^{t-1} + theta y^{t-1})||^2.
double client_loss(const Matrix& a_mm, const Matrix& c_mm, const Matrix& theta,
                   const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev);

/// Gradient of client_loss with respect to theta:
///   -2 (C A)^T (y^t - C A [h_hat_c^{t-1} + theta y^{t-1}]) y^{t-1}^T.
Matrix grad_theta_client(const Matrix& a_mm, const Matrix& c_mm, const Matrix& theta,
                         const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev);

/// theta - eta1 * grad_client - eta2 * server_grad y_prev^T.
Matrix theta_update(const Matrix& theta, const Matrix& grad_client, const Vector& server_grad,
                    const Vector& y_prev, double eta1, double eta2);

/// Client filter plus the learned linear correction theta_m.
class AugmentedClientModel {
public:
    AugmentedClientModel(ClientModel base, double eta1, double eta2);
    AugmentedClientModel(ClientModel base, double eta1, double eta2, Matrix theta);

    const ClientModel& base() const { return base_; }
    ClientModel& base() { return base_; }
    const Matrix& theta() const { return theta_; }
    void set_theta(Matrix theta);
    double eta1() const { return eta1_; }
    double eta2() const { return eta2_; }

    /// Stores and returns h_hat_c + theta y.
    const Vector& augmented_estimate(const Vector& h_hat_c, const Vector& y);

    /// Stores and returns A_mm times the last augmented estimate.
    const Vector& augmented_predict();

    /// ||y - C h_pred_a|| squared, using the stored augmented prediction.
    double loss(const Vector& y);

    Matrix grad_theta(const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev) const;

    /// Applies theta_update with this model's learning rates.
    const Matrix& update(const Matrix& grad_client, const Vector& server_grad,
                         const Vector& y_prev);

    const Vector& h_hat_a() const { return h_hat_a_; }
    const Vector& h_pred_a() const { return h_pred_a_; }
    const Vector& last_residual_a() const { return last_residual_a_; }

private:
    ClientModel base_;
    Matrix theta_;
    double eta1_;
    double eta2_;
    Vector h_hat_a_;
    Vector h_pred_a_;
    Vector last_residual_a_;
};

/// Output of running a client filter over its whole stream before federation.
struct ClientTrace {
    std::vector<Vector> estimates;    // h_hat_c^t, t = 0..T (t = 0 is the initial estimate)
    std::vector<Vector> predictions;  // h_c^t, entry 0 is zero
    std::vector<Vector> residuals;    // r_c^t, entry 0 is zero

    std::size_t horizon() const { return estimates.empty() ? 0 : estimates.size() - 1; }
};

/// Runs the filter over y^1..y^T starting from its current estimate.
ClientTrace run_client(ClientModel model, const std::vector<Vector>& measurements);

}  // namespace fedgc
