#include "fedgc/client.hpp"

#include <sstream>

namespace fedgc {

ClientModel::ClientModel(std::size_t client_id, Matrix a_mm, Matrix c_mm, Matrix gain)
    : id_(client_id), filter_(std::move(a_mm), std::move(c_mm), std::move(gain)) {
    last_.predicted = Vector::Zero(dim());
    last_.residual = Vector::Zero(obs_dim());
    last_.estimate = filter_.estimate();
}

KalmanStep ClientModel::step(const Vector& y) {
    last_ = filter_.step(y);
    return last_;
}

FilterStability filter_stability(const Matrix& a_mm, const Matrix& k, const Matrix& c_mm) {
    FilterStability out;
    out.rho = closed_loop_radius(a_mm, k, c_mm);
    out.stable = out.rho < 1.0;
    return out;
}

FilterStability filter_stability(const ClientModel& model) {
    return filter_stability(model.A(), model.K(), model.C());
}

Vector augmented_estimate(const Vector& h_hat_c, const Matrix& theta, const Vector& y) {
    require_shape(theta, h_hat_c.size(), y.size(), "augmented_estimate: theta");
    return h_hat_c + theta * y;
}

namespace {

void check_client_args(const Matrix& a_mm, const Matrix& c_mm, const Matrix& theta,
                       const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev) {
    const Index p = a_mm.rows();
    require_shape(a_mm, p, p, "client: A_mm");
    require_shape(c_mm, c_mm.rows(), p, "client: C_mm");
    require_shape(theta, p, c_mm.rows(), "client: theta");
    require_size(y_t, c_mm.rows(), "client: y^t");
    require_size(y_prev, c_mm.rows(), "client: y^{t-1}");
    require_size(h_hat_c_prev, p, "client: h_hat_c^{t-1}");
}

}  // namespace

double client_loss(const Matrix& a_mm, const Matrix& c_mm, const Matrix& theta,
                   const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev) {
    check_client_args(a_mm, c_mm, theta, y_t, y_prev, h_hat_c_prev);
    const Vector residual = y_t - c_mm * (a_mm * (h_hat_c_prev + theta * y_prev));
    return residual.squaredNorm();
}

Matrix grad_theta_client(const Matrix& a_mm, const Matrix& c_mm, const Matrix& theta,
                         const Vector& y_t, const Vector& y_prev, const Vector& h_hat_c_prev) {
    check_client_args(a_mm, c_mm, theta, y_t, y_prev, h_hat_c_prev);
    const Matrix ca = c_mm * a_mm;
    const Vector residual = y_t - ca * (h_hat_c_prev + theta * y_prev);
    return -2.0 * ca.transpose() * residual * y_prev.transpose();
}

Matrix theta_update(const Matrix& theta, const Matrix& grad_client, const Vector& server_grad,
                    const Vector& y_prev, double eta1, double eta2) {
    require_shape(grad_client, theta.rows(), theta.cols(), "theta_update: client gradient");
    require_size(server_grad, theta.rows(), "theta_update: server gradient");
    require_size(y_prev, theta.cols(), "theta_update: y^{t-1}");
    return theta - eta1 * grad_client - eta2 * server_grad * y_prev.transpose();
}

AugmentedClientModel::AugmentedClientModel(ClientModel base, double eta1, double eta2)
    : AugmentedClientModel(base, eta1, eta2, Matrix::Zero(base.dim(), base.obs_dim())) {}

AugmentedClientModel::AugmentedClientModel(ClientModel base, double eta1, double eta2,
                                           Matrix theta)
    : base_(std::move(base)), eta1_(eta1), eta2_(eta2) {
    if (eta1_ < 0.0 || eta2_ < 0.0) {
        throw std::invalid_argument("AugmentedClientModel: learning rates must be non-negative");
    }
    set_theta(std::move(theta));
    h_hat_a_ = base_.h_hat();
    h_pred_a_ = Vector::Zero(base_.dim());
    last_residual_a_ = Vector::Zero(base_.obs_dim());
}

void AugmentedClientModel::set_theta(Matrix theta) {
    require_shape(theta, base_.dim(), base_.obs_dim(), "AugmentedClientModel: theta");
    theta_ = std::move(theta);
}

const Vector& AugmentedClientModel::augmented_estimate(const Vector& h_hat_c, const Vector& y) {
    h_hat_a_ = fedgc::augmented_estimate(h_hat_c, theta_, y);
    return h_hat_a_;
}

const Vector& AugmentedClientModel::augmented_predict() {
    h_pred_a_ = base_.A() * h_hat_a_;
    return h_pred_a_;
}

double AugmentedClientModel::loss(const Vector& y) {
    require_size(y, base_.obs_dim(), "AugmentedClientModel::loss: measurement");
    last_residual_a_ = y - base_.C() * h_pred_a_;
    return last_residual_a_.squaredNorm();
}

Matrix AugmentedClientModel::grad_theta(const Vector& y_t, const Vector& y_prev,
                                        const Vector& h_hat_c_prev) const {
    return grad_theta_client(base_.A(), base_.C(), theta_, y_t, y_prev, h_hat_c_prev);
}

const Matrix& AugmentedClientModel::update(const Matrix& grad_client, const Vector& server_grad,
                                           const Vector& y_prev) {
    theta_ = theta_update(theta_, grad_client, server_grad, y_prev, eta1_, eta2_);
    return theta_;
}

ClientTrace run_client(ClientModel model, const std::vector<Vector>& measurements) {
    ClientTrace trace;
    if (measurements.empty()) return trace;
    const std::size_t T = measurements.size() - 1;
    trace.estimates.reserve(T + 1);
    trace.predictions.reserve(T + 1);
    trace.residuals.reserve(T + 1);
    trace.estimates.push_back(model.h_hat());
    trace.predictions.push_back(Vector::Zero(model.dim()));
    trace.residuals.push_back(Vector::Zero(model.obs_dim()));
    for (std::size_t t = 1; t <= T; ++t) {
        KalmanStep s = model.step(measurements[t]);
        trace.estimates.push_back(std::move(s.estimate));
        trace.predictions.push_back(std::move(s.predicted));
        trace.residuals.push_back(std::move(s.residual));
    }
    return trace;
}

}  // namespace fedgc
