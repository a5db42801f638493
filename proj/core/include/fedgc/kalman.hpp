#pragma once

#include "fedgc/linalg.hpp"

namespace fedgc {

struct GainResult {
    Matrix gain;
    Matrix predicted_covariance;  // steady-state prior covariance
    int iterations = 0;
    double closed_loop_radius = 0.0;  // rho(A - A K C)
    bool stable = false;
};

/// Steady-state Kalman gain from the discrete Riccati recursion
///   P_pred = A P A^T + qI,  K = P_pred C^T (C P_pred C^T + rI)^-1,  P = (I - KC) P_pred
/// iterated to a fixed point. Throws NumericalError("gain iteration failed") if the
/// recursion has not settled after `max_iterations`.
GainResult steady_state_gain(const Matrix& a, const Matrix& c, double q_proc, double r_meas,
                             double tolerance = 1e-12, int max_iterations = 100000);

/// rho(A - A K C), the closed-loop matrix of the one-step predictor.
double closed_loop_radius(const Matrix& a, const Matrix& k, const Matrix& c);

struct KalmanStep {
    Vector predicted;  // h^t = A h_hat^{t-1}
    Vector residual;   // r^t = y^t - C h^t
    Vector estimate;   // h_hat^t = h^t + K r^t
};

/// Fixed-gain Kalman filter.
class KalmanFilter {
public:
    KalmanFilter(Matrix a, Matrix c, Matrix k, Vector initial_estimate);
    KalmanFilter(Matrix a, Matrix c, Matrix k);  // h_hat^0 = 0

    KalmanStep step(const Vector& y);

    const Matrix& A() const { return a_; }
    const Matrix& C() const { return c_; }
    const Matrix& K() const { return k_; }
    const Vector& estimate() const { return estimate_; }
    void reset(const Vector& estimate);

    double closed_loop_radius() const { return fedgc::closed_loop_radius(a_, k_, c_); }

private:
    Matrix a_;
    Matrix c_;
    Matrix k_;
    Vector estimate_;
};

}  // namespace fedgc
