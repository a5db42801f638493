#include "fedgc/kalman.hpp"

#include <sstream>

namespace fedgc {

GainResult steady_state_gain(const Matrix& a, const Matrix& c, double q_proc, double r_meas,
                             double tolerance, int max_iterations) {
    if (a.rows() != a.cols()) throw std::invalid_argument("steady_state_gain: A must be square");
    if (c.cols() != a.rows()) {
        std::ostringstream msg;
        msg << "steady_state_gain: C has " << c.cols() << " columns, A has side " << a.rows();
        throw std::invalid_argument(msg.str());
    }
    if (q_proc < 0.0 || r_meas < 0.0 || !(q_proc + r_meas > 0.0)) {
        throw std::invalid_argument(
            "steady_state_gain: noise variances must be non-negative and not both zero");
    }
    const Index n = a.rows();
    const Index p = c.rows();
    const Matrix q = q_proc * Matrix::Identity(n, n);
    const Matrix r = r_meas * Matrix::Identity(p, p);

    auto gain_of = [&](const Matrix& p_pred) -> Matrix {
        const Matrix s = c * p_pred * c.transpose() + r;
        Eigen::LDLT<Matrix> ldlt(s);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            throw NumericalError("gain iteration failed: singular innovation covariance");
        }
        // K = P C^T S^-1 = (S^-1 C P)^T for symmetric P, S.
        return ldlt.solve(c * p_pred).transpose();
    };

    Matrix p_post = Matrix::Identity(n, n);
    for (int it = 1; it <= max_iterations; ++it) {
        Matrix p_pred = a * p_post * a.transpose() + q;
        p_pred = 0.5 * (p_pred + p_pred.transpose());
        const Matrix k = gain_of(p_pred);
        Matrix next = (Matrix::Identity(n, n) - k * c) * p_pred;
        next = 0.5 * (next + next.transpose());
        const double change = (next - p_post).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
        p_post = std::move(next);
        if (change <= tolerance * scale) {
            GainResult out;
            out.predicted_covariance = a * p_post * a.transpose() + q;
            out.predicted_covariance =
                0.5 * (out.predicted_covariance + out.predicted_covariance.transpose());
            out.gain = gain_of(out.predicted_covariance);
            out.iterations = it;
            out.closed_loop_radius = closed_loop_radius(a, out.gain, c);
            out.stable = out.closed_loop_radius < 1.0;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "gain iteration failed: no fixed point within " << max_iterations << " iterations";
    throw NumericalError(msg.str());
}

double closed_loop_radius(const Matrix& a, const Matrix& k, const Matrix& c) {
    require_shape(k, a.rows(), c.rows(), "closed_loop_radius: gain");
    return spectral_radius(a - a * k * c);
}

KalmanFilter::KalmanFilter(Matrix a, Matrix c, Matrix k, Vector initial_estimate)
    : a_(std::move(a)), c_(std::move(c)), k_(std::move(k)), estimate_(std::move(initial_estimate)) {
    require_shape(a_, a_.rows(), a_.rows(), "KalmanFilter: A");
    require_shape(c_, c_.rows(), a_.rows(), "KalmanFilter: C");
    require_shape(k_, a_.rows(), c_.rows(), "KalmanFilter: K");
    require_size(estimate_, a_.rows(), "KalmanFilter: initial estimate");
}

KalmanFilter::KalmanFilter(Matrix a, Matrix c, Matrix k)
    : KalmanFilter(a, std::move(c), std::move(k), Vector::Zero(a.rows())) {}

KalmanStep KalmanFilter::step(const Vector& y) {
    require_size(y, c_.rows(), "KalmanFilter::step: measurement");
    KalmanStep out;
    out.predicted = a_ * estimate_;
    out.residual = y - c_ * out.predicted;
    out.estimate = out.predicted + k_ * out.residual;
    estimate_ = out.estimate;
    return out;
}

void KalmanFilter::reset(const Vector& estimate) {
    require_size(estimate, a_.rows(), "KalmanFilter::reset");
    estimate_ = estimate;
}

}  // namespace fedgc
