#include "fedgc/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedgc {

namespace {

void check_budget(double eps, double delta, const char* which) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        std::ostringstream msg;
        msg << "privacy: " << which << " epsilon must be positive, got " << eps;
        throw std::invalid_argument(msg.str());
    }
    if (!(delta > 0.0) || !(delta < 1.0)) {
        std::ostringstream msg;
        msg << "privacy: " << which << " delta must lie in (0, 1), got " << delta;
        throw std::invalid_argument(msg.str());
    }
}

void require_calibrated(const PrivacyParams& params) {
    if (!params.calibrated) throw std::invalid_argument("privacy: parameters are not calibrated");
}

}  // namespace

double gaussian_sigma(double sensitivity, double eps, double delta) {
    check_budget(eps, delta, "gaussian mechanism");
    if (!(sensitivity >= 0.0)) throw std::invalid_argument("privacy: negative sensitivity");
    return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / eps;
}

PrivacyParams calibrate(PrivacyParams params) {
    check_budget(params.eps_c, params.delta_c, "client state");
    check_budget(params.eps_a, params.delta_a, "augmented state");
    check_budget(params.eps_g, params.delta_g, "gradient");
    if (!(params.B_y > 0.0) || !(params.B_K > 0.0) || !(params.B_theta >= 0.0)) {
        throw std::invalid_argument("privacy: B_y and B_K must be positive, B_theta non-negative");
    }
    if (!(params.C_g > 0.0)) throw std::invalid_argument("privacy: C_g must be positive");

    params.sigma_c = gaussian_sigma(2.0 * params.B_y * params.B_K, params.eps_c, params.delta_c);
    params.sigma_a = gaussian_sigma(2.0 * params.B_y * (params.B_K + params.B_theta), params.eps_a,
                                    params.delta_a);
    params.sigma_g = gaussian_sigma(2.0 * params.C_g, params.eps_g, params.delta_g);
    params.calibrated = true;
    return params;
}

PrivacyBudget composed_client_budget(const PrivacyParams& params) {
    return {params.eps_c + params.eps_a, params.delta_c + params.delta_a};
}

PrivacyBudget run_budget(const PrivacyBudget& per_message, std::size_t messages) {
    const double n = static_cast<double>(messages);
    return {per_message.eps * n, std::min(1.0, per_message.delta * n)};
}

std::string composition_warning() {
    return "budgets are per message; the run total uses naive sequential composition and grows "
           "linearly with the number of messages";
}

Matrix clip(const Matrix& g, double c_g) {
    if (!(c_g > 0.0)) throw std::invalid_argument("clip: threshold must be positive");
    const double norm = g.norm();
    if (norm <= c_g) return g;
    Matrix out = g * (c_g / norm);
    // Rounding can leave the result a hair above the threshold.
    const double after = out.norm();
    if (after > c_g) out *= std::nextafter(c_g / after, 0.0);
    return out;
}

Vector clip(const Vector& g, double c_g) {
    const Matrix m = clip(Matrix(g), c_g);
    return m.col(0);
}

std::pair<Vector, Vector> perturb_states(const Vector& h_hat_c, const Vector& h_hat_a,
                                         const PrivacyParams& params, CounterRng& rng_c,
                                         CounterRng& rng_a) {
    require_calibrated(params);
    require_size(h_hat_a, h_hat_c.size(), "perturb_states: augmented state");
    Vector c = h_hat_c;
    Vector a = h_hat_a;
    if (params.sigma_c > 0.0) c += rng_c.normal_vector(c.size(), params.sigma_c);
    if (params.sigma_a > 0.0) a += rng_a.normal_vector(a.size(), params.sigma_a);
    return {std::move(c), std::move(a)};
}

Matrix perturb_gradient(const Matrix& grad, const PrivacyParams& params, CounterRng& rng) {
    require_calibrated(params);
    Matrix out = clip(grad, params.C_g);
    if (params.sigma_g > 0.0) {
        for (Index j = 0; j < out.cols(); ++j) {
            for (Index i = 0; i < out.rows(); ++i) out(i, j) += params.sigma_g * rng.normal();
        }
    }
    return out;
}

Vector perturb_gradient(const Vector& grad, const PrivacyParams& params, CounterRng& rng) {
    const Matrix m = perturb_gradient(Matrix(grad), params, rng);
    return m.col(0);
}

void SensitivityAudit::observe_measurement(const Vector& y) { max_y = std::max(max_y, y.norm()); }
void SensitivityAudit::observe_gain(const Matrix& k) { max_K = std::max(max_K, spectral_norm(k)); }
void SensitivityAudit::observe_theta(const Matrix& theta) {
    max_theta = std::max(max_theta, spectral_norm(theta));
}
void SensitivityAudit::observe_gradient(const Vector& g) { max_grad = std::max(max_grad, g.norm()); }

PrivacyParams SensitivityAudit::implied(PrivacyParams budgets) const {
    // Degenerate runs (all-zero data) still need positive bounds to calibrate.
    constexpr double kFloor = 1e-300;
    budgets.B_y = std::max(max_y, kFloor);
    budgets.B_K = std::max(max_K, kFloor);
    budgets.B_theta = max_theta;
    budgets.C_g = std::max(max_grad, kFloor);
    return calibrate(budgets);
}

}  // namespace fedgc
