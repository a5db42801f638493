#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "fedgc/linalg.hpp"
#include "fedgc/rng.hpp"

namespace fedgc {

/// Budgets, sensitivity bounds and Gaussian noise scales for both message
/// directions. The sigmas are filled in by calibrate().
struct PrivacyParams {
    double eps_c = 1.0, delta_c = 1e-5;  // client filter state
    double eps_a = 1.0, delta_a = 1e-5;  // augmented state
    double eps_g = 1.0, delta_g = 1e-5;  // server gradient
    double B_y = 1.0;      // ||y_m^t||_2 bound
    double B_K = 1.0;      // ||K_m||_2 bound
    double B_theta = 0.0;  // ||theta_m||_2 bound
    double C_g = 1.0;      // clip threshold
    double sigma_c = 0.0, sigma_a = 0.0, sigma_g = 0.0;
    bool calibrated = false;
};

/// sqrt(2 ln(1.25 / delta)) * sensitivity / eps.
double gaussian_sigma(double sensitivity, double eps, double delta);

/// Sets every sigma to the smallest value allowed by its bound. Throws
/// std::invalid_argument for eps <= 0, delta outside (0, 1) or bad bounds.
PrivacyParams calibrate(PrivacyParams params);

struct PrivacyBudget {
    double eps = 0.0;
    double delta = 0.0;
};

/// Sequential composition of the two client-to-server releases in one message.
PrivacyBudget composed_client_budget(const PrivacyParams& params);

/// Naive sequential composition over `messages` per-message releases. Grows
/// linearly; there is no tighter accountant here.
PrivacyBudget run_budget(const PrivacyBudget& per_message, std::size_t messages);

/// Warning text attached to any reported run-level budget.
std::string composition_warning();

/// G * min(1, C_g / ||G||_F).
Matrix clip(const Matrix& g, double c_g);
Vector clip(const Vector& g, double c_g);

/// Adds N(0, sigma_c^2 I) and N(0, sigma_a^2 I) from two separate streams.
std::pair<Vector, Vector> perturb_states(const Vector& h_hat_c, const Vector& h_hat_a,
                                         const PrivacyParams& params, CounterRng& rng_c,
                                         CounterRng& rng_a);

/// clip(grad, C_g) + N(0, sigma_g^2 I).
Vector perturb_gradient(const Vector& grad, const PrivacyParams& params, CounterRng& rng);
Matrix perturb_gradient(const Matrix& grad, const PrivacyParams& params, CounterRng& rng);

/// Largest norms seen during a run; used to report the bounds a run would have
/// needed when no bounds were supplied.
struct SensitivityAudit {
    double max_y = 0.0;
    double max_K = 0.0;
    double max_theta = 0.0;
    double max_grad = 0.0;

    void observe_measurement(const Vector& y);
    void observe_gain(const Matrix& k);
    void observe_theta(const Matrix& theta);
    void observe_gradient(const Vector& g);

    /// `budgets` with B_y, B_K, B_theta, C_g replaced by the observed maxima, calibrated.
    PrivacyParams implied(PrivacyParams budgets) const;
};

}  // namespace fedgc
