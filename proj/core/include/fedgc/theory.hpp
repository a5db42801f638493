#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fedgc/block_system.hpp"
#include "fedgc/federation.hpp"
#include "fedgc/server.hpp"

namespace fedgc {

/// Position of each block inside Delta = [vec A_hat_mn (n != m, ascending), vec theta_m].
struct DeltaLayout {
    std::size_t focal = 0;
    std::vector<std::size_t> partners;  // n != m, ascending
    std::vector<Index> offsets;         // start of vec A_hat_{m,partners[i]}
    Index theta_offset = 0;
    Index size = 0;
    Index rows = 0;        // P_m
    Index theta_cols = 0;  // obs_m
    std::vector<Index> partner_dims;

    DeltaLayout(const BlockSpec& spec, std::size_t m);
};

Vector stack_delta(const DeltaLayout& layout, const BlockGrid& a_hat, const Matrix& theta);

struct UnstackedDelta {
    std::vector<Matrix> a_hat_row;  // indexed like layout.partners
    Matrix theta;
};
UnstackedDelta unstack_delta(const DeltaLayout& layout, const Vector& delta);

/// Data the recurrence needs at one frozen time step t for focal client m.
struct RecurrenceInputs {
    Matrix a_mm;
    Matrix c_mm;
    std::vector<Vector> h_hat_c_prev;  // (h_hat_n^{t-1})_c for every client n
    Vector y_prev;                     // y_m^{t-1}
    Vector y_t;                        // y_m^t
};

RecurrenceInputs recurrence_inputs(const FederationSetup& setup, std::size_t m, std::size_t t);

/// Delta^{k+1} = H Delta^k + J for client m at frozen t, plus the named blocks.
///   A_hat/A_hat (n, p): delta_np I - 2 gamma (h_n h_p^T (x) I)   [P_nn on the diagonal]
///   A_hat/theta (n):    gamma (Q_mn^T (x) R),  Q_mn = y^{t-1} h_n^T,  R = 2 A_mm
///   theta/A_hat (p):    eta2 (Q_mp (x) R^T)
///   theta/theta:        I - G (x) F,  G = y^{t-1} y^{t-1}^T,
///                       F = 2 eta1 A^T C^T C A + 2 eta2 A^T A
///   J:                  [0; 2 eta1 vec(D)],  D = A^T C^T r_c^t y^{t-1}^T
struct RecurrenceSystem {
    std::size_t m = 0;
    std::size_t t = 0;
    DeltaLayout layout;
    Matrix H;
    Vector J;
    // Block cache.
    std::vector<std::vector<Matrix>> P;  // [i][j] over partners
    std::vector<Matrix> Q;               // per partner
    std::vector<std::vector<Matrix>> V;  // h_n h_p^T, [i][j] over partners
    Matrix R;
    Matrix G;
    Matrix F;
    Matrix D;
};

RecurrenceSystem build_recurrence(const BlockSpec& spec, std::size_t m, std::size_t t,
                                  const RecurrenceInputs& inputs, double eta1, double eta2,
                                  double gamma);

Vector recurrence_step(const Matrix& H, const Vector& J, const Vector& delta);

struct ConvergenceVerdict {
    double rho = 0.0;
    bool convergent = false;
    std::optional<Vector> delta_star;  // (I - H)^{-1} J when convergent and well conditioned
    double condition = 0.0;            // of I - H, when a solve was attempted
    bool near_singular = false;        // condition above 1e12 or sigma_min(I-H) below 1e-12; delta_star withheld
};

ConvergenceVerdict convergence_verdict(const Matrix& H, const Vector& J);

/// ||(H d + J) - (d - (I - H)(d - d*))||_inf. Throws std::invalid_argument if
/// the verdict carries no fixed point.
double gd_form_residual(const Matrix& H, const Vector& J, const ConvergenceVerdict& verdict,
                        const Vector& delta);

struct RateCheck {
    double norm = 0.0;  // spectral norm of I - H
    bool sublinear_ok = false;
    std::optional<bool> linear_ok;
    std::optional<double> linear_threshold;  // 2L / (mu + L)
};

/// Throws std::invalid_argument for L <= 0, mu <= 0 or mu > L.
RateCheck rate_check(const Matrix& H, double lipschitz, std::optional<double> mu = std::nullopt);

/// Iterates Delta from `start` and tracks the two sub-vectors separately.
struct JointSettling {
    bool theta_settled = false;  // successive-difference norm below threshold
    bool a_hat_settled = false;
    bool diverged = false;       // iterate norm exceeded the blow-up level
    std::size_t steps = 0;
    double final_norm = 0.0;
    Vector last;
};

JointSettling joint_settling(const Matrix& H, const Vector& J, const DeltaLayout& layout,
                             const Vector& start, std::size_t max_steps = 10000,
                             double threshold = 1e-10, double blow_up = 1e6);

struct OptimalityResiduals {
    std::vector<double> cond1;               // per client
    std::vector<std::vector<double>> cond2;  // [m][n], n != m (0 on the diagonal)
};

/// Window means of the two stationarity conditions:
///   (1) y^t - C A (h_hat_c^{t-1} + theta y^{t-1})
///   (2) (A theta y^{t-1} - sum_p A_hat_mp h_hat_p^{t-1}) h_hat_n^{t-1}^T
OptimalityResiduals optimality_residuals(const FederationSetup& setup,
                                         const std::vector<Matrix>& thetas,
                                         const BlockGrid& a_hat, std::size_t window);

}  // namespace fedgc
