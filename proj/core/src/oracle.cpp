#include "fedgc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fedgc {

CentralizedOracle::CentralizedOracle(Matrix a, Matrix c, Matrix gain)
    : filter_(std::move(a), std::move(c), std::move(gain)) {}

KalmanStep CentralizedOracle::step(const Vector& y) { return filter_.step(y); }

OracleTrace run_oracle(const BlockSystem& system, const std::vector<Vector>& measurements,
                       const std::optional<Matrix>& gain) {
    OracleTrace trace;
    trace.gain = gain ? *gain
                      : steady_state_gain(system.A(), system.C(), system.q_proc(), system.r_meas())
                            .gain;
    CentralizedOracle oracle(system.A(), system.C(), trace.gain);
    trace.closed_loop_radius = oracle.closed_loop_radius();
    if (measurements.empty()) return trace;

    const Index n = system.spec().state_dim();
    trace.estimates.push_back(oracle.h_hat());
    trace.predictions.push_back(Vector::Zero(n));
    trace.residuals.push_back(Vector::Zero(system.spec().obs_dim()));
    for (std::size_t t = 1; t < measurements.size(); ++t) {
        KalmanStep s = oracle.step(measurements[t]);
        trace.estimates.push_back(std::move(s.estimate));
        trace.predictions.push_back(std::move(s.predicted));
        trace.residuals.push_back(std::move(s.residual));
    }
    return trace;
}

AlignedTrajectories align_trajectories(const BlockSpec& spec, const OracleTrace& oracle,
                                       const std::vector<ClientTrace>& clients,
                                       const std::vector<Matrix>& a_diag,
                                       const std::vector<Matrix>& thetas,
                                       const std::vector<std::vector<Vector>>& client_measurements) {
    const std::size_t M = spec.clients();
    if (clients.size() != M || a_diag.size() != M || thetas.size() != M ||
        client_measurements.size() != M) {
        throw std::invalid_argument("align_trajectories: one entry per client required");
    }
    const std::size_t len = oracle.predictions.size();
    for (std::size_t m = 0; m < M; ++m) {
        if (clients[m].estimates.size() != len || client_measurements[m].size() != len) {
            std::ostringstream msg;
            msg << "align_trajectories: client " << m << " stream length differs from the oracle";
            throw std::invalid_argument(msg.str());
        }
    }

    AlignedTrajectories out;
    out.oracle_predicted = oracle.predictions;
    out.oracle_estimated = oracle.estimates;
    out.client_predicted.resize(M);
    out.client_estimated.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        out.client_estimated[m] = clients[m].estimates;
        auto& pred = out.client_predicted[m];
        pred.reserve(len);
        if (len > 0) pred.push_back(Vector::Zero(spec.dim(m)));
        for (std::size_t t = 1; t < len; ++t) {
            pred.push_back(a_diag[m] * augmented_estimate(clients[m].estimates[t - 1], thetas[m],
                                                          client_measurements[m][t - 1]));
        }
    }
    return out;
}

namespace {

std::size_t window_start(std::size_t horizon, std::size_t window, const char* what) {
    if (window == 0 || window > horizon) {
        std::ostringstream msg;
        msg << what << ": window " << window << " must lie in [1, " << horizon << "]";
        throw std::invalid_argument(msg.str());
    }
    return horizon - window + 1;
}

}  // namespace

OracleGapReport oracle_gap(const BlockSpec& spec, const AlignedTrajectories& traj,
                           std::size_t window) {
    const std::size_t M = spec.clients();
    const std::size_t T = traj.horizon();
    if (traj.client_predicted.size() != M || traj.client_estimated.size() != M) {
        throw std::invalid_argument("oracle_gap: one trajectory per client required");
    }
    const std::size_t t0 = window_start(T, window, "oracle_gap");

    OracleGapReport report;
    report.window = window;
    report.state_gap_means.assign(M, Vector());
    report.delta_max.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) report.state_gap_means[m] = Vector::Zero(spec.dim(m));

    double oracle_norm_sum = 0.0;
    for (std::size_t t = t0; t <= T; ++t) {
        oracle_norm_sum += traj.oracle_predicted[t].norm();
        for (std::size_t m = 0; m < M; ++m) {
            const Index off = spec.state_offset(m);
            const Index p = spec.dim(m);
            report.state_gap_means[m] +=
                traj.client_predicted[m][t] - traj.oracle_predicted[t].segment(off, p);
            const double d =
                (traj.oracle_estimated[t].segment(off, p) - traj.client_estimated[m][t]).norm();
            report.delta_max[m] = std::max(report.delta_max[m], d);
        }
    }
    const double w = static_cast<double>(window);
    double sq = 0.0;
    for (auto& g : report.state_gap_means) {
        g /= w;
        sq += g.squaredNorm();
    }
    report.gap_norm = std::sqrt(sq);
    report.mean_oracle_norm = oracle_norm_sum / w;
    if (report.mean_oracle_norm > 0.0) {
        report.relative_gap = report.gap_norm / report.mean_oracle_norm;
    } else {
        report.relative_gap =
            report.gap_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return report;
}

std::vector<GrangerBound> granger_error_bound(const BlockSpec& spec, const Matrix& a_hat,
                                              const Matrix& a_true,
                                              const std::vector<double>& delta_max,
                                              const std::vector<Vector>& oracle_estimated,
                                              std::size_t window) {
    const std::size_t M = spec.clients();
    require_shape(a_hat, spec.state_dim(), spec.state_dim(), "granger_error_bound: A_hat");
    require_shape(a_true, spec.state_dim(), spec.state_dim(), "granger_error_bound: A");
    if (delta_max.size() != M) {
        throw std::invalid_argument("granger_error_bound: one delta_max per client required");
    }
    if (oracle_estimated.empty()) {
        throw std::invalid_argument("granger_error_bound: empty oracle trajectory");
    }
    const std::size_t T = oracle_estimated.size() - 1;
    const std::size_t t0 = window_start(T, window, "granger_error_bound");
    const double w = static_cast<double>(window);

    auto blk = [&](const Matrix& a, std::size_t m, std::size_t n) {
        return a.block(spec.state_offset(m), spec.state_offset(n), spec.dim(m), spec.dim(n));
    };

    // Mean oracle state norm per client, over h_hat_o^{t-1} for t in the window.
    std::vector<double> mean_state_norm(M, 0.0);
    for (std::size_t t = t0; t <= T; ++t) {
        for (std::size_t n = 0; n < M; ++n) {
            mean_state_norm[n] +=
                oracle_estimated[t - 1].segment(spec.state_offset(n), spec.dim(n)).norm() / w;
        }
    }

    std::vector<GrangerBound> out(M);
    for (std::size_t m = 0; m < M; ++m) {
        GrangerBound& b = out[m];
        for (std::size_t t = t0; t <= T; ++t) {
            Vector s = Vector::Zero(spec.dim(m));
            for (std::size_t n = 0; n < M; ++n) {
                if (n == m) continue;
                s += (blk(a_hat, m, n) - blk(a_true, m, n)) *
                     oracle_estimated[t - 1].segment(spec.state_offset(n), spec.dim(n));
            }
            b.lhs += s.norm() / w;
        }

        // ||sum_n delta_n A_hat_mn|| needs equal block shapes; with mixed widths the
        // block row [delta_n A_hat_mn]_n is the natural replacement.
        const Index width = M > 1 ? spec.dim(m == 0 ? 1 : 0) : 0;
        bool same_width = true;
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m && spec.dim(n) != width) same_width = false;
        }
        double cross = 0.0;
        if (M > 1) {
            if (same_width) {
                Matrix sum = Matrix::Zero(spec.dim(m), width);
                Matrix err_sum = Matrix::Zero(spec.dim(m), width);
                for (std::size_t n = 0; n < M; ++n) {
                    if (n == m) continue;
                    sum += delta_max[n] * blk(a_hat, m, n);
                    err_sum += blk(a_hat, m, n) - blk(a_true, m, n);
                }
                cross = spectral_norm(sum);
                b.corollary_lhs = err_sum.norm();
            } else {
                Matrix row(spec.dim(m), spec.state_dim() - spec.dim(m));
                Matrix err_row(spec.dim(m), spec.state_dim() - spec.dim(m));
                Index col = 0;
                for (std::size_t n = 0; n < M; ++n) {
                    if (n == m) continue;
                    row.middleCols(col, spec.dim(n)) = delta_max[n] * blk(a_hat, m, n);
                    err_row.middleCols(col, spec.dim(n)) = blk(a_hat, m, n) - blk(a_true, m, n);
                    col += spec.dim(n);
                }
                cross = spectral_norm(row);
                b.corollary_lhs = err_row.norm();
            }
        }
        b.rhs = spectral_norm(blk(a_true, m, m)) * delta_max[m] + cross;
        b.holds = b.lhs <= b.rhs;

        b.sigma_min = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) b.sigma_min = std::min(b.sigma_min, mean_state_norm[n]);
        }
        b.corollary_applicable = M > 1 && b.sigma_min > 0.0 && std::isfinite(b.sigma_min);
        if (b.corollary_applicable) {
            b.corollary_rhs = b.rhs / b.sigma_min;
            b.corollary_holds = b.corollary_lhs <= b.corollary_rhs;
        } else {
            b.sigma_min = 0.0;
        }
    }
    return out;
}

}  // namespace fedgc
