#include "fedgc/theory.hpp"

#include <cmath>
#include <sstream>

namespace fedgc {

DeltaLayout::DeltaLayout(const BlockSpec& spec, std::size_t m) : focal(m) {
    if (m >= spec.clients()) throw std::out_of_range("DeltaLayout: focal client out of range");
    rows = spec.dim(m);
    theta_cols = spec.obs_dim(m);
    Index offset = 0;
    for (std::size_t n = 0; n < spec.clients(); ++n) {
        if (n == m) continue;
        partners.push_back(n);
        partner_dims.push_back(spec.dim(n));
        offsets.push_back(offset);
        offset += rows * spec.dim(n);
    }
    theta_offset = offset;
    size = offset + rows * theta_cols;
}

Vector stack_delta(const DeltaLayout& layout, const BlockGrid& a_hat, const Matrix& theta) {
    Vector out(layout.size);
    for (std::size_t i = 0; i < layout.partners.size(); ++i) {
        const Matrix& block = a_hat.at(layout.focal).at(layout.partners[i]);
        require_shape(block, layout.rows, layout.partner_dims[i], "stack_delta: A_hat block");
        out.segment(layout.offsets[i], block.size()) = vec(block);
    }
    require_shape(theta, layout.rows, layout.theta_cols, "stack_delta: theta");
    out.segment(layout.theta_offset, theta.size()) = vec(theta);
    return out;
}

UnstackedDelta unstack_delta(const DeltaLayout& layout, const Vector& delta) {
    require_size(delta, layout.size, "unstack_delta");
    UnstackedDelta out;
    for (std::size_t i = 0; i < layout.partners.size(); ++i) {
        const Index n = layout.rows * layout.partner_dims[i];
        out.a_hat_row.push_back(
            unvec(delta.segment(layout.offsets[i], n), layout.rows, layout.partner_dims[i]));
    }
    out.theta = unvec(delta.segment(layout.theta_offset, layout.rows * layout.theta_cols),
                      layout.rows, layout.theta_cols);
    return out;
}

RecurrenceInputs recurrence_inputs(const FederationSetup& setup, std::size_t m, std::size_t t) {
    if (m >= setup.spec.clients()) throw std::out_of_range("recurrence_inputs: client out of range");
    if (t < 1 || t > setup.horizon()) {
        std::ostringstream msg;
        msg << "recurrence_inputs: t=" << t << " outside [1, " << setup.horizon() << "]";
        throw std::invalid_argument(msg.str());
    }
    RecurrenceInputs in;
    in.a_mm = setup.a_diag[m];
    in.c_mm = setup.c_diag[m];
    for (std::size_t n = 0; n < setup.spec.clients(); ++n) {
        in.h_hat_c_prev.push_back(setup.traces[n].estimates[t - 1]);
    }
    in.y_prev = setup.measurements[m][t - 1];
    in.y_t = setup.measurements[m][t];
    return in;
}

RecurrenceSystem build_recurrence(const BlockSpec& spec, std::size_t m, std::size_t t,
                                  const RecurrenceInputs& in, double eta1, double eta2,
                                  double gamma) {
    RecurrenceSystem rs{m, t, DeltaLayout(spec, m), {}, {}, {}, {}, {}, {}, {}, {}, {}};
    const DeltaLayout& L = rs.layout;
    const Index pm = L.rows;
    const Index om = L.theta_cols;
    require_shape(in.a_mm, pm, pm, "build_recurrence: A_mm");
    require_shape(in.c_mm, om, pm, "build_recurrence: C_mm");
    require_size(in.y_prev, om, "build_recurrence: y^{t-1}");
    require_size(in.y_t, om, "build_recurrence: y^t");
    if (in.h_hat_c_prev.size() != spec.clients()) {
        throw std::invalid_argument("build_recurrence: one client estimate per client required");
    }
    for (std::size_t n = 0; n < spec.clients(); ++n) {
        require_size(in.h_hat_c_prev[n], spec.dim(n), "build_recurrence: client estimate");
    }

    const Matrix& A = in.a_mm;
    const Matrix& C = in.c_mm;
    const Matrix I_pm = Matrix::Identity(pm, pm);
    const std::size_t np = L.partners.size();

    rs.R = 2.0 * A;
    rs.G = in.y_prev * in.y_prev.transpose();
    const Matrix CA = C * A;
    rs.F = 2.0 * eta1 * CA.transpose() * CA + 2.0 * eta2 * A.transpose() * A;
    const Vector r_c = in.y_t - CA * in.h_hat_c_prev[m];
    rs.D = A.transpose() * C.transpose() * r_c * in.y_prev.transpose();

    rs.H = Matrix::Zero(L.size, L.size);
    rs.J = Vector::Zero(L.size);
    rs.P.assign(np, std::vector<Matrix>(np));
    rs.V.assign(np, std::vector<Matrix>(np));

    for (std::size_t i = 0; i < np; ++i) {
        const Vector& h_n = in.h_hat_c_prev[L.partners[i]];
        rs.Q.push_back(in.y_prev * h_n.transpose());
        for (std::size_t j = 0; j < np; ++j) {
            const Vector& h_p = in.h_hat_c_prev[L.partners[j]];
            rs.V[i][j] = h_n * h_p.transpose();
            Matrix block = -2.0 * gamma * kron(rs.V[i][j], I_pm);
            if (i == j) block += Matrix::Identity(block.rows(), block.cols());
            rs.P[i][j] = block;
            rs.H.block(L.offsets[i], L.offsets[j], block.rows(), block.cols()) = block;
        }
    }
    for (std::size_t i = 0; i < np; ++i) {
        const Matrix a_theta = gamma * kron(rs.Q[i].transpose(), rs.R);
        rs.H.block(L.offsets[i], L.theta_offset, a_theta.rows(), a_theta.cols()) = a_theta;
        const Matrix theta_a = eta2 * kron(rs.Q[i], rs.R.transpose());
        rs.H.block(L.theta_offset, L.offsets[i], theta_a.rows(), theta_a.cols()) = theta_a;
    }
    const Index nt = pm * om;
    rs.H.block(L.theta_offset, L.theta_offset, nt, nt) =
        Matrix::Identity(nt, nt) - kron(rs.G, rs.F);
    rs.J.segment(L.theta_offset, nt) = 2.0 * eta1 * vec(rs.D);
    return rs;
}

Vector recurrence_step(const Matrix& H, const Vector& J, const Vector& delta) {
    require_shape(H, J.size(), J.size(), "recurrence_step: H");
    require_size(delta, J.size(), "recurrence_step: Delta");
    return H * delta + J;
}

ConvergenceVerdict convergence_verdict(const Matrix& H, const Vector& J) {
    require_shape(H, J.size(), J.size(), "convergence_verdict: H");
    ConvergenceVerdict v;
    v.rho = spectral_radius(H);
    v.convergent = v.rho < 1.0;
    if (!v.convergent) return v;
    const Matrix lhs = Matrix::Identity(H.rows(), H.cols()) - H;
    const ConditionedSolve solved = solve_with_condition(lhs, J);
    v.condition = solved.condition;
    // The condition estimate is scale-free, so a 1x1 (I - H) of 1e-15 looks
    // perfect; I - H is compared against I through its smallest singular value.
    const double smallest = Eigen::BDCSVD<Matrix>(lhs).singularValues().tail(1)(0);
    if (solved.condition > 1e12 || smallest < 1e-12) {
        v.near_singular = true;
    } else {
        v.delta_star = solved.solution;
    }
    return v;
}

double gd_form_residual(const Matrix& H, const Vector& J, const ConvergenceVerdict& verdict,
                        const Vector& delta) {
    if (!verdict.delta_star) {
        throw std::invalid_argument("gd_form_residual: no fixed point available");
    }
    const Vector& star = *verdict.delta_star;
    const Vector step = recurrence_step(H, J, delta);
    const Vector gd = delta - (delta - star - H * (delta - star));
    return (step - gd).cwiseAbs().maxCoeff();
}

RateCheck rate_check(const Matrix& H, double lipschitz, std::optional<double> mu) {
    if (!(lipschitz > 0.0)) throw std::invalid_argument("rate_check: L must be positive");
    if (mu && (!(*mu > 0.0) || *mu > lipschitz)) {
        throw std::invalid_argument("rate_check: mu must satisfy 0 < mu <= L");
    }
    if (H.rows() != H.cols()) throw std::invalid_argument("rate_check: H must be square");
    RateCheck out;
    out.norm = spectral_norm(Matrix::Identity(H.rows(), H.cols()) - H);
    out.sublinear_ok = out.norm <= 1.0;
    if (mu) {
        out.linear_threshold = 2.0 * lipschitz / (*mu + lipschitz);
        out.linear_ok = out.norm <= *out.linear_threshold;
    }
    return out;
}

JointSettling joint_settling(const Matrix& H, const Vector& J, const DeltaLayout& layout,
                             const Vector& start, std::size_t max_steps, double threshold,
                             double blow_up) {
    require_size(start, layout.size, "joint_settling: start");
    JointSettling out;
    Vector cur = start;
    const Index a_len = layout.theta_offset;
    const Index t_len = layout.size - layout.theta_offset;
    for (std::size_t s = 1; s <= max_steps; ++s) {
        Vector next = recurrence_step(H, J, cur);
        const Vector diff = next - cur;
        const double a_diff = a_len > 0 ? diff.head(a_len).norm() : 0.0;
        const double t_diff = diff.tail(t_len).norm();
        cur = std::move(next);
        out.steps = s;
        if (!std::isfinite(cur.norm()) || cur.norm() > blow_up) {
            out.diverged = true;
            break;
        }
        if (a_diff < threshold && t_diff < threshold) {
            out.a_hat_settled = true;
            out.theta_settled = true;
            break;
        }
    }
    if (!out.diverged && !out.theta_settled) {
        // Budget exhausted: report each part on its own last difference.
        const Vector diff = recurrence_step(H, J, cur) - cur;
        out.a_hat_settled = a_len == 0 || diff.head(a_len).norm() < threshold;
        out.theta_settled = diff.tail(t_len).norm() < threshold;
    }
    out.final_norm = cur.norm();
    out.last = std::move(cur);
    return out;
}

OptimalityResiduals optimality_residuals(const FederationSetup& setup,
                                         const std::vector<Matrix>& thetas,
                                         const BlockGrid& a_hat, std::size_t window) {
    const BlockSpec& spec = setup.spec;
    const std::size_t M = spec.clients();
    const std::size_t T = setup.horizon();
    if (window == 0 || window > T) {
        std::ostringstream msg;
        msg << "optimality_residuals: window " << window << " must lie in [1, " << T << "]";
        throw std::invalid_argument(msg.str());
    }
    if (thetas.size() != M) throw std::invalid_argument("optimality_residuals: one theta per client");
    const ServerModel server(spec, setup.a_diag, 0.0, a_hat);
    const double w = static_cast<double>(window);

    OptimalityResiduals out;
    out.cond1.assign(M, 0.0);
    out.cond2.assign(M, std::vector<double>(M, 0.0));
    for (std::size_t m = 0; m < M; ++m) {
        const Matrix& A = setup.a_diag[m];
        const Matrix CA = setup.c_diag[m] * A;
        Vector mean1 = Vector::Zero(spec.obs_dim(m));
        std::vector<Matrix> mean2(M);
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) mean2[n] = Matrix::Zero(spec.dim(m), spec.dim(n));
        }
        for (std::size_t t = T - window + 1; t <= T; ++t) {
            const Vector& hc = setup.traces[m].estimates[t - 1];
            const Vector& y_prev = setup.measurements[m][t - 1];
            mean1 += (setup.measurements[m][t] - CA * (hc + thetas[m] * y_prev)) / w;
            Vector e = A * thetas[m] * y_prev;
            for (std::size_t p = 0; p < M; ++p) {
                if (p != m) e -= server.A_hat(m, p) * setup.traces[p].estimates[t - 1];
            }
            for (std::size_t n = 0; n < M; ++n) {
                if (n != m) mean2[n] += e * setup.traces[n].estimates[t - 1].transpose() / w;
            }
        }
        out.cond1[m] = mean1.norm();
        for (std::size_t n = 0; n < M; ++n) {
            if (n != m) out.cond2[m][n] = mean2[n].norm();
        }
    }
    return out;
}

}  // namespace fedgc
