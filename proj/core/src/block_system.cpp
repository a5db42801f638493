#include "fedgc/block_system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedgc/rng.hpp"

namespace fedgc {

BlockSpec::BlockSpec(std::vector<Index> dims, std::vector<Index> obs_dims)
    : dims_(std::move(dims)), obs_dims_(std::move(obs_dims)) {
    if (dims_.empty()) throw std::invalid_argument("BlockSpec: at least one client required");
    if (dims_.size() != obs_dims_.size()) {
        std::ostringstream msg;
        msg << "BlockSpec: " << dims_.size() << " state dims but " << obs_dims_.size()
            << " measurement dims";
        throw std::invalid_argument(msg.str());
    }
    state_offsets_.assign(1, 0);
    obs_offsets_.assign(1, 0);
    for (std::size_t m = 0; m < dims_.size(); ++m) {
        if (dims_[m] < 1 || obs_dims_[m] < 1) {
            std::ostringstream msg;
            msg << "BlockSpec: client " << m << " has non-positive dimension";
            throw std::invalid_argument(msg.str());
        }
        state_offsets_.push_back(state_offsets_.back() + dims_[m]);
        obs_offsets_.push_back(obs_offsets_.back() + obs_dims_[m]);
    }
}

bool BlockSpec::scalar() const {
    return std::all_of(dims_.begin(), dims_.end(), [](Index d) { return d == 1; }) &&
           std::all_of(obs_dims_.begin(), obs_dims_.end(), [](Index d) { return d == 1; });
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Index rows = 0;
    Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Index r = 0;
    Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

BlockSystem::BlockSystem(BlockSpec spec, Matrix a, Matrix c, double q_proc, double r_meas)
    : spec_(std::move(spec)), a_(std::move(a)), c_(std::move(c)), q_proc_(q_proc),
      r_meas_(r_meas) {
    require_shape(a_, spec_.state_dim(), spec_.state_dim(), "BlockSystem: state matrix A");
    require_shape(c_, spec_.obs_dim(), spec_.state_dim(), "BlockSystem: output matrix C");
    if (!(q_proc_ >= 0.0) || !(r_meas_ >= 0.0)) {
        throw std::invalid_argument("BlockSystem: noise variances must be non-negative");
    }
    for (std::size_t m = 0; m < spec_.clients(); ++m) {
        for (std::size_t n = 0; n < spec_.clients(); ++n) {
            if (m == n) continue;
            const auto off = c_.block(spec_.obs_offset(m), spec_.state_offset(n),
                                      spec_.obs_dim(m), spec_.dim(n));
            if (!off.isZero(0.0)) {
                std::ostringstream msg;
                msg << "BlockSystem: C must be block-diagonal, block (" << m << "," << n
                    << ") is non-zero";
                throw std::invalid_argument(msg.str());
            }
        }
    }
}

Matrix BlockSystem::A_block(std::size_t m, std::size_t n) const {
    return a_.block(spec_.state_offset(m), spec_.state_offset(n), spec_.dim(m), spec_.dim(n));
}

Matrix BlockSystem::C_block(std::size_t m) const {
    return c_.block(spec_.obs_offset(m), spec_.state_offset(m), spec_.obs_dim(m), spec_.dim(m));
}

std::vector<Matrix> BlockSystem::A_diagonal() const {
    std::vector<Matrix> out;
    for (std::size_t m = 0; m < spec_.clients(); ++m) out.push_back(A_block(m, m));
    return out;
}

std::vector<Matrix> BlockSystem::C_diagonal() const {
    std::vector<Matrix> out;
    for (std::size_t m = 0; m < spec_.clients(); ++m) out.push_back(C_block(m));
    return out;
}

BlockSystem BlockSystem::with_A(Matrix a) const {
    return BlockSystem(spec_, std::move(a), c_, q_proc_, r_meas_);
}

std::vector<std::vector<Vector>> split_measurements(const BlockSpec& spec,
                                                    const std::vector<Vector>& measurements) {
    std::vector<std::vector<Vector>> out(spec.clients());
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        out[m].reserve(measurements.size());
        for (const auto& y : measurements) {
            require_size(y, spec.obs_dim(), "split_measurements: measurement");
            out[m].push_back(y.segment(spec.obs_offset(m), spec.obs_dim(m)));
        }
    }
    return out;
}

Trajectory simulate(const BlockSystem& system, std::size_t T, std::uint64_t seed,
                    const Vector& initial_state, const std::optional<RegimeSwitch>& regime_switch) {
    const BlockSpec& spec = system.spec();
    if (T < 1) throw std::invalid_argument("simulate: horizon T must be at least 1");
    require_size(initial_state, spec.state_dim(), "simulate: initial state");
    if (regime_switch) {
        require_shape(regime_switch->A_after, spec.state_dim(), spec.state_dim(),
                      "simulate: switched state matrix");
    }

    const double w_sd = std::sqrt(system.q_proc());
    const double v_sd = std::sqrt(system.r_meas());

    auto measure = [&](const Vector& h, std::size_t t) {
        Vector y = system.C() * h;
        if (v_sd > 0.0) {
            for (std::size_t m = 0; m < spec.clients(); ++m) {
                CounterRng rng(seed, {static_cast<std::uint64_t>(StreamKind::measurement_noise),
                                      m, t});
                y.segment(spec.obs_offset(m), spec.obs_dim(m)) +=
                    rng.normal_vector(spec.obs_dim(m), v_sd);
            }
        }
        return y;
    };

    Trajectory traj;
    traj.states.reserve(T + 1);
    traj.measurements.reserve(T + 1);
    traj.states.push_back(initial_state);
    traj.measurements.push_back(measure(initial_state, 0));

    for (std::size_t t = 1; t <= T; ++t) {
        const Matrix& a =
            (regime_switch && t >= regime_switch->at) ? regime_switch->A_after : system.A();
        Vector h = a * traj.states.back();
        if (w_sd > 0.0) {
            for (std::size_t m = 0; m < spec.clients(); ++m) {
                CounterRng rng(seed,
                               {static_cast<std::uint64_t>(StreamKind::process_noise), m, t});
                h.segment(spec.state_offset(m), spec.dim(m)) += rng.normal_vector(spec.dim(m), w_sd);
            }
        }
        traj.measurements.push_back(measure(h, t));
        traj.states.push_back(std::move(h));
    }
    return traj;
}

Matrix SteadyStateCovariance::block(const BlockSpec& spec, std::size_t m, std::size_t n) const {
    return sigma.block(spec.state_offset(m), spec.state_offset(n), spec.dim(m), spec.dim(n));
}

SteadyStateCovariance steady_state_covariance(const Matrix& a, double q_proc) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("steady_state_covariance: state matrix must be square");
    }
    if (!(q_proc >= 0.0)) {
        throw std::invalid_argument("steady_state_covariance: q_proc must be non-negative");
    }
    const double rho = spectral_radius(a);
    if (rho >= 1.0) {
        std::ostringstream msg;
        msg << "unstable system, no steady state (spectral radius " << rho << ")";
        throw NumericalError(msg.str());
    }
    const Index n = a.rows();
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron(a, a);
    const Matrix q_identity = q_proc * Matrix::Identity(n, n);
    const ConditionedSolve solved = solve_with_condition(lhs, vec(q_identity));
    if (solved.condition > 1e12) {
        std::ostringstream msg;
        msg << "steady_state_covariance: Lyapunov system too ill-conditioned (condition "
            << solved.condition << ")";
        throw NumericalError(msg.str());
    }

    SteadyStateCovariance out;
    const Matrix s = unvec(solved.solution, n, n);
    out.sigma = 0.5 * (s + s.transpose());
    out.condition = solved.condition;
    const double scale = out.sigma.norm();
    const Matrix resid = out.sigma - a * out.sigma * a.transpose() - q_identity;
    out.relative_residual = scale > 0.0 ? resid.norm() / scale : resid.norm();
    return out;
}

namespace {

Vector sorted_spectrum(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();  // ascending
}

}  // namespace

NonIidReport non_iid_diagnostics(const SteadyStateCovariance& cov, const BlockSpec& spec) {
    require_shape(cov.sigma, spec.state_dim(), spec.state_dim(), "non_iid_diagnostics: covariance");
    constexpr double kTol = 1e-9;

    std::vector<Vector> spectra;
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        spectra.push_back(sorted_spectrum(cov.block(spec, m, m)));
    }

    NonIidReport report;
    report.identical = true;
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        for (std::size_t n = m + 1; n < spec.clients(); ++n) {
            double gap;
            if (spectra[m].size() == spectra[n].size()) {
                gap = (spectra[m] - spectra[n]).cwiseAbs().maxCoeff();
            } else {
                // Different dimensions can never be identically distributed; report
                // the mismatch in average variance.
                gap = std::abs(spectra[m].mean() - spectra[n].mean());
                report.identical = false;
            }
            report.variance_gap = std::max(report.variance_gap, gap);
            if (gap >= kTol) report.identical = false;

            report.cross_norm = std::max(report.cross_norm, cov.block(spec, m, n).norm());
        }
    }
    report.independent = report.cross_norm < kTol;
    return report;
}

}  // namespace fedgc
