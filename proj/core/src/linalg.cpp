#include "fedgc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fedgc {

void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream msg;
        msg << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x"
            << m.cols();
        throw std::invalid_argument(msg.str());
    }
}

void require_size(const Vector& v, Index size, const std::string& what) {
    if (v.size() != size) {
        std::ostringstream msg;
        msg << what << ": expected length " << size << ", got " << v.size();
        throw std::invalid_argument(msg.str());
    }
}

bool exactly_equal(const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
}

bool exactly_equal(const Vector& x, const Vector& y) {
    return x.size() == y.size() && (x.array() == y.array()).all();
}

Vector vec(const Matrix& z) {
    // Eigen storage is column-major, so the raw buffer is already vec(z).
    return Eigen::Map<const Vector>(z.data(), z.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
    if (rows < 0 || cols < 0 || rows * cols != v.size()) {
        std::ostringstream msg;
        msg << "unvec: cannot reshape length " << v.size() << " into " << rows << "x" << cols;
        throw std::invalid_argument(msg.str());
    }
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix kron(const Matrix& x, const Matrix& y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return out;
}

namespace {

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) {
        std::ostringstream msg;
        msg << what << ": matrix must be square, got " << a.rows() << "x" << a.cols();
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

double spectral_radius(const Matrix& a, const SpectralRadiusOptions& options) {
    require_square(a, "spectral_radius");
    if (a.size() == 0) return 0.0;
    if (a.rows() > options.dense_limit) {
        return spectral_radius_power(a, options.power_tolerance, options.power_max_iterations);
    }
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("spectral_radius: eigenvalue iteration did not converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius_power(const Matrix& a, double tolerance, int max_iterations) {
    require_square(a, "spectral_radius_power");
    const Index n = a.rows();
    if (n == 0) return 0.0;
    const Index width = std::min<Index>(n, 4);

    // Deterministic, non-degenerate starting subspace.
    Matrix q(n, width);
    for (Index j = 0; j < width; ++j) {
        for (Index i = 0; i < n; ++i) {
            q(i, j) = std::cos(0.7 * static_cast<double>(i + 1) * static_cast<double>(j + 1)) +
                      1.0 / static_cast<double>(i + j + 2);
        }
    }
    q = Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(n, width);

    double previous = -1.0;
    for (int it = 0; it < max_iterations; ++it) {
        const Matrix z = a * q;
        if (z.norm() == 0.0) return 0.0;
        // Rayleigh-Ritz on the current subspace resolves complex dominant pairs.
        const Matrix projected = q.transpose() * z;
        Eigen::EigenSolver<Matrix> ritz(projected, false);
        const double estimate = ritz.eigenvalues().cwiseAbs().maxCoeff();
        q = Eigen::HouseholderQR<Matrix>(z).householderQ() * Matrix::Identity(n, width);
        if (previous >= 0.0 && std::abs(estimate - previous) <= tolerance * std::abs(estimate)) {
            return estimate;
        }
        previous = estimate;
    }
    std::ostringstream msg;
    msg << "spectral_radius_power: no convergence within " << max_iterations << " iterations";
    throw NumericalError(msg.str());
}

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

ConditionedSolve solve_with_condition(const Matrix& a, const Vector& b) {
    require_square(a, "solve_with_condition");
    require_size(b, a.rows(), "solve_with_condition: right-hand side");
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rcond = lu.rcond();
    ConditionedSolve out;
    out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    out.solution = lu.solve(b);
    return out;
}

}  // namespace fedgc
