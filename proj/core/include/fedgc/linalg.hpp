#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedgc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when a numerical routine cannot produce a trustworthy answer
/// (non-convergence, ill-conditioning, instability).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws std::invalid_argument naming `what` when the shapes differ.
void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what);
void require_size(const Vector& v, Index size, const std::string& what);

/// Same shape and bitwise-equal entries (no size assertion on mismatch).
bool exactly_equal(const Matrix& x, const Matrix& y);
bool exactly_equal(const Vector& x, const Vector& y);

/// Column-stacking vectorization: [z11..zm1, z12..zm2, ..., z1n..zmn].
Vector vec(const Matrix& z);

/// Inverse of vec for a rows x cols matrix.
Matrix unvec(const Vector& v, Index rows, Index cols);

/// Kronecker product X (x) Y, shape (rX*rY) x (cX*cY).
Matrix kron(const Matrix& x, const Matrix& y);

struct SpectralRadiusOptions {
    // Above this side the dense eigensolver is replaced by power iteration.
    Index dense_limit = 512;
    double power_tolerance = 1e-10;
    int power_max_iterations = 10000;
};

/// Largest eigenvalue modulus. Throws std::invalid_argument for non-square input.
double spectral_radius(const Matrix& a, const SpectralRadiusOptions& options = {});

/// Subspace (block power) iteration estimate of the spectral radius. Used for
/// large matrices; exposed so the fallback can be tested on small inputs.
double spectral_radius_power(const Matrix& a, double tolerance, int max_iterations);

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// Solution of a square system together with a reciprocal condition estimate.
struct ConditionedSolve {
    Vector solution;
    double condition = 0.0;  // 1-norm condition estimate (1 / rcond)
};

/// LU solve of `a x = b` that also reports the condition estimate; does not
/// reject ill-conditioned systems, callers decide the threshold.
ConditionedSolve solve_with_condition(const Matrix& a, const Vector& b);

}  // namespace fedgc
