#include "fpm/solver.hpp"

#include <cmath>
#include <sstream>

namespace fpm::solver {

void multiply(const SparseMatrix& A, const Eigen::VectorXd& x, Eigen::VectorXd& y, const ExecutionPolicy& policy)
{
    const auto n = static_cast<Index>(A.rows());
    y.resize(n);
    const Index* outer = A.outerIndexPtr();
    const Index* inner = A.innerIndexPtr();
    const double* values = A.valuePtr();
#pragma omp parallel for schedule(static) num_threads(policy.threads)
    for (Index r = 0; r < n; ++r) {
        double s = 0.0;
        for (Index k = outer[r]; k < outer[r + 1]; ++k) {
            s += values[k] * x[inner[k]];
        }
        y[r] = s;
    }
}

double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const ExecutionPolicy& policy)
{
    const auto n = static_cast<Index>(a.size());
    if (policy.deterministic || policy.threads <= 1) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            s += a[i] * b[i];
        }
        return s;
    }
    double s = 0.0;
#pragma omp parallel for reduction(+ : s) schedule(static) num_threads(policy.threads)
    for (Index i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

SolveStats conjugate_gradient(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                              const SolverOptions& options, const ExecutionPolicy& policy)
{
    const auto n = static_cast<Index>(A.rows());
    SolveStats stats;
    const double bnorm = std::sqrt(dot(b, b, policy));
    if (bnorm == 0.0) {
        x.setZero(n);
        return stats;
    }
    if (x.size() != n) {
        x.setZero(n);
    }
    Eigen::VectorXd inv_diag(n);
    for (Index r = 0; r < n; ++r) {
        const double d = A.coeff(r, r);
        if (!(d > 0.0)) {
            fail(ErrorKind::Solver, "non-positive diagonal in row " + std::to_string(r));
        }
        inv_diag[r] = 1.0 / d;
    }

    Eigen::VectorXd r(n), z(n), p(n), q(n);
    multiply(A, x, q, policy);
    r = b - q;
    double rnorm = std::sqrt(dot(r, r, policy));
    stats.residual = rnorm / bnorm;
    if (stats.residual <= options.tolerance) {
        return stats;
    }
    z = inv_diag.cwiseProduct(r);
    p = z;
    double rz = dot(r, z, policy);
    for (int it = 1; it <= options.max_iterations; ++it) {
        multiply(A, p, q, policy);
        const double pq = dot(p, q, policy);
        if (!(pq > 0.0)) {
            fail(ErrorKind::Solver, "matrix is not positive definite (p^T A p <= 0)");
        }
        const double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        rnorm = std::sqrt(dot(r, r, policy));
        stats.iterations = it;
        stats.residual = rnorm / bnorm;
        if (!std::isfinite(stats.residual)) {
            fail(ErrorKind::Solver, "residual became non-finite");
        }
        if (stats.residual <= options.tolerance) {
            return stats;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_next = dot(r, z, policy);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    std::ostringstream msg;
    msg << "conjugate gradients did not converge in " << options.max_iterations << " iterations (relative residual "
        << stats.residual << ")";
    fail(ErrorKind::Solver, msg.str());
}

} // namespace fpm::solver
