#pragma once

#include "fpm/assembly.hpp"

#include <Eigen/Dense>

namespace fpm::solver {

using assembly::SparseMatrix;

struct SolverOptions {
    double tolerance = 1e-8; // relative residual ||b - Ax|| / ||b||
    int max_iterations = 1000;
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
};

/// y = A x, parallel over rows. Row results do not depend on the thread
/// count.
void multiply(const SparseMatrix& A, const Eigen::VectorXd& x, Eigen::VectorXd& y, const ExecutionPolicy& policy);

/// Serial in deterministic mode, OpenMP reduction otherwise.
double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const ExecutionPolicy& policy);

/// Jacobi-preconditioned conjugate gradients for SPD A; `x` holds the
/// initial guess on entry. Throws Solver when the tolerance is not reached
/// within max_iterations.
SolveStats conjugate_gradient(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                              const SolverOptions& options, const ExecutionPolicy& policy = {});

} // namespace fpm::solver
