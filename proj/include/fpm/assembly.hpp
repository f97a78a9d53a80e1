#pragma once

#include "fpm/geometry.hpp"
#include "fpm/shape.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <span>
#include <vector>

namespace fpm::assembly {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

/// D = d0 [(1 - rho) f f^T + rho I], dim x dim in the top-left corner of a
/// 3x3 matrix (the rest is zero). A fiber whose length is off by at most
/// 1e-3 is normalized with a warning on stderr; worse is a Config error.
Eigen::Matrix3d build_diffusion_tensor(int dim, const Vec3& fiber, double d0, double rho);

struct DiffusionTensorField {
    int dim = 2;
    double d0 = 0.0;  // cm^2/ms
    double rho = 1.0; // transverse / longitudinal
    std::vector<Vec3> fibers;
    std::vector<Eigen::Matrix3d> tensors;
};

/// One fiber for every point, or one per point.
DiffusionTensorField build_tensor_field(int dim, std::size_t npoints, std::span<const Vec3> fibers, double d0,
                                        double rho);

/// Mean of the diagonal of the active dim x dim block.
double mean_diagonal(const Eigen::Matrix3d& D, int dim);

/// Volume-weighted mean of the tensor diagonals over the support points,
/// times the penalty coefficient. cm^2/ms.
double compute_eta(double p, const geometry::SupportDomain& support, std::span<const double> cell_measures,
                   std::span<const Eigen::Matrix3d> tensors, int dim);

/// Integral of N^T N over the cell owned by sf.center.
Eigen::MatrixXd point_capacity_matrix(const geometry::CellPartition& partition, const shape::ShapeFunction& sf);

/// measure * B^T D B; exact because B is constant over the cell.
Eigen::MatrixXd point_diffusion_matrix(double cell_measure, const shape::ShapeFunction& sf, const Eigen::Matrix3d& D);

/// Dense block addressed by global degrees of freedom.
struct LocalMatrix {
    std::vector<Index> dofs; // ascending, unique
    Eigen::MatrixXd values;
};

/// Interior-penalty coupling of the two cells sharing an internal facet:
/// consistency and symmetry terms (averaged flux times jump, one-point
/// rule) plus the penalty term (eta / h_e) times the jump squared (facet
/// quadrature). sf1 must belong to facet.cells[0].
LocalMatrix internal_boundary_matrix(const geometry::Facet& facet, const shape::ShapeFunction& sf1,
                                     const shape::ShapeFunction& sf2, const Eigen::Matrix3d& D1,
                                     const Eigen::Matrix3d& D2, double eta);

struct AssemblyOptions {
    double penalty = 1.0;
    bool lumped_mass = false;
};

struct GlobalOperators {
    SparseMatrix C;
    SparseMatrix K;
    Index n = 0;
    /// eta per facet (zero on external facets).
    std::vector<double> eta;
};

GlobalOperators assemble_global(const geometry::CellPartition& partition,
                                const std::vector<shape::ShapeFunction>& shapes,
                                const DiffusionTensorField& tensors, const AssemblyOptions& options,
                                const ExecutionPolicy& policy = {});

/// Row sums of C.
Eigen::VectorXd lumped_diagonal(const SparseMatrix& C);

struct OperatorDiagnostics {
    double norm_inf = 0.0;
    double asymmetry = 0.0;     // ||K - K^T||_inf / ||K||_inf
    double null_residual = 0.0; // ||K 1||_inf / ||K||_inf
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    bool dense_eigen = false;
};

/// Dense eigen-decomposition up to `dense_limit` rows, Lanczos estimate
/// above it.
OperatorDiagnostics diagnose(const SparseMatrix& K, Index dense_limit = 2000);

/// "row col value" lines, zero-based, 17 significant digits.
void dump_matrix(const std::filesystem::path& path, const SparseMatrix& M);

} // namespace fpm::assembly
