#pragma once

#include "fpm/geometry.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fpm::shape {

/// Piecewise-linear trial function of one cell, V_h(x) = N(x) V_E with the
/// local ordering V_E = [V_center, V_neighbor_1, ..., V_neighbor_m].
struct ShapeFunction {
    Index center = kNone;
    std::vector<Index> neighbors;
    /// Gradient matrix, dim x (m + 1), cm^-1.
    Eigen::MatrixXd B;
    Vec3 x0 = Vec3::Zero();

    int dim() const { return static_cast<int>(B.rows()); }
    std::size_t size() const { return neighbors.size() + 1; }
    /// Global index of local slot k (slot 0 is the center).
    Index global(std::size_t k) const { return k == 0 ? center : neighbors[k - 1]; }
};

/// Least-squares gradient matrix from neighbor offsets. `weights` (one per
/// neighbor) defaults to all ones. Throws DegenerateSupport when the
/// normal matrix is singular or its condition number exceeds 1e12.
ShapeFunction build_gfd_matrix(int dim, const Vec3& x0, std::span<const Vec3> neighbor_coords,
                               std::span<const double> weights = {});

/// Row N(x) = (x - x0)^T B + [1, 0, ..., 0].
Eigen::RowVectorXd eval_shape(const ShapeFunction& sf, const Vec3& x);

/// B V_E. Throws Contract on a length mismatch.
Eigen::VectorXd eval_gradient(const ShapeFunction& sf, const Eigen::Ref<const Eigen::VectorXd>& values);

/// Gathers V_E for `sf` from a global nodal vector.
Eigen::VectorXd gather(const ShapeFunction& sf, const Eigen::Ref<const Eigen::VectorXd>& global);

ShapeFunction build_shape_function(const geometry::CellPartition& partition, const geometry::SupportDomain& support);

/// One shape function per point, each on its first-ring support.
std::vector<ShapeFunction> build_shape_functions(const geometry::CellPartition& partition,
                                                 const ExecutionPolicy& policy = {});

} // namespace fpm::shape
