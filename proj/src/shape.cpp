#include "fpm/shape.hpp"

#include <Eigen/Eigenvalues>

#include <exception>
#include <mutex>

namespace fpm::shape {

ShapeFunction build_gfd_matrix(int dim, const Vec3& x0, std::span<const Vec3> neighbor_coords,
                               std::span<const double> weights)
{
    const auto m = static_cast<Eigen::Index>(neighbor_coords.size());
    if (m < dim) {
        fail(ErrorKind::DegenerateSupport, "support has " + std::to_string(m) + " neighbors, need at least " +
                                               std::to_string(dim));
    }
    if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != m) {
        fail(ErrorKind::Contract, "weight count must equal neighbor count");
    }
    Eigen::MatrixXd A(m, dim);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        A.row(i) = (neighbor_coords[i] - x0).head(dim).transpose();
        if (!weights.empty()) {
            w[i] = weights[i];
        }
    }
    const Eigen::MatrixXd AtW = A.transpose() * w.asDiagonal();
    const Eigen::MatrixXd AtWA = AtW * A;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(AtWA, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (!(lmax > 0.0) || !(lmin * geometry::kMaxSupportCondition > lmax)) {
        fail(ErrorKind::DegenerateSupport, "normal matrix of the gradient fit is singular or ill-conditioned");
    }

    // (A^T W A)^{-1} A^T W times [I1 I2]: the first column collects the
    // -1 entries, the remaining block is the solve itself.
    const Eigen::MatrixXd G = AtWA.colPivHouseholderQr().solve(AtW);
    ShapeFunction sf;
    sf.x0 = x0;
    sf.B.resize(dim, m + 1);
    sf.B.col(0) = -G.rowwise().sum();
    sf.B.rightCols(m) = G;
    return sf;
}

Eigen::RowVectorXd eval_shape(const ShapeFunction& sf, const Vec3& x)
{
    const int dim = sf.dim();
    Eigen::RowVectorXd N = (x - sf.x0).head(dim).transpose() * sf.B;
    N[0] += 1.0;
    return N;
}

Eigen::VectorXd eval_gradient(const ShapeFunction& sf, const Eigen::Ref<const Eigen::VectorXd>& values)
{
    if (values.size() != sf.B.cols()) {
        fail(ErrorKind::Contract, "expected " + std::to_string(sf.B.cols()) + " local values, got " +
                                      std::to_string(values.size()));
    }
    return sf.B * values;
}

Eigen::VectorXd gather(const ShapeFunction& sf, const Eigen::Ref<const Eigen::VectorXd>& global)
{
    Eigen::VectorXd local(sf.size());
    for (std::size_t k = 0; k < sf.size(); ++k) {
        local[static_cast<Eigen::Index>(k)] = global[sf.global(k)];
    }
    return local;
}

ShapeFunction build_shape_function(const geometry::CellPartition& partition, const geometry::SupportDomain& support)
{
    std::vector<Vec3> coords;
    coords.reserve(support.neighbors.size());
    for (Index j : support.neighbors) {
        coords.push_back(partition.points.positions[j]);
    }
    ShapeFunction sf;
    try {
        sf = build_gfd_matrix(partition.dim, partition.points.positions[support.center], coords);
    } catch (const Error& e) {
        fail(e.kind(), std::string(e.what()) + " (point " + std::to_string(support.center) + ")");
    }
    sf.center = support.center;
    sf.neighbors = support.neighbors;
    return sf;
}

std::vector<ShapeFunction> build_shape_functions(const geometry::CellPartition& partition,
                                                 const ExecutionPolicy& policy)
{
    const auto n = static_cast<Index>(partition.size());
    std::vector<ShapeFunction> out(partition.size());
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(static) num_threads(policy.threads)
    for (Index i = 0; i < n; ++i) {
        try {
            out[i] = build_shape_function(partition, geometry::first_ring_support(partition, i));
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) {
                error = std::current_exception();
            }
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

} // namespace fpm::shape
