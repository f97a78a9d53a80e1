#include "fpm/assembly.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

namespace fpm::assembly {

Eigen::Matrix3d build_diffusion_tensor(int dim, const Vec3& fiber_in, double d0, double rho)
{
    if (dim != 2 && dim != 3) {
        fail(ErrorKind::Config, "tensor dimension must be 2 or 3");
    }
    if (!(d0 > 0.0) || !std::isfinite(d0)) {
        fail(ErrorKind::Config, "d0 must be positive");
    }
    if (!(rho > 0.0 && rho <= 1.0)) {
        fail(ErrorKind::Config, "rho must lie in (0, 1]");
    }
    Vec3 f = fiber_in;
    if (dim == 2) {
        f.z() = 0.0;
    }
    const double len = f.norm();
    if (!std::isfinite(len) || std::abs(len - 1.0) > 1e-3) {
        fail(ErrorKind::Config, "fiber direction is not a unit vector");
    }
    if (std::abs(len - 1.0) > 1e-8) {
        std::cerr << "warning: normalizing fiber direction of length " << len << "\n";
    }
    f /= len;
    Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
    D.topLeftCorner(dim, dim) = d0 * ((1.0 - rho) * f.head(dim) * f.head(dim).transpose() +
                                      rho * Eigen::MatrixXd::Identity(dim, dim));
    return D;
}

DiffusionTensorField build_tensor_field(int dim, std::size_t npoints, std::span<const Vec3> fibers, double d0,
                                        double rho)
{
    if (fibers.size() != 1 && fibers.size() != npoints) {
        fail(ErrorKind::Config, "expected one fiber or one per point");
    }
    DiffusionTensorField field;
    field.dim = dim;
    field.d0 = d0;
    field.rho = rho;
    field.fibers.resize(npoints);
    field.tensors.resize(npoints);
    if (fibers.size() == 1) {
        const Eigen::Matrix3d D = build_diffusion_tensor(dim, fibers[0], d0, rho);
        const Vec3 f = fibers[0].normalized();
        std::fill(field.fibers.begin(), field.fibers.end(), f);
        std::fill(field.tensors.begin(), field.tensors.end(), D);
        return field;
    }
    for (std::size_t i = 0; i < npoints; ++i) {
        field.tensors[i] = build_diffusion_tensor(dim, fibers[i], d0, rho);
        field.fibers[i] = fibers[i].normalized();
    }
    return field;
}

double mean_diagonal(const Eigen::Matrix3d& D, int dim)
{
    return D.diagonal().head(dim).sum() / dim;
}

double compute_eta(double p, const geometry::SupportDomain& support, std::span<const double> cell_measures,
                   std::span<const Eigen::Matrix3d> tensors, int dim)
{
    if (!(p > 0.0)) {
        fail(ErrorKind::Config, "penalty coefficient must be positive");
    }
    double num = 0.0;
    double den = 0.0;
    for (Index i : support.neighbors) {
        num += cell_measures[i] * mean_diagonal(tensors[i], dim);
        den += cell_measures[i];
    }
    if (!(den > 0.0)) {
        fail(ErrorKind::Contract, "support has no volume");
    }
    return p * num / den;
}

Eigen::MatrixXd point_capacity_matrix(const geometry::CellPartition& partition, const shape::ShapeFunction& sf)
{
    const int dim = sf.dim();
    const geometry::CellMoments m = geometry::cell_moments(partition, sf.center, sf.x0);
    // N = e1^T + y^T B with y = x - x0, so the integral of N^T N splits into
    // the zeroth, first and second moments of the cell about x0.
    const Eigen::RowVectorXd m1B = m.first.head(dim).transpose() * sf.B;
    Eigen::MatrixXd C = sf.B.transpose() * m.second.topLeftCorner(dim, dim) * sf.B;
    C.row(0) += m1B;
    C.col(0) += m1B.transpose();
    C(0, 0) += m.volume;
    return C;
}

Eigen::MatrixXd point_diffusion_matrix(double cell_measure, const shape::ShapeFunction& sf, const Eigen::Matrix3d& D)
{
    const int dim = sf.dim();
    return cell_measure * sf.B.transpose() * D.topLeftCorner(dim, dim) * sf.B;
}

LocalMatrix internal_boundary_matrix(const geometry::Facet& facet, const shape::ShapeFunction& sf1,
                                     const shape::ShapeFunction& sf2, const Eigen::Matrix3d& D1,
                                     const Eigen::Matrix3d& D2, double eta)
{
    if (facet.kind != geometry::FacetKind::Internal) {
        fail(ErrorKind::Contract, "internal_boundary_matrix called on an external facet");
    }
    if (sf1.center != facet.cells[0] || sf2.center != facet.cells[1]) {
        fail(ErrorKind::Contract, "shape functions do not match the facet cells");
    }
    const int dim = sf1.dim();
    const auto k1 = static_cast<Eigen::Index>(sf1.size());
    const auto k2 = static_cast<Eigen::Index>(sf2.size());
    const Eigen::Index k = k1 + k2;
    const Eigen::VectorXd n1 = facet.normal.head(dim);

    // Concatenated layout [V_E1, V_E2]: jump J(x) = [N1(x), -N2(x)], average
    // normal flux F = 0.5 [n1^T D1 B1, n1^T D2 B2]. F is constant on the
    // facet and J is affine, so the flux terms are exact at the centroid.
    Eigen::RowVectorXd flux(k);
    flux.head(k1) = 0.5 * n1.transpose() * D1.topLeftCorner(dim, dim) * sf1.B;
    flux.tail(k2) = 0.5 * n1.transpose() * D2.topLeftCorner(dim, dim) * sf2.B;

    auto jump = [&](const Vec3& x) {
        Eigen::RowVectorXd J(k);
        J.head(k1) = shape::eval_shape(sf1, x);
        J.tail(k2) = -shape::eval_shape(sf2, x);
        return J;
    };
    const Eigen::RowVectorXd jump_integral = facet.measure * jump(facet.centroid);

    Eigen::MatrixXd local = -(jump_integral.transpose() * flux + flux.transpose() * jump_integral);
    const double scale = eta / facet.h_e;
    for (const auto& q : facet.quad_points) {
        const Eigen::RowVectorXd J = jump(q.x);
        local.noalias() += (scale * q.w) * J.transpose() * J;
    }

    LocalMatrix out;
    std::vector<Index> concat(static_cast<std::size_t>(k));
    for (Eigen::Index a = 0; a < k1; ++a) {
        concat[a] = sf1.global(a);
    }
    for (Eigen::Index a = 0; a < k2; ++a) {
        concat[k1 + a] = sf2.global(a);
    }
    out.dofs = concat;
    std::sort(out.dofs.begin(), out.dofs.end());
    out.dofs.erase(std::unique(out.dofs.begin(), out.dofs.end()), out.dofs.end());
    std::vector<Eigen::Index> slot(static_cast<std::size_t>(k));
    for (Eigen::Index a = 0; a < k; ++a) {
        slot[a] = std::lower_bound(out.dofs.begin(), out.dofs.end(), concat[a]) - out.dofs.begin();
    }
    const auto u = static_cast<Eigen::Index>(out.dofs.size());
    out.values = Eigen::MatrixXd::Zero(u, u);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            out.values(slot[a], slot[b]) += local(a, b);
        }
    }
    return out;
}

namespace {

// CSR pattern covering every cell and facet block, shared by C and K.
SparseMatrix build_pattern(const geometry::CellPartition& partition, const std::vector<shape::ShapeFunction>& shapes)
{
    const auto n = static_cast<Index>(partition.size());
    std::vector<std::vector<Index>> node_cells(partition.size());
    for (Index c = 0; c < n; ++c) {
        for (std::size_t k = 0; k < shapes[c].size(); ++k) {
            node_cells[shapes[c].global(k)].push_back(c);
        }
    }
    SparseMatrix M(n, n);
    std::vector<Index> outer(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Index> inner;
    std::vector<Index> row;
    for (Index r = 0; r < n; ++r) {
        row.clear();
        auto add_support = [&](Index c) {
            for (std::size_t k = 0; k < shapes[c].size(); ++k) {
                row.push_back(shapes[c].global(k));
            }
        };
        for (Index c : node_cells[r]) {
            add_support(c);
            for (Index f : partition.cells[c].facets) {
                const auto& facet = partition.facets[f];
                if (facet.kind == geometry::FacetKind::Internal) {
                    add_support(facet.cells[0] == c ? facet.cells[1] : facet.cells[0]);
                }
            }
        }
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        inner.insert(inner.end(), row.begin(), row.end());
        outer[r + 1] = static_cast<Index>(inner.size());
    }
    M.resizeNonZeros(static_cast<Eigen::Index>(inner.size()));
    std::copy(outer.begin(), outer.end(), M.outerIndexPtr());
    std::copy(inner.begin(), inner.end(), M.innerIndexPtr());
    std::fill(M.valuePtr(), M.valuePtr() + inner.size(), 0.0);
    return M;
}

Index locate(const SparseMatrix& M, Index row, Index col)
{
    const Index* begin = M.innerIndexPtr() + M.outerIndexPtr()[row];
    const Index* end = M.innerIndexPtr() + M.outerIndexPtr()[row + 1];
    const Index* it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) {
        fail(ErrorKind::Assembly, "entry (" + std::to_string(row) + ", " + std::to_string(col) +
                                      ") missing from the sparsity pattern");
    }
    return static_cast<Index>(it - M.innerIndexPtr());
}

template <class Dofs>
void scatter(SparseMatrix& M, const Dofs& dofs, const Eigen::MatrixXd& block, bool atomic)
{
    const auto n = static_cast<Index>(M.rows());
    for (Eigen::Index a = 0; a < block.rows(); ++a) {
        const Index r = dofs[a];
        if (r < 0 || r >= n) {
            fail(ErrorKind::Assembly, "row index " + std::to_string(r) + " out of range");
        }
        for (Eigen::Index b = 0; b < block.cols(); ++b) {
            const Index c = dofs[b];
            if (c < 0 || c >= n) {
                fail(ErrorKind::Assembly, "column index " + std::to_string(c) + " out of range");
            }
            double& slot = M.valuePtr()[locate(M, r, c)];
            if (atomic) {
#pragma omp atomic
                slot += block(a, b);
            } else {
                slot += block(a, b);
            }
        }
    }
}

std::vector<Index> support_dofs(const shape::ShapeFunction& sf)
{
    std::vector<Index> d(sf.size());
    for (std::size_t k = 0; k < sf.size(); ++k) {
        d[k] = sf.global(k);
    }
    return d;
}

} // namespace

GlobalOperators assemble_global(const geometry::CellPartition& partition,
                                const std::vector<shape::ShapeFunction>& shapes,
                                const DiffusionTensorField& tensors, const AssemblyOptions& options,
                                const ExecutionPolicy& policy)
{
    const auto n = static_cast<Index>(partition.size());
    if (shapes.size() != partition.size() || tensors.tensors.size() != partition.size()) {
        fail(ErrorKind::Assembly, "shape functions and tensors must match the partition size");
    }
    for (Index i = 0; i < n; ++i) {
        if (shapes[i].center != i) {
            fail(ErrorKind::Assembly, "shape function " + std::to_string(i) + " has the wrong center");
        }
    }
    const int dim = partition.dim;

    std::vector<double> measures(partition.size());
    for (Index i = 0; i < n; ++i) {
        measures[i] = partition.cells[i].measure;
    }

    GlobalOperators ops;
    ops.n = n;
    ops.K = build_pattern(partition, shapes);
    ops.C = ops.K;
    ops.eta.assign(partition.facets.size(), 0.0);

    const bool atomic = !policy.deterministic && policy.threads > 1;

    // Two-phase: compute blocks for a batch in parallel, then scatter. In
    // deterministic mode the scatter runs in item order.
    constexpr Index kBatch = 4096;
    std::vector<Eigen::MatrixXd> cblocks(kBatch);
    std::vector<Eigen::MatrixXd> kblocks(kBatch);
    for (Index start = 0; start < n; start += kBatch) {
        const Index stop = std::min(n, start + kBatch);
#pragma omp parallel for schedule(static) num_threads(policy.threads)
        for (Index c = start; c < stop; ++c) {
            cblocks[c - start] = point_capacity_matrix(partition, shapes[c]);
            kblocks[c - start] = point_diffusion_matrix(measures[c], shapes[c], tensors.tensors[c]);
        }
#pragma omp parallel for schedule(static) num_threads(policy.threads) if (atomic)
        for (Index c = start; c < stop; ++c) {
            const auto dofs = support_dofs(shapes[c]);
            scatter(ops.C, dofs, cblocks[c - start], atomic);
            scatter(ops.K, dofs, kblocks[c - start], atomic);
        }
    }

    std::vector<Index> internal;
    for (std::size_t f = 0; f < partition.facets.size(); ++f) {
        if (partition.facets[f].kind == geometry::FacetKind::Internal) {
            internal.push_back(static_cast<Index>(f));
        }
    }
    const auto nf = static_cast<Index>(internal.size());
    std::vector<LocalMatrix> fblocks(kBatch);
    for (Index start = 0; start < nf; start += kBatch) {
        const Index stop = std::min(nf, start + kBatch);
#pragma omp parallel for schedule(static) num_threads(policy.threads)
        for (Index k = start; k < stop; ++k) {
            const Index f = internal[k];
            const auto& facet = partition.facets[f];
            const Index e1 = facet.cells[0];
            const Index e2 = facet.cells[1];
            geometry::SupportDomain support{e1, shapes[e1].neighbors, 1};
            const double eta = compute_eta(options.penalty, support, measures, tensors.tensors, dim);
            ops.eta[f] = eta;
            fblocks[k - start] = internal_boundary_matrix(facet, shapes[e1], shapes[e2], tensors.tensors[e1],
                                                          tensors.tensors[e2], eta);
        }
#pragma omp parallel for schedule(static) num_threads(policy.threads) if (atomic)
        for (Index k = start; k < stop; ++k) {
            scatter(ops.K, fblocks[k - start].dofs, fblocks[k - start].values, atomic);
        }
    }

    if (options.lumped_mass) {
        const Eigen::VectorXd d = lumped_diagonal(ops.C);
        for (Index i = 0; i < n; ++i) {
            if (!(d[i] > 0.0)) {
                fail(ErrorKind::Assembly, "lumped capacity of point " + std::to_string(i) + " is not positive");
            }
        }
        SparseMatrix L(n, n);
        L.reserve(Eigen::VectorXi::Constant(n, 1));
        for (Index i = 0; i < n; ++i) {
            L.insert(i, i) = d[i];
        }
        L.makeCompressed();
        ops.C = std::move(L);
    }
    return ops;
}

Eigen::VectorXd lumped_diagonal(const SparseMatrix& C)
{
    Eigen::VectorXd d(C.rows());
    for (Index r = 0; r < C.rows(); ++r) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(C, r); it; ++it) {
            s += it.value();
        }
        d[r] = s;
    }
    return d;
}

namespace {

double norm_inf(const SparseMatrix& M)
{
    double best = 0.0;
    for (Index r = 0; r < M.rows(); ++r) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
            s += std::abs(it.value());
        }
        best = std::max(best, s);
    }
    return best;
}

// Lanczos with full reorthogonalization on a fixed random start vector.
std::pair<double, double> lanczos_extremes(const SparseMatrix& K, Index steps)
{
    const Index n = static_cast<Index>(K.rows());
    steps = std::min(steps, n);
    Eigen::MatrixXd Q(n, steps);
    std::vector<double> alpha;
    std::vector<double> beta;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    Eigen::VectorXd q(n);
    for (Index i = 0; i < n; ++i) {
        q[i] = normal(rng);
    }
    q.normalize();
    for (Index j = 0; j < steps; ++j) {
        Q.col(j) = q;
        Eigen::VectorXd w = K * q;
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double b = w.norm();
        if (b < 1e-14 || j + 1 == steps) {
            break;
        }
        beta.push_back(b);
        q = w / b;
    }
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) {
            T(i, i + 1) = T(i + 1, i) = beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T, Eigen::EigenvaluesOnly);
    return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

} // namespace

OperatorDiagnostics diagnose(const SparseMatrix& K, Index dense_limit)
{
    OperatorDiagnostics d;
    d.norm_inf = norm_inf(K);
    const SparseMatrix Kt = K.transpose();
    const SparseMatrix diff = K - Kt;
    const double scale = d.norm_inf > 0.0 ? d.norm_inf : 1.0;
    d.asymmetry = norm_inf(diff) / scale;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(K.rows());
    d.null_residual = (K * ones).cwiseAbs().maxCoeff() / scale;
    if (K.rows() <= dense_limit) {
        const Eigen::MatrixXd dense = Eigen::MatrixXd(K);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (dense + dense.transpose()), Eigen::EigenvaluesOnly);
        d.min_eigenvalue = eig.eigenvalues().minCoeff();
        d.max_eigenvalue = eig.eigenvalues().maxCoeff();
        d.dense_eigen = true;
    } else {
        const Index steps = std::max<Index>(20, std::min<Index>(200, static_cast<Index>(5e7 / K.rows())));
        std::tie(d.min_eigenvalue, d.max_eigenvalue) = lanczos_extremes(K, steps);
    }
    return d;
}

void dump_matrix(const std::filesystem::path& path, const SparseMatrix& M)
{
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::Io, "cannot write matrix dump " + path.string());
    }
    out << std::setprecision(17);
    out << "# row col value (" << M.rows() << " x " << M.cols() << ", " << M.nonZeros() << " entries)\n";
    for (Index r = 0; r < M.rows(); ++r) {
        for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
            out << r << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
}

} // namespace fpm::assembly
