#pragma once

#include "fpm/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace fpm::geometry {

struct PointCloud {
    int dim = 2;
    std::vector<Vec3> positions; // cm

    std::size_t size() const { return positions.size(); }
};

/// Throws on non-finite coordinates, bad dimension, nonzero z in 2D, or two
/// points closer than 1e-12 cm.
void validate_point_cloud(const PointCloud& points);

struct QuadPoint {
    Vec3 x;
    double w = 0.0;
};

enum class FacetKind { Internal, External };

struct Facet {
    FacetKind kind = FacetKind::External;
    /// cells[0] is E1 (lower owner index for internal facets); cells[1] is
    /// kNone for external facets.
    std::array<Index, 2> cells{kNone, kNone};
    /// Segment endpoints in 2D, polygon loop in 3D (indices into
    /// CellPartition::vertices).
    std::vector<Index> vertices;
    double measure = 0.0;
    Vec3 centroid = Vec3::Zero();
    /// Unit normal pointing out of cells[0].
    Vec3 normal = Vec3::Zero();
    std::vector<QuadPoint> quad_points;
    /// Distance between the two owner points (internal facets only).
    double h_e = 0.0;
};

struct Cell {
    Index owner = kNone;
    double measure = 0.0;
    Vec3 centroid = Vec3::Zero();
    std::vector<Index> facets;
};

/// Conforming, non-overlapping cells, one per point. cells[i].owner == i.
/// The cell boundary is the union of its facets, so facets carry all of the
/// geometry needed for integration.
struct CellPartition {
    int dim = 2;
    PointCloud points;
    std::vector<Vec3> vertices;
    std::vector<Cell> cells;
    std::vector<Facet> facets;
    /// Voronoi vertices shared by more cells than in general position (four
    /// or more inside, three or more on the boundary), within 1e-10 of the
    /// domain size. Zero-length edges they produce are dropped.
    int degenerate_vertices = 0;

    std::size_t size() const { return cells.size(); }
    double total_measure() const;
};

/// Recomputes facet measures, centroids, normals (oriented out of cells[0]),
/// quadrature, h_e, and the cell measures, centroids and facet lists from
/// the facet vertex loops. Used by every partition builder and by import.
void finalize_partition(CellPartition& partition);

struct PartitionReport {
    double measure_sum = 0.0;
    double max_normal_error = 0.0;
    double max_quadrature_error = 0.0;
    double max_h_error = 0.0;
    bool conforming = true;
};

/// Checks the structural invariants of a partition. Throws on violations
/// that make it unusable; returns the measured residuals.
PartitionReport validate_partition(const CellPartition& partition);

struct Polygon {
    std::vector<Eigen::Vector2d> vertices; // either orientation
};

double polygon_area(const Polygon& polygon);
bool point_in_polygon(const Polygon& polygon, const Eigen::Vector2d& p, double tol);

/// Voronoi cells of `points` clipped to a simple polygon. The boundary
/// should be convex, or at least such that each clipped cell stays
/// connected.
CellPartition build_voronoi_partition_2d(const PointCloud& points, const Polygon& boundary);

/// Regular grid of voxels with the points at the voxel centers. `counts`,
/// `spacing` and `origin` use the first `dim` entries, dim = counts.size().
CellPartition build_voxel_partition(const std::vector<int>& counts,
                                    const std::vector<double>& spacing,
                                    const std::vector<double>& origin);

struct SupportDomain {
    Index center = kNone;
    std::vector<Index> neighbors; // ascending
    int ring_depth = 1;
};

/// Reciprocal condition number threshold shared with the GFD solve.
inline constexpr double kMaxSupportCondition = 1e12;

/// Owners of the cells adjacent to `center`'s cell, widened ring by ring (up
/// to depth 3) until the least-squares normal matrix has full rank.
SupportDomain first_ring_support(const CellPartition& partition, Index center,
                                 int max_depth = 3);

/// Neighbors through internal facets, ascending.
std::vector<Index> adjacent_points(const CellPartition& partition, Index center);

/// Integrals of 1, (x - about) and (x - about)(x - about)^T over a cell,
/// exact for the polynomial degrees involved.
struct CellMoments {
    double volume = 0.0;
    Eigen::Vector3d first = Eigen::Vector3d::Zero();
    Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
};

CellMoments cell_moments(const CellPartition& partition, Index cell, const Vec3& about);

/// Index of the point nearest to x (linear scan).
Index nearest_point(const PointCloud& points, const Vec3& x);

} // namespace fpm::geometry
