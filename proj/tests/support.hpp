#pragma once

#include "fpm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace fpm::testing {

inline geometry::Polygon unit_square(double size = 1.0)
{
    geometry::Polygon p;
    p.vertices = {{0.0, 0.0}, {size, 0.0}, {size, size}, {0.0, size}};
    return p;
}

inline geometry::PointCloud random_cloud(int n, std::uint64_t seed, double size = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, size);
    geometry::PointCloud cloud;
    cloud.dim = 2;
    for (int i = 0; i < n; ++i) {
        cloud.positions.emplace_back(u(rng), u(rng), 0.0);
    }
    return cloud;
}

/// Jittered k x k lattice in [0, size]^2.
inline geometry::PointCloud jittered_cloud(int k, std::uint64_t seed, double jitter = 0.35, double size = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    geometry::PointCloud cloud;
    cloud.dim = 2;
    const double h = size / k;
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
            cloud.positions.emplace_back((i + 0.5 + u(rng)) * h, (j + 0.5 + u(rng)) * h, 0.0);
        }
    }
    return cloud;
}

/// Cell boundary of a 2D cell rebuilt from its facet endpoints, sorted by
/// angle around the owner point (cells are star-shaped about their owner).
inline geometry::Polygon cell_polygon(const geometry::CellPartition& part, Index cell)
{
    const Vec3 c = part.points.positions[cell];
    std::vector<Vec3> pts;
    for (Index f : part.cells[cell].facets) {
        for (Index v : part.facets[f].vertices) {
            const Vec3& x = part.vertices[v];
            bool dup = false;
            for (const auto& y : pts) {
                dup = dup || (x - y).norm() < 1e-13;
            }
            if (!dup) {
                pts.push_back(x);
            }
        }
    }
    std::sort(pts.begin(), pts.end(), [&](const Vec3& a, const Vec3& b) {
        return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
    });
    geometry::Polygon p;
    for (const auto& x : pts) {
        p.vertices.emplace_back(x.x(), x.y());
    }
    return p;
}

inline double shoelace(const geometry::Polygon& p)
{
    double a = 0.0;
    const auto& v = p.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& x = v[i];
        const auto& y = v[(i + 1) % v.size()];
        a += x.x() * y.y() - y.x() * x.y();
    }
    return 0.5 * std::abs(a);
}

} // namespace fpm::testing
