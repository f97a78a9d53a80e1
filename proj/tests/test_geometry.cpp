#include "support.hpp"

#include "fpm/geometry.hpp"
#include "fpm/partition_io.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace fpm;
using namespace fpm::geometry;

namespace {

int count_internal(const CellPartition& part)
{
    int n = 0;
    for (const auto& f : part.facets) {
        n += f.kind == FacetKind::Internal ? 1 : 0;
    }
    return n;
}

} // namespace

TEST_CASE("four corner points of the unit square give four congruent cells")
{
    PointCloud pc;
    pc.positions = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    const auto part = build_voronoi_partition_2d(pc, testing::unit_square());
    REQUIRE(part.size() == 4);
    for (const auto& c : part.cells) {
        CHECK(c.measure == doctest::Approx(0.25).epsilon(1e-12));
    }
    CHECK(count_internal(part) == 4);
    for (const auto& f : part.facets) {
        if (f.kind == FacetKind::Internal) {
            CHECK(f.measure == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(f.h_e == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("two points: one bisector facet")
{
    PointCloud pc;
    pc.positions = {{0, 0, 0}, {1, 0, 0}};
    Polygon rect;
    rect.vertices = {{-0.5, -0.5}, {1.5, -0.5}, {1.5, 0.5}, {-0.5, 0.5}};
    const auto part = build_voronoi_partition_2d(pc, rect);
    REQUIRE(count_internal(part) == 1);
    for (const auto& f : part.facets) {
        if (f.kind != FacetKind::Internal) {
            continue;
        }
        CHECK(f.cells[0] == 0);
        CHECK(f.cells[1] == 1);
        CHECK(f.centroid.x() == doctest::Approx(0.5));
        CHECK(f.normal.x() == doctest::Approx(1.0));
        CHECK(std::abs(f.normal.y()) < 1e-14);
        CHECK(f.h_e == doctest::Approx(1.0));
        CHECK(f.measure == doctest::Approx(1.0));
    }
    CHECK(part.cells[0].measure == doctest::Approx(1.0));
}

TEST_CASE("random Voronoi partition: areas, conformity, normals")
{
    const auto pc = testing::random_cloud(50, 7);
    const auto part = build_voronoi_partition_2d(pc, testing::unit_square());
    const auto report = validate_partition(part);
    CHECK(report.conforming);
    CHECK(std::abs(report.measure_sum - 1.0) <= 1e-9);
    CHECK(report.max_normal_error < 1e-12);
    CHECK(report.max_quadrature_error < 1e-12);
    CHECK(report.max_h_error < 1e-12);

    double oracle_sum = 0.0;
    for (std::size_t i = 0; i < part.size(); ++i) {
        const double a = testing::shoelace(testing::cell_polygon(part, static_cast<Index>(i)));
        CHECK(part.cells[i].measure == doctest::Approx(a).epsilon(1e-10));
        oracle_sum += a;
    }
    CHECK(std::abs(oracle_sum - 1.0) <= 1e-9);

    std::vector<int> uses(part.facets.size(), 0);
    for (const auto& c : part.cells) {
        for (Index f : c.facets) {
            ++uses[f];
        }
    }
    for (std::size_t f = 0; f < part.facets.size(); ++f) {
        const auto& facet = part.facets[f];
        if (facet.kind == FacetKind::Internal) {
            CHECK(uses[f] == 2);
            const Vec3 d = pc.positions[facet.cells[1]] - pc.positions[facet.cells[0]];
            // Outward normal of E1 is the bisector direction, so E2 sees -n1.
            CHECK((facet.normal - d.normalized()).norm() < 1e-10);
            CHECK(facet.cells[0] < facet.cells[1]);
        } else {
            CHECK(uses[f] == 1);
        }
    }
}

TEST_CASE("Voronoi property on random samples")
{
    const auto pc = testing::random_cloud(40, 11);
    const auto part = build_voronoi_partition_2d(pc, testing::unit_square());
    std::vector<Polygon> polys;
    for (std::size_t i = 0; i < part.size(); ++i) {
        polys.push_back(testing::cell_polygon(part, static_cast<Index>(i)));
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int s = 0; s < 1000; ++s) {
        const Vec3 x(u(rng), u(rng), 0.0);
        std::vector<double> d;
        for (const auto& p : pc.positions) {
            d.push_back((p - x).norm());
        }
        auto sorted = d;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[1] - sorted[0] < 1e-9) {
            continue;
        }
        Index containing = kNone;
        for (std::size_t i = 0; i < polys.size(); ++i) {
            if (point_in_polygon(polys[i], {x.x(), x.y()}, 0.0)) {
                containing = static_cast<Index>(i);
                break;
            }
        }
        CHECK(containing == nearest_point(pc, x));
        ++checked;
    }
    CHECK(checked > 990);
}

TEST_CASE("cocircular points: degenerate vertices are resolved and counted")
{
    const auto part = build_voronoi_partition_2d(testing::jittered_cloud(4, 1, 0.0), testing::unit_square());
    const auto report = validate_partition(part);
    CHECK(report.conforming);
    CHECK(std::abs(report.measure_sum - 1.0) < 1e-12);
    CHECK(part.degenerate_vertices > 0);
    for (const auto& f : part.facets) {
        CHECK(f.measure > 1e-9);
    }
}

TEST_CASE("points outside the boundary and coincident points are rejected")
{
    PointCloud pc;
    pc.positions = {{0.2, 0.2, 0}, {2.0, 0.5, 0}};
    CHECK_THROWS_AS(build_voronoi_partition_2d(pc, testing::unit_square()), Error);
    pc.positions = {{0.2, 0.2, 0}, {0.2, 0.2, 0}};
    CHECK_THROWS_AS(validate_point_cloud(pc), Error);
}

TEST_CASE("voxel partition 2x2")
{
    const auto part = build_voxel_partition({2, 2}, {0.1, 0.1}, {0.0, 0.0});
    REQUIRE(part.size() == 4);
    for (const auto& c : part.cells) {
        CHECK(c.measure == doctest::Approx(0.01).epsilon(1e-12));
    }
    CHECK(count_internal(part) == 4);
    for (const auto& f : part.facets) {
        if (f.kind == FacetKind::Internal) {
            CHECK(f.measure == doctest::Approx(0.1).epsilon(1e-12));
            CHECK(f.h_e == doctest::Approx(0.1).epsilon(1e-12));
        }
    }
    CHECK(validate_partition(part).conforming);
}

TEST_CASE("voxel partition of the cuboid benchmark")
{
    const auto part = build_voxel_partition({6, 14, 40}, {0.05, 0.05, 0.05}, {0.0, 0.0, 0.0});
    CHECK(part.size() == 6 * 14 * 40);
    CHECK(part.total_measure() == doctest::Approx(0.3 * 0.7 * 2.0).epsilon(1e-12));
    Vec3 lo = part.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : part.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    CHECK((hi - lo - Vec3(0.3, 0.7, 2.0)).norm() < 1e-12);
    const auto report = validate_partition(part);
    CHECK(report.conforming);
    CHECK(report.max_quadrature_error < 1e-12);
}

TEST_CASE("voxel counts below two are rejected")
{
    CHECK_THROWS_AS(build_voxel_partition({3, 1}, {0.1, 0.1}, {0, 0}), Error);
    CHECK_NOTHROW(build_voxel_partition({3, 2}, {0.1, 0.1}, {0, 0}));
}

TEST_CASE("first ring supports on voxel grids")
{
    const auto grid3 = build_voxel_partition({3, 3, 3}, {0.1, 0.1, 0.1}, {0, 0, 0});
    const auto s = first_ring_support(grid3, 13);
    CHECK(s.neighbors.size() == 6);
    CHECK(s.ring_depth == 1);

    const auto grid2 = build_voxel_partition({3, 3}, {0.1, 0.1}, {0, 0});
    const auto corner = first_ring_support(grid2, 0);
    CHECK(corner.neighbors == std::vector<Index>{1, 3});
    CHECK(corner.ring_depth == 1);
}

TEST_CASE("collinear points in a thin strip: rank-deficient supports")
{
    PointCloud pc;
    pc.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    Polygon strip;
    strip.vertices = {{-0.5, -0.1}, {2.5, -0.1}, {2.5, 0.1}, {-0.5, 0.1}};
    const auto part = build_voronoi_partition_2d(pc, strip);
    // Explicit 2x2 determinant of A^T A over the whole cloud: zero.
    Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
    for (const auto& p : pc.positions) {
        const Eigen::Vector2d a(p.x() - 1.0, p.y());
        ata += a * a.transpose();
    }
    CHECK(std::abs(ata.determinant()) < 1e-14);
    for (Index c = 0; c < 3; ++c) {
        try {
            first_ring_support(part, c);
            FAIL("expected a degenerate-geometry error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateGeometry);
        }
    }
}

TEST_CASE("first ring support is symmetric at depth one")
{
    const auto part = build_voronoi_partition_2d(testing::random_cloud(60, 5), testing::unit_square());
    std::vector<SupportDomain> supports;
    for (std::size_t i = 0; i < part.size(); ++i) {
        supports.push_back(first_ring_support(part, static_cast<Index>(i)));
    }
    for (std::size_t i = 0; i < supports.size(); ++i) {
        if (supports[i].ring_depth != 1) {
            continue;
        }
        for (Index j : supports[i].neighbors) {
            if (supports[j].ring_depth != 1) {
                continue;
            }
            const auto& nj = supports[j].neighbors;
            CHECK(std::binary_search(nj.begin(), nj.end(), static_cast<Index>(i)));
        }
    }
}

TEST_CASE("cell moments of a square")
{
    const auto part = build_voxel_partition({2, 2}, {1.0, 1.0}, {0, 0});
    const auto m = cell_moments(part, 0, Vec3::Zero());
    CHECK(m.volume == doctest::Approx(1.0));
    CHECK(m.first.x() == doctest::Approx(0.5));
    CHECK(m.first.y() == doctest::Approx(0.5));
    CHECK(m.second(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(m.second(0, 1) == doctest::Approx(0.25));
    CHECK(m.second(1, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("cell moments of a cube")
{
    const auto part = build_voxel_partition({2, 2, 2}, {1.0, 1.0, 1.0}, {0, 0, 0});
    const auto m = cell_moments(part, 0, Vec3::Zero());
    CHECK(m.volume == doctest::Approx(1.0));
    CHECK(m.first.z() == doctest::Approx(0.5));
    CHECK(m.second(2, 2) == doctest::Approx(1.0 / 3.0));
    CHECK(m.second(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("partition text round trip")
{
    const auto part = build_voronoi_partition_2d(testing::random_cloud(25, 9), testing::unit_square());
    std::stringstream buffer;
    io::write_partition(buffer, part);
    const auto file = io::read_partition(buffer);
    REQUIRE(file.has_cells);
    const auto& back = file.partition;
    REQUIRE(back.size() == part.size());
    REQUIRE(back.facets.size() == part.facets.size());
    for (std::size_t i = 0; i < part.size(); ++i) {
        CHECK(back.cells[i].measure == doctest::Approx(part.cells[i].measure).epsilon(1e-14));
        CHECK(back.points.positions[i] == part.points.positions[i]);
    }
}

TEST_CASE("partition file in mm is converted to cm")
{
    std::istringstream in("fpm-partition 1\ndim 2\nunits mm\npoints 2\n0 0\n10 0 # comment\n");
    const auto file = io::read_partition(in);
    CHECK_FALSE(file.has_cells);
    CHECK(file.points.positions[1].x() == doctest::Approx(1.0));
}

TEST_CASE("bad partition files are rejected")
{
    std::istringstream bad("fpm-partition 2\ndim 2\n");
    CHECK_THROWS_AS(io::read_partition(bad), Error);
    std::istringstream truncated("fpm-partition 1\ndim 2\nunits cm\npoints 3\n0 0\n1 0\n");
    CHECK_THROWS_AS(io::read_partition(truncated), Error);
}
