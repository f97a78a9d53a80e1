#include "fpm/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace fpm::geometry {

namespace {

constexpr double kCoincidentTol = 1e-12;

// Degree-2 Gauss-Legendre abscissa on [-1, 1].
const double kGauss2 = 1.0 / std::sqrt(3.0);

// Degree-2 four-point tetrahedron rule.
constexpr double kTetAlpha = 0.5854101966249685;
constexpr double kTetBeta = 0.1381966011250105;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

Vec3 lift(const Eigen::Vector2d& p) { return {p.x(), p.y(), 0.0}; }

struct Simplex {
    std::array<Vec3, 4> v;
    double measure = 0.0;
};

// Fan of sub-simplices (triangles in 2D, tetrahedra in 3D) from `apex` over
// the boundary of a cell.
template <class Fn>
void for_each_sub_simplex(const CellPartition& part, const Cell& cell, const Vec3& apex, Fn&& fn)
{
    for (Index f : cell.facets) {
        const Facet& facet = part.facets[f];
        const auto& loop = facet.vertices;
        if (part.dim == 2) {
            Simplex s;
            s.v[0] = apex;
            s.v[1] = part.vertices[loop[0]];
            s.v[2] = part.vertices[loop[1]];
            s.measure = 0.5 * std::abs((s.v[1] - s.v[0]).cross(s.v[2] - s.v[0]).z());
            fn(s);
        } else {
            const Vec3& p0 = part.vertices[loop[0]];
            for (std::size_t k = 1; k + 1 < loop.size(); ++k) {
                Simplex s;
                s.v[0] = apex;
                s.v[1] = p0;
                s.v[2] = part.vertices[loop[k]];
                s.v[3] = part.vertices[loop[k + 1]];
                s.measure = std::abs((s.v[1] - s.v[0]).dot((s.v[2] - s.v[0]).cross(s.v[3] - s.v[0]))) / 6.0;
                fn(s);
            }
        }
    }
}

Vec3 cell_apex(const CellPartition& part, const Cell& cell)
{
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    for (Index f : cell.facets) {
        for (Index v : part.facets[f].vertices) {
            sum += part.vertices[v];
            ++count;
        }
    }
    if (count == 0) {
        fail(ErrorKind::DegenerateCell, "cell of point " + std::to_string(cell.owner) + " has no facets");
    }
    return sum / static_cast<double>(count);
}

void finalize_facet_geometry(const CellPartition& part, Facet& facet)
{
    const auto& loop = facet.vertices;
    facet.quad_points.clear();
    if (part.dim == 2) {
        if (loop.size() != 2) {
            fail(ErrorKind::DegenerateGeometry, "2D facet must have exactly 2 vertices");
        }
        const Vec3& a = part.vertices[loop[0]];
        const Vec3& b = part.vertices[loop[1]];
        const Vec3 t = b - a;
        facet.measure = t.norm();
        facet.centroid = 0.5 * (a + b);
        if (facet.measure > 0.0) {
            facet.normal = Vec3(t.y(), -t.x(), 0.0) / facet.measure;
        }
        const Vec3 half = 0.5 * kGauss2 * t;
        facet.quad_points.push_back({facet.centroid - half, 0.5 * facet.measure});
        facet.quad_points.push_back({facet.centroid + half, 0.5 * facet.measure});
        return;
    }
    if (loop.size() < 3) {
        fail(ErrorKind::DegenerateGeometry, "3D facet needs at least 3 vertices");
    }
    const Vec3& p0 = part.vertices[loop[0]];
    Vec3 area_vec = Vec3::Zero();
    Vec3 weighted = Vec3::Zero();
    double area = 0.0;
    for (std::size_t k = 1; k + 1 < loop.size(); ++k) {
        const Vec3& p1 = part.vertices[loop[k]];
        const Vec3& p2 = part.vertices[loop[k + 1]];
        const Vec3 c = (p1 - p0).cross(p2 - p0);
        const double a = 0.5 * c.norm();
        area_vec += 0.5 * c;
        area += a;
        weighted += a * (p0 + p1 + p2) / 3.0;
        facet.quad_points.push_back({0.5 * (p0 + p1), a / 3.0});
        facet.quad_points.push_back({0.5 * (p1 + p2), a / 3.0});
        facet.quad_points.push_back({0.5 * (p2 + p0), a / 3.0});
    }
    facet.measure = area;
    facet.centroid = area > 0.0 ? Vec3(weighted / area) : p0;
    const double n = area_vec.norm();
    if (n > 0.0) {
        facet.normal = area_vec / n;
    }
}

} // namespace

double CellPartition::total_measure() const
{
    double sum = 0.0;
    for (const auto& c : cells) {
        sum += c.measure;
    }
    return sum;
}

void validate_point_cloud(const PointCloud& points)
{
    if (points.dim != 2 && points.dim != 3) {
        fail(ErrorKind::Domain, "point cloud dimension must be 2 or 3");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points.positions[i];
        if (!p.allFinite()) {
            fail(ErrorKind::Domain, "point " + std::to_string(i) + " has non-finite coordinates");
        }
        if (points.dim == 2 && p.z() != 0.0) {
            fail(ErrorKind::Domain, "point " + std::to_string(i) + " has nonzero z in a 2D cloud");
        }
    }
    std::vector<Index> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return points.positions[a].x() < points.positions[b].x();
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Vec3& p = points.positions[order[k]];
        for (std::size_t l = k + 1; l < order.size(); ++l) {
            const Vec3& q = points.positions[order[l]];
            if (q.x() - p.x() > kCoincidentTol) {
                break;
            }
            if ((q - p).norm() <= kCoincidentTol) {
                fail(ErrorKind::DegenerateCell, "points " + std::to_string(order[k]) + " and " +
                                                    std::to_string(order[l]) + " coincide");
            }
        }
    }
}

void finalize_partition(CellPartition& part)
{
    const auto n = static_cast<Index>(part.points.size());
    part.dim = part.points.dim;
    part.cells.assign(part.points.size(), Cell{});
    for (Index i = 0; i < n; ++i) {
        part.cells[i].owner = i;
    }
    for (std::size_t f = 0; f < part.facets.size(); ++f) {
        Facet& facet = part.facets[f];
        for (Index c : facet.cells) {
            if (c == kNone) {
                continue;
            }
            if (c < 0 || c >= n) {
                fail(ErrorKind::DegenerateGeometry, "facet " + std::to_string(f) + " references missing cell");
            }
            part.cells[c].facets.push_back(static_cast<Index>(f));
        }
        for (Index v : facet.vertices) {
            if (v < 0 || static_cast<std::size_t>(v) >= part.vertices.size()) {
                fail(ErrorKind::DegenerateGeometry, "facet " + std::to_string(f) + " references missing vertex");
            }
        }
    }

    std::vector<Vec3> apex(part.cells.size());
    for (Index i = 0; i < n; ++i) {
        apex[i] = cell_apex(part, part.cells[i]);
    }

    for (Facet& facet : part.facets) {
        if (facet.kind == FacetKind::Internal) {
            if (facet.cells[1] == kNone || facet.cells[0] == facet.cells[1]) {
                fail(ErrorKind::DegenerateGeometry, "internal facet needs two distinct cells");
            }
            if (facet.cells[0] > facet.cells[1]) {
                std::swap(facet.cells[0], facet.cells[1]);
            }
        }
        finalize_facet_geometry(part, facet);
        if (facet.normal.dot(facet.centroid - apex[facet.cells[0]]) < 0.0) {
            facet.normal = -facet.normal;
        }
        if (facet.kind == FacetKind::Internal) {
            facet.h_e = (part.points.positions[facet.cells[1]] - part.points.positions[facet.cells[0]]).norm();
        } else {
            facet.h_e = 0.0;
        }
    }

    for (Index i = 0; i < n; ++i) {
        Cell& cell = part.cells[i];
        double measure = 0.0;
        Vec3 weighted = Vec3::Zero();
        for_each_sub_simplex(part, cell, apex[i], [&](const Simplex& s) {
            const int corners = part.dim + 1;
            Vec3 c = Vec3::Zero();
            for (int k = 0; k < corners; ++k) {
                c += s.v[k];
            }
            measure += s.measure;
            weighted += s.measure * c / corners;
        });
        if (!(measure > 0.0)) {
            fail(ErrorKind::DegenerateCell, "cell of point " + std::to_string(i) + " has zero measure");
        }
        cell.measure = measure;
        cell.centroid = weighted / measure;
    }
}

PartitionReport validate_partition(const CellPartition& part)
{
    PartitionReport report;
    std::vector<int> seen(part.facets.size(), 0);
    for (std::size_t i = 0; i < part.cells.size(); ++i) {
        const Cell& cell = part.cells[i];
        if (!(cell.measure > 0.0)) {
            fail(ErrorKind::DegenerateCell, "cell " + std::to_string(i) + " has non-positive measure");
        }
        report.measure_sum += cell.measure;
        for (Index f : cell.facets) {
            const Facet& facet = part.facets[f];
            if (facet.cells[0] != static_cast<Index>(i) && facet.cells[1] != static_cast<Index>(i)) {
                report.conforming = false;
            }
            ++seen[f];
        }
    }
    for (std::size_t f = 0; f < part.facets.size(); ++f) {
        const Facet& facet = part.facets[f];
        const int expected = facet.kind == FacetKind::Internal ? 2 : 1;
        if (seen[f] != expected) {
            report.conforming = false;
        }
        report.max_normal_error = std::max(report.max_normal_error, std::abs(facet.normal.norm() - 1.0));
        double wsum = 0.0;
        for (const auto& q : facet.quad_points) {
            wsum += q.w;
        }
        if (facet.measure > 0.0) {
            report.max_quadrature_error =
                std::max(report.max_quadrature_error, std::abs(wsum - facet.measure) / facet.measure);
        }
        if (facet.kind == FacetKind::Internal) {
            const double d =
                (part.points.positions[facet.cells[1]] - part.points.positions[facet.cells[0]]).norm();
            if (!(facet.h_e > 0.0)) {
                fail(ErrorKind::DegenerateGeometry, "internal facet " + std::to_string(f) + " has h_e <= 0");
            }
            report.max_h_error = std::max(report.max_h_error, std::abs(facet.h_e - d));
        }
    }
    return report;
}

double polygon_area(const Polygon& polygon)
{
    const auto& v = polygon.vertices;
    double a = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        a += cross2(v[i], v[(i + 1) % v.size()]);
    }
    return 0.5 * a;
}

bool point_in_polygon(const Polygon& polygon, const Eigen::Vector2d& p, double tol)
{
    const auto& v = polygon.vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Eigen::Vector2d& a = v[j];
        const Eigen::Vector2d& b = v[i];
        const Eigen::Vector2d ab = b - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((a + t * ab - p).norm() <= tol) {
            return true;
        }
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            if (p.x() < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

namespace {

struct LabeledVertex {
    Eigen::Vector2d p;
    Index label; // edge from this vertex to the next: neighbor index or kNone
};

// Sutherland-Hodgman against the half-plane closer to `site` than to
// `other`; the subject may be non-convex, the clip region is convex.
std::vector<LabeledVertex> clip_half_plane(const std::vector<LabeledVertex>& poly,
                                           const Eigen::Vector2d& site, const Eigen::Vector2d& other,
                                           Index other_index, double eps)
{
    const Eigen::Vector2d d = other - site;
    const Eigen::Vector2d m = 0.5 * (site + other);
    auto side = [&](const Eigen::Vector2d& x) { return (x - m).dot(d); };

    std::vector<LabeledVertex> out;
    out.reserve(poly.size() + 2);
    for (std::size_t k = 0; k < poly.size(); ++k) {
        const LabeledVertex& P = poly[k];
        const LabeledVertex& Q = poly[(k + 1) % poly.size()];
        const double sp = side(P.p);
        const double sq = side(Q.p);
        const bool pin = sp <= eps;
        const bool qin = sq <= eps;
        if (pin && qin) {
            out.push_back(P);
        } else if (pin) {
            out.push_back(P);
            const double t = sp / (sp - sq);
            out.push_back({P.p + t * (Q.p - P.p), other_index});
        } else if (qin) {
            const double t = sp / (sp - sq);
            out.push_back({P.p + t * (Q.p - P.p), P.label});
        }
    }
    return out;
}

} // namespace

CellPartition build_voronoi_partition_2d(const PointCloud& points, const Polygon& boundary_in)
{
    if (points.dim != 2) {
        fail(ErrorKind::Domain, "Voronoi partition requires a 2D point cloud");
    }
    if (boundary_in.vertices.size() < 3) {
        fail(ErrorKind::Domain, "boundary polygon needs at least 3 vertices");
    }
    validate_point_cloud(points);

    Polygon boundary = boundary_in;
    if (polygon_area(boundary) < 0.0) {
        std::reverse(boundary.vertices.begin(), boundary.vertices.end());
    }
    Eigen::Vector2d lo = boundary.vertices.front();
    Eigen::Vector2d hi = lo;
    for (const auto& v : boundary.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double scale = (hi - lo).norm();
    const double tiny = 1e-10 * scale;

    const auto n = static_cast<Index>(points.size());
    std::vector<Eigen::Vector2d> sites(n);
    for (Index i = 0; i < n; ++i) {
        sites[i] = points.positions[i].head<2>();
        if (!point_in_polygon(boundary, sites[i], tiny)) {
            fail(ErrorKind::Domain, "point " + std::to_string(i) + " lies outside the boundary polygon");
        }
    }

    struct Edge {
        Eigen::Vector2d a, b;
        Index label;
    };
    std::vector<std::vector<Edge>> cell_edges(n);
    int degenerate = 0;

    std::vector<Index> order(n);
    std::vector<double> dist(n);
    for (Index i = 0; i < n; ++i) {
        std::vector<LabeledVertex> poly;
        poly.reserve(boundary.vertices.size());
        for (const auto& v : boundary.vertices) {
            poly.push_back({v, kNone});
        }
        for (Index j = 0; j < n; ++j) {
            dist[j] = (sites[j] - sites[i]).norm();
        }
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Index a, Index b) { return dist[a] < dist[b]; });
        std::vector<Index> candidates;
        for (Index j : order) {
            if (j == i) {
                continue;
            }
            double reach = 0.0;
            for (const auto& v : poly) {
                reach = std::max(reach, (v.p - sites[i]).norm());
            }
            if (dist[j] > 2.0 * reach + tiny) {
                break;
            }
            candidates.push_back(j);
            poly = clip_half_plane(poly, sites[i], sites[j], j, 1e-14 * scale * dist[j]);
            if (poly.size() < 3) {
                fail(ErrorKind::DegenerateCell, "cell of point " + std::to_string(i) + " collapsed");
            }
        }
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const auto& P = poly[k];
            const auto& Q = poly[(k + 1) % poly.size()];
            // Vertex P shared by more sites than a generic Voronoi vertex
            // (3 inside, 2 plus the boundary on it); counted by its lowest site.
            const bool on_boundary = P.label == kNone || poly[(k + poly.size() - 1) % poly.size()].label == kNone;
            const double r = (P.p - sites[i]).norm();
            int sharing = 1;
            bool lowest = true;
            for (Index j : candidates) {
                if (std::abs((P.p - sites[j]).norm() - r) <= tiny) {
                    ++sharing;
                    lowest = lowest && i < j;
                }
            }
            if (lowest && sharing >= (on_boundary ? 3 : 4)) {
                ++degenerate;
            }
            if ((Q.p - P.p).norm() <= tiny) {
                continue;
            }
            cell_edges[i].push_back({P.p, Q.p, P.label});
        }
    }

    CellPartition part;
    part.dim = 2;
    part.points = points;
    part.degenerate_vertices = degenerate;
    for (Index i = 0; i < n; ++i) {
        for (const Edge& e : cell_edges[i]) {
            if (e.label != kNone && e.label < i) {
                continue;
            }
            Facet facet;
            facet.kind = e.label == kNone ? FacetKind::External : FacetKind::Internal;
            facet.cells = {i, e.label};
            const auto v0 = static_cast<Index>(part.vertices.size());
            part.vertices.push_back(lift(e.a));
            part.vertices.push_back(lift(e.b));
            facet.vertices = {v0, v0 + 1};
            part.facets.push_back(std::move(facet));
        }
    }
    finalize_partition(part);
    return part;
}

CellPartition build_voxel_partition(const std::vector<int>& counts, const std::vector<double>& spacing,
                                    const std::vector<double>& origin)
{
    const int dim = static_cast<int>(counts.size());
    if (dim != 2 && dim != 3) {
        fail(ErrorKind::Config, "voxel partition needs 2 or 3 axis counts");
    }
    if (static_cast<int>(spacing.size()) != dim || static_cast<int>(origin.size()) != dim) {
        fail(ErrorKind::Config, "spacing and origin must match the number of axis counts");
    }
    for (int a = 0; a < dim; ++a) {
        if (counts[a] < 2) {
            fail(ErrorKind::Config, "voxel count along axis " + std::to_string(a) + " must be >= 2");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            fail(ErrorKind::Config, "voxel spacing along axis " + std::to_string(a) + " must be > 0");
        }
    }

    std::array<int, 3> nc{1, 1, 1};
    std::array<double, 3> h{0.0, 0.0, 0.0};
    std::array<double, 3> o{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
        nc[a] = counts[a];
        h[a] = spacing[a];
        o[a] = origin[a];
    }
    // Vertex lattice: one extra layer per active axis.
    std::array<int, 3> nv{nc[0] + 1, nc[1] + 1, dim == 3 ? nc[2] + 1 : 1};

    auto cell_id = [&](int i, int j, int k) { return static_cast<Index>((k * nc[1] + j) * nc[0] + i); };
    auto vert_id = [&](int i, int j, int k) { return static_cast<Index>((k * nv[1] + j) * nv[0] + i); };

    CellPartition part;
    part.dim = dim;
    part.points.dim = dim;
    const std::size_t ncells = static_cast<std::size_t>(nc[0]) * nc[1] * nc[2];
    part.points.positions.resize(ncells);
    for (int k = 0; k < nc[2]; ++k) {
        for (int j = 0; j < nc[1]; ++j) {
            for (int i = 0; i < nc[0]; ++i) {
                Vec3 p(o[0] + (i + 0.5) * h[0], o[1] + (j + 0.5) * h[1], 0.0);
                if (dim == 3) {
                    p.z() = o[2] + (k + 0.5) * h[2];
                }
                part.points.positions[cell_id(i, j, k)] = p;
            }
        }
    }
    part.vertices.resize(static_cast<std::size_t>(nv[0]) * nv[1] * nv[2]);
    for (int k = 0; k < nv[2]; ++k) {
        for (int j = 0; j < nv[1]; ++j) {
            for (int i = 0; i < nv[0]; ++i) {
                part.vertices[vert_id(i, j, k)] = Vec3(o[0] + i * h[0], o[1] + j * h[1], dim == 3 ? o[2] + k * h[2] : 0.0);
            }
        }
    }

    auto add_facet = [&](Index lo, Index hi, std::vector<Index> loop) {
        Facet f;
        if (lo != kNone && hi != kNone) {
            f.kind = FacetKind::Internal;
            f.cells = {lo, hi};
        } else {
            f.kind = FacetKind::External;
            f.cells = {lo != kNone ? lo : hi, kNone};
        }
        f.vertices = std::move(loop);
        part.facets.push_back(std::move(f));
    };

    if (dim == 2) {
        for (int j = 0; j < nc[1]; ++j) {
            for (int i = 0; i <= nc[0]; ++i) {
                add_facet(i > 0 ? cell_id(i - 1, j, 0) : kNone, i < nc[0] ? cell_id(i, j, 0) : kNone,
                          {vert_id(i, j, 0), vert_id(i, j + 1, 0)});
            }
        }
        for (int j = 0; j <= nc[1]; ++j) {
            for (int i = 0; i < nc[0]; ++i) {
                add_facet(j > 0 ? cell_id(i, j - 1, 0) : kNone, j < nc[1] ? cell_id(i, j, 0) : kNone,
                          {vert_id(i, j, 0), vert_id(i + 1, j, 0)});
            }
        }
    } else {
        for (int k = 0; k < nc[2]; ++k) {
            for (int j = 0; j < nc[1]; ++j) {
                for (int i = 0; i <= nc[0]; ++i) {
                    add_facet(i > 0 ? cell_id(i - 1, j, k) : kNone, i < nc[0] ? cell_id(i, j, k) : kNone,
                              {vert_id(i, j, k), vert_id(i, j + 1, k), vert_id(i, j + 1, k + 1), vert_id(i, j, k + 1)});
                }
            }
        }
        for (int k = 0; k < nc[2]; ++k) {
            for (int j = 0; j <= nc[1]; ++j) {
                for (int i = 0; i < nc[0]; ++i) {
                    add_facet(j > 0 ? cell_id(i, j - 1, k) : kNone, j < nc[1] ? cell_id(i, j, k) : kNone,
                              {vert_id(i, j, k), vert_id(i + 1, j, k), vert_id(i + 1, j, k + 1), vert_id(i, j, k + 1)});
                }
            }
        }
        for (int k = 0; k <= nc[2]; ++k) {
            for (int j = 0; j < nc[1]; ++j) {
                for (int i = 0; i < nc[0]; ++i) {
                    add_facet(k > 0 ? cell_id(i, j, k - 1) : kNone, k < nc[2] ? cell_id(i, j, k) : kNone,
                              {vert_id(i, j, k), vert_id(i + 1, j, k), vert_id(i + 1, j + 1, k), vert_id(i, j + 1, k)});
                }
            }
        }
    }
    finalize_partition(part);
    return part;
}

std::vector<Index> adjacent_points(const CellPartition& part, Index center)
{
    std::vector<Index> out;
    for (Index f : part.cells[center].facets) {
        const Facet& facet = part.facets[f];
        if (facet.kind != FacetKind::Internal) {
            continue;
        }
        out.push_back(facet.cells[0] == center ? facet.cells[1] : facet.cells[0]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

bool support_has_full_rank(const CellPartition& part, Index center, const std::vector<Index>& neighbors)
{
    const int dim = part.dim;
    if (static_cast<int>(neighbors.size()) < dim) {
        return false;
    }
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(dim, dim);
    const Vec3& x0 = part.points.positions[center];
    for (Index j : neighbors) {
        const Eigen::VectorXd a = (part.points.positions[j] - x0).head(dim);
        ata += a * a.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ata, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    return lmax > 0.0 && lmin * kMaxSupportCondition > lmax;
}

} // namespace

SupportDomain first_ring_support(const CellPartition& part, Index center, int max_depth)
{
    if (center < 0 || static_cast<std::size_t>(center) >= part.cells.size()) {
        fail(ErrorKind::Contract, "support center out of range");
    }
    SupportDomain sd;
    sd.center = center;
    std::set<Index> members;
    std::vector<Index> frontier{center};
    members.insert(center);
    for (int depth = 1; depth <= max_depth; ++depth) {
        std::vector<Index> next;
        for (Index p : frontier) {
            for (Index q : adjacent_points(part, p)) {
                if (members.insert(q).second) {
                    next.push_back(q);
                }
            }
        }
        frontier = std::move(next);
        sd.neighbors.assign(members.begin(), members.end());
        sd.neighbors.erase(std::find(sd.neighbors.begin(), sd.neighbors.end(), center));
        sd.ring_depth = depth;
        if (support_has_full_rank(part, center, sd.neighbors)) {
            return sd;
        }
        if (frontier.empty()) {
            break;
        }
    }
    std::ostringstream msg;
    msg << "support of point " << center << " is rank deficient after " << sd.ring_depth << " rings";
    fail(ErrorKind::DegenerateGeometry, msg.str());
}

CellMoments cell_moments(const CellPartition& part, Index cell, const Vec3& about)
{
    CellMoments m;
    const Cell& c = part.cells[cell];
    const Vec3 apex = cell_apex(part, c);
    auto accumulate = [&](const Vec3& x, double w) {
        const Vec3 y = x - about;
        m.volume += w;
        m.first += w * y;
        m.second += w * y * y.transpose();
    };
    for_each_sub_simplex(part, c, apex, [&](const Simplex& s) {
        if (part.dim == 2) {
            const double w = s.measure / 3.0;
            accumulate(0.5 * (s.v[0] + s.v[1]), w);
            accumulate(0.5 * (s.v[1] + s.v[2]), w);
            accumulate(0.5 * (s.v[2] + s.v[0]), w);
        } else {
            const double w = s.measure / 4.0;
            const Vec3 sum = s.v[0] + s.v[1] + s.v[2] + s.v[3];
            for (int k = 0; k < 4; ++k) {
                accumulate(kTetAlpha * s.v[k] + kTetBeta * (sum - s.v[k]), w);
            }
        }
    });
    return m;
}

Index nearest_point(const PointCloud& points, const Vec3& x)
{
    Index best = kNone;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = (points.positions[i] - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<Index>(i);
        }
    }
    return best;
}

} // namespace fpm::geometry
