#pragma once

#include "fpm/geometry.hpp"

#include <filesystem>
#include <iosfwd>

namespace fpm::io {

// Partition text format ("fpm-partition 1"):
//
//   fpm-partition 1
//   dim <2|3>
//   units <cm|mm>
//   points <N>
//   <x> <y> [<z>]                      N lines
//   vertices <M>
//   <x> <y> [<z>]                      M lines
//   facets <F>
//   <i|e> <cell1> <cell2|-1> <k> <v1> ... <vk>   F lines
//
// '#' starts a comment. Cells are implied: one per point, bounded by the
// facets that name it. Measures, normals, quadrature and h_e are recomputed
// on import. The vertices/facets sections may be omitted, giving a bare
// point cloud. Coordinates are converted to cm on import and always written
// in cm.

struct PartitionFile {
    geometry::PointCloud points;
    bool has_cells = false;
    geometry::CellPartition partition; // valid when has_cells
};

PartitionFile read_partition(std::istream& in);
PartitionFile read_partition(const std::filesystem::path& path);

void write_partition(std::ostream& out, const geometry::CellPartition& partition);
void write_partition(const std::filesystem::path& path, const geometry::CellPartition& partition);

/// Plain coordinate list: one whitespace-separated tuple per line, '#'
/// comments. Used for point and boundary-polygon inputs. The dimension is
/// taken from the first data line.
std::vector<std::vector<double>> read_coordinate_list(const std::filesystem::path& path);

} // namespace fpm::io
