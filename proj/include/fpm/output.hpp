#pragma once

#include "fpm/geometry.hpp"
#include "fpm/post.hpp"
#include "fpm/stepper.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fpm::io {

/// "V_000123.vtk" style names.
std::string snapshot_filename(int index, const std::string& extension, const std::string& prefix = "V");

/// Legacy ASCII VTK unstructured grid: one VERTEX cell per point and the
/// point scalar V, coordinates in cm, 17 significant digits.
void write_vtk_snapshot(const std::filesystem::path& path, const geometry::PointCloud& points,
                        const Eigen::VectorXd& v, double t);

/// Header "x,y,V" or "x,y,z,V", one row per point.
void write_csv_snapshot(const std::filesystem::path& path, const geometry::PointCloud& points,
                        const Eigen::VectorXd& v);

struct Snapshot {
    geometry::PointCloud points;
    Eigen::VectorXd v;
};

Snapshot read_csv_snapshot(const std::filesystem::path& path);
Snapshot read_vtk_snapshot(const std::filesystem::path& path);

/// Header "t_ms,V_mV".
void write_trace_csv(const std::filesystem::path& path, const post::ProbeTrace& trace);
post::ProbeTrace read_trace_csv(const std::filesystem::path& path);

/// Header "node,x,y[,z],lat_ms"; never-activated nodes are written as nan.
void write_lat_csv(const std::filesystem::path& path, const geometry::PointCloud& points,
                   const post::ActivationMap& map);

struct LatTable {
    geometry::PointCloud points;
    post::ActivationMap map;
};

LatTable read_lat_csv(const std::filesystem::path& path, double threshold = post::kNaN);

/// Header "quantity,value".
void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows);

// Checkpoint text format:
//
//   fpm-checkpoint 1
//   t <ms>
//   nodes <N> state_size <M>
//   <V> <s_1> ... <s_M>           N lines
void write_checkpoint(const std::filesystem::path& path, const stepper::SimulationState& state);
stepper::SimulationState read_checkpoint(const std::filesystem::path& path);

} // namespace fpm::io
