#pragma once

#include "fpm/config.hpp"
#include "fpm/shape.hpp"

#include <filesystem>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

namespace fpm::io {

struct ProblemSetup {
    geometry::CellPartition partition;
    assembly::DiffusionTensorField tensors;
    assembly::GlobalOperators operators;
    std::unique_ptr<ionic::IonicModel> model;
    ionic::StimulusSet stimuli;
};

/// Grid or imported partition, in cm.
geometry::CellPartition build_geometry(const SimulationConfig& config);

/// Geometry, tensors, operators, ionic model and stimuli.
ProblemSetup build_problem(const SimulationConfig& config, const ExecutionPolicy& policy);

stepper::RunOptions make_run_options(const SimulationConfig& config, const geometry::CellPartition& partition);

// Run directory layout:
//   config.json         the effective configuration
//   snapshots/V_*.vtk   (and/or .csv) every snapshot_interval
//   traces/<probe>.csv  t_ms,V_mV
//   lat.csv             node,x,y[,z],lat_ms
//   summary.csv         quantity,value (run statistics, lat threshold)
//   checkpoint.txt      final state when output.checkpoint is set
struct RunOutcome {
    stepper::SimulationResult result;
    std::filesystem::path directory;
};

RunOutcome run_from_config(const SimulationConfig& config, const std::filesystem::path& directory,
                           const ExecutionPolicy& policy, std::ostream* log = nullptr,
                           const std::filesystem::path& restart = {});

/// Reads a run directory, writes probes.csv (probe,lat_ms,apd90_ms) and
/// metrics.csv (conduction velocity along each axis between the 25 % and
/// 75 % nodes, cm/ms) and returns the metric rows.
std::vector<std::pair<std::string, double>> post_process(const std::filesystem::path& directory,
                                                         std::ostream* log = nullptr);

} // namespace fpm::io
