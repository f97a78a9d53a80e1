#pragma once

#include "fpm/assembly.hpp"
#include "fpm/ionic.hpp"
#include "fpm/stepper.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fpm::io {

// Configuration is JSON. Lengths are given in mm; they stay in mm inside
// SimulationConfig and are converted to cm once, when the problem is built
// (see to_cm). Diffusion is in cm^2/ms, times in ms, currents in mV/ms.

inline constexpr double kMmToCm = 0.1;

struct GeometryConfig {
    /// "grid": voxel grid from counts/spacing_mm/origin_mm.
    /// "file": partition text file; a bare point cloud in 2D needs `boundary`.
    std::string kind = "grid";
    std::vector<int> counts;
    std::vector<double> spacing_mm;
    std::vector<double> origin_mm;
    std::string file;
    std::string boundary;
};

struct PhysicsConfig {
    double d0 = 0.0013;
    double rho = 1.0;
    Vec3 fiber = Vec3::UnitX();
    /// Optional per-point fiber list (one vector per line), overrides `fiber`.
    std::string fiber_file;
};

struct IonicConfig {
    std::string model = "mitchell_schaeffer";
    std::map<std::string, double> params;
};

struct StimulusConfig {
    std::string shape = "box"; // box | sphere
    Vec3 lo_mm = Vec3::Zero();
    Vec3 hi_mm = Vec3::Zero();
    Vec3 center_mm = Vec3::Zero();
    double radius_mm = 0.0;
    double amplitude = 0.0;
    double duration = 1.0;
    double period = 1000.0;
    double start = 0.0;
    int count = 1;
};

struct ProbeConfig {
    std::string name;
    Vec3 position_mm = Vec3::Zero();
};

struct OutputConfig {
    std::string directory = "output";
    double snapshot_interval = 0.0;
    std::vector<std::string> formats{"vtk"};
    double trace_interval = 0.0;
    std::optional<double> lat_threshold;
    bool checkpoint = false;
};

struct SimulationConfig {
    GeometryConfig geometry;
    PhysicsConfig physics;
    IonicConfig ionic;
    assembly::AssemblyOptions fpm;
    stepper::TimeIntegrationPlan time;
    std::vector<StimulusConfig> stimuli;
    std::vector<ProbeConfig> probes;
    OutputConfig output;
    bool deterministic = false;
    int threads = 1;
    /// Directory relative file names are resolved against.
    std::filesystem::path base_dir = ".";

    void validate() const;
    std::filesystem::path resolve(const std::string& file) const;
};

/// Parses and validates. Unknown keys and type mismatches are Config errors
/// naming the key path; syntax errors report line and column.
SimulationConfig parse_config(const std::filesystem::path& path);
SimulationConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".");

/// Full JSON with every default written out, 17 significant digits.
std::string serialize_config(const SimulationConfig& config);

Vec3 to_cm(const Vec3& mm);
ionic::StimulusProtocol to_protocol(const StimulusConfig& stimulus);

} // namespace fpm::io
