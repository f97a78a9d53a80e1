#include "fpm/driver.hpp"

#include "fpm/output.hpp"
#include "fpm/partition_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace fpm::io {

namespace fs = std::filesystem;

geometry::CellPartition build_geometry(const SimulationConfig& config)
{
    const auto& g = config.geometry;
    if (g.kind == "grid") {
        std::vector<double> spacing, origin;
        for (std::size_t k = 0; k < g.counts.size(); ++k) {
            spacing.push_back(g.spacing_mm[k] * kMmToCm);
            origin.push_back(g.origin_mm[k] * kMmToCm);
        }
        return geometry::build_voxel_partition(g.counts, spacing, origin);
    }
    auto file = read_partition(config.resolve(g.file));
    if (file.has_cells) {
        return std::move(file.partition);
    }
    if (file.points.dim != 2 || g.boundary.empty()) {
        fail(ErrorKind::Config, "geometry.file holds a bare point cloud; a 2D boundary polygon is required");
    }
    geometry::Polygon boundary;
    for (const auto& row : read_coordinate_list(config.resolve(g.boundary))) {
        if (row.size() != 2) {
            fail(ErrorKind::Config, "geometry.boundary: expected x y per line");
        }
        boundary.vertices.emplace_back(row[0] * kMmToCm, row[1] * kMmToCm);
    }
    return geometry::build_voronoi_partition_2d(file.points, boundary);
}

ProblemSetup build_problem(const SimulationConfig& config, const ExecutionPolicy& policy)
{
    ProblemSetup setup;
    setup.partition = build_geometry(config);
    const auto n = setup.partition.size();

    std::vector<Vec3> fibers;
    if (config.physics.fiber_file.empty()) {
        fibers.push_back(config.physics.fiber);
    } else {
        for (const auto& row : read_coordinate_list(config.resolve(config.physics.fiber_file))) {
            if (row.size() < 2 || row.size() > 3) {
                fail(ErrorKind::Config, "physics.fiber_file: expected 2 or 3 components per line");
            }
            fibers.emplace_back(row[0], row[1], row.size() == 3 ? row[2] : 0.0);
        }
        if (fibers.size() != n) {
            fail(ErrorKind::Config, "physics.fiber_file has " + std::to_string(fibers.size()) +
                                        " vectors for " + std::to_string(n) + " points");
        }
    }
    setup.tensors =
        assembly::build_tensor_field(setup.partition.dim, n, fibers, config.physics.d0, config.physics.rho);

    {
        const auto shapes = shape::build_shape_functions(setup.partition, policy);
        setup.operators = assembly::assemble_global(setup.partition, shapes, setup.tensors, config.fpm, policy);
    }

    setup.model = ionic::make_model(config.ionic.model, config.ionic.params);
    std::vector<ionic::StimulusProtocol> protocols;
    for (const auto& s : config.stimuli) {
        protocols.push_back(to_protocol(s));
    }
    setup.stimuli = ionic::StimulusSet(std::move(protocols), setup.partition.points.positions);
    return setup;
}

stepper::RunOptions make_run_options(const SimulationConfig& config, const geometry::CellPartition& partition)
{
    stepper::RunOptions options;
    options.plan = config.time;
    options.trace_interval = config.output.trace_interval;
    options.snapshot_interval = config.output.snapshot_interval;
    options.lat_threshold = config.output.lat_threshold.value_or(post::kNaN);
    for (const auto& p : config.probes) {
        stepper::Probe probe;
        probe.name = p.name;
        probe.position = to_cm(p.position_mm);
        probe.node = geometry::nearest_point(partition.points, probe.position);
        options.probes.push_back(probe);
    }
    return options;
}

RunOutcome run_from_config(const SimulationConfig& config, const fs::path& directory, const ExecutionPolicy& policy,
                           std::ostream* log, const fs::path& restart)
{
    RunOutcome outcome;
    outcome.directory = directory;
    fs::create_directories(directory);
    {
        std::ofstream out(directory / "config.json");
        out << serialize_config(config);
        if (!out) {
            fail(ErrorKind::Io, "cannot write " + (directory / "config.json").string());
        }
    }

    if (log) {
        *log << "building problem\n";
    }
    const auto setup = build_problem(config, policy);
    if (log) {
        *log << "nodes " << setup.partition.size() << ", nonzeros " << setup.operators.K.nonZeros() << "\n";
    }

    auto options = make_run_options(config, setup.partition);
    options.progress = log != nullptr;

    stepper::SimulationState initial;
    if (!restart.empty()) {
        initial = read_checkpoint(restart);
    }

    const auto& points = setup.partition.points;
    const auto& formats = config.output.formats;
    auto on_snapshot = [&](int index, double t, const Eigen::VectorXd& v) {
        for (const auto& f : formats) {
            const auto path = directory / "snapshots" / snapshot_filename(index, f);
            if (f == "vtk") {
                write_vtk_snapshot(path, points, v, t);
            } else {
                write_csv_snapshot(path, points, v);
            }
        }
    };

    const stepper::Problem problem{setup.partition, setup.operators, *setup.model, setup.stimuli};
    outcome.result = stepper::run_simulation(problem, options, policy, restart.empty() ? nullptr : &initial,
                                             on_snapshot);
    const auto& result = outcome.result;

    for (const auto& trace : result.traces) {
        write_trace_csv(directory / "traces" / (trace.name + ".csv"), trace);
    }
    write_lat_csv(directory / "lat.csv", points, result.activation);
    std::size_t activated = 0;
    for (double lat : result.activation.lat) {
        activated += std::isnan(lat) ? 0 : 1;
    }
    write_metrics_csv(directory / "summary.csv",
                      {{"nodes", static_cast<double>(points.size())},
                       {"steps", static_cast<double>(result.steps)},
                       {"t_final_ms", result.final.t},
                       {"solver_iterations", static_cast<double>(result.solver_iterations)},
                       {"activated_nodes", static_cast<double>(activated)},
                       {"lat_threshold_mV", result.activation.threshold}});
    if (config.output.checkpoint) {
        write_checkpoint(directory / "checkpoint.txt", result.final);
    }
    return outcome;
}

std::vector<std::pair<std::string, double>> post_process(const fs::path& directory, std::ostream* log)
{
    if (!fs::is_directory(directory)) {
        fail(ErrorKind::Io, "no run directory " + directory.string());
    }
    double threshold = post::kNaN;
    {
        std::ifstream in(directory / "summary.csv");
        std::string line;
        while (std::getline(in, line)) {
            const std::string key = "lat_threshold_mV,";
            if (line.rfind(key, 0) == 0) {
                threshold = std::stod(line.substr(key.size()));
            }
        }
    }
    if (std::isnan(threshold)) {
        fail(ErrorKind::Io, (directory / "summary.csv").string() + ": missing lat_threshold_mV");
    }

    std::vector<fs::path> trace_files;
    if (fs::is_directory(directory / "traces")) {
        for (const auto& entry : fs::directory_iterator(directory / "traces")) {
            if (entry.path().extension() == ".csv") {
                trace_files.push_back(entry.path());
            }
        }
    }
    std::sort(trace_files.begin(), trace_files.end());
    {
        std::ofstream out(directory / "probes.csv");
        out.precision(17);
        out << "probe,lat_ms,apd90_ms\n";
        for (const auto& file : trace_files) {
            const auto trace = read_trace_csv(file);
            const double lat = post::compute_lat(trace, threshold);
            const double apd = post::compute_apd90(trace);
            out << trace.name << ',' << lat << ',' << apd << '\n';
            if (log) {
                *log << trace.name << ": lat " << lat << " ms, apd90 " << apd << " ms\n";
            }
        }
        if (!out) {
            fail(ErrorKind::Io, "cannot write " + (directory / "probes.csv").string());
        }
    }

    const auto table = read_lat_csv(directory / "lat.csv", threshold);
    std::vector<std::pair<std::string, double>> rows;
    const char* names[] = {"cv_x_cm_per_ms", "cv_y_cm_per_ms", "cv_z_cm_per_ms"};
    for (int axis = 0; axis < table.points.dim; ++axis) {
        double cv = post::kNaN;
        const auto [a, b] = post::cv_probe_pair(table.points, axis);
        if (a != b && !std::isnan(table.map.lat[a]) && !std::isnan(table.map.lat[b]) &&
            std::abs(table.map.lat[a] - table.map.lat[b]) > 1e-9 * std::max(1.0, std::abs(table.map.lat[a]))) {
            cv = std::abs(post::compute_cv(table.map, table.points, a, b));
        }
        rows.emplace_back(names[axis], cv);
        if (log) {
            *log << names[axis] << " " << cv << "\n";
        }
    }
    write_metrics_csv(directory / "metrics.csv", rows);
    return rows;
}

} // namespace fpm::io
