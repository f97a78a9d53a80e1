#include "fpm/cli.hpp"

#include "fpm/driver.hpp"
#include "fpm/output.hpp"
#include "fpm/partition_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>

namespace fpm::cli {

namespace fs = std::filesystem;

namespace {

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    int threads = 0;
    bool deterministic = false;
    std::string output_dir;
    bool quiet = false;
};

io::SimulationConfig load_config(const std::string& path)
{
    if (!fs::exists(path)) {
        throw Usage("config file not found: " + path);
    }
    try {
        return io::parse_config(path);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Io) {
            throw Usage(std::string("invalid config ") + path + ": " + e.what());
        }
        throw;
    }
}

ExecutionPolicy policy_for(const io::SimulationConfig& config, const Globals& g)
{
    ExecutionPolicy policy;
    policy.threads = g.threads > 0 ? g.threads : config.threads;
    policy.deterministic = g.deterministic || config.deterministic;
    return policy;
}

int do_run(const std::string& config_path, const std::string& restart, const Globals& g, std::ostream& out,
           std::ostream& err)
{
    auto config = load_config(config_path);
    const auto policy = policy_for(config, g);
    config.threads = policy.threads;
    config.deterministic = policy.deterministic;
    const fs::path directory = g.output_dir.empty() ? config.resolve(config.output.directory) : fs::path(g.output_dir);
    if (!restart.empty() && !fs::exists(restart)) {
        throw Usage("checkpoint not found: " + restart);
    }
    const auto outcome = io::run_from_config(config, directory, policy, g.quiet ? nullptr : &err, restart);
    out << "run complete: " << outcome.result.steps << " steps, t = " << outcome.result.final.t << " ms, output in "
        << directory.string() << "\n";
    return kExitOk;
}

int do_partition(const std::string& points_path, const std::string& boundary_path, const std::string& units,
                 std::string output, const Globals& g, std::ostream& out)
{
    for (const auto& p : {points_path, boundary_path}) {
        if (!fs::exists(p)) {
            throw Usage("file not found: " + p);
        }
    }
    if (units != "mm" && units != "cm") {
        throw Usage("--units must be mm or cm");
    }
    const double scale = units == "mm" ? io::kMmToCm : 1.0;
    geometry::PointCloud points;
    points.dim = 2;
    for (const auto& row : io::read_coordinate_list(points_path)) {
        if (row.size() != 2) {
            throw Usage(points_path + ": expected x y per line");
        }
        points.positions.emplace_back(row[0] * scale, row[1] * scale, 0.0);
    }
    geometry::Polygon boundary;
    for (const auto& row : io::read_coordinate_list(boundary_path)) {
        if (row.size() != 2) {
            throw Usage(boundary_path + ": expected x y per line");
        }
        boundary.vertices.emplace_back(row[0] * scale, row[1] * scale);
    }
    const auto partition = geometry::build_voronoi_partition_2d(points, boundary);
    const auto report = geometry::validate_partition(partition);
    if (output.empty()) {
        output = (fs::path(g.output_dir.empty() ? "." : g.output_dir) / "partition.txt").string();
    }
    if (fs::path(output).has_parent_path()) {
        fs::create_directories(fs::path(output).parent_path());
    }
    io::write_partition(output, partition);
    out << std::setprecision(12);
    out << "cells " << partition.size() << "\n";
    out << "facets " << partition.facets.size() << "\n";
    out << "area_cm2 " << report.measure_sum << " (boundary " << std::abs(geometry::polygon_area(boundary)) << ")\n";
    out << "degenerate_vertices " << partition.degenerate_vertices << "\n";
    out << "written " << output << "\n";
    return kExitOk;
}

int do_post(const std::string& run_dir, const Globals& g, std::ostream& out, std::ostream& err)
{
    if (!fs::is_directory(run_dir)) {
        throw Usage("run directory not found: " + run_dir);
    }
    const auto rows = io::post_process(run_dir, g.quiet ? nullptr : &err);
    out << std::setprecision(12);
    for (const auto& [name, value] : rows) {
        out << name << " " << value << "\n";
    }
    out << "wrote " << (fs::path(run_dir) / "probes.csv").string() << " and "
        << (fs::path(run_dir) / "metrics.csv").string() << "\n";
    return kExitOk;
}

int do_check(const std::string& config_path, const std::string& dump, int dense_limit, const Globals& g,
             std::ostream& out)
{
    const auto config = load_config(config_path);
    const auto policy = policy_for(config, g);
    const auto setup = io::build_problem(config, policy);
    const auto& K = setup.operators.K;
    const auto d = assembly::diagnose(K, dense_limit);
    out << std::setprecision(6) << std::scientific;
    out << "nodes " << setup.partition.size() << "\n";
    out << "nonzeros " << K.nonZeros() << "\n";
    out << "norm_inf(K) " << d.norm_inf << "\n";
    out << "norm_inf(K - K^T) / norm_inf(K) " << d.asymmetry << "\n";
    out << "norm_inf(K 1) / norm_inf(K) " << d.null_residual << "\n";
    out << "min_eigenvalue " << d.min_eigenvalue << (d.dense_eigen ? " (dense)" : " (lanczos estimate)") << "\n";
    out << "max_eigenvalue " << d.max_eigenvalue << "\n";
    out << "min_eigenvalue / norm_inf(K) " << d.min_eigenvalue / d.norm_inf << "\n";
    if (!dump.empty()) {
        assembly::dump_matrix(dump, K);
        const fs::path p(dump);
        assembly::dump_matrix(p.parent_path() / (p.stem().string() + "_C" + p.extension().string()),
                              setup.operators.C);
        out << "matrices written to " << dump << "\n";
    }
    return kExitOk;
}

} // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fragile Points Method solver for the cardiac monodomain equation", "fpm"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (default: config value)")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Bit-reproducible reductions and assembly");
    app.add_option("--output-dir", g.output_dir, "Output directory (overrides the config)");
    app.add_flag("--quiet", g.quiet, "No progress output");

    std::string config_path, restart, points_path, boundary_path, units = "mm", output, run_dir, dump;
    int dense_limit = 2000;

    auto* run = app.add_subcommand("run", "Run a simulation")->fallthrough();
    run->add_option("config", config_path, "Configuration file")->required();
    run->add_option("--restart", restart, "Start from a checkpoint file");

    auto* partition = app.add_subcommand("partition", "Clipped Voronoi partition of a 2D point list")->fallthrough();
    partition->add_option("points", points_path, "Point list, x y per line")->required();
    partition->add_option("boundary", boundary_path, "Boundary polygon, x y per line")->required();
    partition->add_option("--units", units, "Input length unit, mm or cm")->capture_default_str();
    partition->add_option("-o,--output", output, "Partition file (default <output-dir>/partition.txt)");

    auto* postcmd = app.add_subcommand("post", "LAT, APD90 and CV tables for a run directory")->fallthrough();
    postcmd->add_option("run_dir", run_dir, "Run output directory")->required();

    auto* check = app.add_subcommand("check", "Assemble the operators and print diagnostics")->fallthrough();
    check->add_option("config", config_path, "Configuration file")->required();
    check->add_option("--dump-matrix", dump, "Write K (and C) as row col value triples");
    check->add_option("--dense-limit", dense_limit, "Largest size for dense eigenvalues")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return do_run(config_path, restart, g, out, err);
        }
        if (partition->parsed()) {
            return do_partition(points_path, boundary_path, units, output, g, out);
        }
        if (postcmd->parsed()) {
            return do_post(run_dir, g, out, err);
        }
        if (check->parsed()) {
            return do_check(config_path, dump, dense_limit, g, out);
        }
    } catch (const Usage& e) {
        err << "fpm: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "fpm: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace fpm::cli
