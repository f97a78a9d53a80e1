#include "fpm/output.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fpm::io {

namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out << std::setprecision(kDigits);
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot read " + path.string());
    }
    return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) {
        fail(ErrorKind::Io, "write failed for " + path.string());
    }
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, sep)) {
        out.push_back(field);
    }
    return out;
}

double to_double(const std::string& field, const std::filesystem::path& path)
{
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\r')) {
        ++end;
    }
    if (end == begin || (end && *end != '\0')) {
        fail(ErrorKind::Io, path.string() + ": bad number '" + field + "'");
    }
    return v;
}

/// Header plus rows of numbers; every row must have the header's width.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::vector<std::string>& header)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) {
        fail(ErrorKind::Io, path.string() + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    header = split(line, ',');
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            fail(ErrorKind::Io, path.string() + ": row " + std::to_string(rows.size() + 2) + " has " +
                                    std::to_string(fields.size()) + " fields, expected " +
                                    std::to_string(header.size()));
        }
        std::vector<double> row;
        for (const auto& f : fields) {
            row.push_back(to_double(f, path));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_coords(std::ostream& out, const Vec3& x, int dim)
{
    for (int k = 0; k < dim; ++k) {
        out << x[k] << ',';
    }
}

} // namespace

std::string snapshot_filename(int index, const std::string& extension, const std::string& prefix)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%06d.", index);
    return prefix + buf + extension;
}

void write_vtk_snapshot(const std::filesystem::path& path, const geometry::PointCloud& points,
                        const Eigen::VectorXd& v, double t)
{
    const auto n = points.size();
    if (static_cast<std::size_t>(v.size()) != n) {
        fail(ErrorKind::Contract, "snapshot values do not match the point count");
    }
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n";
    out << "fpm V t_ms=" << t << "\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << n << " double\n";
    for (const auto& x : points.positions) {
        out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
    }
    out << "CELLS " << n << ' ' << 2 * n << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << "1 " << i << '\n';
    }
    out << "CELL_TYPES " << n << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << "1\n";
    }
    out << "POINT_DATA " << n << "\nSCALARS V double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << v[i] << '\n';
    }
    finish(out, path);
}

void write_csv_snapshot(const std::filesystem::path& path, const geometry::PointCloud& points,
                        const Eigen::VectorXd& v)
{
    if (static_cast<std::size_t>(v.size()) != points.size()) {
        fail(ErrorKind::Contract, "snapshot values do not match the point count");
    }
    auto out = open_out(path);
    out << (points.dim == 3 ? "x,y,z,V\n" : "x,y,V\n");
    for (std::size_t i = 0; i < points.size(); ++i) {
        write_coords(out, points.positions[i], points.dim);
        out << v[static_cast<Eigen::Index>(i)] << '\n';
    }
    finish(out, path);
}

Snapshot read_csv_snapshot(const std::filesystem::path& path)
{
    std::vector<std::string> header;
    const auto rows = read_table(path, header);
    if (header.size() != 3 && header.size() != 4) {
        fail(ErrorKind::Io, path.string() + ": expected x,y[,z],V columns");
    }
    Snapshot s;
    s.points.dim = static_cast<int>(header.size()) - 1;
    s.v.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Vec3 x = Vec3::Zero();
        for (int k = 0; k < s.points.dim; ++k) {
            x[k] = rows[i][k];
        }
        s.points.positions.push_back(x);
        s.v[static_cast<Eigen::Index>(i)] = rows[i].back();
    }
    return s;
}

Snapshot read_vtk_snapshot(const std::filesystem::path& path)
{
    auto in = open_in(path);
    Snapshot s;
    s.points.dim = 3;
    std::string token;
    auto expect_number = [&](double& out) {
        if (!(in >> token)) {
            fail(ErrorKind::Io, path.string() + ": unexpected end of file");
        }
        out = to_double(token, path);
    };
    while (in >> token) {
        if (token == "POINTS") {
            std::size_t n = 0;
            in >> n >> token;
            s.points.positions.resize(n);
            for (auto& x : s.points.positions) {
                expect_number(x[0]);
                expect_number(x[1]);
                expect_number(x[2]);
            }
        } else if (token == "LOOKUP_TABLE") {
            in >> token;
            s.v.resize(static_cast<Eigen::Index>(s.points.size()));
            for (Eigen::Index i = 0; i < s.v.size(); ++i) {
                expect_number(s.v[i]);
            }
        }
    }
    if (static_cast<std::size_t>(s.v.size()) != s.points.size()) {
        fail(ErrorKind::Io, path.string() + ": point data missing");
    }
    return s;
}

void write_trace_csv(const std::filesystem::path& path, const post::ProbeTrace& trace)
{
    post::validate_trace(trace);
    auto out = open_out(path);
    out << "t_ms,V_mV\n";
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        out << trace.t[k] << ',' << trace.v[k] << '\n';
    }
    finish(out, path);
}

post::ProbeTrace read_trace_csv(const std::filesystem::path& path)
{
    std::vector<std::string> header;
    const auto rows = read_table(path, header);
    if (header.size() != 2 || header[0] != "t_ms" || header[1] != "V_mV") {
        fail(ErrorKind::Io, path.string() + ": expected header t_ms,V_mV");
    }
    post::ProbeTrace trace;
    trace.name = path.stem().string();
    for (const auto& row : rows) {
        trace.t.push_back(row[0]);
        trace.v.push_back(row[1]);
    }
    post::validate_trace(trace);
    return trace;
}

void write_lat_csv(const std::filesystem::path& path, const geometry::PointCloud& points,
                   const post::ActivationMap& map)
{
    if (map.lat.size() != points.size()) {
        fail(ErrorKind::Contract, "activation map does not match the point count");
    }
    auto out = open_out(path);
    out << (points.dim == 3 ? "node,x,y,z,lat_ms\n" : "node,x,y,lat_ms\n");
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << i << ',';
        write_coords(out, points.positions[i], points.dim);
        if (std::isnan(map.lat[i])) {
            out << "nan\n";
        } else {
            out << map.lat[i] << '\n';
        }
    }
    finish(out, path);
}

LatTable read_lat_csv(const std::filesystem::path& path, double threshold)
{
    std::vector<std::string> header;
    const auto rows = read_table(path, header);
    if (header.size() != 4 && header.size() != 5) {
        fail(ErrorKind::Io, path.string() + ": expected node,x,y[,z],lat_ms columns");
    }
    LatTable table;
    table.points.dim = static_cast<int>(header.size()) - 2;
    table.map.threshold = threshold;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i][0] != static_cast<double>(i)) {
            fail(ErrorKind::Io, path.string() + ": node column out of order at row " + std::to_string(i + 2));
        }
        Vec3 x = Vec3::Zero();
        for (int k = 0; k < table.points.dim; ++k) {
            x[k] = rows[i][1 + k];
        }
        table.points.positions.push_back(x);
        table.map.lat.push_back(rows[i].back());
    }
    return table;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, double>>& rows)
{
    auto out = open_out(path);
    out << "quantity,value\n";
    for (const auto& [name, value] : rows) {
        out << name << ',';
        if (std::isnan(value)) {
            out << "nan\n";
        } else {
            out << value << '\n';
        }
    }
    finish(out, path);
}

void write_checkpoint(const std::filesystem::path& path, const stepper::SimulationState& state)
{
    const auto n = static_cast<std::size_t>(state.v.size());
    const std::size_t m = state.states.size;
    if (state.states.values.size() != n * m) {
        fail(ErrorKind::Contract, "checkpoint state arrays are inconsistent");
    }
    auto out = open_out(path);
    out << "fpm-checkpoint 1\n";
    out << "t " << state.t << '\n';
    out << "nodes " << n << " state_size " << m << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << state.v[static_cast<Eigen::Index>(i)];
        for (std::size_t k = 0; k < m; ++k) {
            out << ' ' << state.states.values[i * m + k];
        }
        out << '\n';
    }
    finish(out, path);
}

stepper::SimulationState read_checkpoint(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string magic, key;
    int version = 0;
    stepper::SimulationState s;
    std::size_t n = 0;
    std::size_t m = 0;
    std::string nodes_key, size_key;
    if (!(in >> magic >> version) || magic != "fpm-checkpoint" || version != 1) {
        fail(ErrorKind::Io, path.string() + ": not an fpm checkpoint (version 1)");
    }
    std::string t_token;
    if (!(in >> key >> t_token) || key != "t") {
        fail(ErrorKind::Io, path.string() + ": missing time");
    }
    s.t = to_double(t_token, path);
    if (!(in >> nodes_key >> n >> size_key >> m) || nodes_key != "nodes" || size_key != "state_size") {
        fail(ErrorKind::Io, path.string() + ": missing sizes");
    }
    s.v.resize(static_cast<Eigen::Index>(n));
    s.states.size = m;
    s.states.values.resize(n * m);
    std::string token;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k <= m; ++k) {
            if (!(in >> token)) {
                fail(ErrorKind::Io, path.string() + ": truncated at node " + std::to_string(i));
            }
            const double x = to_double(token, path);
            if (k == 0) {
                s.v[static_cast<Eigen::Index>(i)] = x;
            } else {
                s.states.values[i * m + k - 1] = x;
            }
        }
    }
    return s;
}

} // namespace fpm::io
