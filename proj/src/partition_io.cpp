#include "fpm/partition_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace fpm::io {

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty, comment-stripped line; false at end of input.
    bool next(std::istringstream& line)
    {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++number_;
            if (auto hash = raw.find('#'); hash != std::string::npos) {
                raw.erase(hash);
            }
            if (raw.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            line.clear();
            line.str(raw);
            return true;
        }
        return false;
    }

    [[noreturn]] void error(const std::string& what) const
    {
        fail(ErrorKind::Io, "partition file line " + std::to_string(number_) + ": " + what);
    }

    std::istringstream& require(std::istringstream& line, const std::string& what)
    {
        if (!next(line)) {
            error("unexpected end of file, expected " + what);
        }
        return line;
    }

    std::size_t keyword_count(const std::string& keyword)
    {
        std::istringstream line;
        require(line, keyword);
        std::string key;
        long long count = -1;
        line >> key >> count;
        if (key != keyword || count < 0) {
            error("expected '" + keyword + " <count>'");
        }
        return static_cast<std::size_t>(count);
    }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

Vec3 read_coords(LineReader& reader, std::istringstream& line, int dim, double scale)
{
    Vec3 p = Vec3::Zero();
    for (int a = 0; a < dim; ++a) {
        if (!(line >> p[a])) {
            reader.error("expected " + std::to_string(dim) + " coordinates");
        }
    }
    return p * scale;
}

} // namespace

PartitionFile read_partition(std::istream& in)
{
    LineReader reader(in);
    std::istringstream line;
    std::string key;

    reader.require(line, "header");
    int version = 0;
    line >> key >> version;
    if (key != "fpm-partition" || version != 1) {
        reader.error("expected header 'fpm-partition 1'");
    }

    reader.require(line, "dim");
    int dim = 0;
    line >> key >> dim;
    if (key != "dim" || (dim != 2 && dim != 3)) {
        reader.error("expected 'dim 2' or 'dim 3'");
    }

    reader.require(line, "units");
    std::string units;
    line >> key >> units;
    double scale = 1.0;
    if (key != "units" || (units != "cm" && units != "mm")) {
        reader.error("expected 'units cm' or 'units mm'");
    }
    if (units == "mm") {
        scale = 0.1;
    }

    PartitionFile file;
    file.points.dim = dim;
    const std::size_t npoints = reader.keyword_count("points");
    file.points.positions.reserve(npoints);
    for (std::size_t i = 0; i < npoints; ++i) {
        reader.require(line, "point coordinates");
        file.points.positions.push_back(read_coords(reader, line, dim, scale));
    }

    if (!reader.next(line)) {
        geometry::validate_point_cloud(file.points);
        return file;
    }
    std::size_t nvertices = 0;
    line >> key >> nvertices;
    if (key != "vertices") {
        reader.error("expected 'vertices <count>'");
    }
    auto& part = file.partition;
    part.dim = dim;
    part.points = file.points;
    part.vertices.reserve(nvertices);
    for (std::size_t i = 0; i < nvertices; ++i) {
        reader.require(line, "vertex coordinates");
        part.vertices.push_back(read_coords(reader, line, dim, scale));
    }
    const std::size_t nfacets = reader.keyword_count("facets");
    part.facets.reserve(nfacets);
    for (std::size_t i = 0; i < nfacets; ++i) {
        reader.require(line, "facet record");
        std::string kind;
        geometry::Facet facet;
        std::size_t k = 0;
        line >> kind >> facet.cells[0] >> facet.cells[1] >> k;
        if (!line || (kind != "i" && kind != "e")) {
            reader.error("malformed facet record");
        }
        facet.kind = kind == "i" ? geometry::FacetKind::Internal : geometry::FacetKind::External;
        if (facet.kind == geometry::FacetKind::External) {
            facet.cells[1] = kNone;
        }
        facet.vertices.resize(k);
        for (auto& v : facet.vertices) {
            if (!(line >> v)) {
                reader.error("facet record has fewer vertices than declared");
            }
        }
        part.facets.push_back(std::move(facet));
    }
    geometry::validate_point_cloud(part.points);
    geometry::finalize_partition(part);
    file.has_cells = true;
    return file;
}

PartitionFile read_partition(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open partition file " + path.string());
    }
    return read_partition(in);
}

void write_partition(std::ostream& out, const geometry::CellPartition& part)
{
    const int dim = part.dim;
    auto coords = [&](const Vec3& p) {
        for (int a = 0; a < dim; ++a) {
            out << (a ? " " : "") << p[a];
        }
        out << '\n';
    };
    out << std::setprecision(17);
    out << "fpm-partition 1\n";
    out << "dim " << dim << "\n";
    out << "units cm\n";
    out << "points " << part.points.size() << "\n";
    for (const auto& p : part.points.positions) {
        coords(p);
    }
    out << "vertices " << part.vertices.size() << "\n";
    for (const auto& v : part.vertices) {
        coords(v);
    }
    out << "facets " << part.facets.size() << "\n";
    for (const auto& f : part.facets) {
        out << (f.kind == geometry::FacetKind::Internal ? "i " : "e ") << f.cells[0] << ' ' << f.cells[1] << ' '
            << f.vertices.size();
        for (Index v : f.vertices) {
            out << ' ' << v;
        }
        out << '\n';
    }
}

void write_partition(const std::filesystem::path& path, const geometry::CellPartition& partition)
{
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::Io, "cannot write partition file " + path.string());
    }
    write_partition(out, partition);
}

std::vector<std::vector<double>> read_coordinate_list(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open coordinate file " + path.string());
    }
    LineReader reader(in);
    std::istringstream line;
    std::vector<std::vector<double>> rows;
    while (reader.next(line)) {
        std::vector<double> row;
        double v = 0.0;
        while (line >> v) {
            row.push_back(v);
        }
        if (!line.eof()) {
            reader.error("non-numeric coordinate");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            reader.error("inconsistent coordinate count");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace fpm::io
