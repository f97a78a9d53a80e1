#include "fpm/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fpm::io {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what)
{
    fail(ErrorKind::Config, (path.empty() ? std::string("<root>") : path) + ": " + what);
}

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object()) {
            config_error(path_, "expected an object");
        }
    }

    void allow(std::initializer_list<std::string_view> keys) const
    {
        for (const auto& item : node_.items()) {
            bool known = false;
            for (auto k : keys) {
                known = known || item.key() == k;
            }
            if (!known) {
                config_error(child(item.key()), "unknown key");
            }
        }
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const char* key) const { return node_.contains(key); }
    const json& at(const char* key) const { return node_.at(key); }

    void get(const char* key, double& out) const
    {
        if (has(key)) {
            out = number(at(key), child(key));
        }
    }

    void get(const char* key, int& out) const
    {
        if (has(key)) {
            if (!at(key).is_number_integer()) {
                config_error(child(key), "expected an integer");
            }
            out = at(key).get<int>();
        }
    }

    void get(const char* key, bool& out) const
    {
        if (has(key)) {
            if (!at(key).is_boolean()) {
                config_error(child(key), "expected true or false");
            }
            out = at(key).get<bool>();
        }
    }

    void get(const char* key, std::string& out) const
    {
        if (has(key)) {
            if (!at(key).is_string()) {
                config_error(child(key), "expected a string");
            }
            out = at(key).get<std::string>();
        }
    }

    void get(const char* key, std::vector<double>& out) const
    {
        if (has(key)) {
            out = numbers(at(key), child(key));
        }
    }

    void get(const char* key, std::vector<int>& out) const
    {
        if (!has(key)) {
            return;
        }
        const json& a = at(key);
        if (!a.is_array()) {
            config_error(child(key), "expected an array of integers");
        }
        out.clear();
        for (const auto& v : a) {
            if (!v.is_number_integer()) {
                config_error(child(key), "expected an array of integers");
            }
            out.push_back(v.get<int>());
        }
    }

    void get(const char* key, Vec3& out) const
    {
        if (!has(key)) {
            return;
        }
        const auto v = numbers(at(key), child(key));
        if (v.size() < 2 || v.size() > 3) {
            config_error(child(key), "expected 2 or 3 components");
        }
        out = Vec3(v[0], v[1], v.size() == 3 ? v[2] : 0.0);
    }

    static double number(const json& v, const std::string& path)
    {
        if (!v.is_number()) {
            config_error(path, "expected a number");
        }
        return v.get<double>();
    }

    static std::vector<double> numbers(const json& a, const std::string& path)
    {
        if (!a.is_array()) {
            config_error(path, "expected an array of numbers");
        }
        std::vector<double> out;
        for (const auto& v : a) {
            out.push_back(number(v, path));
        }
        return out;
    }

private:
    const json& node_;
    std::string path_;
};

template <class Enum>
Enum parse_enum(const Reader& r, const char* key, Enum current, std::initializer_list<std::pair<const char*, Enum>> names)
{
    std::string s;
    r.get(key, s);
    if (s.empty()) {
        return current;
    }
    for (const auto& [name, value] : names) {
        if (s == name) {
            return value;
        }
    }
    config_error(r.child(key), "unknown value '" + s + "'");
}

void parse_geometry(const json& node, GeometryConfig& g)
{
    Reader r(node, "geometry");
    r.allow({"kind", "counts", "spacing_mm", "origin_mm", "file", "boundary"});
    r.get("kind", g.kind);
    r.get("counts", g.counts);
    r.get("spacing_mm", g.spacing_mm);
    r.get("origin_mm", g.origin_mm);
    r.get("file", g.file);
    r.get("boundary", g.boundary);
    if (g.kind == "grid" && g.origin_mm.empty()) {
        g.origin_mm.assign(g.counts.size(), 0.0);
    }
}

void parse_physics(const json& node, PhysicsConfig& p)
{
    Reader r(node, "physics");
    r.allow({"d0", "rho", "fiber", "fiber_file"});
    r.get("d0", p.d0);
    r.get("rho", p.rho);
    r.get("fiber", p.fiber);
    r.get("fiber_file", p.fiber_file);
}

void parse_ionic(const json& node, IonicConfig& c)
{
    Reader r(node, "ionic");
    r.allow({"model", "params"});
    r.get("model", c.model);
    if (r.has("params")) {
        Reader params(r.at("params"), "ionic.params");
        for (const auto& item : r.at("params").items()) {
            c.params[item.key()] = Reader::number(item.value(), params.child(item.key()));
        }
    }
}

void parse_fpm(const json& node, assembly::AssemblyOptions& o)
{
    Reader r(node, "fpm");
    r.allow({"penalty", "lumped_mass"});
    r.get("penalty", o.penalty);
    r.get("lumped_mass", o.lumped_mass);
}

void parse_time(const json& node, stepper::TimeIntegrationPlan& t)
{
    using namespace stepper;
    Reader r(node, "time");
    r.allow({"dt", "total", "splitting", "scheme", "theta", "reaction", "solver_tol", "max_iterations"});
    r.get("dt", t.dt);
    r.get("total", t.total);
    t.splitting = parse_enum(r, "splitting", t.splitting, {{"godunov", Splitting::Godunov}, {"strang", Splitting::Strang}});
    t.scheme = parse_enum(r, "scheme", t.scheme,
                          {{"theta", DiffusionScheme::Theta}, {"explicit", DiffusionScheme::Explicit}});
    r.get("theta", t.theta);
    t.reaction =
        parse_enum(r, "reaction", t.reaction, {{"euler", ReactionScheme::Euler}, {"heun", ReactionScheme::Heun}});
    r.get("solver_tol", t.solver.tolerance);
    r.get("max_iterations", t.solver.max_iterations);
}

StimulusConfig parse_stimulus(const json& node, const std::string& path)
{
    StimulusConfig s;
    Reader r(node, path);
    r.allow({"shape", "lo_mm", "hi_mm", "center_mm", "radius_mm", "amplitude", "duration", "period", "start",
             "count"});
    r.get("shape", s.shape);
    r.get("lo_mm", s.lo_mm);
    r.get("hi_mm", s.hi_mm);
    r.get("center_mm", s.center_mm);
    r.get("radius_mm", s.radius_mm);
    r.get("amplitude", s.amplitude);
    r.get("duration", s.duration);
    r.get("period", s.period);
    r.get("start", s.start);
    r.get("count", s.count);
    return s;
}

ProbeConfig parse_probe(const json& node, const std::string& path)
{
    ProbeConfig p;
    Reader r(node, path);
    r.allow({"name", "position_mm"});
    r.get("name", p.name);
    r.get("position_mm", p.position_mm);
    return p;
}

void parse_output(const json& node, OutputConfig& o)
{
    Reader r(node, "output");
    r.allow({"directory", "snapshot_interval", "formats", "trace_interval", "lat_threshold", "checkpoint"});
    r.get("directory", o.directory);
    r.get("snapshot_interval", o.snapshot_interval);
    if (r.has("formats")) {
        const json& a = r.at("formats");
        if (!a.is_array()) {
            config_error("output.formats", "expected an array of strings");
        }
        o.formats.clear();
        for (const auto& f : a) {
            if (!f.is_string()) {
                config_error("output.formats", "expected an array of strings");
            }
            o.formats.push_back(f.get<std::string>());
        }
    }
    r.get("trace_interval", o.trace_interval);
    if (r.has("lat_threshold") && !r.at("lat_threshold").is_null()) {
        double v = 0.0;
        r.get("lat_threshold", v);
        o.lat_threshold = v;
    }
    r.get("checkpoint", o.checkpoint);
}

const json& array_at(const json& root, const char* key)
{
    const json& a = root.at(key);
    if (!a.is_array()) {
        config_error(key, "expected an array");
    }
    return a;
}

json vec_json(const Vec3& v, int dim)
{
    json a = json::array();
    for (int k = 0; k < dim; ++k) {
        a.push_back(v[k]);
    }
    return a;
}

template <class Enum>
const char* enum_name(Enum value, std::initializer_list<std::pair<const char*, Enum>> names)
{
    for (const auto& [name, v] : names) {
        if (v == value) {
            return name;
        }
    }
    return "";
}

} // namespace

Vec3 to_cm(const Vec3& mm) { return mm * kMmToCm; }

ionic::StimulusProtocol to_protocol(const StimulusConfig& s)
{
    ionic::StimulusProtocol p;
    if (s.shape == "box") {
        p.region.kind = ionic::Region::Kind::Box;
        p.region.lo = to_cm(s.lo_mm);
        p.region.hi = to_cm(s.hi_mm);
    } else if (s.shape == "sphere") {
        p.region.kind = ionic::Region::Kind::Sphere;
        p.region.center = to_cm(s.center_mm);
        p.region.radius = s.radius_mm * kMmToCm;
    } else {
        fail(ErrorKind::Config, "stimulus shape must be 'box' or 'sphere', got '" + s.shape + "'");
    }
    p.amplitude = s.amplitude;
    p.duration = s.duration;
    p.period = s.period;
    p.start = s.start;
    p.count = s.count;
    return p;
}

std::filesystem::path SimulationConfig::resolve(const std::string& file) const
{
    const std::filesystem::path p(file);
    return p.is_absolute() ? p : base_dir / p;
}

void SimulationConfig::validate() const
{
    const auto& g = geometry;
    if (g.kind == "grid") {
        const auto dim = g.counts.size();
        if (dim != 2 && dim != 3) {
            config_error("geometry.counts", "expected 2 or 3 entries");
        }
        if (g.spacing_mm.size() != dim || g.origin_mm.size() != dim) {
            config_error("geometry", "counts, spacing_mm and origin_mm need the same length");
        }
        for (std::size_t k = 0; k < dim; ++k) {
            if (g.counts[k] < 2) {
                config_error("geometry.counts", "entries must be >= 2");
            }
            if (!(g.spacing_mm[k] > 0.0) || !std::isfinite(g.spacing_mm[k])) {
                config_error("geometry.spacing_mm", "entries must be positive");
            }
        }
    } else if (g.kind == "file") {
        if (g.file.empty()) {
            config_error("geometry.file", "required for kind 'file'");
        }
        if (!std::filesystem::exists(resolve(g.file))) {
            config_error("geometry.file", "no such file: " + resolve(g.file).string());
        }
        if (!g.boundary.empty() && !std::filesystem::exists(resolve(g.boundary))) {
            config_error("geometry.boundary", "no such file: " + resolve(g.boundary).string());
        }
    } else {
        config_error("geometry.kind", "must be 'grid' or 'file', got '" + g.kind + "'");
    }

    if (!(physics.d0 > 0.0) || !std::isfinite(physics.d0)) {
        config_error("physics.d0", "must be positive");
    }
    if (!(physics.rho > 0.0 && physics.rho <= 1.0)) {
        config_error("physics.rho", "must lie in (0, 1]");
    }
    if (physics.fiber_file.empty() && !(physics.fiber.norm() > 0.0)) {
        config_error("physics.fiber", "must be non-zero");
    }
    if (!physics.fiber_file.empty() && !std::filesystem::exists(resolve(physics.fiber_file))) {
        config_error("physics.fiber_file", "no such file: " + resolve(physics.fiber_file).string());
    }

    try {
        ionic::make_model(ionic.model, ionic.params);
    } catch (const Error& e) {
        config_error("ionic", e.what());
    }

    if (!(fpm.penalty > 0.0) || !std::isfinite(fpm.penalty)) {
        config_error("fpm.penalty", "must be positive");
    }
    try {
        time.validate();
    } catch (const Error& e) {
        config_error("time", e.what());
    }

    for (std::size_t k = 0; k < stimuli.size(); ++k) {
        const std::string path = "stimuli[" + std::to_string(k) + "]";
        try {
            const auto p = to_protocol(stimuli[k]);
            p.validate();
            if (p.region.kind == ionic::Region::Kind::Box && (p.region.hi - p.region.lo).minCoeff() < 0.0) {
                config_error(path, "hi_mm must be >= lo_mm componentwise");
            }
            if (p.region.kind == ionic::Region::Kind::Sphere && !(p.region.radius > 0.0)) {
                config_error(path, "radius_mm must be positive");
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Config) {
                throw;
            }
            const std::string what = e.what();
            if (what.rfind(path, 0) == 0) {
                throw;
            }
            config_error(path, what);
        }
    }

    std::set<std::string> names;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const std::string path = "probes[" + std::to_string(k) + "].name";
        const auto& name = probes[k].name;
        if (name.empty()) {
            config_error(path, "must not be empty");
        }
        if (name.find_first_of("/\\ ,") != std::string::npos) {
            config_error(path, "must not contain '/', '\\', ' ' or ','");
        }
        if (!names.insert(name).second) {
            config_error(path, "duplicate probe name '" + name + "'");
        }
    }

    if (!(output.snapshot_interval >= 0.0)) {
        config_error("output.snapshot_interval", "must be >= 0");
    }
    if (!(output.trace_interval >= 0.0)) {
        config_error("output.trace_interval", "must be >= 0");
    }
    for (const auto& f : output.formats) {
        if (f != "vtk" && f != "csv") {
            config_error("output.formats", "unknown format '" + f + "' (vtk, csv)");
        }
    }
    if (threads < 1) {
        config_error("threads", "must be >= 1");
    }
}

SimulationConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, std::string("syntax error: ") + e.what());
    }
    SimulationConfig c;
    c.base_dir = base_dir;
    Reader r(root, "");
    r.allow({"geometry", "physics", "ionic", "fpm", "time", "stimuli", "probes", "output", "deterministic",
             "threads"});
    if (!r.has("geometry")) {
        config_error("geometry", "required block missing");
    }
    parse_geometry(root.at("geometry"), c.geometry);
    if (r.has("physics")) {
        parse_physics(root.at("physics"), c.physics);
    }
    if (r.has("ionic")) {
        parse_ionic(root.at("ionic"), c.ionic);
    }
    if (r.has("fpm")) {
        parse_fpm(root.at("fpm"), c.fpm);
    }
    if (r.has("time")) {
        parse_time(root.at("time"), c.time);
    }
    if (r.has("stimuli")) {
        const json& a = array_at(root, "stimuli");
        for (std::size_t k = 0; k < a.size(); ++k) {
            c.stimuli.push_back(parse_stimulus(a[k], "stimuli[" + std::to_string(k) + "]"));
        }
    }
    if (r.has("probes")) {
        const json& a = array_at(root, "probes");
        for (std::size_t k = 0; k < a.size(); ++k) {
            c.probes.push_back(parse_probe(a[k], "probes[" + std::to_string(k) + "]"));
        }
    }
    if (r.has("output")) {
        parse_output(root.at("output"), c.output);
    }
    r.get("deterministic", c.deterministic);
    r.get("threads", c.threads);
    c.validate();
    return c;
}

SimulationConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto parent = path.parent_path();
    return parse_config_text(buffer.str(), parent.empty() ? std::filesystem::path(".") : parent);
}

std::string serialize_config(const SimulationConfig& c)
{
    using namespace stepper;
    json root;
    const auto& g = c.geometry;
    json geo{{"kind", g.kind}};
    if (g.kind == "grid") {
        geo["counts"] = g.counts;
        geo["spacing_mm"] = g.spacing_mm;
        geo["origin_mm"] = g.origin_mm;
    } else {
        geo["file"] = g.file;
        if (!g.boundary.empty()) {
            geo["boundary"] = g.boundary;
        }
    }
    root["geometry"] = geo;

    json physics{{"d0", c.physics.d0}, {"rho", c.physics.rho}, {"fiber", vec_json(c.physics.fiber, 3)}};
    if (!c.physics.fiber_file.empty()) {
        physics["fiber_file"] = c.physics.fiber_file;
    }
    root["physics"] = physics;

    json params = json::object();
    for (const auto& [k, v] : c.ionic.params) {
        params[k] = v;
    }
    root["ionic"] = {{"model", c.ionic.model}, {"params", params}};
    root["fpm"] = {{"penalty", c.fpm.penalty}, {"lumped_mass", c.fpm.lumped_mass}};

    const auto& t = c.time;
    root["time"] = {
        {"dt", t.dt},
        {"total", t.total},
        {"splitting", enum_name(t.splitting, {{"godunov", Splitting::Godunov}, {"strang", Splitting::Strang}})},
        {"scheme",
         enum_name(t.scheme, {{"theta", DiffusionScheme::Theta}, {"explicit", DiffusionScheme::Explicit}})},
        {"theta", t.theta},
        {"reaction", enum_name(t.reaction, {{"euler", ReactionScheme::Euler}, {"heun", ReactionScheme::Heun}})},
        {"solver_tol", t.solver.tolerance},
        {"max_iterations", t.solver.max_iterations},
    };

    json stimuli = json::array();
    for (const auto& s : c.stimuli) {
        json j{{"shape", s.shape}};
        if (s.shape == "sphere") {
            j["center_mm"] = vec_json(s.center_mm, 3);
            j["radius_mm"] = s.radius_mm;
        } else {
            j["lo_mm"] = vec_json(s.lo_mm, 3);
            j["hi_mm"] = vec_json(s.hi_mm, 3);
        }
        j["amplitude"] = s.amplitude;
        j["duration"] = s.duration;
        j["period"] = s.period;
        j["start"] = s.start;
        j["count"] = s.count;
        stimuli.push_back(j);
    }
    root["stimuli"] = stimuli;

    json probes = json::array();
    for (const auto& p : c.probes) {
        probes.push_back({{"name", p.name}, {"position_mm", vec_json(p.position_mm, 3)}});
    }
    root["probes"] = probes;

    const auto& o = c.output;
    root["output"] = {
        {"directory", o.directory},
        {"snapshot_interval", o.snapshot_interval},
        {"formats", o.formats},
        {"trace_interval", o.trace_interval},
        {"lat_threshold", o.lat_threshold ? json(*o.lat_threshold) : json(nullptr)},
        {"checkpoint", o.checkpoint},
    };
    root["deterministic"] = c.deterministic;
    root["threads"] = c.threads;
    return root.dump(2) + "\n";
}

} // namespace fpm::io
