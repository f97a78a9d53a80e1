#include "fpm/ionic.hpp"

#include <cmath>

namespace fpm::ionic {

namespace {

// Slack on pulse edges so a step landing on t = start + duration (up to
// rounding of t = step * dt) counts as inactive.
constexpr double kEdgeTol = 1e-9;

void apply_overrides(std::map<std::string, double*> slots, const std::map<std::string, double>& overrides,
                     const std::string& model)
{
    for (const auto& [key, value] : overrides) {
        auto it = slots.find(key);
        if (it == slots.end()) {
            fail(ErrorKind::Config, "unknown parameter '" + key + "' for model " + model);
        }
        if (!std::isfinite(value)) {
            fail(ErrorKind::Config, "parameter '" + key + "' must be finite");
        }
        *it->second = value;
    }
}

} // namespace

MitchellSchaeffer::MitchellSchaeffer(Params p) : p_(p)
{
    if (!(p_.tau_in > 0 && p_.tau_out > 0 && p_.tau_open > 0 && p_.tau_close > 0 && p_.scale.amplitude > 0)) {
        fail(ErrorKind::Config, "Mitchell-Schaeffer time constants and amplitude must be positive");
    }
}

void MitchellSchaeffer::initial_state(std::span<double> state) const { state[0] = 1.0; }

double MitchellSchaeffer::rate(double v, std::span<const double> state, std::span<double> dstate) const
{
    const double u = (v - p_.scale.rest) / p_.scale.amplitude;
    const double h = state[0];
    const double j_in = h * u * u * (1.0 - u) / p_.tau_in;
    const double j_out = -u / p_.tau_out;
    dstate[0] = u < p_.v_gate ? (1.0 - h) / p_.tau_open : -h / p_.tau_close;
    return -p_.scale.amplitude * (j_in + j_out);
}

bool MitchellSchaeffer::gate(double v, std::span<const double>, std::size_t k, double& inf, double& tau) const
{
    if (k != 0) {
        return false;
    }
    const double u = (v - p_.scale.rest) / p_.scale.amplitude;
    if (u < p_.v_gate) {
        inf = 1.0;
        tau = p_.tau_open;
    } else {
        inf = 0.0;
        tau = p_.tau_close;
    }
    return true;
}

bool MitchellSchaeffer::state_in_bounds(std::span<const double> state) const
{
    return std::isfinite(state[0]) && state[0] >= 0.0 && state[0] <= 1.0;
}

std::map<std::string, double> MitchellSchaeffer::parameters() const
{
    return {{"tau_in", p_.tau_in},       {"tau_out", p_.tau_out}, {"tau_open", p_.tau_open},
            {"tau_close", p_.tau_close}, {"v_gate", p_.v_gate},   {"v_rest", p_.scale.rest},
            {"v_amplitude", p_.scale.amplitude}};
}

AlievPanfilov::AlievPanfilov(Params p) : p_(p)
{
    if (!(p_.k > 0 && p_.time_scale > 0 && p_.scale.amplitude > 0 && p_.mu2 > 0)) {
        fail(ErrorKind::Config, "Aliev-Panfilov k, mu2, time scale and amplitude must be positive");
    }
}

void AlievPanfilov::initial_state(std::span<double> state) const { state[0] = 0.0; }

double AlievPanfilov::rate(double v, std::span<const double> state, std::span<double> dstate) const
{
    const double u = (v - p_.scale.rest) / p_.scale.amplitude;
    const double w = state[0];
    const double du = p_.k * u * (1.0 - u) * (u - p_.a) - u * w;
    const double eps = p_.epsilon0 + p_.mu1 * w / (u + p_.mu2);
    dstate[0] = eps * (-w - p_.k * u * (u - p_.a - 1.0)) / p_.time_scale;
    return -p_.scale.amplitude * du / p_.time_scale;
}

bool AlievPanfilov::state_in_bounds(std::span<const double> state) const
{
    return std::isfinite(state[0]) && state[0] >= -1e-9;
}

std::map<std::string, double> AlievPanfilov::parameters() const
{
    return {{"k", p_.k},         {"a", p_.a},
            {"epsilon0", p_.epsilon0}, {"mu1", p_.mu1},
            {"mu2", p_.mu2},     {"time_scale", p_.time_scale},
            {"v_rest", p_.scale.rest}, {"v_amplitude", p_.scale.amplitude}};
}

std::unique_ptr<IonicModel> make_model(const std::string& name, const std::map<std::string, double>& overrides)
{
    if (name == "mitchell_schaeffer") {
        MitchellSchaeffer::Params p;
        apply_overrides({{"tau_in", &p.tau_in},
                         {"tau_out", &p.tau_out},
                         {"tau_open", &p.tau_open},
                         {"tau_close", &p.tau_close},
                         {"v_gate", &p.v_gate},
                         {"v_rest", &p.scale.rest},
                         {"v_amplitude", &p.scale.amplitude}},
                        overrides, name);
        return std::make_unique<MitchellSchaeffer>(p);
    }
    if (name == "aliev_panfilov") {
        AlievPanfilov::Params p;
        apply_overrides({{"k", &p.k},
                         {"a", &p.a},
                         {"epsilon0", &p.epsilon0},
                         {"mu1", &p.mu1},
                         {"mu2", &p.mu2},
                         {"time_scale", &p.time_scale},
                         {"v_rest", &p.scale.rest},
                         {"v_amplitude", &p.scale.amplitude}},
                        overrides, name);
        return std::make_unique<AlievPanfilov>(p);
    }
    fail(ErrorKind::Config, "unknown ionic model '" + name + "'");
}

double ionic_rate(const IonicModel& model, double v, std::span<const double> state, std::span<double> dstate,
                  Index node)
{
    bool finite = std::isfinite(v);
    for (double s : state) {
        finite = finite && std::isfinite(s);
    }
    if (!finite) {
        fail(ErrorKind::Numeric, "non-finite ionic input at node " + std::to_string(node));
    }
    const double current = model.rate(v, state, dstate);
    bool ok = std::isfinite(current);
    for (double d : dstate) {
        ok = ok && std::isfinite(d);
    }
    if (!ok) {
        fail(ErrorKind::Numeric, "non-finite ionic rate at node " + std::to_string(node));
    }
    return current;
}

bool Region::contains(const Vec3& x) const
{
    if (kind == Kind::Sphere) {
        return (x - center).norm() <= radius * (1.0 + 1e-12);
    }
    constexpr double tol = 1e-12;
    return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
}

void StimulusProtocol::validate() const
{
    if (!std::isfinite(amplitude)) {
        fail(ErrorKind::Config, "stimulus amplitude must be finite");
    }
    if (!(duration > 0.0) || !(period > 0.0) || !(duration < period)) {
        fail(ErrorKind::Config, "stimulus needs 0 < duration < period");
    }
    if (!(start >= 0.0)) {
        fail(ErrorKind::Config, "stimulus start must be >= 0");
    }
    if (count < 0) {
        fail(ErrorKind::Config, "stimulus count must be >= 0");
    }
    if (region.kind == Region::Kind::Sphere && !(region.radius > 0.0)) {
        fail(ErrorKind::Config, "stimulus sphere radius must be positive");
    }
}

bool StimulusProtocol::active(double t) const
{
    const double since = t - start;
    if (since < -kEdgeTol) {
        return false;
    }
    const double pulse = std::floor((since + kEdgeTol) / period);
    if (count > 0 && pulse >= count) {
        return false;
    }
    return since - pulse * period < duration - kEdgeTol;
}

std::vector<Index> stimulus_nodes(const Region& region, std::span<const Vec3> positions)
{
    std::vector<Index> nodes;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (region.contains(positions[i])) {
            nodes.push_back(static_cast<Index>(i));
        }
    }
    return nodes;
}

std::vector<double> apply_stimulus(std::span<const StimulusProtocol> protocols, double t,
                                   std::span<const Vec3> positions)
{
    std::vector<double> current(positions.size(), 0.0);
    for (const auto& p : protocols) {
        if (!p.active(t)) {
            continue;
        }
        for (Index i : stimulus_nodes(p.region, positions)) {
            current[i] += p.amplitude;
        }
    }
    return current;
}

StimulusSet::StimulusSet(std::vector<StimulusProtocol> protocols, std::span<const Vec3> positions)
    : protocols_(std::move(protocols))
{
    for (const auto& p : protocols_) {
        p.validate();
        nodes_.push_back(stimulus_nodes(p.region, positions));
    }
}

void StimulusSet::add_current(double t, std::span<double> current) const
{
    for (std::size_t k = 0; k < protocols_.size(); ++k) {
        if (!protocols_[k].active(t)) {
            continue;
        }
        for (Index i : nodes_[k]) {
            current[i] += protocols_[k].amplitude;
        }
    }
}

bool StimulusSet::any_active(double t) const
{
    for (const auto& p : protocols_) {
        if (p.active(t)) {
            return true;
        }
    }
    return false;
}

} // namespace fpm::ionic
