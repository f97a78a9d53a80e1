#pragma once

#include "fpm/common.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fpm::ionic {

/// Capacitance-normalized cell model. Voltages are in mV, currents in
/// mV/ms, so dV/dt = -I_ion. Implementations are stateless: the per-node
/// state lives in the caller's arrays.
class IonicModel {
public:
    virtual ~IonicModel() = default;

    virtual std::string name() const = 0;
    virtual std::size_t state_size() const = 0;
    virtual void initial_state(std::span<double> state) const = 0;
    virtual double resting_potential() const = 0;
    virtual double peak_potential() const = 0;

    /// Returns I_ion and writes dstate/dt.
    virtual double rate(double v, std::span<const double> state, std::span<double> dstate) const = 0;

    /// Gate k in relaxation form ds/dt = (inf - s) / tau, if the model has
    /// one; enables the exponential update.
    virtual bool gate(double /*v*/, std::span<const double> /*state*/, std::size_t /*k*/, double& /*inf*/,
                      double& /*tau*/) const
    {
        return false;
    }

    /// Largest reaction step for which the state integrator keeps the
    /// model's bounds, ms.
    virtual double max_stable_dt() const = 0;

    /// Model-specific bounds (gates in [0, 1]).
    virtual bool state_in_bounds(std::span<const double> state) const = 0;

    /// Parameters by name, for serialization.
    virtual std::map<std::string, double> parameters() const = 0;
};

/// Maps the dimensionless models onto mV: V = rest + amplitude * u.
struct VoltageScale {
    double rest = -80.0;
    double amplitude = 100.0;
};

/// Two-variable model with a single inactivation gate h.
class MitchellSchaeffer final : public IonicModel {
public:
    struct Params {
        double tau_in = 0.3;     // ms
        double tau_out = 6.0;    // ms
        double tau_open = 120.0; // ms
        double tau_close = 150.0;
        double v_gate = 0.13;
        VoltageScale scale;
    };

    MitchellSchaeffer() = default;
    explicit MitchellSchaeffer(Params p);

    std::string name() const override { return "mitchell_schaeffer"; }
    std::size_t state_size() const override { return 1; }
    void initial_state(std::span<double> state) const override;
    double resting_potential() const override { return p_.scale.rest; }
    double peak_potential() const override { return p_.scale.rest + p_.scale.amplitude; }
    double rate(double v, std::span<const double> state, std::span<double> dstate) const override;
    bool gate(double v, std::span<const double> state, std::size_t k, double& inf, double& tau) const override;
    double max_stable_dt() const override { return p_.tau_in; }
    bool state_in_bounds(std::span<const double> state) const override;
    std::map<std::string, double> parameters() const override;

    const Params& params() const { return p_; }

private:
    Params p_;
};

/// Cubic excitation with a slow recovery variable, dimensionless time
/// scaled to ms.
class AlievPanfilov final : public IonicModel {
public:
    struct Params {
        double k = 8.0;
        double a = 0.15;
        double epsilon0 = 0.002;
        double mu1 = 0.2;
        double mu2 = 0.3;
        double time_scale = 12.9; // ms per dimensionless time unit
        VoltageScale scale;
    };

    AlievPanfilov() = default;
    explicit AlievPanfilov(Params p);

    std::string name() const override { return "aliev_panfilov"; }
    std::size_t state_size() const override { return 1; }
    void initial_state(std::span<double> state) const override;
    double resting_potential() const override { return p_.scale.rest; }
    double peak_potential() const override { return p_.scale.rest + p_.scale.amplitude; }
    double rate(double v, std::span<const double> state, std::span<double> dstate) const override;
    double max_stable_dt() const override { return 0.05 * p_.time_scale; }
    bool state_in_bounds(std::span<const double> state) const override;
    std::map<std::string, double> parameters() const override;

    const Params& params() const { return p_; }

private:
    Params p_;
};

/// Builds a model by name ("mitchell_schaeffer" or "aliev_panfilov"),
/// overriding defaults with `overrides`. Unknown names or keys are Config
/// errors.
std::unique_ptr<IonicModel> make_model(const std::string& name, const std::map<std::string, double>& overrides = {});

/// Checked evaluation: NaN/inf inputs or outputs raise a Numeric error
/// naming the node.
double ionic_rate(const IonicModel& model, double v, std::span<const double> state, std::span<double> dstate,
                  Index node);

struct Region {
    enum class Kind { Box, Sphere };
    Kind kind = Kind::Box;
    Vec3 lo = Vec3::Zero(); // box corners, cm
    Vec3 hi = Vec3::Zero();
    Vec3 center = Vec3::Zero(); // sphere, cm
    double radius = 0.0;

    bool contains(const Vec3& x) const;
};

struct StimulusProtocol {
    Region region;
    double amplitude = 0.0; // mV/ms
    double duration = 1.0;  // ms
    double period = 1000.0; // ms
    double start = 0.0;     // ms
    /// Number of pulses; zero means unlimited.
    int count = 0;

    void validate() const;
    bool active(double t) const;
};

/// Nodes inside the stimulus region.
std::vector<Index> stimulus_nodes(const Region& region, std::span<const Vec3> positions);

/// Per-node added current (mV/ms) summed over all protocols at time t.
std::vector<double> apply_stimulus(std::span<const StimulusProtocol> protocols, double t,
                                   std::span<const Vec3> positions);

/// Precomputed node sets for repeated evaluation.
class StimulusSet {
public:
    StimulusSet() = default;
    StimulusSet(std::vector<StimulusProtocol> protocols, std::span<const Vec3> positions);

    /// Adds the active stimulus current at time t into `current`.
    void add_current(double t, std::span<double> current) const;
    bool any_active(double t) const;
    const std::vector<StimulusProtocol>& protocols() const { return protocols_; }

private:
    std::vector<StimulusProtocol> protocols_;
    std::vector<std::vector<Index>> nodes_;
};

} // namespace fpm::ionic
