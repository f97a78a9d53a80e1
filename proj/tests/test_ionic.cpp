#include "support.hpp"

#include "fpm/geometry.hpp"
#include "fpm/ionic.hpp"
#include "fpm/stepper.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace fpm;
using namespace fpm::ionic;

namespace {

StimulusProtocol pulse_everywhere(double amplitude, double duration, double start = 0.0)
{
    StimulusProtocol p;
    p.region.lo = Vec3::Constant(-1.0);
    p.region.hi = Vec3::Constant(1.0);
    p.amplitude = amplitude;
    p.duration = duration;
    p.start = start;
    p.count = 1;
    return p;
}

/// Single-cell trace sampled every `sample` ms over [0, total].
std::vector<double> single_cell(const IonicModel& model, double dt, double total, double sample,
                                stepper::ReactionScheme scheme = stepper::ReactionScheme::Euler)
{
    const std::vector<Vec3> pos = {Vec3::Zero()};
    const StimulusSet stim({pulse_everywhere(50.0, 2.0)}, pos);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(1, model.resting_potential());
    auto states = stepper::initial_states(model, 1);
    const int steps = static_cast<int>(std::lround(total / dt));
    const int every = static_cast<int>(std::lround(sample / dt));
    std::vector<double> out{v[0]};
    for (int s = 0; s < steps; ++s) {
        stepper::reaction_step(model, stim, v, states, dt, s * dt, scheme);
        if ((s + 1) % every == 0) {
            out.push_back(v[0]);
        }
    }
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace

TEST_CASE("Mitchell-Schaeffer rest is an equilibrium")
{
    MitchellSchaeffer ms;
    double h = 0.0;
    ms.initial_state({&h, 1});
    CHECK(h == 1.0);
    double dh = 1.0;
    const double I = ms.rate(ms.resting_potential(), {&h, 1}, {&dh, 1});
    CHECK(std::abs(I) < 1e-9 * 100.0);
    CHECK(std::abs(dh) < 1e-12);
}

TEST_CASE("Aliev-Panfilov origin is an equilibrium")
{
    AlievPanfilov ap;
    double w = 0.0;
    double dw = 1.0;
    const double I = ap.rate(ap.resting_potential(), {&w, 1}, {&dw, 1});
    CHECK(I == 0.0);
    CHECK(dw == 0.0);
}

TEST_CASE("single-cell action potential matches a hundredfold finer step")
{
    for (const char* name : {"mitchell_schaeffer", "aliev_panfilov"}) {
        CAPTURE(name);
        const auto model = make_model(name);
        const double dt = 0.01;
        const auto coarse = single_cell(*model, dt, 500.0, 0.1);
        const auto fine = single_cell(*model, dt / 100.0, 500.0, 0.1);
        const double err = max_abs_diff(coarse, fine);
        MESSAGE(std::string(name) << " max |dV| = " << err << " mV");
        CHECK(err <= 1.0);
        // The cell fired.
        CHECK(*std::max_element(fine.begin(), fine.end()) > 0.0);
    }
}

TEST_CASE("non-finite input names the node")
{
    MitchellSchaeffer ms;
    double h = 1.0;
    double dh = 0.0;
    try {
        ionic_rate(ms, std::numeric_limits<double>::quiet_NaN(), {&h, 1}, {&dh, 1}, 17);
        FAIL("expected Numeric");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
}

TEST_CASE("stimulus timing")
{
    const std::vector<Vec3> pos = {Vec3::Zero(), Vec3(0.5, 0, 0)};
    StimulusProtocol p = pulse_everywhere(2.0, 1.0, 5.0);
    p.count = 0;
    p.period = 1000.0;
    const std::vector<StimulusProtocol> ps = {p};
    for (double t : {0.0, 2.0, 4.999}) {
        for (double c : apply_stimulus(ps, t, pos)) {
            CHECK(c == 0.0);
        }
    }
    for (double c : apply_stimulus(ps, 5.5, pos)) {
        CHECK(c == 2.0);
    }
    CHECK(apply_stimulus(ps, 6.5, pos)[0] == 0.0);

    StimulusProtocol q = pulse_everywhere(1.0, 1.0);
    q.count = 0;
    q.period = 1000.0;
    CHECK(q.active(1000.5));
    CHECK_FALSE(q.active(1001.5));
    q.count = 1;
    CHECK_FALSE(q.active(1000.5));
}

TEST_CASE("box selects exactly the leftmost column")
{
    const auto part = geometry::build_voxel_partition({10, 10}, {0.1, 0.1}, {0.0, 0.0});
    Region r;
    r.lo = Vec3(-1.0, -1.0, -1.0);
    r.hi = Vec3(0.05, 1.0, 1.0);
    const auto& pos = part.points.positions;
    const auto nodes = stimulus_nodes(r, pos);
    std::set<Index> expected;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        if (std::abs(pos[i].x() - 0.05) < 1e-12) {
            expected.insert(static_cast<Index>(i));
        }
    }
    CHECK(expected.size() == 10);
    CHECK(std::set<Index>(nodes.begin(), nodes.end()) == expected);

    StimulusProtocol p;
    p.region = r;
    p.amplitude = 3.0;
    const auto current = apply_stimulus(std::vector<StimulusProtocol>{p}, 0.5, pos);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        CHECK((current[i] != 0.0) == (expected.count(static_cast<Index>(i)) == 1));
    }
}

TEST_CASE("stimulus support equals the region predicate")
{
    const auto cloud = testing::random_cloud(400, 11).positions;
    Region sphere;
    sphere.kind = Region::Kind::Sphere;
    sphere.center = Vec3(0.4, 0.6, 0.0);
    sphere.radius = 0.25;
    Region box;
    box.lo = Vec3(0.1, 0.2, -1.0);
    box.hi = Vec3(0.3, 0.9, 1.0);
    for (const auto& region : {sphere, box}) {
        std::set<Index> expected;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Vec3& x = cloud[i];
            const bool inside = region.kind == Region::Kind::Sphere
                                    ? (x - region.center).norm() <= region.radius
                                    : (x.array() >= region.lo.array()).all() && (x.array() <= region.hi.array()).all();
            if (inside) {
                expected.insert(static_cast<Index>(i));
            }
        }
        const auto nodes = stimulus_nodes(region, cloud);
        CHECK(!expected.empty());
        CHECK(std::set<Index>(nodes.begin(), nodes.end()) == expected);

        StimulusProtocol p;
        p.region = region;
        p.amplitude = 1.5;
        const StimulusSet set({p}, cloud);
        std::vector<double> added(cloud.size(), 0.0);
        set.add_current(0.5, added);
        CHECK(added == apply_stimulus(std::vector<StimulusProtocol>{p}, 0.5, cloud));
    }
}

TEST_CASE("unstimulated tissue stays at rest")
{
    for (const char* name : {"mitchell_schaeffer", "aliev_panfilov"}) {
        CAPTURE(name);
        const auto model = make_model(name);
        const std::size_t n = 50;
        Eigen::VectorXd v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), model->resting_potential());
        auto states = stepper::initial_states(*model, n);
        const StimulusSet none;
        for (int s = 0; s < 1000; ++s) {
            stepper::reaction_step(*model, none, v, states, 0.1, 0.1 * s);
        }
        CHECK((v.array() - model->resting_potential()).abs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("gate bounds hold up to the documented step")
{
    for (const char* name : {"mitchell_schaeffer", "aliev_panfilov"}) {
        CAPTURE(name);
        const auto model = make_model(name);
        for (double dt : {model->max_stable_dt(), 0.25 * model->max_stable_dt(), 0.01}) {
            CAPTURE(dt);
            const std::vector<Vec3> pos = {Vec3::Zero()};
            StimulusProtocol p = pulse_everywhere(50.0, std::max(2.0, 1.5 * dt));
            p.count = 0;
            p.period = 300.0;
            const StimulusSet stim({p}, pos);
            Eigen::VectorXd v = Eigen::VectorXd::Constant(1, model->resting_potential());
            auto states = stepper::initial_states(*model, 1);
            bool ok = true;
            const int steps = static_cast<int>(1000.0 / dt);
            for (int s = 0; s < steps && ok; ++s) {
                stepper::reaction_step(*model, stim, v, states, dt, s * dt);
                ok = model->state_in_bounds(states.node(0)) && std::isfinite(v[0]);
            }
            CHECK(ok);
        }
    }
}

TEST_CASE("model factory validates names and parameters")
{
    const auto ms = make_model("mitchell_schaeffer", {{"tau_out", 5.0}});
    CHECK(ms->parameters().at("tau_out") == 5.0);
    CHECK(ms->parameters().at("tau_in") == 0.3);
    const auto ap = make_model("aliev_panfilov", {{"a", 0.1}});
    CHECK(ap->parameters().at("a") == 0.1);
    for (const auto& [name, params] :
         std::vector<std::pair<std::string, std::map<std::string, double>>>{
             {"ten_tusscher", {}}, {"mitchell_schaeffer", {{"tau_foo", 1.0}}}, {"aliev_panfilov", {{"k", -1.0}}}}) {
        CAPTURE(name);
        try {
            make_model(name, params);
            FAIL("expected Config");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    }
}

TEST_CASE("stimulus protocol validation")
{
    StimulusProtocol p = pulse_everywhere(1.0, 2.0);
    p.period = 2.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p.period = 10.0;
    p.amplitude = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(p.validate(), Error);
}
