#include "problems.hpp"
#include "support.hpp"

#include "fpm/stepper.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

using namespace fpm;
using namespace fpm::stepper;

namespace {

/// I_ion fixed at a constant, no state.
class ConstantCurrent final : public ionic::IonicModel {
public:
    explicit ConstantCurrent(double c) : c_(c) {}
    std::string name() const override { return "constant"; }
    std::size_t state_size() const override { return 0; }
    void initial_state(std::span<double>) const override {}
    double resting_potential() const override { return 0.0; }
    double peak_potential() const override { return 1.0; }
    double rate(double, std::span<const double>, std::span<double>) const override { return c_; }
    double max_stable_dt() const override { return 1.0; }
    bool state_in_bounds(std::span<const double>) const override { return true; }
    std::map<std::string, double> parameters() const override { return {{"c", c_}}; }

private:
    double c_;
};

double content(const assembly::GlobalOperators& ops, const Eigen::VectorXd& v)
{
    return Eigen::VectorXd::Ones(ops.n).dot(ops.C * v);
}

/// Measure-weighted relative L2 error against the heat kernel after
/// `total` ms of pure diffusion, Crank-Nicolson steps of `dt`.
double heat_kernel_error(double h, double dt, double total = 50.0)
{
    const double d0 = 0.0013;
    const double t0 = 50.0;
    const int n = static_cast<int>(std::lround(4.0 / h));
    const auto d = testing::discretize(testing::centered_grid(2, n, h), Vec3::UnitX(), d0, 1.0);
    const auto& pos = d.partition.points.positions;
    Eigen::VectorXd v(d.ops.n);
    for (Index i = 0; i < d.ops.n; ++i) {
        v[i] = testing::heat_kernel_2d(pos[i].squaredNorm(), d0, t0, 0.0);
    }
    DiffusionIntegrator integrator(d.ops, dt, DiffusionScheme::Theta, 0.5, {1e-12, 5000});
    const int steps = static_cast<int>(std::lround(total / dt));
    for (int s = 0; s < steps; ++s) {
        integrator.step(v);
    }
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < d.ops.n; ++i) {
        const double exact = testing::heat_kernel_2d(pos[i].squaredNorm(), d0, t0, total);
        const double m = d.partition.cells[i].measure;
        num += m * (v[i] - exact) * (v[i] - exact);
        den += m * exact * exact;
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("reaction step with zero and constant current")
{
    const std::vector<Vec3> pos(5, Vec3::Zero());
    const ionic::StimulusSet none;
    Eigen::VectorXd v(5);
    v << -80, -20, 0, 10, 35;
    const Eigen::VectorXd v0 = v;
    CellStates states;
    reaction_step(ConstantCurrent(0.0), none, v, states, 0.1, 0.0);
    CHECK(v == v0);
    for (auto scheme : {ReactionScheme::Euler, ReactionScheme::Heun}) {
        v = v0;
        reaction_step(ConstantCurrent(2.5), none, v, states, 0.2, 0.0, scheme);
        CHECK((v - (v0.array() - 2.5 * 0.2).matrix()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("non-finite reaction state reports time and node")
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    CellStates states;
    const ConstantCurrent inf(std::numeric_limits<double>::infinity());
    try {
        reaction_step(inf, {}, v, states, 0.1, 4.0);
        FAIL("expected Numeric");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        const std::string what = e.what();
        CHECK(what.find("node 0") != std::string::npos);
        CHECK(what.find("t = 4") != std::string::npos);
    }
}

TEST_CASE("plan validation")
{
    TimeIntegrationPlan plan;
    CHECK_NOTHROW(plan.validate());
    plan.dt = 0.0;
    CHECK_THROWS_AS(plan.validate(), Error);
    plan = {};
    plan.solver.tolerance = 0.1;
    CHECK_THROWS_AS(plan.validate(), Error);
    plan = {};
    plan.theta = 0.0;
    CHECK_THROWS_AS(plan.validate(), Error);
}

TEST_CASE("constant field is a fixed point of diffusion")
{
    const auto d = testing::discretize(geometry::build_voronoi_partition_2d(testing::jittered_cloud(12, 8),
                                                                             testing::unit_square()),
                                       Vec3(1, 1, 0).normalized(), 0.0013, 0.3);
    for (auto scheme : {DiffusionScheme::Theta, DiffusionScheme::Explicit}) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(d.ops.n, -80.0);
        const double dt = scheme == DiffusionScheme::Explicit ? 1e-3 : 0.1;
        diffusion_step(v, d.ops, dt, scheme, 1.0, {1e-12, 1000});
        CHECK((v.array() + 80.0).abs().maxCoeff() <= 1e-12 * 80.0);
    }
}

TEST_CASE("diffusion conserves total content")
{
    const auto d = testing::discretize(geometry::build_voronoi_partition_2d(testing::jittered_cloud(15, 3),
                                                                             testing::unit_square()),
                                       Vec3::UnitX(), 0.0013, 0.15);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd v(d.ops.n);
    for (Index i = 0; i < d.ops.n; ++i) {
        v[i] = u(rng);
    }
    const double q0 = content(d.ops, v);
    DiffusionIntegrator integrator(d.ops, 0.5, DiffusionScheme::Theta, 1.0, {1e-12, 1000});
    double worst_step = 0.0;
    for (int s = 0; s < 100; ++s) {
        const double before = content(d.ops, v);
        integrator.step(v);
        worst_step = std::max(worst_step, std::abs(content(d.ops, v) - before) / std::abs(before));
    }
    CHECK(worst_step <= 1e-10);
    CHECK(std::abs(content(d.ops, v) - q0) <= 1e-8 * std::abs(q0));
}

TEST_CASE("Gaussian pulse follows the heat kernel")
{
    const double err = heat_kernel_error(0.05, 0.5);
    MESSAGE("relative L2 error at h = 0.5 mm: " << err);
    CHECK(err < 0.02);
}

TEST_CASE("pure diffusion keeps values in [0, 1] on voxel grids")
{
    for (int dim : {2, 3}) {
        CAPTURE(dim);
        const int n = dim == 2 ? 20 : 8;
        const auto d = testing::discretize(testing::centered_grid(dim, n, 0.05), Vec3(1, 1, dim == 3).normalized(), 0.0013,
                                           0.3);
        const auto& pos = d.partition.points.positions;
        Eigen::VectorXd v(d.ops.n);
        for (Index i = 0; i < d.ops.n; ++i) {
            v[i] = 0.5 * (1.0 + std::tanh(-(pos[i].x() + 0.5 * pos[i].y()) / 0.1));
        }
        DiffusionIntegrator integrator(d.ops, 0.1, DiffusionScheme::Theta, 1.0, {1e-12, 2000});
        double lo = v.minCoeff();
        double hi = v.maxCoeff();
        for (int s = 0; s < 200; ++s) {
            integrator.step(v);
            lo = std::min(lo, v.minCoeff());
            hi = std::max(hi, v.maxCoeff());
        }
        MESSAGE("dim " << dim << " range [" << lo << ", " << hi << "]");
        CHECK(lo >= -1e-6);
        CHECK(hi <= 1.0 + 1e-6);
    }
}

TEST_CASE("symmetric data on a symmetric grid stays symmetric")
{
    const int n = 16;
    const auto d = testing::discretize(testing::centered_grid(2, n, 0.05), Vec3::UnitX(), 0.0013, 0.4);
    const auto& pos = d.partition.points.positions;
    const auto mirror = [&](Index i) { return geometry::nearest_point(d.partition.points, Vec3(-pos[i].x(), pos[i].y(), 0)); };
    Eigen::VectorXd v(d.ops.n);
    for (Index i = 0; i < d.ops.n; ++i) {
        v[i] = std::exp(-10.0 * pos[i].x() * pos[i].x()) * (1.0 + pos[i].y());
    }
    const ExecutionPolicy policy{1, true};
    DiffusionIntegrator integrator(d.ops, 0.1, DiffusionScheme::Theta, 1.0, {1e-12, 1000}, policy);
    for (int s = 0; s < 50; ++s) {
        integrator.step(v);
    }
    double worst = 0.0;
    for (Index i = 0; i < d.ops.n; ++i) {
        worst = std::max(worst, std::abs(v[i] - v[mirror(i)]));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("explicit diffusion respects the stability estimate")
{
    const auto d = testing::discretize(testing::centered_grid(2, 10, 0.05), Vec3::UnitX(), 0.0013, 1.0);
    DiffusionIntegrator probe(d.ops, 1e-6, DiffusionScheme::Explicit, 1.0, {});
    const double limit = probe.stable_dt();
    CHECK(std::isfinite(limit));
    try {
        DiffusionIntegrator(d.ops, 1.5 * limit, DiffusionScheme::Explicit, 1.0, {});
        FAIL("expected Config");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    // The generalized spectrum of (K, lumped C) by a dense solve.
    const Eigen::MatrixXd K(d.ops.K);
    const Eigen::VectorXd m = assembly::lumped_diagonal(d.ops.C);
    const Eigen::VectorXd s = m.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd S = s.asDiagonal() * K * s.asDiagonal();
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (S + S.transpose())).eigenvalues().maxCoeff();
    CHECK(limit <= 2.0 / lmax);
    CHECK(limit >= 0.9 * 2.0 / lmax);

    Eigen::VectorXd v = Eigen::VectorXd::Zero(d.ops.n);
    v[0] = 1.0;
    DiffusionIntegrator stable(d.ops, 0.95 * limit, DiffusionScheme::Explicit, 1.0, {});
    for (int k = 0; k < 500; ++k) {
        stable.step(v);
    }
    CHECK(v.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("solver non-convergence is reported with its residual")
{
    const auto d = testing::discretize(testing::centered_grid(2, 12, 0.05), Vec3::UnitX(), 0.0013, 1.0);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(d.ops.n, 0.0, 1.0);
    try {
        diffusion_step(v, d.ops, 10.0, DiffusionScheme::Theta, 1.0, {1e-12, 1});
        FAIL("expected Solver");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Solver);
        CHECK(std::string(e.what()).find("residual") != std::string::npos);
    }
}

TEST_CASE("zero-duration run emits only the initial state")
{
    const auto d = testing::discretize(testing::centered_grid(2, 6, 0.1), Vec3::UnitX(), 0.0013, 1.0);
    const auto model = ionic::make_model("mitchell_schaeffer");
    const ionic::StimulusSet none;
    RunOptions opt;
    opt.plan.total = 0.0;
    opt.probes = {{"a", Vec3::Zero()}};
    opt.snapshot_interval = 1.0;
    int snapshots = 0;
    const auto r = run_simulation({d.partition, d.ops, *model, none}, opt, {}, nullptr,
                                  [&](int, double t, const Eigen::VectorXd&) {
                                      CHECK(t == 0.0);
                                      ++snapshots;
                                  });
    CHECK(r.steps == 0);
    CHECK(snapshots == 1);
    REQUIRE(r.traces.size() == 1);
    CHECK(r.traces[0].t == std::vector<double>{0.0});
    CHECK(r.traces[0].v == std::vector<double>{-80.0});
}

namespace {

struct WaveRun {
    testing::Discretization disc;
    SimulationResult result;
};

WaveRun planar_wave(double size, double h, const ExecutionPolicy& policy)
{
    WaveRun w;
    const int n = static_cast<int>(std::lround(size / h));
    w.disc = testing::discretize(geometry::build_voxel_partition({n, n}, {h, h}, {0.0, 0.0}), Vec3::UnitX(), 0.0013,
                                 0.15, 1.0, false, policy);
    const auto model = ionic::make_model("mitchell_schaeffer");
    ionic::StimulusProtocol p;
    p.region.lo = Vec3(-1.0, -1.0, -1.0);
    p.region.hi = Vec3(0.1 * size, size + 1.0, 1.0);
    p.amplitude = 50.0;
    p.duration = 2.0;
    p.count = 1;
    const ionic::StimulusSet stim({p}, w.disc.partition.points.positions);
    RunOptions opt;
    opt.plan.dt = 0.1;
    opt.plan.total = size / 0.02;
    opt.probes = {{"left", Vec3(0.25 * size, 0.5 * size, 0)}, {"right", Vec3(0.75 * size, 0.5 * size, 0)}};
    w.result = run_simulation({w.disc.partition, w.disc.ops, *model, stim}, opt, policy);
    return w;
}

} // namespace

TEST_CASE("planar wave gives a monotone activation field along x")
{
    const auto w = planar_wave(2.0, 0.05, {});
    const auto& pos = w.disc.partition.points.positions;
    const auto& lat = w.result.activation.lat;
    std::map<double, std::vector<double>> columns;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        REQUIRE(std::isfinite(lat[i]));
        columns[pos[i].x()].push_back(lat[i]);
    }
    double previous = -1.0;
    int increasing = 0;
    for (const auto& [x, lats] : columns) {
        const double mean = std::accumulate(lats.begin(), lats.end(), 0.0) / lats.size();
        const auto [lo, hi] = std::minmax_element(lats.begin(), lats.end());
        CHECK(*hi - *lo <= 1e-6 * std::max(1.0, mean));
        CHECK(mean >= previous);
        increasing += mean > previous;
        previous = mean;
    }
    CHECK(increasing > 30);
}

TEST_CASE("deterministic runs are bit-identical")
{
    const ExecutionPolicy policy{2, true};
    const auto a = planar_wave(1.0, 0.05, policy);
    const auto b = planar_wave(1.0, 0.05, policy);
    REQUIRE(a.result.traces.size() == b.result.traces.size());
    for (std::size_t k = 0; k < a.result.traces.size(); ++k) {
        CHECK(a.result.traces[k].v == b.result.traces[k].v);
    }
    CHECK(a.result.final.v == b.result.final.v);
}

namespace {

/// Aliev-Panfilov excitation from a smooth bump, no stimulus. Returns V at
/// the end of `total` ms.
Eigen::VectorXd smooth_coupled(const testing::Discretization& d, Splitting splitting, ReactionScheme reaction,
                               double theta, double dt, double total)
{
    const auto model = ionic::make_model("aliev_panfilov");
    const ionic::StimulusSet none;
    const auto& pos = d.partition.points.positions;
    SimulationState init;
    init.v.resize(d.ops.n);
    for (Index i = 0; i < d.ops.n; ++i) {
        init.v[i] = -80.0 + 60.0 * std::exp(-pos[i].squaredNorm() / 0.04);
    }
    init.states = initial_states(*model, static_cast<std::size_t>(d.ops.n));
    RunOptions opt;
    opt.plan.dt = dt;
    opt.plan.total = total;
    opt.plan.splitting = splitting;
    opt.plan.reaction = reaction;
    opt.plan.theta = theta;
    opt.plan.solver = {1e-13, 5000};
    return run_simulation({d.partition, d.ops, *model, none}, opt, {1, true}, &init).final.v;
}

} // namespace

TEST_CASE("Strang splitting is second order, Godunov first")
{
    const auto d = testing::discretize(testing::centered_grid(2, 16, 0.05), Vec3::UnitX(), 0.0013, 1.0);
    const double total = 8.0;
    const std::vector<double> dts = {0.4, 0.2, 0.1};
    const auto order = [&](Splitting sp, ReactionScheme rs, double theta) {
        const auto ref = smooth_coupled(d, sp, rs, theta, dts.back() / 100.0, total);
        std::vector<double> err;
        for (double dt : dts) {
            err.push_back((smooth_coupled(d, sp, rs, theta, dt, total) - ref).cwiseAbs().maxCoeff());
        }
        return std::make_pair(std::log2(err[1] / err[2]), err);
    };
    const auto [strang, es] = order(Splitting::Strang, ReactionScheme::Heun, 0.5);
    const auto [godunov, eg] = order(Splitting::Godunov, ReactionScheme::Euler, 1.0);
    MESSAGE("Strang errors " << es[0] << " " << es[1] << " " << es[2] << ", order " << strang);
    MESSAGE("Godunov errors " << eg[0] << " " << eg[1] << " " << eg[2] << ", order " << godunov);
    CHECK(strang >= 1.7);
    CHECK(godunov >= 0.8);
    CHECK(godunov <= 1.2);
    CHECK(es[2] < eg[2]);
}
