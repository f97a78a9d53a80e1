#include "fpm/stepper.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

namespace fpm::stepper {

void TimeIntegrationPlan::validate() const
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        fail(ErrorKind::Config, "time step must be positive");
    }
    if (!(total >= 0.0) || !std::isfinite(total)) {
        fail(ErrorKind::Config, "total time must be >= 0");
    }
    if (!(theta > 0.0 && theta <= 1.0)) {
        fail(ErrorKind::Config, "theta must lie in (0, 1]");
    }
    if (!(solver.tolerance > 0.0 && solver.tolerance <= 1e-2)) {
        fail(ErrorKind::Config, "solver tolerance must lie in (0, 1e-2]");
    }
    if (solver.max_iterations < 1) {
        fail(ErrorKind::Config, "solver max_iterations must be >= 1");
    }
}

CellStates initial_states(const ionic::IonicModel& model, std::size_t n)
{
    CellStates s;
    s.size = model.state_size();
    s.values.resize(n * s.size);
    for (std::size_t i = 0; i < n; ++i) {
        model.initial_state(s.node(static_cast<Index>(i)));
    }
    return s;
}

namespace {

[[noreturn]] void non_finite(double t, Index node)
{
    std::ostringstream msg;
    msg << "non-finite state at t = " << t << " ms, node " << node;
    fail(ErrorKind::Numeric, msg.str());
}

void euler_node(const ionic::IonicModel& model, double& v, std::span<double> state, std::span<double> dstate,
                double stim, double dt, double t, Index node)
{
    const double current = ionic::ionic_rate(model, v, state, dstate, node);
    for (std::size_t k = 0; k < state.size(); ++k) {
        double inf = 0.0;
        double tau = 0.0;
        if (model.gate(v, state, k, inf, tau)) {
            state[k] = inf + (state[k] - inf) * std::exp(-dt / tau);
        } else {
            state[k] += dt * dstate[k];
        }
    }
    v += dt * (stim - current);
    if (!std::isfinite(v)) {
        non_finite(t + dt, node);
    }
}

void heun_node(const ionic::IonicModel& model, double& v, std::span<double> state, std::span<double> k1,
               std::span<double> k2, std::span<double> predicted, double stim0, double stim1, double dt, double t,
               Index node)
{
    const double dv1 = stim0 - ionic::ionic_rate(model, v, state, k1, node);
    for (std::size_t k = 0; k < state.size(); ++k) {
        predicted[k] = state[k] + dt * k1[k];
    }
    const double vp = v + dt * dv1;
    const double dv2 = stim1 - ionic::ionic_rate(model, vp, predicted, k2, node);
    for (std::size_t k = 0; k < state.size(); ++k) {
        state[k] += 0.5 * dt * (k1[k] + k2[k]);
    }
    v += 0.5 * dt * (dv1 + dv2);
    if (!std::isfinite(v)) {
        non_finite(t + dt, node);
    }
}

} // namespace

void reaction_step(const ionic::IonicModel& model, const ionic::StimulusSet& stimuli, Eigen::VectorXd& v,
                   CellStates& states, double dt, double t, ReactionScheme scheme, const ExecutionPolicy& policy)
{
    if (!(dt > 0.0)) {
        fail(ErrorKind::Contract, "reaction step needs dt > 0");
    }
    const auto n = static_cast<Index>(v.size());
    std::vector<double> stim0(static_cast<std::size_t>(n), 0.0);
    stimuli.add_current(t, stim0);
    std::vector<double> stim1;
    if (scheme == ReactionScheme::Heun) {
        stim1.assign(static_cast<std::size_t>(n), 0.0);
        stimuli.add_current(t + dt, stim1);
    }
    const std::size_t m = states.size;
    // Errors inside the parallel region are captured and rethrown after it.
    std::string error;
    ErrorKind error_kind = ErrorKind::Numeric;
#pragma omp parallel num_threads(policy.threads)
    {
        std::vector<double> scratch(4 * m);
        std::span<double> a(scratch.data(), m);
        std::span<double> b(scratch.data() + m, m);
        std::span<double> c(scratch.data() + 2 * m, m);
#pragma omp for schedule(static)
        for (Index i = 0; i < n; ++i) {
            try {
                if (scheme == ReactionScheme::Euler) {
                    euler_node(model, v[i], states.node(i), a, stim0[i], dt, t, i);
                } else {
                    heun_node(model, v[i], states.node(i), a, b, c, stim0[i], stim1[i], dt, t, i);
                }
            } catch (const Error& e) {
#pragma omp critical(fpm_reaction_error)
                if (error.empty()) {
                    error = e.what();
                    error_kind = e.kind();
                }
            }
        }
    }
    if (!error.empty()) {
        std::ostringstream msg;
        msg << error << " (reaction step at t = " << t << " ms)";
        throw Error(error_kind, msg.str());
    }
}

double estimate_max_rate(const assembly::SparseMatrix& K, const Eigen::VectorXd& lumped, const ExecutionPolicy& policy,
                         int iterations)
{
    const auto n = static_cast<Index>(K.rows());
    const Eigen::VectorXd scale = lumped.cwiseSqrt().cwiseInverse();
    Eigen::VectorXd x(n);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        x[i] = uni(rng);
    }
    x.normalize();
    Eigen::VectorXd y(n);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        solver::multiply(K, scale.cwiseProduct(x), y, policy);
        y = scale.cwiseProduct(y);
        lambda = x.dot(y);
        const double norm = y.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        x = y / norm;
    }
    return lambda;
}

DiffusionIntegrator::DiffusionIntegrator(const assembly::GlobalOperators& ops, double dt, DiffusionScheme scheme,
                                         double theta, solver::SolverOptions options, ExecutionPolicy policy)
    : ops_(ops), dt_(dt), scheme_(scheme), theta_(theta), options_(options), policy_(policy)
{
    if (!(dt > 0.0)) {
        fail(ErrorKind::Config, "diffusion step needs dt > 0");
    }
    if (scheme_ == DiffusionScheme::Explicit) {
        const Eigen::VectorXd lumped = assembly::lumped_diagonal(ops.C);
        if ((lumped.array() <= 0.0).any()) {
            fail(ErrorKind::Assembly, "lumped capacity has non-positive entries");
        }
        lumped_inv_ = lumped.cwiseInverse();
        const double limit = stable_dt();
        if (dt_ > limit) {
            std::ostringstream msg;
            msg << "explicit diffusion step " << dt_ << " ms exceeds the stability limit " << limit << " ms";
            fail(ErrorKind::Config, msg.str());
        }
        return;
    }
    if (!(theta_ > 0.0 && theta_ <= 1.0)) {
        fail(ErrorKind::Config, "theta must lie in (0, 1]");
    }
    system_ = ops.C + (theta_ * dt_) * ops.K;
    system_.makeCompressed();
}

double DiffusionIntegrator::stable_dt() const
{
    Eigen::VectorXd lumped = lumped_inv_.size() ? Eigen::VectorXd(lumped_inv_.cwiseInverse())
                                                : assembly::lumped_diagonal(ops_.C);
    // 5 % margin on the power-iteration estimate.
    const double lambda = 1.05 * estimate_max_rate(ops_.K, lumped, policy_);
    return lambda > 0.0 ? 2.0 / lambda : std::numeric_limits<double>::infinity();
}

solver::SolveStats DiffusionIntegrator::step(Eigen::VectorXd& v) const
{
    if (v.size() != ops_.n) {
        fail(ErrorKind::Contract, "state vector length does not match the operators");
    }
    if (scheme_ == DiffusionScheme::Explicit) {
        solver::multiply(ops_.K, v, work_, policy_);
        v -= dt_ * lumped_inv_.cwiseProduct(work_);
        last_ = {};
        return last_;
    }
    solver::multiply(ops_.C, v, rhs_, policy_);
    if (theta_ < 1.0) {
        solver::multiply(ops_.K, v, work_, policy_);
        rhs_ -= ((1.0 - theta_) * dt_) * work_;
    }
    try {
        last_ = solver::conjugate_gradient(system_, rhs_, v, options_, policy_);
    } catch (const Error& e) {
        fail(ErrorKind::Solver, std::string("diffusion step failed: ") + e.what());
    }
    return last_;
}

solver::SolveStats diffusion_step(Eigen::VectorXd& v, const assembly::GlobalOperators& ops, double dt,
                                  DiffusionScheme scheme, double theta, solver::SolverOptions options,
                                  const ExecutionPolicy& policy)
{
    DiffusionIntegrator integrator(ops, dt, scheme, theta, options, policy);
    return integrator.step(v);
}

SimulationResult run_simulation(const Problem& problem, const RunOptions& options, const ExecutionPolicy& policy,
                                const SimulationState* initial, const SnapshotCallback& on_snapshot)
{
    const TimeIntegrationPlan& plan = options.plan;
    plan.validate();
    const auto n = static_cast<Index>(problem.partition.size());
    if (problem.operators.n != n) {
        fail(ErrorKind::Contract, "operators do not match the partition");
    }

    SimulationResult result;
    SimulationState& s = result.final;
    if (initial) {
        s = *initial;
        if (s.v.size() != n || s.states.size != problem.model.state_size() ||
            s.states.values.size() != static_cast<std::size_t>(n) * s.states.size) {
            fail(ErrorKind::Contract, "initial state does not match the problem size");
        }
    } else {
        s.t = 0.0;
        s.v = Eigen::VectorXd::Constant(n, problem.model.resting_potential());
        s.states = initial_states(problem.model, static_cast<std::size_t>(n));
    }
    const double t0 = s.t;

    const double threshold = std::isnan(options.lat_threshold)
                                 ? 0.5 * (problem.model.resting_potential() + problem.model.peak_potential())
                                 : options.lat_threshold;
    post::ActivationTracker tracker(s.v, t0, threshold);

    for (const auto& probe : options.probes) {
        post::ProbeTrace trace;
        trace.name = probe.name;
        trace.node = probe.node != kNone ? probe.node : geometry::nearest_point(problem.partition.points, probe.position);
        trace.position = problem.partition.points.positions[trace.node];
        result.traces.push_back(std::move(trace));
    }
    auto record = [&](double t) {
        for (auto& trace : result.traces) {
            trace.t.push_back(t);
            trace.v.push_back(s.v[trace.node]);
        }
    };

    const double dt = plan.dt;
    const int steps = static_cast<int>(std::ceil(plan.total / dt - 1e-9));
    const int trace_stride = std::max(1, static_cast<int>(std::lround(options.trace_interval / dt)));
    const int snapshot_stride =
        options.snapshot_interval > 0.0 ? std::max(1, static_cast<int>(std::lround(options.snapshot_interval / dt)))
                                        : 0;

    DiffusionIntegrator diffusion(problem.operators, dt, plan.scheme, plan.theta, plan.solver, policy);

    record(t0);
    int snapshot_index = 0;
    if (snapshot_stride && on_snapshot) {
        on_snapshot(snapshot_index++, t0, s.v);
    }
    const int report_every = std::max(1, steps / 10);
    for (int step = 1; step <= steps; ++step) {
        const double t = t0 + (step - 1) * dt;
        if (plan.splitting == Splitting::Godunov) {
            reaction_step(problem.model, problem.stimuli, s.v, s.states, dt, t, plan.reaction, policy);
            diffusion.step(s.v);
        } else {
            reaction_step(problem.model, problem.stimuli, s.v, s.states, 0.5 * dt, t, plan.reaction, policy);
            diffusion.step(s.v);
            reaction_step(problem.model, problem.stimuli, s.v, s.states, 0.5 * dt, t + 0.5 * dt, plan.reaction,
                          policy);
        }
        result.solver_iterations += diffusion.last().iterations;
        s.t = t0 + step * dt;
        tracker.update(s.t, s.v);
        if (step % trace_stride == 0) {
            record(s.t);
        }
        if (snapshot_stride && on_snapshot && step % snapshot_stride == 0) {
            on_snapshot(snapshot_index++, s.t, s.v);
        }
        if (options.progress && step % report_every == 0) {
            std::cerr << "t = " << s.t << " ms (" << (100 * step) / steps << "%), activated " << tracker.activated()
                      << "/" << n << ", cg iterations " << diffusion.last().iterations << "\n";
        }
    }
    result.steps = steps;
    result.activation = tracker.map();
    return result;
}

} // namespace fpm::stepper
