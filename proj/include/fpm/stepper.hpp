#pragma once

#include "fpm/assembly.hpp"
#include "fpm/ionic.hpp"
#include "fpm/post.hpp"
#include "fpm/solver.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace fpm::stepper {

enum class Splitting { Godunov, Strang };
enum class DiffusionScheme { Explicit, Theta };
/// Euler: forward Euler for V, exponential update for gates that expose a
/// relaxation form. Heun: second-order predictor-corrector on everything.
enum class ReactionScheme { Euler, Heun };

struct TimeIntegrationPlan {
    double dt = 0.1;    // ms
    double total = 0.0; // ms
    Splitting splitting = Splitting::Godunov;
    DiffusionScheme scheme = DiffusionScheme::Theta;
    double theta = 1.0;
    ReactionScheme reaction = ReactionScheme::Euler;
    solver::SolverOptions solver;

    void validate() const;
};

/// Per-node model state, node-major (state[i * size + k]).
struct CellStates {
    std::size_t size = 0;
    std::vector<double> values;

    std::span<double> node(Index i) { return {values.data() + i * size, size}; }
    std::span<const double> node(Index i) const { return {values.data() + i * size, size}; }
};

CellStates initial_states(const ionic::IonicModel& model, std::size_t n);

/// Advances V and the model state over [t, t + dt] with the stimulus
/// evaluated by the chosen scheme. Throws Numeric with time and node on
/// non-finite results.
void reaction_step(const ionic::IonicModel& model, const ionic::StimulusSet& stimuli, Eigen::VectorXd& v,
                   CellStates& states, double dt, double t, ReactionScheme scheme = ReactionScheme::Euler,
                   const ExecutionPolicy& policy = {});

/// Largest generalized eigenvalue of (K, diag(C_lumped)), power iteration.
double estimate_max_rate(const assembly::SparseMatrix& K, const Eigen::VectorXd& lumped, const ExecutionPolicy& policy,
                         int iterations = 300);

/// Diffusion substep C dV/dt + K V = 0 over a fixed dt.
class DiffusionIntegrator {
public:
    DiffusionIntegrator(const assembly::GlobalOperators& ops, double dt, DiffusionScheme scheme, double theta,
                        solver::SolverOptions options, ExecutionPolicy policy = {});

    solver::SolveStats step(Eigen::VectorXd& v) const;

    /// Explicit stability limit 2 / lambda_max (lumped capacity).
    double stable_dt() const;
    const solver::SolveStats& last() const { return last_; }

private:
    const assembly::GlobalOperators& ops_;
    double dt_;
    DiffusionScheme scheme_;
    double theta_;
    solver::SolverOptions options_;
    ExecutionPolicy policy_;
    assembly::SparseMatrix system_; // C + theta dt K
    Eigen::VectorXd lumped_inv_;
    mutable Eigen::VectorXd work_;
    mutable Eigen::VectorXd rhs_;
    mutable solver::SolveStats last_;
};

/// One-shot convenience over DiffusionIntegrator.
solver::SolveStats diffusion_step(Eigen::VectorXd& v, const assembly::GlobalOperators& ops, double dt,
                                  DiffusionScheme scheme, double theta = 1.0, solver::SolverOptions options = {},
                                  const ExecutionPolicy& policy = {});

struct Probe {
    std::string name;
    Vec3 position = Vec3::Zero();
    Index node = kNone;
};

struct RunOptions {
    TimeIntegrationPlan plan;
    double trace_interval = 0.0;    // ms; 0 = every step
    double snapshot_interval = 0.0; // ms; 0 = no snapshots
    double lat_threshold = post::kNaN;
    std::vector<Probe> probes;
    bool progress = false;
};

struct SimulationState {
    double t = 0.0;
    Eigen::VectorXd v;
    CellStates states;
};

struct SimulationResult {
    SimulationState final;
    std::vector<post::ProbeTrace> traces;
    post::ActivationMap activation;
    int steps = 0;
    int solver_iterations = 0;
};

struct Problem {
    const geometry::CellPartition& partition;
    const assembly::GlobalOperators& operators;
    const ionic::IonicModel& model;
    const ionic::StimulusSet& stimuli;
};

using SnapshotCallback = std::function<void(int index, double t, const Eigen::VectorXd& v)>;

/// Splitting driver. Starts from the model rest state unless `initial` is
/// given; records probes, LATs and snapshots along the way.
SimulationResult run_simulation(const Problem& problem, const RunOptions& options, const ExecutionPolicy& policy = {},
                                const SimulationState* initial = nullptr, const SnapshotCallback& on_snapshot = {});

} // namespace fpm::stepper
