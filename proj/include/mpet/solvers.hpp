#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "mpet/fem.hpp"
#include "mpet/linalg.hpp"
#include "mpet/model.hpp"

namespace mpet {

/// Discrete solution triple at one time level.
struct SystemState {
    double time = 0.0;
    Eigen::VectorXd u;  ///< VectorP2 coefficients
    Eigen::VectorXd xi; ///< ScalarP1 coefficients
    Eigen::VectorXd p;  ///< MultiScalarP1 coefficients, network-blocked
};

struct SchemeConfig {
    enum class Scheme { coupled, decoupled };
    enum class Step1Solver { direct, cg };

    Scheme scheme = Scheme::coupled;
    double dt = 0.0;
    int n_steps = 0;

    /// Decoupled stopping rule: fixed iteration count, or (when
    /// xi_tolerance > 0) iterate until the L2 norm of the xi increment
    /// drops below it, capped at max_iters.
    int iters = 5;
    double xi_tolerance = 0.0;
    int max_iters = 200;

    Step1Solver step1_solver = Step1Solver::direct;
    double cg_tol = 1e-12;
    int cg_max_iter = 20000;
};

/// Number of whole backward-Euler steps fitting into [0, T].
int steps_for(double final_time, double dt);

struct StepReport {
    double time = 0.0;
    double linear_residual = 0.0;
    int iterations = 1; ///< decoupled inner iterations used (1 for coupled)
    std::vector<double> xi_increments;
    bool hit_max_iters = false;
};

struct SolveReport {
    int n_factorizations = 0;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    std::vector<StepReport> steps;
};

/// Assembled spaces, bilinear forms, Dirichlet sets, and load functionals
/// for one ProblemSpec. All matrices are time-independent.
class Discretization {
public:
    explicit Discretization(const ProblemSpec& spec, Exec exec = Exec::parallel);

    const ProblemSpec& spec() const { return *spec_; }
    const FeSpace& u_space() const { return u_space_; }
    const FeSpace& xi_space() const { return xi_space_; }
    const FeSpace& p_space() const { return p_space_; }

    const SparseMatrix& elasticity() const { return elasticity_; }
    const SparseMatrix& divergence() const { return divergence_; }   ///< rows xi
    const SparseMatrix& scalar_mass() const { return scalar_mass_; } ///< (1/lambda)(xi, eta)
    const SparseMatrix& network_mass() const { return network_mass_; }
    const SparseMatrix& network_stiffness() const { return network_stiffness_; }
    const SparseMatrix& exchange() const { return exchange_; }
    const SparseMatrix& coupling() const { return coupling_; }       ///< rows xi, cols p
    const SparseMatrix& coupling_t() const { return coupling_t_; }   ///< rows p, cols xi

    /// Unweighted P1 mass and stiffness, for norms and the energy ledger.
    const SparseMatrix& p1_mass() const { return p1_mass_; }
    const SparseMatrix& p1_stiffness() const { return p1_stiffness_; }

    const DirichletSet& u_dirichlet() const { return u_bc_; }
    const DirichletSet& p_dirichlet() const { return p_bc_; }

    /// Displacement load (f, v) + <h, v> at time t.
    Eigen::VectorXd displacement_load(double t) const;
    /// Network load (g, q) + <l, q> at time t.
    Eigen::VectorXd pressure_load(double t) const;

    /// Nodal-interpolated initial state; xi0 = alpha^T p0 (the presets all
    /// have div u0 = 0).
    SystemState initial_state() const;

    double l2_norm_p1(const Eigen::VectorXd& v) const;
    /// L2 norm of alpha^T w for a multi-network nodal vector w.
    double l2_norm_alpha_combination(const Eigen::VectorXd& w) const;
    /// L2 norm over all networks, sqrt(sum_i |w_i|^2).
    double l2_norm_networks(const Eigen::VectorXd& w) const;

private:
    const ProblemSpec* spec_;
    Exec exec_;
    FeSpace u_space_;
    FeSpace xi_space_;
    FeSpace p_space_;
    SparseMatrix elasticity_, divergence_, scalar_mass_;
    SparseMatrix network_mass_, network_stiffness_, exchange_;
    SparseMatrix coupling_, coupling_t_;
    SparseMatrix p1_mass_, p1_stiffness_;
    DirichletSet u_bc_, p_bc_;
    std::vector<std::pair<std::vector<BoundaryEdge>, TractionFn>> tractions_;
    std::vector<std::vector<std::pair<std::vector<BoundaryEdge>, ScalarTimeFn>>> fluxes_;
};

/// Monolithic backward-Euler operator; the matrix is factorized exactly
/// once and reused for every step.
class CoupledOperator {
public:
    CoupledOperator(const Discretization& disc, double dt);

    SystemState step(const SystemState& prev, StepReport* report = nullptr) const;

    const BlockSystem& system() const { return system_; }
    const Factorization& factorization() const { return lu_; }
    int factorizations() const { return 1; }

private:
    const Discretization* disc_;
    double dt_;
    BlockSystem system_;
    DirichletSet bc_;
    std::optional<DirichletEliminator> eliminator_;
    Factorization lu_;

    static Factorization make_factorization(const Discretization& disc, double dt,
                                            BlockSystem& system, DirichletSet& bc,
                                            std::optional<DirichletEliminator>& elim);
};

struct DecoupledTrace {
    std::vector<double> xi_increments; ///< per iteration
    int iterations = 0;
    bool hit_max_iters = false;
};

/// Alternating Step 1 (network pressures) / Step 2 (generalized Stokes)
/// operator. Both subsystem matrices are factorized once.
class DecoupledOperator {
public:
    DecoupledOperator(const Discretization& disc, double dt,
                      SchemeConfig::Step1Solver step1_solver =
                          SchemeConfig::Step1Solver::direct,
                      double cg_tol = 1e-12, int cg_max_iter = 20000);

    /// Reaction-diffusion solve for the network pressures given the latest
    /// total-pressure iterate.
    Eigen::VectorXd step1(const SystemState& prev, const Eigen::VectorXd& xi_guess,
                          double t_next) const;
    /// Generalized Stokes solve for (u, xi) given the new pressures.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> step2(const Eigen::VectorXd& p_new,
                                                      double t_next) const;

    /// Full time step with the configured stopping rule.
    SystemState time_step(const SystemState& prev, const SchemeConfig& config,
                          DecoupledTrace* trace = nullptr) const;

    int factorizations() const { return factorizations_; }
    const SparseMatrix& step1_matrix() const { return step1_eliminated_; }

private:
    const Discretization* disc_;
    double dt_;
    SchemeConfig::Step1Solver step1_solver_;
    double cg_tol_;
    int cg_max_iter_;
    int factorizations_ = 0;

    SparseMatrix step1_eliminated_;
    std::optional<DirichletEliminator> p_eliminator_;
    std::optional<Factorization> step1_lu_;

    BlockSystem stokes_;
    std::optional<DirichletEliminator> stokes_eliminator_;
    std::optional<Factorization> stokes_lu_;
    DirichletSet stokes_bc_;
};

enum class Retention { final_only, probes_only, full };

struct ProbeSample {
    double time = 0.0;
    Eigen::Vector2d u;
    Eigen::VectorXd p;
};

struct RunResult {
    SystemState final_state;
    std::vector<SystemState> trajectory;            ///< full retention only
    std::vector<std::vector<ProbeSample>> probes;   ///< [probe][time level]
    SolveReport report;
};

RunResult run(const Discretization& disc, const SchemeConfig& config,
              const std::vector<Vec2>& probes = {},
              Retention retention = Retention::final_only);

} // namespace mpet
