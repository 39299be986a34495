#include "mpet/solvers.hpp"

#include <chrono>
#include <cmath>

namespace mpet {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

} // namespace

int steps_for(double final_time, double dt) {
    if (!(dt > 0.0) || !(final_time > 0.0)) {
        throw ArgumentError("steps_for: require dt > 0 and T > 0");
    }
    return std::max(1, static_cast<int>(final_time / dt + 1e-9));
}

Discretization::Discretization(const ProblemSpec& spec, Exec exec)
    : spec_(&spec),
      exec_(exec),
      u_space_(FeSpace::vector_p2(spec.mesh)),
      xi_space_(FeSpace::scalar_p1(spec.mesh)),
      p_space_(FeSpace::multi_scalar_p1(spec.mesh, spec.params.n_networks)) {
    const MpetParameters& prm = spec.params;
    if (!(prm.lambda > 0.0)) {
        throw ParameterError(
            "Discretization: the total-pressure formulation requires lambda > 0");
    }
    spec.bc.validate(spec.mesh, prm.n_networks);

    const CoefficientSpec coeff = CoefficientSpec::from(prm);
    elasticity_ = assemble_elasticity(u_space_, prm.mu, exec);
    divergence_ = assemble_divergence(u_space_, xi_space_, exec);
    scalar_mass_ = assemble_scalar_mass(xi_space_, 1.0 / prm.lambda, exec);
    network_mass_ = assemble_bilinear(FormKind::network_mass, p_space_, p_space_,
                                      coeff, exec);
    network_stiffness_ = assemble_network_stiffness(p_space_, prm.K, exec);
    exchange_ = assemble_bilinear(FormKind::exchange, p_space_, p_space_, coeff, exec);
    coupling_ = assemble_coupling_alpha_mass(p_space_, xi_space_, prm.alpha,
                                             prm.lambda, exec);
    coupling_t_ = coupling_.transposed();
    p1_mass_ = assemble_scalar_mass(xi_space_, 1.0, exec);
    p1_stiffness_ = assemble_network_stiffness(
        FeSpace::multi_scalar_p1(spec.mesh, 1), Eigen::VectorXd::Ones(1), exec);

    u_bc_ = DirichletSet::for_displacement(u_space_, spec.bc);
    p_bc_ = DirichletSet::for_networks(p_space_, spec.bc);
    if (u_bc_.empty()) {
        throw ConfigError(
            "Discretization: the displacement field has no Dirichlet boundary "
            "(|Gamma_{u,D}| > 0 is required)");
    }

    // Group Neumann data by tag so every edge integral sees its own value
    // function.
    for (const auto& [tag, cond] : spec.bc.displacement) {
        if (cond.kind == ConditionKind::neumann && cond.traction) {
            tractions_.emplace_back(boundary_edges_with_tag(spec.mesh, tag),
                                    cond.traction);
        }
    }
    fluxes_.resize(static_cast<std::size_t>(prm.n_networks));
    for (const auto& [tag, conds] : spec.bc.pressure) {
        for (int i = 0; i < prm.n_networks; ++i) {
            const PressureCondition& cond = conds[static_cast<std::size_t>(i)];
            if (cond.kind == ConditionKind::neumann && cond.value) {
                fluxes_[static_cast<std::size_t>(i)].emplace_back(
                    boundary_edges_with_tag(spec.mesh, tag), cond.value);
            }
        }
    }
}

Eigen::VectorXd Discretization::displacement_load(double t) const {
    Eigen::VectorXd load = spec_->body_force
                               ? assemble_body_force(u_space_, spec_->body_force, t, exec_)
                               : Eigen::VectorXd::Zero(u_space_.n_dofs()).eval();
    for (const auto& [edges, fn] : tractions_) {
        load += assemble_boundary_traction(u_space_, edges, fn, t);
    }
    return load;
}

Eigen::VectorXd Discretization::pressure_load(double t) const {
    Eigen::VectorXd load = spec_->source
                               ? assemble_source(p_space_, spec_->source, t, exec_)
                               : Eigen::VectorXd::Zero(p_space_.n_dofs()).eval();
    for (int i = 0; i < p_space_.n_networks(); ++i) {
        for (const auto& [edges, fn] : fluxes_[static_cast<std::size_t>(i)]) {
            load += assemble_boundary_flux(p_space_, i, edges, fn, t);
        }
    }
    return load;
}

SystemState Discretization::initial_state() const {
    SystemState state;
    state.time = 0.0;
    state.u = spec_->initial_displacement
                  ? interpolate_vector(u_space_, spec_->initial_displacement, 0.0)
                  : Eigen::VectorXd::Zero(u_space_.n_dofs()).eval();
    state.p = spec_->initial_pressure
                  ? interpolate_multi(p_space_, spec_->initial_pressure, 0.0)
                  : Eigen::VectorXd::Zero(p_space_.n_dofs()).eval();
    const Index n_vertices = spec_->mesh.n_vertices();
    state.xi = Eigen::VectorXd::Zero(xi_space_.n_dofs());
    for (Index v = 0; v < n_vertices; ++v) {
        double combo = 0.0;
        for (int i = 0; i < spec_->params.n_networks; ++i) {
            combo += spec_->params.alpha[i] * state.p[i * n_vertices + v];
        }
        state.xi[v] = combo;
    }
    return state;
}

double Discretization::l2_norm_p1(const Eigen::VectorXd& v) const {
    return std::sqrt(v.dot(p1_mass_.multiply(v)));
}

double Discretization::l2_norm_alpha_combination(const Eigen::VectorXd& w) const {
    const Index n_vertices = spec_->mesh.n_vertices();
    Eigen::VectorXd combo = Eigen::VectorXd::Zero(n_vertices);
    for (int i = 0; i < spec_->params.n_networks; ++i) {
        combo += spec_->params.alpha[i] * w.segment(i * n_vertices, n_vertices);
    }
    return l2_norm_p1(combo);
}

double Discretization::l2_norm_networks(const Eigen::VectorXd& w) const {
    const Index n_vertices = spec_->mesh.n_vertices();
    double sum = 0.0;
    for (int i = 0; i < spec_->params.n_networks; ++i) {
        const Eigen::VectorXd part = w.segment(i * n_vertices, n_vertices);
        sum += part.dot(p1_mass_.multiply(part));
    }
    return std::sqrt(sum);
}

Factorization CoupledOperator::make_factorization(
    const Discretization& disc, double dt, BlockSystem& system, DirichletSet& bc,
    std::optional<DirichletEliminator>& elim) {
    system.add_field("u", disc.u_space().n_dofs());
    system.add_field("xi", disc.xi_space().n_dofs());
    system.add_field("p", disc.p_space().n_dofs());

    system.add_block("u", "u", disc.elasticity());
    system.add_block("u", "xi", disc.divergence().transposed(), -1.0);
    system.add_block("xi", "u", disc.divergence());
    system.add_block("xi", "xi", disc.scalar_mass());
    system.add_block("xi", "p", disc.coupling(), -1.0);
    // Row 3 in the dt-multiplied form: all blocks O(1), matrix independent
    // of the time level.
    system.add_block("p", "xi", disc.coupling_t(), -1.0);
    system.add_block("p", "p", disc.network_mass());
    system.add_block("p", "p", disc.network_stiffness(), dt);
    system.add_block("p", "p", disc.exchange(), dt);
    system.finalize();

    const DirichletSet parts[] = {
        disc.u_dirichlet(),
        disc.p_dirichlet().shifted(system.offset("p")),
    };
    bc = DirichletSet::merged(parts);
    elim.emplace(system.matrix(), bc);
    try {
        return Factorization(elim->eliminated());
    } catch (const SingularMatrixError& err) {
        throw ConfigError(std::string("coupled operator: ") + err.what());
    }
}

CoupledOperator::CoupledOperator(const Discretization& disc, double dt)
    : disc_(&disc),
      dt_(dt),
      lu_(make_factorization(disc, dt, system_, bc_, eliminator_)) {
    if (!(dt > 0.0)) {
        throw ArgumentError("CoupledOperator: dt must be positive");
    }
}

SystemState CoupledOperator::step(const SystemState& prev, StepReport* report) const {
    const double t_next = prev.time + dt_;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(system_.total_dim());
    system_.set_segment(rhs, "u", disc_->displacement_load(t_next));
    system_.set_segment(rhs, "p",
                        disc_->network_mass().multiply(prev.p) -
                            disc_->coupling_t().multiply(prev.xi) +
                            dt_ * disc_->pressure_load(t_next));
    eliminator_->apply(rhs, t_next);

    const Eigen::VectorXd x = lu_.solve(rhs);

    if (report) {
        report->time = t_next;
        const double rhs_norm = rhs.norm();
        report->linear_residual =
            rhs_norm > 0.0
                ? (rhs - eliminator_->eliminated().multiply(x)).norm() / rhs_norm
                : 0.0;
        report->iterations = 1;
    }
    SystemState next;
    next.time = t_next;
    next.u = system_.segment(x, "u");
    next.xi = system_.segment(x, "xi");
    next.p = system_.segment(x, "p");
    return next;
}

DecoupledOperator::DecoupledOperator(const Discretization& disc, double dt,
                                     SchemeConfig::Step1Solver step1_solver,
                                     double cg_tol, int cg_max_iter)
    : disc_(&disc),
      dt_(dt),
      step1_solver_(step1_solver),
      cg_tol_(cg_tol),
      cg_max_iter_(cg_max_iter) {
    if (!(dt > 0.0)) {
        throw ArgumentError("DecoupledOperator: dt must be positive");
    }
    const std::pair<double, const SparseMatrix*> terms[] = {
        {1.0, &disc.network_mass()},
        {dt, &disc.network_stiffness()},
        {dt, &disc.exchange()},
    };
    const SparseMatrix step1_full = weighted_sum(terms);
    p_eliminator_.emplace(step1_full, disc.p_dirichlet());
    step1_eliminated_ = p_eliminator_->eliminated();
    if (step1_solver_ == SchemeConfig::Step1Solver::direct) {
        step1_lu_.emplace(step1_eliminated_);
        ++factorizations_;
    }

    stokes_.add_field("u", disc.u_space().n_dofs());
    stokes_.add_field("xi", disc.xi_space().n_dofs());
    stokes_.add_block("u", "u", disc.elasticity());
    stokes_.add_block("u", "xi", disc.divergence().transposed(), -1.0);
    stokes_.add_block("xi", "u", disc.divergence());
    stokes_.add_block("xi", "xi", disc.scalar_mass());
    stokes_.finalize();
    stokes_bc_ = disc.u_dirichlet();
    stokes_eliminator_.emplace(stokes_.matrix(), stokes_bc_);
    try {
        stokes_lu_.emplace(stokes_eliminator_->eliminated());
    } catch (const SingularMatrixError& err) {
        throw ConfigError(std::string("generalized Stokes operator: ") + err.what());
    }
    ++factorizations_;
}

Eigen::VectorXd DecoupledOperator::step1(const SystemState& prev,
                                         const Eigen::VectorXd& xi_guess,
                                         double t_next) const {
    Eigen::VectorXd rhs = disc_->network_mass().multiply(prev.p) +
                          disc_->coupling_t().multiply(xi_guess - prev.xi) +
                          dt_ * disc_->pressure_load(t_next);
    p_eliminator_->apply(rhs, t_next);
    if (step1_lu_) {
        return step1_lu_->solve(rhs);
    }
    return cg_solve(step1_eliminated_, rhs, cg_tol_, cg_max_iter_);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
DecoupledOperator::step2(const Eigen::VectorXd& p_new, double t_next) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(stokes_.total_dim());
    stokes_.set_segment(rhs, "u", disc_->displacement_load(t_next));
    stokes_.set_segment(rhs, "xi", disc_->coupling().multiply(p_new));
    stokes_eliminator_->apply(rhs, t_next);
    const Eigen::VectorXd x = stokes_lu_->solve(rhs);
    return {stokes_.segment(x, "u"), stokes_.segment(x, "xi")};
}

SystemState DecoupledOperator::time_step(const SystemState& prev,
                                         const SchemeConfig& config,
                                         DecoupledTrace* trace) const {
    const double t_next = prev.time + dt_;
    const bool use_tolerance = config.xi_tolerance > 0.0;
    const int limit = use_tolerance ? config.max_iters : config.iters;

    SystemState next;
    next.time = t_next;
    Eigen::VectorXd xi_prev_iter = prev.xi;
    if (trace) {
        *trace = {};
    }
    for (int k = 1; k <= limit; ++k) {
        next.p = step1(prev, xi_prev_iter, t_next);
        std::tie(next.u, next.xi) = step2(next.p, t_next);
        const double increment = disc_->l2_norm_p1(next.xi - xi_prev_iter);
        if (trace) {
            trace->xi_increments.push_back(increment);
            trace->iterations = k;
        }
        xi_prev_iter = next.xi;
        if (use_tolerance && increment <= config.xi_tolerance) {
            return next;
        }
    }
    // The iteration is unconditionally convergent; exhausting max_iters in
    // tolerance mode just flags a too-tight tolerance.
    if (use_tolerance && trace) {
        trace->hit_max_iters = true;
    }
    return next;
}

RunResult run(const Discretization& disc, const SchemeConfig& config,
              const std::vector<Vec2>& probes, Retention retention) {
    if (config.n_steps < 0) {
        throw ArgumentError("run: n_steps must be non-negative");
    }
    RunResult result;
    const auto setup_start = std::chrono::steady_clock::now();

    std::vector<PointLocation> locations;
    locations.reserve(probes.size());
    for (const Vec2& p : probes) {
        locations.push_back(locate_point(disc.spec().mesh, p));
    }

    std::optional<CoupledOperator> coupled;
    std::optional<DecoupledOperator> decoupled;
    if (config.n_steps > 0) {
        if (config.scheme == SchemeConfig::Scheme::coupled) {
            coupled.emplace(disc, config.dt);
            result.report.n_factorizations = coupled->factorizations();
        } else {
            decoupled.emplace(disc, config.dt, config.step1_solver, config.cg_tol,
                              config.cg_max_iter);
            result.report.n_factorizations = decoupled->factorizations();
        }
    }
    result.report.setup_seconds = seconds_since(setup_start);

    SystemState state = disc.initial_state();
    const auto record_probes = [&](const SystemState& s) {
        if (result.probes.empty() && !probes.empty()) {
            result.probes.resize(probes.size());
        }
        for (std::size_t i = 0; i < probes.size(); ++i) {
            ProbeSample sample;
            sample.time = s.time;
            sample.u = evaluate_vector(disc.u_space(), s.u, locations[i]);
            sample.p.resize(disc.p_space().n_networks());
            for (int net = 0; net < disc.p_space().n_networks(); ++net) {
                sample.p[net] = evaluate_network(disc.p_space(), s.p, net, locations[i]);
            }
            result.probes[i].push_back(std::move(sample));
        }
    };

    const auto solve_start = std::chrono::steady_clock::now();
    if (retention == Retention::full) {
        result.trajectory.push_back(state);
    }
    record_probes(state);

    for (int n = 1; n <= config.n_steps; ++n) {
        StepReport step_report;
        if (coupled) {
            state = coupled->step(state, &step_report);
        } else {
            DecoupledTrace trace;
            state = decoupled->time_step(state, config, &trace);
            step_report.time = state.time;
            step_report.iterations = trace.iterations;
            step_report.xi_increments = std::move(trace.xi_increments);
            step_report.hit_max_iters = trace.hit_max_iters;
        }
        result.report.steps.push_back(std::move(step_report));
        if (retention == Retention::full) {
            result.trajectory.push_back(state);
        }
        record_probes(state);
    }
    result.report.solve_seconds = seconds_since(solve_start);
    result.final_state = std::move(state);
    return result;
}

} // namespace mpet
