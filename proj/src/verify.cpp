#include "mpet/verify.hpp"

#include <algorithm>
#include <cmath>

namespace mpet {

namespace {

struct TriGeom {
    std::array<Vec2, 3> v;
    double det = 0.0;
    Eigen::Matrix2d inv_jac_t;
};

TriGeom triangle_geometry(const Mesh& mesh, Index t) {
    const auto& tri = mesh.triangle(t);
    TriGeom g;
    g.v = {mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
    const double j00 = g.v[1].x - g.v[0].x;
    const double j01 = g.v[2].x - g.v[0].x;
    const double j10 = g.v[1].y - g.v[0].y;
    const double j11 = g.v[2].y - g.v[0].y;
    g.det = j00 * j11 - j01 * j10;
    g.inv_jac_t << j11 / g.det, -j10 / g.det, -j01 / g.det, j00 / g.det;
    return g;
}

Vec2 physical_point(const TriGeom& g, const std::array<double, 3>& bary) {
    return {bary[0] * g.v[0].x + bary[1] * g.v[1].x + bary[2] * g.v[2].x,
            bary[0] * g.v[0].y + bary[1] * g.v[1].y + bary[2] * g.v[2].y};
}

/// Sums per-element contributions in element order after a parallel fill,
/// so the totals do not depend on the execution policy.
template <typename PerElement>
double accumulate_elements(Index n_elems, Exec exec, const PerElement& contribution) {
    std::vector<double> partial(static_cast<std::size_t>(n_elems), 0.0);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Index t = 0; t < n_elems; ++t) {
            partial[static_cast<std::size_t>(t)] = contribution(t);
        }
    } else {
        for (Index t = 0; t < n_elems; ++t) {
            partial[static_cast<std::size_t>(t)] = contribution(t);
        }
    }
    double total = 0.0;
    for (double v : partial) {
        total += v;
    }
    return total;
}

struct P2Eval {
    Eigen::Vector2d value;
    Eigen::Matrix2d gradient; ///< gradient(i, j) = d u_i / d x_j
};

P2Eval evaluate_p2(const FeSpace& space, const Eigen::VectorXd& coeffs, Index tri,
                   const BasisEval& basis, const TriGeom& geom) {
    P2Eval out;
    out.value.setZero();
    out.gradient.setZero();
    const auto nodes = space.element_nodes(tri);
    for (int k = 0; k < 6; ++k) {
        const Eigen::Vector2d grad =
            geom.inv_jac_t * basis.gradients[static_cast<std::size_t>(k)];
        const double phi = basis.values[static_cast<std::size_t>(k)];
        for (int c = 0; c < 2; ++c) {
            const double coeff = coeffs[2 * nodes[static_cast<std::size_t>(k)] + c];
            out.value[c] += phi * coeff;
            out.gradient(c, 0) += grad[0] * coeff;
            out.gradient(c, 1) += grad[1] * coeff;
        }
    }
    return out;
}

} // namespace

std::vector<ErrorRecord> error_norms(const Discretization& disc,
                                     const SystemState& state,
                                     const ManufacturedCase& mcase,
                                     double expected_time, Exec exec) {
    if (std::abs(state.time - expected_time) > 1e-12 * (1.0 + std::abs(expected_time))) {
        throw ArgumentError("error_norms: state time " + std::to_string(state.time) +
                            " does not match expected time " +
                            std::to_string(expected_time));
    }
    const Mesh& mesh = disc.spec().mesh;
    const double t = state.time;
    const QuadratureRule rule = quadrature_rule(6);
    std::vector<BasisEval> p2_basis, p1_basis;
    for (const auto& p : rule.points) {
        p2_basis.push_back(reference_basis(ElementKind::p2, p));
        p1_basis.push_back(reference_basis(ElementKind::p1, p));
    }
    const Index n_vertices = mesh.n_vertices();
    const int n_networks = disc.p_space().n_networks();

    // Accumulators per field: l2^2 and h1-seminorm^2.
    const int n_fields = 2 + n_networks;
    std::vector<double> l2_sq(static_cast<std::size_t>(n_fields), 0.0);
    std::vector<double> semi_sq(static_cast<std::size_t>(n_fields), 0.0);

    for (int field = 0; field < n_fields; ++field) {
        std::vector<std::array<double, 2>> partial(
            static_cast<std::size_t>(mesh.n_triangles()), {0.0, 0.0});
        const auto fill = [&](Index tri) {
            const TriGeom geom = triangle_geometry(mesh, tri);
            const auto& tv = mesh.triangle(tri);
            double l2 = 0.0;
            double semi = 0.0;
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                const double w = rule.weights[q] * geom.det;
                const Vec2 x = physical_point(geom, rule.points[q]);
                if (field == 0) {
                    const P2Eval uh = evaluate_p2(disc.u_space(), state.u, tri,
                                                  p2_basis[q], geom);
                    const Eigen::Vector2d diff = uh.value - mcase.displacement(x, t);
                    const Eigen::Matrix2d gdiff =
                        uh.gradient - mcase.displacement_gradient(x, t);
                    l2 += w * diff.squaredNorm();
                    semi += w * gdiff.squaredNorm();
                } else {
                    const Index offset = field == 1 ? 0 : (field - 2) * n_vertices;
                    const Eigen::VectorXd& coeffs = field == 1 ? state.xi : state.p;
                    double vh = 0.0;
                    Eigen::Vector2d gh = Eigen::Vector2d::Zero();
                    for (int k = 0; k < 3; ++k) {
                        const double c =
                            coeffs[offset + tv[static_cast<std::size_t>(k)]];
                        vh += p1_basis[q].values[static_cast<std::size_t>(k)] * c;
                        gh += c * (geom.inv_jac_t *
                                   p1_basis[q].gradients[static_cast<std::size_t>(k)]);
                    }
                    double exact = 0.0;
                    Eigen::Vector2d exact_grad;
                    if (field == 1) {
                        exact = mcase.total_pressure(x, t);
                        exact_grad = mcase.total_pressure_gradient(x, t);
                    } else {
                        exact = mcase.pressure(x, t)[field - 2];
                        exact_grad = mcase.pressure_gradient(x, t).row(field - 2);
                    }
                    l2 += w * (vh - exact) * (vh - exact);
                    semi += w * (gh - exact_grad).squaredNorm();
                }
            }
            partial[static_cast<std::size_t>(tri)] = {l2, semi};
        };
        if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
            for (Index tri = 0; tri < mesh.n_triangles(); ++tri) {
                fill(tri);
            }
        } else {
            for (Index tri = 0; tri < mesh.n_triangles(); ++tri) {
                fill(tri);
            }
        }
        for (const auto& [l2, semi] : partial) {
            l2_sq[static_cast<std::size_t>(field)] += l2;
            semi_sq[static_cast<std::size_t>(field)] += semi;
        }
    }

    const double h = mesh.max_edge_length();
    const int inv_h = static_cast<int>(std::lround(std::sqrt(2.0) / h));
    std::vector<ErrorRecord> records;
    for (int field = 0; field < n_fields; ++field) {
        ErrorRecord rec;
        rec.inv_h = inv_h;
        rec.field = field == 0   ? "u"
                    : field == 1 ? "xi"
                                 : "p" + std::to_string(field - 1);
        rec.l2 = std::sqrt(l2_sq[static_cast<std::size_t>(field)]);
        rec.h1_semi = std::sqrt(semi_sq[static_cast<std::size_t>(field)]);
        rec.h1 = std::sqrt(l2_sq[static_cast<std::size_t>(field)] +
                           semi_sq[static_cast<std::size_t>(field)]);
        records.push_back(std::move(rec));
    }
    return records;
}

double observed_order(double e_coarse, double e_fine) {
    if (!(e_coarse > 0.0) || !(e_fine > 0.0)) {
        throw ArgumentError("observed_order: errors must be positive");
    }
    return std::log2(e_coarse / e_fine);
}

double displacement_l2_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                            Exec exec) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    std::vector<BasisEval> basis;
    for (const auto& p : rule.points) {
        basis.push_back(reference_basis(ElementKind::p2, p));
    }
    const double sq = accumulate_elements(mesh.n_triangles(), exec, [&](Index tri) {
        const TriGeom geom = triangle_geometry(mesh, tri);
        double local = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const P2Eval uh = evaluate_p2(space, coeffs, tri, basis[q], geom);
            local += rule.weights[q] * geom.det * uh.value.squaredNorm();
        }
        return local;
    });
    return std::sqrt(sq);
}

double displacement_div_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                             Exec exec) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    std::vector<BasisEval> basis;
    for (const auto& p : rule.points) {
        basis.push_back(reference_basis(ElementKind::p2, p));
    }
    const double sq = accumulate_elements(mesh.n_triangles(), exec, [&](Index tri) {
        const TriGeom geom = triangle_geometry(mesh, tri);
        double local = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const P2Eval uh = evaluate_p2(space, coeffs, tri, basis[q], geom);
            const double div = uh.gradient(0, 0) + uh.gradient(1, 1);
            local += rule.weights[q] * geom.det * div * div;
        }
        return local;
    });
    return std::sqrt(sq);
}

double displacement_strain_norm(const FeSpace& space, const Eigen::VectorXd& coeffs,
                                Exec exec) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    std::vector<BasisEval> basis;
    for (const auto& p : rule.points) {
        basis.push_back(reference_basis(ElementKind::p2, p));
    }
    const double sq = accumulate_elements(mesh.n_triangles(), exec, [&](Index tri) {
        const TriGeom geom = triangle_geometry(mesh, tri);
        double local = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const P2Eval uh = evaluate_p2(space, coeffs, tri, basis[q], geom);
            const Eigen::Matrix2d strain =
                0.5 * (uh.gradient + uh.gradient.transpose());
            local += rule.weights[q] * geom.det * strain.squaredNorm();
        }
        return local;
    });
    return std::sqrt(sq);
}

ConvergenceTable convergence_study(const MpetParameters& params,
                                   const ConvergenceStudyConfig& config) {
    if (config.levels < 1) {
        throw ArgumentError("convergence_study: need at least one level");
    }
    const ManufacturedCase mcase(params);
    ConvergenceTable table;
    Mesh mesh = unit_square_mesh(config.base_n);
    for (int level = 0; level < config.levels; ++level) {
        if (level > 0) {
            mesh = refine_uniform(mesh);
        }
        const ProblemSpec spec =
            manufactured_problem(params, mesh, config.final_time);
        const Discretization disc(spec);
        SchemeConfig scheme = config.scheme;
        scheme.n_steps = steps_for(config.final_time, scheme.dt);
        const RunResult result = run(disc, scheme);
        std::vector<ErrorRecord> records = error_norms(
            disc, result.final_state, mcase, scheme.n_steps * scheme.dt);
        if (level > 0) {
            const auto& prev = table.rows.back();
            for (std::size_t f = 0; f < records.size(); ++f) {
                records[f].order_l2 = observed_order(prev[f].l2, records[f].l2);
                records[f].order_h1 = observed_order(prev[f].h1, records[f].h1);
            }
        }
        table.levels.push_back(config.base_n << level);
        table.rows.push_back(std::move(records));
    }
    return table;
}

std::vector<ContractionPoint> contraction_series(const Discretization& disc,
                                                 double dt, int k_max,
                                                 double floor) {
    const SystemState initial = disc.initial_state();
    const CoupledOperator coupled(disc, dt);
    const SystemState reference = coupled.step(initial);
    const DecoupledOperator decoupled(disc, dt);
    const double t_next = initial.time + dt;

    std::vector<ContractionPoint> series;
    ContractionPoint start;
    start.k = 0;
    start.e_xi = disc.l2_norm_p1(initial.xi - reference.xi);
    start.e_alpha_p = disc.l2_norm_alpha_combination(initial.p - reference.p);
    start.e_p = disc.l2_norm_networks(initial.p - reference.p);
    start.e_u = displacement_l2_norm(disc.u_space(), initial.u - reference.u);
    series.push_back(start);

    Eigen::VectorXd xi_iter = initial.xi;
    for (int k = 1; k <= k_max; ++k) {
        const Eigen::VectorXd p_k = decoupled.step1(initial, xi_iter, t_next);
        auto [u_k, xi_k] = decoupled.step2(p_k, t_next);
        ContractionPoint point;
        point.k = k;
        point.e_xi = disc.l2_norm_p1(xi_k - reference.xi);
        point.e_alpha_p = disc.l2_norm_alpha_combination(p_k - reference.p);
        point.e_p = disc.l2_norm_networks(p_k - reference.p);
        point.e_u = displacement_l2_norm(disc.u_space(), u_k - reference.u);
        const double prev = series.back().e_xi;
        if (point.e_xi > 1e-14 && prev > 1e-14) {
            point.ratio = point.e_xi / prev;
        }
        series.push_back(point);
        xi_iter = xi_k;
        if (point.e_xi <= floor) {
            break;
        }
    }
    return series;
}

EnergyLedger energy_identity_residual(const std::vector<SystemState>& trajectory,
                                      const Discretization& disc) {
    if (trajectory.size() < 2) {
        throw ArgumentError("energy_identity_residual: need at least two states");
    }
    const double dt = trajectory[1].time - trajectory[0].time;
    for (std::size_t n = 1; n < trajectory.size(); ++n) {
        const double step = trajectory[n].time - trajectory[n - 1].time;
        if (std::abs(step - dt) > 1e-12 * (1.0 + std::abs(dt))) {
            throw ArgumentError("energy_identity_residual: non-uniform time steps");
        }
    }
    // The telescoping of the load work terms needs loads constant in time.
    const Eigen::VectorXd f_u = disc.displacement_load(trajectory.front().time);
    const Eigen::VectorXd f_p = disc.pressure_load(trajectory.front().time);
    {
        const double t_probe = trajectory.back().time;
        const Eigen::VectorXd f_u_late = disc.displacement_load(t_probe);
        const Eigen::VectorXd f_p_late = disc.pressure_load(t_probe);
        const double scale = 1.0 + f_u.norm() + f_p.norm();
        if ((f_u - f_u_late).norm() > 1e-12 * scale ||
            (f_p - f_p_late).norm() > 1e-12 * scale) {
            throw ArgumentError(
                "energy_identity_residual: loads must be constant in time");
        }
    }

    const MpetParameters& prm = disc.spec().params;
    const Index n_vertices = disc.spec().mesh.n_vertices();
    const int n_networks = prm.n_networks;

    const auto alpha_combo = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd combo = Eigen::VectorXd::Zero(n_vertices);
        for (int i = 0; i < n_networks; ++i) {
            combo += prm.alpha[i] * p.segment(i * n_vertices, n_vertices);
        }
        return combo;
    };
    const auto mass_sq = [&](const Eigen::VectorXd& v) {
        return v.dot(disc.p1_mass().multiply(v));
    };
    const auto storage_sq = [&](const Eigen::VectorXd& p) {
        double sum = 0.0;
        for (int i = 0; i < n_networks; ++i) {
            const Eigen::VectorXd part = p.segment(i * n_vertices, n_vertices);
            sum += prm.c[i] * mass_sq(part);
        }
        return sum;
    };
    const auto stored_energy = [&](const SystemState& s) {
        const double strain_sq = 0.5 * s.u.dot(disc.elasticity().multiply(s.u));
        const double pressure_gap_sq = mass_sq(alpha_combo(s.p) - s.xi);
        return strain_sq + pressure_gap_sq / (2.0 * prm.lambda) +
               0.5 * storage_sq(s.p) - f_u.dot(s.u);
    };

    EnergyLedger ledger;
    ledger.times.push_back(trajectory[0].time);
    ledger.stored.push_back(stored_energy(trajectory[0]));
    ledger.dissipation.push_back(0.0);
    double cumulative = 0.0;
    for (std::size_t n = 1; n < trajectory.size(); ++n) {
        const SystemState& cur = trajectory[n];
        const SystemState& prev = trajectory[n - 1];
        const Eigen::VectorXd du = (cur.u - prev.u) / dt;
        const Eigen::VectorXd dxi = (cur.xi - prev.xi) / dt;
        const Eigen::VectorXd dp = (cur.p - prev.p) / dt;

        const double rate_terms =
            0.5 * du.dot(disc.elasticity().multiply(du)) +
            mass_sq(alpha_combo(dp) - dxi) / (2.0 * prm.lambda) +
            0.5 * storage_sq(dp);
        const double stiffness_term = cur.p.dot(disc.network_stiffness().multiply(cur.p));
        const double exchange_term = cur.p.dot(disc.exchange().multiply(cur.p));
        const double work_term = f_p.dot(cur.p);
        cumulative += dt * (dt * rate_terms + stiffness_term + exchange_term - work_term);
        ledger.times.push_back(cur.time);
        ledger.stored.push_back(stored_energy(cur));
        ledger.dissipation.push_back(cumulative);
    }
    return ledger;
}

} // namespace mpet
