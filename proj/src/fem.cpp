#include "mpet/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mpet {

namespace {

const Eigen::Vector2d kRefGradLambda[3] = {
    {-1.0, -1.0},
    {1.0, 0.0},
    {0.0, 1.0},
};

struct TriGeom {
    std::array<Vec2, 3> v;
    double det = 0.0;            ///< 2 * area
    Eigen::Matrix2d inv_jac_t;   ///< maps reference gradients to physical ones
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

} // namespace

BasisEval reference_basis(ElementKind kind, const std::array<double, 3>& l) {
    BasisEval out;
    if (kind == ElementKind::p1) {
        out.count = 3;
        for (int i = 0; i < 3; ++i) {
            out.values[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(i)];
            out.gradients[static_cast<std::size_t>(i)] = kRefGradLambda[i];
        }
        return out;
    }
    out.count = 6;
    for (int i = 0; i < 3; ++i) {
        const double li = l[static_cast<std::size_t>(i)];
        out.values[static_cast<std::size_t>(i)] = li * (2.0 * li - 1.0);
        out.gradients[static_cast<std::size_t>(i)] = (4.0 * li - 1.0) * kRefGradLambda[i];
    }
    const int edge_nodes[3][2] = {{0, 1}, {1, 2}, {2, 0}};
    for (int e = 0; e < 3; ++e) {
        const int a = edge_nodes[e][0];
        const int b = edge_nodes[e][1];
        out.values[static_cast<std::size_t>(3 + e)] =
            4.0 * l[static_cast<std::size_t>(a)] * l[static_cast<std::size_t>(b)];
        out.gradients[static_cast<std::size_t>(3 + e)] =
            4.0 * (l[static_cast<std::size_t>(a)] * kRefGradLambda[b] +
                   l[static_cast<std::size_t>(b)] * kRefGradLambda[a]);
    }
    return out;
}

QuadratureRule quadrature_rule(int degree) {
    if (degree < 1 || degree > 6) {
        throw ArgumentError("quadrature_rule: degree must be in 1..6");
    }
    QuadratureRule rule;
    const auto center = [&rule](double w) {
        rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        rule.weights.push_back(0.5 * w);
    };
    const auto orbit3 = [&rule](double a, double w) {
        const double b = 1.0 - 2.0 * a;
        rule.points.push_back({b, a, a});
        rule.points.push_back({a, b, a});
        rule.points.push_back({a, a, b});
        for (int i = 0; i < 3; ++i) {
            rule.weights.push_back(0.5 * w);
        }
    };
    const auto orbit6 = [&rule](double a, double b, double w) {
        const double c = 1.0 - a - b;
        rule.points.push_back({a, b, c});
        rule.points.push_back({a, c, b});
        rule.points.push_back({b, a, c});
        rule.points.push_back({b, c, a});
        rule.points.push_back({c, a, b});
        rule.points.push_back({c, b, a});
        for (int i = 0; i < 6; ++i) {
            rule.weights.push_back(0.5 * w);
        }
    };
    switch (degree) {
    case 1:
        rule.degree = 1;
        center(1.0);
        break;
    case 2:
        rule.degree = 2;
        orbit3(1.0 / 6.0, 1.0 / 3.0);
        break;
    case 3:
    case 4:
        rule.degree = 4;
        orbit3(0.445948490915965, 0.223381589678011);
        orbit3(0.091576213509771, 0.109951743655322);
        break;
    case 5:
        rule.degree = 5;
        center(0.225);
        orbit3(0.470142064105115, 0.132394152788506);
        orbit3(0.101286507323456, 0.125939180544827);
        break;
    case 6:
        rule.degree = 6;
        orbit3(0.249286745170910, 0.116786275726379);
        orbit3(0.063089014491502, 0.050844906370207);
        orbit6(0.310352451033785, 0.053145049844816, 0.082851075618374);
        break;
    }
    return rule;
}

EdgeQuadrature edge_quadrature() {
    // 3-point Gauss-Legendre on [0, 1], exact through degree 5.
    const double offset = 0.5 * std::sqrt(0.6);
    EdgeQuadrature q;
    q.points = {0.5 - offset, 0.5, 0.5 + offset};
    q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return q;
}

FeSpace::FeSpace(SpaceKind kind, const Mesh& mesh, int n_networks)
    : kind_(kind), mesh_(&mesh), n_networks_(n_networks) {
    switch (kind) {
    case SpaceKind::vector_p2:
        edge_table_ = std::make_shared<EdgeTable>(mesh);
        n_scalar_nodes_ = mesh.n_vertices() + edge_table_->n_edges();
        n_dofs_ = 2 * n_scalar_nodes_;
        break;
    case SpaceKind::scalar_p1:
        n_scalar_nodes_ = mesh.n_vertices();
        n_dofs_ = n_scalar_nodes_;
        break;
    case SpaceKind::multi_scalar_p1:
        if (n_networks < 1) {
            throw ArgumentError("FeSpace: need at least one network");
        }
        n_scalar_nodes_ = mesh.n_vertices();
        n_dofs_ = n_networks * n_scalar_nodes_;
        break;
    }
}

FeSpace FeSpace::vector_p2(const Mesh& mesh) {
    return FeSpace(SpaceKind::vector_p2, mesh, 1);
}
FeSpace FeSpace::scalar_p1(const Mesh& mesh) {
    return FeSpace(SpaceKind::scalar_p1, mesh, 1);
}
FeSpace FeSpace::multi_scalar_p1(const Mesh& mesh, int n_networks) {
    return FeSpace(SpaceKind::multi_scalar_p1, mesh, n_networks);
}

int FeSpace::components() const {
    switch (kind_) {
    case SpaceKind::vector_p2: return 2;
    case SpaceKind::scalar_p1: return 1;
    case SpaceKind::multi_scalar_p1: return n_networks_;
    }
    return 0;
}

const EdgeTable& FeSpace::edges() const {
    if (!edge_table_) {
        throw ArgumentError("FeSpace: edge table only exists for P2 spaces");
    }
    return *edge_table_;
}

std::array<Index, 6> FeSpace::element_nodes(Index triangle) const {
    const auto& tri = mesh_->triangle(triangle);
    std::array<Index, 6> nodes{tri[0], tri[1], tri[2], -1, -1, -1};
    if (kind_ == SpaceKind::vector_p2) {
        const auto& te = edge_table_->triangle_edges(triangle);
        const Index base = mesh_->n_vertices();
        nodes[3] = base + te[0];
        nodes[4] = base + te[1];
        nodes[5] = base + te[2];
    }
    return nodes;
}

Vec2 FeSpace::node_position(Index scalar_node) const {
    if (scalar_node < mesh_->n_vertices()) {
        return mesh_->vertex(scalar_node);
    }
    const auto& e = edges().edges()[static_cast<std::size_t>(scalar_node - mesh_->n_vertices())];
    const Vec2& a = mesh_->vertex(e[0]);
    const Vec2& b = mesh_->vertex(e[1]);
    return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

CoefficientSpec CoefficientSpec::from(const MpetParameters& params) {
    return {params.mu, params.lambda, params.alpha, params.c, params.K, params.beta};
}

namespace {

/// Runs `fill(t, slot)` over all elements, each writing exactly
/// `entries_per_elem` triplets into its own slot range; the CSR build then
/// sums duplicates in slot order, so the result does not depend on the
/// execution policy or thread count.
template <typename Fill>
SparseMatrix assemble_elements(Index n_rows, Index n_cols, Index n_elems,
                               int entries_per_elem, Exec exec, const Fill& fill) {
    std::vector<Triplet> triplets(static_cast<std::size_t>(n_elems) *
                                  static_cast<std::size_t>(entries_per_elem));
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Index t = 0; t < n_elems; ++t) {
            fill(t, &triplets[static_cast<std::size_t>(t) *
                              static_cast<std::size_t>(entries_per_elem)]);
        }
    } else {
        for (Index t = 0; t < n_elems; ++t) {
            fill(t, &triplets[static_cast<std::size_t>(t) *
                              static_cast<std::size_t>(entries_per_elem)]);
        }
    }
    return SparseMatrix::from_triplets(n_rows, n_cols, std::move(triplets));
}

std::vector<BasisEval> evaluate_basis_at(ElementKind kind, const QuadratureRule& rule) {
    std::vector<BasisEval> evals;
    evals.reserve(rule.points.size());
    for (const auto& p : rule.points) {
        evals.push_back(reference_basis(kind, p));
    }
    return evals;
}

void require_kind(const FeSpace& space, SpaceKind kind, const char* where) {
    if (space.kind() != kind) {
        throw ArgumentError(std::string(where) + ": space has the wrong element kind");
    }
}

void require_same_mesh(const FeSpace& a, const FeSpace& b, const char* where) {
    if (&a.mesh() != &b.mesh()) {
        throw ArgumentError(std::string(where) + ": spaces live on different meshes");
    }
}

/// Local P1 mass matrix of one triangle (degree-4 rule).
void local_p1_mass(const TriGeom& geom, const QuadratureRule& rule,
                   const std::vector<BasisEval>& basis, double out[3][3]) {
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            out[r][c] = 0.0;
        }
    }
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double w = rule.weights[q] * geom.det;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                out[r][c] += w * basis[q].values[static_cast<std::size_t>(r)] *
                             basis[q].values[static_cast<std::size_t>(c)];
            }
        }
    }
}

} // namespace

SparseMatrix assemble_elasticity(const FeSpace& space, double mu, Exec exec) {
    require_kind(space, SpaceKind::vector_p2, "assemble_elasticity");
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    const auto basis = evaluate_basis_at(ElementKind::p2, rule);

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto nodes = space.element_nodes(t);
        double local[12][12] = {};
        Eigen::Vector2d grad[6];
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double w = rule.weights[q] * geom.det;
            for (int k = 0; k < 6; ++k) {
                grad[k] = geom.inv_jac_t * basis[q].gradients[static_cast<std::size_t>(k)];
            }
            for (int k = 0; k < 6; ++k) {
                const double gxk = grad[k][0], gyk = grad[k][1];
                for (int l = 0; l < 6; ++l) {
                    const double gxl = grad[l][0], gyl = grad[l][1];
                    const double f = 2.0 * mu * w;
                    local[2 * k][2 * l] += f * (gxk * gxl + 0.5 * gyk * gyl);
                    local[2 * k][2 * l + 1] += f * 0.5 * gyk * gxl;
                    local[2 * k + 1][2 * l] += f * 0.5 * gxk * gyl;
                    local[2 * k + 1][2 * l + 1] += f * (gyk * gyl + 0.5 * gxk * gxl);
                }
            }
        }
        int s = 0;
        for (int a = 0; a < 12; ++a) {
            for (int b = 0; b < 12; ++b) {
                slot[s++] = {2 * nodes[static_cast<std::size_t>(a / 2)] + a % 2,
                             2 * nodes[static_cast<std::size_t>(b / 2)] + b % 2,
                             local[a][b]};
            }
        }
    };
    return assemble_elements(space.n_dofs(), space.n_dofs(), mesh.n_triangles(), 144,
                             exec, fill);
}

SparseMatrix assemble_divergence(const FeSpace& trial_vector,
                                 const FeSpace& test_scalar, Exec exec) {
    require_kind(trial_vector, SpaceKind::vector_p2, "assemble_divergence");
    require_kind(test_scalar, SpaceKind::scalar_p1, "assemble_divergence");
    require_same_mesh(trial_vector, test_scalar, "assemble_divergence");
    const Mesh& mesh = trial_vector.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    const auto p2 = evaluate_basis_at(ElementKind::p2, rule);
    const auto p1 = evaluate_basis_at(ElementKind::p1, rule);

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto nodes = trial_vector.element_nodes(t);
        const auto& tri = mesh.triangle(t);
        double local[3][12] = {};
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double w = rule.weights[q] * geom.det;
            for (int k = 0; k < 6; ++k) {
                const Eigen::Vector2d g =
                    geom.inv_jac_t * p2[q].gradients[static_cast<std::size_t>(k)];
                for (int r = 0; r < 3; ++r) {
                    const double psi = p1[q].values[static_cast<std::size_t>(r)];
                    local[r][2 * k] += w * psi * g[0];
                    local[r][2 * k + 1] += w * psi * g[1];
                }
            }
        }
        int s = 0;
        for (int r = 0; r < 3; ++r) {
            for (int b = 0; b < 12; ++b) {
                slot[s++] = {tri[static_cast<std::size_t>(r)],
                             2 * nodes[static_cast<std::size_t>(b / 2)] + b % 2,
                             local[r][b]};
            }
        }
    };
    return assemble_elements(test_scalar.n_dofs(), trial_vector.n_dofs(),
                             mesh.n_triangles(), 36, exec, fill);
}

SparseMatrix assemble_scalar_mass(const FeSpace& space, double weight, Exec exec) {
    require_kind(space, SpaceKind::scalar_p1, "assemble_scalar_mass");
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(4);
    const auto basis = evaluate_basis_at(ElementKind::p1, rule);

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangle(t);
        double local[3][3];
        local_p1_mass(geom, rule, basis, local);
        int s = 0;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                slot[s++] = {tri[static_cast<std::size_t>(r)],
                             tri[static_cast<std::size_t>(c)], weight * local[r][c]};
            }
        }
    };
    return assemble_elements(space.n_dofs(), space.n_dofs(), mesh.n_triangles(), 9,
                             exec, fill);
}

SparseMatrix assemble_network_coupled_mass(const FeSpace& space,
                                           const Eigen::MatrixXd& weights,
                                           Exec exec) {
    require_kind(space, SpaceKind::multi_scalar_p1, "assemble_network_coupled_mass");
    const int n = space.n_networks();
    if (weights.rows() != n || weights.cols() != n) {
        throw DimensionError("assemble_network_coupled_mass: weight matrix shape");
    }
    // Fixed sparsity pattern over network pairs keeps per-element slot
    // counts constant for the deterministic parallel fill.
    std::vector<std::array<int, 2>> pattern;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (weights(i, j) != 0.0) {
                pattern.push_back({i, j});
            }
        }
    }
    if (pattern.empty()) {
        return SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), {});
    }
    const Mesh& mesh = space.mesh();
    const Index n_vertices = mesh.n_vertices();
    const QuadratureRule rule = quadrature_rule(4);
    const auto basis = evaluate_basis_at(ElementKind::p1, rule);
    const int epe = static_cast<int>(pattern.size()) * 9;

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangle(t);
        double local[3][3];
        local_p1_mass(geom, rule, basis, local);
        int s = 0;
        for (const auto& [i, j] : pattern) {
            const double w = weights(i, j);
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    slot[s++] = {i * n_vertices + tri[static_cast<std::size_t>(r)],
                                 j * n_vertices + tri[static_cast<std::size_t>(c)],
                                 w * local[r][c]};
                }
            }
        }
    };
    return assemble_elements(space.n_dofs(), space.n_dofs(), mesh.n_triangles(), epe,
                             exec, fill);
}

SparseMatrix assemble_network_stiffness(const FeSpace& space,
                                        const Eigen::VectorXd& conductivity,
                                        Exec exec) {
    require_kind(space, SpaceKind::multi_scalar_p1, "assemble_network_stiffness");
    const int n = space.n_networks();
    if (conductivity.size() != n) {
        throw DimensionError("assemble_network_stiffness: conductivity length");
    }
    for (int i = 0; i < n; ++i) {
        if (!(conductivity[i] > 0.0)) {
            throw ParameterError("assemble_network_stiffness: conductivity must be positive");
        }
    }
    const Mesh& mesh = space.mesh();
    const Index n_vertices = mesh.n_vertices();

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangle(t);
        // P1 gradients are constant per element.
        Eigen::Vector2d grad[3];
        for (int k = 0; k < 3; ++k) {
            grad[k] = geom.inv_jac_t * kRefGradLambda[k];
        }
        const double area = 0.5 * geom.det;
        int s = 0;
        for (int i = 0; i < n; ++i) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    slot[s++] = {i * n_vertices + tri[static_cast<std::size_t>(r)],
                                 i * n_vertices + tri[static_cast<std::size_t>(c)],
                                 conductivity[i] * area * grad[r].dot(grad[c])};
                }
            }
        }
    };
    return assemble_elements(space.n_dofs(), space.n_dofs(), mesh.n_triangles(), n * 9,
                             exec, fill);
}

SparseMatrix assemble_coupling_alpha_mass(const FeSpace& trial_multi,
                                          const FeSpace& test_scalar,
                                          const Eigen::VectorXd& alpha,
                                          double lambda, Exec exec) {
    require_kind(trial_multi, SpaceKind::multi_scalar_p1, "assemble_coupling_alpha_mass");
    require_kind(test_scalar, SpaceKind::scalar_p1, "assemble_coupling_alpha_mass");
    require_same_mesh(trial_multi, test_scalar, "assemble_coupling_alpha_mass");
    const int n = trial_multi.n_networks();
    if (alpha.size() != n) {
        throw DimensionError("assemble_coupling_alpha_mass: alpha length");
    }
    if (!(lambda > 0.0)) {
        throw ParameterError("assemble_coupling_alpha_mass: lambda must be positive");
    }
    const Mesh& mesh = trial_multi.mesh();
    const Index n_vertices = mesh.n_vertices();
    const QuadratureRule rule = quadrature_rule(4);
    const auto basis = evaluate_basis_at(ElementKind::p1, rule);

    const auto fill = [&](Index t, Triplet* slot) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangle(t);
        double local[3][3];
        local_p1_mass(geom, rule, basis, local);
        int s = 0;
        for (int i = 0; i < n; ++i) {
            const double w = alpha[i] / lambda;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    slot[s++] = {tri[static_cast<std::size_t>(r)],
                                 i * n_vertices + tri[static_cast<std::size_t>(c)],
                                 w * local[r][c]};
                }
            }
        }
    };
    return assemble_elements(test_scalar.n_dofs(), trial_multi.n_dofs(),
                             mesh.n_triangles(), n * 9, exec, fill);
}

SparseMatrix assemble_bilinear(FormKind form, const FeSpace& trial,
                               const FeSpace& test, const CoefficientSpec& coeff,
                               Exec exec) {
    for (int i = 0; i < coeff.storage.size(); ++i) {
        if (coeff.storage[i] < 0.0) {
            throw ParameterError("assemble_bilinear: negative storage coefficient");
        }
    }
    switch (form) {
    case FormKind::elasticity:
        return assemble_elasticity(trial, coeff.mu, exec);
    case FormKind::divergence:
        return assemble_divergence(trial, test, exec);
    case FormKind::scalar_mass:
        return assemble_scalar_mass(trial, 1.0 / coeff.lambda, exec);
    case FormKind::network_mass: {
        const Eigen::MatrixXd w =
            Eigen::MatrixXd(coeff.storage.asDiagonal()) +
            coeff.alpha * coeff.alpha.transpose() / coeff.lambda;
        return assemble_network_coupled_mass(trial, w, exec);
    }
    case FormKind::network_stiffness:
        return assemble_network_stiffness(trial, coeff.conductivity, exec);
    case FormKind::exchange: {
        const int n = static_cast<int>(coeff.beta.rows());
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i != j) {
                    w(i, i) += coeff.beta(i, j);
                    w(i, j) -= coeff.beta(i, j);
                }
            }
        }
        return assemble_network_coupled_mass(trial, w, exec);
    }
    case FormKind::coupling_alpha_mass:
        return assemble_coupling_alpha_mass(trial, test, coeff.alpha, coeff.lambda,
                                            exec);
    }
    throw ArgumentError("assemble_bilinear: unknown form kind");
}

namespace {

/// Deterministic parallel load assembly: per-element contributions go into
/// fixed slots, which a serial pass then accumulates in element order.
template <typename Fill>
Eigen::VectorXd assemble_load(Index n_dofs, Index n_elems, int entries_per_elem,
                              Exec exec, const Fill& fill) {
    std::vector<Index> dofs(static_cast<std::size_t>(n_elems) *
                            static_cast<std::size_t>(entries_per_elem));
    std::vector<double> contrib(dofs.size(), 0.0);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Index t = 0; t < n_elems; ++t) {
            const std::size_t base = static_cast<std::size_t>(t) *
                                     static_cast<std::size_t>(entries_per_elem);
            fill(t, &dofs[base], &contrib[base]);
        }
    } else {
        for (Index t = 0; t < n_elems; ++t) {
            const std::size_t base = static_cast<std::size_t>(t) *
                                     static_cast<std::size_t>(entries_per_elem);
            fill(t, &dofs[base], &contrib[base]);
        }
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_dofs);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
        out[dofs[i]] += contrib[i];
    }
    return out;
}

} // namespace

Eigen::VectorXd assemble_body_force(const FeSpace& space, const VectorTimeFn& f,
                                    double t, Exec exec) {
    require_kind(space, SpaceKind::vector_p2, "assemble_body_force");
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(6);
    const auto basis = evaluate_basis_at(ElementKind::p2, rule);

    const auto fill = [&](Index tri, Index* dofs, double* contrib) {
        const TriGeom geom = triangle_geometry(mesh, tri);
        const auto nodes = space.element_nodes(tri);
        double local[12] = {};
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double w = rule.weights[q] * geom.det;
            const Eigen::Vector2d value = f(physical_point(geom, rule.points[q]), t);
            for (int k = 0; k < 6; ++k) {
                const double phi = basis[q].values[static_cast<std::size_t>(k)];
                local[2 * k] += w * phi * value[0];
                local[2 * k + 1] += w * phi * value[1];
            }
        }
        for (int a = 0; a < 12; ++a) {
            dofs[a] = 2 * nodes[static_cast<std::size_t>(a / 2)] + a % 2;
            contrib[a] = local[a];
        }
    };
    return assemble_load(space.n_dofs(), mesh.n_triangles(), 12, exec, fill);
}

Eigen::VectorXd assemble_source(const FeSpace& space, const MultiTimeFn& g,
                                double t, Exec exec) {
    require_kind(space, SpaceKind::multi_scalar_p1, "assemble_source");
    const Mesh& mesh = space.mesh();
    const int n = space.n_networks();
    const Index n_vertices = mesh.n_vertices();
    const QuadratureRule rule = quadrature_rule(6);
    const auto basis = evaluate_basis_at(ElementKind::p1, rule);

    const auto fill = [&](Index tri, Index* dofs, double* contrib) {
        const TriGeom geom = triangle_geometry(mesh, tri);
        const auto& tv = mesh.triangle(tri);
        std::vector<double> local(static_cast<std::size_t>(3 * n), 0.0);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double w = rule.weights[q] * geom.det;
            const Eigen::VectorXd value = g(physical_point(geom, rule.points[q]), t);
            for (int i = 0; i < n; ++i) {
                for (int r = 0; r < 3; ++r) {
                    local[static_cast<std::size_t>(3 * i + r)] +=
                        w * basis[q].values[static_cast<std::size_t>(r)] * value[i];
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int r = 0; r < 3; ++r) {
                dofs[3 * i + r] = i * n_vertices + tv[static_cast<std::size_t>(r)];
                contrib[3 * i + r] = local[static_cast<std::size_t>(3 * i + r)];
            }
        }
    };
    return assemble_load(space.n_dofs(), mesh.n_triangles(), 3 * n, exec, fill);
}

Eigen::VectorXd assemble_boundary_traction(const FeSpace& space,
                                           std::span<const BoundaryEdge> edges,
                                           const TractionFn& h, double t) {
    require_kind(space, SpaceKind::vector_p2, "assemble_boundary_traction");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(space.n_dofs());
    if (!h) {
        return out;
    }
    const Mesh& mesh = space.mesh();
    const EdgeQuadrature rule = edge_quadrature();
    for (const BoundaryEdge& e : edges) {
        const Vec2& a = mesh.vertex(e.v0);
        const Vec2& b = mesh.vertex(e.v1);
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const Eigen::Vector2d normal((b.y - a.y) / len, -(b.x - a.x) / len);
        const Index mid = mesh.n_vertices() + space.edges().edge_id(e.v0, e.v1);
        const Index nodes[3] = {e.v0, e.v1, mid};
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double s = rule.points[q];
            const Vec2 x{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
            const Eigen::Vector2d value = h(x, t, normal);
            const double shape[3] = {(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0),
                                     4.0 * s * (1.0 - s)};
            const double w = rule.weights[q] * len;
            for (int k = 0; k < 3; ++k) {
                out[2 * nodes[k]] += w * shape[k] * value[0];
                out[2 * nodes[k] + 1] += w * shape[k] * value[1];
            }
        }
    }
    return out;
}

Eigen::VectorXd assemble_boundary_flux(const FeSpace& space, int network,
                                       std::span<const BoundaryEdge> edges,
                                       const ScalarTimeFn& l, double t) {
    require_kind(space, SpaceKind::multi_scalar_p1, "assemble_boundary_flux");
    if (network < 0 || network >= space.n_networks()) {
        throw ArgumentError("assemble_boundary_flux: network index out of range");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(space.n_dofs());
    if (!l) {
        return out;
    }
    const Mesh& mesh = space.mesh();
    const Index offset = network * mesh.n_vertices();
    const EdgeQuadrature rule = edge_quadrature();
    for (const BoundaryEdge& e : edges) {
        const Vec2& a = mesh.vertex(e.v0);
        const Vec2& b = mesh.vertex(e.v1);
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double s = rule.points[q];
            const Vec2 x{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
            const double value = l(x, t);
            const double w = rule.weights[q] * len;
            out[offset + e.v0] += w * (1.0 - s) * value;
            out[offset + e.v1] += w * s * value;
        }
    }
    return out;
}

DirichletSet::DirichletSet(std::vector<ScalarConstraint> constraints)
    : constraints_(std::move(constraints)) {
    std::stable_sort(constraints_.begin(), constraints_.end(),
                     [](const ScalarConstraint& a, const ScalarConstraint& b) {
                         return a.dof < b.dof;
                     });
    for (std::size_t i = 1; i < constraints_.size(); ++i) {
        if (constraints_[i].dof == constraints_[i - 1].dof) {
            throw ConstraintError("DirichletSet: duplicate constraint on dof " +
                                  std::to_string(constraints_[i].dof));
        }
    }
}

namespace {

/// Deduplicates constraints reached through several boundary edges; a dof
/// prescribed twice must agree at sampled times, otherwise the program is
/// contradictory.
class ConstraintCollector {
public:
    void add(Index dof, Vec2 position, std::function<double(Vec2, double)> value) {
        const auto it = seen_.find(dof);
        if (it == seen_.end()) {
            seen_.emplace(dof, constraints_.size());
            constraints_.push_back({dof, position, std::move(value)});
            return;
        }
        const ScalarConstraint& existing = constraints_[it->second];
        for (const double t : {0.0, 0.37, 1.0}) {
            const double a = existing.value(existing.position, t);
            const double b = value(position, t);
            if (std::abs(a - b) > 1e-10 * (1.0 + std::abs(a))) {
                throw ConstraintError("conflicting Dirichlet values on dof " +
                                      std::to_string(dof));
            }
        }
    }

    DirichletSet finish() { return DirichletSet(std::move(constraints_)); }

private:
    std::map<Index, std::size_t> seen_;
    std::vector<ScalarConstraint> constraints_;
};

} // namespace

DirichletSet DirichletSet::for_displacement(const FeSpace& space,
                                            const BoundaryProgram& program) {
    require_kind(space, SpaceKind::vector_p2, "DirichletSet::for_displacement");
    const Mesh& mesh = space.mesh();
    ConstraintCollector collector;
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        const DisplacementCondition& cond = program.displacement_on(e.tag);
        if (cond.kind != ConditionKind::dirichlet) {
            continue;
        }
        if (!cond.value) {
            throw ConstraintError("displacement Dirichlet on " + to_string(e.tag) +
                                  " has no value function");
        }
        const Index mid = mesh.n_vertices() + space.edges().edge_id(e.v0, e.v1);
        const Index nodes[3] = {e.v0, e.v1, mid};
        for (const Index node : nodes) {
            const Vec2 pos = space.node_position(node);
            for (int comp = 0; comp < 2; ++comp) {
                collector.add(2 * node + comp, pos,
                              [fn = cond.value, comp](Vec2 x, double t) {
                                  return fn(x, t)[comp];
                              });
            }
        }
    }
    return collector.finish();
}

DirichletSet DirichletSet::for_networks(const FeSpace& space,
                                        const BoundaryProgram& program) {
    require_kind(space, SpaceKind::multi_scalar_p1, "DirichletSet::for_networks");
    const Mesh& mesh = space.mesh();
    const Index n_vertices = mesh.n_vertices();
    ConstraintCollector collector;
    for (int network = 0; network < space.n_networks(); ++network) {
        for (const BoundaryEdge& e : mesh.boundary_edges()) {
            const PressureCondition& cond = program.pressure_on(e.tag, network);
            if (cond.kind != ConditionKind::dirichlet) {
                continue;
            }
            if (!cond.value) {
                throw ConstraintError("pressure Dirichlet on " + to_string(e.tag) +
                                      " has no value function");
            }
            for (const Index v : {e.v0, e.v1}) {
                collector.add(network * n_vertices + v, mesh.vertex(v), cond.value);
            }
        }
    }
    return collector.finish();
}

std::vector<Index> DirichletSet::dofs() const {
    std::vector<Index> out;
    out.reserve(constraints_.size());
    for (const ScalarConstraint& c : constraints_) {
        out.push_back(c.dof);
    }
    return out;
}

Eigen::VectorXd DirichletSet::values_at(double t) const {
    Eigen::VectorXd out(static_cast<Index>(constraints_.size()));
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        out[static_cast<Index>(i)] = constraints_[i].value(constraints_[i].position, t);
    }
    return out;
}

DirichletSet DirichletSet::shifted(Index offset) const {
    std::vector<ScalarConstraint> shifted = constraints_;
    for (ScalarConstraint& c : shifted) {
        c.dof += offset;
    }
    return DirichletSet(std::move(shifted));
}

DirichletSet DirichletSet::merged(std::span<const DirichletSet> sets) {
    std::vector<ScalarConstraint> all;
    for (const DirichletSet& s : sets) {
        all.insert(all.end(), s.constraints_.begin(), s.constraints_.end());
    }
    return DirichletSet(std::move(all));
}

DirichletEliminator::DirichletEliminator(const SparseMatrix& matrix,
                                         const DirichletSet& bc)
    : bc_(bc) {
    const Index n = matrix.rows();
    std::vector<Index> rank(static_cast<std::size_t>(n), -1);
    Index next = 0;
    for (const ScalarConstraint& c : bc.constraints()) {
        if (c.dof < 0 || c.dof >= n) {
            throw ConstraintError("DirichletEliminator: constrained dof outside system");
        }
        rank[static_cast<std::size_t>(c.dof)] = next++;
    }
    std::vector<Triplet> kept;
    std::vector<Triplet> lift;
    kept.reserve(static_cast<std::size_t>(matrix.nnz()));
    const auto offsets = matrix.row_offsets();
    const auto cols = matrix.column_indices();
    const auto vals = matrix.values();
    for (Index row = 0; row < n; ++row) {
        const bool row_constrained = rank[static_cast<std::size_t>(row)] >= 0;
        for (Index k = offsets[row]; k < offsets[row + 1]; ++k) {
            const Index col = cols[static_cast<std::size_t>(k)];
            const double v = vals[static_cast<std::size_t>(k)];
            const bool col_constrained = rank[static_cast<std::size_t>(col)] >= 0;
            if (!row_constrained && !col_constrained) {
                kept.push_back({row, col, v});
            } else if (!row_constrained && col_constrained) {
                lift.push_back({row, rank[static_cast<std::size_t>(col)], v});
            }
        }
    }
    for (const ScalarConstraint& c : bc.constraints()) {
        kept.push_back({c.dof, c.dof, 1.0});
    }
    eliminated_ = SparseMatrix::from_triplets(n, n, std::move(kept));
    lift_ = SparseMatrix::from_triplets(n, static_cast<Index>(bc.size()),
                                        std::move(lift));
}

void DirichletEliminator::apply(Eigen::VectorXd& rhs,
                                const Eigen::VectorXd& values) const {
    if (rhs.size() != eliminated_.rows()) {
        throw DimensionError("DirichletEliminator: rhs length mismatch");
    }
    if (values.size() != static_cast<Index>(bc_.size())) {
        throw DimensionError("DirichletEliminator: constraint value count mismatch");
    }
    if (bc_.size() == 0) {
        return;
    }
    rhs -= lift_.multiply(values);
    const auto constraints = bc_.constraints();
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        rhs[constraints[i].dof] = values[static_cast<Index>(i)];
    }
}

void DirichletEliminator::apply(Eigen::VectorXd& rhs, double t) const {
    apply(rhs, bc_.values_at(t));
}

std::pair<SparseMatrix, Eigen::VectorXd>
apply_dirichlet(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                const DirichletSet& bc, double t) {
    DirichletEliminator eliminator(matrix, bc);
    Eigen::VectorXd out = rhs;
    eliminator.apply(out, t);
    return {eliminator.eliminated(), std::move(out)};
}

Eigen::VectorXd interpolate_scalar(const FeSpace& space, const ScalarTimeFn& f,
                                   double t) {
    require_kind(space, SpaceKind::scalar_p1, "interpolate_scalar");
    Eigen::VectorXd out(space.n_dofs());
    for (Index v = 0; v < space.n_dofs(); ++v) {
        out[v] = f(space.mesh().vertex(v), t);
    }
    return out;
}

Eigen::VectorXd interpolate_vector(const FeSpace& space, const VectorTimeFn& f,
                                   double t) {
    require_kind(space, SpaceKind::vector_p2, "interpolate_vector");
    Eigen::VectorXd out(space.n_dofs());
    for (Index node = 0; node < space.n_scalar_nodes(); ++node) {
        const Eigen::Vector2d value = f(space.node_position(node), t);
        out[2 * node] = value[0];
        out[2 * node + 1] = value[1];
    }
    return out;
}

Eigen::VectorXd interpolate_multi(const FeSpace& space, const MultiTimeFn& f,
                                  double t) {
    require_kind(space, SpaceKind::multi_scalar_p1, "interpolate_multi");
    const Index n_vertices = space.mesh().n_vertices();
    Eigen::VectorXd out(space.n_dofs());
    for (Index v = 0; v < n_vertices; ++v) {
        const Eigen::VectorXd value = f(space.mesh().vertex(v), t);
        for (int i = 0; i < space.n_networks(); ++i) {
            out[i * n_vertices + v] = value[i];
        }
    }
    return out;
}

PointLocation locate_point(const Mesh& mesh, Vec2 p) {
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const TriGeom geom = triangle_geometry(mesh, t);
        const double dx = p.x - geom.v[0].x;
        const double dy = p.y - geom.v[0].y;
        const double l1 = (geom.inv_jac_t(0, 0) * dx + geom.inv_jac_t(1, 0) * dy);
        const double l2 = (geom.inv_jac_t(0, 1) * dx + geom.inv_jac_t(1, 1) * dy);
        const double l0 = 1.0 - l1 - l2;
        const double tol = -1e-10;
        if (l0 >= tol && l1 >= tol && l2 >= tol) {
            return {t, {l0, l1, l2}};
        }
    }
    throw ArgumentError("locate_point: (" + std::to_string(p.x) + ", " +
                        std::to_string(p.y) + ") is outside the mesh");
}

double evaluate_scalar(const FeSpace& space, const Eigen::VectorXd& coeffs,
                       const PointLocation& loc) {
    require_kind(space, SpaceKind::scalar_p1, "evaluate_scalar");
    if (coeffs.size() != space.n_dofs()) {
        throw DimensionError("evaluate_scalar: coefficient length mismatch");
    }
    const auto& tri = space.mesh().triangle(loc.triangle);
    double value = 0.0;
    for (int k = 0; k < 3; ++k) {
        value += loc.barycentric[static_cast<std::size_t>(k)] *
                 coeffs[tri[static_cast<std::size_t>(k)]];
    }
    return value;
}

double evaluate_network(const FeSpace& space, const Eigen::VectorXd& coeffs,
                        int network, const PointLocation& loc) {
    require_kind(space, SpaceKind::multi_scalar_p1, "evaluate_network");
    if (coeffs.size() != space.n_dofs()) {
        throw DimensionError("evaluate_network: coefficient length mismatch");
    }
    if (network < 0 || network >= space.n_networks()) {
        throw ArgumentError("evaluate_network: network index out of range");
    }
    const Index offset = network * space.mesh().n_vertices();
    const auto& tri = space.mesh().triangle(loc.triangle);
    double value = 0.0;
    for (int k = 0; k < 3; ++k) {
        value += loc.barycentric[static_cast<std::size_t>(k)] *
                 coeffs[offset + tri[static_cast<std::size_t>(k)]];
    }
    return value;
}

Eigen::Vector2d evaluate_vector(const FeSpace& space, const Eigen::VectorXd& coeffs,
                                const PointLocation& loc) {
    require_kind(space, SpaceKind::vector_p2, "evaluate_vector");
    if (coeffs.size() != space.n_dofs()) {
        throw DimensionError("evaluate_vector: coefficient length mismatch");
    }
    const BasisEval basis = reference_basis(ElementKind::p2, loc.barycentric);
    const auto nodes = space.element_nodes(loc.triangle);
    Eigen::Vector2d value = Eigen::Vector2d::Zero();
    for (int k = 0; k < 6; ++k) {
        const double phi = basis.values[static_cast<std::size_t>(k)];
        value[0] += phi * coeffs[2 * nodes[static_cast<std::size_t>(k)]];
        value[1] += phi * coeffs[2 * nodes[static_cast<std::size_t>(k)] + 1];
    }
    return value;
}

} // namespace mpet
