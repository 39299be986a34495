#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mpet/linalg.hpp"
#include "mpet/mesh.hpp"
#include "mpet/model.hpp"

namespace mpet {

enum class ElementKind { p1, p2 };

/// Values and reference-coordinate gradients of the Lagrange basis at one
/// barycentric point (lambda0 = 1 - x - y, lambda1 = x, lambda2 = y).
/// P1 fills 3 entries, P2 fills 6 (vertices, then midpoints of the local
/// edges (0,1), (1,2), (2,0)).
struct BasisEval {
    int count = 0;
    std::array<double, 6> values{};
    std::array<Eigen::Vector2d, 6> gradients{};
};

BasisEval reference_basis(ElementKind kind, const std::array<double, 3>& barycentric);

/// Symmetric rule on the reference triangle; weights sum to 1/2.
struct QuadratureRule {
    int degree = 0;
    std::vector<std::array<double, 3>> points; ///< barycentric
    std::vector<double> weights;
};

/// Smallest tabulated symmetric Gauss rule with at least the requested
/// exactness degree (1..6).
QuadratureRule quadrature_rule(int degree);

/// Gauss-Legendre rule on [0, 1] with exactness 2n-1.
struct EdgeQuadrature {
    std::vector<double> points;
    std::vector<double> weights;
};
EdgeQuadrature edge_quadrature();

enum class SpaceKind { vector_p2, scalar_p1, multi_scalar_p1 };

/// Finite element space over a mesh. The P2 scalar nodes are the mesh
/// vertices followed by the edge midpoints; vector dofs interleave the two
/// components per node; multi-network dofs are blocked network by network.
class FeSpace {
public:
    static FeSpace vector_p2(const Mesh& mesh);
    static FeSpace scalar_p1(const Mesh& mesh);
    static FeSpace multi_scalar_p1(const Mesh& mesh, int n_networks);

    SpaceKind kind() const { return kind_; }
    const Mesh& mesh() const { return *mesh_; }
    Index n_dofs() const { return n_dofs_; }
    int components() const;
    int n_networks() const { return n_networks_; }

    const EdgeTable& edges() const;
    Index n_scalar_nodes() const { return n_scalar_nodes_; }

    /// Scalar node ids of a triangle: 3 for P1, 6 for P2.
    std::array<Index, 6> element_nodes(Index triangle) const;
    Vec2 node_position(Index scalar_node) const;

private:
    FeSpace(SpaceKind kind, const Mesh& mesh, int n_networks);

    SpaceKind kind_;
    const Mesh* mesh_;
    std::shared_ptr<const EdgeTable> edge_table_;
    int n_networks_ = 1;
    Index n_scalar_nodes_ = 0;
    Index n_dofs_ = 0;
};

/// Coefficients consumed by the bilinear-form kernels.
struct CoefficientSpec {
    double mu = 0.0;
    double lambda = 0.0;
    Eigen::VectorXd alpha;
    Eigen::VectorXd storage;      ///< c_i
    Eigen::VectorXd conductivity; ///< K_i
    Eigen::MatrixXd beta;

    static CoefficientSpec from(const MpetParameters& params);
};

enum class FormKind {
    elasticity,          ///< 2 mu (eps(u), eps(v)) on VectorP2 x VectorP2
    divergence,          ///< (div u, eta) on VectorP2 x ScalarP1
    scalar_mass,         ///< (1/lambda) (xi, eta) on ScalarP1 x ScalarP1
    network_mass,        ///< ((S + alpha alpha^T / lambda) p, q)
    network_stiffness,   ///< (K grad p, grad q), block diagonal
    exchange,            ///< (B p, q)
    coupling_alpha_mass, ///< (1/lambda) (alpha^T p, eta) on MultiP1 x ScalarP1
};

/// Rows of the result span the test space, columns the trial space.
SparseMatrix assemble_bilinear(FormKind form, const FeSpace& trial,
                               const FeSpace& test, const CoefficientSpec& coeff,
                               Exec exec = Exec::parallel);

// Typed kernels behind the dispatcher.
SparseMatrix assemble_elasticity(const FeSpace& space, double mu,
                                 Exec exec = Exec::parallel);
SparseMatrix assemble_divergence(const FeSpace& trial_vector,
                                 const FeSpace& test_scalar,
                                 Exec exec = Exec::parallel);
SparseMatrix assemble_scalar_mass(const FeSpace& space, double weight,
                                  Exec exec = Exec::parallel);
/// Mass matrix coupling networks at each vertex with weights W (N x N);
/// realizes both the (S + alpha alpha^T / lambda) mass and the exchange
/// form (W = graph Laplacian of beta).
SparseMatrix assemble_network_coupled_mass(const FeSpace& space,
                                           const Eigen::MatrixXd& weights,
                                           Exec exec = Exec::parallel);
SparseMatrix assemble_network_stiffness(const FeSpace& space,
                                        const Eigen::VectorXd& conductivity,
                                        Exec exec = Exec::parallel);
SparseMatrix assemble_coupling_alpha_mass(const FeSpace& trial_multi,
                                          const FeSpace& test_scalar,
                                          const Eigen::VectorXd& alpha,
                                          double lambda,
                                          Exec exec = Exec::parallel);

enum class LoadKind { body_force, source, boundary_traction, boundary_flux };

Eigen::VectorXd assemble_body_force(const FeSpace& space, const VectorTimeFn& f,
                                    double t, Exec exec = Exec::parallel);
Eigen::VectorXd assemble_source(const FeSpace& space, const MultiTimeFn& g,
                                double t, Exec exec = Exec::parallel);
Eigen::VectorXd assemble_boundary_traction(const FeSpace& space,
                                           std::span<const BoundaryEdge> edges,
                                           const TractionFn& h, double t);
Eigen::VectorXd assemble_boundary_flux(const FeSpace& space, int network,
                                       std::span<const BoundaryEdge> edges,
                                       const ScalarTimeFn& l, double t);

/// One scalar Dirichlet constraint: a dof, its node position, and the
/// prescribed value as a function of time.
struct ScalarConstraint {
    Index dof = 0;
    Vec2 position;
    std::function<double(Vec2, double)> value;
};

/// Set of Dirichlet constraints for one field, sorted by dof. Conflicting
/// prescriptions of the same dof raise ConstraintError at build time.
class DirichletSet {
public:
    DirichletSet() = default;
    explicit DirichletSet(std::vector<ScalarConstraint> constraints);

    static DirichletSet for_displacement(const FeSpace& space,
                                         const BoundaryProgram& program);
    static DirichletSet for_networks(const FeSpace& space,
                                     const BoundaryProgram& program);

    std::size_t size() const { return constraints_.size(); }
    bool empty() const { return constraints_.empty(); }
    std::span<const ScalarConstraint> constraints() const { return constraints_; }
    std::vector<Index> dofs() const;
    Eigen::VectorXd values_at(double t) const;

    /// Same constraints with all dofs shifted (for monolithic systems).
    DirichletSet shifted(Index offset) const;
    static DirichletSet merged(std::span<const DirichletSet> sets);

private:
    std::vector<ScalarConstraint> constraints_;
};

/// Symmetric elimination of Dirichlet dofs, split so the (time-independent)
/// matrix is eliminated once while right-hand-side lifts are recomputed for
/// every time level.
class DirichletEliminator {
public:
    DirichletEliminator(const SparseMatrix& matrix, const DirichletSet& bc);

    const SparseMatrix& eliminated() const { return eliminated_; }

    /// rhs -= (original columns) * values for free rows; rhs[dof] = value.
    void apply(Eigen::VectorXd& rhs, const Eigen::VectorXd& values) const;
    void apply(Eigen::VectorXd& rhs, double t) const;

    const DirichletSet& constraints() const { return bc_; }

private:
    DirichletSet bc_;
    SparseMatrix eliminated_;
    SparseMatrix lift_; ///< n x n_constrained, free rows of constrained columns
};

/// One-shot symmetric elimination on an assembled system.
std::pair<SparseMatrix, Eigen::VectorXd>
apply_dirichlet(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                const DirichletSet& bc, double t);

// Nodal (Lagrange) interpolation.
Eigen::VectorXd interpolate_scalar(const FeSpace& space, const ScalarTimeFn& f,
                                   double t);
Eigen::VectorXd interpolate_vector(const FeSpace& space, const VectorTimeFn& f,
                                   double t);
Eigen::VectorXd interpolate_multi(const FeSpace& space, const MultiTimeFn& f,
                                  double t);

/// Location of a physical point inside the mesh.
struct PointLocation {
    Index triangle = 0;
    std::array<double, 3> barycentric{};
};
PointLocation locate_point(const Mesh& mesh, Vec2 p);

double evaluate_scalar(const FeSpace& space, const Eigen::VectorXd& coeffs,
                       const PointLocation& loc);
double evaluate_network(const FeSpace& space, const Eigen::VectorXd& coeffs,
                        int network, const PointLocation& loc);
Eigen::Vector2d evaluate_vector(const FeSpace& space, const Eigen::VectorXd& coeffs,
                                const PointLocation& loc);

} // namespace mpet
