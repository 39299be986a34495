#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpet/fem.hpp"

using namespace mpet;

namespace {

Mesh reference_triangle_mesh() {
    return Mesh({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {{0, 1, 2}},
                {{0, 1, BoundaryTag::gamma2},
                 {1, 2, BoundaryTag::gamma1},
                 {2, 0, BoundaryTag::gamma3}});
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

/// Exact integral of x^a y^b over the reference triangle.
double monomial_integral(int a, int b) {
    return factorial(a) * factorial(b) / factorial(a + b + 2);
}

// (eps(u), eps(v)) element matrix on the reference triangle (2 mu = 1),
// exact values times 12, node order v0 v1 v2 m01 m12 m20, interleaved
// components. Generated by one-time symbolic integration.
const double kReferenceElasticity[12][12] = {
    {9, 3, 2, 1, 1, 0, -8, -4, 0, 0, -4, 0},
    {3, 9, 0, 1, 1, 2, 0, -4, 0, 0, -4, -8},
    {2, 0, 6, 0, 0, 0, -8, 0, 0, 0, 0, 0},
    {1, 1, 0, 3, -1, 0, -4, -4, 4, 0, 0, 0},
    {1, 1, 0, -1, 3, 0, 0, 0, 0, 4, -4, -4},
    {0, 2, 0, 0, 0, 6, 0, 0, 0, 0, 0, -8},
    {-8, 0, -8, -4, 0, 0, 24, 4, -8, -4, 0, 4},
    {-4, -4, 0, -4, 0, 0, 4, 24, -4, -16, 4, 0},
    {0, 0, 0, 4, 0, 0, -8, -4, 24, 4, -16, -4},
    {0, 0, 0, 0, 4, 0, -4, -16, 4, 24, -4, -8},
    {-4, -4, 0, 0, -4, 0, 0, 4, -16, -4, 24, 4},
    {0, -8, 0, 0, -4, -8, 4, 0, -4, -8, 4, 24},
};

} // namespace

TEST_CASE("reference basis has the Lagrange property") {
    const BasisEval p1 = reference_basis(ElementKind::p1, {1.0, 0.0, 0.0});
    CHECK(p1.count == 3);
    CHECK(p1.values[0] == 1.0);
    CHECK(p1.values[1] == 0.0);
    CHECK(p1.values[2] == 0.0);

    // Midpoint of local edge (0,1): node 3.
    const BasisEval p2 = reference_basis(ElementKind::p2, {0.5, 0.5, 0.0});
    CHECK(p2.count == 6);
    CHECK(p2.values[3] == 1.0);
    for (int k = 0; k < 6; ++k) {
        if (k != 3) {
            CHECK(p2.values[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
        }
    }

    const std::array<double, 3> barycenter{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (const ElementKind kind : {ElementKind::p1, ElementKind::p2}) {
        const BasisEval eval = reference_basis(kind, barycenter);
        double sum = 0.0;
        Eigen::Vector2d grad_sum = Eigen::Vector2d::Zero();
        for (int k = 0; k < eval.count; ++k) {
            sum += eval.values[static_cast<std::size_t>(k)];
            grad_sum += eval.gradients[static_cast<std::size_t>(k)];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(grad_sum.norm() <= 1e-14);
    }
}

TEST_CASE("quadrature rules integrate monomials exactly") {
    const QuadratureRule one = quadrature_rule(1);
    CHECK(one.points.size() == 1);
    CHECK(one.weights[0] == doctest::Approx(0.5).epsilon(1e-15));

    for (int degree = 1; degree <= 6; ++degree) {
        const QuadratureRule rule = quadrature_rule(degree);
        double weight_sum = 0.0;
        for (double w : rule.weights) {
            weight_sum += w;
        }
        CHECK(weight_sum == doctest::Approx(0.5).epsilon(1e-14));
        for (int a = 0; a + 0 <= degree; ++a) {
            for (int b = 0; a + b <= degree; ++b) {
                double integral = 0.0;
                for (std::size_t q = 0; q < rule.points.size(); ++q) {
                    const double x = rule.points[q][1];
                    const double y = rule.points[q][2];
                    integral += rule.weights[q] * std::pow(x, a) * std::pow(y, b);
                }
                CHECK(integral ==
                      doctest::Approx(monomial_integral(a, b)).epsilon(1e-13));
            }
        }
    }
    // x^3 y^3 with the degree-6 rule: 3! 3! / 8! = 1/1120.
    const QuadratureRule six = quadrature_rule(6);
    double integral = 0.0;
    for (std::size_t q = 0; q < six.points.size(); ++q) {
        integral += six.weights[q] * std::pow(six.points[q][1], 3) *
                    std::pow(six.points[q][2], 3);
    }
    CHECK(std::abs(integral - 1.0 / 1120.0) <= 1e-14);

    CHECK_THROWS_AS(quadrature_rule(0), ArgumentError);
    CHECK_THROWS_AS(quadrature_rule(7), ArgumentError);
}

TEST_CASE("space dimensions") {
    const Mesh mesh = unit_square_mesh(2);
    const EdgeTable edges(mesh);
    const FeSpace v = FeSpace::vector_p2(mesh);
    CHECK(v.n_dofs() == 2 * (mesh.n_vertices() + edges.n_edges()));
    const FeSpace s = FeSpace::scalar_p1(mesh);
    CHECK(s.n_dofs() == mesh.n_vertices());
    const FeSpace m = FeSpace::multi_scalar_p1(mesh, 3);
    CHECK(m.n_dofs() == 3 * mesh.n_vertices());
    CHECK(m.components() == 3);
}

TEST_CASE("elasticity matches the symbolic element matrix") {
    const Mesh mesh = reference_triangle_mesh();
    const FeSpace v = FeSpace::vector_p2(mesh);
    const SparseMatrix a = assemble_elasticity(v, 0.5); // 2 mu = 1
    REQUIRE(a.rows() == 12);
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            CHECK(a.coeff(i, j) ==
                  doctest::Approx(kReferenceElasticity[i][j] / 12.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("symmetric forms are symmetric") {
    const Mesh mesh = unit_square_mesh(3);
    const FeSpace v = FeSpace::vector_p2(mesh);
    const FeSpace multi = FeSpace::multi_scalar_p1(mesh, 2);
    Eigen::VectorXd alpha(2), c(2), K(2);
    alpha << 1.0, 1.0;
    c << 1.0, 1.0;
    K << 1.0, 1.0;
    Eigen::MatrixXd beta(2, 2);
    beta << 0.0, 1.0, 1.0, 0.0;
    const CoefficientSpec coeff{0.5, 1.0, alpha, c, K, beta};

    for (const FormKind form : {FormKind::elasticity, FormKind::network_mass,
                                FormKind::network_stiffness, FormKind::exchange}) {
        const FeSpace& space = form == FormKind::elasticity ? v : multi;
        const SparseMatrix m = assemble_bilinear(form, space, space, coeff);
        const SparseMatrix mt = m.transposed();
        double max_diff = 0.0;
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
                const Index j = m.column_indices()[static_cast<std::size_t>(k)];
                max_diff = std::max(
                    max_diff, std::abs(m.values()[static_cast<std::size_t>(k)] -
                                       mt.coeff(i, j)));
            }
        }
        CHECK(max_diff <= 1e-13 * std::max(1e-30, m.max_abs()));
    }
}

TEST_CASE("scalar mass entries sum to the domain area") {
    const Mesh mesh = unit_square_mesh(2);
    const FeSpace s = FeSpace::scalar_p1(mesh);
    const SparseMatrix m = assemble_scalar_mass(s, 1.0);
    double sum = 0.0;
    for (double v : m.values()) {
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("exchange form annihilates equal network pressures") {
    const Mesh mesh = unit_square_mesh(3);
    const FeSpace multi = FeSpace::multi_scalar_p1(mesh, 2);
    Eigen::MatrixXd beta(2, 2);
    beta << 0.0, 1.0, 1.0, 0.0;
    CoefficientSpec coeff;
    coeff.lambda = 1.0;
    coeff.alpha = Eigen::VectorXd::Ones(2);
    coeff.storage = Eigen::VectorXd::Ones(2);
    coeff.conductivity = Eigen::VectorXd::Ones(2);
    coeff.beta = beta;
    const SparseMatrix b = assemble_bilinear(FormKind::exchange, multi, multi, coeff);
    const Eigen::VectorXd equal = 3.7 * Eigen::VectorXd::Ones(multi.n_dofs());
    CHECK(std::abs(equal.dot(b.multiply(equal))) <= 1e-13 * b.max_abs());

    // Unequal constants give the exact closed-form value
    // beta12 * |Omega| * (p1 - p2)^2.
    Eigen::VectorXd unequal(multi.n_dofs());
    unequal.head(mesh.n_vertices()).setConstant(2.0);
    unequal.tail(mesh.n_vertices()).setConstant(-1.0);
    CHECK(unequal.dot(b.multiply(unequal)) == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("network stiffness vanishes on constants and rejects bad coefficients") {
    const Mesh mesh = unit_square_mesh(3);
    const FeSpace multi = FeSpace::multi_scalar_p1(mesh, 2);
    Eigen::VectorXd K(2);
    K << 1.0, 1e-6;
    const SparseMatrix a = assemble_network_stiffness(multi, K);
    const Eigen::VectorXd constant = Eigen::VectorXd::Ones(multi.n_dofs());
    CHECK(std::abs(constant.dot(a.multiply(constant))) <= 1e-14);

    Eigen::VectorXd bad(2);
    bad << 1.0, -1.0;
    CHECK_THROWS_AS(assemble_network_stiffness(multi, bad), ParameterError);
}

TEST_CASE("rigid body modes carry no elastic energy") {
    const Mesh mesh = refine_uniform(unit_square_mesh(2));
    const FeSpace v = FeSpace::vector_p2(mesh);
    const SparseMatrix a = assemble_elasticity(v, 0.7);
    const VectorTimeFn modes[3] = {
        [](Vec2, double) { return Eigen::Vector2d(1.0, 0.0); },
        [](Vec2, double) { return Eigen::Vector2d(0.0, 1.0); },
        [](Vec2 p, double) { return Eigen::Vector2d(-p.y, p.x); },
    };
    for (const auto& mode : modes) {
        const Eigen::VectorXd u = interpolate_vector(v, mode, 0.0);
        CHECK(std::abs(u.dot(a.multiply(u))) <=
              1e-12 * std::max(1.0, u.squaredNorm()) * a.max_abs());
    }
}

TEST_CASE("divergence form integrates div u exactly") {
    const Mesh mesh = unit_square_mesh(3);
    const FeSpace v = FeSpace::vector_p2(mesh);
    const FeSpace s = FeSpace::scalar_p1(mesh);
    const SparseMatrix d = assemble_divergence(v, s);
    const Eigen::VectorXd u = interpolate_vector(
        v, [](Vec2 p, double) { return Eigen::Vector2d(p.x, p.y); }, 0.0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.n_dofs());
    CHECK(ones.dot(d.multiply(u)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("load functionals") {
    const Mesh mesh = unit_square_mesh(2);
    const FeSpace v = FeSpace::vector_p2(mesh);
    const FeSpace multi = FeSpace::multi_scalar_p1(mesh, 2);

    const Eigen::VectorXd zero = assemble_body_force(
        v, [](Vec2, double) { return Eigen::Vector2d::Zero().eval(); }, 0.0);
    CHECK(zero.norm() == 0.0);

    const Eigen::VectorXd source = assemble_source(
        multi, [](Vec2, double) { return Eigen::VectorXd::Ones(2).eval(); }, 0.0);
    CHECK(source.head(mesh.n_vertices()).sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(source.tail(mesh.n_vertices()).sum() == doctest::Approx(1.0).epsilon(1e-13));

    const auto gamma1 = boundary_edges_with_tag(mesh, BoundaryTag::gamma1);
    const Eigen::VectorXd traction = assemble_boundary_traction(
        v, gamma1,
        [](Vec2, double, Eigen::Vector2d) { return Eigen::Vector2d(1.0, 0.0); },
        0.0);
    double x_sum = 0.0, y_sum = 0.0;
    for (Index node = 0; node < v.n_scalar_nodes(); ++node) {
        x_sum += traction[2 * node];
        y_sum += traction[2 * node + 1];
    }
    CHECK(x_sum == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(y_sum == 0.0);

    const auto gamma2 = boundary_edges_with_tag(mesh, BoundaryTag::gamma2);
    const Eigen::VectorXd flux = assemble_boundary_flux(
        multi, 1, gamma2, [](Vec2, double) { return 2.0; }, 0.0);
    CHECK(flux.head(mesh.n_vertices()).norm() == 0.0);
    CHECK(flux.sum() == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("traction consistency: interpolated quadratic displacement") {
    // With u quadratic the P2 interpolant is exact, so A u must equal the
    // body-force plus full-boundary-traction load exactly.
    const Mesh mesh = unit_square_mesh(1);
    const FeSpace v = FeSpace::vector_p2(mesh);
    const double mu = 0.8;
    const SparseMatrix a = assemble_elasticity(v, mu);
    const auto exact = [](Vec2 p, double) {
        return Eigen::Vector2d(p.x * p.x, p.x * p.y);
    };
    // eps(u) = [[2x, y/2], [y/2, x]], -2 mu div(eps(u)) = -2 mu (2.5, 0).
    const Eigen::VectorXd u = interpolate_vector(v, exact, 0.0);
    const Eigen::VectorXd f = assemble_body_force(
        v,
        [mu](Vec2, double) { return Eigen::Vector2d(-2.0 * mu * 2.5, 0.0); },
        0.0);
    const TractionFn h = [mu](Vec2 p, double, Eigen::Vector2d n) {
        Eigen::Matrix2d strain;
        strain << 2.0 * p.x, 0.5 * p.y, 0.5 * p.y, p.x;
        return (2.0 * mu * strain * n).eval();
    };
    const Eigen::VectorXd t =
        assemble_boundary_traction(v, mesh.boundary_edges(), h, 0.0);
    const Eigen::VectorXd residual = a.multiply(u) - f - t;
    CHECK(residual.lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("assembly is identical across execution policies") {
    const Mesh mesh = unit_square_mesh(4);
    const FeSpace v = FeSpace::vector_p2(mesh);
    const SparseMatrix serial = assemble_elasticity(v, 0.3, Exec::serial);
    const SparseMatrix parallel = assemble_elasticity(v, 0.3, Exec::parallel);
    REQUIRE(serial.nnz() == parallel.nnz());
    for (std::size_t k = 0; k < serial.values().size(); ++k) {
        CHECK(serial.values()[k] == parallel.values()[k]);
    }
}

TEST_CASE("dirichlet elimination") {
    const Mesh mesh = unit_square_mesh(3);
    const FeSpace s = FeSpace::multi_scalar_p1(mesh, 1);
    const SparseMatrix a = assemble_network_stiffness(s, Eigen::VectorXd::Ones(1));

    SUBCASE("no constraints leaves the system unchanged") {
        const DirichletSet none;
        const auto [m, rhs] =
            apply_dirichlet(a, Eigen::VectorXd::Ones(a.rows()), none, 0.0);
        CHECK(m.nnz() == a.nnz());
        for (std::size_t k = 0; k < a.values().size(); ++k) {
            CHECK(m.values()[k] == a.values()[k]);
        }
        CHECK(rhs.sum() == doctest::Approx(a.rows()));
    }

    SUBCASE("all dofs constrained gives the identity") {
        std::vector<ScalarConstraint> all;
        for (Index i = 0; i < a.rows(); ++i) {
            all.push_back({i, {0, 0}, [](Vec2, double) { return 0.0; }});
        }
        const DirichletSet bc(std::move(all));
        const auto [m, rhs] =
            apply_dirichlet(a, Eigen::VectorXd::Ones(a.rows()), bc, 0.0);
        CHECK(m.nnz() == a.rows());
        CHECK(rhs.norm() == 0.0);
        for (Index i = 0; i < a.rows(); ++i) {
            CHECK(m.coeff(i, i) == 1.0);
        }
    }

    SUBCASE("P1 Laplace reproduces a linear field exactly") {
        // u = x is in the space; with u = x prescribed on the whole
        // boundary and zero source the discrete solution is exact.
        std::vector<ScalarConstraint> constraints;
        std::vector<bool> on_boundary(static_cast<std::size_t>(mesh.n_vertices()), false);
        for (const BoundaryEdge& e : mesh.boundary_edges()) {
            on_boundary[static_cast<std::size_t>(e.v0)] = true;
            on_boundary[static_cast<std::size_t>(e.v1)] = true;
        }
        for (Index vtx = 0; vtx < mesh.n_vertices(); ++vtx) {
            if (on_boundary[static_cast<std::size_t>(vtx)]) {
                constraints.push_back(
                    {vtx, mesh.vertex(vtx), [](Vec2 p, double) { return p.x; }});
            }
        }
        const DirichletSet bc(std::move(constraints));
        const auto [m, rhs] =
            apply_dirichlet(a, Eigen::VectorXd::Zero(a.rows()), bc, 0.0);
        const Factorization lu(m);
        const Eigen::VectorXd sol = lu.solve(rhs);
        for (Index vtx = 0; vtx < mesh.n_vertices(); ++vtx) {
            CHECK(sol[vtx] == doctest::Approx(mesh.vertex(vtx).x).epsilon(1e-10));
        }
    }
}

TEST_CASE("conflicting dirichlet prescriptions are rejected") {
    const Mesh mesh = unit_square_mesh(2);
    const FeSpace multi = FeSpace::multi_scalar_p1(mesh, 1);
    BoundaryProgram program = pure_dirichlet_program(
        {BoundaryTag::gamma1, BoundaryTag::gamma2, BoundaryTag::gamma3,
         BoundaryTag::gamma4},
        1);
    // The corner (1, 0) belongs to both Gamma1 and Gamma2; prescribing
    // different constants there is contradictory.
    program.pressure[BoundaryTag::gamma1][0] = {ConditionKind::dirichlet,
                                                [](Vec2, double) { return 1.0; }};
    CHECK_THROWS_AS(DirichletSet::for_networks(multi, program), ConstraintError);
}

TEST_CASE("point location and evaluation") {
    const Mesh mesh = unit_square_mesh(4);
    const FeSpace s = FeSpace::scalar_p1(mesh);
    const FeSpace v = FeSpace::vector_p2(mesh);

    const Eigen::VectorXd coeffs = interpolate_scalar(
        s, [](Vec2 p, double) { return 3.0 * p.x + p.y; }, 0.0);
    const PointLocation loc = locate_point(mesh, {0.3, 0.6});
    CHECK(evaluate_scalar(s, coeffs, loc) == doctest::Approx(1.5).epsilon(1e-13));

    // Evaluation at a mesh vertex returns exactly the nodal coefficient.
    const Vec2 vertex = mesh.vertex(7);
    const PointLocation at_vertex = locate_point(mesh, vertex);
    CHECK(evaluate_scalar(s, coeffs, at_vertex) == coeffs[7]);

    const Eigen::VectorXd vc = interpolate_vector(
        v, [](Vec2 p, double) { return Eigen::Vector2d(p.x * p.y, p.x - p.y); },
        0.0);
    const Eigen::Vector2d value = evaluate_vector(v, vc, loc);
    CHECK(value[0] == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(value[1] == doctest::Approx(-0.3).epsilon(1e-12));

    CHECK_THROWS_AS(locate_point(mesh, {2.0, 0.5}), ArgumentError);
}
