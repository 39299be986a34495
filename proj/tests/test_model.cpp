#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mpet/model.hpp"

using namespace mpet;

namespace {

MpetParameters two_network_params(double nu, double conductivity, double storage) {
    Eigen::VectorXd alpha(2), c(2), K(2);
    alpha << 1.0, 1.0;
    c << storage, storage;
    K << conductivity, conductivity;
    Eigen::MatrixXd beta(2, 2);
    beta << 0.0, 1.0, 1.0, 0.0;
    return MpetParameters::make(1.0, nu, alpha, c, K, beta);
}

// First-stage oracle: the analytic gradients must match centered
// differences of the field values.
void check_gradients(const ManufacturedCase& mcase, std::mt19937& rng) {
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    std::uniform_real_distribution<double> time(0.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        const Vec2 x{coord(rng), coord(rng)};
        const double t = time(rng);

        const Eigen::Matrix2d grad = mcase.displacement_gradient(x, t);
        const Eigen::Vector2d ux = (mcase.displacement({x.x + h, x.y}, t) -
                                    mcase.displacement({x.x - h, x.y}, t)) /
                                   (2 * h);
        const Eigen::Vector2d uy = (mcase.displacement({x.x, x.y + h}, t) -
                                    mcase.displacement({x.x, x.y - h}, t)) /
                                   (2 * h);
        CHECK(std::abs(grad(0, 0) - ux[0]) <= 1e-6);
        CHECK(std::abs(grad(1, 0) - ux[1]) <= 1e-6);
        CHECK(std::abs(grad(0, 1) - uy[0]) <= 1e-6);
        CHECK(std::abs(grad(1, 1) - uy[1]) <= 1e-6);
        CHECK(std::abs(mcase.div_displacement(x, t) - (grad(0, 0) + grad(1, 1))) <=
              1e-12);

        const Eigen::MatrixXd pg = mcase.pressure_gradient(x, t);
        const Eigen::VectorXd px = (mcase.pressure({x.x + h, x.y}, t) -
                                    mcase.pressure({x.x - h, x.y}, t)) /
                                   (2 * h);
        const Eigen::VectorXd py = (mcase.pressure({x.x, x.y + h}, t) -
                                    mcase.pressure({x.x, x.y - h}, t)) /
                                   (2 * h);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(pg(i, 0) - px[i]) <= 1e-6);
            CHECK(std::abs(pg(i, 1) - py[i]) <= 1e-6);
        }

        const Eigen::Vector2d xig = mcase.total_pressure_gradient(x, t);
        const double xx = (mcase.total_pressure({x.x + h, x.y}, t) -
                           mcase.total_pressure({x.x - h, x.y}, t)) /
                          (2 * h);
        const double xy = (mcase.total_pressure({x.x, x.y + h}, t) -
                           mcase.total_pressure({x.x, x.y - h}, t)) /
                          (2 * h);
        CHECK(std::abs(xig[0] - xx) <= 1e-6);
        CHECK(std::abs(xig[1] - xy) <= 1e-6);
    }
}

// Second-stage oracle (the pre-build gate): substitute the fields into the
// strong equations with all remaining derivatives taken by centered
// differences of step 1e-5, and compare against the closed-form loads.
void check_strong_form(const ManufacturedCase& mcase, std::mt19937& rng) {
    const MpetParameters& prm = mcase.params();
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    std::uniform_real_distribution<double> time(0.0, 1.0);
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        const Vec2 x{coord(rng), coord(rng)};
        const double t = time(rng);

        // Momentum equation: -2 mu div(eps(u)) + grad(xi) = f.
        const auto strain = [&](Vec2 q) {
            const Eigen::Matrix2d g = mcase.displacement_gradient(q, t);
            return (0.5 * (g + g.transpose())).eval();
        };
        const Eigen::Matrix2d ex = (strain({x.x + h, x.y}) - strain({x.x - h, x.y})) / (2 * h);
        const Eigen::Matrix2d ey = (strain({x.x, x.y + h}) - strain({x.x, x.y - h})) / (2 * h);
        const Eigen::Vector2d div_strain(ex(0, 0) + ey(0, 1), ex(1, 0) + ey(1, 1));
        const Eigen::Vector2d grad_xi(
            (mcase.total_pressure({x.x + h, x.y}, t) -
             mcase.total_pressure({x.x - h, x.y}, t)) /
                (2 * h),
            (mcase.total_pressure({x.x, x.y + h}, t) -
             mcase.total_pressure({x.x, x.y - h}, t)) /
                (2 * h));
        const Eigen::Vector2d momentum_residual =
            -2.0 * prm.mu * div_strain + grad_xi - mcase.body_force(x, t);
        CHECK(momentum_residual.lpNorm<Eigen::Infinity>() <= 1e-6);

        // Network equation: alpha div(du/dt) + S dp/dt + B p - div(K grad p) = g.
        const double div_u_dot =
            (mcase.div_displacement(x, t + h) - mcase.div_displacement(x, t - h)) /
            (2 * h);
        const Eigen::VectorXd p_dot =
            (mcase.pressure(x, t + h) - mcase.pressure(x, t - h)) / (2 * h);
        const Eigen::MatrixXd gpx = (mcase.pressure_gradient({x.x + h, x.y}, t) -
                                     mcase.pressure_gradient({x.x - h, x.y}, t)) /
                                    (2 * h);
        const Eigen::MatrixXd gpy = (mcase.pressure_gradient({x.x, x.y + h}, t) -
                                     mcase.pressure_gradient({x.x, x.y - h}, t)) /
                                    (2 * h);
        const Eigen::VectorXd p = mcase.pressure(x, t);
        const Eigen::VectorXd g = mcase.source(x, t);
        for (int i = 0; i < 2; ++i) {
            double exchange = 0.0;
            for (int j = 0; j < 2; ++j) {
                exchange += prm.beta(i, j) * (p[i] - p[j]);
            }
            const double laplacian = gpx(i, 0) + gpy(i, 1);
            const double residual = prm.alpha[i] * div_u_dot + prm.c[i] * p_dot[i] +
                                    exchange - prm.K[i] * laplacian - g[i];
            CHECK(std::abs(residual) <= 1e-6);
        }
    }
}

} // namespace

TEST_CASE("derive_lame") {
    const auto [l1, m1] = derive_lame(1.0, 0.3);
    CHECK(l1 == doctest::Approx(0.5769230769230769).epsilon(1e-14));
    CHECK(m1 == doctest::Approx(0.3846153846153846).epsilon(1e-14));

    const auto [l2, m2] = derive_lame(1.0, 0.0);
    CHECK(l2 == 0.0);
    CHECK(m2 == 0.5);

    const auto [l3, m3] = derive_lame(1.0, 0.49999);
    CHECK(l3 == doctest::Approx(1.66664e4).epsilon(1e-4));
    CHECK(m3 == doctest::Approx(0.333336).epsilon(1e-5));

    CHECK_THROWS_AS(derive_lame(1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(derive_lame(-1.0, 0.3), ParameterError);
}

TEST_CASE("parameter validation") {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(2, 2);
    CHECK_NOTHROW(MpetParameters::make(1.0, 0.3, ones, ones, ones, beta));

    Eigen::VectorXd bad_alpha(2);
    bad_alpha << 1.5, 1.0;
    CHECK_THROWS_AS(MpetParameters::make(1.0, 0.3, bad_alpha, ones, ones, beta),
                    ParameterError);
    Eigen::VectorXd bad_c(2);
    bad_c << -1.0, 0.0;
    CHECK_THROWS_AS(MpetParameters::make(1.0, 0.3, ones, bad_c, ones, beta),
                    ParameterError);
    Eigen::MatrixXd asym = beta;
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(MpetParameters::make(1.0, 0.3, ones, ones, ones, asym),
                    ParameterError);
}

TEST_CASE("contraction factor") {
    const MpetParameters params = two_network_params(0.3, 1.0, 1.0);
    CHECK(contraction_factor(params) == doctest::Approx(0.77612).epsilon(1e-5));
    CHECK(contraction_factor(params) ==
          doctest::Approx(0.7761194029850746).epsilon(1e-14));

    // Degenerate storage: the bound is exactly 1.
    CHECK(contraction_factor(two_network_params(0.3, 1.0, 0.0)) == 1.0);

    // delta -> infinity drives the factor to 0.
    CHECK(contraction_factor(two_network_params(0.3, 1.0, 1e12)) < 1e-11);

    // Monotone decreasing in delta, increasing in |alpha|^2 / lambda.
    double previous = 2.0;
    for (const double storage : {0.0, 0.5, 1.0, 5.0, 50.0}) {
        const double factor = contraction_factor(two_network_params(0.3, 1.0, storage));
        CHECK(factor < previous);
        previous = factor;
    }
    const double low_lambda = contraction_factor(two_network_params(0.3, 1.0, 1.0));
    const double high_lambda = contraction_factor(two_network_params(0.45, 1.0, 1.0));
    CHECK(high_lambda < low_lambda); // larger lambda shrinks |alpha|^2/lambda
}

TEST_CASE("manufactured fields") {
    const ManufacturedCase mcase(two_network_params(0.3, 1.0, 1.0));

    // Fields vanish on the boundary of the unit square.
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const double s = coord(rng);
        for (const Vec2 x : {Vec2{0.0, s}, Vec2{1.0, s}, Vec2{s, 0.0}, Vec2{s, 1.0}}) {
            CHECK(mcase.displacement(x, 0.7).norm() <= 1e-14);
            CHECK(mcase.pressure(x, 0.7).norm() <= 1e-14);
        }
    }

    // At t = 0 the displacement vanishes and p1 = -sin(pi x) sin(pi y).
    CHECK(mcase.displacement({0.3, 0.4}, 0.0).norm() == 0.0);
    CHECK(mcase.pressure({0.3, 0.4}, 0.0)[0] ==
          doctest::Approx(-std::sin(0.3 * M_PI) * std::sin(0.4 * M_PI)).epsilon(1e-14));

    // Direct substitution at (1/2, 1/2, pi/2): u1 = 1/(mu+lambda) = 1.04.
    const Eigen::Vector2d u = mcase.displacement({0.5, 0.5}, M_PI / 2);
    CHECK(u[0] == doctest::Approx(1.04).epsilon(1e-12));
    CHECK(std::abs(mcase.pressure({0.5, 0.5}, M_PI / 2)[0]) <= 1e-15);

    // p2 = 2 p1 everywhere.
    const Eigen::VectorXd p = mcase.pressure({0.21, 0.68}, 0.43);
    CHECK(p[1] == doctest::Approx(2.0 * p[0]).epsilon(1e-14));

    CHECK_THROWS_AS(ManufacturedCase(physiological_preset().first), ParameterError);
}

TEST_CASE("manufactured loads satisfy the strong equations (FD oracle)") {
    // The pre-build gate for the closed-form loads, run for every
    // parameter family used in the accuracy tables.
    std::mt19937 rng(2024);
    for (const auto& [nu, K, c] :
         {std::tuple{0.3, 1.0, 1.0}, std::tuple{0.49999, 1.0, 1.0},
          std::tuple{0.3, 1e-6, 1.0}, std::tuple{0.3, 1.0, 0.0}}) {
        const ManufacturedCase mcase(two_network_params(nu, K, c));
        check_gradients(mcase, rng);
        check_strong_form(mcase, rng);
    }
}

TEST_CASE("time factor structure of the source at t = 0") {
    const ManufacturedCase mcase(two_network_params(0.3, 1.0, 1.0));
    const MpetParameters& prm = mcase.params();
    const Vec2 x{0.37, 0.58};
    // At t = 0 the storage contribution vanishes with sin(0) while the
    // div(du/dt) part enters with cos(0) = 1.
    const Eigen::VectorXd g = mcase.source(x, 0.0);
    const double kappa = 1.0 / (prm.mu + prm.lambda);
    const double sxy = std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
    const double div_u_dot = kappa * M_PI * std::sin(M_PI * (x.x + x.y));
    const double expected_g1 = prm.alpha[0] * div_u_dot + prm.beta(0, 1) * sxy -
                               2.0 * M_PI * M_PI * prm.K[0] * sxy;
    CHECK(g[0] == doctest::Approx(expected_g1).epsilon(1e-12));
}

TEST_CASE("physiological preset") {
    const auto [params, bc] = physiological_preset();
    CHECK(params.n_networks == 4);
    CHECK(params.E == 1500.0);
    CHECK(params.nu == 0.4999);
    CHECK(params.alpha[0] == 0.49);
    CHECK(params.c[2] == 1.5e-5);
    CHECK(params.K[0] == 1.57e-5);
    CHECK(params.beta(0, 2) == 1e-6);
    CHECK(params.beta(0, 1) == 0.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(params.beta(i, i) == 0.0);
        for (int j = 0; j < 4; ++j) {
            CHECK(params.beta(i, j) == params.beta(j, i));
        }
    }

    // 70 mmHg converts to 9332.4 Pa.
    const auto& p2_skull = bc.pressure_on(BoundaryTag::gamma_skull, 1);
    CHECK(p2_skull.kind == ConditionKind::dirichlet);
    CHECK(p2_skull.value({0, 0}, 0.0) == doctest::Approx(9332.4).epsilon(1e-12));

    // Ventricle traction at t = 0: s = -29.51 mmHg.
    const auto& u_ventricle = bc.displacement_on(BoundaryTag::gamma_ventricle);
    CHECK(u_ventricle.kind == ConditionKind::neumann);
    const Eigen::Vector2d h = u_ventricle.traction({30, 0}, 0.0, {1.0, 0.0});
    CHECK(h[0] == doctest::Approx(-29.51 * kPascalPerMmHg).epsilon(1e-12));
    CHECK(h[1] == 0.0);

    // p4 carries flux conditions only.
    CHECK(bc.pressure_on(BoundaryTag::gamma_skull, 3).kind == ConditionKind::neumann);
    CHECK(bc.pressure_on(BoundaryTag::gamma_ventricle, 3).kind ==
          ConditionKind::neumann);
}

TEST_CASE("boundary program validation") {
    const Mesh mesh = unit_square_mesh(2);
    BoundaryProgram program = pure_dirichlet_program(
        {BoundaryTag::gamma1, BoundaryTag::gamma2, BoundaryTag::gamma3}, 2);
    CHECK_THROWS_AS(program.validate(mesh, 2), ArgumentError); // Gamma4 missing
    program = pure_dirichlet_program({BoundaryTag::gamma1, BoundaryTag::gamma2,
                                      BoundaryTag::gamma3, BoundaryTag::gamma4},
                                     2);
    CHECK_NOTHROW(program.validate(mesh, 2));
    CHECK_THROWS_AS(program.validate(mesh, 3), ArgumentError); // wrong N
}

TEST_CASE("config file parsing") {
    std::istringstream in(
        "# comment\n"
        "[parameters]\n"
        "E = 1500\n"
        "nu = 0.4999\n"
        "alpha = 0.49, 0.25, 0.01, 0.25\n"
        "\n"
        "[accuracy]\n"
        "case = table1\n"
        "levels = 3 ; trailing comment\n");
    const ConfigFile cfg = ConfigFile::parse(in);
    CHECK(cfg.get_double("parameters", "E") == 1500.0);
    CHECK(cfg.get("accuracy", "case") == "table1");
    CHECK(cfg.get_int("accuracy", "levels") == 3);
    const std::vector<double> alpha = cfg.get_doubles("parameters", "alpha");
    REQUIRE(alpha.size() == 4);
    CHECK(alpha[1] == 0.25);
    CHECK(cfg.get_or("accuracy", "missing", "fallback") == "fallback");
    CHECK_THROWS_AS(cfg.get("accuracy", "missing"), ConfigError);
    CHECK_THROWS_AS(cfg.get_int("parameters", "nu"), ConfigError);

    std::istringstream bad("key_without_section_or_equals\n");
    CHECK_THROWS_AS(ConfigFile::parse(bad), ConfigError);
}
