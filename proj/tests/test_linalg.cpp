#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "mpet/linalg.hpp"

using namespace mpet;

namespace {

SparseMatrix laplacian_1d(Index n) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
        t.push_back({i, i, 2.0});
        if (i > 0) {
            t.push_back({i, i - 1, -1.0});
        }
        if (i + 1 < n) {
            t.push_back({i, i + 1, -1.0});
        }
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix laplacian_2d(Index n_per_side) {
    const Index n = n_per_side * n_per_side;
    std::vector<Triplet> t;
    for (Index j = 0; j < n_per_side; ++j) {
        for (Index i = 0; i < n_per_side; ++i) {
            const Index row = j * n_per_side + i;
            t.push_back({row, row, 4.0});
            if (i > 0) t.push_back({row, row - 1, -1.0});
            if (i + 1 < n_per_side) t.push_back({row, row + 1, -1.0});
            if (j > 0) t.push_back({row, row - n_per_side, -1.0});
            if (j + 1 < n_per_side) t.push_back({row, row + n_per_side, -1.0});
        }
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

} // namespace

TEST_CASE("from_triplets sums duplicates and sorts rows") {
    const SparseMatrix m =
        SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}});
    CHECK(m.nnz() == 1);
    CHECK(m.coeff(0, 0) == 3.0);

    const SparseMatrix empty = SparseMatrix::from_triplets(3, 3, {});
    CHECK(empty.nnz() == 0);
    CHECK(empty.coeff(1, 2) == 0.0);

    const SparseMatrix unsorted = SparseMatrix::from_triplets(
        2, 3, {{1, 2, 5.0}, {1, 0, 4.0}, {0, 1, 3.0}});
    const auto cols = unsorted.column_indices();
    CHECK(cols[1] == 0); // row 1 sorted ascending
    CHECK(cols[2] == 2);
}

TEST_CASE("from_triplets rejects out-of-range indices") {
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ArgumentError);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, -1, 1.0}}), ArgumentError);
}

TEST_CASE("spmv basics") {
    const SparseMatrix id = SparseMatrix::identity(5);
    Eigen::VectorXd x(5);
    x << 1, -2, 3, 0.5, 7;
    CHECK((id.multiply(x) - x).norm() == 0.0);

    const SparseMatrix zero = SparseMatrix::from_triplets(3, 3, {});
    CHECK(zero.multiply(Eigen::VectorXd::Ones(3)).norm() == 0.0);

    const SparseMatrix sym =
        SparseMatrix::from_triplets(2, 2, {{1, 0, 4.0}, {0, 1, 4.0}});
    CHECK(sym.is_symmetric());
    const Eigen::VectorXd y = sym.multiply(Eigen::VectorXd::Ones(2));
    CHECK(y[0] == 4.0);
    CHECK(y[1] == 4.0);

    CHECK_THROWS_AS(sym.multiply(Eigen::VectorXd::Ones(3)), DimensionError);
}

TEST_CASE("spmv matches a dense oracle and the serial reference") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> value(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<Index> dim(1, 50);
        const Index rows = dim(rng), cols = dim(rng);
        std::uniform_int_distribution<Index> ri(0, rows - 1), ci(0, cols - 1);
        Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows, cols);
        std::vector<Triplet> t;
        const int entries = static_cast<int>(rows * cols / 3) + 1;
        for (int k = 0; k < entries; ++k) {
            const Index r = ri(rng), c = ci(rng);
            const double v = value(rng);
            dense(r, c) += v;
            t.push_back({r, c, v});
        }
        const SparseMatrix sparse = SparseMatrix::from_triplets(rows, cols, t);
        Eigen::VectorXd x(cols);
        for (Index i = 0; i < cols; ++i) {
            x[i] = value(rng);
        }
        const Eigen::VectorXd expected = dense * x;
        const Eigen::VectorXd parallel = sparse.multiply(x, Exec::parallel);
        const Eigen::VectorXd serial = sparse.multiply(x, Exec::serial);
        CHECK((parallel - expected).norm() <=
              1e-14 * std::max(1.0, expected.norm()));
        // The parallel kernel must be bitwise identical to the reference.
        for (Index i = 0; i < rows; ++i) {
            CHECK(parallel[i] == serial[i]);
        }
    }
}

TEST_CASE("factorize and solve") {
    const SparseMatrix diag =
        SparseMatrix::from_triplets(2, 2, {{0, 0, 3.0}, {1, 1, 5.0}});
    const Factorization lu(diag);
    Eigen::VectorXd b(2);
    b << 6.0, 10.0;
    const Eigen::VectorXd x = lu.solve(b);
    CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-14));

    const SparseMatrix a = laplacian_1d(10);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(10);
    const Factorization alu(a);
    const Eigen::VectorXd sol = alu.solve(a.multiply(ones));
    CHECK((sol - ones).norm() <= 1e-12 * ones.norm());

    // Solving twice with the same rhs must be bitwise identical.
    const Eigen::VectorXd again = alu.solve(a.multiply(ones));
    for (Index i = 0; i < 10; ++i) {
        CHECK(sol[i] == again[i]);
    }
}

TEST_CASE("factorize reports singular matrices") {
    const SparseMatrix rank1 = SparseMatrix::from_triplets(
        2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
    CHECK_THROWS_AS(Factorization{rank1}, SingularMatrixError);

    const SparseMatrix rect = SparseMatrix::from_triplets(2, 3, {});
    CHECK_THROWS_AS(Factorization{rect}, DimensionError);
}

TEST_CASE("random well-conditioned solves meet the residual contract") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<Index> dim(2, 40);
        const Index n = dim(rng);
        std::vector<Triplet> t;
        for (Index i = 0; i < n; ++i) {
            double off_sum = 0.0;
            for (Index j = 0; j < n; ++j) {
                if (i != j && value(rng) > 0.4) {
                    const double v = value(rng);
                    off_sum += std::abs(v);
                    t.push_back({i, j, v});
                }
            }
            // Diagonal dominance keeps the condition number modest.
            t.push_back({i, i, off_sum + 1.0});
        }
        const SparseMatrix a = SparseMatrix::from_triplets(n, n, std::move(t));
        Eigen::VectorXd b(n);
        for (Index i = 0; i < n; ++i) {
            b[i] = value(rng);
        }
        const Factorization lu(a);
        const Eigen::VectorXd x = lu.solve(b);
        CHECK((b - a.multiply(x)).norm() <= 1e-12 * std::max(1e-30, b.norm()));
    }
}

TEST_CASE("cg_solve") {
    const SparseMatrix id = SparseMatrix::identity(4);
    Eigen::VectorXd b(4);
    b << 1, 2, 3, 4;
    CgReport report;
    const Eigen::VectorXd x = cg_solve(id, b, 1e-12, 10, &report);
    CHECK(report.iterations == 1);
    CHECK((x - b).norm() <= 1e-12);

    const SparseMatrix a = laplacian_2d(7); // 49 unknowns, SPD
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(49);
    const Eigen::VectorXd sol = cg_solve(a, rhs, 1e-10, 1000, &report);
    CHECK((rhs - a.multiply(sol)).norm() <= 1e-10 * rhs.norm());

    // Indefinite input: either an error or the contract still holds.
    const SparseMatrix indef =
        SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}});
    Eigen::VectorXd c(2);
    c << 1.0, 1.0;
    try {
        const Eigen::VectorXd y = cg_solve(indef, c, 1e-10, 50);
        CHECK((c - indef.multiply(y)).norm() <= 1e-10 * c.norm());
    } catch (const ConvergenceError&) {
        CHECK(true);
    }

    CHECK_THROWS_AS(cg_solve(laplacian_2d(7), Eigen::VectorXd::Ones(49), 1e-16, 2),
                    ConvergenceError);
}

TEST_CASE("weighted_sum combines matrices") {
    const SparseMatrix a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 2.0}});
    const SparseMatrix b = SparseMatrix::from_triplets(2, 2, {{0, 1, 3.0}, {1, 1, 1.0}});
    const std::pair<double, const SparseMatrix*> terms[] = {{2.0, &a}, {-1.0, &b}};
    const SparseMatrix s = weighted_sum(terms);
    CHECK(s.coeff(0, 0) == 2.0);
    CHECK(s.coeff(0, 1) == -3.0);
    CHECK(s.coeff(1, 1) == 3.0);
}

TEST_CASE("transpose and scaling") {
    const SparseMatrix a =
        SparseMatrix::from_triplets(2, 3, {{0, 2, 5.0}, {1, 0, -1.0}});
    const SparseMatrix at = a.transposed();
    CHECK(at.rows() == 3);
    CHECK(at.coeff(2, 0) == 5.0);
    CHECK(at.coeff(0, 1) == -1.0);
    CHECK(a.scaled(2.0).coeff(0, 2) == 10.0);
}

TEST_CASE("matrix market round trip") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    std::vector<Triplet> t;
    for (Index i = 0; i < 8; ++i) {
        t.push_back({i, (i * 3) % 8, value(rng)});
    }
    const SparseMatrix a = SparseMatrix::from_triplets(8, 8, std::move(t));
    std::stringstream stream;
    a.write_matrix_market(stream);
    const SparseMatrix b = SparseMatrix::read_matrix_market(stream);
    REQUIRE(b.nnz() == a.nnz());
    for (Index i = 0; i < 8; ++i) {
        for (Index j = 0; j < 8; ++j) {
            CHECK(b.coeff(i, j) == a.coeff(i, j));
        }
    }
}

TEST_CASE("block system layout") {
    BlockSystem sys;
    sys.add_field("u", 4);
    sys.add_field("p", 2);
    CHECK(sys.total_dim() == 6);
    CHECK(sys.offset("p") == 4);
    CHECK_THROWS_AS(sys.offset("q"), ArgumentError);

    const SparseMatrix a = SparseMatrix::identity(4);
    const SparseMatrix c = SparseMatrix::from_triplets(4, 2, {{0, 0, 1.0}, {3, 1, 2.0}});
    sys.add_block("u", "u", a);
    sys.add_block("u", "p", c, -1.0);
    CHECK_THROWS_AS(sys.add_block("p", "p", a), DimensionError);
    sys.finalize();
    CHECK(sys.matrix().coeff(0, 0) == 1.0);
    CHECK(sys.matrix().coeff(3, 5) == -2.0);

    Eigen::VectorXd full = Eigen::VectorXd::Zero(6);
    Eigen::VectorXd part(2);
    part << 7.0, 8.0;
    sys.set_segment(full, "p", part);
    CHECK(sys.segment(full, "p")[1] == 8.0);
}
