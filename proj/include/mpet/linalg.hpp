#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpet/errors.hpp"

namespace mpet {

using Index = std::int32_t;

/// Execution policy for data-parallel kernels. `serial` is the reference
/// path kept for testing and benchmarking; `parallel` uses OpenMP but is
/// constructed to produce bitwise-identical results.
enum class Exec { serial, parallel };

struct Triplet {
    Index row = 0;
    Index col = 0;
    double value = 0.0;
};

/// Real sparse matrix in compressed-row form. Immutable after construction.
/// Column indices are strictly increasing within each row; duplicate
/// triplets are summed at build time in a deterministic order.
class SparseMatrix {
public:
    SparseMatrix() = default;

    static SparseMatrix from_triplets(Index n_rows, Index n_cols,
                                      std::vector<Triplet> triplets);
    static SparseMatrix identity(Index n);

    Index rows() const { return n_rows_; }
    Index cols() const { return n_cols_; }
    Index nnz() const { return static_cast<Index>(values_.size()); }

    std::span<const Index> row_offsets() const { return row_ptr_; }
    std::span<const Index> column_indices() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    /// Stored value at (row, col), 0 if the entry is not stored.
    double coeff(Index row, Index col) const;
    double max_abs() const;

    /// y = A x with deterministic row-major, ascending-column summation.
    Eigen::VectorXd multiply(const Eigen::VectorXd& x,
                             Exec exec = Exec::parallel) const;

    SparseMatrix transposed() const;
    SparseMatrix scaled(double factor) const;
    bool is_symmetric(double rel_tol = 1e-12) const;

    Eigen::SparseMatrix<double> to_eigen() const;

    /// Matrix Market coordinate format, 1-based indices.
    void write_matrix_market(std::ostream& out) const;
    static SparseMatrix read_matrix_market(std::istream& in);

private:
    Index n_rows_ = 0;
    Index n_cols_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> col_idx_;
    std::vector<double> values_;
};

/// Weighted sum  sum_i w_i A_i  of same-shaped sparse matrices.
SparseMatrix weighted_sum(
    std::span<const std::pair<double, const SparseMatrix*>> terms);

/// Sparse LU factorization (partial pivoting) reused across many solves.
/// Copyable handle; the factors are shared and immutable.
class Factorization {
public:
    explicit Factorization(const SparseMatrix& matrix);

    /// Back-substitution plus one iterative-refinement pass. Throws
    /// SingularMatrixError if the residual reveals a numerically unusable
    /// factorization.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    Index dim() const;
    Index factor_nonzeros() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

struct CgReport {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Conjugate gradients for symmetric positive definite systems.
/// Throws ConvergenceError when max_iter is reached or indefiniteness is
/// detected; the returned solution always satisfies the residual contract.
Eigen::VectorXd cg_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                         double tol, int max_iter, CgReport* report = nullptr);

/// Monolithic matrix assembled from named fields and per-field blocks.
class BlockSystem {
public:
    struct Field {
        std::string name;
        Index size = 0;
        Index offset = 0;
    };

    void add_field(std::string name, Index size);
    void add_block(std::string_view row_field, std::string_view col_field,
                   const SparseMatrix& block, double weight = 1.0);

    /// Builds the monolithic matrix from the accumulated blocks.
    void finalize();

    Index total_dim() const;
    Index offset(std::string_view field) const;
    Index size(std::string_view field) const;
    const std::vector<Field>& fields() const { return fields_; }

    const SparseMatrix& matrix() const;
    void replace_matrix(SparseMatrix m);

    Eigen::VectorXd segment(const Eigen::VectorXd& full,
                            std::string_view field) const;
    void set_segment(Eigen::VectorXd& full, std::string_view field,
                     const Eigen::VectorXd& part) const;

private:
    const Field& find(std::string_view name) const;

    std::vector<Field> fields_;
    std::vector<Triplet> pending_;
    SparseMatrix matrix_;
    bool finalized_ = false;
};

} // namespace mpet
