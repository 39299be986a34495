#include "mpet/linalg.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace mpet {

SparseMatrix SparseMatrix::from_triplets(Index n_rows, Index n_cols,
                                         std::vector<Triplet> triplets) {
    if (n_rows < 0 || n_cols < 0) {
        throw DimensionError("from_triplets: negative matrix dimension");
    }
    for (const Triplet& t : triplets) {
        if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols) {
            throw ArgumentError("from_triplets: index (" + std::to_string(t.row) +
                                ", " + std::to_string(t.col) +
                                ") outside " + std::to_string(n_rows) + "x" +
                                std::to_string(n_cols) + " matrix");
        }
    }
    // Stable sort keeps duplicate entries in insertion order, so the
    // summation order (and hence the bits of the result) is reproducible.
    std::stable_sort(triplets.begin(), triplets.end(),
                     [](const Triplet& a, const Triplet& b) {
                         return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });

    SparseMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_ptr_.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());

    std::size_t i = 0;
    for (Index row = 0; row < n_rows; ++row) {
        while (i < triplets.size() && triplets[i].row == row) {
            const Index col = triplets[i].col;
            double sum = 0.0;
            while (i < triplets.size() && triplets[i].row == row &&
                   triplets[i].col == col) {
                sum += triplets[i].value;
                ++i;
            }
            m.col_idx_.push_back(col);
            m.values_.push_back(sum);
        }
        m.row_ptr_[static_cast<std::size_t>(row) + 1] =
            static_cast<Index>(m.col_idx_.size());
    }
    return m;
}

SparseMatrix SparseMatrix::identity(Index n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        t.push_back({i, i, 1.0});
    }
    return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(Index row, Index col) const {
    if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_) {
        throw ArgumentError("coeff: index outside matrix");
    }
    const auto begin = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row)];
    const auto end = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row) + 1];
    const auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) {
        return 0.0;
    }
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : values_) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

Eigen::VectorXd SparseMatrix::multiply(const Eigen::VectorXd& x, Exec exec) const {
    if (x.size() != n_cols_) {
        throw DimensionError("spmv: vector length " + std::to_string(x.size()) +
                             " does not match " + std::to_string(n_cols_) +
                             " columns");
    }
    Eigen::VectorXd y(n_rows_);
    // Each row is a self-contained serial sum, so the parallel path is
    // bitwise identical to the serial one for any thread count.
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (Index row = 0; row < n_rows_; ++row) {
            double sum = 0.0;
            for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
                sum += values_[static_cast<std::size_t>(k)] *
                       x[col_idx_[static_cast<std::size_t>(k)]];
            }
            y[row] = sum;
        }
    } else {
        for (Index row = 0; row < n_rows_; ++row) {
            double sum = 0.0;
            for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
                sum += values_[static_cast<std::size_t>(k)] *
                       x[col_idx_[static_cast<std::size_t>(k)]];
            }
            y[row] = sum;
        }
    }
    return y;
}

SparseMatrix SparseMatrix::transposed() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (Index row = 0; row < n_rows_; ++row) {
        for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
            t.push_back({col_idx_[static_cast<std::size_t>(k)], row,
                         values_[static_cast<std::size_t>(k)]});
        }
    }
    return from_triplets(n_cols_, n_rows_, std::move(t));
}

SparseMatrix SparseMatrix::scaled(double factor) const {
    SparseMatrix m = *this;
    for (double& v : m.values_) {
        v *= factor;
    }
    return m;
}

bool SparseMatrix::is_symmetric(double rel_tol) const {
    if (n_rows_ != n_cols_) {
        return false;
    }
    const double scale = std::max(max_abs(), 1e-300);
    for (Index row = 0; row < n_rows_; ++row) {
        for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
            const Index col = col_idx_[static_cast<std::size_t>(k)];
            const double v = values_[static_cast<std::size_t>(k)];
            if (std::abs(v - coeff(col, row)) > rel_tol * scale) {
                return false;
            }
        }
    }
    return true;
}

Eigen::SparseMatrix<double> SparseMatrix::to_eigen() const {
    Eigen::SparseMatrix<double> m(n_rows_, n_cols_);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(values_.size());
    for (Index row = 0; row < n_rows_; ++row) {
        for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
            t.emplace_back(row, col_idx_[static_cast<std::size_t>(k)],
                           values_[static_cast<std::size_t>(k)]);
        }
    }
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

void SparseMatrix::write_matrix_market(std::ostream& out) const {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << n_rows_ << " " << n_cols_ << " " << nnz() << "\n";
    out.precision(17);
    for (Index row = 0; row < n_rows_; ++row) {
        for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
            out << row + 1 << " " << col_idx_[static_cast<std::size_t>(k)] + 1
                << " " << values_[static_cast<std::size_t>(k)] << "\n";
        }
    }
}

SparseMatrix SparseMatrix::read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw ConfigError("read_matrix_market: missing MatrixMarket header");
    }
    if (line.find("coordinate") == std::string::npos ||
        line.find("general") == std::string::npos) {
        throw ConfigError("read_matrix_market: only 'coordinate real general' is supported");
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') {
            break;
        }
    }
    std::istringstream sizes(line);
    Index n_rows = 0, n_cols = 0;
    long long n_entries = 0;
    if (!(sizes >> n_rows >> n_cols >> n_entries)) {
        throw ConfigError("read_matrix_market: malformed size line");
    }
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n_entries));
    for (long long i = 0; i < n_entries; ++i) {
        Index row = 0, col = 0;
        double value = 0.0;
        if (!(in >> row >> col >> value)) {
            throw ConfigError("read_matrix_market: truncated entry list");
        }
        t.push_back({row - 1, col - 1, value});
    }
    return from_triplets(n_rows, n_cols, std::move(t));
}

SparseMatrix weighted_sum(
    std::span<const std::pair<double, const SparseMatrix*>> terms) {
    if (terms.empty()) {
        throw ArgumentError("weighted_sum: no terms");
    }
    const Index n_rows = terms[0].second->rows();
    const Index n_cols = terms[0].second->cols();
    std::vector<Triplet> t;
    for (const auto& [weight, m] : terms) {
        if (m->rows() != n_rows || m->cols() != n_cols) {
            throw DimensionError("weighted_sum: mismatched matrix shapes");
        }
        const auto offsets = m->row_offsets();
        const auto cols = m->column_indices();
        const auto vals = m->values();
        for (Index row = 0; row < n_rows; ++row) {
            for (Index k = offsets[row]; k < offsets[row + 1]; ++k) {
                t.push_back({row, cols[static_cast<std::size_t>(k)],
                             weight * vals[static_cast<std::size_t>(k)]});
            }
        }
    }
    return SparseMatrix::from_triplets(n_rows, n_cols, std::move(t));
}

struct Factorization::Impl {
    SparseMatrix matrix;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

Factorization::Factorization(const SparseMatrix& matrix) {
    if (matrix.rows() != matrix.cols()) {
        throw DimensionError("factorize: matrix is not square");
    }
    auto impl = std::make_shared<Impl>();
    impl->matrix = matrix;
    const Eigen::SparseMatrix<double> a = matrix.to_eigen();
    impl->lu.analyzePattern(a);
    impl->lu.factorize(a);
    if (impl->lu.info() != Eigen::Success) {
        throw SingularMatrixError("factorize: " + impl->lu.lastErrorMessage());
    }
    impl_ = std::move(impl);
}

Index Factorization::dim() const { return impl_->matrix.rows(); }

Index Factorization::factor_nonzeros() const {
    return static_cast<Index>(impl_->lu.nnzL() + impl_->lu.nnzU());
}

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() != impl_->matrix.rows()) {
        throw DimensionError("solve: rhs length does not match matrix dimension");
    }
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        return x;
    }
    Eigen::VectorXd residual = rhs - impl_->matrix.multiply(x);
    if (residual.norm() > 1e-13 * rhs_norm) {
        x += impl_->lu.solve(residual);
        residual = rhs - impl_->matrix.multiply(x);
    }
    if (!x.allFinite() || residual.norm() > 1e-6 * rhs_norm) {
        Index worst = 0;
        residual.cwiseAbs().maxCoeff(&worst);
        throw SingularMatrixError(
            "solve: factorization numerically singular (relative residual " +
            std::to_string(residual.norm() / rhs_norm) + ", worst pivot row " +
            std::to_string(worst) + ")");
    }
    return x;
}

Eigen::VectorXd cg_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                         double tol, int max_iter, CgReport* report) {
    if (matrix.rows() != matrix.cols()) {
        throw DimensionError("cg_solve: matrix is not square");
    }
    if (rhs.size() != matrix.rows()) {
        throw DimensionError("cg_solve: rhs length mismatch");
    }
    const double rhs_norm = rhs.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
    if (rhs_norm == 0.0) {
        if (report) {
            *report = {0, 0.0};
        }
        return x;
    }
    Eigen::VectorXd r = rhs;
    Eigen::VectorXd p = r;
    double rr = r.squaredNorm();
    int iter = 0;
    while (iter < max_iter) {
        const Eigen::VectorXd ap = matrix.multiply(p);
        const double p_ap = p.dot(ap);
        if (p_ap <= 0.0) {
            throw ConvergenceError(
                "cg_solve: matrix is not positive definite (p'Ap = " +
                    std::to_string(p_ap) + ")",
                std::sqrt(rr) / rhs_norm);
        }
        const double alpha = rr / p_ap;
        x += alpha * p;
        r -= alpha * ap;
        ++iter;
        const double rr_new = r.squaredNorm();
        if (std::sqrt(rr_new) <= tol * rhs_norm) {
            rr = rr_new;
            break;
        }
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    // Recompute the true residual; an accepted answer must meet the contract.
    const double true_residual = (rhs - matrix.multiply(x)).norm() / rhs_norm;
    if (true_residual > tol) {
        throw ConvergenceError("cg_solve: no convergence within " +
                                   std::to_string(max_iter) + " iterations",
                               true_residual);
    }
    if (report) {
        *report = {iter, true_residual};
    }
    return x;
}

void BlockSystem::add_field(std::string name, Index size) {
    if (finalized_) {
        throw ArgumentError("BlockSystem: cannot add fields after finalize");
    }
    for (const Field& f : fields_) {
        if (f.name == name) {
            throw ArgumentError("BlockSystem: duplicate field '" + name + "'");
        }
    }
    const Index offset = total_dim();
    fields_.push_back({std::move(name), size, offset});
}

const BlockSystem::Field& BlockSystem::find(std::string_view name) const {
    for (const Field& f : fields_) {
        if (f.name == name) {
            return f;
        }
    }
    throw ArgumentError("BlockSystem: unknown field '" + std::string(name) + "'");
}

Index BlockSystem::total_dim() const {
    Index n = 0;
    for (const Field& f : fields_) {
        n += f.size;
    }
    return n;
}

Index BlockSystem::offset(std::string_view field) const { return find(field).offset; }
Index BlockSystem::size(std::string_view field) const { return find(field).size; }

void BlockSystem::add_block(std::string_view row_field, std::string_view col_field,
                            const SparseMatrix& block, double weight) {
    const Field& rf = find(row_field);
    const Field& cf = find(col_field);
    if (block.rows() != rf.size || block.cols() != cf.size) {
        throw DimensionError("BlockSystem: block shape " +
                             std::to_string(block.rows()) + "x" +
                             std::to_string(block.cols()) +
                             " does not match fields '" + rf.name + "'/'" +
                             cf.name + "'");
    }
    const auto offsets = block.row_offsets();
    const auto cols = block.column_indices();
    const auto vals = block.values();
    for (Index row = 0; row < block.rows(); ++row) {
        for (Index k = offsets[row]; k < offsets[row + 1]; ++k) {
            pending_.push_back({rf.offset + row,
                                cf.offset + cols[static_cast<std::size_t>(k)],
                                weight * vals[static_cast<std::size_t>(k)]});
        }
    }
}

void BlockSystem::finalize() {
    matrix_ = SparseMatrix::from_triplets(total_dim(), total_dim(),
                                          std::move(pending_));
    pending_.clear();
    finalized_ = true;
}

const SparseMatrix& BlockSystem::matrix() const {
    if (!finalized_) {
        throw ArgumentError("BlockSystem: matrix requested before finalize");
    }
    return matrix_;
}

void BlockSystem::replace_matrix(SparseMatrix m) {
    if (m.rows() != total_dim() || m.cols() != total_dim()) {
        throw DimensionError("BlockSystem: replacement matrix has wrong shape");
    }
    matrix_ = std::move(m);
    finalized_ = true;
}

Eigen::VectorXd BlockSystem::segment(const Eigen::VectorXd& full,
                                     std::string_view field) const {
    const Field& f = find(field);
    if (full.size() != total_dim()) {
        throw DimensionError("BlockSystem: full vector has wrong length");
    }
    return full.segment(f.offset, f.size);
}

void BlockSystem::set_segment(Eigen::VectorXd& full, std::string_view field,
                              const Eigen::VectorXd& part) const {
    const Field& f = find(field);
    if (full.size() != total_dim() || part.size() != f.size) {
        throw DimensionError("BlockSystem: segment length mismatch");
    }
    full.segment(f.offset, f.size) = part;
}

} // namespace mpet
