#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "gridest/errors.hpp"

namespace gridest {

/// Dense real matrix, row-major. Zero rows or zero columns are legal and
/// show up routinely (empty noise factors, exhausted kernels).
class DenseMatrix {
  public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (entries_.size() != rows_ * cols_)
            throw ContractViolation("DenseMatrix: entry count does not match rows*cols");
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows_init) {
        rows_ = rows_init.size();
        cols_ = rows_ == 0 ? 0 : rows_init.begin()->size();
        entries_.reserve(rows_ * cols_);
        for (const auto& r : rows_init) {
            if (r.size() != cols_)
                throw ContractViolation("DenseMatrix: ragged initializer");
            entries_.insert(entries_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return entries_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }
    const std::vector<double>& entries() const { return entries_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : entries_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    DenseMatrix transposed() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    /// Rows [begin, begin+count) as a new matrix.
    DenseMatrix row_block(std::size_t begin, std::size_t count) const {
        if (begin + count > rows_)
            throw ContractViolation("DenseMatrix::row_block: range out of bounds");
        DenseMatrix b(count, cols_);
        std::copy(entries_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                  entries_.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols_),
                  b.entries_.begin());
        return b;
    }

    /// Columns [begin, begin+count) as a new matrix.
    DenseMatrix col_block(std::size_t begin, std::size_t count) const {
        if (begin + count > cols_)
            throw ContractViolation("DenseMatrix::col_block: range out of bounds");
        DenseMatrix b(rows_, count);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < count; ++j) b(i, j) = (*this)(i, begin + j);
        return b;
    }

    DenseMatrix submatrix(const std::vector<std::size_t>& row_idx,
                          const std::vector<std::size_t>& col_idx) const {
        DenseMatrix b(row_idx.size(), col_idx.size());
        for (std::size_t i = 0; i < row_idx.size(); ++i)
            for (std::size_t j = 0; j < col_idx.size(); ++j)
                b(i, j) = (*this)(row_idx[i], col_idx[j]);
        return b;
    }

    std::vector<double> row(std::size_t i) const {
        return {entries_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                entries_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_)};
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

/// [A B] side by side.
inline DenseMatrix hstack(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw ContractViolation("hstack: row counts differ");
    DenseMatrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
    }
    return c;
}

/// [A; B] stacked.
inline DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols())
        throw ContractViolation("vstack: column counts differ");
    DenseMatrix c(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) c(a.rows() + i, j) = b(i, j);
    return c;
}

inline void require_finite(const DenseMatrix& m, const char* who) {
    if (!m.all_finite())
        throw ContractViolation(std::string(who) + ": non-finite entries");
}

inline void require_finite(const std::vector<double>& v, const char* who) {
    for (double x : v)
        if (!std::isfinite(x))
            throw ContractViolation(std::string(who) + ": non-finite entries");
}

}  // namespace gridest
