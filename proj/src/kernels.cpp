#include "gridest/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace gridest::kernels {

namespace {
// Tiny products are not worth a fork/join.
constexpr std::size_t kParallelFlopThreshold = 1u << 15;

void check_mul(std::size_t inner_a, std::size_t inner_b, const char* who) {
    if (inner_a != inner_b)
        throw ContractViolation(std::string(who) + ": inner dimensions differ");
}
}  // namespace

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.cols(), b.rows(), "multiply");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    DenseMatrix c(m, n);
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const bool par = m * k * n >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        double* crow = cp + i * n;
        const double* arow = ap + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = bp + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

DenseMatrix multiply_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.rows(), b.rows(), "multiply_at_b");
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    DenseMatrix c(m, n);
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const bool par = m * k * n >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        double* crow = cp + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = ap[kk * m + i];
            const double* brow = bp + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

DenseMatrix multiply_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.cols(), b.cols(), "multiply_a_bt");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    DenseMatrix c(m, n);
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    const bool par = m * k * n >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        const double* arow = ap + i * k;
        double* crow = cp + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bp + j * k;
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = s;
        }
    }
    return c;
}

std::vector<double> apply(const DenseMatrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size())
        throw ContractViolation("apply: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    const double* ap = a.data();
    const std::size_t k = a.cols();
    const bool par = a.rows() * k >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(a.rows()); ++i) {
        const double* arow = ap + i * k;
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += arow[j] * x[j];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

std::vector<double> apply_transpose(const DenseMatrix& a, const std::vector<double>& x) {
    if (a.rows() != x.size())
        throw ContractViolation("apply_transpose: dimension mismatch");
    std::vector<double> y(a.cols(), 0.0);
    const double* ap = a.data();
    const std::size_t n = a.cols();
    const bool par = a.rows() * n >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(n); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += ap[i * n + j] * x[i];
        y[static_cast<std::size_t>(j)] = s;
    }
    return y;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw ContractViolation("add: shape mismatch");
    DenseMatrix c = a;
    double* cp = c.data();
    const double* bp = b.data();
    for (std::size_t i = 0; i < c.size(); ++i) cp[i] += bp[i];
    return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw ContractViolation("subtract: shape mismatch");
    DenseMatrix c = a;
    double* cp = c.data();
    const double* bp = b.data();
    for (std::size_t i = 0; i < c.size(); ++i) cp[i] -= bp[i];
    return c;
}

DenseMatrix scaled(const DenseMatrix& a, double s) {
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
    return c;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i]));
    return m;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double inf_norm(const DenseMatrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
    return std::sqrt(s);
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> vec_add(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractViolation("vec_add: size mismatch");
    std::vector<double> c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

std::vector<double> vec_sub(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractViolation("vec_sub: size mismatch");
    std::vector<double> c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

void axpy(double s, const std::vector<double>& x, std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractViolation("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

namespace ref {

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.cols(), b.rows(), "ref::multiply");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t kk = 0; kk < a.cols(); ++kk) {
            const double av = a(i, kk);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += av * b(kk, j);
        }
    return c;
}

DenseMatrix multiply_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.rows(), b.rows(), "ref::multiply_at_b");
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t kk = 0; kk < a.rows(); ++kk) {
            const double av = a(kk, i);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += av * b(kk, j);
        }
    return c;
}

DenseMatrix multiply_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    check_mul(a.cols(), b.cols(), "ref::multiply_a_bt");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < a.cols(); ++kk) s += a(i, kk) * b(j, kk);
            c(i, j) = s;
        }
    return c;
}

std::vector<double> apply(const DenseMatrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size())
        throw ContractViolation("ref::apply: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

}  // namespace ref

}  // namespace gridest::kernels
