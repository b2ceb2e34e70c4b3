#pragma once

#include <vector>

#include "gridest/dense_matrix.hpp"

namespace gridest::kernels {

// OpenMP kernels parallelize over independent output rows; every output
// element is accumulated in the same (ascending-k) order as the serial
// reference, so results are bit-identical to ref:: regardless of thread
// count.

/// C = A * B
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);

/// C = A^T * B
DenseMatrix multiply_at_b(const DenseMatrix& a, const DenseMatrix& b);

/// C = A * B^T
DenseMatrix multiply_a_bt(const DenseMatrix& a, const DenseMatrix& b);

/// y = A * x
std::vector<double> apply(const DenseMatrix& a, const std::vector<double>& x);

/// y = A^T * x
std::vector<double> apply_transpose(const DenseMatrix& a, const std::vector<double>& x);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double s);

double max_abs(const DenseMatrix& a);
double max_abs(const std::vector<double>& v);

/// Induced infinity norm: max absolute row sum.
double inf_norm(const DenseMatrix& a);

double frobenius_norm(const DenseMatrix& a);
double norm2(const std::vector<double>& v);

std::vector<double> vec_add(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> vec_sub(const std::vector<double>& a, const std::vector<double>& b);
/// y += s * x
void axpy(double s, const std::vector<double>& x, std::vector<double>& y);

// Serial reference implementations, kept for testing the parallel kernels
// and for the serial-vs-OpenMP benchmark.
namespace ref {
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix multiply_at_b(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix multiply_a_bt(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> apply(const DenseMatrix& a, const std::vector<double>& x);
}  // namespace ref

}  // namespace gridest::kernels
