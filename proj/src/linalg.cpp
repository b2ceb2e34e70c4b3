#include "gridest/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>

#include "gridest/kernels.hpp"

extern "C" void openblas_set_num_threads(int);

namespace gridest::linalg {

namespace {

std::once_flag blas_threads_once;

// Single-threaded BLAS keeps LAPACK results reproducible and leaves the
// cores to the OpenMP loops above it.
void pin_blas_threads() {
    std::call_once(blas_threads_once, [] { openblas_set_num_threads(1); });
}

std::atomic<bool> g_verify_pinv{false};
std::atomic<std::uint64_t> g_pinv_checks{0};
std::atomic<std::uint64_t> g_pinv_failures{0};

void maybe_verify_pinv(const DenseMatrix& m, const DenseMatrix& mp) {
    if (!g_verify_pinv.load(std::memory_order_relaxed)) return;
    g_pinv_checks.fetch_add(1, std::memory_order_relaxed);
    if (!moore_penrose_ok(m, mp))
        g_pinv_failures.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

double default_rank_tolerance(std::size_t rows, std::size_t cols, double smax) {
    return static_cast<double>(std::max(rows, cols)) *
           std::numeric_limits<double>::epsilon() * smax;
}

SvdResult svd(const DenseMatrix& m, double rank_tol_abs) {
    require_finite(m, "svd");
    pin_blas_threads();

    const std::size_t rows = m.rows(), cols = m.cols();
    SvdResult res;
    if (rows == 0 || cols == 0) {
        res.U = DenseMatrix::identity(rows);
        res.V = DenseMatrix::identity(cols);
        res.rank = 0;
        return res;
    }

    const auto k = std::min(rows, cols);
    res.singular_values.assign(k, 0.0);
    res.U = DenseMatrix(rows, rows);
    DenseMatrix vt(cols, cols);

    DenseMatrix work = m;
    lapack_int info = LAPACKE_dgesdd(
        LAPACK_ROW_MAJOR, 'A', static_cast<lapack_int>(rows), static_cast<lapack_int>(cols),
        work.data(), static_cast<lapack_int>(cols), res.singular_values.data(), res.U.data(),
        static_cast<lapack_int>(rows), vt.data(), static_cast<lapack_int>(cols));
    if (info > 0) {
        // divide-and-conquer failed to converge; retry with the QR-iteration driver
        work = m;
        std::vector<double> superb(k > 1 ? k - 1 : 1);
        info = LAPACKE_dgesvd(
            LAPACK_ROW_MAJOR, 'A', 'A', static_cast<lapack_int>(rows),
            static_cast<lapack_int>(cols), work.data(), static_cast<lapack_int>(cols),
            res.singular_values.data(), res.U.data(), static_cast<lapack_int>(rows), vt.data(),
            static_cast<lapack_int>(cols), superb.data());
    }
    if (info != 0)
        throw NumericalFailure("svd: LAPACK driver did not converge (info=" +
                               std::to_string(info) + ")");

    res.V = vt.transposed();
    const double smax = res.singular_values.empty() ? 0.0 : res.singular_values.front();
    const double tol = rank_tol_abs >= 0.0 ? rank_tol_abs : default_rank_tolerance(rows, cols, smax);
    res.rank = rank_at(res, tol);
    return res;
}

std::size_t rank_at(const SvdResult& s, double abs_tol) {
    std::size_t r = 0;
    for (double sv : s.singular_values)
        if (sv > abs_tol) ++r;
    return r;
}

std::vector<double> pinv_apply(const SvdResult& s, const std::vector<double>& b) {
    if (b.size() != s.U.rows())
        throw ContractViolation("pinv_apply: vector length != rows");
    const std::size_t n = s.V.rows();
    std::vector<double> x(n, 0.0);
    for (std::size_t r = 0; r < s.rank; ++r) {
        double c = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) c += s.U(i, r) * b[i];
        c /= s.singular_values[r];
        for (std::size_t j = 0; j < n; ++j) x[j] += c * s.V(j, r);
    }
    return x;
}

DenseMatrix pinv_from_svd(const SvdResult& s) {
    const std::size_t rows = s.U.rows(), cols = s.V.rows();
    DenseMatrix mp(cols, rows);
    for (std::size_t r = 0; r < s.rank; ++r) {
        const double inv_s = 1.0 / s.singular_values[r];
        for (std::size_t i = 0; i < cols; ++i) {
            const double vi = s.V(i, r) * inv_s;
            for (std::size_t j = 0; j < rows; ++j) mp(i, j) += vi * s.U(j, r);
        }
    }
    return mp;
}

DenseMatrix pseudoinverse(const DenseMatrix& m, double rank_tol_abs) {
    const SvdResult s = svd(m, rank_tol_abs);
    DenseMatrix mp = pinv_from_svd(s);
    maybe_verify_pinv(m, mp);
    return mp;
}

SubspaceBasis kernel_from_svd(const SvdResult& s, std::size_t cols_rank) {
    const std::size_t cols = s.V.rows();
    DenseMatrix basis(cols, cols - cols_rank);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = cols_rank; j < cols; ++j) basis(i, j - cols_rank) = s.V(i, j);
    return SubspaceBasis(cols, std::move(basis));
}

SubspaceBasis kernel_basis(const DenseMatrix& m, double rank_tol_abs) {
    if (m.rows() == 0)
        return SubspaceBasis::full(m.cols());
    const SvdResult s = svd(m, rank_tol_abs);
    return kernel_from_svd(s, s.rank);
}

SubspaceBasis orthonormal_image(const DenseMatrix& m, double rel_tol) {
    if (m.cols() == 0) return SubspaceBasis::zero(m.rows());
    const SvdResult s = svd(m);
    const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    const std::size_t r = rank_at(s, rel_tol * smax);
    return SubspaceBasis(m.rows(), s.U.col_block(0, r));
}

SubspaceBasis subspace_intersection(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.ambient_dim != b.ambient_dim)
        throw ContractViolation("subspace_intersection: ambient dimensions differ");
    if (a.is_zero() || b.is_zero()) return SubspaceBasis::zero(a.ambient_dim);

    const DenseMatrix stacked = hstack(kernels::scaled(a.basis, -1.0), b.basis);
    const SvdResult s = svd(stacked);
    const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    const std::size_t r = rank_at(s, kSubspaceRankTol * smax);
    const SubspaceBasis ker = kernel_from_svd(s, r);
    if (ker.is_zero()) return SubspaceBasis::zero(a.ambient_dim);

    // (u; v) in Ker([-A B]) means A u = B v lies in both images.
    const DenseMatrix top = ker.basis.row_block(0, a.dim());
    const DenseMatrix mapped = kernels::multiply(a.basis, top);
    return orthonormal_image(mapped);
}

double max_principal_sine(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.ambient_dim != b.ambient_dim)
        throw ContractViolation("max_principal_sine: ambient dimensions differ");
    if (b.is_zero()) return 0.0;
    if (a.is_zero()) return 1.0;
    // residual of projecting B's basis onto Im(A); its largest singular
    // value is sin(theta_max), accurate for small angles
    const DenseMatrix coeff = kernels::multiply_at_b(a.basis, b.basis);
    const DenseMatrix resid = kernels::subtract(b.basis, kernels::multiply(a.basis, coeff));
    const SvdResult s = svd(resid);
    return s.singular_values.empty() ? 0.0 : std::min(1.0, s.singular_values.front());
}

bool subspaces_equal(const SubspaceBasis& a, const SubspaceBasis& b, double angle_tol) {
    if (a.dim() != b.dim()) return false;
    if (a.dim() == 0) return true;
    return max_principal_sine(a, b) <= angle_tol && max_principal_sine(b, a) <= angle_tol;
}

DenseMatrix noise_factor(const DenseMatrix& sigma) {
    require_finite(sigma, "noise_factor");
    if (sigma.rows() != sigma.cols())
        throw ContractViolation("noise_factor: matrix not square");
    const std::size_t p = sigma.rows();
    if (p == 0) return DenseMatrix(0, 0);

    double asym = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j)
            asym = std::max(asym, std::abs(sigma(i, j) - sigma(j, i)));
    if (asym > 1e-10)
        throw ContractViolation("noise_factor: matrix not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");

    DenseMatrix work(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) work(i, j) = 0.5 * (sigma(i, j) + sigma(j, i));

    pin_blas_threads();
    std::vector<double> eig(p);
    lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'U', static_cast<lapack_int>(p),
                                     work.data(), static_cast<lapack_int>(p), eig.data());
    if (info != 0)
        throw NumericalFailure("noise_factor: eigendecomposition failed (info=" +
                               std::to_string(info) + ")");

    const double lmax = eig.back();
    const double tol = default_rank_tolerance(p, p, std::abs(lmax));
    if (eig.front() <= tol)
        throw NotPositiveDefinite("noise_factor: eigenvalue " + std::to_string(eig.front()) +
                                  " not positive");

    // columns of `work` hold eigenvectors (row-major, 'V'); scale by sqrt(eig)
    DenseMatrix b(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) b(i, j) = work(i, j) * std::sqrt(eig[j]);
    return b;
}

bool pinv_kernel_check(const DenseMatrix& h) {
    const DenseMatrix hp_t = pseudoinverse(h).transposed();
    const SubspaceBasis k1 = kernel_basis(hp_t);
    const SubspaceBasis k2 = kernel_basis(h);
    return subspaces_equal(k1, k2, 1e-8);
}

DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != a.cols())
        throw ContractViolation("solve_spd: matrix not square");
    if (a.rows() != b.rows())
        throw ContractViolation("solve_spd: right-hand side rows mismatch");
    pin_blas_threads();
    DenseMatrix af = a;
    DenseMatrix x = b;
    lapack_int info = LAPACKE_dposv(LAPACK_ROW_MAJOR, 'U', static_cast<lapack_int>(a.rows()),
                                    static_cast<lapack_int>(b.cols()), af.data(),
                                    static_cast<lapack_int>(a.cols()), x.data(),
                                    static_cast<lapack_int>(b.cols()));
    if (info > 0)
        throw NotPositiveDefinite("solve_spd: matrix not positive definite (minor " +
                                  std::to_string(info) + ")");
    if (info < 0)
        throw NumericalFailure("solve_spd: invalid argument " + std::to_string(-info));
    return x;
}

std::vector<double> solve_spd(const DenseMatrix& a, const std::vector<double>& b) {
    DenseMatrix rhs(b.size(), 1, b);
    DenseMatrix x = solve_spd(a, rhs);
    return x.entries();
}

void verify_pinv_sample(const DenseMatrix& m, const SvdResult& s) {
    if (!g_verify_pinv.load(std::memory_order_relaxed)) return;
    maybe_verify_pinv(m, pinv_from_svd(s));
}

void set_pinv_verification(bool on) { g_verify_pinv.store(on, std::memory_order_relaxed); }
bool pinv_verification_enabled() { return g_verify_pinv.load(std::memory_order_relaxed); }

PinvVerificationStats pinv_verification_stats() {
    return {g_pinv_checks.load(std::memory_order_relaxed),
            g_pinv_failures.load(std::memory_order_relaxed)};
}

void reset_pinv_verification_stats() {
    g_pinv_checks.store(0, std::memory_order_relaxed);
    g_pinv_failures.store(0, std::memory_order_relaxed);
}

bool moore_penrose_ok(const DenseMatrix& m, const DenseMatrix& mp) {
    using kernels::max_abs;
    using kernels::multiply;
    const double smax_m = std::max(max_abs(m), 1e-300);
    const double smax_mp = std::max(max_abs(mp), 1e-300);
    const DenseMatrix m_mp = multiply(m, mp);
    const DenseMatrix mp_m = multiply(mp, m);
    if (max_abs(kernels::subtract(multiply(m_mp, m), m)) > 1e-9 * smax_m * m.rows()) return false;
    if (max_abs(kernels::subtract(multiply(mp_m, mp), mp)) > 1e-9 * smax_mp * m.cols())
        return false;
    double asym = 0.0;
    for (std::size_t i = 0; i < m_mp.rows(); ++i)
        for (std::size_t j = i + 1; j < m_mp.cols(); ++j)
            asym = std::max(asym, std::abs(m_mp(i, j) - m_mp(j, i)));
    for (std::size_t i = 0; i < mp_m.rows(); ++i)
        for (std::size_t j = i + 1; j < mp_m.cols(); ++j)
            asym = std::max(asym, std::abs(mp_m(i, j) - mp_m(j, i)));
    return asym <= 1e-9;
}

}  // namespace gridest::linalg
