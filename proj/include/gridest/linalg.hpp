#pragma once

#include <cstdint>
#include <vector>

#include "gridest/dense_matrix.hpp"

namespace gridest::linalg {

/// Relative rank threshold for operations on accumulated subspace bases
/// (kernel fusion, intersections, block pseudoinverse internals). Looser
/// than the fresh-matrix default: singular values of stacked orthonormal
/// bases inherit the rounding of every previous projection step, so the
/// noise floor sits well above max(r,c)*eps.
inline constexpr double kSubspaceRankTol = 1e-10;

/// Default absolute rank cut for a fresh matrix.
double default_rank_tolerance(std::size_t rows, std::size_t cols, double smax);

struct SvdResult {
    DenseMatrix U;                        // rows x rows, orthogonal
    std::vector<double> singular_values;  // min(rows, cols), nonincreasing
    DenseMatrix V;                        // cols x cols, orthogonal
    std::size_t rank = 0;                 // w.r.t. the tolerance used at the call
};

/// Full SVD M = U diag(s) V^T. rank_tol_abs < 0 selects the default rule.
/// Throws NumericalFailure if neither LAPACK driver converges.
SvdResult svd(const DenseMatrix& m, double rank_tol_abs = -1.0);

std::size_t rank_at(const SvdResult& s, double abs_tol);

/// min-norm least-squares application x = M^+ b using the factorization's rank.
std::vector<double> pinv_apply(const SvdResult& s, const std::vector<double>& b);

/// Materialized M^+ from a factorization.
DenseMatrix pinv_from_svd(const SvdResult& s);

DenseMatrix pseudoinverse(const DenseMatrix& m, double rank_tol_abs = -1.0);

/// A linear subspace of R^ambient represented by orthonormal basis columns.
/// dim() == 0 encodes the zero subspace {0}.
struct SubspaceBasis {
    std::size_t ambient_dim = 0;
    DenseMatrix basis;  // ambient_dim x k

    SubspaceBasis() = default;
    SubspaceBasis(std::size_t ambient, DenseMatrix b) : ambient_dim(ambient), basis(std::move(b)) {
        if (basis.rows() != ambient_dim)
            throw ContractViolation("SubspaceBasis: basis rows != ambient dimension");
    }

    std::size_t dim() const { return basis.cols(); }
    bool is_zero() const { return dim() == 0; }

    static SubspaceBasis zero(std::size_t ambient) {
        return SubspaceBasis(ambient, DenseMatrix(ambient, 0));
    }
    static SubspaceBasis full(std::size_t ambient) {
        return SubspaceBasis(ambient, DenseMatrix::identity(ambient));
    }
};

/// Orthonormal basis of Ker(M).
SubspaceBasis kernel_basis(const DenseMatrix& m, double rank_tol_abs = -1.0);

/// Kernel straight out of an existing factorization: columns of V past the rank.
SubspaceBasis kernel_from_svd(const SvdResult& s, std::size_t cols_rank);

/// Orthonormal basis of Im(M), dropping directions below rel_tol * smax.
SubspaceBasis orthonormal_image(const DenseMatrix& m, double rel_tol = kSubspaceRankTol);

/// Basis(Im(A) ∩ Im(B)), computed through the kernel of the stacked map
/// [-A  B] and mapped back through A.
SubspaceBasis subspace_intersection(const SubspaceBasis& a, const SubspaceBasis& b);

/// sin of the largest principal angle from Im(A) to Im(B) (directional:
/// how far B sticks out of A). Zero-dimensional B gives 0.
double max_principal_sine(const SubspaceBasis& a, const SubspaceBasis& b);

/// Same subspace up to angle_tol (radians, small-angle regime).
bool subspaces_equal(const SubspaceBasis& a, const SubspaceBasis& b, double angle_tol = 1e-8);

/// Full-row-rank B with B B^T = Sigma, from the eigendecomposition of Sigma.
DenseMatrix noise_factor(const DenseMatrix& sigma);

/// Check Ker((H^+)^T) == Ker(H) as subspaces (angles <= 1e-8).
bool pinv_kernel_check(const DenseMatrix& h);

/// X solving A X = B for symmetric positive definite A (Cholesky).
DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> solve_spd(const DenseMatrix& a, const std::vector<double>& b);

// Optional sampling of the Moore-Penrose identities on every pseudoinversion.
// Used by the verification suite; off by default.
void set_pinv_verification(bool on);
bool pinv_verification_enabled();
struct PinvVerificationStats {
    std::uint64_t checks = 0;
    std::uint64_t failures = 0;
};
PinvVerificationStats pinv_verification_stats();
void reset_pinv_verification_stats();

/// Verify the four Moore-Penrose identities for a candidate pinv; returns
/// true when all hold within 1e-9 relative bounds.
bool moore_penrose_ok(const DenseMatrix& m, const DenseMatrix& mp);

/// Sampling hook for the estimators: when verification is enabled,
/// materializes the pseudoinverse from the factorization and records
/// whether the identities hold. No-op otherwise.
void verify_pinv_sample(const DenseMatrix& m, const SvdResult& s);

}  // namespace gridest::linalg
