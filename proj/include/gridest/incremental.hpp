#pragma once

#include <cstdint>
#include <vector>

#include "gridest/dense_matrix.hpp"
#include "gridest/linalg.hpp"

namespace gridest::incremental {

/// One monitor's slice of a stacked linear system A x = z.
struct LinearBlock {
    DenseMatrix A;
    std::vector<double> z;
};

/// One monitor's slice of a noisy measurement system (H and B row blocks).
struct WlsBlock {
    DenseMatrix H;  // m_i x n
    DenseMatrix B;  // m_i x q
    std::vector<double> z;
};

/// Tolerance for the a-posteriori consistency check:
/// ||z - A x_hat||_inf <= kConsistencyTol * max(1, ||z||_inf).
inline constexpr double kConsistencyTol = 1e-8;

struct RunStats {
    std::size_t communications = 0;  // estimate handoffs between monitors
    struct SvdDims {
        std::size_t rows = 0, cols = 0;
        std::size_t flop_surrogate() const { return rows * cols * std::min(rows, cols); }
    };
    std::vector<SvdDims> svds;
};

/// Running state of the block sweep: the partial minimum-norm solution and
/// an orthonormal basis of the still-unresolved directions. After block i,
/// x_hat satisfies every processed equation, x_hat is orthogonal to Im(K),
/// and Im(K) is the kernel of the processed stack.
class MinNormSolver {
  public:
    explicit MinNormSolver(std::size_t ambient);
    /// Resume from a received (estimate, unresolved-subspace) pair.
    MinNormSolver(std::vector<double> x_hat, linalg::SubspaceBasis kernel);

    void process(const LinearBlock& block);

    const std::vector<double>& estimate() const { return x_hat_; }
    const linalg::SubspaceBasis& unresolved() const { return kernel_; }
    std::size_t ambient() const { return x_hat_.size(); }

  private:
    std::vector<double> x_hat_;
    linalg::SubspaceBasis kernel_;
};

/// Sweeps the blocks in order and returns x_hat = (stacked A)^+ (stacked z).
/// Requires the stacked system to be consistent; checked a posteriori via
/// the residual, raising InconsistentSystem otherwise.
///
/// wire_codec simulates the bandwidth optimization of shipping the smaller
/// of the unresolved basis or its orthogonal complement between monitors;
/// off by default, and the estimate is unchanged up to basis rotations.
std::vector<double> incremental_min_norm(const std::vector<LinearBlock>& blocks,
                                         std::size_t ambient, RunStats* stats = nullptr,
                                         bool wire_codec = false);

/// Wire form of a handoff (x_hat, K): whichever of the basis or its
/// orthogonal complement has fewer columns, plus the tag saying which.
struct EncodedState {
    std::vector<double> x_hat;
    bool complement = false;
    DenseMatrix basis;

    std::size_t payload_doubles() const { return x_hat.size() + basis.size(); }
};

EncodedState encode_state(const std::vector<double>& x_hat, const linalg::SubspaceBasis& k);
std::pair<std::vector<double>, linalg::SubspaceBasis> decode_state(const EncodedState& wire);

struct WlsSolution {
    std::vector<double> x;  // n
    DenseMatrix W;          // n x p, x = W z
};

/// Direct weighted least-squares solve: x = (H^T Sigma^-1 H)^-1 H^T Sigma^-1 z.
/// Requires Ker(H) = {0} and SPD Sigma.
WlsSolution wls_oracle(const DenseMatrix& h, const DenseMatrix& sigma,
                       const std::vector<double>& z);

/// Approximate WLS estimate via the consistent embedding z = [H epsB](x, v):
/// runs the block sweep on augmented blocks [H_i  eps*B_i] and returns the
/// leading n components.
std::vector<double> wls_incremental(const std::vector<WlsBlock>& blocks, double epsilon,
                                    RunStats* stats = nullptr);

struct BlockPinv {
    DenseMatrix full;        // (n+q) x p, equals [H epsB]^+
    DenseMatrix top;         // n x p, tends to the WLS operator W as eps -> 0
    DenseMatrix correction;  // q x p, the D term of the closed form
};

/// Closed-form assembly of [H epsB]^+ from H^+, C = eps(I - H H^+)B and the
/// correction D. Requires eps > 0 and full-row-rank B.
BlockPinv block_pinv_formula(const DenseMatrix& h, const DenseMatrix& b, double epsilon);

/// The exact WLS-vs-embedded gap: x_wls - x_hat(eps) = eps * H^+ B D z.
std::vector<double> approximation_error_exact(const DenseMatrix& h, const DenseMatrix& b,
                                              const std::vector<double>& z, double epsilon);

/// Largest eps guaranteeing ||x_wls - x_hat(eps)|| <= target given a bound
/// on ||H^+ B D z||.
double epsilon_for_accuracy(double bound_hbdz, double target);

enum class InducedNorm { Inf, One, Two };

/// Upper bound ||I - H W|| * v_norm on the estimation residual.
double residual_bound(const DenseMatrix& h, const DenseMatrix& sigma, double v_norm,
                      InducedNorm norm = InducedNorm::Inf);

/// Default embedding parameter: 1e-6 * smax(H) / smax(B). Keeps the WLS gap
/// (which is second order in eps) far below typical tolerances while the
/// augmented system stays well conditioned for the one-sweep solver.
double default_epsilon(const DenseMatrix& h, const DenseMatrix& b);

/// Induced matrix norm used by residual_bound.
double induced_norm(const DenseMatrix& m, InducedNorm norm);

/// Augmented blocks [H_i eps*B_i] for a WLS system; ambient is n + q.
std::vector<LinearBlock> augment_blocks(const std::vector<WlsBlock>& blocks, double epsilon);

}  // namespace gridest::incremental
