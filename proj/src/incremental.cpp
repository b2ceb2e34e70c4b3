#include "gridest/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridest/kernels.hpp"

namespace gridest::incremental {


using kernels::max_abs;
using kernels::multiply;
using linalg::SubspaceBasis;
using linalg::SvdResult;

MinNormSolver::MinNormSolver(std::size_t ambient)
    : x_hat_(ambient, 0.0), kernel_(SubspaceBasis::full(ambient)) {}

MinNormSolver::MinNormSolver(std::vector<double> x_hat, SubspaceBasis kernel)
    : x_hat_(std::move(x_hat)), kernel_(std::move(kernel)) {
    if (kernel_.ambient_dim != x_hat_.size())
        throw ContractViolation("MinNormSolver: estimate and kernel ambient dims differ");
}

void MinNormSolver::process(const LinearBlock& block) {
    require_finite(block.A, "MinNormSolver");
    require_finite(block.z, "MinNormSolver");
    if (block.A.cols() != ambient())
        throw ContractViolation("MinNormSolver: block width != ambient dimension");
    if (block.A.rows() != block.z.size())
        throw ContractViolation("MinNormSolver: block row count != z length");
    if (kernel_.is_zero()) {
        // fully determined; remaining blocks can only confirm the estimate
        return;
    }

    // M = A_i K_{i-1}; correct the estimate inside the unresolved subspace
    // and shrink it by M's kernel. The rank cut is taken against the block's
    // own magnitude so that a fully redundant block (M numerically zero)
    // degrades to a no-op instead of inverting rounding noise.
    const DenseMatrix m = multiply(block.A, kernel_.basis);
    SvdResult s = linalg::svd(m);
    const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    const double scale = std::max(smax, kernels::max_abs(block.A));
    s.rank = linalg::rank_at(s, linalg::kSubspaceRankTol * scale);
    linalg::verify_pinv_sample(m, s);

    std::vector<double> resid = block.z;
    const std::vector<double> predicted = kernels::apply(block.A, x_hat_);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= predicted[i];

    const std::vector<double> w = linalg::pinv_apply(s, resid);
    const std::vector<double> step = kernels::apply(kernel_.basis, w);
    for (std::size_t i = 0; i < x_hat_.size(); ++i) x_hat_[i] += step[i];

    // K_i = K_{i-1} * Ker(M); the product of orthonormal factors is orthonormal
    const SubspaceBasis ker_m = linalg::kernel_from_svd(s, s.rank);
    kernel_ = SubspaceBasis(ambient(), multiply(kernel_.basis, ker_m.basis));
}

EncodedState encode_state(const std::vector<double>& x_hat, const SubspaceBasis& k) {
    EncodedState wire;
    wire.x_hat = x_hat;
    if (2 * k.dim() <= k.ambient_dim) {
        wire.complement = false;
        wire.basis = k.basis;
    } else {
        wire.complement = true;
        wire.basis = linalg::kernel_basis(k.basis.transposed()).basis;
    }
    return wire;
}

std::pair<std::vector<double>, SubspaceBasis> decode_state(const EncodedState& wire) {
    const std::size_t ambient = wire.x_hat.size();
    if (!wire.complement) return {wire.x_hat, SubspaceBasis(ambient, wire.basis)};
    return {wire.x_hat, linalg::kernel_basis(wire.basis.transposed())};
}

std::vector<double> incremental_min_norm(const std::vector<LinearBlock>& blocks,
                                         std::size_t ambient, RunStats* stats,
                                         bool wire_codec) {
    MinNormSolver solver(ambient);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (stats) {
            stats->svds.push_back({blocks[i].A.rows(), solver.unresolved().dim()});
            if (i > 0) ++stats->communications;
        }
        if (i > 0 && wire_codec) {
            // round-trip the handoff through its wire form
            auto [x, k] = decode_state(encode_state(solver.estimate(), solver.unresolved()));
            solver = MinNormSolver(std::move(x), std::move(k));
        }
        solver.process(blocks[i]);
    }

    // a-posteriori consistency check over the whole stack
    double scale = 1.0, worst = 0.0;
    for (const LinearBlock& b : blocks) {
        scale = std::max(scale, max_abs(b.z));
        const std::vector<double> pred = kernels::apply(b.A, solver.estimate());
        for (std::size_t i = 0; i < pred.size(); ++i)
            worst = std::max(worst, std::abs(b.z[i] - pred[i]));
    }
    if (worst > kConsistencyTol * scale)
        throw InconsistentSystem("incremental_min_norm: residual " + std::to_string(worst) +
                                 " exceeds tolerance; z is not in the image of the stacked map");
    return solver.estimate();
}

WlsSolution wls_oracle(const DenseMatrix& h, const DenseMatrix& sigma,
                       const std::vector<double>& z) {
    require_finite(h, "wls_oracle");
    if (h.rows() != z.size())
        throw ContractViolation("wls_oracle: z length != measurement count");
    if (sigma.rows() != h.rows() || sigma.cols() != h.rows())
        throw ContractViolation("wls_oracle: covariance shape mismatch");

    const SvdResult s = linalg::svd(h);
    if (s.rank < h.cols())
        throw ContractViolation("wls_oracle: H is rank deficient (rank " +
                                std::to_string(s.rank) + " of " + std::to_string(h.cols()) + ")");

    // X = Sigma^-1 H, G = H^T X, W = G^-1 X^T
    const DenseMatrix x = linalg::solve_spd(sigma, h);
    const DenseMatrix gram = kernels::multiply_at_b(h, x);
    const DenseMatrix wt = linalg::solve_spd(gram, x.transposed());

    WlsSolution sol;
    sol.W = wt;
    sol.x = kernels::apply(sol.W, z);
    return sol;
}

std::vector<LinearBlock> augment_blocks(const std::vector<WlsBlock>& blocks, double epsilon) {
    if (blocks.empty()) throw ContractViolation("augment_blocks: no blocks");
    const std::size_t n = blocks.front().H.cols();
    const std::size_t q = blocks.front().B.cols();
    std::vector<LinearBlock> out;
    out.reserve(blocks.size());
    for (const WlsBlock& b : blocks) {
        if (b.H.cols() != n || b.B.cols() != q)
            throw ContractViolation("augment_blocks: inconsistent block widths");
        if (b.H.rows() != b.B.rows() || b.H.rows() != b.z.size())
            throw ContractViolation("augment_blocks: block row counts differ");
        out.push_back({hstack(b.H, kernels::scaled(b.B, epsilon)), b.z});
    }
    return out;
}

std::vector<double> wls_incremental(const std::vector<WlsBlock>& blocks, double epsilon,
                                    RunStats* stats) {
    if (!(epsilon > 0.0))
        throw ContractViolation("wls_incremental: epsilon must be positive");
    const std::size_t n = blocks.front().H.cols();
    const std::size_t q = blocks.front().B.cols();
    const std::vector<LinearBlock> aug = augment_blocks(blocks, epsilon);
    const std::vector<double> full = incremental_min_norm(aug, n + q, stats);
    return {full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n)};
}

BlockPinv block_pinv_formula(const DenseMatrix& h, const DenseMatrix& b, double epsilon) {
    require_finite(h, "block_pinv_formula");
    require_finite(b, "block_pinv_formula");
    if (!(epsilon > 0.0))
        throw ContractViolation("block_pinv_formula: epsilon must be positive");
    if (h.rows() != b.rows())
        throw ContractViolation("block_pinv_formula: H and B row counts differ");

    const std::size_t p = h.rows(), q = b.cols();

    const SvdResult hs = linalg::svd(h);
    const SvdResult bs = linalg::svd(b);
    if (bs.rank < p)
        throw ContractViolation("block_pinv_formula: B must have full row rank");
    const double b_smax = bs.singular_values.front();

    const DenseMatrix h_pinv = linalg::pinv_from_svd(hs);

    // projector onto the orthogonal complement of Im(H)
    DenseMatrix proj = DenseMatrix::identity(p);
    proj = kernels::subtract(proj, multiply(h, h_pinv));

    // C = eps (I - H H^+) B. Its numerical zeros inherit the projector's
    // rounding at the scale eps*smax(B), and C collapses to an exact zero
    // when H has full row rank; rank it against that natural scale rather
    // than its own largest singular value.
    const DenseMatrix c = kernels::scaled(multiply(proj, b), epsilon);
    SvdResult cs = linalg::svd(c);
    cs.rank = linalg::rank_at(cs, linalg::kSubspaceRankTol * epsilon * b_smax);
    linalg::verify_pinv_sample(c, cs);
    const DenseMatrix c_pinv = linalg::pinv_from_svd(cs);

    // E = I - C^+ C
    DenseMatrix e = DenseMatrix::identity(q);
    e = kernels::subtract(e, multiply(c_pinv, c));

    // (H H^T)^+ through the factorization of H
    DenseMatrix hht_pinv(p, p);
    for (std::size_t r = 0; r < hs.rank; ++r) {
        const double inv_s2 = 1.0 / (hs.singular_values[r] * hs.singular_values[r]);
        for (std::size_t i = 0; i < p; ++i) {
            const double ui = hs.U(i, r) * inv_s2;
            for (std::size_t j = 0; j < p; ++j) hht_pinv(i, j) += ui * hs.U(j, r);
        }
    }

    // inner = I + eps^2 E B^T (H H^T)^+ B E, SPD by construction
    const DenseMatrix be = multiply(b, e);
    const DenseMatrix gbe = multiply(hht_pinv, be);
    DenseMatrix inner = kernels::scaled(kernels::multiply_at_b(be, gbe), epsilon * epsilon);
    for (std::size_t i = 0; i < q; ++i) inner(i, i) += 1.0;

    // D = eps E inner^-1 B^T (H H^T)^+ (I - eps B C^+)
    DenseMatrix right = DenseMatrix::identity(p);
    right = kernels::subtract(right, kernels::scaled(multiply(b, c_pinv), epsilon));
    const DenseMatrix bt_g = multiply(kernels::multiply_at_b(b, hht_pinv), right);
    DenseMatrix d;
    try {
        d = kernels::scaled(multiply(e, linalg::solve_spd(inner, bt_g)), epsilon);
    } catch (const NotPositiveDefinite&) {
        throw NumericalFailure(
            "block_pinv_formula: inner system I + eps^2 E B^T (HH^T)^+ B E is "
            "numerically singular");
    }

    BlockPinv out;
    const DenseMatrix cd = kernels::add(c_pinv, d);
    out.top =
        kernels::subtract(h_pinv, kernels::scaled(multiply(h_pinv, multiply(b, cd)), epsilon));
    out.correction = d;
    out.full = vstack(out.top, cd);
    return out;
}

std::vector<double> approximation_error_exact(const DenseMatrix& h, const DenseMatrix& b,
                                              const std::vector<double>& z, double epsilon) {
    const BlockPinv bp = block_pinv_formula(h, b, epsilon);
    const std::vector<double> dz = kernels::apply(bp.correction, z);
    const std::vector<double> bdz = kernels::apply(b, dz);
    const DenseMatrix h_pinv = linalg::pseudoinverse(h);
    std::vector<double> err = kernels::apply(h_pinv, bdz);
    for (double& v : err) v *= epsilon;
    return err;
}

double epsilon_for_accuracy(double bound_hbdz, double target) {
    if (!(bound_hbdz > 0.0) || !(target > 0.0))
        throw ContractViolation("epsilon_for_accuracy: inputs must be positive");
    return target / bound_hbdz;
}

double induced_norm(const DenseMatrix& m, InducedNorm norm) {
    switch (norm) {
        case InducedNorm::Inf:
            return kernels::inf_norm(m);
        case InducedNorm::One:
            return kernels::inf_norm(m.transposed());
        case InducedNorm::Two: {
            const SvdResult s = linalg::svd(m);
            return s.singular_values.empty() ? 0.0 : s.singular_values.front();
        }
    }
    return 0.0;
}

double residual_bound(const DenseMatrix& h, const DenseMatrix& sigma, double v_norm,
                      InducedNorm norm) {
    const WlsSolution sol = wls_oracle(h, sigma, std::vector<double>(h.rows(), 0.0));
    DenseMatrix i_hw = DenseMatrix::identity(h.rows());
    i_hw = kernels::subtract(i_hw, multiply(h, sol.W));
    return induced_norm(i_hw, norm) * v_norm;
}

double default_epsilon(const DenseMatrix& h, const DenseMatrix& b) {
    const SvdResult hs = linalg::svd(h);
    const SvdResult bs = linalg::svd(b);
    const double sh = hs.singular_values.empty() ? 0.0 : hs.singular_values.front();
    const double sb = bs.singular_values.empty() ? 0.0 : bs.singular_values.front();
    if (sb <= 0.0) throw ContractViolation("default_epsilon: B has no scale");
    return 1e-6 * (sh > 0.0 ? sh : 1.0) / sb;
}

}  // namespace gridest::incremental
