#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "circdmd/embedding.hpp"
#include "circdmd/sparsity.hpp"
#include "circdmd/spectral.hpp"

namespace circdmd {

struct VariantConfig {
    Method method = Method::Circ;
    Index tau = 1;
    RankRule rank_rule = RankRule::automatic();
    double gamma = 0.0;
    ModeFlavor mode_flavor = ModeFlavor::Exact;
    /// rank of the augmented [X1; X2] projection for tls; auto when empty
    std::optional<Index> tls_rank;
    AdmmOptions admm;
};

inline std::string_view method_name(Method m) {
    switch (m) {
        case Method::Dmd: return "dmd";
        case Method::Hankel: return "hankel";
        case Method::FbHankel: return "fb-hankel";
        case Method::TlsHankel: return "tls-hankel";
        case Method::Circ: return "circ";
        case Method::CircSp: return "circ-sp";
    }
    return "?";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::Dmd, Method::Hankel, Method::FbHankel, Method::TlsHankel, Method::Circ,
                     Method::CircSp})
        if (method_name(m) == name) return m;
    throw UsageError("unknown method '" + std::string(name) + "'");
}

inline bool is_circulant(Method m) { return m == Method::Circ || m == Method::CircSp; }
inline bool is_hankel(Method m) {
    return m == Method::Hankel || m == Method::FbHankel || m == Method::TlsHankel;
}

namespace detail {

inline ReducedSvd truncate(const ReducedSvd& svd, Index r) {
    if (r >= svd.rank()) return svd;
    return ReducedSvd{svd.left.leftCols(r), svd.singular.head(r), svd.right.leftCols(r), svd.all_singular};
}

/// Eigenvalues, both mode flavors and amplitudes from a reduced operator.
/// `lifted` is target * V_r * Sigma_r^{-1}, the exact-mode basis.
template <typename AMatrix>
DynamicSpectrum spectrum_from_operator(const AMatrix& a_tilde, const Eigen::Ref<const Matrix>& lifted,
                                       const ReducedSvd& svd, const Eigen::Ref<const Vector>& initial,
                                       ModeFlavor flavor) {
    const auto pairs = eigendecompose(a_tilde);
    DynamicSpectrum s;
    s.eigenvalues = pairs.values;
    s.eig_vectors_reduced = pairs.vectors;
    s.modes_exact = lifted.cast<Complex>() * pairs.vectors;
    s.modes_projected = svd.left.cast<Complex>() * pairs.vectors;
    s.meta.flavor = flavor;
    s.meta.rank = svd.rank();
    s.amplitudes = amplitudes(s.modes(), initial);
    s.active.assign(static_cast<std::size_t>(s.size()), true);
    return s;
}

inline Matrix lift(const Eigen::Ref<const Matrix>& target, const ReducedSvd& svd) {
    return (target * svd.right) * svd.singular.cwiseInverse().asDiagonal();
}

inline DynamicSpectrum standard_pipeline(const Eigen::Ref<const Matrix>& source,
                                         const Eigen::Ref<const Matrix>& target, RankRule rule,
                                         const Eigen::Ref<const Vector>& initial, ModeFlavor flavor) {
    const auto svd = snapshot_svd(source, rule);
    const Matrix lifted = lift(target, svd);
    const Matrix a_tilde = svd.left.transpose() * lifted;
    return spectrum_from_operator(a_tilde, lifted, svd, initial, flavor);
}

inline void check_hankel_tau(Index tau, Index t) {
    if (tau < 1 || tau > t - 1)
        throw RangeError("tau " + std::to_string(tau) + " leaves fewer than two Hankel columns (T = " +
                         std::to_string(t) + ")");
}

inline DynamicSpectrum fit_dmd_pair(const Eigen::Ref<const Matrix>& snapshots, const VariantConfig& cfg) {
    const Index t = snapshots.cols();
    const Matrix x1 = snapshots.leftCols(t - 1);
    const Matrix x2 = snapshots.rightCols(t - 1);
    return standard_pipeline(x1, x2, cfg.rank_rule, snapshots.col(0), cfg.mode_flavor);
}

/// circDMD: source C P_T, target C, initial condition c_1 = C(:, T).
/// When the embedding is tall the SVD comes from the T x T Gram matrix and
/// every product with C or C P_T is taken block by block from X, so the
/// (N tau) x T embedding is never formed.
inline DynamicSpectrum fit_circulant(const Eigen::Ref<const Matrix>& x, const VariantConfig& cfg,
                                     ReducedSvd* svd_out = nullptr) {
    const Index tau = cfg.tau;
    const Index n = x.rows();
    const Index t = x.cols();
    check_tau(tau, t);

    ReducedSvd svd;
    if (n * tau >= t) {
        const auto g = gram_spectrum(anti_circulant_gram(x, tau), n * tau, t, cfg.rank_rule);
        svd.singular = g.sigma.head(g.rank);
        svd.all_singular = g.sigma;
        svd.right = g.vectors.leftCols(g.rank);
        svd.left = permuted_anti_circulant_times(x, tau, svd.right) * svd.singular.cwiseInverse().asDiagonal();
    } else {
        svd = snapshot_svd(apply_right_permutation(anti_circulant(x, tau)).values, cfg.rank_rule);
    }
    if (svd_out) *svd_out = svd;

    const Matrix lifted = anti_circulant_times(x, tau, svd.right) * svd.singular.cwiseInverse().asDiagonal();
    const Matrix a_tilde = svd.left.transpose() * lifted;
    Vector c1(n * tau);  // first column of C P_T: block i holds x_{i mod T}
    for (Index i = 0; i < tau; ++i) c1.segment(i * n, n) = x.col(i % t);
    return spectrum_from_operator(a_tilde, lifted, svd, c1, cfg.mode_flavor);
}

}  // namespace detail

/// Forward-backward Hankel DMD. The backward operator is mapped into the
/// forward POD basis before forming (A_f A_b^{-1})^{1/2}; each square-root
/// branch is chosen closest to an eigenvalue of A_f.
inline DynamicSpectrum fit_forward_backward(const SpeedMatrix& data, const VariantConfig& cfg) {
    detail::check_hankel_tau(cfg.tau, data.t());
    const auto h = hankel(data, cfg.tau);
    const Index cols = h.values.cols();
    const Matrix x1 = h.values.leftCols(cols - 1);
    const Matrix x2 = h.values.rightCols(cols - 1);

    auto svd1 = snapshot_svd(x1, cfg.rank_rule);
    auto svd2 = snapshot_svd(x2, cfg.rank_rule);
    const Index r = std::min(svd1.rank(), svd2.rank());
    svd1 = detail::truncate(svd1, r);
    svd2 = detail::truncate(svd2, r);

    const Matrix a_f = projected_dynamics(x2, svd1);
    const Matrix a_b = projected_dynamics(x1, svd2);
    const Matrix basis_change = svd1.left.transpose() * svd2.left;
    const Matrix a_b_aligned = basis_change * a_b * basis_change.transpose();

    Eigen::FullPivLU<Matrix> lu(a_b_aligned);
    if (!lu.isInvertible()) throw SingularBackwardError("backward propagator is singular");
    const Matrix product = a_f * lu.inverse();

    Eigen::EigenSolver<Matrix> prod_eig(product, true);
    if (prod_eig.info() != Eigen::Success) throw NumericalError("fbDMD: eigendecomposition failed");
    Eigen::EigenSolver<Matrix> fwd_eig(a_f, false);
    if (fwd_eig.info() != Eigen::Success) throw NumericalError("fbDMD: eigendecomposition failed");
    const CVector forward = fwd_eig.eigenvalues();

    CVector roots(r);
    for (Index j = 0; j < r; ++j) {
        const Complex root = std::sqrt(prod_eig.eigenvalues()(j));
        auto distance = [&](Complex z) { return (forward.array() - z).abs().minCoeff(); };
        roots(j) = distance(-root) < distance(root) ? -root : root;
    }
    const CMatrix vecs = prod_eig.eigenvectors();
    Eigen::PartialPivLU<CMatrix> vlu(vecs);
    const CMatrix a_tilde = vecs * roots.asDiagonal() * vlu.inverse();
    if (!a_tilde.allFinite()) throw NumericalError("fbDMD: matrix square root failed");

    auto s = detail::spectrum_from_operator(a_tilde, detail::lift(x2, svd1), svd1, h.values.col(0), cfg.mode_flavor);
    s.meta.method = Method::FbHankel;
    s.meta.tau = cfg.tau;
    s.meta.n = data.n();
    s.meta.source_t = data.t();
    sort_by_dominance(s);
    return s;
}

/// Total-least-squares Hankel DMD: project both snapshot sets onto the
/// leading right singular vectors of [X1; X2] and run DMD on the result.
inline DynamicSpectrum fit_total_least_squares(const SpeedMatrix& data, const VariantConfig& cfg) {
    detail::check_hankel_tau(cfg.tau, data.t());
    const auto h = hankel(data, cfg.tau);
    const Index cols = h.values.cols();
    const Index rows = h.values.rows();
    Matrix z(2 * rows, cols - 1);
    z.topRows(rows) = h.values.leftCols(cols - 1);
    z.bottomRows(rows) = h.values.rightCols(cols - 1);

    if (cfg.tls_rank && *cfg.tls_rank > cols - 1)
        throw RangeError("tls rank " + std::to_string(*cfg.tls_rank) + " exceeds " +
                         std::to_string(cols - 1) + " columns");
    const auto zsvd = snapshot_svd(z, cfg.tls_rank ? RankRule::fixed_rank(*cfg.tls_rank) : RankRule::automatic());
    const Matrix& vz = zsvd.right;
    const Matrix x1 = (z.topRows(rows) * vz) * vz.transpose();
    const Matrix x2 = (z.bottomRows(rows) * vz) * vz.transpose();

    RankRule rule = cfg.rank_rule;
    if (rule.fixed && *rule.fixed > zsvd.rank()) rule.fixed = zsvd.rank();
    auto svd = snapshot_svd(x1, rule);
    svd = detail::truncate(svd, zsvd.rank());
    const Matrix lifted = detail::lift(x2, svd);
    const Matrix a_tilde = svd.left.transpose() * lifted;
    auto s = detail::spectrum_from_operator(a_tilde, lifted, svd, x1.col(0), cfg.mode_flavor);
    s.meta.method = Method::TlsHankel;
    s.meta.tau = cfg.tau;
    s.meta.n = data.n();
    s.meta.source_t = data.t();
    sort_by_dominance(s);
    return s;
}

/// A circulant fit with projected modes together with the amplitude
/// quadratic J(b) = ||Sigma V^T - W diag(b) Psi||_F^2 over the training
/// window. Build it once and sweep gamma over it.
struct SparsityProblem {
    DynamicSpectrum spectrum;
    QuadraticForm form;
};

inline SparsityProblem sparsity_problem(const SpeedMatrix& data, const VariantConfig& cfg) {
    VariantConfig base = cfg;
    base.mode_flavor = ModeFlavor::Projected;
    ReducedSvd svd;
    SparsityProblem p;
    p.spectrum = detail::fit_circulant(data.values(), base, &svd);
    p.form = build_quadratic(p.spectrum.eig_vectors_reduced, vandermonde(p.spectrum.eigenvalues, data.t()), svd);
    p.spectrum.meta.method = Method::CircSp;
    p.spectrum.meta.tau = cfg.tau;
    p.spectrum.meta.n = data.n();
    p.spectrum.meta.source_t = data.t();
    return p;
}

/// Installs the polished amplitudes and support of one gamma.
inline DynamicSpectrum with_amplitudes(DynamicSpectrum s, const SparsitySolution& sol) {
    if (sol.amplitudes_polished.size() != s.size()) throw ShapeError("with_amplitudes: size mismatch");
    s.amplitudes = sol.amplitudes_polished;
    s.active = sol.support;
    s.meta.gamma = sol.gamma;
    return s;
}

/// Fits one of the six decompositions on an N x T training matrix.
inline DynamicSpectrum fit(const SpeedMatrix& data, const VariantConfig& cfg) {
    if (cfg.gamma < 0.0) throw RangeError("gamma must be non-negative");
    DynamicSpectrum s;
    switch (cfg.method) {
        case Method::Dmd:
            s = detail::fit_dmd_pair(data.values(), cfg);
            s.meta.tau = 1;
            break;
        case Method::Hankel: {
            detail::check_hankel_tau(cfg.tau, data.t());
            s = detail::fit_dmd_pair(hankel(data, cfg.tau).values, cfg);
            s.meta.tau = cfg.tau;
            break;
        }
        case Method::FbHankel: return fit_forward_backward(data, cfg);
        case Method::TlsHankel: return fit_total_least_squares(data, cfg);
        case Method::Circ:
        case Method::CircSp: {
            if (cfg.method == Method::Circ || cfg.gamma == 0.0) {
                s = detail::fit_circulant(data.values(), cfg);
                break;
            }
            auto problem = sparsity_problem(data, cfg);
            const auto sol = sparsify(problem.form, cfg.gamma, cfg.admm);
            if (!sol.converged)
                warn("ADMM stopped after " + std::to_string(sol.iterations) +
                     " iterations without meeting tolerance");
            s = with_amplitudes(std::move(problem.spectrum), sol);
            break;
        }
    }
    s.meta.method = cfg.method;
    s.meta.gamma = cfg.method == Method::CircSp ? cfg.gamma : 0.0;
    if (is_circulant(cfg.method)) s.meta.tau = cfg.tau;
    s.meta.n = data.n();
    s.meta.source_t = data.t();
    sort_by_dominance(s);
    return s;
}

/// Reconstruction (horizon 0) or forecast in the original N-row space:
/// N x (T + horizon). Circulant fits are read out through the averaging
/// inverse of the anti-circulant embedding, Hankel fits by averaging every
/// delayed copy, plain DMD directly. The embedded reconstruction is formed
/// one block of N rows at a time.
inline Matrix predict(const DynamicSpectrum& s, Index horizon) {
    if (horizon < 0) throw RangeError("horizon must be non-negative");
    const Index t = s.meta.source_t;
    const Index n = s.meta.n;
    const Index tau = s.meta.tau;
    const CMatrix& modes = s.modes();
    if (modes.rows() != n * tau) throw ShapeError("predict: modes do not match n * tau rows");

    if (is_circulant(s.meta.method)) {
        // column t of C holds c_{t+1}, one power ahead of C P_T
        const Index cols = t + horizon;
        const CMatrix weighted = s.amplitudes.asDiagonal() * vandermonde(s.eigenvalues, cols, 1).values;
        Matrix out = Matrix::Zero(n, cols);
        for (Index i = 1; i <= tau; ++i)
            out += circshift((modes.middleRows((i - 1) * n, n) * weighted).real(), i);
        return out / static_cast<double>(tau);
    }
    if (is_hankel(s.meta.method)) {
        const Index cols = t - tau + 1 + horizon;
        const CMatrix weighted = s.amplitudes.asDiagonal() * vandermonde(s.eigenvalues, cols).values;
        Matrix out = Matrix::Zero(n, cols + tau - 1);
        Vector count = Vector::Zero(cols + tau - 1);
        for (Index i = 0; i < tau; ++i) {
            out.middleCols(i, cols) += (modes.middleRows(i * n, n) * weighted).real();
            count.segment(i, cols).array() += 1.0;
        }
        return out * count.cwiseInverse().asDiagonal();
    }
    return reconstruct(s, t + horizon);
}

}  // namespace circdmd
