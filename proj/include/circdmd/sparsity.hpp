#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "circdmd/spectral.hpp"

namespace circdmd {

/// J(b) = b* P b - q* b - b* q + s, the squared Frobenius error of a
/// mode/amplitude/Vandermonde model in POD coordinates.
struct QuadraticForm {
    CMatrix p;
    CVector q;
    double s = 0.0;

    Index size() const noexcept { return q.size(); }

    double evaluate(const Eigen::Ref<const CVector>& b) const {
        const Complex quad = b.dot(p * b);  // conjugates the first argument
        const Complex lin = q.dot(b);
        return quad.real() - 2.0 * lin.real() + s;
    }

    CVector gradient(const Eigen::Ref<const CVector>& b) const { return 2.0 * (p * b - q); }

    /// Unconstrained minimizer p^{-1} q.
    CVector minimizer() const { return p.ldlt().solve(q); }
};

/// Builds the amplitude objective for modes expressed in POD coordinates
/// (W, the reduced eigenvectors, for projected modes) against the rank-r
/// target G = Sigma_r V_r^T:
///   P = (W* W) o conj(Psi Psi*),  q = conj(diag(Psi G* W)),  s = tr(G* G).
inline QuadraticForm build_quadratic(const CMatrix& modes_pod, const EvolutionMatrix& psi,
                                     const ReducedSvd& target_svd) {
    const Index r = modes_pod.cols();
    if (modes_pod.rows() != target_svd.rank() || psi.values.rows() != r ||
        psi.horizon() != target_svd.right.rows())
        throw ShapeError("build_quadratic: modes, Vandermonde and SVD do not conform");
    const CMatrix& v = psi.values;
    const Matrix g = target_svd.singular.asDiagonal() * target_svd.right.transpose();  // r x T

    QuadraticForm form;
    const CMatrix vv = v * v.adjoint();
    form.p = (modes_pod.adjoint() * modes_pod).cwiseProduct(vv.conjugate());
    form.p = 0.5 * (form.p + form.p.adjoint()).eval();
    const CMatrix vg = v * g.transpose().cast<Complex>();  // Psi G*
    form.q = (vg * modes_pod).diagonal().conjugate();
    form.s = g.squaredNorm();
    return form;
}

struct AdmmOptions {
    double rho = 1.0;
    int max_iter = 10000;
    double eps_abs = 1e-6;
    double eps_rel = 1e-4;
};

struct SparsitySolution {
    double gamma = 0.0;
    CVector amplitudes_sparse;
    std::vector<bool> support;
    CVector amplitudes_polished;
    Index nonzero_count = 0;
    double loss = 0.0;
    int iterations = 0;
    bool converged = false;
    /// final ADMM iterates (consensus variable and scaled dual) for warm starts
    CVector admm_consensus;
    CVector admm_dual;
};

/// Shrinks the magnitude of each entry by kappa, keeping its phase.
inline CVector complex_soft_threshold(const Eigen::Ref<const CVector>& v, double kappa) {
    CVector out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v(i));
        out(i) = mag > kappa ? v(i) * ((mag - kappa) / mag) : Complex(0.0);
    }
    return out;
}

/// ADMM on J(b) + gamma * ||beta||_1 subject to b = beta (scaled dual u).
/// Returns the support stage; amplitudes_polished is left empty.
inline SparsitySolution admm_sparsify(const QuadraticForm& form, double gamma,
                                      const AdmmOptions& opts = {},
                                      const CVector* warm_consensus = nullptr,
                                      const CVector* warm_dual = nullptr) {
    if (gamma < 0.0) throw RangeError("gamma must be non-negative");
    if (!(opts.rho > 0.0)) throw RangeError("rho must be positive");
    const Index r = form.size();
    const double rho = opts.rho;
    const double sqrt_r = std::sqrt(static_cast<double>(r));

    CMatrix shifted = form.p;
    shifted.diagonal().array() += rho / 2.0;
    Eigen::LLT<CMatrix> factor(shifted);
    if (factor.info() != Eigen::Success) throw NumericalError("ADMM: P + rho/2 I is not positive definite");

    CVector beta = warm_consensus ? *warm_consensus : CVector::Zero(r);
    CVector u = warm_dual ? *warm_dual : CVector::Zero(r);
    CVector b = beta;
    const double kappa = gamma / rho;

    SparsitySolution sol;
    sol.gamma = gamma;
    for (int it = 1; it <= opts.max_iter; ++it) {
        b = factor.solve(form.q + (rho / 2.0) * (beta - u));
        const CVector beta_prev = beta;
        beta = complex_soft_threshold(b + u, kappa);
        u += b - beta;

        const double primal = (b - beta).norm();
        const double dual = rho * (beta - beta_prev).norm();
        const double eps_primal = sqrt_r * opts.eps_abs + opts.eps_rel * std::max(b.norm(), beta.norm());
        const double eps_dual = sqrt_r * opts.eps_abs + opts.eps_rel * (rho * u).norm();
        sol.iterations = it;
        if (primal < eps_primal && dual < eps_dual) {
            sol.converged = true;
            break;
        }
    }
    sol.amplitudes_sparse = beta;
    sol.support.resize(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) sol.support[static_cast<std::size_t>(i)] = beta(i) != Complex(0.0);
    sol.nonzero_count = static_cast<Index>(std::count(sol.support.begin(), sol.support.end(), true));
    sol.loss = form.evaluate(beta);
    sol.admm_consensus = beta;
    sol.admm_dual = u;
    return sol;
}

/// Minimizes J over amplitudes restricted to `support` via the KKT system
/// [P E; E* 0][b; nu] = [q; 0], E holding unit vectors of off-support indices.
inline CVector polish(const QuadraticForm& form, const std::vector<bool>& support) {
    const Index r = form.size();
    if (static_cast<Index>(support.size()) != r) throw ShapeError("polish: support length mismatch");
    std::vector<Index> off;
    for (Index i = 0; i < r; ++i)
        if (!support[static_cast<std::size_t>(i)]) off.push_back(i);
    if (static_cast<Index>(off.size()) == r) throw RangeError("polish: empty support");
    const Index k = static_cast<Index>(off.size());

    CMatrix kkt = CMatrix::Zero(r + k, r + k);
    kkt.topLeftCorner(r, r) = form.p;
    for (Index j = 0; j < k; ++j) {
        kkt(off[static_cast<std::size_t>(j)], r + j) = 1.0;
        kkt(r + j, off[static_cast<std::size_t>(j)]) = 1.0;
    }
    CVector rhs = CVector::Zero(r + k);
    rhs.head(r) = form.q;
    Eigen::FullPivLU<CMatrix> lu(kkt);
    if (!lu.isInvertible()) throw NumericalError("polish: singular KKT system");
    CVector b = lu.solve(rhs).head(r);
    for (Index i : off) b(i) = 0.0;
    return b;
}

/// ADMM support selection followed by polishing.
inline SparsitySolution sparsify(const QuadraticForm& form, double gamma, const AdmmOptions& opts = {},
                                 const CVector* warm_consensus = nullptr,
                                 const CVector* warm_dual = nullptr) {
    auto sol = admm_sparsify(form, gamma, opts, warm_consensus, warm_dual);
    if (sol.nonzero_count == 0) {
        sol.amplitudes_polished = CVector::Zero(form.size());
        sol.loss = form.s;
    } else {
        sol.amplitudes_polished = polish(form, sol.support);
        sol.loss = form.evaluate(sol.amplitudes_polished);
    }
    return sol;
}

/// One polished solution per gamma (ascending), each ADMM run warm-started
/// from the previous one's iterates.
inline std::vector<SparsitySolution> gamma_path(const QuadraticForm& form, const std::vector<double>& gammas,
                                                const AdmmOptions& opts = {}) {
    if (!std::is_sorted(gammas.begin(), gammas.end()))
        throw RangeError("gamma_path: gammas must be sorted ascending");
    std::vector<SparsitySolution> path;
    path.reserve(gammas.size());
    for (double g : gammas) {
        if (path.empty())
            path.push_back(sparsify(form, g, opts));
        else
            path.push_back(sparsify(form, g, opts, &path.back().admm_consensus, &path.back().admm_dual));
    }
    return path;
}

}  // namespace circdmd
