#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "circdmd/datamodel.hpp"
#include "circdmd/embedding.hpp"

namespace circdmd {

/// Rank-r factors M ~ left * diag(singular) * right^T, singular descending.
/// `all_singular` keeps the full spectrum the rank was chosen from.
struct ReducedSvd {
    Matrix left;
    Vector singular;
    Matrix right;
    Vector all_singular;

    Index rank() const noexcept { return singular.size(); }
};

/// Either the optimal hard threshold (automatic) or a fixed rank.
struct RankRule {
    std::optional<Index> fixed;

    static RankRule automatic() { return {}; }
    static RankRule fixed_rank(Index r) { return {r}; }
    bool is_auto() const noexcept { return !fixed.has_value(); }
};

enum class ModeFlavor { Exact, Projected };

enum class Method { Dmd, Hankel, FbHankel, TlsHankel, Circ, CircSp };

/// Eigenvalues, modes and amplitudes of one decomposition plus provenance.
struct DynamicSpectrum {
    CVector eigenvalues;
    CMatrix modes_exact;
    CMatrix modes_projected;
    CMatrix eig_vectors_reduced;
    CVector amplitudes;
    /// false for modes whose amplitude was zeroed by sparsity promotion
    std::vector<bool> active;

    struct Meta {
        Method method = Method::Dmd;
        Index tau = 1;
        Index rank = 0;
        double gamma = 0.0;
        Index n = 0;         // sensors in the original space
        Index source_t = 0;  // columns of the original training matrix
        ModeFlavor flavor = ModeFlavor::Exact;
    } meta;

    const CMatrix& modes() const {
        return meta.flavor == ModeFlavor::Exact ? modes_exact : modes_projected;
    }
    Index size() const noexcept { return eigenvalues.size(); }
    Index active_count() const {
        return static_cast<Index>(std::count(active.begin(), active.end(), true));
    }
};

/// Vandermonde matrix of eigenvalue powers, row i = (1, l_i, l_i^2, ...).
struct EvolutionMatrix {
    CMatrix values;
    Index horizon() const noexcept { return values.cols(); }
};

namespace detail {

inline double median_of(std::vector<double> v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

}  // namespace detail

/// Polynomial factor of the optimal hard threshold for aspect ratio beta.
inline double hard_threshold_factor(double beta) {
    return 0.56 * beta * beta * beta - 0.95 * beta * beta + 1.82 * beta + 1.43;
}

/// Optimal hard-threshold rank for an m x n matrix with singular values
/// `singular_values`. beta is n/m (columns over embedded rows); a wide matrix
/// uses m/n and emits a warning. Never returns less than 1.
inline Index optimal_rank(const Eigen::Ref<const Vector>& singular_values, Index m, Index n) {
    if (singular_values.size() == 0) throw RangeError("optimal_rank: empty singular values");
    if (m <= 0 || n <= 0) throw RangeError("optimal_rank: matrix dimensions must be positive");
    double beta = static_cast<double>(n) / static_cast<double>(m);
    if (beta > 1.0) {
        warn("hard threshold: more columns than rows (" + std::to_string(n) + " > " +
             std::to_string(m) + "), using beta = rows/cols");
        beta = 1.0 / beta;
    }
    std::vector<double> sv(singular_values.data(), singular_values.data() + singular_values.size());
    const double delta = hard_threshold_factor(beta) * detail::median_of(sv);
    Index r = 0;
    for (double s : sv)
        if (s > delta) ++r;
    return std::max<Index>(r, 1);
}

namespace detail {

/// Gram eigenvalues below this fraction of the largest carry no information:
/// forming the Gram matrix squares the condition number.
inline double gram_cutoff(Index k) {
    return 10.0 * static_cast<double>(std::max<Index>(k, 1)) * std::numeric_limits<double>::epsilon();
}

}  // namespace detail

namespace detail {

/// Eigen-decomposition of a Gram matrix of an m x n snapshot matrix, sorted
/// descending, with the rank selected by `rule`.
struct GramSpectrum {
    Vector sigma;   // all singular values
    Matrix vectors; // matching Gram eigenvectors
    Index rank = 0;
};

inline GramSpectrum gram_spectrum(const Eigen::Ref<const Matrix>& gram, Index m, Index n, RankRule rule) {
    const Index k = gram.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");

    // solver order is ascending
    const Vector mu = eig.eigenvalues().reverse().cwiseMax(0.0);
    GramSpectrum out{mu.cwiseSqrt(), eig.eigenvectors().rowwise().reverse(), 0};
    if (!(mu(0) > 0.0)) throw RankDeficiencyError("snapshot matrix is numerically zero");

    const double floor = mu(0) * gram_cutoff(k);
    Index numerical = 0;
    while (numerical < k && mu(numerical) > floor) ++numerical;

    if (rule.is_auto()) {
        out.rank = std::min(optimal_rank(out.sigma, m, n), numerical);
    } else {
        out.rank = *rule.fixed;
        if (out.rank < 1 || out.rank > k)
            throw RangeError("fixed rank " + std::to_string(out.rank) + " outside [1, " + std::to_string(k) + "]");
        if (out.rank > numerical)
            throw RankDeficiencyError("requested rank " + std::to_string(out.rank) +
                                      " exceeds numerical rank " + std::to_string(numerical));
    }
    return out;
}

}  // namespace detail

/// Reduced SVD from a precomputed Gram matrix. When `gram_is_right` the Gram
/// is M^T M (n x n) and yields right vectors; otherwise it is M M^T.
inline ReducedSvd svd_from_gram(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& gram,
                                bool gram_is_right, RankRule rule) {
    const Index k = gram.rows();
    if (gram.cols() != k || k != (gram_is_right ? m.cols() : m.rows()))
        throw ShapeError("Gram matrix does not match the snapshot matrix");
    const auto g = detail::gram_spectrum(gram, m.rows(), m.cols(), rule);
    const Index r = g.rank;

    ReducedSvd out;
    out.singular = g.sigma.head(r);
    out.all_singular = g.sigma;
    const Vector inv = out.singular.cwiseInverse();
    if (gram_is_right) {
        out.right = g.vectors.leftCols(r);
        out.left = (m * out.right) * inv.asDiagonal();
    } else {
        out.left = g.vectors.leftCols(r);
        out.right = (m.transpose() * out.left) * inv.asDiagonal();
    }
    return out;
}

/// Method of snapshots: eigendecompose the smaller Gram matrix, then recover
/// the other singular vectors by one multiplication with M.
inline ReducedSvd snapshot_svd(const Eigen::Ref<const Matrix>& m, RankRule rule) {
    if (m.size() == 0) throw ShapeError("snapshot_svd: empty matrix");
    const bool tall = m.rows() >= m.cols();
    Matrix gram;
    if (tall) {
        gram = Matrix::Zero(m.cols(), m.cols());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
    } else {
        gram = Matrix::Zero(m.rows(), m.rows());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(m);
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    return svd_from_gram(m, gram, tall, rule);
}

/// Projection of the best-fit operator onto the POD basis of the source:
/// U_r^T * target * V_r * Sigma_r^{-1}.
inline Matrix projected_dynamics(const Eigen::Ref<const Matrix>& target, const ReducedSvd& svd) {
    if (target.rows() != svd.left.rows() || target.cols() != svd.right.rows())
        throw ShapeError("projected_dynamics: target is " + std::to_string(target.rows()) + "x" +
                         std::to_string(target.cols()) + ", SVD expects " +
                         std::to_string(svd.left.rows()) + "x" + std::to_string(svd.right.rows()));
    return (svd.left.transpose() * (target * svd.right)) * svd.singular.cwiseInverse().asDiagonal();
}

struct Eigenpairs {
    CVector values;
    CMatrix vectors;
};

namespace detail {

/// Descending modulus, then descending phase so the positive-frequency
/// member of a conjugate pair comes first.
inline Eigenpairs sorted_pairs(const CVector& values, const CMatrix& vectors) {
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const double ma = std::abs(values(a));
        const double mb = std::abs(values(b));
        if (ma != mb) return ma > mb;
        return std::arg(values(a)) > std::arg(values(b));
    });
    Eigenpairs out{CVector(values.size()), CMatrix(vectors.rows(), vectors.cols())};
    for (std::size_t j = 0; j < order.size(); ++j) {
        out.values(static_cast<Index>(j)) = values(order[j]);
        out.vectors.col(static_cast<Index>(j)) = vectors.col(order[j]);
    }
    return out;
}

}  // namespace detail

inline Eigenpairs eigendecompose(const Eigen::Ref<const Matrix>& a_tilde) {
    if (a_tilde.rows() < 1 || a_tilde.rows() != a_tilde.cols())
        throw ShapeError("eigendecompose: matrix must be square and non-empty");
    Eigen::EigenSolver<Matrix> solver(a_tilde, true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
    return detail::sorted_pairs(solver.eigenvalues(), solver.eigenvectors());
}

inline Eigenpairs eigendecompose(const Eigen::Ref<const CMatrix>& a_tilde) {
    if (a_tilde.rows() < 1 || a_tilde.rows() != a_tilde.cols())
        throw ShapeError("eigendecompose: matrix must be square and non-empty");
    Eigen::ComplexEigenSolver<CMatrix> solver(a_tilde, true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
    CMatrix vectors = solver.eigenvectors();
    vectors.colwise().normalize();
    return detail::sorted_pairs(solver.eigenvalues(), vectors);
}

/// Exact modes target * V_r * Sigma_r^{-1} * W, or projected modes U_r * W.
inline CMatrix dynamic_modes(const Eigen::Ref<const Matrix>& target, const ReducedSvd& svd,
                             const CMatrix& w, ModeFlavor flavor) {
    if (w.rows() != svd.rank())
        throw ShapeError("dynamic_modes: eigenvector matrix has wrong row count");
    if (flavor == ModeFlavor::Projected) return svd.left.cast<Complex>() * w;
    if (target.rows() != svd.left.rows() || target.cols() != svd.right.rows())
        throw ShapeError("dynamic_modes: target shape does not match the SVD");
    const Matrix lifted = (target * svd.right) * svd.singular.cwiseInverse().asDiagonal();
    return lifted.cast<Complex>() * w;
}

/// Pseudoinverse singular values below this fraction of the largest are zero.
inline constexpr double pinv_tolerance = 1e-12;

/// Least-squares amplitudes b minimizing ||modes * b - initial||_2.
inline CVector amplitudes(const CMatrix& modes, const Eigen::Ref<const CVector>& initial) {
    if (modes.cols() == 0) throw RankDeficiencyError("amplitudes: no modes");
    if (modes.rows() != initial.size())
        throw ShapeError("amplitudes: initial condition length does not match modes");
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(modes);
    cod.setThreshold(pinv_tolerance);
    return cod.solve(initial);
}

inline CVector amplitudes(const CMatrix& modes, const Eigen::Ref<const Vector>& initial) {
    return amplitudes(modes, CVector(initial.cast<Complex>()));
}

/// Entry (i, t) = eigenvalue_i^(t + first_power).
inline EvolutionMatrix vandermonde(const Eigen::Ref<const CVector>& eigenvalues, Index horizon,
                                   Index first_power = 0) {
    if (horizon < 1) throw RangeError("vandermonde: horizon must be at least 1");
    EvolutionMatrix out{CMatrix(eigenvalues.size(), horizon)};
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        const Complex lambda = eigenvalues(i);
        Complex v = first_power == 0 ? Complex(1.0) : std::pow(lambda, static_cast<double>(first_power));
        for (Index t = 0; t < horizon; ++t) {
            out.values(i, t) = v;
            v *= lambda;
        }
    }
    return out;
}

/// Real part of Phi * diag(b) * Psi over `horizon` columns, in embedded space.
inline Matrix reconstruct(const DynamicSpectrum& spectrum, Index horizon, Index first_power = 0) {
    const auto psi = vandermonde(spectrum.eigenvalues, horizon, first_power);
    const CMatrix scaled = spectrum.modes() * spectrum.amplitudes.asDiagonal();
    return (scaled * psi.values).real();
}

/// Continuous-time evaluation at fractional time index t (1-based grid):
/// each mode grows at rate log(lambda)/delta_t for (t - 1) * delta_t hours.
inline Vector extrapolate_continuous(const DynamicSpectrum& spectrum, double t, double delta_t) {
    if (!(delta_t > 0.0)) throw RangeError("delta_t must be positive");
    const double elapsed = (t - 1.0) * delta_t;
    CVector weights(spectrum.size());
    for (Index i = 0; i < spectrum.size(); ++i) {
        const Complex lambda = spectrum.eigenvalues(i);
        if (lambda == Complex(0.0))
            throw SingularEigenvalueError("zero eigenvalue has no continuous-time rate");
        const Complex omega = std::log(lambda) / delta_t;
        weights(i) = spectrum.amplitudes(i) * std::exp(omega * elapsed);
    }
    return (spectrum.modes() * weights).real();
}

/// Reorder modes by descending |b_i| * ||phi_i|| (stable).
inline void sort_by_dominance(DynamicSpectrum& s) {
    const Index r = s.size();
    std::vector<double> weight(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i)
        weight[static_cast<std::size_t>(i)] = std::abs(s.amplitudes(i)) * s.modes().col(i).norm();
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return weight[static_cast<std::size_t>(a)] > weight[static_cast<std::size_t>(b)];
    });
    auto permute_cols = [&](CMatrix& m) {
        if (m.cols() != r) return;
        CMatrix out(m.rows(), r);
        for (Index j = 0; j < r; ++j) out.col(j) = m.col(order[static_cast<std::size_t>(j)]);
        m = std::move(out);
    };
    CVector lambda(r), b(r);
    std::vector<bool> active(static_cast<std::size_t>(r), true);
    for (Index j = 0; j < r; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        lambda(j) = s.eigenvalues(src);
        b(j) = s.amplitudes(src);
        if (!s.active.empty()) active[static_cast<std::size_t>(j)] = s.active[static_cast<std::size_t>(src)];
    }
    permute_cols(s.modes_exact);
    permute_cols(s.modes_projected);
    permute_cols(s.eig_vectors_reduced);
    s.eigenvalues = std::move(lambda);
    s.amplitudes = std::move(b);
    s.active = std::move(active);
}

}  // namespace circdmd
