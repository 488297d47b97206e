#pragma once

#include <numeric>
#include <vector>

#include "circdmd/datamodel.hpp"

namespace circdmd {

enum class EmbeddingKind { AntiCirculant, Hankel };

/// Delay-embedded matrix. Row block i (0-based) holds the i-th delayed copy
/// of an N-row source; see anti_circulant() and hankel() for the layouts.
struct EmbeddedMatrix {
    Matrix values;
    EmbeddingKind kind;
    Index tau;
    Index source_n;
    Index source_t;

    auto block(Index i) const { return values.middleRows(i * source_n, source_n); }
};

/// Cyclic column rotation. Column t of the result is column (t - shift) mod T
/// of the input, so a negative shift moves later columns to the front:
/// circshift([x1 x2 x3], -1) == [x2 x3 x1].
inline Matrix circshift(const Eigen::Ref<const Matrix>& x, Index shift) {
    const Index cols = x.cols();
    Matrix out(x.rows(), cols);
    if (cols == 0) return out;
    const Index s = ((shift % cols) + cols) % cols;
    // out(:, t) = x(:, t - s)
    if (s == 0) return x;
    out.rightCols(cols - s) = x.leftCols(cols - s);
    out.leftCols(s) = x.rightCols(s);
    return out;
}

/// Column permutation p = [T, 1, ..., T-1] defining P_T = I_T(:, p).
struct Permutation {
    Index order;
    std::vector<Index> mapping;  // 0-based: column j of P_T is e_{mapping[j]}

    explicit Permutation(Index t) : order(t), mapping(static_cast<std::size_t>(t)) {
        if (t < 1) throw RangeError("permutation order must be positive");
        mapping[0] = t - 1;
        for (Index j = 1; j < t; ++j) mapping[static_cast<std::size_t>(j)] = j - 1;
    }

    Matrix matrix() const {
        Matrix p = Matrix::Zero(order, order);
        for (Index j = 0; j < order; ++j) p(mapping[static_cast<std::size_t>(j)], j) = 1.0;
        return p;
    }
};

inline void check_tau(Index tau, Index t) {
    if (tau < 1 || tau > t)
        throw RangeError("tau " + std::to_string(tau) + " outside [1, " + std::to_string(t) + "]");
}

/// Stack tau cyclically shifted copies: block i (1-based) is circshift(X, -i),
/// so the first block starts at x_2 and the matrix is [c_2, ..., c_T, c_1].
inline EmbeddedMatrix anti_circulant(const Eigen::Ref<const Matrix>& x, Index tau) {
    const Index n = x.rows();
    const Index t = x.cols();
    check_tau(tau, t);
    EmbeddedMatrix out{Matrix(n * tau, t), EmbeddingKind::AntiCirculant, tau, n, t};
    for (Index i = 1; i <= tau; ++i) out.values.middleRows((i - 1) * n, n) = circshift(x, -i);
    return out;
}

inline EmbeddedMatrix anti_circulant(const SpeedMatrix& x, Index tau) {
    return anti_circulant(x.values(), tau);
}

/// C * P_T: rotates the columns right by one so that column t is c_t and
/// block i starts at x_i.
inline EmbeddedMatrix apply_right_permutation(const EmbeddedMatrix& c) {
    if (c.kind != EmbeddingKind::AntiCirculant)
        throw KindError("right permutation applies to anti-circulant embeddings only");
    EmbeddedMatrix out = c;
    out.values = circshift(c.values, 1);
    return out;
}

/// Hankel embedding with T - tau + 1 columns; block i holds x_i ... x_{T-tau+i}.
inline EmbeddedMatrix hankel(const Eigen::Ref<const Matrix>& x, Index tau) {
    const Index n = x.rows();
    const Index t = x.cols();
    check_tau(tau, t);
    const Index cols = t - tau + 1;
    EmbeddedMatrix out{Matrix(n * tau, cols), EmbeddingKind::Hankel, tau, n, t};
    for (Index i = 0; i < tau; ++i) out.values.middleRows(i * n, n) = x.middleCols(i, cols);
    return out;
}

inline EmbeddedMatrix hankel(const SpeedMatrix& x, Index tau) { return hankel(x.values(), tau); }

/// Rows rotated down by `shift`: row s of the result is row (s - shift) mod T.
inline Matrix rotate_rows(const Eigen::Ref<const Matrix>& m, Index shift) {
    const Index rows = m.rows();
    if (rows == 0) return m;
    const Index s = ((shift % rows) + rows) % rows;
    if (s == 0) return m;
    Matrix out(rows, m.cols());
    out.bottomRows(rows - s) = m.topRows(rows - s);
    out.topRows(s) = m.bottomRows(s);
    return out;
}

/// (C P_T) * M without forming the embedding. Block i (0-based) of C P_T is
/// circshift(X, -i), and circshift(X, -i) * M = X * rotate_rows(M, i).
inline Matrix permuted_anti_circulant_times(const Eigen::Ref<const Matrix>& x, Index tau,
                                           const Eigen::Ref<const Matrix>& m) {
    const Index n = x.rows();
    check_tau(tau, x.cols());
    if (m.rows() != x.cols()) throw ShapeError("permuted_anti_circulant_times: M must have T rows");
    Matrix out(n * tau, m.cols());
    for (Index i = 0; i < tau; ++i) out.middleRows(i * n, n).noalias() = x * rotate_rows(m, i);
    return out;
}

/// C * M = (C P_T)(P_T^T M); P_T^T rotates rows down by one.
inline Matrix anti_circulant_times(const Eigen::Ref<const Matrix>& x, Index tau, const Eigen::Ref<const Matrix>& m) {
    if (m.rows() != x.cols()) throw ShapeError("anti_circulant_times: M must have T rows");
    return permuted_anti_circulant_times(x, tau, rotate_rows(m, 1));
}

/// Averaging inverse of anti_circulant(): block i (1-based) is rotated back by
/// i columns and the tau estimates are averaged. The rotation is cyclic over
/// the width of the input, which may exceed the original T for forecasts.
inline Matrix inverse_anti_circulant(const Eigen::Ref<const Matrix>& c, Index n, Index tau) {
    if (n < 1 || tau < 1 || c.rows() != n * tau)
        throw ShapeError("inverse anti-circulant: " + std::to_string(c.rows()) +
                         " rows is not n*tau = " + std::to_string(n * tau));
    Matrix out = Matrix::Zero(n, c.cols());
    for (Index i = 1; i <= tau; ++i) out += circshift(c.middleRows((i - 1) * n, n), i);
    return out / static_cast<double>(tau);
}

/// Averages the duplicated entries of a Hankel-structured matrix: x_t is the
/// mean of every block i whose column t - i lies inside the matrix.
inline Matrix inverse_hankel(const Eigen::Ref<const Matrix>& h, Index n, Index tau) {
    if (n < 1 || tau < 1 || h.rows() != n * tau)
        throw ShapeError("inverse hankel: " + std::to_string(h.rows()) +
                         " rows is not n*tau = " + std::to_string(n * tau));
    const Index cols = h.cols();
    const Index t = cols + tau - 1;
    Matrix out = Matrix::Zero(n, t);
    Vector count = Vector::Zero(t);
    for (Index i = 0; i < tau; ++i) {
        out.middleCols(i, cols) += h.middleRows(i * n, n);
        count.segment(i, cols).array() += 1.0;
    }
    for (Index j = 0; j < t; ++j) out.col(j) /= count(j);
    return out;
}

/// Gram matrix (C P_T)^T (C P_T) computed from X^T X without forming the
/// embedding: entry (s, t) sums X^T X along a cyclic diagonal window of
/// length tau.
inline Matrix anti_circulant_gram(const Eigen::Ref<const Matrix>& x, Index tau) {
    const Index t = x.cols();
    check_tau(tau, t);
    Matrix k = Matrix::Zero(t, t);
    k.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    k = k.selfadjointView<Eigen::Lower>();
    Matrix g(t, t);
    std::vector<double> diag(static_cast<std::size_t>(2 * t));
    std::vector<double> prefix(static_cast<std::size_t>(2 * t + 1));
    for (Index d = 0; d < t; ++d) {
        // values k(s, s + d) for s = 0..T-1, doubled for cyclic windows
        for (Index s = 0; s < t; ++s) {
            const double v = k(s, (s + d) % t);
            diag[static_cast<std::size_t>(s)] = v;
            diag[static_cast<std::size_t>(s + t)] = v;
        }
        prefix[0] = 0.0;
        for (std::size_t j = 0; j < diag.size(); ++j) prefix[j + 1] = prefix[j] + diag[j];
        for (Index s = 0; s < t; ++s) {
            const auto a = static_cast<std::size_t>(s);
            g(s, (s + d) % t) = prefix[a + static_cast<std::size_t>(tau)] - prefix[a];
        }
    }
    return 0.5 * (g + g.transpose());
}

}  // namespace circdmd
