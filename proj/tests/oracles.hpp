#pragma once

// Independent reference computations for the test suites. Nothing here may
// call into the snapshot/Gram code paths it is used to check.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Full singular values by divide-and-conquer SVD on the matrix itself.
inline Vector direct_singular_values(const Matrix& m) {
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues();
}

inline Eigen::BDCSVD<Matrix> direct_svd(const Matrix& m) {
    return Eigen::BDCSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

/// Real block-diagonal matrix with rotation blocks of the given angles and
/// radii, conjugated by a random well-conditioned basis.
inline Matrix system_with_spectrum(const std::vector<double>& angles, const std::vector<double>& radii,
                                   std::mt19937_64& rng) {
    const auto dim = static_cast<Eigen::Index>(2 * angles.size());
    Matrix d = Matrix::Zero(dim, dim);
    for (std::size_t k = 0; k < angles.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(2 * k);
        const double c = radii[k] * std::cos(angles[k]);
        const double s = radii[k] * std::sin(angles[k]);
        d(i, i) = c;
        d(i, i + 1) = -s;
        d(i + 1, i) = s;
        d(i + 1, i + 1) = c;
    }
    Matrix q = Matrix::Identity(dim, dim) + 0.3 * random_matrix(dim, dim, rng);
    return q * d * q.inverse();
}

/// Greedy nearest matching distance: max over `expected` of the distance to
/// the closest unused entry of `actual`.
inline double match_distance(std::vector<std::complex<double>> expected,
                             std::vector<std::complex<double>> actual) {
    double worst = 0.0;
    for (auto e : expected) {
        double best = 1e300;
        std::size_t pick = 0;
        for (std::size_t j = 0; j < actual.size(); ++j) {
            const double d = std::abs(actual[j] - e);
            if (d < best) {
                best = d;
                pick = j;
            }
        }
        if (actual.empty()) return 1e300;
        worst = std::max(worst, best);
        actual.erase(actual.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return worst;
}

inline double match_distance(const Eigen::VectorXcd& expected, const Eigen::VectorXcd& actual) {
    return match_distance(std::vector<std::complex<double>>(expected.data(), expected.data() + expected.size()),
                          std::vector<std::complex<double>>(actual.data(), actual.data() + actual.size()));
}

}  // namespace oracle
