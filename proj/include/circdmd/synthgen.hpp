#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "circdmd/datamodel.hpp"

namespace circdmd {

/// One additive pattern. An infinite period gives the constant term
/// amplitude * profile (phase ignored).
struct SyntheticComponent {
    double period_hours = std::numeric_limits<double>::infinity();
    double amplitude = 1.0;
    double phase = 0.0;
    Vector spatial_profile;  // length N
};

struct SyntheticSpec {
    Index n = 1;
    Index t = 2;
    double delta_t = 1.0 / 12.0;
    std::vector<SyntheticComponent> components;
    double noise_sigma = 0.0;
    double outlier_rate = 0.0;
    double outlier_magnitude = 0.0;
    std::uint64_t seed = 0;
};

/// Seeded stream used by the generator. The engine is std::mt19937_64,
/// whose output sequence is fixed by the C++ standard. Uniforms take the
/// top 53 bits; normals use one Box-Muller draw per pair of uniforms (the
/// sine branch is discarded) so other languages can reproduce the stream.
class SyntheticRng {
public:
    explicit SyntheticRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// Noise-free part of the generator: sum_k a_k v_k[n] cos(2 pi t dt / P_k + theta_k),
/// t = 0, 1, ... (0-based column index).
inline Matrix synthetic_signal(const SyntheticSpec& spec) {
    Matrix x = Matrix::Zero(spec.n, spec.t);
    for (const auto& c : spec.components) {
        if (c.spatial_profile.size() != spec.n)
            throw ConfigError("component spatial profile must have N entries");
        if (std::isinf(c.period_hours)) {
            x.colwise() += c.amplitude * c.spatial_profile;
            continue;
        }
        if (!(c.period_hours != 0.0) || std::isnan(c.period_hours))
            throw ConfigError("component period must be nonzero");
        for (Index t = 0; t < spec.t; ++t) {
            const double arg = 2.0 * std::numbers::pi * static_cast<double>(t) * spec.delta_t / c.period_hours + c.phase;
            x.col(t) += c.amplitude * std::cos(arg) * c.spatial_profile;
        }
    }
    return x;
}

/// Periodic components plus Gaussian noise plus sparse +-magnitude outliers.
/// Noise is drawn entry by entry in column-major order, then every entry
/// draws one uniform for the outlier test and, on a hit, one for the sign.
inline SpeedMatrix generate(const SyntheticSpec& spec) {
    if (spec.noise_sigma < 0.0 || spec.outlier_rate < 0.0 || spec.outlier_rate > 1.0)
        throw ConfigError("noise sigma and outlier rate must be non-negative (rate <= 1)");
    if (spec.n < 1 || spec.t < 2) throw ConfigError("synthetic data needs n >= 1 and t >= 2");
    Matrix x = synthetic_signal(spec);
    SyntheticRng rng(spec.seed);
    if (spec.noise_sigma > 0.0)
        for (Index t = 0; t < spec.t; ++t)
            for (Index n = 0; n < spec.n; ++n) x(n, t) += spec.noise_sigma * rng.normal();
    if (spec.outlier_rate > 0.0)
        for (Index t = 0; t < spec.t; ++t)
            for (Index n = 0; n < spec.n; ++n)
                if (rng.uniform() < spec.outlier_rate)
                    x(n, t) += rng.uniform() < 0.5 ? -spec.outlier_magnitude : spec.outlier_magnitude;
    return SpeedMatrix(std::move(x), spec.delta_t);
}

/// Trajectory x_{k+1} = A x_k with x_0 as the first column.
inline SpeedMatrix generate_linear_system(const Eigen::Ref<const Matrix>& a_true,
                                          const Eigen::Ref<const Vector>& x0, Index t,
                                          double delta_t = 1.0) {
    if (t < 2) throw RangeError("linear system trajectory needs t >= 2");
    if (a_true.rows() != a_true.cols() || a_true.rows() != x0.size())
        throw ShapeError("A must be square and match x0");
    Matrix x(x0.size(), t);
    x.col(0) = x0;
    for (Index k = 1; k < t; ++k) x.col(k) = a_true * x.col(k - 1);
    return SpeedMatrix(std::move(x), delta_t);
}

}  // namespace circdmd
