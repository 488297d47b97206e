#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "circdmd/spectral.hpp"

namespace circdmd {

struct ErrorMetrics {
    double mae = 0.0;
    double rmse = 0.0;
};

inline void check_same_shape(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
                             const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(who) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
}

inline ErrorMetrics mae_rmse(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& estimate) {
    check_same_shape(truth, estimate, "mae_rmse");
    if (truth.size() == 0) throw ShapeError("mae_rmse: empty matrices");
    const auto diff = (truth - estimate).array();
    const double count = static_cast<double>(truth.size());
    return {diff.abs().sum() / count, std::sqrt(diff.square().sum() / count)};
}

enum class ZeroTruthPolicy { Skip, Error };

struct MapeResult {
    Vector percent;       // per sensor
    Index skipped = 0;    // zero-truth entries left out of the averages
};

/// Per-sensor mean absolute percentage error. Zero truth entries are either
/// skipped (and counted) or rejected.
inline MapeResult mape_per_sensor(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& estimate,
                                  ZeroTruthPolicy policy = ZeroTruthPolicy::Skip) {
    check_same_shape(truth, estimate, "mape_per_sensor");
    MapeResult out{Vector::Zero(truth.rows()), 0};
    for (Index n = 0; n < truth.rows(); ++n) {
        double sum = 0.0;
        Index used = 0;
        for (Index t = 0; t < truth.cols(); ++t) {
            const double x = truth(n, t);
            if (x == 0.0) {
                if (policy == ZeroTruthPolicy::Error)
                    throw DataError("MAPE undefined: zero truth at (" + std::to_string(n) + "," +
                                    std::to_string(t) + ")");
                ++out.skipped;
                continue;
            }
            sum += std::abs((x - estimate(n, t)) / x);
            ++used;
        }
        out.percent(n) = used ? 100.0 * sum / static_cast<double>(used)
                              : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

/// Predictability groups used for per-sensor MAPE maps.
enum class MapeBand { Below5, From5To10, Above10 };

inline MapeBand mape_band(double percent) {
    if (percent < 5.0) return MapeBand::Below5;
    if (percent <= 10.0) return MapeBand::From5To10;
    return MapeBand::Above10;
}

struct StabilityReport {
    std::vector<bool> steady_mask;
    double deviation_sum = 0.0;
    double tolerance = 1e-3;

    Index steady_count() const {
        return static_cast<Index>(std::count(steady_mask.begin(), steady_mask.end(), true));
    }
};

/// Steady iff 1 - tol <= |lambda| <= 1 + tol; deviation_sum = sum ||lambda| - 1|.
inline StabilityReport classify_stability(const Eigen::Ref<const CVector>& eigenvalues, double tol = 1e-3) {
    if (!(tol > 0.0)) throw RangeError("stability tolerance must be positive");
    StabilityReport rep;
    rep.tolerance = tol;
    rep.steady_mask.reserve(static_cast<std::size_t>(eigenvalues.size()));
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        const double mod = std::abs(eigenvalues(i));
        rep.steady_mask.push_back(mod >= 1.0 - tol && mod <= 1.0 + tol);
        rep.deviation_sum += std::abs(mod - 1.0);
    }
    return rep;
}

struct PeriodReport {
    std::vector<Index> included;  // indices into the eigenvalue vector
    Vector periods;               // hours, aligned with `included`
    Vector amplitudes_real;       // Re(b), aligned with `included`
    std::vector<Index> excluded;  // infinite or negative periods
};

/// period_i = 2 pi dt / imag(log lambda_i). Real eigenvalues (infinite
/// period) and negative periods (the conjugate partner) are excluded.
inline PeriodReport oscillation_periods(const Eigen::Ref<const CVector>& eigenvalues, double delta_t,
                                        const CVector* amplitudes = nullptr) {
    if (!(delta_t > 0.0)) throw RangeError("delta_t must be positive");
    PeriodReport rep;
    std::vector<double> periods, amps;
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        const double phase = std::log(eigenvalues(i)).imag();
        if (phase == 0.0 || !std::isfinite(phase)) {
            rep.excluded.push_back(i);
            continue;
        }
        const double period = 2.0 * std::numbers::pi * delta_t / phase;
        if (period < 0.0) {
            rep.excluded.push_back(i);
            continue;
        }
        rep.included.push_back(i);
        periods.push_back(period);
        amps.push_back(amplitudes ? (*amplitudes)(i).real() : 0.0);
    }
    rep.periods = Eigen::Map<Vector>(periods.data(), static_cast<Index>(periods.size()));
    rep.amplitudes_real = Eigen::Map<Vector>(amps.data(), static_cast<Index>(amps.size()));
    return rep;
}

/// Unstacks phi * b into N x tau: embedding block i becomes column i.
inline CMatrix reshape_mode(const Eigen::Ref<const CVector>& mode, Complex amplitude, Index n, Index tau) {
    if (n < 1 || tau < 1 || mode.size() != n * tau)
        throw ShapeError("reshape_mode: length " + std::to_string(mode.size()) + " is not " +
                         std::to_string(n) + "*" + std::to_string(tau));
    const CVector scaled = mode * amplitude;
    return Eigen::Map<const CMatrix>(scaled.data(), n, tau);
}

struct AcfResult {
    Vector acf;  // lags 0..max_lag
    double bound = 0.0;
};

/// Mean-removed sample autocorrelation with the biased (divide by T)
/// normalization; bound = 3 / sqrt(T).
inline AcfResult residual_acf(const Eigen::Ref<const Vector>& residuals, Index max_lag) {
    const Index t = residuals.size();
    if (max_lag < 0 || max_lag >= t) throw RangeError("max_lag must lie in [0, T)");
    const Vector centered = residuals.array() - residuals.mean();
    const double c0 = centered.squaredNorm();
    if (!(c0 > 0.0)) throw DegenerateSeriesError("residual series has zero variance");
    AcfResult out{Vector(max_lag + 1), 3.0 / std::sqrt(static_cast<double>(t))};
    for (Index l = 0; l <= max_lag; ++l)
        out.acf(l) = centered.head(t - l).dot(centered.tail(t - l)) / c0;
    return out;
}

struct LagCorrelation {
    Matrix corr;  // (a, b): corr(eta_a(t - lag), eta_b(t))
    double mean_abs = 0.0;
};

/// Pearson correlation between every sensor's lagged residual series and
/// every sensor's current one. Zero-variance sensors get 0 with a warning.
inline LagCorrelation residual_lag_correlation(const Eigen::Ref<const Matrix>& residuals, Index lag) {
    const Index n = residuals.rows();
    const Index t = residuals.cols();
    if (lag < 0 || lag >= t) throw RangeError("lag must lie in [0, T)");
    const Index len = t - lag;
    Matrix past = residuals.leftCols(len);
    Matrix now = residuals.rightCols(len);
    auto standardize = [&](Matrix& m) {
        std::vector<bool> flat(static_cast<std::size_t>(n), false);
        for (Index i = 0; i < n; ++i) {
            m.row(i).array() -= m.row(i).mean();
            const double norm = m.row(i).norm();
            if (norm > 0.0)
                m.row(i) /= norm;
            else
                flat[static_cast<std::size_t>(i)] = true;
        }
        return flat;
    };
    const auto flat_past = standardize(past);
    const auto flat_now = standardize(now);
    for (Index i = 0; i < n; ++i)
        if (flat_past[static_cast<std::size_t>(i)] || flat_now[static_cast<std::size_t>(i)])
            warn("sensor " + std::to_string(i) + " has zero residual variance; correlations set to 0");
    LagCorrelation out;
    out.corr = past * now.transpose();
    out.mean_abs = out.corr.cwiseAbs().mean();
    return out;
}

}  // namespace circdmd
