#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "circdmd/analysis.hpp"
#include "circdmd/synthgen.hpp"
#include "circdmd/variants.hpp"

using namespace circdmd;

TEST(MaeRmse, HandValues) {
    Matrix truth(2, 2), est(2, 2);
    truth << 1, 2, 3, 4;
    est << 1, 2, 3, 6;
    const auto m = mae_rmse(truth, est);
    EXPECT_DOUBLE_EQ(m.mae, 0.5);
    EXPECT_DOUBLE_EQ(m.rmse, 1.0);
    const auto z = mae_rmse(truth, truth);
    EXPECT_EQ(z.mae, 0.0);
    EXPECT_EQ(z.rmse, 0.0);
    const auto c = mae_rmse(Matrix::Zero(3, 4), Matrix::Constant(3, 4, -2.5));
    EXPECT_DOUBLE_EQ(c.mae, 2.5);
    EXPECT_DOUBLE_EQ(c.rmse, 2.5);
    EXPECT_THROW(mae_rmse(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), ShapeError);
}

TEST(MaeRmse, SymmetricAndRmseDominates) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 20; ++k) {
        Matrix a(3, 7), b(3, 7);
        for (Index i = 0; i < a.size(); ++i) {
            a.data()[i] = nd(rng);
            b.data()[i] = nd(rng);
        }
        const auto ab = mae_rmse(a, b), ba = mae_rmse(b, a);
        EXPECT_EQ(ab.mae, ba.mae);
        EXPECT_EQ(ab.rmse, ba.rmse);
        EXPECT_GE(ab.rmse, ab.mae);
    }
}

TEST(Mape, PerSensorAndBands) {
    const Matrix truth = Matrix::Constant(3, 5, 100.0);
    EXPECT_EQ(mape_per_sensor(truth, truth).percent, Vector::Zero(3));
    const auto m = mape_per_sensor(truth, Matrix::Constant(3, 5, 95.0));
    for (Index n = 0; n < 3; ++n) EXPECT_NEAR(m.percent(n), 5.0, 1e-12);
    EXPECT_EQ(mape_band(4.9), MapeBand::Below5);
    EXPECT_EQ(mape_band(5.0), MapeBand::From5To10);
    EXPECT_EQ(mape_band(10.0), MapeBand::From5To10);
    EXPECT_EQ(mape_band(10.1), MapeBand::Above10);
}

TEST(Mape, ZeroTruthPolicy) {
    Matrix truth(1, 4), est(1, 4);
    truth << 0, 10, 20, 0;
    est << 1, 11, 18, 2;
    const auto skipped = mape_per_sensor(truth, est);
    EXPECT_EQ(skipped.skipped, 2);
    EXPECT_NEAR(skipped.percent(0), 100.0 * (0.1 + 0.1) / 2.0, 1e-12);
    EXPECT_THROW(mape_per_sensor(truth, est, ZeroTruthPolicy::Error), DataError);
    EXPECT_TRUE(std::isnan(mape_per_sensor(Matrix::Zero(1, 2), Matrix::Ones(1, 2)).percent(0)));
}

TEST(Stability, MaskAndDeviation) {
    CVector l(3);
    l << 1.0, 0.5, 2.0;
    const auto rep = classify_stability(l);
    EXPECT_EQ(rep.steady_mask, (std::vector<bool>{true, false, false}));
    EXPECT_DOUBLE_EQ(rep.deviation_sum, 1.5);
    EXPECT_EQ(rep.steady_count(), 1);

    CVector unit(4);
    unit << std::polar(1.0, 0.3), std::polar(1.0, -0.3), Complex(-1.0), Complex(0, 1);
    const auto u = classify_stability(unit);
    EXPECT_NEAR(u.deviation_sum, 0.0, 1e-15);
    EXPECT_EQ(u.steady_count(), 4);
    EXPECT_EQ(classify_stability(CVector(unit * 1.01)).steady_count(), 0);
    EXPECT_THROW(classify_stability(unit, 0.0), RangeError);
}

TEST(Periods, ClosedFormAndExclusions) {
    CVector l(4);
    l << Complex(0, 1), Complex(1, 0), Complex(0, -1), std::polar(0.9, 2.0 * std::numbers::pi / 288.0);
    CVector b(4);
    b << Complex(2, 1), 1.0, 1.0, Complex(-3, 0);
    const auto rep = oscillation_periods(l, 1.0 / 12.0, &b);
    ASSERT_EQ(rep.included, (std::vector<Index>{0, 3}));
    EXPECT_EQ(rep.excluded, (std::vector<Index>{1, 2}));
    EXPECT_DOUBLE_EQ(rep.periods(0), 1.0 / 3.0);
    EXPECT_NEAR(rep.periods(1), 24.0, 1e-12);
    EXPECT_EQ(rep.amplitudes_real(0), 2.0);
    EXPECT_EQ(rep.amplitudes_real(1), -3.0);
    EXPECT_THROW(oscillation_periods(l, 0.0), RangeError);
}

TEST(Periods, ConjugatePairKeepsPositiveOnly) {
    CVector l(2);
    l << std::polar(1.0, -0.2), std::polar(1.0, 0.2);
    const auto rep = oscillation_periods(l, 1.0);
    ASSERT_EQ(rep.included.size(), 1u);
    EXPECT_EQ(rep.included[0], 1);
    EXPECT_NEAR(rep.periods(0), 2.0 * std::numbers::pi / 0.2, 1e-12);
}

TEST(Periods, RecoveredFromSyntheticTraffic) {
    SyntheticSpec spec;
    spec.n = 4;
    spec.t = 2016;
    spec.delta_t = 1.0 / 12.0;
    Vector profile(4);
    profile << 1.0, 0.8, 0.6, 0.4;
    spec.components.push_back({std::numeric_limits<double>::infinity(), 60.0, 0.0, Vector::Ones(4)});
    spec.components.push_back({24.0, 8.0, 0.5, profile});
    spec.components.push_back({168.0, 4.0, -1.0, Vector::Ones(4)});
    const auto data = generate(spec);
    VariantConfig cfg;
    cfg.method = Method::Circ;
    cfg.tau = 12;
    const auto s = fit(data, cfg);
    const auto rep = oscillation_periods(s.eigenvalues, spec.delta_t, &s.amplitudes);
    auto found = [&](double p) {
        for (Index i = 0; i < rep.periods.size(); ++i)
            if (std::abs(rep.periods(i) - p) <= 0.01 * p) return true;
        return false;
    };
    EXPECT_TRUE(found(24.0));
    EXPECT_TRUE(found(168.0));
}

TEST(ReshapeMode, BlockMajorUnstacking) {
    CVector v(6);
    v << 1, 2, 3, 4, 5, 6;
    const CMatrix m = reshape_mode(v, 1.0, 2, 3);
    Matrix expected(2, 3);
    expected << 1, 3, 5, 2, 4, 6;
    EXPECT_EQ(m.real(), expected);
    EXPECT_EQ(reshape_mode(v, 0.0, 2, 3), CMatrix::Zero(2, 3));
    const CVector flat = Eigen::Map<const CVector>(m.data(), m.size());
    EXPECT_EQ(flat, v);
    EXPECT_EQ(reshape_mode(v, Complex(0, 2), 3, 2)(2, 1), Complex(0, 12));
    EXPECT_THROW(reshape_mode(v, 1.0, 4, 2), ShapeError);
}

TEST(ResidualAcf, WhiteNoiseAndAr1) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    const Index t = 10000;
    Vector white(t), ar(t);
    double prev = 0.0;
    for (Index i = 0; i < t; ++i) {
        white(i) = nd(rng);
        prev = 0.8 * prev + nd(rng);
        ar(i) = prev;
    }
    const auto w = residual_acf(white, 200);
    EXPECT_EQ(w.acf(0), 1.0);
    EXPECT_DOUBLE_EQ(w.bound, 3.0 / 100.0);
    Index inside = 0;
    for (Index l = 1; l <= 200; ++l) inside += std::abs(w.acf(l)) < w.bound;
    EXPECT_GE(static_cast<double>(inside), 0.99 * 200.0);

    const auto a = residual_acf(ar, 5);
    EXPECT_NEAR(a.acf(1), 0.8, 0.05);
    EXPECT_THROW(residual_acf(Vector::Constant(10, 3.0), 2), DegenerateSeriesError);
    EXPECT_THROW(residual_acf(white.head(5), 5), RangeError);
}

TEST(LagCorrelation, IdenticalSeriesAndWhiteNoise) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Vector base(50);
    for (Index i = 0; i < 50; ++i) base(i) = nd(rng);
    Matrix same(3, 50);
    for (Index n = 0; n < 3; ++n) same.row(n) = base.transpose();
    const auto c0 = residual_lag_correlation(same, 0);
    EXPECT_LE((c0.corr - Matrix::Ones(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(c0.mean_abs, 1.0, 1e-12);

    Matrix white(5, 10000);
    for (Index i = 0; i < white.size(); ++i) white.data()[i] = nd(rng);
    EXPECT_LT(residual_lag_correlation(white, 1).mean_abs, 0.05);
    EXPECT_LE((residual_lag_correlation(white, 0).corr.diagonal() - Vector::Ones(5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LagCorrelation, WeakensWithLag) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    const Index n = 4, t = 5000;
    Matrix r(n, t);
    Vector state = Vector::Zero(n);
    for (Index i = 0; i < t; ++i) {
        const double common = nd(rng);
        for (Index k = 0; k < n; ++k) state(k) = 0.85 * state(k) + common + 0.5 * nd(rng);
        r.col(i) = state;
    }
    double prev = 2.0;
    for (Index lag : {1, 2, 6, 12}) {
        const double m = residual_lag_correlation(r, lag).mean_abs;
        EXPECT_LT(m, prev) << lag;
        prev = m;
    }
}

TEST(LagCorrelation, FlatSensorWarnsAndZeroes) {
    Matrix r(2, 6);
    r << 1, 2, 3, 4, 5, 7, 4, 4, 4, 4, 4, 4;
    std::string seen;
    auto saved = warning_sink();
    warning_sink() = [&](const std::string& m) { seen = m; };
    const auto c = residual_lag_correlation(r, 1);
    warning_sink() = saved;
    EXPECT_FALSE(seen.empty());
    EXPECT_EQ(c.corr(1, 1), 0.0);
    EXPECT_EQ(c.corr(0, 1), 0.0);
    EXPECT_THROW(residual_lag_correlation(r, 6), RangeError);
}
