// SPDX-License-Identifier: Apache-2.0
#include "usui/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace usui;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

template <class F>
Moments moments(std::size_t n, F&& value) {
    Moments m;
    for (std::size_t i = 0; i < n; ++i) m.mean += value(i);
    m.mean /= double(n);
    for (std::size_t i = 0; i < n; ++i) m.var += (value(i) - m.mean) * (value(i) - m.mean);
    m.var /= double(n - 1);
    return m;
}

DetectorConfig detector(std::size_t n_pulses, std::uint64_t seed, double eta = 1.0, double noise = 0.0) {
    DetectorConfig d;
    d.n_pulses = n_pulses;
    d.rng_seed = seed;
    d.eta = eta;
    d.electronic_noise_var = noise;
    return d;
}

GroupEstimate usui_estimate(double mu_sq, std::size_t m_modes, std::size_t offset, std::size_t groups,
                            std::uint64_t seed, double eta = 1.0) {
    const auto p = UsuiParams::from_power_gains(mu_sq, mu_sq, 0.0, m_modes, 1e3);
    const auto rec = simulate_detection_run(p, offset, detector(groups * m_modes / 2, seed, eta));
    return group_and_normalize(rec, m_modes / 2, detection_snl(p, offset, eta));
}

}  // namespace

TEST(Streams, SeedsAreDistinctAndStable) {
    EXPECT_EQ(stream_seed(1, 0), stream_seed(1, 0));
    EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
    EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(SampleWigner, VacuumQuadratureVariance) {
    const std::size_t n = 200'000;
    const auto s = sample_wigner(vacuum_state(2), n, 5);
    for (std::size_t mode = 0; mode < 2; ++mode) {
        const auto x = moments(n, [&](std::size_t i) { return std::sqrt(2.0) * s(i, mode).real(); });
        const auto y = moments(n, [&](std::size_t i) { return std::sqrt(2.0) * s(i, mode).imag(); });
        const double se = 0.5 * std::sqrt(2.0 / double(n));
        EXPECT_NEAR(x.var, 0.5, 3 * se);
        EXPECT_NEAR(y.var, 0.5, 3 * se);
    }
}

TEST(SampleWigner, ThermalSymmetricMoment) {
    const std::size_t n = 200'000;
    const auto thermal = partial_trace(two_mode_squeeze(vacuum_state(2), SqueezeOp::from_power_gain(0, 1, 2.0)), {0});
    const auto s = sample_wigner(thermal, n, 6);
    const auto m = moments(n, [&](std::size_t i) { return std::norm(s(i, 0)); });
    EXPECT_NEAR(m.mean, 1.5, 3 * std::sqrt(m.var / double(n)));
}

TEST(SampleWigner, DeterministicAcrossWorkers) {
    const auto state = build_usui_state(UsuiParams::from_power_gains(3.0, 3.0, 0.4, 6, 10.0));
    const auto a = sample_wigner(state, 10'000, 42, 1);
    const auto b = sample_wigner(state, 10'000, 42, 1);
    const auto c = sample_wigner(state, 10'000, 42, 3);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values, c.values);
    EXPECT_NE(a.values, sample_wigner(state, 10'000, 43, 1).values);
}

TEST(SampleWigner, RejectsNonPhysicalCovariance) {
    const auto s = two_mode_squeeze(vacuum_state(2), SqueezeOp::from_power_gain(0, 1, 2.0));
    CMatrix b = s.block_b();
    b(0, 1) = b(1, 0) = 6.0;
    EXPECT_THROW(sample_wigner(GaussianState::from_blocks(s.displacement(), s.block_a(), b), 10, 1), std::domain_error);
}

TEST(EstimatePhotonStats, ThermalAndVacuum) {
    const std::size_t n = 400'000;
    const auto thermal = partial_trace(two_mode_squeeze(vacuum_state(2), SqueezeOp::from_power_gain(0, 1, 2.0)), {0});
    const auto t = estimate_photon_stats(sample_wigner(thermal, n, 7));
    // Var(|alpha|^2) of a complex Gaussian is (n + 1/2)^2; its estimator has relative SE ~ sqrt(8/n).
    EXPECT_NEAR(t.cov_k(0, 0), 2.0, 3 * 2.25 * std::sqrt(8.0 / double(n)));
    EXPECT_NEAR(t.mean_n(0), 1.0, 3 * 1.5 / std::sqrt(double(n)));

    const auto v = estimate_photon_stats(sample_wigner(vacuum_state(1), n, 8));
    EXPECT_NEAR(v.mean_n(0), 0.0, 3 * 0.5 / std::sqrt(double(n)));
    EXPECT_THROW(estimate_photon_stats(sample_wigner(vacuum_state(1), 1, 8)), std::invalid_argument);
}

TEST(EstimatePhotonStats, UsuiCrossCovariance) {
    const std::size_t n = 1'000'000;
    const auto samples = sample_wigner(build_usui_state(UsuiParams::from_power_gains(2.0, 2.0, 0.0, 6)), n, 9);
    const auto est = estimate_photon_stats(samples);
    // Standard error of the covariance estimator from the product of deviations.
    const double m0 = est.mean_n(0) + 0.5, m1 = est.mean_n(1) + 0.5;
    const auto prod = moments(n, [&](std::size_t i) {
        return (std::norm(samples(i, 0)) - m0) * (std::norm(samples(i, 1)) - m1);
    });
    EXPECT_NEAR(est.cov_k(0, 1), 18.0, 3 * std::sqrt(prod.var / double(n)));
}

TEST(DetectorConfig, Validation) {
    EXPECT_THROW(detector(100, 1, 1.5).validate(), std::invalid_argument);
    EXPECT_THROW(detector(100, 1, 1.0, -1.0).validate(), std::invalid_argument);
    EXPECT_THROW(detector(2, 1).validate(3), std::invalid_argument);
    const auto p = UsuiParams::from_power_gains(2.0, 2.0, 0.0, 4);
    EXPECT_THROW(simulate_detection_run(p, 0, detector(1000, 1)), std::invalid_argument);  // unseeded
}

TEST(DetectionRun, CoherentInputIsShotNoise) {
    const auto p = UsuiParams::from_power_gains(1.0, 1.0, 0.0, 2, 100.0);
    const auto rec = simulate_detection_run(p, 0, detector(200'000, 11));
    EXPECT_EQ(rec.size(), 200'000u);
    EXPECT_DOUBLE_EQ(rec.timestamp_ns(3), 60.0);
    const auto est = group_and_normalize(rec, 1, detection_snl(p, 0, 1.0));
    EXPECT_NEAR(est.r, 1.0, 3 * est.stderr_r);
}

TEST(DetectionRun, GoldenTwelveModeSqueezing) {
    const auto est = usui_estimate(14.0, 12, 0, 200'000, 12);
    EXPECT_NEAR(est.r, 0.08396247998169754, 3 * est.stderr_r);
    EXPECT_EQ(est.n_groups, 200'000u);
}

TEST(DetectionRun, ShiftedPairingIsFarAboveShotNoise) {
    const auto r0 = usui_estimate(14.0, 12, 0, 20'000, 13);
    const auto r2 = usui_estimate(14.0, 12, 2, 20'000, 13);
    EXPECT_GT(to_db(r2.r) - to_db(r0.r), 20.0);
}

TEST(DetectionRun, SpecOverloadChecksWeights) {
    const auto p = UsuiParams::from_power_gains(2.0, 2.0, 0.0, 4, 100.0);
    EXPECT_NO_THROW(simulate_detection_run(p, nd_spec(4, 1), detector(100, 1)));
    CombinationSpec odd{RVector::Ones(6), 1};
    EXPECT_THROW(simulate_detection_run(p, odd, detector(100, 1)), std::invalid_argument);
}

TEST(DetectionRun, DeterministicAcrossWorkers) {
    const auto p = UsuiParams::from_power_gains(5.0, 5.0, 0.3, 8, 1e3);
    auto det = detector(50'000, 77);
    const auto a = simulate_detection_run(p, 0, det);
    det.workers = 4;
    const auto b = simulate_detection_run(p, 0, det);
    EXPECT_EQ(a.values, b.values);
}

TEST(DetectionRun, PositionInGroupUnbiased) {
    // First and last slot of each group see the same marginal variance.
    const std::size_t groups = 100'000, g = 6;
    const auto p = UsuiParams::from_power_gains(4.0, 4.0, 0.0, 12, 1e3);
    const auto rec = simulate_detection_run(p, 0, detector(groups * g, 21));
    const auto first = moments(groups, [&](std::size_t i) { return rec.values[i * g]; });
    const auto last = moments(groups, [&](std::size_t i) { return rec.values[i * g + g - 1]; });
    EXPECT_NEAR(first.var / last.var, 1.0, 4 * 2.0 / std::sqrt(double(groups)));
}

TEST(GroupAndNormalize, Basics) {
    const auto p = UsuiParams::from_power_gains(1.0, 1.0, 0.0, 2, 50.0);
    const auto rec = simulate_detection_run(p, 0, detector(100'000, 14));
    const double snl = detection_snl(p, 0, 1.0);
    const auto one = group_and_normalize(rec, 1, 1.0);
    const auto per_pulse = moments(rec.size(), [&](std::size_t i) { return rec.values[i]; });
    EXPECT_NEAR(one.variance, per_pulse.var - 0.5, 1e-9 * per_pulse.var);
    const auto two = group_and_normalize(rec, 2, 2.0 * snl);
    EXPECT_NEAR(two.r, 1.0, 3 * two.stderr_r);
    EXPECT_THROW(group_and_normalize(rec, 20'000, snl), std::invalid_argument);
    EXPECT_THROW(group_and_normalize(rec, 0, snl), std::invalid_argument);
    EXPECT_THROW(group_and_normalize(rec, 1, 0.0), std::invalid_argument);
}

TEST(GroupAndNormalize, ModeSweepMonotone) {
    double prev_r = 1e9, prev_se = 0.0;
    for (std::size_t m = 2; m <= 30; m += 2) {
        const auto est = usui_estimate(14.0, m, 0, 40'000, 100 + m);
        const double exact = rd_closed_form(UsuiParams::from_power_gains(14.0, 14.0, 0.0, m), double(m)).exact;
        EXPECT_NEAR(est.r, exact, 4 * est.stderr_r) << m;
        EXPECT_LT(est.r, prev_r + 3 * std::hypot(est.stderr_r, prev_se)) << m;
        prev_r = est.r;
        prev_se = est.stderr_r;
    }
}

TEST(Properties, EstimatorConsistency) {
    const auto p = UsuiParams::from_power_gains(4.0, 4.0, 0.0, 4);
    const double exact = rd_closed_form(p, 4).exact;
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto est = usui_estimate(4.0, 4, 0, 5'000, 1000 + seed);
        if (std::abs(est.r - exact) < 3 * est.stderr_r) ++within;
    }
    EXPECT_GE(within, 99);
}

TEST(Properties, LossPullsTowardShotNoise) {
    double prev = 0.0;
    for (double eta : {1.0, 0.6, 0.3, 0.05}) {
        const auto est = usui_estimate(14.0, 12, 0, 50'000, 31, eta);
        const double theory = lossy_noise(rd_closed_form(UsuiParams::from_power_gains(14.0, 14.0, 0.0, 12), 12).exact, eta);
        EXPECT_NEAR(est.r, theory, 3 * est.stderr_r) << eta;
        EXPECT_GT(est.r, prev) << eta;
        prev = est.r;
    }
    EXPECT_LT(std::abs(prev - 1.0), 0.1);
}

TEST(SnlCalibration, NoiselessIsLinearThroughOrigin) {
    const auto fit = snl_calibration({1e4, 5e4, 1e5, 2e5, 4e5}, detector(250'000, 3));
    EXPECT_GT(fit.r_squared, 0.999);
    EXPECT_NEAR(fit.intercept, 0.0, 3 * fit.intercept_stderr);
    EXPECT_NEAR(fit.slope, 1.0, 3 * fit.slope_stderr);
}

TEST(SnlCalibration, ElectronicNoiseSetsIntercept) {
    const double noise = 2e3;
    const auto fit = snl_calibration({1e4, 5e4, 1e5, 2e5, 4e5}, detector(250'000, 4, 1.0, noise));
    EXPECT_GT(fit.r_squared, 0.999);
    EXPECT_NEAR(fit.intercept, noise, 3 * fit.intercept_stderr);
}

TEST(SnlCalibration, SlopeScalesWithEfficiency) {
    const std::vector<double> powers = {1e4, 5e4, 1e5, 2e5, 4e5};
    const auto low = snl_calibration(powers, detector(250'000, 5, 0.4));
    const auto high = snl_calibration(powers, detector(250'000, 6, 0.8));
    EXPECT_NEAR(high.slope, 2.0 * low.slope, 3 * std::hypot(high.slope_stderr, 2.0 * low.slope_stderr));
    EXPECT_THROW(snl_calibration({1e4, 1e4, 2e4}, detector(1000, 1)), std::invalid_argument);
}

TEST(Properties, SnlSelfConsistency) {
    const auto p = UsuiParams::from_power_gains(14.0, 14.0, 0.0, 12, 1e2);
    const double analytic = detection_snl(p, 0, 0.63);
    const double scale = analytic;
    const auto fit = snl_calibration({0.2 * scale, 0.5 * scale, scale, 1.5 * scale}, detector(250'000, 8, 0.63));
    // The calibration is in detected photons; convert the optical power to detected power.
    const double calibrated = fit.slope * analytic / 0.63 + fit.intercept;
    const double se = std::hypot(fit.slope_stderr * analytic / 0.63, fit.intercept_stderr);
    EXPECT_NEAR(calibrated, analytic, 3 * se);
}

TEST(Correlation, CoherentRecordIndependent) {
    const auto p = UsuiParams::from_power_gains(1.0, 1.0, 0.0, 2, 100.0);
    const auto rec = simulate_detection_run(p, 0, detector(250'000, 15));
    EXPECT_DOUBLE_EQ(correlation_coefficient(rec, 0), 1.0);
    EXPECT_NEAR(correlation_coefficient(rec, 1), 0.0, 3.0 / std::sqrt(250'000.0));
    EXPECT_NEAR(correlation_coefficient(rec, -7), 0.0, 3.0 / std::sqrt(250'000.0));
    EXPECT_THROW(correlation_coefficient(rec, 250'000), std::invalid_argument);
    PulseRunRecord flat;
    flat.values.assign(10, 1.0);
    EXPECT_THROW(correlation_coefficient(flat, 1), std::domain_error);
}

TEST(Correlation, UsuiDifferenceRecordNeighbours) {
    // Adjacent slot differences are anti-correlated inside a group; groups are drawn independently.
    const std::size_t g = 6, groups = 50'000;
    const auto p = UsuiParams::from_power_gains(14.0, 14.0, 0.0, 12, 1e3);
    const auto rec = simulate_detection_run(p, 0, detector(g * groups, 16));

    UsuiParams wide = p;
    wide.n_modes = 14;
    const RMatrix k = intensity_stats(build_usui_state(wide)).cov_k;
    const double var = k(4, 4) + k(5, 5) - 2 * k(4, 5);
    const double cov = k(4, 6) - k(4, 7) - k(5, 6) + k(5, 7);
    const double expected = double(g - 1) / double(g) * cov / var;

    const double c = correlation_coefficient(rec, 1);
    EXPECT_LT(c, 0.2);
    EXPECT_NEAR(c, expected, 4.0 / std::sqrt(double(rec.size())));
}

TEST(CsvExport, Headers) {
    PulseRunRecord rec;
    rec.values = {1.5, -2.0};
    std::ostringstream a, b;
    write_record_csv(a, rec);
    EXPECT_EQ(a.str(), "slot_index,e_value\n0,1.5\n1,-2\n");
    write_stats_csv(b, {{12, 0.1, 0.001}});
    EXPECT_EQ(b.str(), "M,R,stderr,R_dB\n12,0.1,0.001,-10\n");
}
