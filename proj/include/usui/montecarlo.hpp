// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo emulation of pulse-resolved intensity-difference detection.
//
// Mode amplitudes are drawn from the Gaussian Wigner distribution of the
// state. Symmetric ordering is undone with the usual corrections:
//   <N_p>  = E_W|alpha_p|^2 - 1/2
//   K_pq   = Cov_W(|alpha_p|^2, |alpha_q|^2) - delta_pq / 4
//
// Random streams: work is cut into batches of kBatchSize draws, and batch b
// uses an mt19937_64 seeded with stream_seed(master, b). Results therefore do
// not depend on how many worker threads process the batches.
#pragma once

#include "usui/builder.hpp"
#include "usui/gaussian_state.hpp"
#include "usui/photon_stats.hpp"
#include "usui/squeezing.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace usui {

inline constexpr std::size_t kBatchSize = 4096;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream `stream` under `master`.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline std::mt19937_64 stream_engine(std::uint64_t master, std::uint64_t stream) {
    return std::mt19937_64(stream_seed(master, stream));
}

namespace detail {

/// Runs body(batch_index) for every batch on `workers` threads.
template <class Body>
void for_each_batch(std::size_t n_batches, std::size_t workers, Body&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, n_batches));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_batches; ++b) body(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t b = next++; b < n_batches; b = next++) {
                try {
                    body(b);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Draws Wigner fluctuations delta (mean zero) of a Gaussian state.
class WignerSampler {
  public:
    explicit WignerSampler(const GaussianState& state) : mean_(state.displacement()) {
        const CMatrix a = state.block_a();
        const CMatrix b = state.block_b();
        const auto m = a.rows();
        // Covariance of (Re delta, Im delta): E[delta delta^+] = A/2, E[delta delta^T] = B/2.
        RMatrix cov(2 * m, 2 * m);
        cov.topLeftCorner(m, m) = 0.25 * (a + b).real();
        cov.topRightCorner(m, m) = 0.25 * (b - a).imag();
        cov.bottomLeftCorner(m, m) = 0.25 * (a + b).imag();
        cov.bottomRightCorner(m, m) = 0.25 * (a - b).real();
        cov = 0.5 * (cov + cov.transpose()).eval();
        Eigen::LLT<RMatrix> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw std::domain_error("sample_wigner: covariance is not positive definite (non-physical state)");
        }
        chol_ = llt.matrixL();
    }

    std::size_t n_modes() const { return static_cast<std::size_t>(mean_.size()); }
    const CVector& mean() const { return mean_; }

    template <class Engine>
    void draw_fluctuation(Engine& engine, std::normal_distribution<double>& normal, RVector& z,
                          std::span<cplx> out) const {
        const auto m = mean_.size();
        for (Eigen::Index i = 0; i < 2 * m; ++i) z(i) = normal(engine);
        const RVector r = chol_.triangularView<Eigen::Lower>() * z;
        for (Eigen::Index p = 0; p < m; ++p) out[static_cast<std::size_t>(p)] = cplx(r(p), r(p + m));
    }

  private:
    CVector mean_;
    RMatrix chol_;
};

/// Sample-major complex amplitudes alpha = mean + delta.
struct WignerSamples {
    std::size_t n_modes = 0;
    std::size_t n_samples = 0;
    std::vector<cplx> values;

    cplx operator()(std::size_t sample, std::size_t mode) const { return values[sample * n_modes + mode]; }
};

inline WignerSamples sample_wigner(const GaussianState& state, std::size_t n_samples, std::uint64_t rng_seed,
                                   std::size_t workers = 1) {
    const WignerSampler sampler(state);
    WignerSamples out{state.n_modes(), n_samples, std::vector<cplx>(n_samples * state.n_modes())};
    const std::size_t n_batches = (n_samples + kBatchSize - 1) / kBatchSize;
    detail::for_each_batch(n_batches, workers, [&](std::size_t batch) {
        auto engine = stream_engine(rng_seed, batch);
        std::normal_distribution<double> normal(0.0, 1.0);
        RVector z(2 * static_cast<Eigen::Index>(out.n_modes));
        const std::size_t end = std::min(n_samples, (batch + 1) * kBatchSize);
        for (std::size_t s = batch * kBatchSize; s < end; ++s) {
            std::span<cplx> row(out.values.data() + s * out.n_modes, out.n_modes);
            sampler.draw_fluctuation(engine, normal, z, row);
            for (std::size_t p = 0; p < out.n_modes; ++p) row[p] += sampler.mean()(static_cast<Eigen::Index>(p));
        }
    });
    return out;
}

inline IntensityStats estimate_photon_stats(const WignerSamples& samples) {
    if (samples.n_samples < 2) throw std::invalid_argument("estimate_photon_stats: need at least 2 samples");
    const auto m = static_cast<Eigen::Index>(samples.n_modes);
    const double n = static_cast<double>(samples.n_samples);
    RVector mean = RVector::Zero(m);
    for (std::size_t s = 0; s < samples.n_samples; ++s)
        for (Eigen::Index p = 0; p < m; ++p) mean(p) += std::norm(samples(s, std::size_t(p)));
    mean /= n;
    RMatrix cov = RMatrix::Zero(m, m);
    RVector dev(m);
    for (std::size_t s = 0; s < samples.n_samples; ++s) {
        for (Eigen::Index p = 0; p < m; ++p) dev(p) = std::norm(samples(s, std::size_t(p))) - mean(p);
        cov.noalias() += dev * dev.transpose();
    }
    cov /= (n - 1.0);
    IntensityStats out;
    out.mean_n = (mean.array() - 0.5).matrix();
    out.cov_k = cov - 0.25 * RMatrix::Identity(m, m);
    return out;
}

// ----- detection runs ------------------------------------------------------

struct DetectorConfig {
    double eta = 1.0;                   // detection efficiency
    double electronic_noise_var = 0.0;  // added variance per integrated pulse (photon-number^2 units)
    std::size_t n_pulses = 250'000;
    std::uint64_t rng_seed = 1;
    std::size_t workers = 1;
    double repetition_period_ns = 20.0;

    void validate(std::size_t group_slots = 1) const {
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("DetectorConfig: eta must lie in [0, 1]");
        if (!(electronic_noise_var >= 0.0) || !std::isfinite(electronic_noise_var)) {
            throw std::invalid_argument("DetectorConfig: electronic_noise_var must be finite and >= 0");
        }
        if (n_pulses < group_slots) throw std::invalid_argument("DetectorConfig: n_pulses must be >= M/2");
        if (!(repetition_period_ns > 0.0)) throw std::invalid_argument("DetectorConfig: repetition period must be > 0");
    }
};

/// Per-slot integrated signal-minus-idler values e_n.
struct PulseRunRecord {
    std::vector<double> values;
    double repetition_period_ns = 20.0;
    /// Symmetric-ordering excess of Var(e_n) per slot, removed when normalizing.
    double variance_offset_per_slot = 0.0;

    std::size_t size() const { return values.size(); }
    double timestamp_ns(std::size_t n) const { return static_cast<double>(n) * repetition_period_ns; }
};

namespace detail {

struct SlotPair {
    std::size_t signal;
    std::size_t idler;
};

// Draws one window per group of pairs.size() slots and writes n_pulses values.
inline PulseRunRecord run_difference_record(const GaussianState& window, const std::vector<SlotPair>& pairs,
                                            const DetectorConfig& det, std::uint64_t master_seed) {
    const WignerSampler sampler(window);
    const std::size_t group = pairs.size();
    const std::size_t n_groups = (det.n_pulses + group - 1) / group;
    PulseRunRecord rec;
    rec.values.assign(det.n_pulses, 0.0);
    rec.repetition_period_ns = det.repetition_period_ns;
    rec.variance_offset_per_slot = 0.5;

    std::vector<double> mean_part(group);
    for (std::size_t j = 0; j < group; ++j) {
        mean_part[j] = std::norm(sampler.mean()(Eigen::Index(pairs[j].signal))) -
                       std::norm(sampler.mean()(Eigen::Index(pairs[j].idler)));
    }
    const double noise_sd = std::sqrt(det.electronic_noise_var);
    const std::size_t n_batches = (n_groups + kBatchSize - 1) / kBatchSize;
    for_each_batch(n_batches, det.workers, [&](std::size_t batch) {
        auto engine = stream_engine(master_seed, batch);
        std::normal_distribution<double> normal(0.0, 1.0);
        RVector z(2 * static_cast<Eigen::Index>(sampler.n_modes()));
        std::vector<cplx> delta(sampler.n_modes());
        const std::size_t end = std::min(n_groups, (batch + 1) * kBatchSize);
        for (std::size_t g = batch * kBatchSize; g < end; ++g) {
            sampler.draw_fluctuation(engine, normal, z, delta);
            for (std::size_t j = 0; j < group; ++j) {
                // |beta + d|^2 - |beta|^2 = 2 Re(conj(beta) d) + |d|^2, kept apart from the large mean.
                auto excess = [&](std::size_t mode) {
                    const cplx beta = sampler.mean()(Eigen::Index(mode));
                    return 2.0 * (std::conj(beta) * delta[mode]).real() + std::norm(delta[mode]);
                };
                const double noise = noise_sd > 0.0 ? noise_sd * normal(engine) : 0.0;
                const std::size_t slot = g * group + j;
                if (slot < det.n_pulses) {
                    rec.values[slot] = mean_part[j] + excess(pairs[j].signal) - excess(pairs[j].idler) + noise;
                }
            }
        }
    });
    return rec;
}

}  // namespace detail

/// Window used to emulate one group: the M/2 grouped slots, m shifted idler
/// slots and one spare slot.
inline GaussianState detection_window(const UsuiParams& params, std::size_t offset, double eta) {
    UsuiParams p = params;
    p.n_modes = params.n_modes + 2 * offset + 2;
    return apply_loss_all(build_usui_state(p), eta);
}

inline PulseRunRecord simulate_detection_run(const UsuiParams& params, std::size_t offset, const DetectorConfig& det) {
    params.validate();
    const std::size_t slots = params.n_modes / 2;
    det.validate(slots);
    if (!(params.seed_x > 0.0)) throw std::invalid_argument("simulate_detection_run: requires a seeded state (seed_x > 0)");
    std::vector<detail::SlotPair> pairs(slots);
    for (std::size_t n = 0; n < slots; ++n) {
        pairs[n] = {mode_index(n, Channel::signal), mode_index(n + offset, Channel::idler)};
    }
    return detail::run_difference_record(detection_window(params, offset, det.eta), pairs, det, det.rng_seed);
}

/// Accepts only the N_d combination over params.n_modes with spec's offset.
inline PulseRunRecord simulate_detection_run(const UsuiParams& params, const CombinationSpec& spec,
                                             const DetectorConfig& det) {
    const RVector expected = nd_weights(params.n_modes, spec.pairing_offset);
    if (spec.weights.size() != expected.size() || (spec.weights - expected).cwiseAbs().maxCoeff() != 0.0) {
        throw std::invalid_argument("simulate_detection_run: weights must be the N_d combination for this M and m");
    }
    return simulate_detection_run(params, spec.pairing_offset, det);
}

/// Analytic shot-noise level of one group: sum |w_p| <N_p> after loss.
inline double detection_snl(const UsuiParams& params, std::size_t offset, double eta) {
    UsuiParams p = params;
    p.n_modes = params.n_modes + 2 * offset;
    const GaussianState s = apply_loss_all(build_usui_state(p), eta);
    return nd_weights(params.n_modes, offset).cwiseAbs().dot(mean_photon_numbers(s));
}

/// Lossless N_d theory mapped through detection efficiency eta: eta R + 1 - eta.
inline double lossy_noise(double r, double eta) { return eta * r + (1.0 - eta); }

struct GroupEstimate {
    double r = 0.0;
    double stderr_r = 0.0;
    double variance = 0.0;  // ordering-corrected variance of the group sums
    std::size_t n_groups = 0;
};

inline GroupEstimate group_and_normalize(const PulseRunRecord& record, std::size_t group_size, double snl) {
    if (group_size == 0) throw std::invalid_argument("group_and_normalize: group_size must be >= 1");
    if (!(snl > 0.0)) throw std::invalid_argument("group_and_normalize: snl must be > 0");
    const std::size_t n_groups = record.size() / group_size;
    if (n_groups < 10) {
        throw std::invalid_argument("group_and_normalize: need at least 10 groups, have " + std::to_string(n_groups));
    }
    std::vector<double> sums(n_groups, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g)
        for (std::size_t j = 0; j < group_size; ++j) sums[g] += record.values[g * group_size + j];

    const double n = static_cast<double>(n_groups);
    double mean = 0.0;
    for (double s : sums) mean += s;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double s : sums) {
        const double d = (s - mean) * (s - mean);
        m2 += d;
        m4 += d * d;
    }
    const double var = m2 / (n - 1.0);
    m4 /= n;
    // Var(s^2) = (mu4 - (n-3)/(n-1) sigma^4) / n
    const double var_of_var = std::max(0.0, (m4 - (n - 3.0) / (n - 1.0) * var * var) / n);

    GroupEstimate out;
    out.n_groups = n_groups;
    out.variance = var - static_cast<double>(group_size) * record.variance_offset_per_slot;
    out.r = out.variance / snl;
    out.stderr_r = std::sqrt(var_of_var) / snl;
    return out;
}

struct CalibrationFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double intercept_stderr = 0.0;
    double r_squared = 0.0;
    std::vector<double> powers;
    std::vector<double> variances;
    std::vector<double> variance_stderr;
};

/// Coherent-state record for a balanced pair carrying `power` photons per pulse in total.
inline PulseRunRecord simulate_coherent_record(double power, const DetectorConfig& det, std::uint64_t master_seed) {
    if (!(power >= 0.0) || !std::isfinite(power)) throw std::invalid_argument("coherent power must be finite and >= 0");
    const double amp = std::sqrt(power / 2.0);
    GaussianState s = displace(displace(vacuum_state(2), 0, amp), 1, amp);
    s = apply_loss_all(s, det.eta);
    return detail::run_difference_record(s, {{0, 1}}, det, master_seed);
}

/// Variance of coherent-state difference records versus optical power, fitted
/// by weighted least squares.
inline CalibrationFit snl_calibration(const std::vector<double>& powers, const DetectorConfig& det) {
    det.validate();
    std::vector<double> distinct = powers;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) throw std::invalid_argument("snl_calibration: need at least 3 distinct powers");

    CalibrationFit fit;
    fit.powers = powers;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const auto rec = simulate_coherent_record(powers[i], det, stream_seed(det.rng_seed, 0xCA11B000ULL + i));
        const auto est = group_and_normalize(rec, 1, 1.0);
        fit.variances.push_back(est.variance);
        fit.variance_stderr.push_back(est.stderr_r);
    }

    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const double se = std::max(fit.variance_stderr[i], 1e-300);
        const double w = 1.0 / (se * se);
        sw += w;
        swx += w * powers[i];
        swy += w * fit.variances[i];
        swxx += w * powers[i] * powers[i];
        swxy += w * powers[i] * fit.variances[i];
    }
    const double det_w = sw * swxx - swx * swx;
    if (!(det_w > 0.0)) throw std::invalid_argument("snl_calibration: degenerate power set");
    fit.slope = (sw * swxy - swx * swy) / det_w;
    fit.intercept = (swxx * swy - swx * swxy) / det_w;
    fit.slope_stderr = std::sqrt(sw / det_w);
    fit.intercept_stderr = std::sqrt(swxx / det_w);

    double ybar = 0.0;
    for (double v : fit.variances) ybar += v;
    ybar /= static_cast<double>(fit.variances.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const double pred = fit.slope * powers[i] + fit.intercept;
        ss_res += (fit.variances[i] - pred) * (fit.variances[i] - pred);
        ss_tot += (fit.variances[i] - ybar) * (fit.variances[i] - ybar);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

/// Pearson correlation between e_n and e_{n+shift}.
inline double correlation_coefficient(const PulseRunRecord& record, long shift) {
    const long len = static_cast<long>(record.size());
    if (std::labs(shift) >= len) throw std::invalid_argument("correlation_coefficient: |shift| must be < record length");
    const long begin = std::max(0L, -shift), end = std::min(len, len - shift);
    const double n = static_cast<double>(end - begin);
    double mx = 0.0, my = 0.0;
    for (long i = begin; i < end; ++i) {
        mx += record.values[std::size_t(i)];
        my += record.values[std::size_t(i + shift)];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (long i = begin; i < end; ++i) {
        const double dx = record.values[std::size_t(i)] - mx, dy = record.values[std::size_t(i + shift)] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::domain_error("correlation_coefficient: record has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

// ----- CSV export ----------------------------------------------------------

inline void write_record_csv(std::ostream& os, const PulseRunRecord& record) {
    os << "slot_index,e_value\n";
    for (std::size_t n = 0; n < record.size(); ++n) os << fmt::format("{},{:.17g}\n", n, record.values[n]);
}

struct ModeStatsRow {
    std::size_t n_modes;
    double r;
    double stderr_r;
};

inline void write_stats_csv(std::ostream& os, const std::vector<ModeStatsRow>& rows) {
    os << "M,R,stderr,R_dB\n";
    for (const auto& row : rows) {
        os << fmt::format("{},{:.10g},{:.10g},{:.10g}\n", row.n_modes, row.r, row.stderr_r, to_db(row.r));
    }
}

}  // namespace usui
