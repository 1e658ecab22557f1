// SPDX-License-Identifier: Apache-2.0
//
// Variance of linear combinations of photon numbers and its shot-noise
// normalization, for the joint intensity measurement
//
//     N_d = sum_{n=1}^{M/2} N_{ns} - sum_{n=1}^{M/2} N_{(n+m)i}.
#pragma once

#include "usui/builder.hpp"
#include "usui/photon_stats.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace usui {

/// Default seed amplitude used to reach the leading-order (x^2) regime.
inline constexpr double kDefaultSeedAmplitude = 1e6;

struct CombinationSpec {
    RVector weights;
    std::size_t pairing_offset = 0;
};

inline double to_db(double r) { return 10.0 * std::log10(r); }

/// Weights of N_d over a window of `window_modes` (0 picks the smallest window
/// that holds every shifted idler, M + 2m).
inline RVector nd_weights(std::size_t n_modes, std::size_t offset, std::size_t window_modes = 0) {
    if (n_modes == 0 || n_modes % 2 != 0) throw std::invalid_argument("nd_weights: M must be a positive even integer");
    const std::size_t needed = n_modes + 2 * offset;
    if (window_modes == 0) window_modes = needed;
    if (window_modes % 2 != 0) throw std::invalid_argument("nd_weights: window must hold whole slots");
    if (window_modes < needed) {
        throw std::out_of_range("nd_weights: offset " + std::to_string(offset) + " pushes idlers outside a " +
                                std::to_string(window_modes) + "-mode window");
    }
    RVector w = RVector::Zero(static_cast<Eigen::Index>(window_modes));
    for (std::size_t n = 0; n < n_modes / 2; ++n) {
        w(static_cast<Eigen::Index>(mode_index(n, Channel::signal))) += 1.0;
        w(static_cast<Eigen::Index>(mode_index(n + offset, Channel::idler))) -= 1.0;
    }
    return w;
}

inline CombinationSpec nd_spec(std::size_t n_modes, std::size_t offset, std::size_t window_modes = 0) {
    return CombinationSpec{nd_weights(n_modes, offset, window_modes), offset};
}

/// Var(sum_p w_p N_p) = w K w^T.
inline double combination_variance(const RMatrix& k, const RVector& w) {
    if (k.rows() != k.cols() || k.rows() != w.size()) {
        throw std::invalid_argument("combination_variance: dimension mismatch (K is " + std::to_string(k.rows()) +
                                    "x" + std::to_string(k.cols()) + ", w has " + std::to_string(w.size()) + ")");
    }
    return w.dot(k * w);
}

/// Noise normalized to the shot-noise level sum_p |w_p| <N_p>.
inline double normalized_noise(const IntensityStats& stats, const RVector& w) {
    const double variance = combination_variance(stats.cov_k, w);
    const double snl = w.cwiseAbs().dot(stats.mean_n);
    if (!(snl > 0.0)) throw std::domain_error("normalized_noise: shot-noise level is zero");
    return variance / snl;
}

inline double normalized_noise(const IntensityStats& stats, const CombinationSpec& spec) {
    if (spec.weights.size() == 0 || spec.weights.cwiseAbs().maxCoeff() == 0.0) {
        throw std::invalid_argument("normalized_noise: weights are all zero");
    }
    return normalized_noise(stats, spec.weights);
}

struct RdClosedForm {
    double exact;       // m = 0, leading order in the seed amplitude
    double approx;      // 1/M + 1/(8 mu^4) with mu^2 the OPA1 power gain
    double asymptote;   // M -> infinity limit 1/(2g - 1)
};

/// Closed forms for m = 0 pairing at theta = 0 (params.theta is not used).
inline RdClosedForm rd_closed_form(const UsuiParams& params, double n_modes) {
    params.validate();
    if (!(n_modes > 0.0)) throw std::invalid_argument("rd_closed_form: M must be positive");
    const double nu1_sq = params.nu1 * params.nu1;
    const double denom = 2.0 * params.total_gain() - 1.0;
    const double mu_4 = std::pow(params.mu1, 4);
    RdClosedForm r{};
    r.asymptote = 1.0 / denom;
    r.exact = 8.0 * (nu1_sq * nu1_sq + nu1_sq) / (n_modes * denom) + r.asymptote;
    r.approx = 1.0 / n_modes + 1.0 / (8.0 * mu_4);
    return r;
}

/// Single-mode normalized intensity noise, (mu1^2 + nu1^2)(mu2^2 + nu2^2).
inline double single_mode_noise(const UsuiParams& params) { return params.v1() * params.v2(); }

/// Two-mode intensity-difference noise between 0s and each labelled partner at
/// theta = 0. Labels follow reference_partners() (without "0s").
inline std::vector<LabeledValue> two_mode_noise_table(const UsuiParams& params) {
    params.validate();
    const double mu1 = params.mu1, nu1 = params.nu1, mu2 = params.mu2, nu2 = params.nu2;
    const double v12 = params.v1() * params.v2();
    const double denom = 2.0 * params.total_gain() - 1.0;
    const double cross = (2.0 * mu1 * nu1 * params.v2() + 2.0 * mu2 * nu2 * params.v1()) / denom;
    const double nu1_sq = nu1 * nu1;
    return {
        {"-1i", v12 - 2.0 * mu1 * nu1 * mu2 * mu2 * cross},
        {"0i", (4.0 * (nu1_sq * nu1_sq + nu1_sq) + 1.0) / denom},
        {"-1s", v12 - 2.0 * mu1 * mu2 * nu1 * nu2},
        {"1s", v12 - 2.0 * mu1 * mu2 * nu1 * nu2},
        {"1i", v12 - 2.0 * mu1 * nu1 * nu2 * nu2 * cross},
        {"others", v12},
    };
}

/// High-gain limits of the equal-gain two-mode table at power gain mu^2.
inline std::vector<LabeledValue> two_mode_high_gain_limits(double mu_sq) {
    const double mu_4 = mu_sq * mu_sq;
    return {
        {"-1i", 2.0 * mu_4}, {"0i", 0.5}, {"-1s", 2.0 * mu_4}, {"1s", 2.0 * mu_4}, {"1i", 2.0 * mu_4},
        {"others", 4.0 * mu_4},
    };
}

/// +1 on 0s, -1 on the partner, over an M-mode window.
inline RVector pair_weights(std::size_t n_modes, const RelativeMode& partner) {
    static const RelativeMode ref{0, Channel::signal, "0s"};
    RVector w = RVector::Zero(static_cast<Eigen::Index>(n_modes));
    w(static_cast<Eigen::Index>(partner_index(n_modes, ref))) += 1.0;
    w(static_cast<Eigen::Index>(partner_index(n_modes, partner))) -= 1.0;
    return w;
}

/// Numerically evaluated N_d noise on the seeded state (m >= 0, any window).
inline double seeded_nd_noise(const UsuiParams& params, std::size_t n_modes, std::size_t offset,
                              double seed_x = kDefaultSeedAmplitude) {
    UsuiParams p = params;
    p.n_modes = n_modes + 2 * offset;
    p.seed_x = seed_x;
    return normalized_noise(intensity_stats(build_usui_state(p)), nd_weights(n_modes, offset));
}

}  // namespace usui
