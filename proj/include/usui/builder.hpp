// SPDX-License-Identifier: Apache-2.0
//
// Output state of a pulse-pumped unbalanced SU(1,1) interferometer.
//
// Mode layout inside an M-mode window is slot-major with signal first:
// index 2n is the signal of window slot n, 2n+1 its idler (0-based).
#pragma once

#include "usui/gaussian_state.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace usui {

enum class Channel { signal, idler };

inline std::size_t mode_index(std::size_t slot, Channel channel) {
    return 2 * slot + (channel == Channel::idler ? 1 : 0);
}
inline std::size_t slot_of(std::size_t mode) { return mode / 2; }
inline Channel channel_of(std::size_t mode) { return (mode % 2 == 0) ? Channel::signal : Channel::idler; }

struct UsuiParams {
    double mu1 = 1.0;
    double nu1 = 0.0;
    double mu2 = 1.0;
    double nu2 = 0.0;
    double theta = 0.0;
    std::size_t n_modes = 2;
    double seed_x = 0.0;

    static UsuiParams from_power_gains(double mu1_sq, double mu2_sq, double theta, std::size_t n_modes,
                                       double seed_x = 0.0) {
        if (!std::isfinite(mu1_sq) || mu1_sq < 1.0) throw std::invalid_argument("mu1_sq must be finite and >= 1");
        if (!std::isfinite(mu2_sq) || mu2_sq < 1.0) throw std::invalid_argument("mu2_sq must be finite and >= 1");
        UsuiParams p{std::sqrt(mu1_sq), std::sqrt(mu1_sq - 1.0), std::sqrt(mu2_sq), std::sqrt(mu2_sq - 1.0),
                     theta, n_modes, seed_x};
        p.validate();
        return p;
    }

    double v1() const { return mu1 * mu1 + nu1 * nu1; }
    double v2() const { return mu2 * mu2 + nu2 * nu2; }
    double c1() const { return mu1 * nu1; }
    double c2() const { return mu2 * nu2; }
    /// Total intensity gain g = (mu1 mu2 + nu1 nu2)^2.
    double total_gain() const {
        const double s = mu1 * mu2 + nu1 * nu2;
        return s * s;
    }

    void validate() const {
        for (double v : {mu1, nu1, mu2, nu2, theta, seed_x}) {
            if (!std::isfinite(v)) throw std::invalid_argument("USUI parameters must be finite");
        }
        if (mu1 < 1.0 || nu1 < 0.0 || mu2 < 1.0 || nu2 < 0.0) {
            throw std::invalid_argument("USUI gains require mu >= 1 and nu >= 0");
        }
        if (std::abs(mu1 * mu1 - nu1 * nu1 - 1.0) > kDefaultTolerance * std::max(1.0, mu1 * mu1)) {
            throw std::invalid_argument("OPA1 gains violate mu1^2 - nu1^2 = 1");
        }
        if (std::abs(mu2 * mu2 - nu2 * nu2 - 1.0) > kDefaultTolerance * std::max(1.0, mu2 * mu2)) {
            throw std::invalid_argument("OPA2 gains violate mu2^2 - nu2^2 = 1");
        }
        if (n_modes == 0 || n_modes % 2 != 0) throw std::invalid_argument("n_modes must be a positive even integer");
        if (seed_x < 0.0) throw std::invalid_argument("seed_x must be >= 0");
    }
};

enum class Opa { first = 1, second = 2 };

struct ScheduleEntry {
    Opa opa;
    std::size_t mode_p;  // 0-based, extended system
    std::size_t mode_q;
    std::size_t order;
};

/// Time-ordered squeezing operations on an extended system of `extended_modes`.
///
/// OPA1 pairs each idler with the next slot's signal, OPA2 pairs signal and
/// idler of the same slot. For each slot the OPA1 interaction on its idler
/// precedes the OPA2 one, and earlier slots precede later ones.
inline std::vector<ScheduleEntry> interaction_schedule(std::size_t extended_modes) {
    if (extended_modes % 2 != 0) throw std::invalid_argument("interaction_schedule: extended_modes must be even");
    if (extended_modes < 6) throw std::invalid_argument("interaction_schedule: extended_modes must be >= 6");
    std::vector<ScheduleEntry> out;
    out.reserve(extended_modes - 1);
    std::size_t order = 0;
    for (std::size_t k = 1; k < extended_modes / 2; ++k) {
        // 1-based pairs {2k, 2k+1} (OPA1) then {2k, 2k-1} (OPA2).
        out.push_back({Opa::first, 2 * k - 1, 2 * k, order++});
        out.push_back({Opa::second, 2 * k - 1, 2 * k - 2, order++});
    }
    out.push_back({Opa::second, extended_modes - 2, extended_modes - 1, order++});
    return out;
}

inline SqueezeOp squeeze_for(const ScheduleEntry& e, const UsuiParams& p) {
    if (e.opa == Opa::first) return SqueezeOp{e.mode_p, e.mode_q, p.mu1, p.nu1, 0.0};
    return SqueezeOp{e.mode_p, e.mode_q, p.mu2, p.nu2, p.theta};
}

/// Builds the M-mode output state. `padding_slots` extra slots are simulated
/// on each side of the window and traced out afterwards.
inline GaussianState build_usui_state(const UsuiParams& params, std::size_t padding_slots = 2) {
    params.validate();
    if (padding_slots < 1) throw std::invalid_argument("build_usui_state: padding_slots must be >= 1");
    const std::size_t m = params.n_modes;
    const std::size_t ext = m + 4 * padding_slots;
    const auto n = static_cast<Eigen::Index>(ext);

    CMatrix sigma = CMatrix::Identity(2 * n, 2 * n);
    CVector alpha = CVector::Zero(n);
    if (params.seed_x > 0.0) {
        const double amp = params.seed_x / std::numbers::sqrt2;
        for (std::size_t p = 0; p < ext; p += 2) alpha(static_cast<Eigen::Index>(p)) = amp;
    }
    for (const auto& e : interaction_schedule(ext)) {
        detail::squeeze_in_place(sigma, alpha, squeeze_for(e, params));
    }

    std::vector<std::size_t> keep(m);
    for (std::size_t i = 0; i < m; ++i) keep[i] = 2 * padding_slots + i;
    return partial_trace(GaussianState(std::move(alpha), std::move(sigma)), keep);
}

struct CovarianceBlocks {
    CMatrix a;
    CMatrix b;
};

/// Sparse closed-form A and B of the vacuum-seeded output window.
inline CovarianceBlocks closed_form_covariance(const UsuiParams& params) {
    params.validate();
    const auto m = static_cast<Eigen::Index>(params.n_modes);
    const double v1 = params.v1(), v2 = params.v2(), c1 = params.c1(), c2 = params.c2();
    const cplx e1 = std::polar(1.0, params.theta);
    const cplx e2 = std::polar(1.0, 2.0 * params.theta);

    CovarianceBlocks out{CMatrix::Zero(m, m), CMatrix::Zero(m, m)};
    for (Eigen::Index i = 0; i < m; ++i) out.a(i, i) = v1 * v2;
    // Formulas are written with 1-based p; i = p - 1.
    for (Eigen::Index p = 1; p <= m - 2; ++p) {
        const double sign = (p % 2 == 0) ? 1.0 : -1.0;  // (-1)^p
        out.a(p + 1, p - 1) = 2.0 * c1 * c2 * std::polar(1.0, params.theta * sign);
        out.a(p - 1, p + 1) = 2.0 * c1 * c2 * std::polar(1.0, -params.theta * sign);
    }
    for (Eigen::Index p = 1; p <= m - 1; ++p) {
        const bool odd = (p % 2 == 1);  // sin^2(p pi/2) = 1, cos^2 = 0
        const cplx v = odd ? 2.0 * v1 * c2 * e1 : cplx(2.0 * c1 * params.mu2 * params.mu2);
        out.b(p, p - 1) = out.b(p - 1, p) = v;
    }
    for (Eigen::Index p = 1; p <= m - 3; ++p) {
        if (p % 2 == 1) out.b(p + 2, p - 1) = out.b(p - 1, p + 2) = 2.0 * c1 * params.nu2 * params.nu2 * e2;
    }
    return out;
}

}  // namespace usui
