// SPDX-License-Identifier: Apache-2.0
//
// Photon-number statistics of Gaussian states: mean photon numbers, the
// photon-number covariance K, and normalized second-order correlations.
#pragma once

#include "usui/builder.hpp"
#include "usui/gaussian_state.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace usui {

struct IntensityStats {
    RVector mean_n;  // <N_p>
    RMatrix cov_k;   // K_pq = <N_p N_q> - <N_p><N_q>

    std::size_t n_modes() const { return static_cast<std::size_t>(mean_n.size()); }
};

inline RVector mean_photon_numbers(const GaussianState& state) {
    const CMatrix a = state.block_a();
    return 0.5 * (a.diagonal().real().array() - 1.0).matrix() + state.displacement().cwiseAbs2();
}

/// K = 1/4 (A o A* + B o B* - I) + Re[(a* a^T) o A + (a* a^+) o B].
inline RMatrix intensity_covariance(const GaussianState& state) {
    const CMatrix a = state.block_a();
    const CMatrix b = state.block_b();
    const CVector& al = state.displacement();
    const auto m = a.rows();
    RMatrix k = 0.25 * (a.cwiseAbs2() + b.cwiseAbs2() - RMatrix::Identity(m, m));
    const CMatrix outer_a = al.conjugate() * al.transpose();
    const CMatrix outer_b = al.conjugate() * al.adjoint();
    k += (outer_a.cwiseProduct(a) + outer_b.cwiseProduct(b)).real();
    return k;
}

inline IntensityStats intensity_stats(const GaussianState& state) {
    return IntensityStats{mean_photon_numbers(state), intensity_covariance(state)};
}

/// g2(p,q) = K_pq / (N_p N_q) - delta_pq / N_p + 1.
inline double g2(const IntensityStats& stats, std::size_t p, std::size_t q) {
    if (p >= stats.n_modes() || q >= stats.n_modes()) throw std::out_of_range("g2: mode index out of range");
    const double np = stats.mean_n(static_cast<Eigen::Index>(p));
    const double nq = stats.mean_n(static_cast<Eigen::Index>(q));
    if (!(np > 0.0) || !(nq > 0.0)) {
        throw std::domain_error("g2 undefined: zero mean photon number in mode " + std::to_string(np > 0.0 ? q : p));
    }
    const double kpq = stats.cov_k(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
    return kpq / (np * nq) - (p == q ? 1.0 / np : 0.0) + 1.0;
}

inline double g2(const GaussianState& state, std::size_t p, std::size_t q) {
    return g2(intensity_stats(state), p, q);
}

/// Vacuum-seeded mean photon number of every output mode, (V1 V2 - 1)/2.
inline double closed_form_mean_n(const UsuiParams& params) { return 0.5 * (params.v1() * params.v2() - 1.0); }

/// Sparse closed-form K of the vacuum-seeded output window.
inline RMatrix closed_form_K(const UsuiParams& params) {
    params.validate();
    if (params.seed_x != 0.0) {
        throw std::invalid_argument("closed_form_K is derived for vacuum input; seed_x must be 0");
    }
    const auto m = static_cast<Eigen::Index>(params.n_modes);
    const double v1 = params.v1(), v2 = params.v2(), c1 = params.c1(), c2 = params.c2();
    const double mu2_4 = std::pow(params.mu2, 4), nu2_4 = std::pow(params.nu2, 4);
    RMatrix k = RMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) k(i, i) = 0.25 * (v1 * v1 * v2 * v2 - 1.0);
    for (Eigen::Index p = 1; p <= m - 1; ++p) {
        k(p, p - 1) = k(p - 1, p) = (p % 2 == 1) ? v1 * v1 * c2 * c2 : c1 * c1 * mu2_4;
    }
    for (Eigen::Index p = 1; p <= m - 2; ++p) k(p + 1, p - 1) = k(p - 1, p + 1) = c1 * c1 * c2 * c2;
    for (Eigen::Index p = 1; p <= m - 3; ++p) {
        if (p % 2 == 1) k(p + 2, p - 1) = k(p - 1, p + 2) = c1 * c1 * nu2_4;
    }
    return k;
}

// ----- correlations around a reference mode ---------------------------------

/// Relative position of a mode with respect to the reference signal mode 0s.
struct RelativeMode {
    int slot_offset;
    Channel channel;
    std::string label;
};

/// The labelled partners of 0s: 0s, -1i, 0i, -1s, 1s, 1i and a representative
/// uncorrelated mode ("others", taken as 2s).
inline const std::vector<RelativeMode>& reference_partners() {
    static const std::vector<RelativeMode> partners = {
        {0, Channel::signal, "0s"},  {-1, Channel::idler, "-1i"}, {0, Channel::idler, "0i"},
        {-1, Channel::signal, "-1s"}, {1, Channel::signal, "1s"},  {1, Channel::idler, "1i"},
        {2, Channel::signal, "others"},
    };
    return partners;
}

/// Window slot hosting 0s: the central slot, rounded down.
inline std::size_t reference_slot(std::size_t n_modes) { return (n_modes / 2 - 1) / 2; }

/// Window index of a partner, or throws if the window is too small to hold it.
inline std::size_t partner_index(std::size_t n_modes, const RelativeMode& rel) {
    const long slot = static_cast<long>(reference_slot(n_modes)) + rel.slot_offset;
    if (slot < 0 || slot >= static_cast<long>(n_modes / 2)) {
        throw std::out_of_range("mode " + rel.label + " lies outside a " + std::to_string(n_modes) + "-mode window");
    }
    return mode_index(static_cast<std::size_t>(slot), rel.channel);
}

struct LabeledValue {
    std::string label;
    double value;
};

/// Closed-form g2(0s, q) for the labelled partners q.
inline std::vector<LabeledValue> g2_table_reference(const UsuiParams& params) {
    params.validate();
    if (params.seed_x != 0.0) throw std::invalid_argument("g2 table closed forms require seed_x = 0");
    const double mu1 = params.mu1, nu1 = params.nu1, mu2 = params.mu2, nu2 = params.nu2;
    const double den = mu1 * mu1 * nu2 * nu2 + nu1 * nu1 * mu2 * mu2;
    auto one_plus_sq = [&](double num) {
        if (den == 0.0) return 1.0;  // both pumps off: every ratio is 0/0, no correlation
        const double r = num / den;
        return 1.0 + r * r;
    };
    return {
        {"0s", 2.0},
        {"-1i", one_plus_sq(mu1 * nu1 * mu2 * mu2)},
        {"0i", one_plus_sq(mu2 * nu2 * (mu1 * mu1 + nu1 * nu1))},
        {"-1s", one_plus_sq(mu1 * nu1 * mu2 * nu2)},
        {"1s", one_plus_sq(mu1 * nu1 * mu2 * nu2)},
        {"1i", one_plus_sq(mu1 * nu1 * nu2 * nu2)},
        {"others", 1.0},
    };
}

}  // namespace usui
