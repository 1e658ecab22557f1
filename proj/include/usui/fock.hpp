// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference: the same interaction schedule run on a dense state
// vector in a truncated Fock space, with photon statistics taken by direct
// summation. Only practical for small gains and ~10 modes.
#pragma once

#include "usui/builder.hpp"
#include "usui/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace usui {

struct FockOptions {
    std::size_t min_order = 4;                 // minimum Taylor terms per step
    double series_tolerance = 1e-16;           // stop when |term| <= tol * |sum|
    double leakage_bound = 1e-2;               // max population allowed on the cutoff shell
    std::size_t max_amplitudes = 20'000'000;   // memory budget (complex doubles)
};

/// Dense amplitudes over the product basis; mode k has stride (cutoff+1)^k.
class FockState {
  public:
    FockState(std::size_t n_modes, std::size_t cutoff, std::size_t max_amplitudes = FockOptions{}.max_amplitudes)
        : n_modes_(n_modes), cutoff_(cutoff) {
        if (n_modes == 0) throw std::invalid_argument("FockState: n_modes must be >= 1");
        if (cutoff == 0) throw std::invalid_argument("FockState: cutoff must be >= 1");
        std::size_t dim = 1;
        strides_.resize(n_modes);
        for (std::size_t k = 0; k < n_modes; ++k) {
            strides_[k] = dim;
            if (dim > max_amplitudes / (cutoff + 1)) {
                throw std::length_error("FockState: (cutoff+1)^n_modes exceeds the memory budget of " +
                                        std::to_string(max_amplitudes) + " amplitudes");
            }
            dim *= cutoff + 1;
        }
        amplitudes_.assign(dim, std::complex<double>(0.0));
        amplitudes_[0] = 1.0;
    }

    std::size_t n_modes() const { return n_modes_; }
    std::size_t cutoff() const { return cutoff_; }
    std::size_t dim() const { return amplitudes_.size(); }
    std::size_t stride(std::size_t mode) const { return strides_.at(mode); }
    std::size_t occupation(std::size_t index, std::size_t mode) const {
        return (index / strides_[mode]) % (cutoff_ + 1);
    }

    const std::vector<std::complex<double>>& amplitudes() const { return amplitudes_; }
    std::vector<std::complex<double>>& amplitudes() { return amplitudes_; }

    std::complex<double> amplitude(const std::vector<std::size_t>& occupations) const {
        if (occupations.size() != n_modes_) throw std::invalid_argument("FockState: wrong occupation length");
        std::size_t idx = 0;
        for (std::size_t k = 0; k < n_modes_; ++k) {
            if (occupations[k] > cutoff_) return 0.0;
            idx += occupations[k] * strides_[k];
        }
        return amplitudes_[idx];
    }

    double norm() const;
    /// Probability that at least one mode sits on the cutoff level.
    double boundary_population() const;

  private:
    std::size_t n_modes_;
    std::size_t cutoff_;
    std::vector<std::size_t> strides_;
    std::vector<std::complex<double>> amplitudes_;
};

namespace detail {

// Fixed-size blocks keep floating-point reductions independent of threading.
inline constexpr std::ptrdiff_t kReduceBlock = 1 << 16;

template <class F>
double blocked_sum(std::size_t n, F&& term) {
    const auto len = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t blocks = (len + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        double s = 0.0;
        const std::ptrdiff_t end = std::min(len, (b + 1) * kReduceBlock);
        for (std::ptrdiff_t i = b * kReduceBlock; i < end; ++i) s += term(static_cast<std::size_t>(i));
        partial[static_cast<std::size_t>(b)] = s;
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

inline double norm_sq(const std::vector<std::complex<double>>& v) {
    return blocked_sum(v.size(), [&](std::size_t i) { return std::norm(v[i]); });
}

// out = scale * (xi a_p^+ a_q^+ - conj(xi) a_p a_q) in
inline void apply_generator(const FockState& shape, std::size_t p, std::size_t q, std::complex<double> xi,
                            std::complex<double> scale, const std::vector<std::complex<double>>& in,
                            std::vector<std::complex<double>>& out) {
    const std::size_t sp = shape.stride(p), sq = shape.stride(q), shift = sp + sq;
    const std::size_t base = shape.cutoff() + 1, top = shape.cutoff();
    const auto len = static_cast<std::ptrdiff_t>(in.size());
    const std::complex<double> up = scale * xi, down = -scale * std::conj(xi);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < len; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::size_t np = (i / sp) % base, nq = (i / sq) % base;
        std::complex<double> acc = 0.0;
        if (np > 0 && nq > 0) acc += up * std::sqrt(double(np * nq)) * in[i - shift];
        if (np < top && nq < top) acc += down * std::sqrt(double((np + 1) * (nq + 1))) * in[i + shift];
        out[i] = acc;
    }
}

}  // namespace detail

inline double FockState::norm() const { return std::sqrt(detail::norm_sq(amplitudes_)); }

inline double FockState::boundary_population() const {
    return detail::blocked_sum(amplitudes_.size(), [&](std::size_t i) {
        for (std::size_t k = 0; k < n_modes_; ++k) {
            if (occupation(i, k) == cutoff_) return std::norm(amplitudes_[i]);
        }
        return 0.0;
    });
}

struct SqueezeReport {
    std::size_t steps = 0;
    std::size_t terms = 0;      // generator applications in total
    double residual = 0.0;      // largest norm of the last series term kept
    double leakage = 0.0;       // boundary population after the operation
};

/// Applies exp(xi a_p^+ a_q^+ - conj(xi) a_p a_q), xi = artanh(nu/mu) e^{i phi},
/// by splitting into steps with |G|/steps <= 1 and summing each step's Taylor
/// series until the measured term norm drops below the tolerance. The state is
/// not renormalized.
inline FockState fock_two_mode_squeeze(const FockState& state, std::size_t p, std::size_t q, double mu, double nu,
                                       double phi, std::size_t order, const FockOptions& options = {},
                                       SqueezeReport* report = nullptr) {
    SqueezeOp{p, q, mu, nu, phi}.validate(state.n_modes());
    if (order < 4) throw std::invalid_argument("fock_two_mode_squeeze: order must be >= 4");
    SqueezeReport rep;
    FockState out = state;
    if (nu == 0.0) {
        rep.leakage = out.boundary_population();
        if (report) *report = rep;
        return out;
    }
    const double r = std::atanh(nu / mu);
    const std::complex<double> xi = std::polar(r, phi);
    const double gen_bound = 2.0 * r * static_cast<double>(state.cutoff());
    rep.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gen_bound)));
    const double h = 1.0 / static_cast<double>(rep.steps);

    auto& y = out.amplitudes();
    std::vector<std::complex<double>> term(y.size()), next(y.size());
    for (std::size_t step = 0; step < rep.steps; ++step) {
        term = y;
        const double y_norm = std::sqrt(detail::norm_sq(y));
        double last = 0.0;
        for (std::size_t k = 1;; ++k) {
            detail::apply_generator(state, p, q, xi, h / static_cast<double>(k), term, next);
            term.swap(next);
            const auto len = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < len; ++i) y[static_cast<std::size_t>(i)] += term[static_cast<std::size_t>(i)];
            ++rep.terms;
            last = std::sqrt(detail::norm_sq(term));
            if (k >= order && last <= options.series_tolerance * y_norm) break;
            if (k > 200) throw std::runtime_error("fock_two_mode_squeeze: Taylor series failed to converge");
        }
        rep.residual = std::max(rep.residual, last);
    }
    rep.leakage = out.boundary_population();
    if (report) *report = rep;
    if (rep.leakage > options.leakage_bound) {
        throw std::runtime_error("fock_two_mode_squeeze: truncation leakage " + std::to_string(rep.leakage) +
                                 " exceeds bound " + std::to_string(options.leakage_bound));
    }
    return out;
}

struct FockExpectations {
    IntensityStats stats;   // over the M-mode window
    RMatrix g2;             // normally ordered g2(p, q), window indices
    double leakage = 0.0;   // largest boundary population seen along the schedule
    double norm = 0.0;
    std::size_t amplitudes = 0;
};

/// Runs the USUI schedule on the (M+4)-mode vacuum and reads out the window.
inline FockExpectations fock_usui_expectations(const UsuiParams& params, std::size_t cutoff,
                                               const FockOptions& options = {}) {
    params.validate();
    if (params.seed_x != 0.0) throw std::invalid_argument("fock_usui_expectations: only vacuum input is supported");
    const std::size_t m = params.n_modes;
    const std::size_t ext = m + 4;
    FockState state(ext, cutoff, options.max_amplitudes);

    FockExpectations out;
    for (const auto& e : interaction_schedule(ext)) {
        const SqueezeOp op = squeeze_for(e, params);
        SqueezeReport rep;
        state = fock_two_mode_squeeze(state, op.mode_p, op.mode_q, op.mu, op.nu, op.phase, options.min_order,
                                      options, &rep);
        out.leakage = std::max(out.leakage, rep.leakage);
    }
    out.norm = state.norm();
    out.amplitudes = state.dim();

    // <N_p> and <N_p N_q> over window modes 2..m+1, accumulated in fixed blocks.
    const auto& amp = state.amplitudes();
    const std::size_t first = 2;
    const auto len = static_cast<std::ptrdiff_t>(amp.size());
    const std::ptrdiff_t blocks = (len + detail::kReduceBlock - 1) / detail::kReduceBlock;
    const auto mm = static_cast<Eigen::Index>(m);
    std::vector<RMatrix> second(static_cast<std::size_t>(blocks), RMatrix::Zero(mm, mm));
    std::vector<RVector> first_moment(static_cast<std::size_t>(blocks), RVector::Zero(mm));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        RVector occ(mm);
        auto& s2 = second[static_cast<std::size_t>(b)];
        auto& s1 = first_moment[static_cast<std::size_t>(b)];
        const std::ptrdiff_t end = std::min(len, (b + 1) * detail::kReduceBlock);
        for (std::ptrdiff_t ii = b * detail::kReduceBlock; ii < end; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double prob = std::norm(amp[i]);
            if (prob == 0.0) continue;
            for (Eigen::Index k = 0; k < mm; ++k) occ(k) = double(state.occupation(i, first + std::size_t(k)));
            s1.noalias() += prob * occ;
            s2.noalias() += prob * occ * occ.transpose();
        }
    }
    RVector n1 = RVector::Zero(mm);
    RMatrix n2 = RMatrix::Zero(mm, mm);
    for (std::size_t b = 0; b < second.size(); ++b) {
        n1 += first_moment[b];
        n2 += second[b];
    }

    out.stats.mean_n = n1;
    out.stats.cov_k = n2 - n1 * n1.transpose();
    out.g2 = RMatrix::Zero(mm, mm);
    for (Eigen::Index p = 0; p < mm; ++p) {
        for (Eigen::Index q = 0; q < mm; ++q) {
            const double normal = n2(p, q) - (p == q ? n1(p) : 0.0);
            out.g2(p, q) = normal / (n1(p) * n1(q));
        }
    }
    return out;
}

}  // namespace usui
