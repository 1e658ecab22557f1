// SPDX-License-Identifier: Apache-2.0
//
// Multi-mode Gaussian states in the complex (annihilation/creation) basis.
//
// A state over M modes is the displacement alpha_p = <a_p> together with the
// 2M x 2M covariance
//
//     sigma = [ A   B  ]      A_pq = <a_p a_q^+> + <a_q^+ a_p> - 2<a_p><a_q^+>
//             [ B*  A* ]      B_pq = 2<a_p a_q> - 2<a_p><a_q>
//
// acting on the operator vector [a_1 .. a_M, a_1^+ .. a_M^+]. Vacuum is
// sigma = I (not the hbar = 2 convention).
//
// Quadratures are x = (a + a^+)/sqrt(2), y = (a - a^+)/(i sqrt(2)), ordered
// [x_1 .. x_M, y_1 .. y_M]. The quadrature covariance is scaled so vacuum is
// the identity, and a physical state satisfies sigma_quad + i Omega >= 0.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace usui {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kDefaultTolerance = 1e-9;

/// Two-mode squeezing a_p -> mu a_p + nu e^{i phase} a_q^+ (and p <-> q).
struct SqueezeOp {
    std::size_t mode_p = 0;
    std::size_t mode_q = 1;
    double mu = 1.0;
    double nu = 0.0;
    double phase = 0.0;

    static SqueezeOp from_power_gain(std::size_t p, std::size_t q, double mu_sq, double phase = 0.0) {
        if (!std::isfinite(mu_sq) || mu_sq < 1.0) {
            throw std::invalid_argument("power gain must be finite and >= 1");
        }
        return SqueezeOp{p, q, std::sqrt(mu_sq), std::sqrt(mu_sq - 1.0), phase};
    }

    /// Same gains with the squeezing angle rotated by pi.
    SqueezeOp inverse() const { return SqueezeOp{mode_p, mode_q, mu, nu, phase + std::numbers::pi}; }

    void validate(std::size_t n_modes) const {
        if (!std::isfinite(mu) || !std::isfinite(nu) || !std::isfinite(phase)) {
            throw std::invalid_argument("squeeze gains and phase must be finite");
        }
        if (mu < 1.0 || nu < 0.0) {
            throw std::invalid_argument("squeeze requires mu >= 1 and nu >= 0");
        }
        if (std::abs(mu * mu - nu * nu - 1.0) > kDefaultTolerance * std::max(1.0, mu * mu)) {
            throw std::invalid_argument("squeeze gains violate mu^2 - nu^2 = 1");
        }
        if (mode_p == mode_q) {
            throw std::invalid_argument("squeeze modes must differ");
        }
        if (mode_p >= n_modes || mode_q >= n_modes) {
            throw std::out_of_range("squeeze mode index out of range");
        }
    }
};

class GaussianState {
  public:
    GaussianState(CVector displacement, CMatrix covariance)
        : alpha_(std::move(displacement)), sigma_(std::move(covariance)) {
        const auto m = alpha_.size();
        if (m == 0) {
            throw std::invalid_argument("a Gaussian state needs at least one mode");
        }
        if (sigma_.rows() != 2 * m || sigma_.cols() != 2 * m) {
            throw std::invalid_argument("covariance must be 2M x 2M");
        }
    }

    /// Assemble sigma from its A and B blocks.
    static GaussianState from_blocks(CVector displacement, const CMatrix& block_a, const CMatrix& block_b) {
        const auto m = displacement.size();
        if (block_a.rows() != m || block_a.cols() != m || block_b.rows() != m || block_b.cols() != m) {
            throw std::invalid_argument("A and B blocks must be M x M");
        }
        CMatrix sigma(2 * m, 2 * m);
        sigma.topLeftCorner(m, m) = block_a;
        sigma.topRightCorner(m, m) = block_b;
        sigma.bottomLeftCorner(m, m) = block_b.conjugate();
        sigma.bottomRightCorner(m, m) = block_a.conjugate();
        return GaussianState(std::move(displacement), std::move(sigma));
    }

    std::size_t n_modes() const { return static_cast<std::size_t>(alpha_.size()); }
    const CVector& displacement() const { return alpha_; }
    const CMatrix& covariance() const { return sigma_; }

    CMatrix block_a() const { return sigma_.topLeftCorner(alpha_.size(), alpha_.size()); }
    CMatrix block_b() const { return sigma_.topRightCorner(alpha_.size(), alpha_.size()); }
    cplx a(std::size_t p, std::size_t q) const { return sigma_(p, q); }
    cplx b(std::size_t p, std::size_t q) const { return sigma_(p, n_modes() + q); }

  private:
    CVector alpha_;
    CMatrix sigma_;
};

inline GaussianState vacuum_state(std::size_t n_modes) {
    if (n_modes == 0) {
        throw std::invalid_argument("vacuum_state: n_modes must be >= 1");
    }
    const auto m = static_cast<Eigen::Index>(n_modes);
    return GaussianState(CVector::Zero(m), CMatrix::Identity(2 * m, 2 * m));
}

inline GaussianState displace(const GaussianState& state, std::size_t mode, cplx amount) {
    if (mode >= state.n_modes()) {
        throw std::out_of_range("displace: mode index out of range");
    }
    CVector alpha = state.displacement();
    alpha(static_cast<Eigen::Index>(mode)) += amount;
    return GaussianState(std::move(alpha), state.covariance());
}

namespace detail {

// sigma -> S sigma S^+ touching only the four rows/columns {p, q, M+p, M+q}.
inline void squeeze_in_place(CMatrix& sigma, CVector& alpha, const SqueezeOp& op) {
    const auto m = alpha.size();
    const auto p = static_cast<Eigen::Index>(op.mode_p);
    const auto q = static_cast<Eigen::Index>(op.mode_q);
    const cplx g = op.nu * std::polar(1.0, op.phase);
    const Eigen::Index idx[4] = {p, q, m + p, m + q};
    // Local 4x4 block of S on [a_p, a_q, a_p^+, a_q^+].
    const cplx s[4][4] = {
        {op.mu, 0.0, 0.0, g},
        {0.0, op.mu, g, 0.0},
        {0.0, std::conj(g), op.mu, 0.0},
        {std::conj(g), 0.0, 0.0, op.mu},
    };

    CMatrix rows(4, sigma.cols());
    for (int r = 0; r < 4; ++r) {
        rows.row(r).setZero();
        for (int c = 0; c < 4; ++c) {
            if (s[r][c] != cplx(0.0)) rows.row(r) += s[r][c] * sigma.row(idx[c]);
        }
    }
    for (int r = 0; r < 4; ++r) sigma.row(idx[r]) = rows.row(r);

    CMatrix cols(sigma.rows(), 4);
    for (int c = 0; c < 4; ++c) {
        cols.col(c).setZero();
        for (int k = 0; k < 4; ++k) {
            if (s[c][k] != cplx(0.0)) cols.col(c) += std::conj(s[c][k]) * sigma.col(idx[k]);
        }
    }
    for (int c = 0; c < 4; ++c) sigma.col(idx[c]) = cols.col(c);

    const cplx ap = alpha(p);
    const cplx aq = alpha(q);
    alpha(p) = op.mu * ap + g * std::conj(aq);
    alpha(q) = op.mu * aq + g * std::conj(ap);
}

}  // namespace detail

inline GaussianState two_mode_squeeze(const GaussianState& state, const SqueezeOp& op) {
    op.validate(state.n_modes());
    CMatrix sigma = state.covariance();
    CVector alpha = state.displacement();
    detail::squeeze_in_place(sigma, alpha, op);
    return GaussianState(std::move(alpha), std::move(sigma));
}

inline GaussianState partial_trace(const GaussianState& state, const std::vector<std::size_t>& keep) {
    if (keep.empty()) {
        throw std::invalid_argument("partial_trace: keep set is empty");
    }
    std::vector<bool> seen(state.n_modes(), false);
    for (auto k : keep) {
        if (k >= state.n_modes()) throw std::out_of_range("partial_trace: index out of range");
        if (seen[k]) throw std::invalid_argument("partial_trace: duplicate index");
        seen[k] = true;
    }
    const auto n = static_cast<Eigen::Index>(keep.size());
    const auto m = static_cast<Eigen::Index>(state.n_modes());
    std::vector<Eigen::Index> full;
    full.reserve(2 * keep.size());
    for (auto k : keep) full.push_back(static_cast<Eigen::Index>(k));
    for (auto k : keep) full.push_back(static_cast<Eigen::Index>(k) + m);

    CVector alpha(n);
    for (Eigen::Index i = 0; i < n; ++i) alpha(i) = state.displacement()(full[i]);
    CMatrix sigma = state.covariance()(full, full);
    return GaussianState(std::move(alpha), std::move(sigma));
}

/// Pure-loss channel of transmissivity eta on one mode.
inline GaussianState apply_loss(const GaussianState& state, std::size_t mode, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("apply_loss: eta must lie in [0, 1]");
    }
    if (mode >= state.n_modes()) {
        throw std::out_of_range("apply_loss: mode index out of range");
    }
    const auto m = static_cast<Eigen::Index>(state.n_modes());
    const auto p = static_cast<Eigen::Index>(mode);
    const double t = std::sqrt(eta);
    CMatrix sigma = state.covariance();
    for (auto r : {p, p + m}) {
        sigma.row(r) *= t;
        sigma.col(r) *= t;
    }
    sigma(p, p) += 1.0 - eta;
    sigma(p + m, p + m) += 1.0 - eta;
    CVector alpha = state.displacement();
    alpha(p) *= t;
    return GaussianState(std::move(alpha), std::move(sigma));
}

inline GaussianState apply_loss_all(const GaussianState& state, double eta) {
    GaussianState out = state;
    for (std::size_t p = 0; p < state.n_modes(); ++p) out = apply_loss(out, p, eta);
    return out;
}

// ----- quadrature picture -------------------------------------------------

/// Standard symplectic form for the [x..., y...] ordering.
inline RMatrix symplectic_form(std::size_t n_modes) {
    const auto m = static_cast<Eigen::Index>(n_modes);
    RMatrix omega = RMatrix::Zero(2 * m, 2 * m);
    omega.topRightCorner(m, m) = RMatrix::Identity(m, m);
    omega.bottomLeftCorner(m, m) = -RMatrix::Identity(m, m);
    return omega;
}

/// Unitary T with [x; y] = T [a; a^+].
inline CMatrix complex_to_quadrature(std::size_t n_modes) {
    const auto m = static_cast<Eigen::Index>(n_modes);
    const double h = 1.0 / std::numbers::sqrt2;
    const cplx i(0.0, 1.0);
    CMatrix t = CMatrix::Zero(2 * m, 2 * m);
    t.topLeftCorner(m, m).diagonal().setConstant(h);
    t.topRightCorner(m, m).diagonal().setConstant(h);
    t.bottomLeftCorner(m, m).diagonal().setConstant(-i * h);
    t.bottomRightCorner(m, m).diagonal().setConstant(i * h);
    return t;
}

/// Real symmetric quadrature covariance, vacuum = identity.
inline RMatrix quadrature_covariance(const GaussianState& state) {
    const CMatrix a = state.block_a();
    const CMatrix b = state.block_b();
    const auto m = a.rows();
    RMatrix v(2 * m, 2 * m);
    v.topLeftCorner(m, m) = (a + b).real();
    v.topRightCorner(m, m) = (b - a).imag();
    v.bottomLeftCorner(m, m) = (a + b).imag();
    v.bottomRightCorner(m, m) = (a - b).real();
    return v;
}

/// Real image T S T^+ of the complex-basis symplectic matrix of a squeeze.
inline RMatrix quadrature_symplectic(const SqueezeOp& op, std::size_t n_modes) {
    op.validate(n_modes);
    const auto m = static_cast<Eigen::Index>(n_modes);
    CMatrix s = CMatrix::Identity(2 * m, 2 * m);
    const auto p = static_cast<Eigen::Index>(op.mode_p);
    const auto q = static_cast<Eigen::Index>(op.mode_q);
    const cplx g = op.nu * std::polar(1.0, op.phase);
    s(p, p) = s(q, q) = s(m + p, m + p) = s(m + q, m + q) = op.mu;
    s(p, m + q) = s(q, m + p) = g;
    s(m + p, q) = s(m + q, p) = std::conj(g);
    const CMatrix t = complex_to_quadrature(n_modes);
    const CMatrix sq = t * s * t.adjoint();
    return sq.real();
}

struct Diagnostics {
    double hermiticity_defect = 0.0;   // max |A_pq - conj(A_qp)|
    double symmetry_defect = 0.0;      // max |B_pq - B_qp|
    double min_diagonal_a = 0.0;       // min Re A_pp
    double max_diagonal_imag = 0.0;    // max |Im A_pp|
    double min_physical_eigenvalue = 0.0;
    bool passed = false;
};

inline Diagnostics validate(const GaussianState& state, double tol = kDefaultTolerance) {
    Diagnostics d;
    const CMatrix a = state.block_a();
    const CMatrix b = state.block_b();
    d.hermiticity_defect = (a - a.adjoint()).cwiseAbs().maxCoeff();
    d.symmetry_defect = (b - b.transpose()).cwiseAbs().maxCoeff();
    d.min_diagonal_a = a.diagonal().real().minCoeff();
    d.max_diagonal_imag = a.diagonal().imag().cwiseAbs().maxCoeff();

    // Eigenvalues of sigma_quad + i Omega on the Hermitian part of the input,
    // so a corrupted A still yields a finite diagnostic.
    const RMatrix v = quadrature_covariance(state);
    const RMatrix vs = 0.5 * (v + v.transpose());
    const CMatrix h = vs.cast<cplx>() + cplx(0.0, 1.0) * symplectic_form(state.n_modes()).cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    d.min_physical_eigenvalue = es.eigenvalues().minCoeff();

    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    d.passed = d.hermiticity_defect <= tol * scale && d.symmetry_defect <= tol * scale &&
               d.max_diagonal_imag <= tol * scale && d.min_diagonal_a >= 1.0 - tol &&
               d.min_physical_eigenvalue >= -tol * scale;
    return d;
}

// ----- text dump -----------------------------------------------------------
//
//   usui-gaussian-state v1
//   n_modes,M
//   displacement            then M lines "re,im"
//   block_a                 then M lines of M "re,im" pairs, row-major
//   block_b                 same layout

namespace detail {

inline void write_complex(std::ostream& os, cplx z) {
    os << z.real() << ',' << z.imag();
}

inline std::vector<double> parse_csv_doubles(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(cell, &used));
    }
    return out;
}

}  // namespace detail

inline void write_state_dump(std::ostream& os, const GaussianState& state) {
    const auto old_precision = os.precision(17);
    const auto m = static_cast<Eigen::Index>(state.n_modes());
    os << "usui-gaussian-state v1\n";
    os << "n_modes," << m << '\n';
    os << "displacement\n";
    for (Eigen::Index p = 0; p < m; ++p) {
        detail::write_complex(os, state.displacement()(p));
        os << '\n';
    }
    for (const char* name : {"block_a", "block_b"}) {
        os << name << '\n';
        const Eigen::Index off = (name[6] == 'a') ? 0 : m;
        for (Eigen::Index p = 0; p < m; ++p) {
            for (Eigen::Index q = 0; q < m; ++q) {
                if (q) os << ',';
                detail::write_complex(os, state.covariance()(p, q + off));
            }
            os << '\n';
        }
    }
    os.precision(old_precision);
}

inline GaussianState read_state_dump(std::istream& is) {
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(is, line)) throw std::runtime_error(std::string("state dump truncated before ") + what);
        return line;
    };
    if (next("header") != "usui-gaussian-state v1") throw std::runtime_error("state dump: bad header");
    next("n_modes");
    if (line.rfind("n_modes,", 0) != 0) throw std::runtime_error("state dump: expected n_modes");
    const long m = std::stol(line.substr(8));
    if (m <= 0) throw std::runtime_error("state dump: n_modes must be positive");

    CVector alpha(m);
    if (next("displacement") != "displacement") throw std::runtime_error("state dump: expected displacement");
    for (long p = 0; p < m; ++p) {
        const auto v = detail::parse_csv_doubles(next("displacement row"));
        if (v.size() != 2) throw std::runtime_error("state dump: displacement row must be re,im");
        alpha(p) = cplx(v[0], v[1]);
    }
    CMatrix blocks[2] = {CMatrix(m, m), CMatrix(m, m)};
    for (int blk = 0; blk < 2; ++blk) {
        const std::string expected = blk == 0 ? "block_a" : "block_b";
        if (next(expected.c_str()) != expected) throw std::runtime_error("state dump: expected " + expected);
        for (long p = 0; p < m; ++p) {
            const auto v = detail::parse_csv_doubles(next("matrix row"));
            if (v.size() != static_cast<std::size_t>(2 * m)) throw std::runtime_error("state dump: bad row width");
            for (long q = 0; q < m; ++q) blocks[blk](p, q) = cplx(v[2 * q], v[2 * q + 1]);
        }
    }
    return GaussianState::from_blocks(std::move(alpha), blocks[0], blocks[1]);
}

}  // namespace usui
