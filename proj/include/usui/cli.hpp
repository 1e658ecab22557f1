// SPDX-License-Identifier: Apache-2.0
//
// Config handling and verbs behind the `usui` command-line tool.
//
// Config files are flat `key = value` text; `#` starts a comment. Values
// given on the command line override the file.
#pragma once

#include "usui/builder.hpp"
#include "usui/fock.hpp"
#include "usui/montecarlo.hpp"
#include "usui/photon_stats.hpp"
#include "usui/squeezing.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace usui::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kCheckFailed = 2 };

/// Invalid configuration; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

struct RunConfig {
    double mu1_sq = 14.0;
    double mu2_sq = 14.0;
    double theta = 0.0;
    std::size_t M = 12;
    std::size_t m = 0;
    double seed_x = 0.0;
    double eta = 1.0;
    double noise_var = 0.0;
    std::size_t samples = 100'000;  // Monte Carlo window draws (groups)
    std::uint64_t rng_seed = 1;
    double sweep_min = 2.0;
    double sweep_max = 30.0;
    std::size_t sweep_steps = 15;
    bool montecarlo = false;
    double tol = 1e-9;
    bool fock = false;
    std::size_t fock_cutoff = 4;
    double fock_nu_sq = 0.05;
    std::size_t workers = 1;
    std::string output;

    UsuiParams params() const { return UsuiParams::from_power_gains(mu1_sq, mu2_sq, theta, M, seed_x); }
};

/// One `key = value` entry and where it came from (for messages).
struct RawEntry {
    std::string key;
    std::string value;
    std::string origin;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const RawEntry& e) {
    double v = 0.0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ConfigError(e.key, fmt::format("{}: key '{}': expected a finite number, got '{}'", e.origin, e.key, e.value));
    }
    return v;
}

inline std::uint64_t parse_uint(const RawEntry& e) {
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        // Accept integral values written in floating-point form, e.g. 1e6.
        double d = 0.0;
        auto [p2, ec2] = std::from_chars(first, last, d);
        if (ec2 == std::errc() && p2 == last && d >= 0.0 && d < 1.8e19 && std::floor(d) == d) {
            return static_cast<std::uint64_t>(d);
        }
        throw ConfigError(e.key,
                          fmt::format("{}: key '{}': expected a non-negative integer, got '{}'", e.origin, e.key, e.value));
    }
    return v;
}

inline bool parse_bool(const RawEntry& e) {
    if (e.value == "1" || e.value == "true" || e.value == "yes" || e.value == "on") return true;
    if (e.value == "0" || e.value == "false" || e.value == "no" || e.value == "off") return false;
    throw ConfigError(e.key, fmt::format("{}: key '{}': expected 0/1 or true/false, got '{}'", e.origin, e.key, e.value));
}

using Setter = std::function<void(RunConfig&, const RawEntry&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"mu1_sq", [](RunConfig& c, const RawEntry& e) { c.mu1_sq = parse_real(e); }},
        {"mu2_sq", [](RunConfig& c, const RawEntry& e) { c.mu2_sq = parse_real(e); }},
        {"theta", [](RunConfig& c, const RawEntry& e) { c.theta = parse_real(e); }},
        {"M", [](RunConfig& c, const RawEntry& e) { c.M = parse_uint(e); }},
        {"m", [](RunConfig& c, const RawEntry& e) { c.m = parse_uint(e); }},
        {"seed_x", [](RunConfig& c, const RawEntry& e) { c.seed_x = parse_real(e); }},
        {"eta", [](RunConfig& c, const RawEntry& e) { c.eta = parse_real(e); }},
        {"noise_var", [](RunConfig& c, const RawEntry& e) { c.noise_var = parse_real(e); }},
        {"samples", [](RunConfig& c, const RawEntry& e) { c.samples = parse_uint(e); }},
        {"rng_seed", [](RunConfig& c, const RawEntry& e) { c.rng_seed = parse_uint(e); }},
        {"sweep_min", [](RunConfig& c, const RawEntry& e) { c.sweep_min = parse_real(e); }},
        {"sweep_max", [](RunConfig& c, const RawEntry& e) { c.sweep_max = parse_real(e); }},
        {"sweep_steps", [](RunConfig& c, const RawEntry& e) { c.sweep_steps = parse_uint(e); }},
        {"montecarlo", [](RunConfig& c, const RawEntry& e) { c.montecarlo = parse_bool(e); }},
        {"tol", [](RunConfig& c, const RawEntry& e) { c.tol = parse_real(e); }},
        {"fock", [](RunConfig& c, const RawEntry& e) { c.fock = parse_bool(e); }},
        {"fock_cutoff", [](RunConfig& c, const RawEntry& e) { c.fock_cutoff = parse_uint(e); }},
        {"fock_nu_sq", [](RunConfig& c, const RawEntry& e) { c.fock_nu_sq = parse_real(e); }},
        {"workers", [](RunConfig& c, const RawEntry& e) { c.workers = parse_uint(e); }},
        {"output", [](RunConfig& c, const RawEntry& e) { c.output = e.value; }},
    };
    return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : detail::setters()) keys.push_back(k);
    return keys;
}

/// Parses `key = value` lines. Unknown keys and malformed lines are errors.
inline std::vector<RawEntry> parse_config_text(std::istream& in, const std::string& source = "config") {
    std::vector<RawEntry> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        const std::string origin = fmt::format("{} line {}", source, lineno);
        const auto hash = line.find('#');
        const std::string body = detail::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(detail::trim(body), fmt::format("{}: expected 'key = value', got '{}'", origin, body));
        }
        RawEntry e{detail::trim(std::string_view(body).substr(0, eq)), detail::trim(std::string_view(body).substr(eq + 1)),
                   origin};
        if (!detail::setters().count(e.key)) {
            throw ConfigError(e.key, fmt::format("{}: unknown key '{}'", origin, e.key));
        }
        if (e.value.empty()) throw ConfigError(e.key, fmt::format("{}: key '{}' has no value", origin, e.key));
        out.push_back(std::move(e));
    }
    return out;
}

/// Applies entries in order; later entries win.
inline void apply_entries(RunConfig& cfg, const std::vector<RawEntry>& entries) {
    for (const auto& e : entries) {
        const auto it = detail::setters().find(e.key);
        if (it == detail::setters().end()) throw ConfigError(e.key, fmt::format("{}: unknown key '{}'", e.origin, e.key));
        it->second(cfg, e);
    }
}

enum class Verb { g2_table, sweep_gain, sweep_modes, montecarlo, verify };

namespace detail {

inline void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, fmt::format("key '{}': {}", key, what));
}

}  // namespace detail

/// Checks every field the verb uses against the library preconditions.
inline void validate(const RunConfig& c, Verb verb) {
    using detail::require;
    require(c.mu1_sq >= 1.0, "mu1_sq", fmt::format("power gain must be >= 1 (got {})", c.mu1_sq));
    require(c.mu2_sq >= 1.0, "mu2_sq", fmt::format("power gain must be >= 1 (got {})", c.mu2_sq));
    require(c.M >= 2 && c.M % 2 == 0, "M", fmt::format("must be a positive even integer (got {})", c.M));
    require(c.seed_x >= 0.0, "seed_x", fmt::format("must be >= 0 (got {})", c.seed_x));
    require(c.eta >= 0.0 && c.eta <= 1.0, "eta", fmt::format("must lie in [0, 1] (got {})", c.eta));
    require(c.noise_var >= 0.0, "noise_var", fmt::format("must be >= 0 (got {})", c.noise_var));
    require(c.tol > 0.0, "tol", fmt::format("must be > 0 (got {})", c.tol));
    require(c.workers >= 1, "workers", "must be >= 1");

    if (verb == Verb::g2_table) {
        require(c.seed_x == 0.0, "seed_x", "g2-table uses the vacuum-seeded state; set seed_x = 0");
    }
    if (verb == Verb::sweep_gain || verb == Verb::sweep_modes) {
        require(c.sweep_max >= c.sweep_min, "sweep_max", fmt::format("must be >= sweep_min ({} < {})", c.sweep_max, c.sweep_min));
    }
    if (verb == Verb::sweep_gain) {
        require(c.sweep_min >= 1.0, "sweep_min", fmt::format("power gain must be >= 1 (got {})", c.sweep_min));
        require(c.sweep_steps >= 1, "sweep_steps", "must be >= 1");
        require(c.sweep_steps == 1 || c.sweep_max > c.sweep_min, "sweep_max", "must exceed sweep_min when sweep_steps > 1");
    }
    if (verb == Verb::sweep_modes) {
        require(c.sweep_min >= 2.0 && std::floor(c.sweep_min) == c.sweep_min && std::fmod(c.sweep_min, 2.0) == 0.0,
                "sweep_min", fmt::format("mode count must be a positive even integer (got {})", c.sweep_min));
        require(std::floor(c.sweep_max) == c.sweep_max, "sweep_max",
                fmt::format("mode count must be an integer (got {})", c.sweep_max));
    }
    const bool mc = verb == Verb::montecarlo || ((verb == Verb::sweep_gain || verb == Verb::sweep_modes) && c.montecarlo);
    if (mc) {
        require(c.seed_x > 0.0, "seed_x", "Monte Carlo detection emulates self-homodyne detection; set seed_x > 0");
        require(c.samples >= 10, "samples", fmt::format("need at least 10 groups (got {})", c.samples));
    }
    if (verb == Verb::verify && c.fock) {
        require(c.fock_cutoff >= 1, "fock_cutoff", "must be >= 1");
        require(c.fock_nu_sq > 0.0, "fock_nu_sq", fmt::format("must be > 0 (got {})", c.fock_nu_sq));
    }
}

// ----- g2-table --------------------------------------------------------------

/// Rows of the g2 table. The window holds at least 8 modes so every labelled
/// partner of 0s fits.
struct G2Row {
    std::string label;
    double state;
    double closed_form;
};

inline std::vector<G2Row> g2_table_rows(const RunConfig& c) {
    UsuiParams p = UsuiParams::from_power_gains(c.mu1_sq, c.mu2_sq, c.theta, std::max<std::size_t>(c.M, 8));
    const IntensityStats stats = intensity_stats(build_usui_state(p));
    const auto& partners = reference_partners();
    const auto reference = g2_table_reference(p);
    const std::size_t ref = partner_index(p.n_modes, partners.front());
    std::vector<G2Row> rows;
    for (std::size_t i = 0; i < partners.size(); ++i) {
        rows.push_back({partners[i].label, g2(stats, ref, partner_index(p.n_modes, partners[i])), reference[i].value});
    }
    return rows;
}

inline int cmd_g2_table(const RunConfig& c, std::ostream& out, std::ostream& log) {
    validate(c, Verb::g2_table);
    const auto rows = g2_table_rows(c);
    out << "pair_label,g2_state,g2_closed_form,abs_diff\n";
    bool ok = true;
    for (const auto& r : rows) {
        const double diff = std::abs(r.state - r.closed_form);
        ok = ok && diff <= c.tol * std::max(1.0, std::abs(r.closed_form));
        out << fmt::format("0s:{},{:.12g},{:.12g},{:.3e}\n", r.label, r.state, r.closed_form, diff);
    }
    if (!ok) {
        log << fmt::format("g2-table: state and closed form differ by more than tol = {:g}\n", c.tol);
        return kCheckFailed;
    }
    return kOk;
}

// ----- sweeps ----------------------------------------------------------------

struct SweepRow {
    double x;
    double r_exact;
    std::optional<double> r_approx;
    std::optional<double> r_mc;
    std::optional<double> stderr_mc;
};

inline std::vector<double> sweep_grid(const RunConfig& c, Verb verb) {
    std::vector<double> xs;
    if (verb == Verb::sweep_modes) {
        for (double m = c.sweep_min; m <= c.sweep_max; m += 2.0) xs.push_back(m);
    } else if (c.sweep_steps == 1) {
        xs.push_back(c.sweep_min);
    } else {
        for (std::size_t i = 0; i < c.sweep_steps; ++i) {
            xs.push_back(c.sweep_min + (c.sweep_max - c.sweep_min) * static_cast<double>(i) /
                                           static_cast<double>(c.sweep_steps - 1));
        }
    }
    return xs;
}

/// One sweep point. Gain sweeps set both power gains to x; mode sweeps set M = x.
inline SweepRow sweep_point(const RunConfig& c, Verb verb, double x, std::uint64_t row_seed) {
    RunConfig rc = c;
    if (verb == Verb::sweep_gain) {
        rc.mu1_sq = rc.mu2_sq = x;
    } else {
        rc.M = static_cast<std::size_t>(x);
    }
    UsuiParams p = UsuiParams::from_power_gains(rc.mu1_sq, rc.mu2_sq, rc.theta, rc.M);
    SweepRow row{x, 0.0, std::nullopt, std::nullopt, std::nullopt};
    if (rc.m == 0 && rc.theta == 0.0) {
        const auto r = rd_closed_form(p, static_cast<double>(rc.M));
        row.r_exact = lossy_noise(r.exact, rc.eta);
        row.r_approx = lossy_noise(r.approx, rc.eta);
    } else {
        const double x_seed = rc.seed_x > 0.0 ? rc.seed_x : kDefaultSeedAmplitude;
        row.r_exact = lossy_noise(seeded_nd_noise(p, rc.M, rc.m, x_seed), rc.eta);
    }
    if (rc.montecarlo) {
        p.seed_x = rc.seed_x;
        DetectorConfig det;
        det.eta = rc.eta;
        det.electronic_noise_var = rc.noise_var;
        det.n_pulses = rc.samples * (rc.M / 2);
        det.rng_seed = row_seed;
        det.workers = 1;
        const auto rec = simulate_detection_run(p, rc.m, det);
        const auto est = group_and_normalize(rec, rc.M / 2, detection_snl(p, rc.m, rc.eta));
        row.r_mc = est.r;
        row.stderr_mc = est.stderr_r;
    }
    return row;
}

inline std::vector<SweepRow> sweep_rows(const RunConfig& c, Verb verb) {
    const auto xs = sweep_grid(c, verb);
    std::vector<SweepRow> rows(xs.size());
    usui::detail::for_each_batch(xs.size(), c.workers, [&](std::size_t i) {
        rows[i] = sweep_point(c, verb, xs[i], stream_seed(c.rng_seed, i));
    });
    return rows;
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? fmt::format("{:.10g}", *v) : std::string();
}

inline int cmd_sweep(const RunConfig& c, Verb verb, std::ostream& out, std::ostream& /*log*/) {
    validate(c, verb);
    const auto rows = sweep_rows(c, verb);
    out << "x,R_exact,R_approx_eq5,R_dB,R_montecarlo,stderr\n";
    for (const auto& r : rows) {
        out << fmt::format("{:.10g},{:.10g},{},{:.6f},{},{}\n", r.x, r.r_exact, format_optional(r.r_approx),
                           to_db(r.r_exact), format_optional(r.r_mc), format_optional(r.stderr_mc));
    }
    return kOk;
}

// ----- montecarlo --------------------------------------------------------------

struct MonteCarloResult {
    GroupEstimate estimate;
    double r_theory;
    PulseRunRecord record;
};

inline MonteCarloResult run_montecarlo(const RunConfig& c) {
    validate(c, Verb::montecarlo);
    const UsuiParams p = c.params();
    DetectorConfig det;
    det.eta = c.eta;
    det.electronic_noise_var = c.noise_var;
    det.n_pulses = c.samples * (c.M / 2);
    det.rng_seed = c.rng_seed;
    det.workers = c.workers;
    MonteCarloResult res;
    res.record = simulate_detection_run(p, c.m, det);
    const double snl = detection_snl(p, c.m, c.eta);
    res.estimate = group_and_normalize(res.record, c.M / 2, snl);
    const double r_lossless = (c.m == 0 && c.theta == 0.0) ? rd_closed_form(p, double(c.M)).exact
                                                           : seeded_nd_noise(p, c.M, c.m, c.seed_x);
    res.r_theory = lossy_noise(r_lossless, c.eta) + c.noise_var * double(c.M / 2) / snl;
    return res;
}

inline int cmd_montecarlo(const RunConfig& c, std::ostream& out, std::ostream& log, std::ostream* record_out = nullptr) {
    const auto res = run_montecarlo(c);
    write_stats_csv(out, {{c.M, res.estimate.r, res.estimate.stderr_r}});
    if (record_out) write_record_csv(*record_out, res.record);
    const double z = (res.estimate.r - res.r_theory) / res.estimate.stderr_r;
    log << fmt::format("montecarlo: {} groups, R = {:.6g} +/- {:.2g}, theory {:.6g} ({:+.2f} SE)\n", res.estimate.n_groups,
                       res.estimate.r, res.estimate.stderr_r, res.r_theory, z);
    return kOk;
}

// ----- verify ------------------------------------------------------------------

struct CheckResult {
    std::string name;
    double error;
    double tolerance;
    double seconds;
    bool passed() const { return error <= tolerance; }
};

namespace detail {

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

template <class F>
CheckResult timed_check(std::string name, double tolerance, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const double err = f();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(name), err, tolerance, secs};
}

/// Deterministic parameter sets for the Gaussian checks.
inline std::vector<UsuiParams> verify_parameter_sets(std::size_t n_modes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gain(1.0, 20.0), phase(-M_PI, M_PI);
    std::vector<UsuiParams> out;
    for (int i = 0; i < 5; ++i) {
        const double g1 = gain(rng), g2v = gain(rng), th = phase(rng);
        out.push_back(UsuiParams::from_power_gains(g1, g2v, th, n_modes));
    }
    return out;
}

}  // namespace detail

/// Relative scale of each check's tolerance; the configured tol multiplies it.
inline constexpr double kSeededScale = 1e3;  // leading-order in 1/x^2 at x = 1e6
inline constexpr double kFockScale = 1e6;    // truncated Fock space, 1e-3 at tol = 1e-9

inline std::vector<CheckResult> run_verify(const RunConfig& c) {
    validate(c, Verb::verify);
    std::vector<CheckResult> checks;

    checks.push_back(detail::timed_check("builder vs closed-form A, B (M = 2..20)", c.tol, [&] {
        double worst = 0.0;
        for (std::size_t m = 2; m <= 20; m += 2) {
            for (const auto& p : detail::verify_parameter_sets(m, c.rng_seed + m)) {
                const GaussianState s = build_usui_state(p);
                const auto cf = closed_form_covariance(p);
                const double scale = std::max(1.0, detail::max_abs(cf.a));
                worst = std::max(worst, detail::max_abs(s.block_a() - cf.a) / scale);
                worst = std::max(worst, detail::max_abs(s.block_b() - cf.b) / scale);
            }
        }
        return worst;
    }));

    checks.push_back(detail::timed_check("intensity covariance K vs closed form", c.tol, [&] {
        double worst = 0.0;
        for (std::size_t m : {2, 6, 12, 20}) {
            for (const auto& p : detail::verify_parameter_sets(m, c.rng_seed + 100 + m)) {
                const RMatrix k = intensity_covariance(build_usui_state(p));
                const RMatrix cf = closed_form_K(p);
                worst = std::max(worst, (k - cf).cwiseAbs().maxCoeff() / std::max(1.0, cf.cwiseAbs().maxCoeff()));
            }
        }
        return worst;
    }));

    checks.push_back(detail::timed_check("g2 table vs closed form", c.tol, [&] {
        double worst = 0.0;
        for (const auto& row : g2_table_rows(c)) {
            worst = std::max(worst, std::abs(row.state - row.closed_form) / std::max(1.0, std::abs(row.closed_form)));
        }
        return worst;
    }));

    checks.push_back(detail::timed_check("R_d closed form vs seeded state (x = 1e6)", c.tol * kSeededScale, [&] {
        double worst = 0.0;
        for (std::size_t m : {2, 4, 12, 20}) {
            const UsuiParams p = UsuiParams::from_power_gains(c.mu1_sq, c.mu2_sq, 0.0, m);
            const double exact = rd_closed_form(p, double(m)).exact;
            worst = std::max(worst, std::abs(seeded_nd_noise(p, m, 0) - exact) / exact);
        }
        return worst;
    }));

    if (c.fock) {
        const double target = c.tol * kFockScale;
        double allowed = target;
        checks.push_back(detail::timed_check(
            fmt::format("Fock oracle (nu^2 = {:g}, cutoff {}, M = 6)", c.fock_nu_sq, c.fock_cutoff), target, [&] {
                const double g = 1.0 + c.fock_nu_sq;
                const UsuiParams p = UsuiParams::from_power_gains(g, g, c.theta, 6);
                const FockExpectations f = fock_usui_expectations(p, c.fock_cutoff);
                const IntensityStats s = intensity_stats(build_usui_state(p));
                // Relative errors; the allowance widens to 10x the measured leakage when that is larger.
                allowed = std::max(target, 10.0 * f.leakage);
                auto rel = [](double a, double b, double scale) { return std::abs(a - b) / scale; };
                double worst = 0.0;
                const auto n = s.mean_n.size();
                for (Eigen::Index i = 0; i < n; ++i) {
                    worst = std::max(worst, rel(f.stats.mean_n(i), s.mean_n(i), s.mean_n(i)));
                    for (Eigen::Index j = 0; j < n; ++j) {
                        const double k_scale = std::max(std::abs(s.cov_k(i, j)), s.mean_n(i) * s.mean_n(j));
                        worst = std::max(worst, rel(f.stats.cov_k(i, j), s.cov_k(i, j), k_scale));
                        const double g = g2(s, std::size_t(i), std::size_t(j));
                        worst = std::max(worst, rel(f.g2(i, j), g, g));
                    }
                }
                return worst;
            }));
        checks.back().tolerance = allowed;
    }
    return checks;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out) {
    const auto checks = run_verify(c);
    bool ok = true;
    for (const auto& ch : checks) {
        ok = ok && ch.passed();
        out << fmt::format("{} {:<48} error {:.3e} (tol {:.1e}, {:.2f} s)\n", ch.passed() ? "PASS" : "FAIL", ch.name,
                           ch.error, ch.tolerance, ch.seconds);
    }
    out << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
    return ok ? kOk : kCheckFailed;
}

}  // namespace usui::cli
