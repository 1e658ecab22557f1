// SPDX-License-Identifier: Apache-2.0
//
// usui: g2 tables, R_d sweeps, Monte Carlo detection runs and self-checks for
// the pulse-pumped unbalanced SU(1,1) interferometer.

#include "usui/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using usui::cli::ConfigError;
using usui::cli::RawEntry;
using usui::cli::RunConfig;
using usui::cli::Verb;

struct VerbOptions {
    std::string config_path;
    std::string record_path;
    std::map<std::string, std::string> overrides;
};

void add_common_options(CLI::App* sub, VerbOptions& opts) {
    sub->add_option("-c,--config", opts.config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : usui::cli::config_keys()) {
        sub->add_option_function<std::string>(
            "--" + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; },
            "override config key '" + key + "'");
    }
}

RunConfig resolve(const VerbOptions& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw ConfigError("config", "cannot open config file " + opts.config_path);
        usui::cli::apply_entries(cfg, usui::cli::parse_config_text(in, opts.config_path));
    }
    std::vector<RawEntry> flags;
    for (const auto& [k, v] : opts.overrides) flags.push_back({k, v, "option --" + k});
    usui::cli::apply_entries(cfg, flags);
    return cfg;
}

class Output {
  public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ConfigError("output", "cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

  private:
    std::unique_ptr<std::ofstream> file_;
};

int run(Verb verb, const VerbOptions& opts) {
    const RunConfig cfg = resolve(opts);
    Output out(cfg.output);
    switch (verb) {
        case Verb::g2_table: return usui::cli::cmd_g2_table(cfg, out.stream(), std::cerr);
        case Verb::sweep_gain:
        case Verb::sweep_modes: return usui::cli::cmd_sweep(cfg, verb, out.stream(), std::cerr);
        case Verb::montecarlo: {
            std::unique_ptr<Output> record;
            if (!opts.record_path.empty()) record = std::make_unique<Output>(opts.record_path);
            return usui::cli::cmd_montecarlo(cfg, out.stream(), std::cerr, record ? &record->stream() : nullptr);
        }
        case Verb::verify: return usui::cli::cmd_verify(cfg, out.stream());
    }
    return usui::cli::kValidationError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimode intensity correlations of a pulse-pumped unbalanced SU(1,1) interferometer"};
    app.require_subcommand(1, 1);

    const std::vector<std::pair<Verb, std::pair<const char*, const char*>>> verbs = {
        {Verb::g2_table, {"g2-table", "g2(0s, q) from the built state next to the closed forms"}},
        {Verb::sweep_gain, {"sweep-gain", "R_d versus power gain (both OPAs set to x)"}},
        {Verb::sweep_modes, {"sweep-modes", "R_d versus mode count M (even M in [sweep_min, sweep_max])"}},
        {Verb::montecarlo, {"montecarlo", "emulated detection run; writes M,R,stderr,R_dB"}},
        {Verb::verify, {"verify", "builder, K, g2 and R_d self-checks (Fock oracle with --fock 1)"}},
    };
    std::vector<VerbOptions> options(verbs.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < verbs.size(); ++i) {
        auto* sub = app.add_subcommand(verbs[i].second.first, verbs[i].second.second);
        add_common_options(sub, options[i]);
        if (verbs[i].first == Verb::montecarlo) {
            sub->add_option("--record", options[i].record_path, "write the per-slot record (slot_index,e_value)");
        }
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : usui::cli::kValidationError;
    }

    for (std::size_t i = 0; i < verbs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            return run(verbs[i].first, options[i]);
        } catch (const ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return usui::cli::kValidationError;
        } catch (const std::invalid_argument& e) {
            std::cerr << "error: " << e.what() << '\n';
            return usui::cli::kValidationError;
        } catch (const std::out_of_range& e) {
            std::cerr << "error: " << e.what() << '\n';
            return usui::cli::kValidationError;
        } catch (const std::length_error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return usui::cli::kValidationError;
        } catch (const std::exception& e) {
            std::cerr << "numerical failure: " << e.what() << '\n';
            return usui::cli::kCheckFailed;
        }
    }
    return usui::cli::kValidationError;
}
