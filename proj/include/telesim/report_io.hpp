/// Command-line front end: flag and config-file parsing, scenario
/// execution, and the table / JSON / CSV report writers. The JSON writer is
/// hand-rolled so identical configurations produce byte-identical reports.
#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "telesim/oracle.hpp"

namespace telesim::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyMismatch = 1;
inline constexpr int kExitConfigError = 2;

enum class OutputFormat { Table, Json, Csv };

struct CliConfig {
    ScenarioConfig scenario;
    OutputFormat format = OutputFormat::Table;
    bool verify = false;
    std::uint64_t verify_seed = 7;
    std::string config_file;
};

namespace io_detail {

/// 12 significant digits for machine formats; normalizes negative zero.
inline std::string fmt12(double v) {
    if (v == 0.0) v = 0.0;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// 6 significant digits for tables.
inline std::string fmt6(double v) {
    if (v == 0.0) v = 0.0;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "modified") return Scheme::Modified;
    if (s == "innsbruck") return Scheme::Innsbruck;
    if (s == "pnr-trigger") return Scheme::PnrTrigger;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

inline PbsConvention pbs_from_string(const std::string& s) {
    if (s == "transmit-h") return PbsConvention::TransmitH;
    if (s == "transmit-v") return PbsConvention::TransmitV;
    throw std::invalid_argument("unknown pbs convention '" + s + "'");
}

inline Averaging::Kind averaging_from_string(const std::string& s) {
    if (s == "six-state") return Averaging::Kind::SixState;
    if (s == "monte-carlo") return Averaging::Kind::MonteCarlo;
    throw std::invalid_argument("unknown averaging mode '" + s + "'");
}

inline std::string pbs_to_string(PbsConvention c) {
    return c == PbsConvention::TransmitH ? "transmit-h" : "transmit-v";
}

/// Applies a JSON config file onto the defaults. Keys mirror the flags.
inline void apply_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file '" + path + "': " + e.what());
    }
    auto& sc = cfg.scenario;
    if (j.contains("scheme")) sc.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (j.contains("chi")) sc.params.chi = j.at("chi").get<double>();
    if (j.contains("chi2")) sc.params.chi_second_pass = j.at("chi2").get<double>();
    if (j.contains("max-pairs")) sc.params.max_pairs = j.at("max-pairs").get<int>();
    if (j.contains("theta")) sc.rot1.theta = j.at("theta").get<double>();
    if (j.contains("phi")) sc.rot1.phi = j.at("phi").get<double>();
    if (j.contains("theta4")) sc.rot4.theta = j.at("theta4").get<double>();
    if (j.contains("phi4")) sc.rot4.phi = j.at("phi4").get<double>();
    if (j.contains("eta")) sc.eta = j.at("eta").get<double>();
    if (j.contains("pbs")) sc.pbs_convention = pbs_from_string(j.at("pbs").get<std::string>());
    if (j.contains("averaging")) sc.averaging.kind = averaging_from_string(j.at("averaging").get<std::string>());
    if (j.contains("samples")) sc.averaging.samples = j.at("samples").get<int>();
    if (j.contains("seed")) sc.averaging.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("format")) {
        const auto f = j.at("format").get<std::string>();
        if (f == "table") cfg.format = OutputFormat::Table;
        else if (f == "json") cfg.format = OutputFormat::Json;
        else if (f == "csv") cfg.format = OutputFormat::Csv;
        else throw std::invalid_argument("unknown format '" + f + "'");
    }
}

class JsonWriter {
  public:
    explicit JsonWriter(std::ostream& out) : out_(out) {}

    void begin() { out_ << "{"; fresh_ = true; }
    void end() { out_ << "}"; }

    void key(const std::string& k) {
        if (!fresh_) out_ << ",";
        fresh_ = false;
        out_ << "\"" << k << "\":";
    }
    void value_raw(const std::string& v) { out_ << v; }
    void field(const std::string& k, double v) { key(k); out_ << fmt12(v); }
    void field(const std::string& k, int v) { key(k); out_ << v; }
    void field(const std::string& k, std::uint64_t v) { key(k); out_ << v; }
    void field(const std::string& k, const std::string& v) { key(k); out_ << "\"" << v << "\""; }
    void field_null(const std::string& k) { key(k); out_ << "null"; }

    template <typename Fn>
    void object(const std::string& k, Fn&& body) {
        key(k);
        const bool saved = fresh_;
        begin();
        body();
        end();
        fresh_ = saved && false;
    }

    template <typename Range, typename Fn>
    void array(const std::string& k, const Range& range, Fn&& per_item) {
        key(k);
        out_ << "[";
        bool first = true;
        for (const auto& item : range) {
            if (!first) out_ << ",";
            first = false;
            const bool saved = fresh_;
            begin();
            per_item(item);
            end();
            fresh_ = saved;
        }
        out_ << "]";
        fresh_ = false;
    }

  private:
    std::ostream& out_;
    bool fresh_ = true;
};

inline void write_json(const ScenarioReport& rep, std::ostream& out) {
    JsonWriter w(out);
    w.begin();
    w.field("schema_version", kSchemaVersion);
    w.object("config", [&] {
        const auto& c = rep.config;
        w.field("scheme", scheme_name(c.scheme));
        w.field("chi", c.params.chi);
        if (c.params.chi_second_pass) w.field("chi2", *c.params.chi_second_pass);
        else w.field_null("chi2");
        w.field("max_pairs", c.params.max_pairs);
        w.object("rot1", [&] { w.field("theta", c.rot1.theta); w.field("phi", c.rot1.phi); });
        w.object("rot4", [&] { w.field("theta", c.rot4.theta); w.field("phi", c.rot4.phi); });
        w.field("eta", c.eta);
        w.field("pbs_convention", pbs_to_string(c.pbs_convention));
        w.object("averaging", [&] {
            w.field("mode", c.averaging.name());
            w.field("samples", c.averaging.kind == Averaging::Kind::SixState ? 6 : c.averaging.samples);
            w.field("seed", c.averaging.seed);
        });
    });
    w.array("sector_weights", rep.sector_weights, [&](const SectorWeight& s) {
        w.field("m", s.m);
        w.field("n", s.n);
        w.field("weight", s.weight);
    });
    w.array("sector_coincidence", rep.sector_matrix, [&](const SectorBranchProbability& r) {
        w.field("m", r.m);
        w.field("n", r.n);
        w.field("branch", r.branch);
        w.field("conditional_probability", r.conditional_probability);
        w.field("peak_amplitude", r.peak_amplitude);
    });
    w.array("branches", rep.branches, [&](const BranchReport& b) {
        w.field("branch", b.branch);
        w.field("probability", b.probability);
        w.object("target", [&] { w.field("theta", b.target.theta); w.field("phi", b.target.phi); });
        if (b.has_fidelity) {
            w.object("fidelity", [&] {
                w.field("raw", b.fidelity.raw);
                w.field("vacuum_weight", b.fidelity.vacuum_weight);
                w.field("single_photon_weight", b.fidelity.single_photon_weight);
                w.field("multi_weight", b.fidelity.multi_weight);
                w.field("single_photon_conditioned", b.fidelity.single_photon_conditioned);
            });
        } else {
            w.field_null("fidelity");
        }
    });
    w.field("total_coincidence_probability", rep.total_coincidence);
    if (rep.average_fidelity) w.field("average_fidelity", *rep.average_fidelity);
    else w.field_null("average_fidelity");
    w.field("classical_fidelity_reference", ScenarioReport::kClassicalFidelityReference);
    if (rep.survival_ratio) w.field("survival_ratio", *rep.survival_ratio);
    else w.field_null("survival_ratio");
    w.end();
    out << "\n";
}

inline void write_csv(const ScenarioReport& rep, std::ostream& out) {
    out << "m,n,weight,branch,conditional_probability,peak_amplitude\n";
    for (const auto& r : rep.sector_matrix) {
        double weight = 0.0;
        for (const auto& w : rep.sector_weights)
            if (w.m == r.m && w.n == r.n) weight = w.weight;
        out << r.m << "," << r.n << "," << fmt12(weight) << "," << r.branch << ","
            << fmt12(r.conditional_probability) << "," << fmt12(r.peak_amplitude) << "\n";
    }
}

inline void write_table(const ScenarioReport& rep, std::ostream& out) {
    const auto& c = rep.config;
    out << "scheme              " << scheme_name(c.scheme) << "\n";
    out << "chi                 " << fmt6(c.params.chi);
    if (c.params.chi_second_pass) out << "  (second pass " << fmt6(*c.params.chi_second_pass) << ")";
    out << "\n";
    out << "max pairs           " << c.params.max_pairs << "\n";
    out << "rot1 (theta, phi)   (" << fmt6(c.rot1.theta) << ", " << fmt6(c.rot1.phi) << ")\n";
    out << "rot4 (theta, phi)   (" << fmt6(c.rot4.theta) << ", " << fmt6(c.rot4.phi) << ")\n";
    out << "eta                 " << fmt6(c.eta) << "\n";
    out << "pbs convention      " << pbs_to_string(c.pbs_convention) << "\n";
    out << "averaging           " << c.averaging.name() << "\n";
    out << "\n";

    std::vector<std::string> branch_names;
    for (const auto& b : rep.branches) branch_names.push_back(b.branch);

    auto cell = [&out](const std::string& s, std::size_t width = 13) {
        out << s;
        if (s.size() < width) out << std::string(width - s.size(), ' ');
    };

    out << "sector coincidence matrix (probability conditional on the sector)\n  ";
    cell("(m,n)", 9);
    cell("weight");
    for (const auto& n : branch_names) cell(n);
    cell("total");
    cell("peak-amp");
    out << "\n";
    for (const auto& w : rep.sector_weights) {
        out << "  ";
        cell("(" + std::to_string(w.m) + "," + std::to_string(w.n) + ")", 9);
        cell(fmt6(w.weight));
        double total = 0.0, peak = 0.0;
        for (const auto& n : branch_names) {
            double p = 0.0;
            for (const auto& r : rep.sector_matrix)
                if (r.m == w.m && r.n == w.n && r.branch == n) {
                    p = r.conditional_probability;
                    peak = std::max(peak, r.peak_amplitude);
                }
            total += p;
            cell(fmt6(p));
        }
        cell(fmt6(total));
        cell(fmt6(peak));
        out << "\n";
    }
    out << "\n";
    out << "branches (conditional on the full coincidence)\n  ";
    cell("name");
    cell("probability");
    cell("fidelity");
    cell("vacuum");
    cell("single");
    cell("multi");
    cell("single-cond");
    out << "\n";
    for (const auto& b : rep.branches) {
        out << "  ";
        cell(b.branch);
        cell(fmt6(b.probability));
        if (b.has_fidelity) {
            cell(fmt6(b.fidelity.raw));
            cell(fmt6(b.fidelity.vacuum_weight));
            cell(fmt6(b.fidelity.single_photon_weight));
            cell(fmt6(b.fidelity.multi_weight));
            cell(fmt6(b.fidelity.single_photon_conditioned));
        } else {
            cell("-");
        }
        out << "\n";
    }
    out << "\n";
    out << "total coincidence probability   " << fmt6(rep.total_coincidence) << "\n";
    out << "average fidelity                "
        << (rep.average_fidelity ? fmt6(*rep.average_fidelity) : std::string("-"))
        << "   (classical reference 3/4 = " << fmt6(ScenarioReport::kClassicalFidelityReference) << ")\n";
    out << "survival ratio                  "
        << (rep.survival_ratio ? fmt6(*rep.survival_ratio) : std::string("-")) << "\n";
}

}  // namespace io_detail

/// Parses flags (and an optional JSON config file; flags win), runs the
/// scenario or the engine cross-check, writes the report. Exit codes:
/// 0 success, 1 verify mismatch, 2 configuration error.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"linear-optics simulator of heralded photonic teleportation with coincidence post-selection"};
    app.set_help_flag("--help", "print usage");

    std::string scheme = "modified", pbs = "transmit-h", averaging = "six-state", format = "table";
    std::string config_file;
    double chi = 0.1, chi2 = -1.0, theta = 0.0, phi = 0.0, theta4 = 0.0, phi4 = 0.0, eta = 1.0;
    int max_pairs = 2, samples = 64;
    std::uint64_t seed = 1;
    bool verify = false;

    app.add_option("--scheme", scheme)->check(CLI::IsMember({"modified", "innsbruck", "pnr-trigger"}));
    app.add_option("--chi", chi, "pair-generation amplitude");
    app.add_option("--chi2", chi2, "second-pass amplitude (defaults to chi)");
    app.add_option("--max-pairs", max_pairs)->check(CLI::Range(1, 3));
    app.add_option("--theta", theta, "input dial polar angle");
    app.add_option("--phi", phi, "input dial azimuth");
    app.add_option("--theta4", theta4, "herald dial polar angle");
    app.add_option("--phi4", phi4, "herald dial azimuth");
    app.add_option("--eta", eta, "detector efficiency");
    app.add_option("--pbs", pbs)->check(CLI::IsMember({"transmit-h", "transmit-v"}));
    app.add_option("--averaging", averaging)->check(CLI::IsMember({"six-state", "monte-carlo"}));
    app.add_option("--samples", samples, "monte-carlo sample count")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "averaging / verify seed");
    app.add_option("--format", format)->check(CLI::IsMember({"table", "json", "csv"}));
    app.add_option("--config", config_file, "JSON config file; explicit flags override it");
    app.add_flag("--verify", verify, "cross-check the sparse engine against the dense reference");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }

    CliConfig cfg;
    try {
        if (!config_file.empty()) io_detail::apply_config_file(cfg, config_file);
        auto& sc = cfg.scenario;
        if (app.count("--scheme")) sc.scheme = io_detail::scheme_from_string(scheme);
        if (app.count("--chi")) sc.params.chi = chi;
        if (app.count("--chi2")) sc.params.chi_second_pass = chi2;
        if (app.count("--max-pairs")) sc.params.max_pairs = max_pairs;
        if (app.count("--theta")) sc.rot1.theta = theta;
        if (app.count("--phi")) sc.rot1.phi = phi;
        if (app.count("--theta4")) sc.rot4.theta = theta4;
        if (app.count("--phi4")) sc.rot4.phi = phi4;
        if (app.count("--eta")) sc.eta = eta;
        if (app.count("--pbs")) sc.pbs_convention = io_detail::pbs_from_string(pbs);
        if (app.count("--averaging")) sc.averaging.kind = io_detail::averaging_from_string(averaging);
        if (app.count("--samples")) sc.averaging.samples = samples;
        if (app.count("--seed")) sc.averaging.seed = seed;
        if (app.count("--format")) {
            cfg.format = format == "table" ? OutputFormat::Table
                                           : (format == "json" ? OutputFormat::Json : OutputFormat::Csv);
        }
        cfg.verify = verify;
        if (app.count("--seed")) cfg.verify_seed = seed;
        sc.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (cfg.verify) {
        oracle::VerifyOptions opt;
        opt.seed = cfg.verify_seed;
        const bool ok = oracle::verify_equivalence(opt, &err);
        out << (ok ? "verify: sparse and dense engines agree across the scenario grid\n"
                   : "verify: ENGINE MISMATCH, see diagnostics above\n");
        return ok ? kExitOk : kExitVerifyMismatch;
    }

    try {
        const ScenarioReport rep = run_scenario(cfg.scenario);
        switch (cfg.format) {
            case OutputFormat::Table: io_detail::write_table(rep, out); break;
            case OutputFormat::Json: io_detail::write_json(rep, out); break;
            case OutputFormat::Csv: io_detail::write_csv(rep, out); break;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}

}  // namespace telesim::cli
