/// End-to-end scenarios: wires the modified coincidence circuit and the
/// baseline trigger schemes, runs a double-pass source through them, and
/// assembles per-sector / per-branch probability and fidelity reports.
#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "telesim/detection.hpp"
#include "telesim/linear_optics.hpp"
#include "telesim/pdc.hpp"

namespace telesim {

enum class Scheme { Modified, Innsbruck, PnrTrigger };

inline std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Modified: return "modified";
        case Scheme::Innsbruck: return "innsbruck";
        case Scheme::PnrTrigger: return "pnr-trigger";
    }
    return "?";
}

struct RotatorAngles {
    double theta = 0.0;
    double phi = 0.0;
    bool is_identity() const { return theta == 0.0 && phi == 0.0; }
};

struct Averaging {
    enum class Kind { SixState, MonteCarlo } kind = Kind::SixState;
    int samples = 6;             ///< Monte Carlo only
    std::uint64_t seed = 1;      ///< Monte Carlo only

    std::string name() const { return kind == Kind::SixState ? "six-state" : "monte-carlo"; }
};

struct ScenarioConfig {
    Scheme scheme = Scheme::Modified;
    PdcParams params;
    RotatorAngles rot1;  ///< input-state dial: the teleported state is rot1|V> or rot1|H> per branch
    RotatorAngles rot4;  ///< herald-basis dial on beam 4, identity by default
    double eta = 1.0;    ///< detector efficiency, realized as loss splitters
    PbsConvention pbs_convention = kDefaultPbsConvention;
    Averaging averaging;

    void validate() const {
        params.validate();
        if (eta <= 0.0 || eta > 1.0) throw std::invalid_argument("config: eta must be in (0,1]");
        if (averaging.kind == Averaging::Kind::MonteCarlo && averaging.samples < 1)
            throw std::invalid_argument("config: monte-carlo averaging needs at least one sample");
    }
};

/// A fully wired experiment: ordered element list, detector ports, the
/// coincidence pattern, the designated output modes and per-branch targets.
struct Circuit {
    RegistryPtr registry;
    std::vector<ModeUnitary> elements;
    std::vector<DetectorPort> ports;
    FiringPattern pattern;
    std::vector<int> output_modes;
    struct BranchTarget {
        std::string branch;
        QubitPolarizationState target;
    };
    std::vector<BranchTarget> targets;
    std::vector<std::string> sink_spatials;

    QubitPolarizationState target_for(const std::string& branch) const {
        for (const auto& t : targets)
            if (t.branch == branch) return t.target;
        throw std::invalid_argument("circuit: no target for branch " + branch);
    }
};

namespace detail {

/// The teleported-state dial. Rotating beam 1 itself would also rotate the
/// double-pair contamination of beam 1 into the pass bands of the fixed
/// H/V analysis polarizers and destroy the deterministic rejection, because
/// herald collapse puts the one-photon signal and the two-photon
/// contamination in exactly the same polarization. Counter-rotating the
/// Bell-analysis frame on beam 2 instead leaves beams 1 and 4 axis-aligned
/// (the rejection argument applies verbatim) and lands the heralded
/// teleport on the dialed target rot1|V> / rot1|H>.
inline ModeUnitary analysis_frame(const RegistryPtr& reg, const RotatorAngles& rot1) {
    return rotator(reg, "2", -rot1.theta, rot1.phi, "analysis_frame(2)");
}

inline void append_loss(std::vector<ModeUnitary>& elements, const RegistryPtr& reg,
                        const std::vector<std::pair<std::string, Polarization>>& lines, double eta,
                        const std::vector<std::string>& sinks) {
    for (std::size_t i = 0; i < lines.size(); ++i)
        elements.push_back(loss_splitter(reg, lines[i].first, lines[i].second, sinks[i], eta));
}

inline QubitPolarizationState rotated_qubit_h(const RotatorAngles& r) {
    return {r.theta, r.phi};  // rot1 |H>
}
inline QubitPolarizationState rotated_qubit_v(const RotatorAngles& r) {
    // rot1 |V> = -e^{-i phi} ( sin t |H> - e^{i phi} cos t |V> ), global phase dropped
    return {std::numbers::pi / 2.0 - r.theta, r.phi + std::numbers::pi};
}

}  // namespace detail

/// Scheme wiring.
///
/// Modified: double-pass source; herald dial rot4 on beam 4; PBS splits
/// beam 4 into the transmitted line (D3) and the reflected line (D4); the
/// 50:50 BS overlaps beams 1 and 2; a horizontal polarizer guards D1 and a
/// vertical polarizer guards D2. Coincidence: D1 and D2 fired, exactly one
/// of D3/D4 fired. Output is beam 3.
///
/// Innsbruck baseline: projective preparation chain on beam 1 (rotate into
/// the filter basis, horizontal pass filter, rotate back), bare threshold
/// trigger on raw beam 4, no analysis polarizers. Coincidence: D1, D2 and
/// the trigger fired. PnrTrigger is the same wiring with a number-resolving
/// trigger that accepts exactly one photon.
inline Circuit build_circuit(const ScenarioConfig& config) {
    config.validate();
    const int budget = 2 * config.params.max_pairs;
    const bool lossy = config.eta < 1.0;
    Circuit c;

    if (config.scheme == Scheme::Modified) {
        const Polarization transmitted =
            config.pbs_convention == PbsConvention::TransmitH ? Polarization::H : Polarization::V;
        const Polarization reflected =
            config.pbs_convention == PbsConvention::TransmitH ? Polarization::V : Polarization::H;

        RegistryBuilder rb;
        rb.beam("1").beam("2").beam("3").beam("4").beam("t4");
        rb.single("s1", Polarization::V);  // P_H reject line at the D1 port
        rb.single("s2", Polarization::H);  // P_V reject line at the D2 port
        std::vector<std::pair<std::string, Polarization>> loss_lines = {
            {"1", Polarization::H}, {"2", Polarization::V}, {"4", transmitted}, {"t4", reflected}};
        std::vector<std::string> loss_sinks = {"e1", "e2", "e3", "e4"};
        if (lossy)
            for (std::size_t i = 0; i < loss_lines.size(); ++i) rb.single(loss_sinks[i], loss_lines[i].second);
        c.registry = rb.build(budget);
        c.sink_spatials = {"s1", "s2"};
        if (lossy) c.sink_spatials.insert(c.sink_spatials.end(), loss_sinks.begin(), loss_sinks.end());

        c.elements.push_back(rotator(c.registry, "4", config.rot4.theta, config.rot4.phi, "rot4(4)"));
        c.elements.push_back(detail::analysis_frame(c.registry, config.rot1));
        c.elements.push_back(pbs(c.registry, "4", "t4", config.pbs_convention));
        c.elements.push_back(bs_50_50(c.registry, "1", "2"));
        c.elements.push_back(polarizer(c.registry, "1", Polarization::H, "s1"));
        c.elements.push_back(polarizer(c.registry, "2", Polarization::V, "s2"));
        if (lossy) detail::append_loss(c.elements, c.registry, loss_lines, config.eta, loss_sinks);

        const DetectorModel threshold{DetectorKind::Threshold, config.eta};
        c.ports.push_back({"D1", {c.registry->index_of("1", Polarization::H)}, threshold});
        c.ports.push_back({"D2", {c.registry->index_of("2", Polarization::V)}, threshold});
        c.ports.push_back({"D3",
                           {c.registry->index_of("4", Polarization::H), c.registry->index_of("4", Polarization::V)},
                           threshold});
        c.ports.push_back({"D4",
                           {c.registry->index_of("t4", Polarization::H), c.registry->index_of("t4", Polarization::V)},
                           threshold});
        c.pattern.required_fired = {"D1", "D2"};
        c.pattern.exactly_one_of = {{"D3", "D4"}};

        // Transmitted herald (D3 with transmit-H) tags the partner photon as
        // |V> through the pair anticorrelation, so that branch teleports
        // rot1|V>; the reflected herald tags |H>.
        const auto v_target = detail::rotated_qubit_v(config.rot1);
        const auto h_target = detail::rotated_qubit_h(config.rot1);
        if (config.pbs_convention == PbsConvention::TransmitH)
            c.targets = {{"D3", v_target}, {"D4", h_target}};
        else
            c.targets = {{"D3", h_target}, {"D4", v_target}};
    } else {
        RegistryBuilder rb;
        rb.beam("1").beam("2").beam("3").beam("4");
        rb.single("p1", Polarization::V);  // preparation filter reject line
        const std::vector<std::pair<std::string, Polarization>> loss_lines = {
            {"1", Polarization::H}, {"1", Polarization::V}, {"2", Polarization::H},
            {"2", Polarization::V}, {"4", Polarization::H}, {"4", Polarization::V}};
        const std::vector<std::string> loss_sinks = {"e1h", "e1v", "e2h", "e2v", "e4h", "e4v"};
        if (lossy)
            for (std::size_t i = 0; i < loss_lines.size(); ++i) rb.single(loss_sinks[i], loss_lines[i].second);
        c.registry = rb.build(budget);
        c.sink_spatials = {"p1"};
        if (lossy) c.sink_spatials.insert(c.sink_spatials.end(), loss_sinks.begin(), loss_sinks.end());

        c.elements.push_back(rotator(c.registry, "1", -config.rot1.theta, config.rot1.phi, "prep_in(1)"));
        c.elements.push_back(polarizer(c.registry, "1", Polarization::H, "p1"));
        c.elements.push_back(rotator(c.registry, "1", config.rot1.theta, config.rot1.phi, "prep_out(1)"));
        c.elements.push_back(bs_50_50(c.registry, "1", "2"));
        if (lossy) detail::append_loss(c.elements, c.registry, loss_lines, config.eta, loss_sinks);

        const DetectorModel threshold{DetectorKind::Threshold, config.eta};
        const DetectorModel trigger{config.scheme == Scheme::PnrTrigger ? DetectorKind::NumberResolving
                                                                        : DetectorKind::Threshold,
                                    config.eta};
        c.ports.push_back({"D1",
                           {c.registry->index_of("1", Polarization::H), c.registry->index_of("1", Polarization::V)},
                           threshold});
        c.ports.push_back({"D2",
                           {c.registry->index_of("2", Polarization::H), c.registry->index_of("2", Polarization::V)},
                           threshold});
        c.ports.push_back({"Dtrig",
                           {c.registry->index_of("4", Polarization::H), c.registry->index_of("4", Polarization::V)},
                           trigger});
        c.pattern.required_fired = {"D1", "D2", "Dtrig"};
        c.targets = {{"coincidence", detail::rotated_qubit_h(config.rot1)}};
    }

    c.output_modes = {c.registry->index_of("3", Polarization::H), c.registry->index_of("3", Polarization::V)};

    // Wiring sanity: every mode is an output, monitored by exactly one port,
    // or a summed-over line (source remainder or declared sink).
    std::vector<int> owner(static_cast<std::size_t>(c.registry->size()), 0);
    for (int m : c.output_modes) owner[static_cast<std::size_t>(m)] += 1;
    for (const auto& p : c.ports)
        for (int m : p.mode_indices) owner[static_cast<std::size_t>(m)] += 1;
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] > 1) throw std::logic_error("circuit: mode assigned to more than one role");
    return c;
}

/// Baseline used by the survival-ratio comparison: the trigger wiring with
/// the preparation made identical to the modified scheme (heralded source
/// plus analysis-frame dial, no projective chain, no analysis polarizers).
inline Circuit build_survival_baseline(const ScenarioConfig& config) {
    config.validate();
    const int budget = 2 * config.params.max_pairs;
    const bool lossy = config.eta < 1.0;
    Circuit c;

    RegistryBuilder rb;
    rb.beam("1").beam("2").beam("3").beam("4");
    const std::vector<std::pair<std::string, Polarization>> loss_lines = {
        {"1", Polarization::H}, {"1", Polarization::V}, {"2", Polarization::H},
        {"2", Polarization::V}, {"4", Polarization::H}, {"4", Polarization::V}};
    const std::vector<std::string> loss_sinks = {"e1h", "e1v", "e2h", "e2v", "e4h", "e4v"};
    if (lossy)
        for (std::size_t i = 0; i < loss_lines.size(); ++i) rb.single(loss_sinks[i], loss_lines[i].second);
    c.registry = rb.build(budget);
    if (lossy) c.sink_spatials.assign(loss_sinks.begin(), loss_sinks.end());

    c.elements.push_back(detail::analysis_frame(c.registry, config.rot1));
    c.elements.push_back(bs_50_50(c.registry, "1", "2"));
    if (lossy) detail::append_loss(c.elements, c.registry, loss_lines, config.eta, loss_sinks);

    const DetectorModel threshold{DetectorKind::Threshold, config.eta};
    c.ports.push_back({"D1",
                       {c.registry->index_of("1", Polarization::H), c.registry->index_of("1", Polarization::V)},
                       threshold});
    c.ports.push_back({"D2",
                       {c.registry->index_of("2", Polarization::H), c.registry->index_of("2", Polarization::V)},
                       threshold});
    c.ports.push_back({"Dtrig",
                       {c.registry->index_of("4", Polarization::H), c.registry->index_of("4", Polarization::V)},
                       threshold});
    c.pattern.required_fired = {"D1", "D2", "Dtrig"};
    c.targets = {{"coincidence", detail::rotated_qubit_h(config.rot1)}};
    c.output_modes = {c.registry->index_of("3", Polarization::H), c.registry->index_of("3", Polarization::V)};
    return c;
}

struct SectorBranchProbability {
    int m = 0;
    int n = 0;
    std::string branch;
    double conditional_probability = 0.0;  ///< given the source collapsed to this sector
    double peak_amplitude = 0.0;           ///< largest contributing |amplitude|
};

struct BranchReport {
    std::string branch;
    double probability = 0.0;  ///< joint probability of this branch of the coincidence
    QubitPolarizationState target;
    bool has_fidelity = false;
    FidelityRecord fidelity;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::vector<SectorWeight> sector_weights;
    std::vector<SectorBranchProbability> sector_matrix;
    std::vector<BranchReport> branches;
    double total_coincidence = 0.0;
    std::optional<double> average_fidelity;
    std::optional<double> survival_ratio;
    static constexpr double kClassicalFidelityReference = 0.75;
};

/// Sector-resolved and full-state outcomes of one wired circuit.
struct WiredRun {
    std::vector<SectorWeight> weights;
    std::vector<SectorBranchProbability> matrix;
    std::vector<MeasurementOutcome> full_outcomes;
};

namespace detail {

inline std::string branch_label(const MeasurementOutcome& o) {
    return o.branch.empty() ? "coincidence" : o.branch;
}

}  // namespace detail

inline WiredRun run_wired(const Circuit& circuit, const PdcParams& params) {
    WiredRun r;
    const FockState source = double_pass_source(circuit.registry, params);
    for (const auto& [w, sector_state] : sector_decompose(source)) {
        r.weights.push_back(w);
        const FockState out = apply_all(sector_state, circuit.elements);
        for (const auto& o : pattern_probability(out, circuit.pattern, circuit.ports, circuit.output_modes))
            r.matrix.push_back({w.m, w.n, detail::branch_label(o), o.probability, o.peak_amplitude});
    }
    const FockState full = apply_all(source, circuit.elements);
    r.full_outcomes = pattern_probability(full, circuit.pattern, circuit.ports, circuit.output_modes);
    return r;
}

namespace detail {

inline double sector_coincidence(const WiredRun& r, int m, int n) {
    double p = 0.0;
    for (const auto& row : r.matrix)
        if (row.m == m && row.n == n) p += row.conditional_probability;
    return p;
}

}  // namespace detail

/// Input settings used for averaging: the six Pauli eigenstates, or a
/// seeded Haar sample over (theta, phi).
inline std::vector<RotatorAngles> six_state_inputs() {
    const double q = std::numbers::pi / 4.0;
    return {{0.0, 0.0},           // |H>
            {std::numbers::pi / 2.0, 0.0},  // |V>
            {q, 0.0},             // |+>
            {q, std::numbers::pi},          // |->
            {q, std::numbers::pi / 2.0},    // |+i>
            {q, 3.0 * std::numbers::pi / 2.0}};  // |-i>
}

inline std::vector<RotatorAngles> haar_inputs(int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<RotatorAngles> v;
    v.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double theta = std::acos(std::sqrt(unit()));
        const double phi = 2.0 * std::numbers::pi * unit();
        v.push_back({theta, phi});
    }
    return v;
}

inline std::vector<RotatorAngles> averaging_inputs(const Averaging& a) {
    return a.kind == Averaging::Kind::SixState ? six_state_inputs() : haar_inputs(a.samples, a.seed);
}

/// Mean over the input set of the branch-probability-weighted raw
/// conditional fidelity.
inline double average_fidelity(const ScenarioConfig& config, const std::vector<RotatorAngles>& input_set) {
    if (input_set.empty()) throw std::invalid_argument("average_fidelity: empty input set");
    double sum = 0.0;
    for (const auto& input : input_set) {
        ScenarioConfig cfg = config;
        cfg.rot1 = input;
        const Circuit circuit = build_circuit(cfg);
        const auto run = run_wired(circuit, cfg.params);
        double num = 0.0, den = 0.0;
        for (const auto& o : run.full_outcomes) {
            if (o.probability <= 0.0) continue;
            const auto rec = fidelity(o.conditional, circuit.target_for(detail::branch_label(o)));
            num += o.probability * rec.raw;
            den += o.probability;
        }
        if (den <= 0.0) throw std::domain_error("average_fidelity: no coincidences at this configuration");
        sum += num / den;
    }
    return sum / static_cast<double>(input_set.size());
}

/// Coincidence probability of the modified scheme relative to the trigger
/// baseline, conditioned on the one-pair-per-side sector and averaged over
/// the configured input set. Preparation is identical on both sides.
inline double survival_ratio(const ScenarioConfig& config) {
    double sum = 0.0;
    const auto inputs = averaging_inputs(config.averaging);
    for (const auto& input : inputs) {
        ScenarioConfig cfg = config;
        cfg.scheme = Scheme::Modified;
        cfg.rot1 = input;
        const auto modified = run_wired(build_circuit(cfg), cfg.params);
        const auto baseline = run_wired(build_survival_baseline(cfg), cfg.params);
        const double p_mod = detail::sector_coincidence(modified, 1, 1);
        const double p_base = detail::sector_coincidence(baseline, 1, 1);
        if (p_base <= 0.0) throw std::domain_error("survival_ratio: baseline accepts nothing in sector (1,1)");
        sum += p_mod / p_base;
    }
    return sum / static_cast<double>(inputs.size());
}

/// Full scenario: per-sector rejection matrix, per-branch conditional
/// fidelities against the heralded targets, input-averaged fidelity and the
/// survival ratio.
inline ScenarioReport run_scenario(const ScenarioConfig& config) {
    config.validate();
    const Circuit circuit = build_circuit(config);
    const auto run = run_wired(circuit, config.params);

    ScenarioReport rep;
    rep.config = config;
    rep.sector_weights = run.weights;
    rep.sector_matrix = run.matrix;
    for (const auto& o : run.full_outcomes) {
        BranchReport br;
        br.branch = detail::branch_label(o);
        br.probability = o.probability;
        br.target = circuit.target_for(br.branch);
        if (o.probability > 0.0) {
            br.has_fidelity = true;
            br.fidelity = fidelity(o.conditional, br.target);
        }
        rep.total_coincidence += o.probability;
        rep.branches.push_back(std::move(br));
    }
    try {
        rep.average_fidelity = average_fidelity(config, averaging_inputs(config.averaging));
    } catch (const std::domain_error&) {
        rep.average_fidelity.reset();  // no coincidences anywhere (e.g. chi = 0)
    }
    try {
        rep.survival_ratio = survival_ratio(config);
    } catch (const std::domain_error&) {
        rep.survival_ratio.reset();
    }
    return rep;
}

}  // namespace telesim
