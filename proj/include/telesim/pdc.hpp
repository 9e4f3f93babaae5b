/// Type-II parametric down-conversion source: truncated expansion of the
/// two-mode squeezed singlet interaction, the double-pass composite source
/// feeding beams (2,3) and (1,4), and pair-sector bookkeeping.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "telesim/fock.hpp"

namespace telesim {

struct PdcParams {
    double chi = 0.1;      ///< pair-generation amplitude, dimensionless
    int max_pairs = 2;     ///< truncation order: total pairs across both passes
    std::optional<double> chi_second_pass;  ///< optional asymmetry for sensitivity runs

    void validate() const {
        if (chi < 0.0) throw std::invalid_argument("pdc: chi must be >= 0");
        if (max_pairs < 1 || max_pairs > 3) throw std::invalid_argument("pdc: max_pairs must be in [1,3]");
        if (chi_second_pass && *chi_second_pass < 0.0)
            throw std::invalid_argument("pdc: second-pass chi must be >= 0");
    }
    double chi_pass_23() const { return chi; }
    double chi_pass_14() const { return chi_second_pass.value_or(chi); }
};

/// Squared-amplitude mass of the component with m pairs in beams (1,4) and
/// n pairs in beams (2,3).
struct SectorWeight {
    int m = 0;
    int n = 0;
    double weight = 0.0;
};

namespace detail {

/// One application of the singlet pair-creation operator
/// K^dag = a_H^dag b_V^dag - a_V^dag b_H^dag.
inline FockState apply_pair_creation(const FockState& s, int aH, int aV, int bH, int bV) {
    FockState out = s.apply_creation(aH).apply_creation(bV);
    out.add(s.apply_creation(aV).apply_creation(bH), Amplitude{-1.0, 0.0});
    return out;
}

}  // namespace detail

/// Truncated expansion of exp[chi (a_H^dag b_V^dag - a_V^dag b_H^dag)]|vac>
/// up to `max_pairs` pairs, built term by term from the exponential series
/// chi^n (K^dag)^n / n! with exact bosonic factors, then normalized.
inline FockState pdc_two_mode(const RegistryPtr& reg, const std::string& signal_spatial,
                              const std::string& idler_spatial, double chi, int max_pairs) {
    if (signal_spatial == idler_spatial) throw std::invalid_argument("pdc: signal and idler beams must differ");
    if (chi < 0.0) throw std::invalid_argument("pdc: chi must be >= 0");
    if (reg->photon_budget() < 2 * max_pairs)
        throw std::invalid_argument("pdc: photon budget too small for " + std::to_string(2 * max_pairs) + " photons");
    const int aH = reg->index_of(signal_spatial, Polarization::H);
    const int aV = reg->index_of(signal_spatial, Polarization::V);
    const int bH = reg->index_of(idler_spatial, Polarization::H);
    const int bV = reg->index_of(idler_spatial, Polarization::V);

    FockState sum = FockState::vacuum(reg);
    FockState power = FockState::vacuum(reg);  // (K^dag)^n |vac>
    double coeff = 1.0;                        // chi^n / n!
    for (int n = 1; n <= max_pairs; ++n) {
        power = detail::apply_pair_creation(power, aH, aV, bH, bV);
        coeff *= chi / n;
        sum.add(power, Amplitude{coeff, 0.0});
    }
    sum.prune();
    return sum.normalized();
}

namespace detail {

inline int photons_on_beams(const OccupationVector& occ, const ModeRegistry& reg,
                            const std::string& beamA, const std::string& beamB) {
    int t = 0;
    for (Polarization p : {Polarization::H, Polarization::V}) {
        t += occ.count(reg.index_of(beamA, p));
        t += occ.count(reg.index_of(beamB, p));
    }
    return t;
}

}  // namespace detail

/// Both crystal passes: pairs into beams (2,3) on the first pass and into
/// beams (1,4) on the reflected pass. The product of the two truncated
/// expansions is re-truncated to total pairs <= max_pairs and renormalized,
/// so cross-sector relative weights at the truncation order stay exact.
inline FockState double_pass_source(const RegistryPtr& reg, const PdcParams& params) {
    params.validate();
    for (const char* b : {"1", "2", "3", "4"})
        if (!reg->has(b, Polarization::H) || !reg->has(b, Polarization::V))
            throw std::invalid_argument("source: registry must contain beams 1-4 with both polarizations");

    auto pass_registry = [&](const std::string& s, const std::string& i) {
        return RegistryBuilder{}.beam(s).beam(i).build(2 * params.max_pairs);
    };
    const FockState pass23 = pdc_two_mode(pass_registry("2", "3"), "2", "3", params.chi_pass_23(), params.max_pairs);
    const FockState pass14 = pdc_two_mode(pass_registry("1", "4"), "1", "4", params.chi_pass_14(), params.max_pairs);

    FockState product = tensor(pass23, pass14);
    FockState kept(product.registry());
    const auto& preg = *product.registry();
    for (const auto& [key, amp] : product.terms()) {
        OccupationVector occ = OccupationVector::from_key(key);
        if (occ.total(preg.size()) <= 2 * params.max_pairs) kept.accumulate(key, amp);
    }
    kept.prune();
    return promote(kept.normalized(), reg);
}

/// Partition of a pre-measurement source state by (pairs in beams 1&4,
/// pairs in beams 2&3). Weights sum to the total squared norm; the sector
/// states are returned normalized.
inline std::vector<std::pair<SectorWeight, FockState>> sector_decompose(const FockState& state) {
    const auto& reg = *state.registry();
    std::vector<std::pair<SectorWeight, FockState>> sectors;
    auto slot = [&](int m, int n) -> FockState& {
        for (auto& [w, s] : sectors)
            if (w.m == m && w.n == n) return s;
        sectors.push_back({SectorWeight{m, n, 0.0}, FockState(state.registry())});
        return sectors.back().second;
    };
    for (const auto& [key, amp] : state.sorted_terms()) {
        OccupationVector occ = OccupationVector::from_key(key);
        const int p14 = detail::photons_on_beams(occ, reg, "1", "4");
        const int p23 = detail::photons_on_beams(occ, reg, "2", "3");
        if (p14 % 2 != 0 || p23 % 2 != 0)
            throw std::domain_error("sector_decompose: odd photon count in a pass (not a pair source state)");
        slot(p14 / 2, p23 / 2).accumulate(key, amp);
    }
    std::sort(sectors.begin(), sectors.end(), [](const auto& a, const auto& b) {
        return std::pair{a.first.m, a.first.n} < std::pair{b.first.m, b.first.n};
    });
    for (auto& [w, s] : sectors) {
        w.weight = s.norm2();
        s = s.normalized();
    }
    return sectors;
}

}  // namespace telesim
