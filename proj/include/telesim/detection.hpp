/// Detector models, firing-pattern predicates and post-selection: turns a
/// final pure state into per-branch (probability, conditional density
/// operator on the output beam). Mixedness enters the pipeline only here,
/// by summing over sink occupations and exact detector counts.
#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "telesim/fock.hpp"

namespace telesim {

enum class DetectorKind {
    Threshold,        ///< fires iff at least one photon arrives (post-loss)
    NumberResolving,  ///< resolves the count; treated as fired iff exactly one arrives
};

struct DetectorModel {
    DetectorKind kind = DetectorKind::Threshold;
    double efficiency = 1.0;  ///< realized upstream as loss splitters, not here

    bool fired(int arriving_count) const {
        return kind == DetectorKind::Threshold ? arriving_count >= 1 : arriving_count == 1;
    }
};

struct DetectorPort {
    std::string name;
    std::vector<int> mode_indices;  ///< monitored modes (both polarizations unless filtered upstream)
    DetectorModel model;
};

/// Post-selection predicate over detector ports. Ports not referenced are
/// unconstrained and get summed over.
struct FiringPattern {
    std::vector<std::string> required_fired;
    std::vector<std::string> required_silent;
    std::vector<std::vector<std::string>> exactly_one_of;
};

/// Density operator over the occupations of a designated set of output
/// modes, enumerated in a fixed deterministic order (by packed local key).
class DensityOperator {
  public:
    DensityOperator() = default;
    DensityOperator(RegistryPtr registry, std::vector<int> output_modes, std::vector<std::uint64_t> local_occs,
                    Eigen::MatrixXcd rho)
        : registry_(std::move(registry)),
          output_modes_(std::move(output_modes)),
          local_occs_(std::move(local_occs)),
          rho_(std::move(rho)) {}

    const Eigen::MatrixXcd& matrix() const { return rho_; }
    const std::vector<std::uint64_t>& local_occupations() const { return local_occs_; }
    const std::vector<int>& output_modes() const { return output_modes_; }
    const RegistryPtr& registry() const { return registry_; }
    Eigen::Index dim() const { return rho_.rows(); }

    double trace() const { return rho_.trace().real(); }

    int photon_count_of(Eigen::Index local_index) const {
        OccupationVector occ = OccupationVector::from_key(local_occs_[static_cast<std::size_t>(local_index)]);
        return occ.total(static_cast<int>(output_modes_.size()));
    }

    /// Probability mass carried by the n-photon block.
    double sector_mass(int n) const {
        double m = 0.0;
        for (Eigen::Index i = 0; i < dim(); ++i)
            if (photon_count_of(i) == n) m += rho_(i, i).real();
        return m;
    }
    double sector_mass_at_least(int n) const {
        double m = 0.0;
        for (Eigen::Index i = 0; i < dim(); ++i)
            if (photon_count_of(i) >= n) m += rho_(i, i).real();
        return m;
    }

    double min_eigenvalue() const {
        if (dim() == 0) return 0.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((rho_ + rho_.adjoint()) / 2.0);
        return es.eigenvalues().minCoeff();
    }

    double hermiticity_defect() const {
        if (dim() == 0) return 0.0;
        return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    }

  private:
    RegistryPtr registry_;
    std::vector<int> output_modes_;
    std::vector<std::uint64_t> local_occs_;
    Eigen::MatrixXcd rho_;
};

struct MeasurementOutcome {
    std::string branch;          ///< which exactly-one-of member fired ("" if no group)
    double probability = 0.0;
    DensityOperator conditional;  ///< unit trace when probability > 0
    double peak_amplitude = 0.0;  ///< max |amplitude| over contributing basis terms
};

struct FidelityRecord {
    double raw = 0.0;                 ///< <target|rho|target> in the one-photon sector
    double vacuum_weight = 0.0;
    double single_photon_weight = 0.0;
    double multi_weight = 0.0;
    double single_photon_conditioned = 0.0;  ///< diagnostic companion, never used for acceptance
};

namespace detail {

/// Occupations over `modes` with total <= budget, in increasing packed-key
/// order (local packing: 3 bits per output mode, in the given order).
inline std::vector<std::uint64_t> enumerate_local_occupations(int nmodes, int budget) {
    std::vector<std::uint64_t> occs;
    std::vector<int> counts(static_cast<std::size_t>(nmodes), 0);
    auto rec = [&](auto&& self, int mode, int used) -> void {
        if (mode == nmodes) {
            std::uint64_t key = 0;
            for (int i = 0; i < nmodes; ++i) key |= static_cast<std::uint64_t>(counts[static_cast<std::size_t>(i)]) << (3 * i);
            occs.push_back(key);
            return;
        }
        const int cap = std::min(ModeRegistry::kMaxCountPerMode, budget - used);
        for (int c = 0; c <= cap; ++c) {
            counts[static_cast<std::size_t>(mode)] = c;
            self(self, mode + 1, used + c);
        }
        counts[static_cast<std::size_t>(mode)] = 0;
    };
    rec(rec, 0, 0);
    std::sort(occs.begin(), occs.end());
    return occs;
}

struct BranchSpec {
    std::string label;
    std::vector<std::string> fired;
    std::vector<std::string> silent;
};

inline std::vector<BranchSpec> expand_branches(const FiringPattern& p) {
    std::vector<BranchSpec> branches{{std::string{}, p.required_fired, p.required_silent}};
    for (const auto& group : p.exactly_one_of) {
        std::vector<BranchSpec> next;
        for (const auto& b : branches)
            for (const auto& chosen : group) {
                BranchSpec nb = b;
                nb.label = nb.label.empty() ? chosen : nb.label + "+" + chosen;
                nb.fired.push_back(chosen);
                for (const auto& other : group)
                    if (other != chosen) nb.silent.push_back(other);
                next.push_back(std::move(nb));
            }
        branches = std::move(next);
    }
    return branches;
}

}  // namespace detail

/// Splits the post-optics state into the branches of the firing pattern.
/// Basis terms are partitioned by per-port arriving counts; the detector
/// response decides fired/silent; the conditional density operator on the
/// output modes comes from summing over every unobserved degree of freedom
/// (sink occupations and exact counts behind each detector).
inline std::vector<MeasurementOutcome> pattern_probability(const FockState& state, const FiringPattern& pattern,
                                                           const std::vector<DetectorPort>& ports,
                                                           const std::vector<int>& output_modes) {
    const auto& reg = *state.registry();
    std::vector<bool> is_output(static_cast<std::size_t>(reg.size()), false);
    for (int m : output_modes) {
        if (m < 0 || m >= reg.size()) throw std::invalid_argument("pattern: output mode outside registry");
        is_output[static_cast<std::size_t>(m)] = true;
    }
    std::map<std::string, const DetectorPort*> port_by_name;
    for (const auto& p : ports) {
        if (!port_by_name.emplace(p.name, &p).second)
            throw std::invalid_argument("pattern: duplicate port " + p.name);
        for (int m : p.mode_indices)
            if (is_output[static_cast<std::size_t>(m)])
                throw std::invalid_argument("pattern: port " + p.name + " monitors an output mode");
    }
    auto require_known = [&](const std::vector<std::string>& names) {
        for (const auto& n : names)
            if (!port_by_name.count(n)) throw std::invalid_argument("pattern: unknown port " + n);
    };
    require_known(pattern.required_fired);
    require_known(pattern.required_silent);
    for (const auto& g : pattern.exactly_one_of) require_known(g);
    for (const auto& f : pattern.required_fired)
        for (const auto& s : pattern.required_silent)
            if (f == s) throw std::invalid_argument("pattern: port " + f + " both required fired and silent");

    const auto branches = detail::expand_branches(pattern);

    // Local basis for the conditional operator on the output modes.
    const int n_out = static_cast<int>(output_modes.size());
    const auto local_occs = detail::enumerate_local_occupations(n_out, reg.photon_budget());
    std::map<std::uint64_t, Eigen::Index> local_index;
    for (std::size_t i = 0; i < local_occs.size(); ++i)
        local_index[local_occs[i]] = static_cast<Eigen::Index>(i);

    const auto sorted = state.sorted_terms();
    std::vector<MeasurementOutcome> outcomes;
    for (const auto& br : branches) {
        MeasurementOutcome out;
        out.branch = br.label;

        // environment key -> list of (local output index, amplitude)
        std::map<std::uint64_t, std::vector<std::pair<Eigen::Index, Amplitude>>> env_groups;
        for (const auto& [key, amp] : sorted) {
            OccupationVector occ = OccupationVector::from_key(key);
            bool ok = true;
            for (const auto& name : br.fired) {
                const auto* p = port_by_name.at(name);
                int c = 0;
                for (int m : p->mode_indices) c += occ.count(m);
                if (!p->model.fired(c)) { ok = false; break; }
            }
            if (ok)
                for (const auto& name : br.silent) {
                    const auto* p = port_by_name.at(name);
                    int c = 0;
                    for (int m : p->mode_indices) c += occ.count(m);
                    if (p->model.fired(c)) { ok = false; break; }
                }
            if (!ok) continue;

            out.probability += std::norm(amp);
            out.peak_amplitude = std::max(out.peak_amplitude, std::abs(amp));

            std::uint64_t local_key = 0;
            OccupationVector env = occ;
            for (int j = 0; j < n_out; ++j) {
                local_key |= static_cast<std::uint64_t>(occ.count(output_modes[static_cast<std::size_t>(j)])) << (3 * j);
                env = env.with_count(output_modes[static_cast<std::size_t>(j)], 0);
            }
            env_groups[env.key()].emplace_back(local_index.at(local_key), amp);
        }

        const auto dim = static_cast<Eigen::Index>(local_occs.size());
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
        for (const auto& [env, entries] : env_groups)
            for (const auto& [i, ai] : entries)
                for (const auto& [j, aj] : entries) rho(i, j) += ai * std::conj(aj);
        if (out.probability > 0.0) rho /= out.probability;
        out.conditional = DensityOperator(state.registry(), output_modes, local_occs, std::move(rho));
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

/// Partial trace onto `modes`: sums squared amplitudes over complement
/// occupations. The trace equals the squared norm of the state.
inline DensityOperator reduced_density(const FockState& state, const std::vector<int>& modes) {
    FiringPattern everything;  // no constraints: a single all-inclusive branch
    auto outs = pattern_probability(state, everything, {}, modes);
    DensityOperator rho = outs.front().conditional;
    // pattern_probability normalizes; undo to make trace = |state|^2.
    Eigen::MatrixXcd m = rho.matrix() * outs.front().probability;
    return DensityOperator(state.registry(), rho.output_modes(), rho.local_occupations(), std::move(m));
}

/// Overlap <target|rho|target> with the target embedded in the one-photon
/// sector; vacuum and multi-photon mass count as failure. The operator must
/// cover exactly one spatial line with both polarizations.
inline FidelityRecord fidelity(const DensityOperator& rho, const QubitPolarizationState& target) {
    if (std::abs(rho.trace() - 1.0) > 1e-10)
        throw std::invalid_argument("fidelity: density operator trace differs from 1");
    const auto& reg = *rho.registry();
    const auto& modes = rho.output_modes();
    if (modes.size() != 2) throw std::invalid_argument("fidelity: output must be one beam (two modes)");
    const Mode& m0 = reg.mode(modes[0]);
    const Mode& m1 = reg.mode(modes[1]);
    if (m0.spatial != m1.spatial || m0.pol == m1.pol)
        throw std::invalid_argument("fidelity: output modes must be the H and V lines of one beam");
    const int h_local = m0.pol == Polarization::H ? 0 : 1;
    const int v_local = 1 - h_local;

    Eigen::Index idx_h = -1, idx_v = -1;
    for (Eigen::Index i = 0; i < rho.dim(); ++i) {
        OccupationVector occ = OccupationVector::from_key(rho.local_occupations()[static_cast<std::size_t>(i)]);
        if (occ.count(h_local) == 1 && occ.count(v_local) == 0) idx_h = i;
        if (occ.count(h_local) == 0 && occ.count(v_local) == 1) idx_v = i;
    }

    FidelityRecord rec;
    rec.vacuum_weight = rho.sector_mass(0);
    rec.single_photon_weight = rho.sector_mass(1);
    rec.multi_weight = rho.sector_mass_at_least(2);
    const Amplitude th = target.amp_h();
    const Amplitude tv = target.amp_v();
    const auto& m = rho.matrix();
    Amplitude overlap = std::conj(th) * m(idx_h, idx_h) * th + std::conj(th) * m(idx_h, idx_v) * tv +
                        std::conj(tv) * m(idx_v, idx_h) * th + std::conj(tv) * m(idx_v, idx_v) * tv;
    rec.raw = overlap.real();
    rec.single_photon_conditioned = rec.single_photon_weight > 0.0 ? rec.raw / rec.single_photon_weight : 0.0;
    return rec;
}

}  // namespace telesim
