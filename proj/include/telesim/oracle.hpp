/// Independent dense reference engine used by tests and the CLI verify
/// path. Deliberately takes a different mathematical route from the sparse
/// engine: mode unitaries act through the exponential of the quadratic
/// generator sum_ij h_ij a_i^dag a_j with h = -i log U, evaluated per
/// photon-number block over the truncated dense basis, and the source is
/// written down from its closed-form Schmidt coefficients instead of by
/// operator application.
#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <random>
#include <unordered_map>

#include "telesim/experiment.hpp"

namespace telesim::oracle {

/// Every occupation with total photons <= budget, ordered by increasing
/// packed key (mode 0 in the least significant bits).
struct DenseBasis {
    RegistryPtr registry;
    std::vector<std::uint64_t> occs;
    std::unordered_map<std::uint64_t, int> index;

    static std::shared_ptr<const DenseBasis> make(RegistryPtr reg) {
        auto b = std::make_shared<DenseBasis>();
        b->registry = std::move(reg);
        b->occs = detail::enumerate_local_occupations(b->registry->size(), b->registry->photon_budget());
        for (std::size_t i = 0; i < b->occs.size(); ++i) b->index[b->occs[i]] = static_cast<int>(i);
        return b;
    }
};

using DenseBasisPtr = std::shared_ptr<const DenseBasis>;

struct DenseState {
    DenseBasisPtr basis;
    Eigen::VectorXcd amps;

    double norm() const { return amps.norm(); }
};

inline DenseState make_dense(DenseBasisPtr basis) {
    DenseState s;
    s.amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->occs.size()));
    s.basis = std::move(basis);
    return s;
}

inline DenseState from_sparse(const FockState& s, DenseBasisPtr basis = nullptr) {
    if (!basis) basis = DenseBasis::make(s.registry());
    DenseState d = make_dense(basis);
    for (const auto& [key, amp] : s.terms()) d.amps(d.basis->index.at(key)) += amp;
    return d;
}

inline FockState to_sparse(const DenseState& d) {
    FockState s(d.basis->registry);
    for (std::size_t i = 0; i < d.basis->occs.size(); ++i)
        if (std::abs(d.amps(static_cast<Eigen::Index>(i))) >= kPruneTolerance)
            s.accumulate(d.basis->occs[i], d.amps(static_cast<Eigen::Index>(i)));
    return s;
}

namespace dense_detail {

/// Principal logarithm of a unitary: eigenphases taken in (-pi, pi], so an
/// eigenvalue at -1 maps to +pi.
inline Eigen::MatrixXcd minus_i_log_unitary(const Eigen::MatrixXcd& u) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u);
    if (es.info() != Eigen::Success) throw std::runtime_error("oracle: eigensolver failed on unitary");
    const Eigen::MatrixXcd v = es.eigenvectors();
    Eigen::VectorXcd phases(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases(i) = std::arg(es.eigenvalues()(i));  // -i log(e^{i t}) = t
    Eigen::MatrixXcd h = v * phases.asDiagonal() * v.inverse();
    return (h + h.adjoint()) / 2.0;  // symmetrize roundoff
}

struct LocalBasis {
    std::vector<std::uint64_t> occs;
    std::unordered_map<std::uint64_t, int> index;
    std::vector<std::vector<int>> by_total;
};

inline LocalBasis local_basis(int nmodes, int budget) {
    LocalBasis lb;
    lb.occs = detail::enumerate_local_occupations(nmodes, budget);
    lb.by_total.resize(static_cast<std::size_t>(budget) + 1);
    for (std::size_t i = 0; i < lb.occs.size(); ++i) {
        lb.index[lb.occs[i]] = static_cast<int>(i);
        lb.by_total[static_cast<std::size_t>(OccupationVector::from_key(lb.occs[i]).total(nmodes))].push_back(
            static_cast<int>(i));
    }
    return lb;
}

/// Many-body matrix of exp(i sum_ij h_ij a_i^dag a_j) on the local basis,
/// assembled and exponentiated per photon-number block.
inline Eigen::MatrixXcd many_body_unitary(const Eigen::MatrixXcd& h, const LocalBasis& lb, int nmodes) {
    const auto dim = static_cast<Eigen::Index>(lb.occs.size());
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& block : lb.by_total) {
        const auto bdim = static_cast<Eigen::Index>(block.size());
        if (bdim == 0) continue;
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(bdim, bdim);
        for (Eigen::Index col = 0; col < bdim; ++col) {
            const OccupationVector occ = OccupationVector::from_key(lb.occs[static_cast<std::size_t>(block[static_cast<std::size_t>(col)])]);
            for (int j = 0; j < nmodes; ++j) {
                const int nj = occ.count(j);
                if (nj == 0) continue;
                for (int i = 0; i < nmodes; ++i) {
                    if (h(i, j) == Amplitude{0.0, 0.0}) continue;
                    if (i == j) {
                        g(col, col) += h(i, j) * static_cast<double>(nj);
                        continue;
                    }
                    const int ni = occ.count(i);
                    const OccupationVector moved = occ.with_count(j, nj - 1).with_count(i, ni + 1);
                    const auto it = lb.index.find(moved.key());
                    if (it == lb.index.end()) continue;  // cannot happen: number conserved
                    // locate the row inside this block
                    const auto row_it = std::lower_bound(block.begin(), block.end(), it->second);
                    const auto row = static_cast<Eigen::Index>(row_it - block.begin());
                    g(row, col) += h(i, j) * std::sqrt(static_cast<double>(nj) * (ni + 1.0));
                }
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
        Eigen::VectorXcd phases(bdim);
        for (Eigen::Index k = 0; k < bdim; ++k) phases(k) = std::polar(1.0, es.eigenvalues()(k));
        const Eigen::MatrixXcd ub = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
        for (Eigen::Index r = 0; r < bdim; ++r)
            for (Eigen::Index c = 0; c < bdim; ++c)
                u(block[static_cast<std::size_t>(r)], block[static_cast<std::size_t>(c)]) = ub(r, c);
    }
    return u;
}

}  // namespace dense_detail

/// Applies a mode unitary to a dense state through generator
/// exponentiation. Norm is preserved to about 1e-9 over the scenarios the
/// oracle is used for.
inline DenseState dense_apply(const DenseState& state, const ModeUnitary& u) {
    const auto& reg = *state.basis->registry;
    const int nm = static_cast<int>(u.mode_indices.size());
    const Eigen::MatrixXcd h = dense_detail::minus_i_log_unitary(u.matrix);
    const auto lb = dense_detail::local_basis(nm, reg.photon_budget());
    const Eigen::MatrixXcd umb = dense_detail::many_body_unitary(h, lb, nm);

    DenseState out = make_dense(state.basis);
    for (std::size_t idx = 0; idx < state.basis->occs.size(); ++idx) {
        const Amplitude amp = state.amps(static_cast<Eigen::Index>(idx));
        if (amp == Amplitude{0.0, 0.0}) continue;
        const OccupationVector occ = OccupationVector::from_key(state.basis->occs[idx]);
        std::uint64_t local_key = 0;
        for (int i = 0; i < nm; ++i)
            local_key |= static_cast<std::uint64_t>(occ.count(u.mode_indices[static_cast<std::size_t>(i)])) << (3 * i);
        const int col = lb.index.at(local_key);
        for (int row = 0; row < static_cast<int>(lb.occs.size()); ++row) {
            const Amplitude w = umb(row, col);
            if (std::abs(w) < 1e-16) continue;
            OccupationVector moved = occ;
            const OccupationVector local_occ = OccupationVector::from_key(lb.occs[static_cast<std::size_t>(row)]);
            for (int i = 0; i < nm; ++i)
                moved = moved.with_count(u.mode_indices[static_cast<std::size_t>(i)], local_occ.count(i));
            out.amps(out.basis->index.at(moved.key())) += w * amp;
        }
    }
    return out;
}

inline DenseState dense_apply_all(const DenseState& state, const std::vector<ModeUnitary>& elements) {
    DenseState s = state;
    for (const auto& u : elements) s = dense_apply(s, u);
    return s;
}

/// Source state written down from the closed form of the squeezed-singlet
/// series: the n-pair term of one pass carries amplitude
/// chi^n sum_k (-1)^(n-k) |k, n-k>_signal |n-k, k>_idler.
inline DenseState oracle_double_pass(const DenseBasisPtr& basis, const PdcParams& params) {
    params.validate();
    const auto& reg = *basis->registry;
    const int h1 = reg.index_of("1", Polarization::H), v1 = reg.index_of("1", Polarization::V);
    const int h2 = reg.index_of("2", Polarization::H), v2 = reg.index_of("2", Polarization::V);
    const int h3 = reg.index_of("3", Polarization::H), v3 = reg.index_of("3", Polarization::V);
    const int h4 = reg.index_of("4", Polarization::H), v4 = reg.index_of("4", Polarization::V);

    DenseState s = make_dense(basis);
    for (int m = 0; m <= params.max_pairs; ++m)
        for (int n = 0; m + n <= params.max_pairs; ++n) {
            const double scale = std::pow(params.chi_pass_14(), m) * std::pow(params.chi_pass_23(), n);
            for (int k = 0; k <= m; ++k)
                for (int l = 0; l <= n; ++l) {
                    OccupationVector occ;
                    occ = occ.with_count(h1, k).with_count(v1, m - k).with_count(h4, m - k).with_count(v4, k);
                    occ = occ.with_count(h2, l).with_count(v2, n - l).with_count(h3, n - l).with_count(v3, l);
                    const double sign = ((m - k) + (n - l)) % 2 == 0 ? 1.0 : -1.0;
                    s.amps(basis->index.at(occ.key())) += scale * sign;
                }
        }
    s.amps /= s.norm();
    return s;
}

/// Exhaustive enumeration over the dense basis: per branch, per basis
/// vector, port counts decide fired/silent; probability, peak amplitude and
/// the conditional operator on the output modes follow directly.
inline std::vector<MeasurementOutcome> oracle_pattern_probability(const DenseState& state,
                                                                  const FiringPattern& pattern,
                                                                  const std::vector<DetectorPort>& ports,
                                                                  const std::vector<int>& output_modes) {
    const auto& reg = *state.basis->registry;
    const auto branches = detail::expand_branches(pattern);
    const int n_out = static_cast<int>(output_modes.size());
    const auto local_occs = detail::enumerate_local_occupations(n_out, reg.photon_budget());
    std::unordered_map<std::uint64_t, Eigen::Index> local_index;
    for (std::size_t i = 0; i < local_occs.size(); ++i) local_index[local_occs[i]] = static_cast<Eigen::Index>(i);

    // Precompute, per basis vector: port counts, output-local index, rest key.
    const auto nbasis = state.basis->occs.size();
    std::vector<std::vector<int>> port_counts(ports.size(), std::vector<int>(nbasis, 0));
    std::vector<Eigen::Index> out_local(nbasis);
    std::vector<std::uint64_t> env_key(nbasis);
    std::unordered_map<std::string, std::size_t> port_pos;
    for (std::size_t p = 0; p < ports.size(); ++p) port_pos[ports[p].name] = p;
    for (std::size_t b = 0; b < nbasis; ++b) {
        OccupationVector occ = OccupationVector::from_key(state.basis->occs[b]);
        for (std::size_t p = 0; p < ports.size(); ++p)
            for (int m : ports[p].mode_indices) port_counts[p][b] += occ.count(m);
        std::uint64_t lk = 0;
        OccupationVector env = occ;
        for (int j = 0; j < n_out; ++j) {
            lk |= static_cast<std::uint64_t>(occ.count(output_modes[static_cast<std::size_t>(j)])) << (3 * j);
            env = env.with_count(output_modes[static_cast<std::size_t>(j)], 0);
        }
        out_local[b] = local_index.at(lk);
        env_key[b] = env.key();
    }

    std::vector<MeasurementOutcome> outcomes;
    for (const auto& br : branches) {
        MeasurementOutcome out;
        out.branch = br.label;
        std::unordered_map<std::uint64_t, std::vector<std::pair<Eigen::Index, Amplitude>>> groups;
        for (std::size_t b = 0; b < nbasis; ++b) {
            const Amplitude amp = state.amps(static_cast<Eigen::Index>(b));
            if (std::abs(amp) < kPruneTolerance) continue;
            bool ok = true;
            for (const auto& name : br.fired)
                if (!ports[port_pos.at(name)].model.fired(port_counts[port_pos.at(name)][b])) { ok = false; break; }
            if (ok)
                for (const auto& name : br.silent)
                    if (ports[port_pos.at(name)].model.fired(port_counts[port_pos.at(name)][b])) { ok = false; break; }
            if (!ok) continue;
            out.probability += std::norm(amp);
            out.peak_amplitude = std::max(out.peak_amplitude, std::abs(amp));
            groups[env_key[b]].emplace_back(out_local[b], amp);
        }
        const auto dim = static_cast<Eigen::Index>(local_occs.size());
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
        for (const auto& [env, entries] : groups)
            for (const auto& [i, ai] : entries)
                for (const auto& [j, aj] : entries) rho(i, j) += ai * std::conj(aj);
        if (out.probability > 0.0) rho /= out.probability;
        out.conditional = DensityOperator(state.basis->registry, output_modes, local_occs, std::move(rho));
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

/// Dense mirror of the scenario run: sector weights, per-sector branch
/// probabilities, full-state outcomes.
struct OracleRun {
    std::vector<SectorWeight> weights;
    std::vector<SectorBranchProbability> matrix;
    std::vector<MeasurementOutcome> full_outcomes;
};

inline OracleRun oracle_run_circuit(const Circuit& circuit, const PdcParams& params) {
    const auto basis = DenseBasis::make(circuit.registry);
    const DenseState source = oracle_double_pass(basis, params);
    const auto& reg = *circuit.registry;

    // sector split over the dense vector
    std::map<std::pair<int, int>, DenseState> sectors;
    for (std::size_t b = 0; b < basis->occs.size(); ++b) {
        const Amplitude amp = source.amps(static_cast<Eigen::Index>(b));
        if (amp == Amplitude{0.0, 0.0}) continue;
        const OccupationVector occ = OccupationVector::from_key(basis->occs[b]);
        int p14 = 0, p23 = 0;
        for (Polarization p : {Polarization::H, Polarization::V}) {
            p14 += occ.count(reg.index_of("1", p)) + occ.count(reg.index_of("4", p));
            p23 += occ.count(reg.index_of("2", p)) + occ.count(reg.index_of("3", p));
        }
        auto [it, fresh] = sectors.try_emplace({p14 / 2, p23 / 2}, make_dense(basis));
        it->second.amps(static_cast<Eigen::Index>(b)) = amp;
    }

    OracleRun run;
    for (auto& [mn, sector_state] : sectors) {
        const double w = sector_state.amps.squaredNorm();
        run.weights.push_back({mn.first, mn.second, w});
        sector_state.amps /= std::sqrt(w);
        const DenseState out = dense_apply_all(sector_state, circuit.elements);
        for (const auto& o : oracle_pattern_probability(out, circuit.pattern, circuit.ports, circuit.output_modes))
            run.matrix.push_back({mn.first, mn.second, o.branch.empty() ? "coincidence" : o.branch, o.probability,
                                  o.peak_amplitude});
    }
    const DenseState full = dense_apply_all(source, circuit.elements);
    run.full_outcomes =
        oracle_pattern_probability(full, circuit.pattern, circuit.ports, circuit.output_modes);
    return run;
}

/// Sparse-vs-dense comparison used by tests and `--verify`.
struct VerifyOptions {
    std::uint64_t seed = 7;
    int random_applications = 200;
    double amplitude_tol = 1e-8;
    double probability_tol = 1e-10;
};

namespace dense_detail {

inline double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Amplitude gaussian(std::mt19937_64& rng) {
    const double u1 = std::max(unit_double(rng), 1e-300);
    const double u2 = unit_double(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * std::numbers::pi * u2), r * std::sin(2.0 * std::numbers::pi * u2)};
}

inline Eigen::MatrixXcd haar_unitary(int n, std::mt19937_64& rng) {
    Eigen::MatrixXcd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = gaussian(rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
        const Amplitude d = r(i, i);
        q.col(i) *= std::abs(d) == 0.0 ? Amplitude{1.0, 0.0} : d / std::abs(d);
    }
    return q;
}

inline bool complain(std::ostream* log, const std::string& what, double got, double want) {
    if (log) *log << "verify mismatch: " << what << " sparse/dense " << got << " vs " << want << "\n";
    return false;
}

}  // namespace dense_detail

/// Runs one scenario on both engines and compares every reported quantity.
inline bool verify_scenario(const ScenarioConfig& config, const VerifyOptions& opt, std::ostream* log) {
    const Circuit circuit = build_circuit(config);
    const WiredRun sparse = run_wired(circuit, config.params);
    const OracleRun dense = oracle_run_circuit(circuit, config.params);

    bool ok = true;
    for (const auto& w : sparse.weights) {
        bool found = false;
        for (const auto& dw : dense.weights)
            if (dw.m == w.m && dw.n == w.n) {
                found = true;
                if (std::abs(dw.weight - w.weight) > opt.probability_tol)
                    ok = dense_detail::complain(log, "sector weight", w.weight, dw.weight);
            }
        if (!found) ok = dense_detail::complain(log, "sector presence", w.weight, -1.0);
    }
    for (const auto& row : sparse.matrix) {
        bool found = false;
        for (const auto& drow : dense.matrix)
            if (drow.m == row.m && drow.n == row.n && drow.branch == row.branch) {
                found = true;
                if (std::abs(drow.conditional_probability - row.conditional_probability) > opt.probability_tol)
                    ok = dense_detail::complain(log, "sector probability", row.conditional_probability,
                                                drow.conditional_probability);
            }
        if (!found) ok = dense_detail::complain(log, "sector row presence", row.conditional_probability, -1.0);
    }
    if (sparse.full_outcomes.size() != dense.full_outcomes.size())
        return dense_detail::complain(log, "branch count", static_cast<double>(sparse.full_outcomes.size()),
                                      static_cast<double>(dense.full_outcomes.size()));
    for (std::size_t i = 0; i < sparse.full_outcomes.size(); ++i) {
        const auto& so = sparse.full_outcomes[i];
        const auto& dn = dense.full_outcomes[i];
        if (std::abs(so.probability - dn.probability) > opt.probability_tol)
            ok = dense_detail::complain(log, "branch probability", so.probability, dn.probability);
        if (so.probability > 0.0 &&
            (so.conditional.matrix() - dn.conditional.matrix()).cwiseAbs().maxCoeff() > opt.amplitude_tol)
            ok = dense_detail::complain(log, "conditional state", 0.0, 0.0);
        const QubitPolarizationState target = circuit.target_for(so.branch.empty() ? "coincidence" : so.branch);
        if (so.probability > 0.0 &&
            std::abs(fidelity(so.conditional, target).raw - fidelity(dn.conditional, target).raw) >
                opt.probability_tol)
            ok = dense_detail::complain(log, "branch fidelity", fidelity(so.conditional, target).raw,
                                        fidelity(dn.conditional, target).raw);
    }
    return ok;
}

/// Random (state, unitary) agreement between the two engines.
inline bool verify_random_applications(const VerifyOptions& opt, std::ostream* log) {
    std::mt19937_64 rng(opt.seed);
    bool ok = true;
    for (int trial = 0; trial < opt.random_applications; ++trial) {
        const int n_beams = 2 + static_cast<int>(rng() % 2);
        RegistryBuilder rb;
        for (int i = 0; i < n_beams; ++i) rb.beam("b" + std::to_string(i));
        const RegistryPtr reg = rb.build(4);
        const auto basis = DenseBasis::make(reg);

        FockState sp(reg);
        for (auto key : basis->occs) sp.accumulate(key, dense_detail::gaussian(rng));
        sp = sp.normalized();

        const int nm = 2 + static_cast<int>(rng() % 3);
        std::vector<int> pool(static_cast<std::size_t>(reg->size()));
        for (int i = 0; i < reg->size(); ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<int> modes;
        for (int i = 0; i < nm; ++i) {
            const auto pick = static_cast<std::size_t>(rng() % pool.size());
            modes.push_back(pool[pick]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        const ModeUnitary u{"rand", modes, dense_detail::haar_unitary(nm, rng)};

        const FockState via_sparse = apply_unitary(sp, u);
        const DenseState via_dense = dense_apply(from_sparse(sp, basis), u);
        if (std::abs(via_dense.norm() - 1.0) > 1e-9) ok = dense_detail::complain(log, "dense norm", via_dense.norm(), 1.0);
        for (std::size_t b = 0; b < basis->occs.size(); ++b) {
            const Amplitude want = via_dense.amps(static_cast<Eigen::Index>(b));
            const Amplitude got = via_sparse.amplitude(OccupationVector::from_key(basis->occs[b]));
            if (std::abs(got - want) > opt.amplitude_tol) {
                ok = dense_detail::complain(log, "random application amplitude", std::abs(got), std::abs(want));
                break;
            }
        }
    }
    return ok;
}

/// The acceptance-grid equivalence sweep.
inline bool verify_equivalence(const VerifyOptions& opt, std::ostream* log = nullptr) {
    bool ok = true;
    std::vector<ScenarioConfig> grid;
    for (double chi : {0.05, 0.1, 0.3}) {
        ScenarioConfig cfg;
        cfg.scheme = Scheme::Modified;
        cfg.params = PdcParams{chi, 2, {}};
        cfg.rot1 = {0.6, 1.9};
        grid.push_back(cfg);
    }
    {
        ScenarioConfig cfg;
        cfg.scheme = Scheme::Modified;
        cfg.params = PdcParams{0.1, 2, {}};
        cfg.rot1 = {std::numbers::pi / 4, 0.0};
        cfg.eta = 0.6;
        grid.push_back(cfg);
        cfg.eta = 1.0;
        cfg.pbs_convention = PbsConvention::TransmitV;
        grid.push_back(cfg);
        cfg.pbs_convention = PbsConvention::TransmitH;
        cfg.rot4 = {0.4, 0.9};
        grid.push_back(cfg);
    }
    for (Scheme s : {Scheme::Innsbruck, Scheme::PnrTrigger}) {
        ScenarioConfig cfg;
        cfg.scheme = s;
        cfg.params = PdcParams{0.1, 2, {}};
        cfg.rot1 = {0.8, 2.4};
        grid.push_back(cfg);
        cfg.eta = 0.6;
        grid.push_back(cfg);
    }
    for (const auto& cfg : grid) ok = verify_scenario(cfg, opt, log) && ok;
    ok = verify_random_applications(opt, log) && ok;
    return ok;
}

}  // namespace telesim::oracle
