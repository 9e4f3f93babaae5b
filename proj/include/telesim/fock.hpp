/// Polarization-resolved bosonic Fock states: mode registries, sparse
/// superpositions over occupation-number basis vectors, inner products,
/// tensor products, and the standard two-photon Bell states.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace telesim {

using Amplitude = std::complex<double>;

/// Amplitudes below this magnitude are dropped from sparse states.
inline constexpr double kPruneTolerance = 1e-15;
/// Tolerance for norm checks of constructor outputs.
inline constexpr double kNormTolerance = 1e-12;

enum class Polarization : std::uint8_t { H, V };

inline char pol_char(Polarization p) { return p == Polarization::H ? 'H' : 'V'; }

/// One optical mode: a spatial line (beam, detector arm, sink) carrying a
/// single polarization.
struct Mode {
    std::string spatial;
    Polarization pol;

    friend bool operator==(const Mode& a, const Mode& b) {
        return a.pol == b.pol && a.spatial == b.spatial;
    }
};

/// Ordered, immutable list of modes plus a total photon budget. Occupation
/// vectors index into the registry order, so the order is fixed for life.
class ModeRegistry {
  public:
    /// Packed occupation keys use 3 bits per mode.
    static constexpr int kMaxModes = 21;
    static constexpr int kMaxCountPerMode = 7;

    ModeRegistry(std::vector<Mode> modes, int max_total_photons)
        : modes_(std::move(modes)), max_total_photons_(max_total_photons) {
        if (modes_.empty()) throw std::invalid_argument("registry: no modes");
        if (static_cast<int>(modes_.size()) > kMaxModes)
            throw std::invalid_argument("registry: more than " + std::to_string(kMaxModes) + " modes");
        if (max_total_photons_ < 0)
            throw std::invalid_argument("registry: photon budget out of range");
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            auto [it, fresh] = index_.emplace(key_of(modes_[i].spatial, modes_[i].pol), static_cast<int>(i));
            if (!fresh) throw std::invalid_argument("registry: duplicate mode " + key_of(modes_[i].spatial, modes_[i].pol));
        }
    }

    int size() const { return static_cast<int>(modes_.size()); }
    int photon_budget() const { return max_total_photons_; }
    const Mode& mode(int i) const { return modes_.at(static_cast<std::size_t>(i)); }

    bool has(const std::string& spatial, Polarization pol) const {
        return index_.count(key_of(spatial, pol)) != 0;
    }
    bool has_spatial(const std::string& spatial) const {
        return has(spatial, Polarization::H) || has(spatial, Polarization::V);
    }

    int index_of(const std::string& spatial, Polarization pol) const {
        auto it = index_.find(key_of(spatial, pol));
        if (it == index_.end())
            throw std::invalid_argument("registry: unregistered mode " + key_of(spatial, pol));
        return it->second;
    }

    friend bool operator==(const ModeRegistry& a, const ModeRegistry& b) {
        return a.max_total_photons_ == b.max_total_photons_ && a.modes_ == b.modes_;
    }

  private:
    static std::string key_of(const std::string& spatial, Polarization pol) {
        return spatial + ':' + pol_char(pol);
    }

    std::vector<Mode> modes_;
    int max_total_photons_;
    std::unordered_map<std::string, int> index_;
};

using RegistryPtr = std::shared_ptr<const ModeRegistry>;

/// Convenience builder: registers H and V for each beam label, then any
/// single extra modes (polarizer sinks, loss sinks).
class RegistryBuilder {
  public:
    RegistryBuilder& beam(const std::string& spatial) {
        modes_.push_back({spatial, Polarization::H});
        modes_.push_back({spatial, Polarization::V});
        return *this;
    }
    RegistryBuilder& single(const std::string& spatial, Polarization pol) {
        modes_.push_back({spatial, pol});
        return *this;
    }
    RegistryPtr build(int max_total_photons) const {
        return std::make_shared<const ModeRegistry>(modes_, max_total_photons);
    }

  private:
    std::vector<Mode> modes_;
};

/// Occupation numbers for every registered mode, packed 3 bits per mode in
/// registry order.
class OccupationVector {
  public:
    OccupationVector() = default;

    static OccupationVector from_key(std::uint64_t key) {
        OccupationVector o;
        o.bits_ = key;
        return o;
    }

    static OccupationVector from_counts(const std::vector<int>& counts) {
        if (static_cast<int>(counts.size()) > ModeRegistry::kMaxModes)
            throw std::invalid_argument("occupation: too many modes");
        OccupationVector o;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] < 0 || counts[i] > ModeRegistry::kMaxCountPerMode)
                throw std::invalid_argument("occupation: count out of range");
            o.bits_ |= static_cast<std::uint64_t>(counts[i]) << (3 * i);
        }
        return o;
    }

    int count(int mode) const { return static_cast<int>((bits_ >> (3 * mode)) & 7u); }

    OccupationVector with_count(int mode, int c) const {
        OccupationVector o = *this;
        o.bits_ &= ~(std::uint64_t{7} << (3 * mode));
        o.bits_ |= static_cast<std::uint64_t>(c) << (3 * mode);
        return o;
    }

    int total(int nmodes) const {
        int t = 0;
        for (int i = 0; i < nmodes; ++i) t += count(i);
        return t;
    }

    std::uint64_t key() const { return bits_; }

    friend bool operator==(const OccupationVector& a, const OccupationVector& b) {
        return a.bits_ == b.bits_;
    }

  private:
    std::uint64_t bits_ = 0;
};

inline const std::array<double, 8>& factorial_table() {
    static const std::array<double, 8> f = {1, 1, 2, 6, 24, 120, 720, 5040};
    return f;
}

/// Sparse superposition over occupation-number basis vectors. Values are
/// immutable in practice: all operations return new states.
class FockState {
  public:
    using TermMap = std::unordered_map<std::uint64_t, Amplitude>;

    explicit FockState(RegistryPtr registry) : registry_(std::move(registry)) {
        if (!registry_) throw std::invalid_argument("state: null registry");
    }

    static FockState vacuum(RegistryPtr registry) {
        FockState s(std::move(registry));
        s.terms_[0] = Amplitude{1.0, 0.0};
        return s;
    }

    const RegistryPtr& registry() const { return registry_; }
    const TermMap& terms() const { return terms_; }
    std::size_t term_count() const { return terms_.size(); }

    /// Terms sorted by occupation key: a deterministic iteration order for
    /// reductions and output.
    std::vector<std::pair<std::uint64_t, Amplitude>> sorted_terms() const {
        std::vector<std::pair<std::uint64_t, Amplitude>> v(terms_.begin(), terms_.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        return v;
    }

    double norm2() const {
        double n = 0.0;
        for (const auto& [k, a] : terms_) n += std::norm(a);
        return n;
    }
    double norm() const { return std::sqrt(norm2()); }

    Amplitude amplitude(const OccupationVector& occ) const {
        auto it = terms_.find(occ.key());
        return it == terms_.end() ? Amplitude{0.0, 0.0} : it->second;
    }

    void add_term(const OccupationVector& occ, Amplitude amp) {
        check_occupation(occ);
        accumulate(occ.key(), amp);
    }

    void accumulate(std::uint64_t key, Amplitude amp) {
        auto [it, fresh] = terms_.emplace(key, amp);
        if (!fresh) it->second += amp;
    }

    FockState scaled(Amplitude c) const {
        FockState out(registry_);
        for (const auto& [k, a] : terms_) out.terms_[k] = c * a;
        return out;
    }

    /// In-place sum with another state over the same registry.
    void add(const FockState& other, Amplitude weight = {1.0, 0.0}) {
        require_same_registry(other);
        for (const auto& [k, a] : other.terms_) accumulate(k, weight * a);
    }

    FockState normalized() const {
        const double n = norm();
        if (n == 0.0) throw std::domain_error("state: cannot normalize the zero state");
        return scaled(Amplitude{1.0 / n, 0.0});
    }

    /// a_m^dagger acting on every term, with the bosonic sqrt(n+1) factor.
    FockState apply_creation(int mode) const {
        const int nmodes = registry_->size();
        FockState out(registry_);
        for (const auto& [k, a] : terms_) {
            OccupationVector occ = OccupationVector::from_key(k);
            const int n = occ.count(mode);
            if (n + 1 > ModeRegistry::kMaxCountPerMode ||
                occ.total(nmodes) + 1 > registry_->photon_budget())
                throw std::domain_error("state: photon budget exceeded by creation operator");
            out.accumulate(occ.with_count(mode, n + 1).key(), a * std::sqrt(double(n) + 1.0));
        }
        return out;
    }

    void prune(double tol = kPruneTolerance) {
        for (auto it = terms_.begin(); it != terms_.end();) {
            if (std::abs(it->second) < tol)
                it = terms_.erase(it);
            else
                ++it;
        }
    }

    void require_same_registry(const FockState& other) const {
        if (registry_ != other.registry_ && !(*registry_ == *other.registry_))
            throw std::invalid_argument("state: registry mismatch");
    }

    void check_occupation(const OccupationVector& occ) const {
        const int nmodes = registry_->size();
        for (int i = nmodes; i < ModeRegistry::kMaxModes; ++i)
            if (occ.count(i) != 0) throw std::invalid_argument("occupation: length mismatch with registry");
        if (occ.total(nmodes) > registry_->photon_budget())
            throw std::invalid_argument("occupation: photon budget exceeded");
    }

  private:
    RegistryPtr registry_;
    TermMap terms_;
};

/// Single-term unit-norm basis state.
inline FockState basis_state(RegistryPtr registry, const OccupationVector& occ) {
    FockState s(std::move(registry));
    s.check_occupation(occ);
    s.add_term(occ, Amplitude{1.0, 0.0});
    return s;
}

/// <a|b>, conjugate-linear in the first argument.
inline Amplitude inner_product(const FockState& a, const FockState& b) {
    a.require_same_registry(b);
    Amplitude r{0.0, 0.0};
    const auto& small = a.term_count() <= b.term_count() ? a : b;
    const auto& large = a.term_count() <= b.term_count() ? b : a;
    const bool small_is_a = &small == &a;
    for (const auto& [k, amp] : small.sorted_terms()) {
        auto it = large.terms().find(k);
        if (it == large.terms().end()) continue;
        r += small_is_a ? std::conj(amp) * it->second : std::conj(it->second) * amp;
    }
    return r;
}

/// |<a|b>|^2 / (|a|^2 |b|^2): global-phase-free state comparison.
inline double state_fidelity(const FockState& a, const FockState& b) {
    return std::norm(inner_product(a, b)) / (a.norm2() * b.norm2());
}

/// Product of states over disjoint registries; the result lives on the
/// concatenated registry with the summed photon budget.
inline FockState tensor(const FockState& a, const FockState& b) {
    const ModeRegistry& ra = *a.registry();
    const ModeRegistry& rb = *b.registry();
    std::vector<Mode> modes;
    modes.reserve(static_cast<std::size_t>(ra.size() + rb.size()));
    for (int i = 0; i < ra.size(); ++i) modes.push_back(ra.mode(i));
    for (int i = 0; i < rb.size(); ++i) {
        if (ra.has(rb.mode(i).spatial, rb.mode(i).pol))
            throw std::invalid_argument("tensor: registries overlap on mode " + rb.mode(i).spatial);
        modes.push_back(rb.mode(i));
    }
    auto joint = std::make_shared<const ModeRegistry>(std::move(modes), ra.photon_budget() + rb.photon_budget());
    FockState out(joint);
    const int shift = 3 * ra.size();
    for (const auto& [ka, va] : a.terms())
        for (const auto& [kb, vb] : b.terms())
            out.accumulate(ka | (kb << shift), va * vb);
    out.prune();
    return out;
}

/// Re-express a state on a larger registry containing all of its modes.
inline FockState promote(const FockState& s, RegistryPtr target) {
    const ModeRegistry& from = *s.registry();
    std::vector<int> map(static_cast<std::size_t>(from.size()));
    for (int i = 0; i < from.size(); ++i)
        map[static_cast<std::size_t>(i)] = target->index_of(from.mode(i).spatial, from.mode(i).pol);
    FockState out(target);
    for (const auto& [k, a] : s.terms()) {
        OccupationVector occ = OccupationVector::from_key(k);
        OccupationVector moved;
        for (int i = 0; i < from.size(); ++i)
            if (occ.count(i) > 0) moved = moved.with_count(map[static_cast<std::size_t>(i)], occ.count(i));
        if (moved.total(target->size()) > target->photon_budget())
            throw std::invalid_argument("promote: photon budget exceeded");
        out.accumulate(moved.key(), a);
    }
    return out;
}

enum class BellKind { PsiMinus, PsiPlus, PhiMinus, PhiPlus };

/// Two-photon Bell states on beams (spatialA, spatialB):
///   Psi+- = (|H V> +- |V H>)/sqrt2,  Phi+- = (|H H> +- |V V>)/sqrt2.
inline FockState bell_state(RegistryPtr registry, BellKind kind,
                            const std::string& spatialA, const std::string& spatialB) {
    if (spatialA == spatialB) throw std::invalid_argument("bell_state: beams must differ");
    const int aH = registry->index_of(spatialA, Polarization::H);
    const int aV = registry->index_of(spatialA, Polarization::V);
    const int bH = registry->index_of(spatialB, Polarization::H);
    const int bV = registry->index_of(spatialB, Polarization::V);
    const double r = 1.0 / std::numbers::sqrt2;
    FockState s(std::move(registry));
    auto two = [&](int m1, int m2) { return OccupationVector{}.with_count(m1, 1).with_count(m2, 1); };
    switch (kind) {
        case BellKind::PsiMinus:
            s.add_term(two(aH, bV), {r, 0.0});
            s.add_term(two(aV, bH), {-r, 0.0});
            break;
        case BellKind::PsiPlus:
            s.add_term(two(aH, bV), {r, 0.0});
            s.add_term(two(aV, bH), {r, 0.0});
            break;
        case BellKind::PhiMinus:
            s.add_term(two(aH, bH), {r, 0.0});
            s.add_term(two(aV, bV), {-r, 0.0});
            break;
        case BellKind::PhiPlus:
            s.add_term(two(aH, bH), {r, 0.0});
            s.add_term(two(aV, bV), {r, 0.0});
            break;
    }
    return s;
}

/// Single-photon polarization qubit cos(theta)|H> + e^{i phi} sin(theta)|V>.
struct QubitPolarizationState {
    double theta = 0.0;
    double phi = 0.0;

    Amplitude amp_h() const { return {std::cos(theta), 0.0}; }
    Amplitude amp_v() const { return std::polar(std::sin(theta), phi); }
};

inline FockState qubit_to_fock(RegistryPtr registry, const QubitPolarizationState& q,
                               const std::string& spatial) {
    const int h = registry->index_of(spatial, Polarization::H);
    const int v = registry->index_of(spatial, Polarization::V);
    FockState s(std::move(registry));
    s.add_term(OccupationVector{}.with_count(h, 1), q.amp_h());
    s.add_term(OccupationVector{}.with_count(v, 1), q.amp_v());
    s.prune();
    return s;
}

}  // namespace telesim
