/// Passive optical elements as unitaries over a subset of modes, and the
/// engine that applies a mode unitary to a FockState by creation-operator
/// substitution:  a_i^dag -> sum_j U_ji b_j^dag, expanded multinomially.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "telesim/fock.hpp"

namespace telesim {

/// Unitary over an ordered subset of registry modes. Column i is the image
/// of mode i under the substitution rule above.
struct ModeUnitary {
    std::string label;
    std::vector<int> mode_indices;
    Eigen::MatrixXcd matrix;

    ModeUnitary(std::string lbl, std::vector<int> modes, Eigen::MatrixXcd m)
        : label(std::move(lbl)), mode_indices(std::move(modes)), matrix(std::move(m)) {
        const auto n = static_cast<Eigen::Index>(mode_indices.size());
        if (matrix.rows() != n || matrix.cols() != n)
            throw std::invalid_argument("mode unitary: matrix size does not match mode count");
        const double defect = (matrix.adjoint() * matrix - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
        if (defect > kNormTolerance)
            throw std::invalid_argument("mode unitary '" + label + "': not unitary (defect " + std::to_string(defect) + ")");
    }

    /// w * u restricted to a shared mode set.
    static ModeUnitary composed(const ModeUnitary& first, const ModeUnitary& then) {
        if (first.mode_indices != then.mode_indices)
            throw std::invalid_argument("mode unitary: composition requires identical mode sets");
        return {then.label + "*" + first.label, first.mode_indices, then.matrix * first.matrix};
    }
};

namespace detail {

/// Expands one occupation pattern of the touched modes through the unitary.
/// Enumerates every way of distributing the n_i photons of input mode i over
/// the output modes; per assignment matrix {k_ij} the coefficient is
///   prod_i [ n_i! / prod_j k_ij! * prod_j U(j,i)^{k_ij} ]
/// and the final amplitude carries sqrt(prod_j m_j!) / sqrt(prod_i n_i!).
/// Multinomial factors are integer-valued and divided out in one step, so
/// permutation-type unitaries act amplitude-exactly.
class MonomialExpander {
  public:
    MonomialExpander(const ModeUnitary& u, const std::vector<int>& in_counts)
        : u_(u), in_(in_counts), out_(in_counts.size(), 0) {}

    template <typename Sink>
    void run(Amplitude base, Sink&& sink) {
        double denom = 1.0;
        for (int n : in_) denom *= factorial_table()[static_cast<std::size_t>(n)];
        emit_ = [&](Amplitude coeff) {
            double numer = 1.0;
            for (int m : out_) numer *= factorial_table()[static_cast<std::size_t>(m)];
            const double ratio = numer / denom;
            sink(out_, ratio == 1.0 ? coeff : coeff * std::sqrt(ratio));
        };
        descend(0, base);
    }

  private:
    static double fact(int n) { return factorial_table()[static_cast<std::size_t>(n)]; }

    void descend(std::size_t i, Amplitude coeff) {
        if (i == in_.size()) {
            emit_(coeff);
            return;
        }
        distribute(i, 0, in_[i], 1.0, Amplitude{1.0, 0.0}, coeff);
    }

    // Place `left` photons of input mode i into output modes j' >= j.
    // kfact accumulates prod k!, upows accumulates prod U(j,i)^k.
    void distribute(std::size_t i, std::size_t j, int left, double kfact, Amplitude upows, Amplitude coeff) {
        const Amplitude u = u_.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        if (j + 1 == out_.size()) {
            const Amplitude term = upows * ipow(u, left);
            if (left > 0 && term == Amplitude{0.0, 0.0}) return;
            const double multinomial = fact(in_[i]) / (kfact * fact(left));  // exact: integer-valued
            out_[j] += left;
            descend(i + 1, coeff * term * multinomial);
            out_[j] -= left;
            return;
        }
        for (int k = 0; k <= left; ++k) {
            const Amplitude term = ipow(u, k);
            if (k > 0 && term == Amplitude{0.0, 0.0}) break;
            out_[j] += k;
            distribute(i, j + 1, left - k, kfact * fact(k), upows * term, coeff);
            out_[j] -= k;
        }
    }

    static Amplitude ipow(Amplitude b, int e) {
        Amplitude r{1.0, 0.0};
        for (int i = 0; i < e; ++i) r *= b;
        return r;
    }

    const ModeUnitary& u_;
    std::vector<int> in_;
    std::vector<int> out_;
    std::function<void(Amplitude)> emit_;
};

}  // namespace detail

/// Applies a mode unitary to every basis term of a state. Photon number is
/// conserved and the norm is preserved up to floating-point error.
inline FockState apply_unitary(const FockState& state, const ModeUnitary& u) {
    const auto& reg = *state.registry();
    for (int idx : u.mode_indices)
        if (idx < 0 || idx >= reg.size())
            throw std::invalid_argument("apply_unitary: mode index outside registry");

    const std::size_t nm = u.mode_indices.size();
    FockState out(state.registry());
    std::vector<int> in_counts(nm, 0);
    for (const auto& [key, amp] : state.terms()) {
        OccupationVector occ = OccupationVector::from_key(key);
        int touched = 0;
        for (std::size_t i = 0; i < nm; ++i) {
            in_counts[i] = occ.count(u.mode_indices[i]);
            touched += in_counts[i];
        }
        if (touched == 0) {
            out.accumulate(key, amp);
            continue;
        }
        OccupationVector base = occ;
        for (std::size_t i = 0; i < nm; ++i) base = base.with_count(u.mode_indices[i], 0);

        detail::MonomialExpander expander(u, in_counts);
        expander.run(amp, [&](const std::vector<int>& out_counts, Amplitude a) {
            OccupationVector result = base;
            for (std::size_t j = 0; j < nm; ++j)
                if (out_counts[j] > 0) result = result.with_count(u.mode_indices[j], out_counts[j]);
            out.accumulate(result.key(), a);
        });
    }
    out.prune();
    return out;
}

inline FockState apply_all(const FockState& state, const std::vector<ModeUnitary>& elements) {
    FockState s = state;
    for (const auto& u : elements) s = apply_unitary(s, u);
    return s;
}

/// Polarization-independent 50:50 splitter, real Hadamard convention
/// (1/sqrt2) [[1, 1], [1, -1]] applied to the H and the V pair alike.
inline ModeUnitary bs_50_50(const RegistryPtr& reg, const std::string& portA, const std::string& portB) {
    const double r = 1.0 / std::numbers::sqrt2;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
    // Block order: (A,H),(B,H),(A,V),(B,V).
    for (int blk : {0, 2}) {
        m(blk, blk) = r;
        m(blk, blk + 1) = r;
        m(blk + 1, blk) = r;
        m(blk + 1, blk + 1) = -r;
    }
    std::vector<int> modes = {
        reg->index_of(portA, Polarization::H), reg->index_of(portB, Polarization::H),
        reg->index_of(portA, Polarization::V), reg->index_of(portB, Polarization::V)};
    return {"bs(" + portA + "," + portB + ")", std::move(modes), std::move(m)};
}

/// Which polarization a polarizing beam splitter transmits. TransmitH is the
/// working convention; TransmitV is the mirrored variant used to show that
/// scenario conclusions do not depend on the choice.
enum class PbsConvention { TransmitH, TransmitV };

inline constexpr PbsConvention kDefaultPbsConvention = PbsConvention::TransmitH;

/// Polarizing beam splitter: the transmitted polarization keeps its spatial
/// line, the reflected one swaps lines.
inline ModeUnitary pbs(const RegistryPtr& reg, const std::string& portA, const std::string& portB,
                       PbsConvention conv = kDefaultPbsConvention) {
    const Polarization transmitted = conv == PbsConvention::TransmitH ? Polarization::H : Polarization::V;
    const Polarization reflected = conv == PbsConvention::TransmitH ? Polarization::V : Polarization::H;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(4, 4);
    // Block order: (A,t),(B,t),(A,r),(B,r): identity on transmitted, swap on reflected.
    m(2, 2) = 0.0;
    m(3, 3) = 0.0;
    m(2, 3) = 1.0;
    m(3, 2) = 1.0;
    std::vector<int> modes = {
        reg->index_of(portA, transmitted), reg->index_of(portB, transmitted),
        reg->index_of(portA, reflected), reg->index_of(portB, reflected)};
    return {"pbs(" + portA + "," + portB + ")", std::move(modes), std::move(m)};
}

/// Polarization rotator on one spatial line:
///   [[cos t, -e^{-i p} sin t], [e^{i p} sin t, cos t]] over (H, V).
inline ModeUnitary rotator(const RegistryPtr& reg, const std::string& port, double theta, double phi,
                           const std::string& label = "") {
    Eigen::MatrixXcd m(2, 2);
    m(0, 0) = std::cos(theta);
    m(0, 1) = -std::polar(std::sin(theta), -phi);
    m(1, 0) = std::polar(std::sin(theta), phi);
    m(1, 1) = std::cos(theta);
    std::vector<int> modes = {reg->index_of(port, Polarization::H), reg->index_of(port, Polarization::V)};
    return {label.empty() ? "rot(" + port + ")" : label, std::move(modes), std::move(m)};
}

/// Polarizer as a unitary reroute: the blocked polarization at `port` is
/// swapped with the same polarization at the sink line, which stays
/// unmonitored and is summed over at measurement. Keeps the pre-measurement
/// pipeline pure-state while modelling absorption exactly.
inline ModeUnitary polarizer(const RegistryPtr& reg, const std::string& port, Polarization pass,
                             const std::string& sink) {
    const Polarization blocked = pass == Polarization::H ? Polarization::V : Polarization::H;
    Eigen::MatrixXcd m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    std::vector<int> modes = {reg->index_of(port, blocked), reg->index_of(sink, blocked)};
    return {"pol_" + std::string(1, pol_char(pass)) + "(" + port + ")", std::move(modes), std::move(m)};
}

/// Loss channel for detector efficiency eta: a splitter of amplitude
/// transmissivity sqrt(eta) into a fresh sink mode.
inline ModeUnitary loss_splitter(const RegistryPtr& reg, const std::string& spatial, Polarization pol,
                                 const std::string& sink_spatial, double eta) {
    if (eta <= 0.0 || eta > 1.0) throw std::invalid_argument("loss: efficiency must be in (0,1]");
    const double t = std::sqrt(eta);
    const double r = std::sqrt(1.0 - eta);
    Eigen::MatrixXcd m(2, 2);
    m << t, -r, r, t;
    std::vector<int> modes = {reg->index_of(spatial, pol), reg->index_of(sink_spatial, pol)};
    return {"loss(" + spatial + pol_char(pol) + ")", std::move(modes), std::move(m)};
}

}  // namespace telesim
