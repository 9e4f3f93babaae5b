#include <catch2/catch_amalgamated.hpp>

#include "telesim/detection.hpp"
#include "telesim/linear_optics.hpp"
#include "test_util.hpp"

using namespace telesim;

namespace {

/// Singlet already sitting on the two analysis ports, with P_H before D1
/// and P_V before D2.
struct PolarizedAnalyzer {
    RegistryPtr reg;
    FockState state;
    std::vector<DetectorPort> ports;
    std::vector<int> output_modes;

    explicit PolarizedAnalyzer(double eta = 1.0)
        : reg(RegistryBuilder{}
                  .beam("a")
                  .beam("b")
                  .beam("out")
                  .single("sa", Polarization::V)
                  .single("sb", Polarization::H)
                  .build(4)),
          state(FockState::vacuum(reg)) {
        state = bell_state(reg, BellKind::PsiMinus, "a", "b");
        state = apply_unitary(state, polarizer(reg, "a", Polarization::H, "sa"));
        state = apply_unitary(state, polarizer(reg, "b", Polarization::V, "sb"));
        const DetectorModel model{DetectorKind::Threshold, eta};
        ports = {{"D1", {reg->index_of("a", Polarization::H)}, model},
                 {"D2", {reg->index_of("b", Polarization::V)}, model}};
        output_modes = {reg->index_of("out", Polarization::H), reg->index_of("out", Polarization::V)};
    }
};

}  // namespace

TEST_CASE("vacuum gives zero probability to any fired requirement") {
    PolarizedAnalyzer setup;
    FiringPattern p;
    p.required_fired = {"D1"};
    const auto outs = pattern_probability(FockState::vacuum(setup.reg), p, setup.ports, setup.output_modes);
    REQUIRE(outs.size() == 1);
    CHECK(outs.front().probability == 0.0);
    CHECK(outs.front().peak_amplitude == 0.0);
}

TEST_CASE("singlet behind crossed polarizers coincides half the time") {
    PolarizedAnalyzer setup;
    FiringPattern p;
    p.required_fired = {"D1", "D2"};
    const auto outs = pattern_probability(setup.state, p, setup.ports, setup.output_modes);
    REQUIRE(outs.size() == 1);
    CHECK(outs.front().probability == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("exactly-one-of groups yield one outcome per branch") {
    auto reg = RegistryBuilder{}.beam("a").beam("b").beam("out").build(2);
    const FockState plus = qubit_to_fock(reg, {std::numbers::pi / 4, 0.0}, "a");
    const DetectorModel model{};
    std::vector<DetectorPort> ports = {
        {"DH", {reg->index_of("a", Polarization::H)}, model},
        {"DV", {reg->index_of("a", Polarization::V)}, model},
    };
    FiringPattern p;
    p.exactly_one_of = {{"DH", "DV"}};
    const auto outs = pattern_probability(
        plus, p, ports, {reg->index_of("out", Polarization::H), reg->index_of("out", Polarization::V)});
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].branch == "DH");
    CHECK(outs[1].branch == "DV");
    CHECK(outs[0].probability == Catch::Approx(0.5).margin(1e-12));
    CHECK(outs[1].probability == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("pattern validation") {
    PolarizedAnalyzer setup;
    FiringPattern unknown;
    unknown.required_fired = {"Dx"};
    CHECK_THROWS_AS(pattern_probability(setup.state, unknown, setup.ports, setup.output_modes),
                    std::invalid_argument);

    FiringPattern clash;
    clash.required_fired = {"D1"};
    clash.required_silent = {"D1"};
    CHECK_THROWS_AS(pattern_probability(setup.state, clash, setup.ports, setup.output_modes),
                    std::invalid_argument);

    std::vector<DetectorPort> duplicated = setup.ports;
    duplicated.push_back({"D1", {0}, DetectorModel{}});
    CHECK_THROWS_AS(pattern_probability(setup.state, FiringPattern{}, duplicated, setup.output_modes),
                    std::invalid_argument);
}

TEST_CASE("completeness: exclusive firing outcomes sum to one") {
    auto reg = RegistryBuilder{}.beam("a").beam("b").build(4);
    std::mt19937_64 rng(17);
    const FockState s = testutil::random_state(reg, 4, rng);
    const DetectorModel model{};
    std::vector<DetectorPort> ports = {
        {"A", {reg->index_of("a", Polarization::H), reg->index_of("a", Polarization::V)}, model},
        {"B", {reg->index_of("b", Polarization::H), reg->index_of("b", Polarization::V)}, model},
    };
    double total = 0.0;
    for (int mask = 0; mask < 4; ++mask) {
        FiringPattern p;
        (mask & 1 ? p.required_fired : p.required_silent).push_back("A");
        (mask & 2 ? p.required_fired : p.required_silent).push_back("B");
        total += pattern_probability(s, p, ports, {}).front().probability;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("conditional states are Hermitian, positive and normalized") {
    PolarizedAnalyzer setup;
    auto reg = setup.reg;
    FockState s = bell_state(reg, BellKind::PsiPlus, "a", "out");
    s = apply_unitary(s, polarizer(reg, "a", Polarization::H, "sa"));
    FiringPattern p;
    p.required_fired = {"D1"};
    const auto outs = pattern_probability(s, p, setup.ports, setup.output_modes);
    REQUIRE(outs.front().probability > 0.0);
    const DensityOperator& rho = outs.front().conditional;
    CHECK(rho.trace() == Catch::Approx(1.0).margin(1e-12));
    CHECK(rho.hermiticity_defect() < 1e-12);
    CHECK(rho.min_eigenvalue() > -1e-10);
}

TEST_CASE("threshold and number-resolving agree at single occupancy") {
    auto reg = RegistryBuilder{}.beam("a").beam("b").build(2);
    const FockState s = bell_state(reg, BellKind::PsiMinus, "a", "b");
    for (int use_nr = 0; use_nr < 2; ++use_nr) {
        const DetectorModel model{use_nr ? DetectorKind::NumberResolving : DetectorKind::Threshold, 1.0};
        std::vector<DetectorPort> ports = {
            {"A", {reg->index_of("a", Polarization::H), reg->index_of("a", Polarization::V)}, model},
            {"B", {reg->index_of("b", Polarization::H), reg->index_of("b", Polarization::V)}, model},
        };
        FiringPattern p;
        p.required_fired = {"A", "B"};
        CHECK(pattern_probability(s, p, ports, {}).front().probability == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("number-resolving ports reject bunched arrivals") {
    auto reg = RegistryBuilder{}.beam("a").build(2);
    const int aH = reg->index_of("a", Polarization::H);
    const FockState two = basis_state(reg, OccupationVector{}.with_count(aH, 2));
    std::vector<DetectorPort> ports = {
        {"A", {aH, reg->index_of("a", Polarization::V)}, DetectorModel{DetectorKind::NumberResolving, 1.0}}};
    FiringPattern p;
    p.required_fired = {"A"};
    CHECK(pattern_probability(two, p, ports, {}).front().probability == 0.0);
}

TEST_CASE("reduced density operators") {
    auto reg = RegistryBuilder{}.beam("a").beam("b").build(4);
    const std::vector<int> beam_a = {reg->index_of("a", Polarization::H), reg->index_of("a", Polarization::V)};

    SECTION("marginal of a product state is pure") {
        FockState s = qubit_to_fock(reg, {0.3, 0.9}, "a");
        FockState other = qubit_to_fock(reg, {1.0, 0.2}, "b");
        FockState prod(reg);
        for (const auto& [ka, va] : s.terms())
            for (const auto& [kb, vb] : other.terms()) prod.accumulate(ka | kb, va * vb);
        const DensityOperator rho = reduced_density(prod, beam_a);
        CHECK(rho.trace() == Catch::Approx(1.0).margin(1e-12));
        const double purity = (rho.matrix() * rho.matrix()).trace().real();
        CHECK(purity == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("half of a singlet is maximally mixed") {
        const DensityOperator rho = reduced_density(bell_state(reg, BellKind::PsiMinus, "a", "b"), beam_a);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.matrix());
        int half_count = 0;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            if (std::abs(es.eigenvalues()(i) - 0.5) < 1e-12) ++half_count;
            CHECK(es.eigenvalues()(i) > -1e-12);
        }
        CHECK(half_count == 2);
    }
    SECTION("trace equals the squared norm") {
        std::mt19937_64 rng(23);
        const FockState s = testutil::random_state(reg, 3, rng).scaled({0.6, 0.0});
        CHECK(reduced_density(s, beam_a).trace() == Catch::Approx(s.norm2()).margin(1e-12));
    }
}

TEST_CASE("fidelity record") {
    auto reg = RegistryBuilder{}.beam("a").beam("out").build(2);
    const std::vector<int> out_modes = {reg->index_of("out", Polarization::H),
                                        reg->index_of("out", Polarization::V)};
    const QubitPolarizationState chi{0.7, 1.9};

    SECTION("pure matching single photon gives raw 1") {
        const DensityOperator rho = reduced_density(qubit_to_fock(reg, chi, "out"), out_modes);
        const FidelityRecord rec = fidelity(rho, chi);
        CHECK(rec.raw == Catch::Approx(1.0).margin(1e-12));
        CHECK(rec.single_photon_weight == Catch::Approx(1.0).margin(1e-12));
        CHECK(rec.vacuum_weight == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("vacuum scores zero with full vacuum weight") {
        const DensityOperator rho = reduced_density(FockState::vacuum(reg), out_modes);
        const FidelityRecord rec = fidelity(rho, chi);
        CHECK(rec.raw == 0.0);
        CHECK(rec.vacuum_weight == Catch::Approx(1.0).margin(1e-15));
    }
    SECTION("maximally mixed single photon scores one half for any target") {
        const DensityOperator rho = reduced_density(bell_state(reg, BellKind::PsiMinus, "a", "out"), out_modes);
        for (const QubitPolarizationState t : {QubitPolarizationState{0.0, 0.0}, chi})
            CHECK(fidelity(rho, t).raw == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("non-unit trace is rejected") {
        const DensityOperator rho = reduced_density(qubit_to_fock(reg, chi, "out").scaled({0.5, 0.0}), out_modes);
        CHECK_THROWS_AS(fidelity(rho, chi), std::invalid_argument);
    }
}

TEST_CASE("efficiency scaling on a heralded pair") {
    const double eta = 0.6;
    auto reg = RegistryBuilder{}
                   .beam("a")
                   .beam("b")
                   .single("ka", Polarization::H)
                   .single("kb", Polarization::V)
                   .build(2);
    const int aH = reg->index_of("a", Polarization::H);
    const int bV = reg->index_of("b", Polarization::V);
    FockState s = basis_state(reg, OccupationVector{}.with_count(aH, 1).with_count(bV, 1));
    s = apply_unitary(s, loss_splitter(reg, "a", Polarization::H, "ka", eta));
    s = apply_unitary(s, loss_splitter(reg, "b", Polarization::V, "kb", eta));
    std::vector<DetectorPort> ports = {{"A", {aH}, DetectorModel{DetectorKind::Threshold, eta}},
                                       {"B", {bV}, DetectorModel{DetectorKind::Threshold, eta}}};
    FiringPattern p;
    p.required_fired = {"A", "B"};
    CHECK(pattern_probability(s, p, ports, {}).front().probability == Catch::Approx(eta * eta).margin(1e-12));
}
