#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "telesim/oracle.hpp"
#include "test_util.hpp"

using namespace telesim;

TEST_CASE("dense engine: identity unitary is the identity many-body matrix") {
    auto reg = testutil::small_registry(2, 4);
    auto basis = oracle::DenseBasis::make(reg);
    std::mt19937_64 rng(31);
    const FockState s = testutil::random_state(reg, 4, rng);
    const oracle::DenseState d = oracle::from_sparse(s, basis);
    const oracle::DenseState out =
        oracle::dense_apply(d, ModeUnitary{"id", {0, 1, 2, 3}, Eigen::MatrixXcd::Identity(4, 4)});
    CHECK((out.amps - d.amps).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dense engine: Hong-Ou-Mandel coincidence vanishes on the dense path too") {
    auto reg = testutil::small_registry(2, 4);
    const int aH = reg->index_of("1", Polarization::H);
    const int bH = reg->index_of("2", Polarization::H);
    auto basis = oracle::DenseBasis::make(reg);
    const FockState in = basis_state(reg, OccupationVector{}.with_count(aH, 1).with_count(bH, 1));
    const oracle::DenseState out = oracle::dense_apply(oracle::from_sparse(in, basis), bs_50_50(reg, "1", "2"));
    const auto coincidence = OccupationVector{}.with_count(aH, 1).with_count(bH, 1);
    CHECK(std::abs(out.amps(basis->index.at(coincidence.key()))) < 1e-10);
    CHECK(out.norm() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("dense engine handles a unitary with an eigenvalue at -1") {
    // the plain swap (polarizer reroute) has eigenvalues +1 and -1
    auto reg = RegistryBuilder{}.beam("a").single("s", Polarization::V).build(3);
    const ModeUnitary swap = polarizer(reg, "a", Polarization::H, "s");
    auto basis = oracle::DenseBasis::make(reg);
    const int aV = reg->index_of("a", Polarization::V);
    const int sV = reg->index_of("s", Polarization::V);
    const FockState in = basis_state(reg, OccupationVector{}.with_count(aV, 2));
    const oracle::DenseState out = oracle::dense_apply(oracle::from_sparse(in, basis), swap);
    CHECK(std::abs(out.amps(basis->index.at(OccupationVector{}.with_count(sV, 2).key()))) ==
          Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("sparse and dense engines agree on random applications") {
    oracle::VerifyOptions opt;
    opt.seed = 2025;
    opt.random_applications = 60;  // the full 200 runs in the acceptance suite
    std::ostringstream log;
    CHECK(oracle::verify_random_applications(opt, &log));
    INFO(log.str());
}

TEST_CASE("closed-form dense source matches the operator-built sparse source") {
    auto reg = RegistryBuilder{}.beam("1").beam("2").beam("3").beam("4").build(4);
    const PdcParams params{0.17, 2, {}};
    const FockState sparse = double_pass_source(reg, params);
    const oracle::DenseState dense = oracle::oracle_double_pass(oracle::DenseBasis::make(reg), params);
    for (std::size_t b = 0; b < dense.basis->occs.size(); ++b) {
        const Amplitude want = dense.amps(static_cast<Eigen::Index>(b));
        const Amplitude got = sparse.amplitude(OccupationVector::from_key(dense.basis->occs[b]));
        CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("oracle pattern probabilities: singlet behind crossed polarizers") {
    auto reg = RegistryBuilder{}
                   .beam("a")
                   .beam("b")
                   .single("sa", Polarization::V)
                   .single("sb", Polarization::H)
                   .build(4);
    auto basis = oracle::DenseBasis::make(reg);
    oracle::DenseState s = oracle::from_sparse(bell_state(reg, BellKind::PsiMinus, "a", "b"), basis);
    s = oracle::dense_apply(s, polarizer(reg, "a", Polarization::H, "sa"));
    s = oracle::dense_apply(s, polarizer(reg, "b", Polarization::V, "sb"));
    std::vector<DetectorPort> ports = {{"D1", {reg->index_of("a", Polarization::H)}, DetectorModel{}},
                                       {"D2", {reg->index_of("b", Polarization::V)}, DetectorModel{}}};
    FiringPattern p;
    p.required_fired = {"D1", "D2"};
    const auto outs = oracle::oracle_pattern_probability(s, p, ports, {});
    CHECK(outs.front().probability == Catch::Approx(0.5).margin(1e-10));
}

TEST_CASE("engines agree across the scenario grid") {
    oracle::VerifyOptions opt;
    std::ostringstream log;

    ScenarioConfig cfg;
    cfg.params = PdcParams{0.1, 2, {}};
    cfg.rot1 = {0.9, 2.2};
    CHECK(oracle::verify_scenario(cfg, opt, &log));

    cfg.scheme = Scheme::Innsbruck;
    CHECK(oracle::verify_scenario(cfg, opt, &log));

    cfg.scheme = Scheme::PnrTrigger;
    cfg.eta = 0.6;
    CHECK(oracle::verify_scenario(cfg, opt, &log));
    INFO(log.str());
}
