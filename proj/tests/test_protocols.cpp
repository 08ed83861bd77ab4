#include <catch2/catch_amalgamated.hpp>

#include <clonerlab/protocols.hpp>

#include <cmath>
#include <cstdlib>

using namespace clonerlab;

TEST_CASE("closed-form clone fidelities at reference points") {
    const auto sym = closed_form_asymmetric(0.0);
    REQUIRE(std::abs(sym.clone_s - 2.0 / 3.0) < 1e-15);
    REQUIRE(std::abs(sym.clone_sp - 2.0 / 3.0) < 1e-15);

    const auto tilted = closed_form_asymmetric(0.5 * std::log(2.0));
    REQUIRE(std::abs(tilted.clone_s - 0.8) < 1e-15);
    REQUIRE(std::abs(tilted.clone_sp - 0.5) < 1e-15);
}

TEST_CASE("closed-form partial reversal at reference points") {
    const auto p = closed_form_partial(0.0, 1.0);
    REQUIRE(std::abs(p.clone_s - 0.8) < 1e-15);
    REQUIRE(std::abs(p.clone_sp - 0.5) < 1e-15);
    REQUIRE(std::abs(p.gamma_effective - 0.5 * std::log(2.0)) < 1e-15);
    REQUIRE(std::abs(p.gain - 0.5) < 1e-15);
    REQUIRE(std::abs(optimal_partial_gain(0.0, 1.0) - 0.5) < 1e-15);
}

TEST_CASE("closed-form distributed reversal at reference points") {
    const auto d = closed_form_distributed(5, 2);
    REQUIRE(std::abs(d.fidelity_before - 5.0 / 9.0) < 1e-15);
    REQUIRE(std::abs(d.fidelity_after - 0.6) < 1e-15);
    REQUIRE(std::abs(d.gain - 1.0 / 3.0) < 1e-15);
    REQUIRE(std::abs(d.chaotic_after - 2.0 / 3.0) < 1e-15);
    REQUIRE(std::abs(closed_form_distributed(4, 3).fidelity_after - 1.0) < 1e-15);
    REQUIRE(closed_form_distributed(4, 0).gain == 0.0);
}

TEST_CASE("distributed noise versus gain has its vertex at the closed-form gain") {
    for (int m : {2, 3, 5}) {
        for (int l = 1; l < m; ++l) {
            const double gopt = 1.0 / (m - l);
            REQUIRE(std::abs(distributed_noise_vs_gain(m, l, gopt) -
                             double(m - l - 1) / (m - l)) < 1e-14);
            REQUIRE(std::abs(distributed_noise_vs_gain(m, l, 0.0) - double(m - 1) / m) < 1e-14);
            const double eps = 1e-4;
            REQUIRE(distributed_noise_vs_gain(m, l, gopt + eps) >
                    distributed_noise_vs_gain(m, l, gopt));
            REQUIRE(distributed_noise_vs_gain(m, l, gopt - eps) >
                    distributed_noise_vs_gain(m, l, gopt));
        }
    }
}

TEST_CASE("input specification parsing accepts the four families and rejects noise") {
    REQUIRE(InputSpec::parse("vacuum").kind == InputSpec::Kind::vacuum);
    const InputSpec coh = InputSpec::parse("coherent:1.5,-0.25");
    REQUIRE(coh.alpha == complexd(1.5, -0.25));
    REQUIRE(InputSpec::parse("squeezed:1.0,0.3").r == 1.0);
    REQUIRE(InputSpec::parse("thermal:2").nbar == 2.0);

    for (const char* bad : {"", "coherent", "coherent:1", "coherent:1,2,3", "thermal:-1",
                            "thermal:abc", "fock:2", "coherent:1;2"})
        REQUIRE_THROWS_AS(InputSpec::parse(bad), std::invalid_argument);
}

TEST_CASE("configuration validation rejects out-of-range parameters") {
    ProtocolConfig cfg;
    cfg.protocol = "warp";
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.protocol = "distributed";
    cfg.clones = 1;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.clones = 3;
    cfg.collaborators = 3;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.collaborators = 2;
    cfg.gain = "fast";
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.gain = "0.25";
    REQUIRE(cfg.manual_gain() == 0.25);
    cfg.validate();
}

TEST_CASE("simulated clone fidelities trace the closed-form curve") {
    for (int i = 0; i <= 20; ++i) {
        const double gamma = -1.0 + 0.1 * i;
        ProtocolConfig cfg;
        cfg.protocol = "clone";
        cfg.gamma = gamma;
        const FidelityReport rep = run_protocol(cfg);
        const auto cf = closed_form_asymmetric(gamma);
        REQUIRE(std::abs(rep.fidelities.at("S") - cf.clone_s) < 1e-12);
        REQUIRE(std::abs(rep.fidelities.at("S'") - cf.clone_sp) < 1e-12);
        REQUIRE(std::abs(rep.chaotic_photons.at("S") - 0.5 * std::exp(-2.0 * gamma)) < 1e-12);
    }
}

TEST_CASE("partial reversal is equivalent to a cloner at the effective asymmetry") {
    for (double gamma : {-0.6, 0.0, 0.8}) {
        for (double kappa : {0.0, 0.7, 1.5}) {
            ProtocolConfig cfg;
            cfg.protocol = "partial";
            cfg.gamma = gamma;
            cfg.kappa = kappa;
            const FidelityReport rep = run_protocol(cfg);
            const double gprime = 0.5 * std::log(std::exp(2.0 * gamma) + kappa * kappa);
            const auto equiv = closed_form_asymmetric(gprime);
            REQUIRE(std::abs(rep.fidelities.at("S") - equiv.clone_s) < 1e-9);
            REQUIRE(std::abs(rep.fidelities.at("S'") - equiv.clone_sp) < 1e-9);
            REQUIRE(rep.gamma_effective.has_value());
            if (kappa > 0.0) REQUIRE(std::abs(*rep.gamma_effective - gprime) < 1e-9);
        }
    }
}

TEST_CASE("the two coupler layouts give identical fidelities") {
    for (double gamma : {-0.5, 0.0, 1.0}) {
        for (double kappa : {0.3, 1.0, 2.0}) {
            ProtocolConfig cfg;
            cfg.protocol = "partial";
            cfg.gamma = gamma;
            cfg.kappa = kappa;
            const FidelityReport two = run_protocol(cfg);
            cfg.four_qnd = true;
            const FidelityReport four = run_protocol(cfg);
            REQUIRE(std::abs(two.fidelities.at("S") - four.fidelities.at("S")) < 1e-12);
            REQUIRE(std::abs(two.fidelities.at("S'") - four.fidelities.at("S'")) < 1e-12);
        }
    }
}

TEST_CASE("partial reversal fidelity grows monotonically with the coupling") {
    double last = 0.0;
    for (double kappa = 0.0; kappa <= 3.01; kappa += 0.25) {
        ProtocolConfig cfg;
        cfg.protocol = "partial";
        cfg.kappa = kappa;
        const FidelityReport rep = run_protocol(cfg);
        const double f = rep.fidelities.at("S");
        if (kappa > 0.0) REQUIRE(f > last);
        last = f;
    }
    REQUIRE(last > 0.9);
}

TEST_CASE("distributed reversal matches the closed form for every collaboration size") {
    for (int m = 2; m <= 5; ++m) {
        for (int l = 0; l < m; ++l) {
            ProtocolConfig cfg;
            cfg.protocol = "distributed";
            cfg.clones = m;
            cfg.collaborators = l;
            const FidelityReport rep = run_protocol(cfg);
            const auto cf = closed_form_distributed(m, l);
            REQUIRE(std::abs(rep.fidelities.at(rep.target_label) - cf.fidelity_after) < 1e-9);
            if (l < m - 1) {
                const std::string bystander = fmt::format("S_{}", l + 1);
                REQUIRE(std::abs(rep.fidelities.at(bystander) - cf.fidelity_before) < 1e-9);
            }
        }
    }
}

TEST_CASE("distributed recovery is invariant under re-pairing the collaborators") {
    const int m = 4, l = 2;
    ProtocolConfig cfg;
    cfg.protocol = "distributed";
    cfg.clones = m;
    cfg.collaborators = l;
    const ProtocolSetup base = setup_distributed(cfg);
    const double gain = base.auto_gain;
    const FormMoments ref =
        form_moments(protocol_effective_form(base, gain), base.input);

    // pair clone S_j with a different anticlone and use other clone indices
    const std::vector<std::pair<int, int>> pairings = {{2, 2}, {3, 1}};
    std::vector<QuadratureForm> measured;
    Eigen::VectorXcd gains(2 * pairings.size());
    int gi = 0;
    for (const auto& [cj, al] : pairings) {
        const int cm = base.net.mode(fmt::format("S_{}", cj));
        const int am = base.net.mode(fmt::format("I_{}", al));
        measured.push_back(
            QuadratureForm::position_difference(cm, am, base.net.n_modes));
        gains[gi++] = complexd(gain, 0.0);
        measured.push_back(QuadratureForm::momentum_sum(cm, am, base.net.n_modes));
        gains[gi++] = complexd(0.0, gain);
    }
    const OperatorLinearForm eff =
        effective_output_map(base.net, measured, gains, base.target);
    const FormMoments alt = form_moments(eff, base.input);
    REQUIRE((ref.mean - alt.mean).norm() < 1e-10);
    REQUIRE((ref.cov - alt.cov).norm() < 1e-10);
}

TEST_CASE("swapping the coupler completion variant does not change any fidelity") {
    for (int m : {3, 5}) {
        for (int variant : {0, 1}) {
            const Network net = build_distributed_cloner(m, variant);
            const OperatorLinearForm f = net.output_form(net.mode(fmt::format("S_{}", m)));
            REQUIRE(std::abs(chaotic_photons(f, net.mode("S")) - double(m - 1) / m) < 1e-10);
        }
    }
}

TEST_CASE("fidelity versus gain follows the closed-form noise curve") {
    ProtocolConfig cfg;
    cfg.protocol = "distributed";
    cfg.clones = 3;
    cfg.collaborators = 1;
    const ProtocolSetup s = setup_distributed(cfg);
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(-0.2 + 1.4 * i / 40.0);
    const auto curve = fidelity_vs_gain_curve(s, grid);
    std::vector<double> noise;
    for (size_t i = 0; i < curve.size(); ++i) {
        const double expected = 1.0 / (1.0 + distributed_noise_vs_gain(3, 1, grid[i]));
        REQUIRE(std::abs(curve[i].fidelity - expected) < 1e-9);
        noise.push_back(1.0 / curve[i].fidelity - 1.0);
    }
    // the noise curve is a parabola in the gain: constant second differences
    const double dd0 = noise[2] - 2.0 * noise[1] + noise[0];
    REQUIRE(dd0 > 0.0);
    for (size_t i = 3; i < noise.size(); ++i)
        REQUIRE(std::abs(noise[i] - 2.0 * noise[i - 1] + noise[i - 2] - dd0) < 1e-9);

    REQUIRE_THROWS_AS(fidelity_vs_gain_curve(s, {}), std::invalid_argument);
}

TEST_CASE("numeric gain optimization agrees with the closed forms") {
    {
        ProtocolConfig cfg;
        cfg.protocol = "partial";
        cfg.gamma = -0.2;
        cfg.kappa = 1.4;
        const ProtocolSetup s = setup_partial_reversal(cfg);
        REQUIRE(std::abs(numeric_optimal_gain(s) - optimal_partial_gain(-0.2, 1.4)) < 1e-6);
    }
    for (int m : {2, 4}) {
        for (int l = 1; l < m; ++l) {
            ProtocolConfig cfg;
            cfg.protocol = "distributed";
            cfg.clones = m;
            cfg.collaborators = l;
            const ProtocolSetup s = setup_distributed(cfg);
            REQUIRE(std::abs(numeric_optimal_gain(s) - 1.0 / (m - l)) < 1e-6);
        }
    }
}

TEST_CASE("golden section minimizer locates a quadratic vertex") {
    const double x = golden_section_minimize([](double v) { return (v - 1.3) * (v - 1.3); },
                                             -2.0, 4.0);
    REQUIRE(std::abs(x - 1.3) < 1e-6);
    REQUIRE_THROWS_AS(golden_section_minimize([](double v) { return v; }, 2.0, 1.0),
                      std::invalid_argument);
}

TEST_CASE("gain applied to the record afterwards equals in-line feedforward") {
    ProtocolConfig cfg;
    cfg.protocol = "partial";
    cfg.gamma = 0.2;
    cfg.kappa = 0.9;
    cfg.input = "coherent:0.5,0.3";
    const ProtocolSetup s = setup_partial_reversal(cfg);
    const double gain = s.auto_gain;

    const TrajectoryResult live = run_conditional_trajectory(
        s.net, s.input, s.measured, gain * s.gain_pattern, s.target, 17, 3);
    TrajectoryResult after = run_conditional_trajectory(
        s.net, s.input, s.measured, Eigen::VectorXcd::Zero(s.gain_pattern.size()), s.target, 17,
        3);
    complexd shift(0.0, 0.0);
    for (Eigen::Index j = 0; j < s.gain_pattern.size(); ++j)
        shift += gain * s.gain_pattern[j] * after.record.outcomes[static_cast<size_t>(j)];
    after.state.displace(s.target, shift);

    REQUIRE((live.state.mean - after.state.mean).norm() < 1e-12);
    REQUIRE((live.state.cov - after.state.cov).norm() < 1e-12);
}

TEST_CASE("auto gains resolve to the closed-form values per protocol") {
    {
        ProtocolConfig cfg;
        cfg.protocol = "reverse";
        const ProtocolSetup s = setup_total_reversal(cfg);
        REQUIRE(resolve_gain(s, cfg) == 1.0);
    }
    {
        ProtocolConfig cfg;
        cfg.protocol = "partial";
        cfg.gamma = 0.4;
        cfg.kappa = 1.2;
        const ProtocolSetup s = setup_partial_reversal(cfg);
        REQUIRE(std::abs(resolve_gain(s, cfg) - optimal_partial_gain(0.4, 1.2)) < 1e-15);
        cfg.gain = "0.125";
        REQUIRE(resolve_gain(s, cfg) == 0.125);
    }
    {
        ProtocolConfig cfg;
        cfg.protocol = "distributed";
        cfg.clones = 5;
        cfg.collaborators = 0;
        const ProtocolSetup s = setup_distributed(cfg);
        REQUIRE(resolve_gain(s, cfg) == 0.0);
    }
}

TEST_CASE("a flipped feedforward sign leaves the known degraded fidelity") {
    // the deliberate-fault hook must produce this exact analytic value
    for (double gamma : {0.0, 0.7}) {
        ProtocolConfig cfg;
        cfg.protocol = "reverse";
        cfg.gamma = gamma;
        cfg.input = "coherent:1.0,0.5";
        const ProtocolSetup s = setup_total_reversal(cfg);
        const OperatorLinearForm wrong = protocol_effective_form(s, -1.0);
        const double nch = chaotic_photons(wrong, s.net.mode("S"));
        REQUIRE(std::abs(nch - 2.0 * std::exp(-2.0 * gamma)) < 1e-12);
        const FormMoments mom = form_moments(wrong, s.input);
        (void)mom;
    }
}

TEST_CASE("monte carlo estimates agree with the analytic clone fidelity") {
    ProtocolConfig cfg;
    cfg.protocol = "clone";
    cfg.gamma = 0.0;
    cfg.trials = 4000;
    cfg.seed = 5;
    const FidelityReport rep = run_protocol(cfg);
    REQUIRE(rep.mc_trials == 4000);
    for (const char* label : {"S", "S'"}) {
        REQUIRE(rep.mc_stderrs.at(label) > 0.0);
        REQUIRE(std::abs(rep.mc_fidelities.at(label) - 2.0 / 3.0) <
                5.0 * rep.mc_stderrs.at(label) + 0.02);
    }
}

TEST_CASE("monte carlo results are reproducible and worker-count independent") {
    ProtocolConfig cfg;
    cfg.protocol = "reverse";
    cfg.gamma = 0.5;
    cfg.trials = 512;
    cfg.seed = 123;
    cfg.input = "coherent:0.3,0.2";

    setenv("CLONER_LAB_THREADS", "1", 1);
    const FidelityReport serial = run_protocol(cfg);
    setenv("CLONER_LAB_THREADS", "4", 1);
    const FidelityReport parallel = run_protocol(cfg);
    unsetenv("CLONER_LAB_THREADS");

    REQUIRE(serial.mc_fidelities.at("S") == parallel.mc_fidelities.at("S"));
    REQUIRE(serial.mc_stderr == parallel.mc_stderr);
    REQUIRE(serial.trajectory_fidelity_mean == parallel.trajectory_fidelity_mean);
    REQUIRE(std::abs(serial.trajectory_fidelity_mean - 1.0) < 1e-9);
}

TEST_CASE("thermal and squeezed inputs keep no chaotic photon entry") {
    ProtocolConfig cfg;
    cfg.protocol = "clone";
    cfg.input = "thermal:2.0";
    const FidelityReport rep = run_protocol(cfg);
    REQUIRE(rep.chaotic_photons.empty());
    REQUIRE(rep.fidelities.at("S") < 1.0);
}
