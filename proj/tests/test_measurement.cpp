#include <catch2/catch_amalgamated.hpp>

#include <clonerlab/measurement.hpp>
#include <clonerlab/network.hpp>
#include <clonerlab/protocols.hpp>

#include <cmath>

using namespace clonerlab;

namespace {
constexpr double kTight = 1e-12;

// conditional state of `net` on `input` given fixed measurement outcomes
GaussianState condition_at(const Network& net, const GaussianState& input,
                           const std::vector<QuadratureForm>& measured,
                           const Eigen::VectorXd& outcomes) {
    GaussianState st = input;
    st = apply(net.quadrature_map(), st);
    for (size_t j = 0; j < measured.size(); ++j)
        st = condition_on(st, measured[j].coeffs, outcomes[static_cast<Eigen::Index>(j)]);
    return st;
}

} // namespace

TEST_CASE("quadrature brackets identify conjugate pairs") {
    const auto x = QuadratureForm::position(0, 2);
    const auto p = QuadratureForm::momentum(0, 2);
    const auto xm = QuadratureForm::position_difference(0, 1, 2);
    const auto pp = QuadratureForm::momentum_sum(0, 1, 2);
    REQUIRE(std::abs(quadrature_bracket(x.coeffs, p.coeffs) - 1.0) < kTight);
    REQUIRE(std::abs(quadrature_bracket(xm.coeffs, pp.coeffs)) < kTight);
}

TEST_CASE("conditioning a two-mode squeezed state shrinks the partner variance") {
    const double r = 0.9;
    Network net;
    net.n_modes = 2;
    net.add(amplifier(std::cosh(r), 0, 1));
    GaussianState st = GaussianState::vacuum(2);
    st = apply(net.quadrature_map(), st);
    REQUIRE(std::abs(st.cov(0, 0) - 0.5 * std::cosh(2.0 * r)) < kTight);
    REQUIRE(std::abs(st.cov(0, 2) - 0.5 * std::sinh(2.0 * r)) < kTight);

    const GaussianState post = condition_on(st, QuadratureForm::position(0, 2).coeffs, 0.4);
    REQUIRE(std::abs(post.cov(2, 2) - 0.5 / std::cosh(2.0 * r)) < kTight);
    // momentum of the partner is untouched by an X measurement
    REQUIRE(std::abs(post.cov(3, 3) - st.cov(3, 3)) < kTight);
}

TEST_CASE("re-measuring a collapsed quadrature returns the recorded outcome") {
    const GaussianState st = GaussianState::vacuum(1);
    RandomStream rng = RandomStream::derive(5, 0, 0);
    const auto x = QuadratureForm::position(0, 1);
    const auto [first, collapsed] = homodyne(st, x, rng);
    const auto [second, ignored] = homodyne(collapsed, x, rng);
    (void)ignored;
    REQUIRE(std::abs(first - second) < 1e-9);
}

TEST_CASE("homodyne outcomes on vacuum have variance one half") {
    const int n = 4000;
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < n; ++t) {
        const GaussianState st = GaussianState::vacuum(1);
        RandomStream rng = RandomStream::derive(11, static_cast<uint64_t>(t), 0);
        const double v = homodyne(st, QuadratureForm::position(0, 1), rng).first;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 5.0 * std::sqrt(0.5 / n));
    REQUIRE(std::abs(var - 0.5) < 10.0 * 0.5 * std::sqrt(2.0 / n));
}

TEST_CASE("bell measurement moments follow the displaced two-mode statistics") {
    const complexd alpha(1.2, -0.3);
    const int n = 4000;
    double sx = 0.0, sp = 0.0;
    for (int t = 0; t < n; ++t) {
        GaussianState st = GaussianState::vacuum(2);
        st.displace(0, alpha);
        RandomStream rng = RandomStream::derive(21, static_cast<uint64_t>(t), 0);
        const BellOutcome out = bell_measure(st, 0, 1, rng);
        sx += out.x_minus;
        sp += out.p_plus;
    }
    const double ex = std::sqrt(2.0) * alpha.real() / std::sqrt(2.0);
    const double ep = std::sqrt(2.0) * alpha.imag() / std::sqrt(2.0);
    REQUIRE(std::abs(sx / n - ex) < 5.0 / std::sqrt(double(n)));
    REQUIRE(std::abs(sp / n - ep) < 5.0 / std::sqrt(double(n)));
}

TEST_CASE("bell measurement requires two distinct modes") {
    GaussianState st = GaussianState::vacuum(2);
    RandomStream rng = RandomStream::derive(1, 0, 0);
    REQUIRE_THROWS_AS(bell_measure(st, 1, 1, rng), std::invalid_argument);
}

TEST_CASE("pulled-back quadratures reproduce output statistics on the input side") {
    const Network net = build_asymmetric_cloner(0.45);
    const GaussianState input = GaussianState::coherent({complexd(0.6, 0.1), {}, {}});
    GaussianState output = input;
    output = apply(net.quadrature_map(), output);

    for (const auto& q : {QuadratureForm::position(1, 3), QuadratureForm::momentum_sum(0, 2, 3)}) {
        const OperatorLinearForm back = pull_back(net, q);
        const double direct_mean = (q.coeffs.transpose() * output.mean).value();
        const double direct_var = (q.coeffs.transpose() * output.cov * q.coeffs).value();
        REQUIRE(std::abs(form_mean(back, input).real() - direct_mean) < kTight);
        REQUIRE(std::abs(form_covariance(back, back, input) - direct_var) < kTight);
    }
}

TEST_CASE("total reversal feedforward collapses the clone back onto the source operator") {
    for (double gamma : {0.0, 0.7, -0.4}) {
        const Network net = build_asymmetric_cloner(gamma);
        std::vector<QuadratureForm> measured = {
            QuadratureForm::position_difference(net.mode("S'"), net.mode("I"), 3, "x-"),
            QuadratureForm::momentum_sum(net.mode("S'"), net.mode("I"), 3, "p+")};
        Eigen::VectorXcd gains(2);
        gains << complexd(1.0, 0.0), complexd(0.0, 1.0);
        const OperatorLinearForm eff = effective_output_map(net, measured, gains, net.mode("S"));
        REQUIRE(eff.distance(OperatorLinearForm::annihilation(net.mode("S"), 3)) < kTight);
    }
}

TEST_CASE("non-commuting measurement requests carry both labels in the error") {
    const Network net = build_asymmetric_cloner(0.0);
    std::vector<QuadratureForm> measured = {QuadratureForm::position(0, 3, "first quad"),
                                            QuadratureForm::momentum(0, 3, "second quad")};
    Eigen::VectorXcd gains = Eigen::VectorXcd::Ones(2);
    try {
        effective_output_map(net, measured, gains, 1);
        FAIL("expected a NonCommutingMeasurement");
    } catch (const NonCommutingMeasurement& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("first quad") != std::string::npos);
        REQUIRE(msg.find("second quad") != std::string::npos);
    }
}

TEST_CASE("trajectory sampling matches the effective map moments exactly") {
    // The conditioned-and-displaced target mean is affine in the outcomes, so
    // the trajectory ensemble's first two moments can be assembled exactly and
    // must agree with the effective-map prediction.
    ProtocolConfig cfg;
    cfg.protocol = "partial";
    cfg.gamma = 0.3;
    cfg.kappa = 0.8;
    cfg.input = "coherent:0.7,-0.4";
    const ProtocolSetup s = setup_partial_reversal(cfg);
    const double gain = s.auto_gain;
    const Eigen::VectorXcd gains = gain * s.gain_pattern;
    const int m = static_cast<int>(s.measured.size());
    const int t = s.target;

    GaussianState out = s.input;
    out = apply(s.net.quadrature_map(), out);
    Eigen::VectorXd outcome_mean(m);
    Eigen::MatrixXd outcome_cov(m, m);
    for (int i = 0; i < m; ++i) {
        outcome_mean[i] = (s.measured[i].coeffs.transpose() * out.mean).value();
        for (int j = 0; j < m; ++j)
            outcome_cov(i, j) =
                (s.measured[i].coeffs.transpose() * out.cov * s.measured[j].coeffs).value();
    }

    auto target_mean_at = [&](const Eigen::VectorXd& outcomes) {
        GaussianState st = condition_at(s.net, s.input, s.measured, outcomes);
        complexd shift(0.0, 0.0);
        for (int j = 0; j < m; ++j) shift += gains[j] * outcomes[j];
        st.displace(t, shift);
        return Eigen::Vector2d(st.mean[2 * t], st.mean[2 * t + 1]);
    };

    const Eigen::Vector2d base = target_mean_at(Eigen::VectorXd::Zero(m));
    Eigen::MatrixXd slope(2, m);
    for (int j = 0; j < m; ++j)
        slope.col(j) = target_mean_at(Eigen::VectorXd::Unit(m, j)) - base;
    const GaussianState cond = condition_at(s.net, s.input, s.measured, outcome_mean);
    const Eigen::Matrix2d cond_cov = cond.cov.block<2, 2>(2 * t, 2 * t);

    const Eigen::Vector2d total_mean = base + slope * outcome_mean;
    const Eigen::Matrix2d total_cov = cond_cov + slope * outcome_cov * slope.transpose();

    const FormMoments pred = form_moments(protocol_effective_form(s, gain), s.input);
    REQUIRE((total_mean - pred.mean).norm() < 1e-9);
    REQUIRE((total_cov - pred.cov).norm() < 1e-9);

    // and a sampled trajectory lands on the affine law at its own outcomes
    const TrajectoryResult traj =
        run_conditional_trajectory(s.net, s.input, s.measured, gains, t, 31, 7);
    Eigen::VectorXd sampled(m);
    for (int j = 0; j < m; ++j) sampled[j] = traj.record.outcomes[static_cast<size_t>(j)];
    const Eigen::Vector2d expect_mean = base + slope * sampled;
    REQUIRE((Eigen::Vector2d(traj.state.mean[2 * t], traj.state.mean[2 * t + 1]) - expect_mean)
                .norm() < 1e-9);
    REQUIRE((traj.state.cov.block<2, 2>(2 * t, 2 * t) - cond_cov).norm() < 1e-9);
}

TEST_CASE("conditional covariance after reversal is independent of the input amplitude") {
    for (const char* protocol : {"reverse", "partial"}) {
        ProtocolConfig cfg;
        cfg.protocol = protocol;
        cfg.gamma = 0.5;
        cfg.kappa = 1.1;
        Eigen::MatrixXd covs[2];
        int idx = 0;
        for (const char* input : {"vacuum", "coherent:2.0,1.0"}) {
            cfg.input = input;
            const ProtocolSetup s = make_setup(cfg);
            const TrajectoryResult traj = run_conditional_trajectory(
                s.net, s.input, s.measured, s.auto_gain * s.gain_pattern, s.target, 13, 0);
            covs[idx++] = traj.state.cov;
        }
        REQUIRE((covs[0] - covs[1]).norm() < 1e-10);
    }
}
