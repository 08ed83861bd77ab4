#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gaussian.hpp"
#include "network.hpp"
#include "random.hpp"

namespace clonerlab {

// real linear combination of output-register quadratures, c . (X1,P1,...,XN,PN)
struct QuadratureForm {
    Eigen::VectorXd coeffs;
    std::string label;

    int n_modes() const { return static_cast<int>(coeffs.size()) / 2; }

    static QuadratureForm position(ModeIndex k, int n_modes, std::string label = {}) {
        QuadratureForm q{Eigen::VectorXd::Zero(2 * n_modes), std::move(label)};
        q.coeffs[2 * k] = 1.0;
        return q;
    }

    static QuadratureForm momentum(ModeIndex k, int n_modes, std::string label = {}) {
        QuadratureForm q{Eigen::VectorXd::Zero(2 * n_modes), std::move(label)};
        q.coeffs[2 * k + 1] = 1.0;
        return q;
    }

    // (X_a - X_b)/sqrt2 and (P_a + P_b)/sqrt2, the commuting pair of a
    // two-mode joint quadrature measurement
    static QuadratureForm position_difference(ModeIndex a, ModeIndex b, int n_modes,
                                              std::string label = {}) {
        QuadratureForm q{Eigen::VectorXd::Zero(2 * n_modes), std::move(label)};
        q.coeffs[2 * a] = 1.0 / kSqrt2;
        q.coeffs[2 * b] = -1.0 / kSqrt2;
        return q;
    }

    static QuadratureForm momentum_sum(ModeIndex a, ModeIndex b, int n_modes,
                                       std::string label = {}) {
        QuadratureForm q{Eigen::VectorXd::Zero(2 * n_modes), std::move(label)};
        q.coeffs[2 * a + 1] = 1.0 / kSqrt2;
        q.coeffs[2 * b + 1] = 1.0 / kSqrt2;
        return q;
    }
};

// commutator [c1 . r, c2 . r] = i c1^T Omega c2; this is what must vanish for
// two quadrature forms to be jointly measurable
inline double quadrature_bracket(const Eigen::VectorXd& c1, const Eigen::VectorXd& c2) {
    const int n = static_cast<int>(c1.size()) / 2;
    return c1.dot(omega_matrix(n) * c2);
}

struct NonCommutingMeasurement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// pull an output-register quadrature form back through the network onto the
// input register, as an operator linear form (plus the feedthrough scalar)
inline OperatorLinearForm pull_back(const GaussianMap& map, const QuadratureForm& q) {
    const Eigen::VectorXd v = map.S.transpose() * q.coeffs;
    return form_from_quadrature(v, q.coeffs.dot(map.d));
}

inline OperatorLinearForm pull_back(const Network& net, const QuadratureForm& q) {
    return pull_back(net.quadrature_map(), q);
}

// ---- homodyne conditioning ----------------------------------------------

// condition a Gaussian state on (c . r) = outcome; standard Gaussian
// conditioning on a linear functional, with the covariance kept PSD and the
// collapsed direction recorded
inline GaussianState condition_on(const GaussianState& state, const Eigen::VectorXd& c,
                                  double outcome) {
    const double var = c.dot(state.cov * c);
    const double scale = std::max(1.0, state.cov.cwiseAbs().maxCoeff());
    GaussianState post = state;
    if (var <= 1e-13 * scale) {
        // already collapsed along c: measuring is a no-op
        return post;
    }
    const Eigen::VectorXd k = state.cov * c;
    post.mean += k * ((outcome - c.dot(state.mean)) / var);
    post.cov -= (k * k.transpose()) / var;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (post.cov + post.cov.transpose()));
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
    post.cov = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    post.collapsed.push_back(c / c.norm());
    return post;
}

// sample the outcome of measuring (c . r), then condition. A direction that
// is already collapsed yields its deterministic value.
inline std::pair<double, GaussianState> homodyne(const GaussianState& state,
                                                 const Eigen::VectorXd& c, RandomStream& rng) {
    const double var = c.dot(state.cov * c);
    const double mean = c.dot(state.mean);
    const double scale = std::max(1.0, state.cov.cwiseAbs().maxCoeff());
    const double outcome = (var <= 1e-13 * scale) ? mean : mean + std::sqrt(var) * rng.normal();
    return {outcome, condition_on(state, c, outcome)};
}

inline std::pair<double, GaussianState> homodyne(const GaussianState& state,
                                                 const QuadratureForm& form, RandomStream& rng) {
    return homodyne(state, form.coeffs, rng);
}

// joint (X_a - X_b)/sqrt2, (P_a + P_b)/sqrt2 measurement of two modes
struct BellOutcome {
    double x_minus;
    double p_plus;
    GaussianState post;
};

inline BellOutcome bell_measure(const GaussianState& state, ModeIndex a, ModeIndex b,
                                RandomStream& rng) {
    if (a == b) throw std::invalid_argument("bell measurement needs two distinct modes");
    const int n = state.n_modes();
    const auto qx = QuadratureForm::position_difference(a, b, n);
    const auto qp = QuadratureForm::momentum_sum(a, b, n);
    auto [x, st1] = homodyne(state, qx.coeffs, rng);
    auto [p, st2] = homodyne(st1, qp.coeffs, rng);
    return {x, p, std::move(st2)};
}

// ---- effective map of measure-and-displace protocols ---------------------

// Heisenberg-picture ladder form of the target mode after measuring the given
// output quadratures and displacing the target by sum_j gains[j] * outcome_j.
// Valid only when the measured forms mutually commute (checked here); the
// result is expressed over the input register.
inline OperatorLinearForm effective_output_map(const Network& net,
                                               const std::vector<QuadratureForm>& measured,
                                               const Eigen::VectorXcd& gains, ModeIndex target) {
    if (static_cast<Eigen::Index>(measured.size()) != gains.size())
        throw std::invalid_argument("one gain per measured quadrature required");
    const GaussianMap map = net.quadrature_map();
    std::vector<Eigen::VectorXd> pulled;
    pulled.reserve(measured.size());
    for (const auto& q : measured) pulled.push_back(map.S.transpose() * q.coeffs);
    for (size_t i = 0; i < pulled.size(); ++i)
        for (size_t j = i + 1; j < pulled.size(); ++j) {
            const double bracket = quadrature_bracket(pulled[i], pulled[j]);
            if (std::abs(bracket) > 1e-10)
                throw NonCommutingMeasurement(fmt::format(
                    "measured quadratures '{}' and '{}' do not commute (bracket {:.3e})",
                    measured[i].label.empty() ? std::to_string(i) : measured[i].label,
                    measured[j].label.empty() ? std::to_string(j) : measured[j].label, bracket));
        }
    OperatorLinearForm total = output_form(net.ladder_map(), target);
    for (size_t j = 0; j < measured.size(); ++j) {
        OperatorLinearForm piece = pull_back(map, measured[j]);
        piece *= gains[static_cast<Eigen::Index>(j)];
        total += piece;
    }
    return total;
}

// ---- sampled trajectories -------------------------------------------------

struct MeasurementRecord {
    std::vector<double> outcomes;
    std::vector<std::string> labels;
    uint64_t seed = 0;
    uint64_t trial = 0;
};

struct TrajectoryResult {
    GaussianState state;
    MeasurementRecord record;
    complexd displacement{0.0, 0.0};
};

// run one shot: propagate, measure each listed quadrature in order (one
// independent random stream per site), then displace the target by
// sum_j gains[j] * outcome_j
inline TrajectoryResult run_conditional_trajectory(const Network& net, const GaussianState& input,
                                                   const std::vector<QuadratureForm>& measured,
                                                   const Eigen::VectorXcd& gains, ModeIndex target,
                                                   uint64_t seed, uint64_t trial) {
    if (static_cast<Eigen::Index>(measured.size()) != gains.size())
        throw std::invalid_argument("one gain per measured quadrature required");
    TrajectoryResult result{apply(net.quadrature_map(), input), {{}, {}, seed, trial}, {}};
    complexd delta(0.0, 0.0);
    for (size_t j = 0; j < measured.size(); ++j) {
        RandomStream stream = RandomStream::derive(seed, trial, static_cast<uint64_t>(j));
        auto [outcome, post] = homodyne(result.state, measured[j].coeffs, stream);
        result.state = std::move(post);
        result.record.outcomes.push_back(outcome);
        result.record.labels.push_back(measured[j].label.empty() ? fmt::format("q{}", j)
                                                                 : measured[j].label);
        delta += gains[static_cast<Eigen::Index>(j)] * outcome;
    }
    if (!measured.empty()) result.state.displace(target, delta);
    result.displacement = delta;
    return result;
}

} // namespace clonerlab
