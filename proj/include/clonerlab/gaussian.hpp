#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "operator_form.hpp"

namespace clonerlab {

// Quadrature ordering is (X_1, P_1, ..., X_N, P_N); vacuum covariance is I/2.

// Symplectic form with 2x2 blocks [[0, 1], [-1, 0]] on the diagonal.
inline Eigen::MatrixXd omega_matrix(int n_modes) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (int k = 0; k < n_modes; ++k) {
        w(2 * k, 2 * k + 1) = 1.0;
        w(2 * k + 1, 2 * k) = -1.0;
    }
    return w;
}

// Affine quadrature map r -> S r + d.
struct GaussianMap {
    Eigen::MatrixXd S;
    Eigen::VectorXd d;

    static GaussianMap identity(int n_modes) {
        return {Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes),
                Eigen::VectorXd::Zero(2 * n_modes)};
    }

    int n_modes() const { return static_cast<int>(S.rows()) / 2; }

    GaussianMap inverse() const {
        const Eigen::MatrixXd w = omega_matrix(n_modes());
        Eigen::MatrixXd s_inv = -w * S.transpose() * w;
        return {s_inv, -s_inv * d};
    }
};

// outer after inner (composition in circuit order: inner acts first)
inline GaussianMap compose(const GaussianMap& outer, const GaussianMap& inner) {
    if (outer.S.rows() != inner.S.rows())
        throw std::invalid_argument(fmt::format("cannot compose maps on {} and {} modes",
                                                outer.n_modes(), inner.n_modes()));
    return {outer.S * inner.S, outer.S * inner.d + outer.d};
}

inline double symplectic_residual(const GaussianMap& m) {
    const Eigen::MatrixXd w = omega_matrix(m.n_modes());
    return (m.S * w * m.S.transpose() - w).cwiseAbs().maxCoeff();
}

struct GaussianState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    // directions (covectors c, meaning the observable c^T r) measured to zero
    // variance by homodyne conditioning
    std::vector<Eigen::VectorXd> collapsed;

    int n_modes() const { return static_cast<int>(mean.size()) / 2; }

    static GaussianState vacuum(int n_modes) {
        if (n_modes <= 0) throw std::invalid_argument("state needs at least one mode");
        return {Eigen::VectorXd::Zero(2 * n_modes),
                0.5 * Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes),
                {}};
    }

    static GaussianState coherent(const std::vector<complexd>& alphas) {
        GaussianState st = vacuum(static_cast<int>(alphas.size()));
        for (int k = 0; k < st.n_modes(); ++k) {
            st.mean[2 * k] = kSqrt2 * alphas[k].real();
            st.mean[2 * k + 1] = kSqrt2 * alphas[k].imag();
        }
        return st;
    }

    static GaussianState thermal(double nbar, int n_modes) {
        if (nbar < 0.0)
            throw std::invalid_argument(fmt::format("thermal occupation must be >= 0, got {}", nbar));
        GaussianState st = vacuum(n_modes);
        st.cov *= (2.0 * nbar + 1.0);
        return st;
    }

    // single-mode squeezed vacuum; r > 0 squeezes X at angle = 0
    static GaussianState squeezed(double r, double angle) {
        GaussianState st = vacuum(1);
        Eigen::Matrix2d rot;
        rot << std::cos(angle), std::sin(angle), -std::sin(angle), std::cos(angle);
        Eigen::Matrix2d v = Eigen::Vector2d(std::exp(-2.0 * r), std::exp(2.0 * r)).asDiagonal();
        st.cov = 0.5 * rot * v * rot.transpose();
        return st;
    }

    void check_mode(ModeIndex k) const {
        if (k < 0 || k >= n_modes())
            throw std::invalid_argument(
                fmt::format("mode index {} out of range for {} modes", k, n_modes()));
    }

    // overwrite the marginal of mode k (valid when k is uncorrelated with the
    // rest, e.g. when preparing product inputs)
    void set_mode(ModeIndex k, const Eigen::Vector2d& m, const Eigen::Matrix2d& v) {
        check_mode(k);
        mean.segment<2>(2 * k) = m;
        cov.block<2, 2>(2 * k, 2 * k) = v;
    }

    void set_mode(ModeIndex k, const GaussianState& single) {
        if (single.n_modes() != 1)
            throw std::invalid_argument("set_mode expects a single-mode state");
        set_mode(k, single.mean.head<2>(), single.cov.topLeftCorner<2, 2>());
    }

    std::pair<Eigen::Vector2d, Eigen::Matrix2d> marginal(ModeIndex k) const {
        check_mode(k);
        return {mean.segment<2>(2 * k), cov.block<2, 2>(2 * k, 2 * k)};
    }

    // displace mode k by the complex amplitude delta: X += sqrt2 Re, P += sqrt2 Im
    void displace(ModeIndex k, complexd delta) {
        check_mode(k);
        mean[2 * k] += kSqrt2 * delta.real();
        mean[2 * k + 1] += kSqrt2 * delta.imag();
    }
};

// largest violation of cov + (i/2) Omega >= 0 (0 for a physical covariance)
inline double covariance_violation(const Eigen::MatrixXd& cov) {
    const int n = static_cast<int>(cov.rows()) / 2;
    Eigen::MatrixXcd m = cov.cast<complexd>() +
                         complexd(0.0, 0.5) * omega_matrix(n).cast<complexd>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    const double lo = es.eigenvalues().minCoeff();
    const double sym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
    return std::max(sym, lo < 0.0 ? -lo : 0.0);
}

inline GaussianState apply(const GaussianMap& map, const GaussianState& st) {
    if (map.n_modes() != st.n_modes())
        throw std::invalid_argument(fmt::format("map on {} modes applied to {}-mode state",
                                                map.n_modes(), st.n_modes()));
    GaussianState out;
    out.mean = map.S * st.mean + map.d;
    out.cov = map.S * st.cov * map.S.transpose();
    const Eigen::MatrixXd s_inv_t = map.inverse().S.transpose();
    for (const auto& c : st.collapsed) out.collapsed.push_back(s_inv_t * c);
    return out;
}

// ---- bridging between the ladder-operator picture and the quadrature picture

// f = v^T r + scalar with v[2k] = (a_k + b_k)/sqrt2, v[2k+1] = i (a_k - b_k)/sqrt2
inline std::pair<Eigen::VectorXcd, complexd> quadrature_vector(const OperatorLinearForm& f) {
    const int n = f.n_modes();
    Eigen::VectorXcd v(2 * n);
    for (int k = 0; k < n; ++k) {
        v[2 * k] = (f.a_coeffs[k] + f.adag_coeffs[k]) / kSqrt2;
        v[2 * k + 1] = kImag * (f.a_coeffs[k] - f.adag_coeffs[k]) / kSqrt2;
    }
    return {v, f.scalar};
}

inline std::pair<Eigen::VectorXd, double>
real_quadrature_vector(const OperatorLinearForm& f, double tol = 1e-10) {
    auto [v, s] = quadrature_vector(f);
    const double imag_norm = std::max(v.imag().cwiseAbs().maxCoeff(), std::abs(s.imag()));
    if (imag_norm > tol)
        throw std::invalid_argument(
            fmt::format("form is not Hermitian (imaginary residue {:.3e})", imag_norm));
    return {v.real(), s.real()};
}

// inverse of quadrature_vector for a real (Hermitian) quadrature combination
inline OperatorLinearForm form_from_quadrature(const Eigen::VectorXd& v, double scalar = 0.0) {
    const int n = static_cast<int>(v.size()) / 2;
    OperatorLinearForm f(n);
    for (int k = 0; k < n; ++k) {
        f.a_coeffs[k] = complexd(v[2 * k], -v[2 * k + 1]) / kSqrt2;
        f.adag_coeffs[k] = complexd(v[2 * k], v[2 * k + 1]) / kSqrt2;
    }
    f.scalar = scalar;
    return f;
}

inline complexd form_mean(const OperatorLinearForm& f, const GaussianState& st) {
    auto [v, s] = quadrature_vector(f);
    return (v.transpose() * st.mean.cast<complexd>()).value() + s;
}

// symmetrized covariance of two Hermitian forms
inline double form_covariance(const OperatorLinearForm& f, const OperatorLinearForm& g,
                              const GaussianState& st) {
    auto [vf, sf] = real_quadrature_vector(f);
    auto [vg, sg] = real_quadrature_vector(g);
    (void)sf;
    (void)sg;
    return (vf.transpose() * st.cov * vg).value();
}

// ---- fidelities

inline void check_single_mode_cov(const Eigen::Matrix2d& v, double tol = 1e-9) {
    Eigen::Matrix2cd m = v.cast<complexd>();
    m(0, 1) += complexd(0.0, 0.5);
    m(1, 0) -= complexd(0.0, 0.5);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(m);
    const double sym = std::abs(v(0, 1) - v(1, 0));
    if (sym > tol || es.eigenvalues().minCoeff() < -tol)
        throw std::invalid_argument(fmt::format(
            "invalid covariance matrix [[{}, {}], [{}, {}]]", v(0, 0), v(0, 1), v(1, 0), v(1, 1)));
}

// overlap <alpha| rho |alpha> of a coherent state with the Gaussian (mean, cov)
inline double fidelity_to_coherent(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                                   complexd alpha) {
    check_single_mode_cov(cov);
    const Eigen::Vector2d target(kSqrt2 * alpha.real(), kSqrt2 * alpha.imag());
    const Eigen::Vector2d delta = mean - target;
    const Eigen::Matrix2d sum = cov + 0.5 * Eigen::Matrix2d::Identity();
    const double det = sum.determinant();
    return std::exp(-0.5 * delta.dot(sum.inverse() * delta)) / std::sqrt(det);
}

inline double fidelity_to_coherent(const GaussianState& st, ModeIndex k, complexd alpha) {
    auto [m, v] = st.marginal(k);
    return fidelity_to_coherent(m, v, alpha);
}

// Uhlmann fidelity formula without covariance validation; useful for noisy
// moment estimates that may sit slightly outside the physical set
inline double gaussian_fidelity_raw(const Eigen::Vector2d& mean1, const Eigen::Matrix2d& cov1,
                                    const Eigen::Vector2d& mean2, const Eigen::Matrix2d& cov2) {
    const Eigen::Matrix2d sum = cov1 + cov2;
    const Eigen::Vector2d delta = mean1 - mean2;
    const double big_delta = sum.determinant();
    const double lambda =
        std::max(0.0, (4.0 * cov1.determinant() - 1.0) * (4.0 * cov2.determinant() - 1.0) / 4.0);
    const double denom = std::sqrt(big_delta + lambda) - std::sqrt(lambda);
    return std::exp(-0.5 * delta.dot(sum.inverse() * delta)) / denom;
}

// Uhlmann fidelity of two single-mode Gaussian states (squared-overlap
// convention: equals <psi|rho|psi> when one state is pure).
inline double gaussian_fidelity(const Eigen::Vector2d& mean1, const Eigen::Matrix2d& cov1,
                                const Eigen::Vector2d& mean2, const Eigen::Matrix2d& cov2) {
    check_single_mode_cov(cov1);
    check_single_mode_cov(cov2);
    return gaussian_fidelity_raw(mean1, cov1, mean2, cov2);
}

// fidelity of mode k of `st` to the single-mode reference state
inline double fidelity_to_state(const GaussianState& st, ModeIndex k, const GaussianState& ref) {
    if (ref.n_modes() != 1)
        throw std::invalid_argument("reference must be a single-mode state");
    auto [m, v] = st.marginal(k);
    return gaussian_fidelity(ref.mean.head<2>(), ref.cov.topLeftCorner<2, 2>(), m, v);
}

struct NotUnityGain : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mean number of added noise photons carried by a unity-gain output form over
// vacuum ancillas; the fidelity to the transmitted coherent state is then
// 1/(1 + n_ch).
inline double chaotic_photons(const OperatorLinearForm& f, ModeIndex signal, double tol = 1e-9) {
    if (signal < 0 || signal >= f.n_modes())
        throw std::invalid_argument(
            fmt::format("mode index {} out of range for {} modes", signal, f.n_modes()));
    const double gain_err =
        std::max({std::abs(f.a_coeffs[signal] - 1.0), std::abs(f.adag_coeffs[signal]),
                  std::abs(f.scalar)});
    if (gain_err > tol)
        throw NotUnityGain(fmt::format(
            "form does not preserve the signal at unit gain (residual {:.3e})", gain_err));
    double sum = 0.0;
    for (int k = 0; k < f.n_modes(); ++k) {
        if (k != signal) sum += std::norm(f.a_coeffs[k]);
        sum += std::norm(f.adag_coeffs[k]);
    }
    return 0.5 * sum;
}

} // namespace clonerlab
