#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gaussian.hpp"
#include "operator_form.hpp"

namespace clonerlab {

// ---- components --------------------------------------------------------

struct Component {
    enum class Kind { beam_splitter, amplifier, qnd, coupler, displace, phase_rotation };
    enum class Quad { x, p };

    Kind kind;
    std::vector<ModeIndex> modes; // participating wires, in port order
    double param = 0.0;           // theta / gain / kappa / phi
    Quad quad = Quad::x;          // QND coupling quadrature
    complexd beta{0.0, 0.0};      // displacement amplitude
    Eigen::MatrixXd matrix;       // coupler port matrix (real orthogonal)
};

// A' = cos(theta) A + sin(theta) B, B' = -sin(theta) A + cos(theta) B
inline Component beam_splitter(double theta, ModeIndex a, ModeIndex b) {
    if (a == b) throw std::invalid_argument("beam splitter needs two distinct modes");
    return {Component::Kind::beam_splitter, {a, b}, theta, Component::Quad::x, {}, {}};
}

// phase-insensitive amplifier: A_s' = G A_s + sqrt(G^2-1) A_i^dag (and s <-> i)
inline Component amplifier(double gain, ModeIndex signal, ModeIndex idler) {
    if (gain < 1.0)
        throw std::invalid_argument(fmt::format("amplifier gain must be >= 1, got {}", gain));
    if (signal == idler) throw std::invalid_argument("amplifier needs two distinct modes");
    return {Component::Kind::amplifier, {signal, idler}, gain, Component::Quad::x, {}, {}};
}

// X-coupling: X_t' = X_t + kappa X_c, P_c' = P_c - kappa P_t (X_c, P_t kept).
// The P-coupling is the same interaction conjugated by a -pi/2 phase rotation
// on both modes: P_t' = P_t + kappa P_c, X_c' = X_c - kappa X_t.
inline Component qnd_coupling(double kappa, ModeIndex control, ModeIndex target,
                              Component::Quad quad) {
    if (control == target) throw std::invalid_argument("qnd coupling needs two distinct modes");
    return {Component::Kind::qnd, {control, target}, kappa, quad, {}, {}};
}

// multiport interferometer: out_r = sum_c matrix(r, c) * in_c on the listed wires
inline Component coupler(const Eigen::MatrixXd& matrix, const std::vector<ModeIndex>& modes) {
    if (matrix.rows() != matrix.cols() ||
        matrix.rows() != static_cast<Eigen::Index>(modes.size()))
        throw std::invalid_argument("coupler matrix must be square and match the port count");
    const double residual =
        (matrix * matrix.transpose() - Eigen::MatrixXd::Identity(matrix.rows(), matrix.rows()))
            .cwiseAbs()
            .maxCoeff();
    if (residual > 1e-10)
        throw std::invalid_argument(
            fmt::format("coupler matrix is not orthogonal (residual {:.3e})", residual));
    return {Component::Kind::coupler, modes, 0.0, Component::Quad::x, {}, matrix};
}

inline Component displace(complexd beta, ModeIndex mode) {
    return {Component::Kind::displace, {mode}, 0.0, Component::Quad::x, beta, {}};
}

// A' = exp(-i phi) A
inline Component phase_rotation(double phi, ModeIndex mode) {
    return {Component::Kind::phase_rotation, {mode}, phi, Component::Quad::x, {}, {}};
}

// ---- ladder-operator (Bogoliubov) picture ------------------------------

// A_j' = sum_k M(j,k) A_k + N(j,k) A_k^dag + c(j)
struct BogoliubovMap {
    Eigen::MatrixXcd M;
    Eigen::MatrixXcd N;
    Eigen::VectorXcd c;

    static BogoliubovMap identity(int n_modes) {
        return {Eigen::MatrixXcd::Identity(n_modes, n_modes),
                Eigen::MatrixXcd::Zero(n_modes, n_modes), Eigen::VectorXcd::Zero(n_modes)};
    }

    int n_modes() const { return static_cast<int>(M.rows()); }
};

inline BogoliubovMap compose(const BogoliubovMap& outer, const BogoliubovMap& inner) {
    return {outer.M * inner.M + outer.N * inner.N.conjugate(),
            outer.M * inner.N + outer.N * inner.M.conjugate(),
            outer.M * inner.c + outer.N * inner.c.conjugate() + outer.c};
}

inline OperatorLinearForm output_form(const BogoliubovMap& b, ModeIndex j) {
    OperatorLinearForm f(b.n_modes());
    f.a_coeffs = b.M.row(j).transpose();
    f.adag_coeffs = b.N.row(j).transpose();
    f.scalar = b.c[j];
    return f;
}

// deviation from [A_j', A_k'^dag] = delta_jk and [A_j', A_k'] = 0
inline double commutation_residual(const BogoliubovMap& b) {
    const int n = b.n_modes();
    const double r1 = (b.M * b.M.adjoint() - b.N * b.N.adjoint() -
                       Eigen::MatrixXcd::Identity(n, n))
                          .cwiseAbs()
                          .maxCoeff();
    const double r2 =
        (b.M * b.N.transpose() - b.N * b.M.transpose()).cwiseAbs().maxCoeff();
    return std::max(r1, r2);
}

// quadrature-picture map derived from the ladder picture (used to cross-check
// the independently composed quadrature map)
inline GaussianMap to_quadrature(const BogoliubovMap& b) {
    const int n = b.n_modes();
    GaussianMap g = GaussianMap::identity(n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            const complexd m = b.M(j, k);
            const complexd nn = b.N(j, k);
            g.S(2 * j, 2 * k) = m.real() + nn.real();
            g.S(2 * j, 2 * k + 1) = -m.imag() + nn.imag();
            g.S(2 * j + 1, 2 * k) = m.imag() + nn.imag();
            g.S(2 * j + 1, 2 * k + 1) = m.real() - nn.real();
        }
        g.d[2 * j] = kSqrt2 * b.c[j].real();
        g.d[2 * j + 1] = kSqrt2 * b.c[j].imag();
    }
    return g;
}

// ---- per-component maps (each picture written out by hand; the agreement
// of the two compilations is a tested invariant, not a construction) -------

inline GaussianMap component_quadrature_map(const Component& comp, int n_modes) {
    GaussianMap g = GaussianMap::identity(n_modes);
    auto x = [](ModeIndex m) { return 2 * m; };
    auto p = [](ModeIndex m) { return 2 * m + 1; };
    switch (comp.kind) {
        case Component::Kind::beam_splitter: {
            const ModeIndex a = comp.modes[0], b = comp.modes[1];
            const double c = std::cos(comp.param), s = std::sin(comp.param);
            g.S(x(a), x(a)) = c;
            g.S(x(a), x(b)) = s;
            g.S(x(b), x(a)) = -s;
            g.S(x(b), x(b)) = c;
            g.S(p(a), p(a)) = c;
            g.S(p(a), p(b)) = s;
            g.S(p(b), p(a)) = -s;
            g.S(p(b), p(b)) = c;
            break;
        }
        case Component::Kind::amplifier: {
            const ModeIndex s_m = comp.modes[0], i_m = comp.modes[1];
            const double gn = comp.param;
            const double gp = std::sqrt(gn * gn - 1.0);
            g.S(x(s_m), x(s_m)) = gn;
            g.S(x(s_m), x(i_m)) = gp;
            g.S(p(s_m), p(s_m)) = gn;
            g.S(p(s_m), p(i_m)) = -gp;
            g.S(x(i_m), x(i_m)) = gn;
            g.S(x(i_m), x(s_m)) = gp;
            g.S(p(i_m), p(i_m)) = gn;
            g.S(p(i_m), p(s_m)) = -gp;
            break;
        }
        case Component::Kind::qnd: {
            const ModeIndex c_m = comp.modes[0], t_m = comp.modes[1];
            const double k = comp.param;
            if (comp.quad == Component::Quad::x) {
                g.S(x(t_m), x(c_m)) = k;
                g.S(p(c_m), p(t_m)) = -k;
            } else {
                g.S(p(t_m), p(c_m)) = k;
                g.S(x(c_m), x(t_m)) = -k;
            }
            break;
        }
        case Component::Kind::coupler: {
            const int ports = static_cast<int>(comp.modes.size());
            for (int r = 0; r < ports; ++r)
                for (int c = 0; c < ports; ++c) {
                    const double u = comp.matrix(r, c);
                    g.S(x(comp.modes[r]), x(comp.modes[c])) = u;
                    g.S(p(comp.modes[r]), p(comp.modes[c])) = u;
                }
            break;
        }
        case Component::Kind::displace: {
            const ModeIndex m = comp.modes[0];
            g.d[x(m)] = kSqrt2 * comp.beta.real();
            g.d[p(m)] = kSqrt2 * comp.beta.imag();
            break;
        }
        case Component::Kind::phase_rotation: {
            const ModeIndex m = comp.modes[0];
            const double c = std::cos(comp.param), s = std::sin(comp.param);
            g.S(x(m), x(m)) = c;
            g.S(x(m), p(m)) = s;
            g.S(p(m), x(m)) = -s;
            g.S(p(m), p(m)) = c;
            break;
        }
    }
    return g;
}

inline BogoliubovMap component_ladder_map(const Component& comp, int n_modes) {
    BogoliubovMap b = BogoliubovMap::identity(n_modes);
    switch (comp.kind) {
        case Component::Kind::beam_splitter: {
            const ModeIndex am = comp.modes[0], bm = comp.modes[1];
            const double c = std::cos(comp.param), s = std::sin(comp.param);
            b.M(am, am) = c;
            b.M(am, bm) = s;
            b.M(bm, am) = -s;
            b.M(bm, bm) = c;
            break;
        }
        case Component::Kind::amplifier: {
            const ModeIndex s_m = comp.modes[0], i_m = comp.modes[1];
            const double gn = comp.param;
            const double gp = std::sqrt(gn * gn - 1.0);
            b.M(s_m, s_m) = gn;
            b.N(s_m, i_m) = gp;
            b.M(i_m, i_m) = gn;
            b.N(i_m, s_m) = gp;
            break;
        }
        case Component::Kind::qnd: {
            const ModeIndex c_m = comp.modes[0], t_m = comp.modes[1];
            const complexd half_k(0.5 * comp.param, 0.0);
            if (comp.quad == Component::Quad::x) {
                // control: A_c' = A_c - (k/2)(A_t - A_t^dag); target picks up X_c
                b.M(c_m, t_m) = -half_k;
                b.N(c_m, t_m) = half_k;
                b.M(t_m, c_m) = half_k;
                b.N(t_m, c_m) = half_k;
            } else {
                // control: A_c' = A_c - (k/2)(A_t + A_t^dag); target picks up P_c
                b.M(c_m, t_m) = -half_k;
                b.N(c_m, t_m) = -half_k;
                b.M(t_m, c_m) = half_k;
                b.N(t_m, c_m) = -half_k;
            }
            break;
        }
        case Component::Kind::coupler: {
            const int ports = static_cast<int>(comp.modes.size());
            for (int r = 0; r < ports; ++r)
                for (int c = 0; c < ports; ++c)
                    b.M(comp.modes[r], comp.modes[c]) = comp.matrix(r, c);
            break;
        }
        case Component::Kind::displace:
            b.c[comp.modes[0]] = comp.beta;
            break;
        case Component::Kind::phase_rotation: {
            const ModeIndex m = comp.modes[0];
            b.M(m, m) = std::exp(complexd(0.0, -comp.param));
            break;
        }
    }
    return b;
}

// ---- network ------------------------------------------------------------

struct Network {
    int n_modes = 0;
    std::vector<Component> components;
    std::map<std::string, ModeIndex> labels;

    void add(const Component& comp) {
        for (ModeIndex m : comp.modes)
            if (m < 0 || m >= n_modes)
                throw std::invalid_argument(
                    fmt::format("component touches mode {} outside register of {}", m, n_modes));
        components.push_back(comp);
    }

    ModeIndex mode(const std::string& label) const {
        auto it = labels.find(label);
        if (it == labels.end())
            throw std::invalid_argument(fmt::format("no mode labeled '{}'", label));
        return it->second;
    }

    GaussianMap quadrature_map() const {
        GaussianMap acc = GaussianMap::identity(n_modes);
        for (const auto& comp : components)
            acc = compose(component_quadrature_map(comp, n_modes), acc);
        return acc;
    }

    BogoliubovMap ladder_map() const {
        BogoliubovMap acc = BogoliubovMap::identity(n_modes);
        for (const auto& comp : components)
            acc = compose(component_ladder_map(comp, n_modes), acc);
        return acc;
    }

    OperatorLinearForm output_form(ModeIndex j) const { return clonerlab::output_form(ladder_map(), j); }

    // max elementwise disagreement between the two independently composed pictures
    double dual_representation_residual() const {
        const GaussianMap direct = quadrature_map();
        const GaussianMap via_ladder = to_quadrature(ladder_map());
        return std::max((direct.S - via_ladder.S).cwiseAbs().maxCoeff(),
                        (direct.d - via_ladder.d).cwiseAbs().maxCoeff());
    }
};

// ---- couplers with one pinned balanced column ---------------------------

// real orthogonal dim x dim matrix whose last column is all 1/sqrt(dim); the
// free columns are a Gram-Schmidt completion (variant 1 mixes them by a fixed
// rotation cascade to provide a genuinely different completion)
inline Eigen::MatrixXd balanced_column_completion(int dim, int variant = 0) {
    if (dim < 1) throw std::invalid_argument("coupler needs at least one port");
    const Eigen::VectorXd pinned = Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(double(dim)));
    std::vector<Eigen::VectorXd> free_cols;
    for (int s = 0; s < dim && static_cast<int>(free_cols.size()) < dim - 1; ++s) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, s);
        v -= pinned * pinned.dot(v);
        for (const auto& u : free_cols) v -= u * u.dot(v);
        const double norm = v.norm();
        if (norm > 1e-8) free_cols.push_back(v / norm);
    }
    if (variant != 0) {
        for (auto& u : free_cols) u = -u;
        for (size_t i = 0; i + 1 < free_cols.size(); ++i) {
            const double c = std::cos(0.7), s = std::sin(0.7);
            Eigen::VectorXd a = free_cols[i], b = free_cols[i + 1];
            free_cols[i] = c * a + s * b;
            free_cols[i + 1] = -s * a + c * b;
        }
    }
    Eigen::MatrixXd u(dim, dim);
    for (int j = 0; j + 1 < dim; ++j) u.col(j) = free_cols[j];
    u.col(dim - 1) = pinned;
    return u;
}

// balanced multiport splitter: the signal enters the last listed port and is
// distributed with amplitude 1/sqrt(ports) to every output
inline Component balanced_coupler(int ports, const std::vector<ModeIndex>& modes,
                                  int variant = 0) {
    if (ports < 2) throw std::invalid_argument("balanced coupler needs at least 2 ports");
    return coupler(balanced_column_completion(ports, variant), modes);
}

// ---- builders -----------------------------------------------------------

// 1 -> 2 cloner with tunable asymmetry: modes (S, S', I) = (0, 1, 2);
// produces A_S' = A_S + e^{-g}/sqrt2 (A_{S'} + A_I^dag),
//          A_{S'}' = A_S - e^{g}/sqrt2 (A_{S'} - A_I^dag),
//          A_I' = sqrt2 cosh(g) A_I - sqrt2 sinh(g) A_{S'}^dag + A_S^dag.
inline Network build_asymmetric_cloner(double gamma) {
    Network net;
    net.n_modes = 3;
    net.labels = {{"S", 0}, {"S'", 1}, {"I", 2}};
    const double theta1 = std::atan2(-kSqrt2 * std::sinh(gamma), 1.0);
    const double theta2 = std::atan2(-std::exp(gamma), std::exp(-gamma));
    net.add(beam_splitter(theta1, 0, 1));
    net.add(amplifier(kSqrt2 * std::cosh(gamma), 0, 2));
    net.add(phase_rotation(M_PI, 1));
    net.add(beam_splitter(theta2, 0, 1));
    return net;
}

enum class PartialLayout { two_qnd, four_qnd };

// cloner followed by the noise-readout stage: meter A records the X of the
// clone/anticlone difference, meter B the P of their sum. Modes
// (S, S', I, A, B) = (0..4). Both layouts yield the same output statistics;
// the meter record of the two-QND layout has the opposite sign.
inline Network build_partial_network(double gamma, double kappa,
                                     PartialLayout layout = PartialLayout::two_qnd) {
    if (kappa < 0.0)
        throw std::invalid_argument(fmt::format("coupling strength must be >= 0, got {}", kappa));
    Network net = build_asymmetric_cloner(gamma);
    net.n_modes = 5;
    net.labels["A"] = 3;
    net.labels["B"] = 4;
    if (layout == PartialLayout::two_qnd) {
        // rotate (S', I) so that wire S' carries the difference mode and wire I
        // the sum mode, tap each with a single QND meter, rotate back
        net.add(beam_splitter(-M_PI / 4.0, 1, 2));
        net.add(qnd_coupling(kSqrt2 * kappa, 1, 3, Component::Quad::x));
        net.add(qnd_coupling(kSqrt2 * kappa, 2, 4, Component::Quad::p));
        net.add(beam_splitter(M_PI / 4.0, 1, 2));
    } else {
        // four direct taps; this interleaving cancels the second-order
        // meter-on-meter contamination exactly
        net.add(qnd_coupling(-kappa, 1, 3, Component::Quad::x));
        net.add(qnd_coupling(kappa, 1, 4, Component::Quad::p));
        net.add(qnd_coupling(kappa, 2, 3, Component::Quad::x));
        net.add(qnd_coupling(kappa, 2, 4, Component::Quad::p));
    }
    return net;
}

// 1 -> M cloner that also leaves M-1 anticlones: modes are
// S = 0, I = 1, clone-split vacua 2..M, anticlone-split vacua M+1..2M-2.
// Output clones S_1..S_{M-1} sit on wires 2..M, S_M on wire 0; anticlones
// I_1 on wire 1, I_2..I_{M-1} on wires M+1..2M-2.
inline Network build_distributed_cloner(int clones, int completion_variant = 0) {
    if (clones < 2)
        throw std::invalid_argument(fmt::format("need at least 2 clones, got {}", clones));
    const int m = clones;
    Network net;
    net.n_modes = 2 * m - 1;
    net.labels["S"] = 0;
    net.labels["I"] = 1;
    net.add(amplifier(std::sqrt(double(m)), 0, 1));

    std::vector<ModeIndex> clone_ports;
    for (int k = 2; k <= m; ++k) clone_ports.push_back(k);
    clone_ports.push_back(0); // amplified signal enters the balanced (last) port
    net.add(balanced_coupler(m, clone_ports, completion_variant));
    for (int j = 1; j < m; ++j) net.labels[fmt::format("S_{}", j)] = j + 1;
    net.labels[fmt::format("S_{}", m)] = 0;

    if (m > 2) {
        std::vector<ModeIndex> anticlone_ports;
        for (int k = m + 1; k <= 2 * m - 2; ++k) anticlone_ports.push_back(k);
        anticlone_ports.push_back(1); // idler enters the balanced (last) port
        net.add(balanced_coupler(m - 1, anticlone_ports, completion_variant));
    }
    net.labels["I_1"] = 1;
    for (int l = 2; l < m; ++l) net.labels[fmt::format("I_{}", l)] = m + l - 1;
    return net;
}

} // namespace clonerlab
