#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "network.hpp"

namespace clonerlab {

// Truncated Fock-space state vector used as an independent brute-force check
// of the Gaussian engine. Flat indexing puts mode 0 in the most significant
// digit: index = ((n_0 * d) + n_1) * d + n_2 ... with d = cutoff + 1.
struct FockVector {
    int n_modes = 0;
    int cutoff = 0;
    Eigen::VectorXcd amp;

    int dim() const { return cutoff + 1; }

    long long size() const {
        long long s = 1;
        for (int k = 0; k < n_modes; ++k) s *= dim();
        return s;
    }

    double norm_sq() const { return amp.squaredNorm(); }

    long long index(const std::vector<int>& occupation) const {
        if (static_cast<int>(occupation.size()) != n_modes)
            throw std::invalid_argument("occupation list does not match the register");
        long long idx = 0;
        for (int k = 0; k < n_modes; ++k) {
            if (occupation[k] < 0 || occupation[k] > cutoff)
                throw std::invalid_argument("occupation outside the cutoff");
            idx = idx * dim() + occupation[k];
        }
        return idx;
    }

    static FockVector vacuum(int n_modes, int cutoff) {
        FockVector st;
        st.n_modes = n_modes;
        st.cutoff = cutoff;
        st.amp = Eigen::VectorXcd::Zero(st.size());
        st.amp[0] = 1.0;
        return st;
    }
};

inline Eigen::VectorXcd coherent_amplitudes(complexd alpha, int cutoff) {
    Eigen::VectorXcd c(cutoff + 1);
    c[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n <= cutoff; ++n) c[n] = c[n - 1] * alpha / std::sqrt(double(n));
    return c;
}

inline FockVector product_state(const std::vector<Eigen::VectorXcd>& modes, int cutoff) {
    FockVector st = FockVector::vacuum(static_cast<int>(modes.size()), cutoff);
    const int d = st.dim();
    for (const auto& m : modes)
        if (m.size() != d) throw std::invalid_argument("mode vector does not match the cutoff");
    for (long long idx = 0; idx < st.size(); ++idx) {
        complexd a(1.0, 0.0);
        long long rest = idx;
        for (int k = st.n_modes - 1; k >= 0; --k) {
            a *= modes[static_cast<size_t>(k)][rest % d];
            rest /= d;
        }
        st.amp[idx] = a;
    }
    return st;
}

namespace fock_detail {

// exp(G) for anti-Hermitian G via the eigendecomposition of the Hermitian -iG
inline Eigen::MatrixXcd exp_antihermitian(const Eigen::MatrixXcd& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(complexd(0.0, -1.0) * g);
    Eigen::VectorXcd phases(eig.eigenvalues().size());
    for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases[i] = std::exp(complexd(0.0, eig.eigenvalues()[i]));
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

// dense two-mode beam-splitter unitary exp(theta (a1^dag a2 - a2^dag a1)),
// assembled from its total-photon-number blocks
inline Eigen::MatrixXcd bs_pair_unitary(double theta, int d) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d * d, d * d);
    for (int total = 0; total <= 2 * (d - 1); ++total) {
        const int lo = std::max(0, total - (d - 1));
        const int hi = std::min(d - 1, total);
        const int len = hi - lo + 1;
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(len, len);
        for (int i = 0; i + 1 < len; ++i) {
            const int n1 = lo + i;          // source |n1, total-n1>
            const int n2 = total - n1;
            const double amp = theta * std::sqrt(double(n1 + 1) * double(n2));
            g(i + 1, i) = amp;  // a1^dag a2
            g(i, i + 1) = -amp; // -a2^dag a1
        }
        const Eigen::MatrixXcd ub = exp_antihermitian(g);
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < len; ++j)
                u((lo + i) * d + (total - lo - i), (lo + j) * d + (total - lo - j)) = ub(i, j);
    }
    return u;
}

// dense two-mode squeezing unitary exp(r (a1^dag a2^dag - a1 a2)), assembled
// from its photon-number-difference blocks
inline Eigen::MatrixXcd tms_pair_unitary(double r, int d) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d * d, d * d);
    for (int diff = -(d - 1); diff <= d - 1; ++diff) {
        const int n1_0 = std::max(diff, 0);
        const int n2_0 = std::max(-diff, 0);
        const int len = d - std::max(n1_0, n2_0);
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(len, len);
        for (int k = 0; k + 1 < len; ++k) {
            const double amp = r * std::sqrt(double(n1_0 + k + 1) * double(n2_0 + k + 1));
            g(k + 1, k) = amp;  // a1^dag a2^dag
            g(k, k + 1) = -amp; // -a1 a2
        }
        const Eigen::MatrixXcd ub = exp_antihermitian(g);
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < len; ++j)
                u((n1_0 + i) * d + (n2_0 + i), (n1_0 + j) * d + (n2_0 + j)) = ub(i, j);
    }
    return u;
}

inline Eigen::MatrixXcd displacement_unitary(complexd beta, int d) {
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(d, d);
    for (int n = 0; n + 1 < d; ++n) {
        g(n + 1, n) = beta * std::sqrt(double(n + 1));
        g(n, n + 1) = -std::conj(beta) * std::sqrt(double(n + 1));
    }
    return exp_antihermitian(g);
}

inline long long stride_of(const FockVector& st, int mode) {
    long long s = 1;
    for (int k = st.n_modes - 1; k > mode; --k) s *= st.dim();
    return s;
}

template <typename Body>
void for_each_complement(const FockVector& st, const std::vector<int>& active, Body&& body) {
    std::vector<int> rest;
    for (int k = 0; k < st.n_modes; ++k)
        if (std::find(active.begin(), active.end(), k) == active.end()) rest.push_back(k);
    long long outer = 1;
    for (size_t i = 0; i < rest.size(); ++i) outer *= st.dim();
    for (long long o = 0; o < outer; ++o) {
        long long base = 0, code = o;
        for (int k : rest) {
            base += (code % st.dim()) * stride_of(st, k);
            code /= st.dim();
        }
        body(base);
    }
}

inline void apply_single_mode(FockVector& st, const Eigen::MatrixXcd& u, int mode) {
    const int d = st.dim();
    const long long sm = stride_of(st, mode);
    Eigen::VectorXcd v(d);
    for_each_complement(st, {mode}, [&](long long base) {
        for (int n = 0; n < d; ++n) v[n] = st.amp[base + n * sm];
        v = (u * v).eval();
        for (int n = 0; n < d; ++n) st.amp[base + n * sm] = v[n];
    });
}

inline void apply_two_mode(FockVector& st, const Eigen::MatrixXcd& u, int ma, int mb) {
    const int d = st.dim();
    const long long sa = stride_of(st, ma);
    const long long sb = stride_of(st, mb);
    Eigen::VectorXcd v(d * d);
    for_each_complement(st, {ma, mb}, [&](long long base) {
        for (int na = 0; na < d; ++na)
            for (int nb = 0; nb < d; ++nb) v[na * d + nb] = st.amp[base + na * sa + nb * sb];
        v = (u * v).eval();
        for (int na = 0; na < d; ++na)
            for (int nb = 0; nb < d; ++nb) st.amp[base + na * sa + nb * sb] = v[na * d + nb];
    });
}

} // namespace fock_detail

// re-truncate a state to a new cutoff, dropping amplitudes that no longer fit
inline FockVector with_cutoff(const FockVector& st, int cutoff) {
    FockVector out = FockVector::vacuum(st.n_modes, cutoff);
    out.amp[0] = 0.0;
    const int d_in = st.dim(), d_out = out.dim();
    for (long long idx = 0; idx < st.size(); ++idx) {
        long long rest = idx, mapped = 0;
        bool fits = true;
        long long place = 1;
        for (int k = st.n_modes - 1; k >= 0; --k) {
            const int digit = static_cast<int>(rest % d_in);
            rest /= d_in;
            if (digit >= d_out) {
                fits = false;
                break;
            }
            mapped += digit * place;
            place *= d_out;
        }
        if (fits) out.amp[mapped] = st.amp[idx];
    }
    return out;
}

struct FockEvolution {
    FockVector state;   // truncated back to the input cutoff, not renormalized
    double leakage;     // probability mass lost to the truncation
    FockVector internal; // the state at the enlarged working cutoff
};

// Evolve through the network by brute force. Components are applied at an
// enlarged working cutoff so that boundary effects stay below the reported
// leakage; the result is then re-truncated and the lost mass reported.
inline FockEvolution evolve_fock(const Network& net, const FockVector& input, int margin = 8) {
    if (net.n_modes != input.n_modes)
        throw std::invalid_argument("network and state register sizes differ");
    if (net.n_modes > 3)
        throw std::invalid_argument("brute-force evolution supports at most 3 modes");
    if (input.cutoff < 1 || input.cutoff > 32)
        throw std::invalid_argument("cutoff must lie in [1, 32]");
    FockVector work = with_cutoff(input, input.cutoff + margin);
    const int d = work.dim();
    for (const auto& comp : net.components) {
        switch (comp.kind) {
            case Component::Kind::beam_splitter:
                fock_detail::apply_two_mode(work, fock_detail::bs_pair_unitary(comp.param, d),
                                            comp.modes[0], comp.modes[1]);
                break;
            case Component::Kind::amplifier:
                fock_detail::apply_two_mode(
                    work, fock_detail::tms_pair_unitary(std::acosh(comp.param), d),
                    comp.modes[0], comp.modes[1]);
                break;
            case Component::Kind::phase_rotation: {
                Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d, d);
                for (int n = 0; n < d; ++n)
                    u(n, n) = std::exp(complexd(0.0, -comp.param * n));
                fock_detail::apply_single_mode(work, u, comp.modes[0]);
                break;
            }
            case Component::Kind::displace:
                fock_detail::apply_single_mode(
                    work, fock_detail::displacement_unitary(comp.beta, d), comp.modes[0]);
                break;
            default:
                throw std::invalid_argument(
                    "component not supported in brute-force evolution; decompose QND/coupler "
                    "stages into beam splitters and squeezers first");
        }
    }
    FockEvolution out{with_cutoff(work, input.cutoff), 0.0, work};
    out.leakage = std::max(0.0, work.norm_sq() - out.state.norm_sq());
    return out;
}

// ---- moments and reductions -------------------------------------------------

// unnormalized amplitudes of a_mode |psi>
inline Eigen::VectorXcd apply_annihilation(const FockVector& st, int mode) {
    const int d = st.dim();
    const long long sm = fock_detail::stride_of(st, mode);
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(st.amp.size());
    fock_detail::for_each_complement(st, {mode}, [&](long long base) {
        for (int n = 1; n < d; ++n)
            out[base + (n - 1) * sm] = std::sqrt(double(n)) * st.amp[base + n * sm];
    });
    return out;
}

struct FockMoments {
    Eigen::VectorXd mean; // (X_0, P_0, ..., X_{m-1}, P_{m-1})
    Eigen::MatrixXd cov;  // symmetrized quadrature covariance
};

inline FockMoments quadrature_moments(const FockVector& st) {
    const int m = st.n_modes;
    const double nrm = st.norm_sq();
    if (nrm <= 0.0) throw std::invalid_argument("zero-norm state");
    std::vector<Eigen::VectorXcd> phi(m);
    for (int k = 0; k < m; ++k) phi[k] = apply_annihilation(st, k);
    Eigen::VectorXcd a_mean(m);
    Eigen::MatrixXcd e1(m, m), e2(m, m); // e1 = <a_j^dag a_k>, e2 = <a_j a_k>
    for (int j = 0; j < m; ++j) {
        a_mean[j] = st.amp.dot(phi[j]) / nrm; // Eigen dot conjugates the left side
        for (int k = 0; k < m; ++k) {
            e1(j, k) = phi[j].dot(phi[k]) / nrm;
            e2(j, k) = st.amp.dot(apply_annihilation(
                           {st.n_modes, st.cutoff, phi[k]}, j)) /
                       nrm;
        }
    }
    FockMoments mom;
    mom.mean.resize(2 * m);
    mom.cov.resize(2 * m, 2 * m);
    for (int j = 0; j < m; ++j) {
        mom.mean[2 * j] = kSqrt2 * a_mean[j].real();
        mom.mean[2 * j + 1] = kSqrt2 * a_mean[j].imag();
    }
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
            const double djk = (j == k) ? 0.5 : 0.0;
            mom.cov(2 * j, 2 * k) = (e1(j, k) + e2(j, k)).real() + djk -
                                    mom.mean[2 * j] * mom.mean[2 * k];
            mom.cov(2 * j + 1, 2 * k + 1) = (e1(j, k) - e2(j, k)).real() + djk -
                                            mom.mean[2 * j + 1] * mom.mean[2 * k + 1];
            mom.cov(2 * j, 2 * k + 1) = (e1(j, k) + e2(j, k)).imag() -
                                        mom.mean[2 * j] * mom.mean[2 * k + 1];
            mom.cov(2 * j + 1, 2 * k) = (e2(j, k) - e1(j, k)).imag() -
                                        mom.mean[2 * j + 1] * mom.mean[2 * k];
        }
    return mom;
}

// normalized single-mode reduced density matrix
inline Eigen::MatrixXcd reduced_density(const FockVector& st, int mode) {
    const int d = st.dim();
    const long long sm = fock_detail::stride_of(st, mode);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    fock_detail::for_each_complement(st, {mode}, [&](long long base) {
        for (int n = 0; n < d; ++n)
            for (int m2 = 0; m2 < d; ++m2)
                rho(n, m2) += st.amp[base + n * sm] * std::conj(st.amp[base + m2 * sm]);
    });
    const double tr = rho.trace().real();
    if (tr <= 0.0) throw std::invalid_argument("zero-norm state");
    return rho / tr;
}

// ---- cloning oracle -----------------------------------------------------------

struct OracleCloneReport {
    double fidelity_s;
    double fidelity_sp;
    double leakage;
};

inline OracleCloneReport oracle_clone_report(complexd alpha, double gamma, int cutoff) {
    if (std::abs(alpha) > 1.0)
        throw std::invalid_argument("oracle calibrated for |alpha| <= 1");
    if (cutoff < 16 || cutoff > 32)
        throw std::invalid_argument("oracle cutoff must lie in [16, 32]");
    const Network net = build_asymmetric_cloner(gamma);
    const FockVector input =
        product_state({coherent_amplitudes(alpha, cutoff), coherent_amplitudes(0.0, cutoff),
                       coherent_amplitudes(0.0, cutoff)},
                      cutoff);
    const FockEvolution evo = evolve_fock(net, input);
    if (evo.leakage > 1e-4) {
        // estimate the extra levels needed from the boundary-shell decay rate
        const int d = evo.internal.dim();
        auto shell_mass = [&](int level) {
            double mass = 0.0;
            for (long long idx = 0; idx < evo.internal.size(); ++idx) {
                long long rest = idx;
                int top = 0;
                for (int k = 0; k < evo.internal.n_modes; ++k) {
                    top = std::max<int>(top, static_cast<int>(rest % d));
                    rest /= d;
                }
                if (top == level) mass += std::norm(evo.internal.amp[idx]);
            }
            return mass;
        };
        const double s0 = shell_mass(cutoff - 1), s1 = shell_mass(cutoff);
        int extra = 16;
        if (s0 > 0.0 && s1 > 0.0 && s1 < 0.999 * s0)
            extra = static_cast<int>(
                std::ceil(std::log(1e-4 / evo.leakage) / std::log(s1 / s0)));
        throw std::runtime_error(
            fmt::format("truncation leakage {:.3e} exceeds budget 1e-4; rerun with cutoff >= {}",
                        evo.leakage, cutoff + std::max(1, extra)));
    }
    const Eigen::VectorXcd ref = coherent_amplitudes(alpha, cutoff);
    const Eigen::MatrixXcd rho_s = reduced_density(evo.state, net.mode("S"));
    const Eigen::MatrixXcd rho_sp = reduced_density(evo.state, net.mode("S'"));
    return {(ref.adjoint() * rho_s * ref).value().real(),
            (ref.adjoint() * rho_sp * ref).value().real(), evo.leakage};
}

inline double oracle_clone_fidelity(complexd alpha, double gamma, int cutoff) {
    return oracle_clone_report(alpha, gamma, cutoff).fidelity_s;
}

} // namespace clonerlab
