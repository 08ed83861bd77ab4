#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace clonerlab {

using ModeIndex = int;
using complexd = std::complex<double>;

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr complexd kImag{0.0, 1.0};

// Linear form in mode ladder operators:
//   f = sum_k a_coeffs[k] * A_k + sum_k adag_coeffs[k] * A_k^dag + scalar
// with A_k = (X_k + i P_k)/sqrt(2), [A_j, A_k^dag] = delta_jk.
struct OperatorLinearForm {
    Eigen::VectorXcd a_coeffs;
    Eigen::VectorXcd adag_coeffs;
    complexd scalar{0.0, 0.0};

    OperatorLinearForm() = default;

    explicit OperatorLinearForm(int n_modes)
        : a_coeffs(Eigen::VectorXcd::Zero(n_modes)),
          adag_coeffs(Eigen::VectorXcd::Zero(n_modes)) {}

    int n_modes() const { return static_cast<int>(a_coeffs.size()); }

    static OperatorLinearForm annihilation(ModeIndex k, int n_modes) {
        OperatorLinearForm f(n_modes);
        f.check_mode(k);
        f.a_coeffs[k] = 1.0;
        return f;
    }

    static OperatorLinearForm creation(ModeIndex k, int n_modes) {
        OperatorLinearForm f(n_modes);
        f.check_mode(k);
        f.adag_coeffs[k] = 1.0;
        return f;
    }

    // X_k = (A_k + A_k^dag)/sqrt(2)
    static OperatorLinearForm position(ModeIndex k, int n_modes) {
        OperatorLinearForm f(n_modes);
        f.check_mode(k);
        f.a_coeffs[k] = 1.0 / kSqrt2;
        f.adag_coeffs[k] = 1.0 / kSqrt2;
        return f;
    }

    // P_k = (A_k - A_k^dag)/(i sqrt(2))
    static OperatorLinearForm momentum(ModeIndex k, int n_modes) {
        OperatorLinearForm f(n_modes);
        f.check_mode(k);
        f.a_coeffs[k] = complexd(0.0, -1.0) / kSqrt2;
        f.adag_coeffs[k] = complexd(0.0, 1.0) / kSqrt2;
        return f;
    }

    OperatorLinearForm dagger() const {
        OperatorLinearForm f(n_modes());
        f.a_coeffs = adag_coeffs.conjugate();
        f.adag_coeffs = a_coeffs.conjugate();
        f.scalar = std::conj(scalar);
        return f;
    }

    OperatorLinearForm& operator+=(const OperatorLinearForm& o) {
        check_same_register(o);
        a_coeffs += o.a_coeffs;
        adag_coeffs += o.adag_coeffs;
        scalar += o.scalar;
        return *this;
    }

    OperatorLinearForm& operator-=(const OperatorLinearForm& o) {
        check_same_register(o);
        a_coeffs -= o.a_coeffs;
        adag_coeffs -= o.adag_coeffs;
        scalar -= o.scalar;
        return *this;
    }

    OperatorLinearForm& operator*=(complexd c) {
        a_coeffs *= c;
        adag_coeffs *= c;
        scalar *= c;
        return *this;
    }

    friend OperatorLinearForm operator+(OperatorLinearForm a, const OperatorLinearForm& b) {
        a += b;
        return a;
    }
    friend OperatorLinearForm operator-(OperatorLinearForm a, const OperatorLinearForm& b) {
        a -= b;
        return a;
    }
    friend OperatorLinearForm operator*(complexd c, OperatorLinearForm f) {
        f *= c;
        return f;
    }

    // max |coefficient| difference, scalar included
    double distance(const OperatorLinearForm& o) const {
        check_same_register(o);
        double d = std::abs(scalar - o.scalar);
        d = std::max(d, (a_coeffs - o.a_coeffs).cwiseAbs().maxCoeff());
        d = std::max(d, (adag_coeffs - o.adag_coeffs).cwiseAbs().maxCoeff());
        return d;
    }

    bool is_hermitian(double tol = 1e-12) const {
        return distance(dagger()) <= tol;
    }

    void check_same_register(const OperatorLinearForm& o) const {
        if (o.n_modes() != n_modes())
            throw std::invalid_argument(fmt::format(
                "operator forms live on different registers ({} vs {} modes)", n_modes(),
                o.n_modes()));
    }

  private:
    void check_mode(ModeIndex k) const {
        if (k < 0 || k >= n_modes())
            throw std::invalid_argument(
                fmt::format("mode index {} out of range for {} modes", k, n_modes()));
    }
};

// [f, g] for linear forms is a scalar: sum_k (a_f[k] b_g[k] - b_f[k] a_g[k]).
inline complexd commutator(const OperatorLinearForm& f, const OperatorLinearForm& g) {
    f.check_same_register(g);
    return (f.a_coeffs.transpose() * g.adag_coeffs).value() -
           (f.adag_coeffs.transpose() * g.a_coeffs).value();
}

// Hermitian / anti-Hermitian split: f = X + iP with X = (f + f^dag)/2,
// P = (f - f^dag)/(2i); both returned forms are Hermitian.
inline std::pair<OperatorLinearForm, OperatorLinearForm>
hermitian_parts(const OperatorLinearForm& f) {
    const OperatorLinearForm fd = f.dagger();
    OperatorLinearForm x = f;
    x += fd;
    x *= 0.5;
    OperatorLinearForm p = f;
    p -= fd;
    p *= complexd(0.0, -0.5);
    return {x, p};
}

} // namespace clonerlab
