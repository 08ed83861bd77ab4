#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gaussian.hpp"
#include "measurement.hpp"
#include "network.hpp"
#include "random.hpp"

namespace clonerlab {

// ---- input state specification -------------------------------------------

struct InputSpec {
    enum class Kind { vacuum, coherent, squeezed, thermal };
    Kind kind = Kind::vacuum;
    complexd alpha{0.0, 0.0};
    double r = 0.0;
    double angle = 0.0;
    double nbar = 0.0;

    // "vacuum" | "coherent:RE,IM" | "squeezed:R,ANGLE" | "thermal:NBAR"
    static InputSpec parse(const std::string& text) {
        InputSpec spec;
        const auto colon = text.find(':');
        const std::string head = text.substr(0, colon);
        std::vector<double> args;
        if (colon != std::string::npos) {
            std::stringstream ss(text.substr(colon + 1));
            std::string item;
            while (std::getline(ss, item, ',')) {
                size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(item, &used);
                } catch (const std::exception&) {
                    throw std::invalid_argument(fmt::format("bad input spec '{}'", text));
                }
                if (used != item.size())
                    throw std::invalid_argument(fmt::format("bad input spec '{}'", text));
                args.push_back(v);
            }
        }
        auto expect = [&](size_t n) {
            if (args.size() != n)
                throw std::invalid_argument(
                    fmt::format("input spec '{}' expects {} parameter(s)", text, n));
        };
        if (head == "vacuum") {
            expect(0);
            spec.kind = Kind::vacuum;
        } else if (head == "coherent") {
            expect(2);
            spec.kind = Kind::coherent;
            spec.alpha = complexd(args[0], args[1]);
        } else if (head == "squeezed") {
            expect(2);
            spec.kind = Kind::squeezed;
            spec.r = args[0];
            spec.angle = args[1];
        } else if (head == "thermal") {
            expect(1);
            if (args[0] < 0.0)
                throw std::invalid_argument("thermal occupation must be non-negative");
            spec.kind = Kind::thermal;
            spec.nbar = args[0];
        } else {
            throw std::invalid_argument(fmt::format("unknown input kind '{}'", head));
        }
        return spec;
    }

    GaussianState single_mode() const {
        switch (kind) {
            case Kind::vacuum: return GaussianState::vacuum(1);
            case Kind::coherent: return GaussianState::coherent({alpha});
            case Kind::squeezed: return GaussianState::squeezed(r, angle);
            case Kind::thermal: return GaussianState::thermal(nbar, 1);
        }
        throw std::logic_error("unreachable");
    }

    // inputs whose fidelity obeys F = 1/(1 + n_ch) under symmetric added noise
    bool coherent_family() const { return kind == Kind::vacuum || kind == Kind::coherent; }

    std::string describe() const {
        switch (kind) {
            case Kind::vacuum: return "vacuum";
            case Kind::coherent: return fmt::format("coherent:{},{}", alpha.real(), alpha.imag());
            case Kind::squeezed: return fmt::format("squeezed:{},{}", r, angle);
            case Kind::thermal: return fmt::format("thermal:{}", nbar);
        }
        throw std::logic_error("unreachable");
    }
};

// ---- run configuration ----------------------------------------------------

struct ProtocolConfig {
    std::string protocol = "clone";    // clone | reverse | partial | distributed
    double gamma = 0.0;
    double kappa = 1.0;
    int clones = 2;                    // M
    int collaborators = 1;             // L
    std::string gain = "auto";         // "auto" or a number
    std::string input = "vacuum";
    long long trials = 0;
    unsigned long long seed = 1;
    bool four_qnd = false;

    bool auto_gain() const { return gain == "auto"; }

    double manual_gain() const {
        size_t used = 0;
        double g = 0.0;
        try {
            g = std::stod(gain, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument(fmt::format("gain must be 'auto' or a number, got '{}'", gain));
        }
        if (used != gain.size())
            throw std::invalid_argument(fmt::format("gain must be 'auto' or a number, got '{}'", gain));
        return g;
    }

    void validate() const {
        if (protocol != "clone" && protocol != "reverse" && protocol != "partial" &&
            protocol != "distributed")
            throw std::invalid_argument(fmt::format("unknown protocol '{}'", protocol));
        if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
        if (kappa < 0.0) throw std::invalid_argument("kappa must be non-negative");
        if (clones < 2) throw std::invalid_argument("M must be at least 2");
        if (collaborators < 0 || collaborators > clones - 1)
            throw std::invalid_argument(
                fmt::format("L must lie in [0, M-1]; got L={} with M={}", collaborators, clones));
        if (trials < 0) throw std::invalid_argument("trials must be non-negative");
        if (!auto_gain()) (void)manual_gain();
        (void)InputSpec::parse(input);
    }
};

// ---- closed forms ---------------------------------------------------------

struct CloneFidelities {
    double clone_s;  // first clone (mode S)
    double clone_sp; // second clone (mode S')
};

inline CloneFidelities closed_form_asymmetric(double gamma) {
    return {2.0 / (std::exp(-2.0 * gamma) + 2.0), 2.0 / (std::exp(2.0 * gamma) + 2.0)};
}

inline double optimal_partial_gain(double gamma, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("kappa must be non-negative");
    return kappa / (std::exp(2.0 * gamma) + kappa * kappa);
}

struct PartialClosedForm {
    double clone_s;         // F_S after partial reversal at optimal gain
    double clone_sp;        // F_S' of the remaining clone
    double gamma_effective; // asymmetry of the equivalent residual cloner
    double gain;
};

inline PartialClosedForm closed_form_partial(double gamma, double kappa) {
    const double e2g = std::exp(2.0 * gamma);
    const double k2 = kappa * kappa;
    return {2.0 * (k2 + e2g) / (2.0 * (k2 + e2g) + 1.0), 2.0 / (2.0 + e2g + k2),
            0.5 * std::log(e2g + k2), optimal_partial_gain(gamma, kappa)};
}

struct DistributedClosedForm {
    double fidelity_before; // each clone of the plain 1->M cloner
    double fidelity_after;  // recovered clone with L collaborating pairs
    double gain;
    double chaotic_after;
};

inline DistributedClosedForm closed_form_distributed(int clones, int collaborators) {
    if (clones < 2) throw std::invalid_argument("M must be at least 2");
    if (collaborators < 0 || collaborators > clones - 1)
        throw std::invalid_argument(
            fmt::format("L must lie in [0, M-1]; got L={} with M={}", collaborators, clones));
    const double m = clones;
    const double rest = m - collaborators;
    return {m / (2.0 * m - 1.0), rest / (2.0 * rest - 1.0),
            collaborators == 0 ? 0.0 : 1.0 / rest, (rest - 1.0) / rest};
}

// chaotic photons in the recovered clone as a function of the electronic gain;
// minimized at g = 1/(M-L)
inline double distributed_noise_vs_gain(int clones, int collaborators, double g) {
    if (clones < 2) throw std::invalid_argument("M must be at least 2");
    if (collaborators < 0 || collaborators > clones - 1)
        throw std::invalid_argument(
            fmt::format("L must lie in [0, M-1]; got L={} with M={}", collaborators, clones));
    const double m = clones;
    const double l = collaborators;
    return (m - 1.0) / m - 2.0 * g * l / m + g * g * l * (m - l) / m;
}

// ---- numeric optimization ---------------------------------------------------

template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-8) {
    if (!(lo < hi)) throw std::invalid_argument("invalid bracket");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// ---- protocol setup ---------------------------------------------------------

struct ProtocolSetup {
    Network net;
    std::vector<QuadratureForm> measured;
    Eigen::VectorXcd gain_pattern; // displacement = gain * sum_j pattern_j * outcome_j
    double auto_gain = 0.0;        // closed-form optimal scalar gain
    ModeIndex target = 0;
    std::string target_label = "S";
    std::vector<std::string> report_labels; // modes whose fidelity is reported
    std::vector<std::string> sample_labels; // modes sampled in the Monte Carlo path
    GaussianState input;                    // full-register input state
    GaussianState reference;                // the single-mode state fed into S
    InputSpec input_spec;
};

namespace detail {

inline GaussianState register_input(const Network& net, const InputSpec& spec,
                                    ModeIndex source) {
    GaussianState st = GaussianState::vacuum(net.n_modes);
    st.set_mode(source, spec.single_mode());
    return st;
}

} // namespace detail

inline ProtocolSetup setup_clone(const ProtocolConfig& cfg) {
    ProtocolSetup s;
    s.net = build_asymmetric_cloner(cfg.gamma);
    s.gain_pattern = Eigen::VectorXcd::Zero(0);
    s.auto_gain = 0.0;
    s.target = s.net.mode("S");
    s.target_label = "S";
    s.report_labels = {"S", "S'"};
    s.sample_labels = {"S", "S'"};
    s.input_spec = InputSpec::parse(cfg.input);
    s.input = detail::register_input(s.net, s.input_spec, s.target);
    s.reference = s.input_spec.single_mode();
    return s;
}

inline ProtocolSetup setup_total_reversal(const ProtocolConfig& cfg) {
    ProtocolSetup s;
    s.net = build_asymmetric_cloner(cfg.gamma);
    const int n = s.net.n_modes;
    s.measured = {QuadratureForm::position_difference(s.net.mode("S'"), s.net.mode("I"), n, "x-"),
                  QuadratureForm::momentum_sum(s.net.mode("S'"), s.net.mode("I"), n, "p+")};
    s.gain_pattern = Eigen::VectorXcd(2);
    s.gain_pattern << complexd(1.0, 0.0), complexd(0.0, 1.0);
    s.auto_gain = 1.0;
    s.target = s.net.mode("S");
    s.target_label = "S";
    s.report_labels = {"S"};
    s.sample_labels = {"S"};
    s.input_spec = InputSpec::parse(cfg.input);
    s.input = detail::register_input(s.net, s.input_spec, s.target);
    s.reference = s.input_spec.single_mode();
    return s;
}

inline ProtocolSetup setup_partial_reversal(const ProtocolConfig& cfg) {
    ProtocolSetup s;
    const auto layout = cfg.four_qnd ? PartialLayout::four_qnd : PartialLayout::two_qnd;
    s.net = build_partial_network(cfg.gamma, cfg.kappa, layout);
    const int n = s.net.n_modes;
    s.measured = {QuadratureForm::position(s.net.mode("A"), n, "x_A"),
                  QuadratureForm::momentum(s.net.mode("B"), n, "p_B")};
    // meter-normalization calibration: displacing by (x_A + i p_B)/sqrt2 makes
    // the optimal scalar gain equal kappa/(e^{2 gamma} + kappa^2) in both
    // layouts; the four-QND meter record carries the opposite X sign
    const double sx = cfg.four_qnd ? -1.0 : 1.0;
    s.gain_pattern = Eigen::VectorXcd(2);
    s.gain_pattern << complexd(sx / kSqrt2, 0.0), complexd(0.0, 1.0 / kSqrt2);
    s.auto_gain = optimal_partial_gain(cfg.gamma, cfg.kappa);
    s.target = s.net.mode("S");
    s.target_label = "S";
    s.report_labels = {"S", "S'"};
    s.sample_labels = {"S", "S'"};
    s.input_spec = InputSpec::parse(cfg.input);
    s.input = detail::register_input(s.net, s.input_spec, s.target);
    s.reference = s.input_spec.single_mode();
    return s;
}

inline ProtocolSetup setup_distributed(const ProtocolConfig& cfg) {
    ProtocolSetup s;
    const int m = cfg.clones;
    const int l = cfg.collaborators;
    if (l < 0 || l > m - 1)
        throw std::invalid_argument(
            fmt::format("L must lie in [0, M-1]; got L={} with M={}", l, m));
    s.net = build_distributed_cloner(m);
    const int n = s.net.n_modes;
    s.measured.reserve(2 * static_cast<size_t>(l));
    s.gain_pattern = Eigen::VectorXcd(2 * l);
    for (int j = 1; j <= l; ++j) {
        const ModeIndex sj = s.net.mode(fmt::format("S_{}", j));
        const ModeIndex ij = s.net.mode(fmt::format("I_{}", j));
        s.measured.push_back(
            QuadratureForm::position_difference(sj, ij, n, fmt::format("x-_{}", j)));
        s.measured.push_back(QuadratureForm::momentum_sum(sj, ij, n, fmt::format("p+_{}", j)));
        s.gain_pattern[2 * (j - 1)] = complexd(1.0, 0.0);
        s.gain_pattern[2 * (j - 1) + 1] = complexd(0.0, 1.0);
    }
    s.auto_gain = closed_form_distributed(m, l).gain;
    s.target = s.net.mode(fmt::format("S_{}", m));
    s.target_label = fmt::format("S_{}", m);
    s.report_labels = {s.target_label};
    if (l < m - 1) s.report_labels.push_back(fmt::format("S_{}", l + 1)); // untouched clone
    s.sample_labels = {s.target_label};
    s.input_spec = InputSpec::parse(cfg.input);
    s.input = detail::register_input(s.net, s.input_spec, s.net.mode("S"));
    s.reference = s.input_spec.single_mode();
    return s;
}

inline ProtocolSetup make_setup(const ProtocolConfig& cfg) {
    cfg.validate();
    if (cfg.protocol == "clone") return setup_clone(cfg);
    if (cfg.protocol == "reverse") return setup_total_reversal(cfg);
    if (cfg.protocol == "partial") return setup_partial_reversal(cfg);
    return setup_distributed(cfg);
}

// ---- analytic evaluation ----------------------------------------------------

// 2x2 marginal moments of the mode described by a ladder-operator form, taken
// over the input-register state
struct FormMoments {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
};

inline FormMoments form_moments(const OperatorLinearForm& form, const GaussianState& input) {
    auto [re, im] = hermitian_parts(form);
    OperatorLinearForm x = re;
    x *= complexd(kSqrt2, 0.0);
    OperatorLinearForm p = im;
    p *= complexd(kSqrt2, 0.0);
    FormMoments mom;
    mom.mean << form_mean(x, input).real(), form_mean(p, input).real();
    const double vxx = form_covariance(x, x, input);
    const double vxp = form_covariance(x, p, input);
    const double vpp = form_covariance(p, p, input);
    mom.cov << vxx, vxp, vxp, vpp;
    return mom;
}

// effective ladder form of the target mode after the measure-and-displace step
inline OperatorLinearForm protocol_effective_form(const ProtocolSetup& s, double gain) {
    if (s.measured.empty()) return s.net.output_form(s.target);
    return effective_output_map(s.net, s.measured, gain * s.gain_pattern, s.target);
}

inline double resolve_gain(const ProtocolSetup& s, const ProtocolConfig& cfg) {
    return cfg.auto_gain() ? s.auto_gain : cfg.manual_gain();
}

// fidelity (and chaotic-photon count where meaningful) of one reported mode
struct AnalyticModeResult {
    double fidelity = 0.0;
    std::optional<double> chaotic;
    FormMoments moments;
};

inline AnalyticModeResult analyze_form(const OperatorLinearForm& form, const ProtocolSetup& s,
                                       ModeIndex source) {
    AnalyticModeResult r;
    r.moments = form_moments(form, s.input);
    r.fidelity = gaussian_fidelity(s.reference.mean.head<2>(),
                                   s.reference.cov.topLeftCorner<2, 2>(), r.moments.mean,
                                   r.moments.cov);
    if (s.input_spec.coherent_family()) {
        try {
            r.chaotic = chaotic_photons(form, source);
        } catch (const NotUnityGain&) {
        }
    }
    return r;
}

// ---- gain curves and numeric optimum ----------------------------------------

struct GainCurvePoint {
    double gain;
    double chaotic; // NaN when the unity-gain noise bookkeeping does not apply
    double fidelity;
};

inline GainCurvePoint evaluate_gain(const ProtocolSetup& s, double gain) {
    const OperatorLinearForm form = protocol_effective_form(s, gain);
    AnalyticModeResult r = analyze_form(form, s, s.net.mode("S"));
    return {gain, r.chaotic ? *r.chaotic : std::numeric_limits<double>::quiet_NaN(), r.fidelity};
}

inline std::vector<GainCurvePoint> fidelity_vs_gain_curve(const ProtocolSetup& s,
                                                          const std::vector<double>& gains) {
    if (gains.empty()) throw std::invalid_argument("gain grid is empty");
    if (s.measured.empty())
        throw std::invalid_argument("protocol has no feedforward stage to sweep");
    std::vector<GainCurvePoint> out;
    out.reserve(gains.size());
    for (double g : gains) out.push_back(evaluate_gain(s, g));
    return out;
}

// gain maximizing the analytic fidelity of the target mode
inline double numeric_optimal_gain(const ProtocolSetup& s, double lo = -1.0, double hi = 3.0,
                                   double tol = 1e-8) {
    return golden_section_minimize([&](double g) { return -evaluate_gain(s, g).fidelity; }, lo,
                                   hi, tol);
}

// ---- Monte Carlo engine ------------------------------------------------------

inline int worker_count() {
    if (const char* env = std::getenv("CLONER_LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

namespace detail {

// runs fn(trial) over [0, trials) on `workers` threads with a static partition;
// fn must only write to per-trial slots
template <typename Fn>
void parallel_trials(long long trials, int workers, Fn&& fn) {
    if (trials <= 0) return;
    workers = static_cast<int>(std::min<long long>(workers, trials));
    if (workers <= 1) {
        for (long long t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        const long long lo = trials * w / workers;
        const long long hi = trials * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            try {
                for (long long t = lo; t < hi; ++t) fn(t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline GaussianState attach_vacuum_mode(const GaussianState& st) {
    const int n = st.n_modes();
    GaussianState out = GaussianState::vacuum(n + 1);
    out.mean.head(2 * n) = st.mean;
    out.cov.topLeftCorner(2 * n, 2 * n) = st.cov;
    for (const auto& c : st.collapsed) {
        Eigen::VectorXd ext = Eigen::VectorXd::Zero(2 * (n + 1));
        ext.head(2 * n) = c;
        out.collapsed.push_back(ext);
    }
    return out;
}

struct MomentEstimate {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov; // unbiased sample covariance
};

inline MomentEstimate sample_moments(const Eigen::MatrixX2d& z,
                                     const std::vector<long long>* index = nullptr) {
    const long long n = index ? static_cast<long long>(index->size()) : z.rows();
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
    for (long long i = 0; i < n; ++i) {
        const Eigen::Vector2d v = z.row(index ? (*index)[i] : i).transpose();
        sum += v;
        sq += v * v.transpose();
    }
    MomentEstimate est;
    est.mean = sum / double(n);
    est.cov = (sq - double(n) * est.mean * est.mean.transpose()) / double(n - 1);
    return est;
}

// fidelity estimate from double-homodyne samples z ~ N(mean, cov + I/2)
inline double heterodyne_fidelity(const MomentEstimate& est, const GaussianState& reference) {
    const Eigen::Matrix2d cov = est.cov - 0.5 * Eigen::Matrix2d::Identity();
    return gaussian_fidelity_raw(reference.mean.head<2>(), reference.cov.topLeftCorner<2, 2>(),
                                 est.mean, cov);
}

} // namespace detail

struct McModeEstimate {
    double fidelity = 0.0;
    double stderr_boot = 0.0;
};

struct McResult {
    std::map<std::string, McModeEstimate> modes;
    double trajectory_mean = 0.0;   // mean per-trial conditioned fidelity of the target
    double trajectory_stderr = 0.0;
    long long trials = 0;
};

// Monte Carlo verification path: per-trial conditional trajectories, each
// followed by an independent double-homodyne (heterodyne) sample of every
// requested mode against a fresh vacuum ancilla. Mode moments are estimated
// from the samples and converted to a fidelity; uncertainty comes from a
// seeded bootstrap over trials.
inline McResult run_monte_carlo(const ProtocolSetup& s, const ProtocolConfig& cfg, double gain,
                                int bootstrap_rounds = 200) {
    McResult result;
    result.trials = cfg.trials;
    if (cfg.trials <= 0) return result;
    const long long n = cfg.trials;
    const Eigen::VectorXcd gains = gain * s.gain_pattern;
    const size_t n_meas = s.measured.size();
    const size_t n_labels = s.sample_labels.size();

    std::vector<Eigen::MatrixX2d> samples(n_labels);
    for (auto& m : samples) m.resize(n, 2);
    Eigen::VectorXd traj_fid(n);

    detail::parallel_trials(n, worker_count(), [&](long long trial) {
        TrajectoryResult traj =
            run_conditional_trajectory(s.net, s.input, s.measured, gains, s.target,
                                       cfg.seed, static_cast<uint64_t>(trial));
        traj_fid[trial] = fidelity_to_state(traj.state, s.target, s.reference);
        GaussianState current = std::move(traj.state);
        for (size_t li = 0; li < n_labels; ++li) {
            const ModeIndex mode = s.net.mode(s.sample_labels[li]);
            GaussianState extended = detail::attach_vacuum_mode(current);
            RandomStream stream = RandomStream::derive(
                cfg.seed, static_cast<uint64_t>(trial), static_cast<uint64_t>(n_meas + li));
            BellOutcome bell = bell_measure(extended, mode, extended.n_modes() - 1, stream);
            samples[li](trial, 0) = kSqrt2 * bell.x_minus;
            samples[li](trial, 1) = kSqrt2 * bell.p_plus;
            current = std::move(bell.post);
            current.mean.conservativeResize(2 * (extended.n_modes() - 1));
            current.cov.conservativeResize(2 * (extended.n_modes() - 1),
                                           2 * (extended.n_modes() - 1));
            current.collapsed.clear();
        }
    });

    result.trajectory_mean = traj_fid.mean();
    if (n > 1) {
        const double var = (traj_fid.array() - result.trajectory_mean).square().sum() / double(n - 1);
        result.trajectory_stderr = std::sqrt(var / double(n));
    }

    for (size_t li = 0; li < n_labels; ++li) {
        McModeEstimate est;
        est.fidelity = detail::heterodyne_fidelity(detail::sample_moments(samples[li]), s.reference);
        if (n > 1 && bootstrap_rounds > 0) {
            double sum = 0.0, sumsq = 0.0;
            std::vector<long long> idx(n);
            for (int b = 0; b < bootstrap_rounds; ++b) {
                RandomStream stream = RandomStream::derive(
                    cfg.seed, 0x626F6F74ULL + static_cast<uint64_t>(li),
                    static_cast<uint64_t>(b));
                for (long long i = 0; i < n; ++i)
                    idx[i] = static_cast<long long>(stream.below(static_cast<uint64_t>(n)));
                const double f =
                    detail::heterodyne_fidelity(detail::sample_moments(samples[li], &idx), s.reference);
                sum += f;
                sumsq += f * f;
            }
            const double mean = sum / bootstrap_rounds;
            est.stderr_boot =
                std::sqrt(std::max(0.0, sumsq / bootstrap_rounds - mean * mean) *
                          bootstrap_rounds / std::max(1, bootstrap_rounds - 1));
        }
        result.modes[s.sample_labels[li]] = est;
    }
    return result;
}

// ---- top-level report --------------------------------------------------------

struct FidelityReport {
    std::string protocol;
    std::string input_description;
    std::string target_label;
    std::map<std::string, double> fidelities;
    std::map<std::string, double> chaotic_photons;
    std::map<std::string, double> closed_form;
    std::map<std::string, double> baseline; // analytic values at zero gain
    std::map<std::string, double> mc_fidelities;
    std::map<std::string, double> mc_stderrs;
    std::optional<double> gamma_effective;
    double gain_used = 0.0;
    long long mc_trials = 0;
    double mc_stderr = 0.0; // bootstrap stderr of the target-mode MC fidelity
    double trajectory_fidelity_mean = 0.0;
    double trajectory_fidelity_stderr = 0.0;
};

inline FidelityReport run_protocol(const ProtocolSetup& s, const ProtocolConfig& cfg) {
    FidelityReport rep;
    rep.protocol = cfg.protocol;
    rep.input_description = s.input_spec.describe();
    rep.target_label = s.target_label;
    const double gain = resolve_gain(s, cfg);
    rep.gain_used = s.measured.empty() ? 0.0 : gain;

    for (const auto& label : s.report_labels) {
        const ModeIndex mode = s.net.mode(label);
        const OperatorLinearForm form = (mode == s.target)
                                            ? protocol_effective_form(s, gain)
                                            : s.net.output_form(mode);
        const AnalyticModeResult r = analyze_form(form, s, s.net.mode("S"));
        rep.fidelities[label] = r.fidelity;
        if (r.chaotic) rep.chaotic_photons[label] = *r.chaotic;
    }

    if (cfg.protocol == "partial") {
        // asymmetry of the residual cloner equivalent to the displaced channel
        try {
            const double nch = chaotic_photons(protocol_effective_form(s, gain), s.net.mode("S"));
            if (nch > 0.0) rep.gamma_effective = -0.5 * std::log(2.0 * nch);
        } catch (const NotUnityGain&) {
        }
    }

    if (!s.measured.empty()) {
        const OperatorLinearForm plain = s.net.output_form(s.target);
        rep.baseline[s.target_label] = analyze_form(plain, s, s.net.mode("S")).fidelity;
    }

    if (cfg.protocol == "clone") {
        const auto cf = closed_form_asymmetric(cfg.gamma);
        rep.closed_form["S"] = cf.clone_s;
        rep.closed_form["S'"] = cf.clone_sp;
    } else if (cfg.protocol == "reverse") {
        rep.closed_form["S"] = 1.0;
    } else if (cfg.protocol == "partial") {
        const auto cf = closed_form_partial(cfg.gamma, cfg.kappa);
        rep.closed_form["S"] = cf.clone_s;
        rep.closed_form["S'"] = cf.clone_sp;
    } else {
        const auto cf = closed_form_distributed(cfg.clones, cfg.collaborators);
        rep.closed_form[s.target_label] = cf.fidelity_after;
        if (cfg.collaborators < cfg.clones - 1)
            rep.closed_form[fmt::format("S_{}", cfg.collaborators + 1)] = cf.fidelity_before;
    }

    if (cfg.trials > 0) {
        const McResult mc = run_monte_carlo(s, cfg, gain);
        rep.mc_trials = mc.trials;
        for (const auto& [label, est] : mc.modes) {
            rep.mc_fidelities[label] = est.fidelity;
            rep.mc_stderrs[label] = est.stderr_boot;
        }
        if (auto it = mc.modes.find(s.target_label); it != mc.modes.end())
            rep.mc_stderr = it->second.stderr_boot;
        rep.trajectory_fidelity_mean = mc.trajectory_mean;
        rep.trajectory_fidelity_stderr = mc.trajectory_stderr;
    }
    return rep;
}

inline FidelityReport run_protocol(const ProtocolConfig& cfg) {
    return run_protocol(make_setup(cfg), cfg);
}

} // namespace clonerlab
