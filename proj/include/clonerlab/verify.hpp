#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fock.hpp"
#include "measurement.hpp"
#include "network.hpp"
#include "protocols.hpp"

namespace clonerlab {

struct VerifyCheck {
    std::string name;
    bool passed;
    std::string detail;
};

struct VerifyOptions {
    // deliberate-fault hook: flips the sign of the feedforward displacement in
    // the total-reversal suite, which must then fail
    bool inject_y_sign_error = false;
};

namespace verify_detail {

inline std::vector<Network> reference_networks() {
    std::vector<Network> nets;
    for (double g : {0.0, 0.7, -1.0}) nets.push_back(build_asymmetric_cloner(g));
    nets.push_back(build_partial_network(0.0, 1.0, PartialLayout::two_qnd));
    nets.push_back(build_partial_network(0.3, 0.7, PartialLayout::four_qnd));
    for (int m : {2, 3, 4}) nets.push_back(build_distributed_cloner(m));
    return nets;
}

// initial-register operator the idler holder would need to subtract to undo
// the cloning on their side
inline OperatorLinearForm idler_excess_form(double gamma) {
    OperatorLinearForm z(3);
    z.a_coeffs[2] = kSqrt2 * std::cosh(gamma);
    z.adag_coeffs[1] = -kSqrt2 * std::sinh(gamma);
    z.adag_coeffs[0] = 1.0;
    z.a_coeffs[0] = -1.0;
    return z;
}

} // namespace verify_detail

inline std::vector<VerifyCheck> run_verification(const VerifyOptions& opt = {}) {
    std::vector<VerifyCheck> checks;
    auto add = [&checks](const std::string& name, double worst, double tol) {
        checks.push_back({name, worst < tol,
                          fmt::format("worst residual {:.3e} (tolerance {:.0e})", worst, tol)});
    };

    {
        double worst = 0.0;
        for (const auto& net : verify_detail::reference_networks())
            worst = std::max(worst, symplectic_residual(net.quadrature_map()));
        add("symplectic-residual", worst, 1e-12);
    }
    {
        double worst = 0.0;
        for (const auto& net : verify_detail::reference_networks())
            worst = std::max(worst, commutation_residual(net.ladder_map()));
        add("commutation-preservation", worst, 1e-12);
    }
    {
        double worst = 0.0;
        for (const auto& net : verify_detail::reference_networks())
            worst = std::max(worst, net.dual_representation_residual());
        add("dual-representation", worst, 1e-10);
    }
    {
        double worst = 0.0;
        for (int i = 0; i <= 20; ++i) {
            const double gamma = -1.0 + 0.1 * i;
            ProtocolConfig cfg;
            cfg.protocol = "clone";
            cfg.gamma = gamma;
            cfg.input = "coherent:0.4,-0.2";
            const FidelityReport rep = run_protocol(cfg);
            const auto cf = closed_form_asymmetric(gamma);
            worst = std::max({worst, std::abs(rep.fidelities.at("S") - cf.clone_s),
                              std::abs(rep.fidelities.at("S'") - cf.clone_sp)});
        }
        add("cloning-closed-form", worst, 1e-9);
    }
    {
        double worst_fid = 0.0, worst_form = 0.0;
        for (double gamma : {0.0, 0.7}) {
            ProtocolConfig cfg;
            cfg.protocol = "reverse";
            cfg.gamma = gamma;
            cfg.input = "coherent:1.0,0.5";
            cfg.trials = 64;
            cfg.seed = 11;
            ProtocolSetup s = setup_total_reversal(cfg);
            double gain = resolve_gain(s, cfg);
            if (opt.inject_y_sign_error) gain = -gain;
            OperatorLinearForm form = protocol_effective_form(s, gain);
            OperatorLinearForm ideal = OperatorLinearForm::annihilation(0, 3);
            worst_form = std::max(worst_form, form.distance(ideal));
            const McResult mc = run_monte_carlo(s, cfg, gain);
            worst_fid = std::max(worst_fid, std::abs(mc.trajectory_mean - 1.0));
        }
        checks.push_back({"total-reversal", worst_form < 1e-12 && worst_fid < 1e-9,
                          fmt::format("form residual {:.3e}, per-trial fidelity deficit {:.3e}",
                                      worst_form, worst_fid)});
    }
    {
        double worst = 0.0;
        {
            ProtocolConfig cfg;
            cfg.protocol = "partial";
            cfg.gamma = 0.3;
            cfg.kappa = 1.2;
            const ProtocolSetup s = setup_partial_reversal(cfg);
            worst = std::max(worst, std::abs(numeric_optimal_gain(s) -
                                             optimal_partial_gain(cfg.gamma, cfg.kappa)));
        }
        {
            ProtocolConfig cfg;
            cfg.protocol = "distributed";
            cfg.clones = 3;
            cfg.collaborators = 1;
            const ProtocolSetup s = setup_distributed(cfg);
            worst = std::max(worst, std::abs(numeric_optimal_gain(s) - 0.5));
        }
        add("gain-optimizer-agreement", worst, 1e-6);
    }
    {
        bool all_raised = true;
        double worst_bracket = 0.0;
        for (double gamma : {0.0, 1.0}) {
            const Network net = build_asymmetric_cloner(gamma);
            const auto [xz, pz] = hermitian_parts(verify_detail::idler_excess_form(gamma));
            worst_bracket =
                std::max(worst_bracket, std::abs(commutator(xz, pz) - complexd(0.0, 1.0)));
            const Eigen::MatrixXd s_inv_t = net.quadrature_map().inverse().S.transpose();
            auto as_output_form = [&](const OperatorLinearForm& f) {
                auto [v, scalar] = real_quadrature_vector(f);
                (void)scalar;
                return QuadratureForm{s_inv_t * v, "z-part"};
            };
            Eigen::VectorXcd gains(2);
            gains << complexd(-1.0, 0.0), complexd(0.0, -1.0);
            try {
                effective_output_map(net, {as_output_form(xz), as_output_form(pz)}, gains,
                                     net.mode("I"));
                all_raised = false;
            } catch (const NonCommutingMeasurement&) {
            }
        }
        checks.push_back(
            {"idler-restoration-rejected", all_raised && worst_bracket < 1e-12,
             fmt::format("bracket residual {:.3e}, joint measurement {}", worst_bracket,
                         all_raised ? "rejected" : "NOT rejected")});
    }
    {
        double worst = 0.0;
        for (int m = 2; m <= 4; ++m)
            for (int l = 0; l < m; ++l) {
                ProtocolConfig cfg;
                cfg.protocol = "distributed";
                cfg.clones = m;
                cfg.collaborators = l;
                cfg.input = "coherent:0.3,0.1";
                const FidelityReport rep = run_protocol(cfg);
                worst = std::max(worst, std::abs(rep.fidelities.at(rep.target_label) -
                                                 closed_form_distributed(m, l).fidelity_after));
            }
        add("distributed-closed-form", worst, 1e-9);
    }
    {
        try {
            const OracleCloneReport sym = oracle_clone_report(complexd(0.5, 0.0), 0.0, 24);
            const OracleCloneReport vac = oracle_clone_report(complexd(0.0, 0.0), 0.0, 24);
            const double gamma = 0.5 * std::log(2.0);
            const OracleCloneReport asym = oracle_clone_report(complexd(0.3, 0.0), gamma, 24);
            const double worst_coh = std::abs(sym.fidelity_s - 2.0 / 3.0);
            const double worst_vac = std::abs(vac.fidelity_s - 2.0 / 3.0);
            const double worst_asym = std::abs(asym.fidelity_s - 0.8);
            checks.push_back(
                {"fock-oracle", worst_coh < 1e-3 && worst_vac < 1e-6 && worst_asym < 1e-3,
                 fmt::format("symmetric {:.3e}, vacuum {:.3e}, asymmetric {:.3e} "
                             "(leakage {:.1e})",
                             worst_coh, worst_vac, worst_asym, sym.leakage)});
        } catch (const std::exception& e) {
            checks.push_back({"fock-oracle", false, e.what()});
        }
    }
    return checks;
}

} // namespace clonerlab
