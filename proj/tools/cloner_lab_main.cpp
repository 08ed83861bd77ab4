// cloner-lab: run Gaussian cloning / reversal protocols and emit reports.
//
// Exit codes: 0 success, 2 configuration error, 3 non-commuting measurement
// request, 4 verification failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <clonerlab/protocols.hpp>
#include <clonerlab/report_io.hpp>
#include <clonerlab/verify.hpp>

using namespace clonerlab;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

struct OutputOptions {
    std::string out_dir = ".";
    std::string format = "json"; // json | csv | both
};

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument(fmt::format("cannot open config file '{}'", path));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    f << text;
    if (!f.good()) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

// Accepts either a flat config object or a previously written manifest (whose
// "config" member is used), so a run can be repeated from its own manifest.
ProtocolConfig load_config_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(fmt::format("config file '{}': {}", path, e.what()));
    }
    if (j.is_object() && j.contains("config") && j["config"].is_object()) j = j["config"];
    return config_from_json(j);
}

std::string scan_for_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return {};
}

void add_protocol_flags(CLI::App* sub, ProtocolConfig& cfg, OutputOptions& out) {
    sub->add_option("--gamma", cfg.gamma, "cloner asymmetry parameter");
    sub->add_option("--kappa", cfg.kappa, "partial-measurement coupling strength");
    sub->add_option("--M", cfg.clones, "number of clones");
    sub->add_option("--L", cfg.collaborators, "number of collaborating clone/anticlone pairs");
    sub->add_option("--gain", cfg.gain, "feedforward gain: 'auto' or a number");
    sub->add_option("--input", cfg.input,
                    "input state: vacuum | coherent:RE,IM | squeezed:R,ANGLE | thermal:NBAR");
    sub->add_option("--trials", cfg.trials, "Monte Carlo trials (0 = analytic only)");
    sub->add_option("--seed", cfg.seed, "master seed for the trial streams");
    sub->add_option("--out", out.out_dir, "output directory");
    sub->add_option("--format", out.format, "report format")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    sub->add_option("--config", "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
}

std::string protocol_parameter_string(const ProtocolConfig& cfg) {
    if (cfg.protocol == "clone" || cfg.protocol == "reverse")
        return fmt::format("gamma={:g}", cfg.gamma);
    if (cfg.protocol == "partial")
        return fmt::format("gamma={:g} kappa={:g} gain={}{}", cfg.gamma, cfg.kappa, cfg.gain,
                           cfg.four_qnd ? " four-qnd" : "");
    return fmt::format("M={} L={} gain={}", cfg.clones, cfg.collaborators, cfg.gain);
}

void print_report_summary(const ProtocolConfig& cfg, const FidelityReport& rep) {
    std::string line =
        fmt::format("{} {} input={}", cfg.protocol, protocol_parameter_string(cfg), cfg.input);
    for (const auto& [label, f] : rep.fidelities) {
        line += fmt::format(" F[{}]={:.9f}", label, f);
        if (auto it = rep.closed_form.find(label); it != rep.closed_form.end())
            line += fmt::format(" (closed {:.9f}, |d|={:.1e})", it->second,
                                std::abs(f - it->second));
    }
    if (rep.gamma_effective) line += fmt::format(" gamma_eff={:.9f}", *rep.gamma_effective);
    if (auto it = rep.baseline.find(rep.target_label); it != rep.baseline.end())
        line += fmt::format(" baseline[{}]={:.9f}", rep.target_label, it->second);
    if (rep.mc_trials > 0)
        line += fmt::format(" MC[{}]={:.6f}+-{:.1e} ({} trials)", rep.target_label,
                            rep.mc_fidelities.at(rep.target_label), rep.mc_stderr, rep.mc_trials);
    fmt::print("{}\n", line);
}

int write_report_outputs(const ProtocolConfig& cfg, const FidelityReport& rep,
                         const OutputOptions& out, long long wall_ms) {
    std::filesystem::create_directories(out.out_dir);
    const std::filesystem::path dir(out.out_dir);
    std::vector<std::string> outputs;
    if (out.format == "json" || out.format == "both") {
        write_text_file(dir / "report.json", report_to_json(rep).dump(2) + "\n");
        outputs.push_back((dir / "report.json").string());
    }
    if (out.format == "csv" || out.format == "both") {
        write_text_file(dir / "report.csv", report_to_csv(rep));
        outputs.push_back((dir / "report.csv").string());
    }
    outputs.push_back((dir / "manifest.json").string());
    write_text_file(dir / "manifest.json",
                    manifest_to_json(cfg, kArtifactVersion, outputs, wall_ms).dump(2) + "\n");
    return 0;
}

int run_protocol_command(ProtocolConfig cfg, const std::string& protocol,
                         const OutputOptions& out, bool attempt_idler_restoration) {
    cfg.protocol = protocol;
    cfg.validate();
    if (attempt_idler_restoration) {
        // deliberately request the joint measurement that would undo the idler
        // side; its two quadratures do not commute, so this must throw
        const Network net = build_asymmetric_cloner(cfg.gamma);
        const auto [xz, pz] = hermitian_parts(verify_detail::idler_excess_form(cfg.gamma));
        const Eigen::MatrixXd s_inv_t = net.quadrature_map().inverse().S.transpose();
        auto as_output = [&](const OperatorLinearForm& f, const char* label) {
            auto [v, scalar] = real_quadrature_vector(f);
            (void)scalar;
            return QuadratureForm{s_inv_t * v, label};
        };
        Eigen::VectorXcd gains(2);
        gains << complexd(-1.0, 0.0), complexd(0.0, -1.0);
        effective_output_map(net,
                             {as_output(xz, "X of idler excess"), as_output(pz, "P of idler excess")},
                             gains, net.mode("I"));
        throw std::logic_error("idler restoration unexpectedly passed the commutation check");
    }
    const auto start = std::chrono::steady_clock::now();
    const FidelityReport rep = run_protocol(cfg);
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    print_report_summary(cfg, rep);
    return write_report_outputs(cfg, rep, out, wall_ms);
}

struct SweepOptions {
    std::string param;
    double from = 0.0;
    double to = 0.0;
    int steps = 0; // 0 = derive from the range
    std::string protocol;
};

std::string infer_sweep_protocol(const std::string& param) {
    if (param == "gamma") return "clone";
    if (param == "kappa") return "partial";
    return "distributed"; // gain | L
}

std::vector<double> sweep_grid(const SweepOptions& sw) {
    std::vector<double> values;
    if (sw.param == "L") {
        const double lo = std::round(sw.from), hi = std::round(sw.to);
        if (std::abs(sw.from - lo) > 1e-9 || std::abs(sw.to - hi) > 1e-9)
            throw std::invalid_argument("L sweep endpoints must be integers");
        if (hi < lo) throw std::invalid_argument("empty sweep range");
        for (double v = lo; v <= hi + 0.5; v += 1.0) values.push_back(v);
        return values;
    }
    const int steps = sw.steps > 0 ? sw.steps : 21;
    if (steps < 1) throw std::invalid_argument("empty sweep range");
    if (steps == 1 || sw.from == sw.to) {
        values.push_back(sw.from);
        return values;
    }
    for (int i = 0; i < steps; ++i)
        values.push_back(sw.from + (sw.to - sw.from) * double(i) / double(steps - 1));
    return values;
}

int run_sweep_command(ProtocolConfig base, SweepOptions sw, const OutputOptions& out) {
    if (sw.protocol.empty()) sw.protocol = infer_sweep_protocol(sw.param);
    base.protocol = sw.protocol;
    if (sw.param == "gain" && base.protocol != "distributed" && base.protocol != "partial")
        throw std::invalid_argument("gain sweeps require a feedforward protocol");
    if (sw.param == "L" && base.protocol != "distributed")
        throw std::invalid_argument("L sweeps apply to the distributed protocol");
    const std::vector<double> grid = sweep_grid(sw);
    if (grid.empty()) throw std::invalid_argument("empty sweep range");

    const auto start = std::chrono::steady_clock::now();
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    double max_delta = 0.0;
    for (double v : grid) {
        ProtocolConfig cfg = base;
        if (sw.param == "gamma")
            cfg.gamma = v;
        else if (sw.param == "kappa")
            cfg.kappa = v;
        else if (sw.param == "gain")
            cfg.gain = format_double(v);
        else
            cfg.collaborators = static_cast<int>(std::llround(v));
        cfg.validate();
        const FidelityReport rep = run_protocol(cfg);

        SweepRow row;
        row.param = sw.param;
        row.value = v;
        row.f_s_sim = rep.fidelities.at(rep.target_label);
        std::string sp_label;
        for (const auto& [label, f] : rep.fidelities)
            if (label != rep.target_label) sp_label = label;
        if (!sp_label.empty()) row.f_sp_sim = rep.fidelities.at(sp_label);
        if (sw.param == "gain" && cfg.protocol == "distributed") {
            // closed form follows the swept gain, not the optimum
            row.f_s_closed =
                1.0 / (1.0 + distributed_noise_vs_gain(cfg.clones, cfg.collaborators,
                                                       cfg.manual_gain()));
        } else if (sw.param == "gain") {
            // no tabulated closed form away from the optimal gain
        } else if (auto it = rep.closed_form.find(rep.target_label); it != rep.closed_form.end()) {
            row.f_s_closed = it->second;
        }
        if (!sp_label.empty())
            if (auto it = rep.closed_form.find(sp_label); it != rep.closed_form.end())
                row.f_sp_closed = it->second;
        double delta = 0.0;
        if (row.f_s_closed) delta = std::abs(row.f_s_sim - *row.f_s_closed);
        if (row.f_sp_sim && row.f_sp_closed)
            delta = std::max(delta, std::abs(*row.f_sp_sim - *row.f_sp_closed));
        row.abs_delta = delta;
        max_delta = std::max(max_delta, delta);
        if (auto it = rep.chaotic_photons.find(rep.target_label); it != rep.chaotic_photons.end())
            row.n_ch = it->second;
        if (rep.gamma_effective) row.gamma_eff = *rep.gamma_effective;
        rows.push_back(row);
    }
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();

    std::filesystem::create_directories(out.out_dir);
    const std::filesystem::path dir(out.out_dir);
    std::vector<std::string> outputs;
    write_text_file(dir / "sweep.csv", sweep_to_csv(rows));
    outputs.push_back((dir / "sweep.csv").string());
    if (out.format == "json" || out.format == "both") {
        write_text_file(dir / "sweep.json", sweep_to_json(rows).dump(2) + "\n");
        outputs.push_back((dir / "sweep.json").string());
    }
    outputs.push_back((dir / "manifest.json").string());
    write_text_file(dir / "manifest.json",
                    manifest_to_json(base, kArtifactVersion, outputs, wall_ms).dump(2) + "\n");
    fmt::print("sweep param={} points={} protocol={} max|d|={:.3e} -> {}\n", sw.param, rows.size(),
               sw.protocol, max_delta, (dir / "sweep.csv").string());
    return 0;
}

int run_verify_command(bool inject_y_sign_error) {
    VerifyOptions opt;
    opt.inject_y_sign_error = inject_y_sign_error;
    const std::vector<VerifyCheck> checks = run_verification(opt);
    int passed = 0;
    for (const auto& c : checks) {
        fmt::print("[{}] {:<28} {}\n", c.passed ? "pass" : "FAIL", c.name, c.detail);
        if (c.passed) ++passed;
    }
    fmt::print("verification: {}/{} suites passed\n", passed, checks.size());
    return passed == static_cast<int>(checks.size()) ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian cloning of coherent states and its LOCC reversal"};
    app.set_version_flag("--version", kArtifactVersion);
    app.require_subcommand(1);

    ProtocolConfig cfg;
    OutputOptions out;
    try {
        const std::string config_path = scan_for_config_path(argc, argv);
        if (!config_path.empty()) cfg = load_config_file(config_path);
    } catch (const std::exception& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    }

    bool attempt_idler_restoration = false;
    bool inject_y_sign_error = false;
    SweepOptions sw;

    CLI::App* clone_cmd = app.add_subcommand("clone", "run the 1->2 cloner");
    CLI::App* reverse_cmd = app.add_subcommand("reverse", "total reversal of the 1->2 cloner");
    CLI::App* partial_cmd = app.add_subcommand("partial", "partial reversal via weak coupling");
    CLI::App* distributed_cmd =
        app.add_subcommand("distributed", "1->(M,M-1) cloning with distributed reversal");
    for (CLI::App* sub : {clone_cmd, reverse_cmd, partial_cmd, distributed_cmd})
        add_protocol_flags(sub, cfg, out);
    reverse_cmd
        ->add_flag("--attempt-idler-restoration", attempt_idler_restoration,
                   "request the (impossible) joint measurement restoring the idler")
        ->group("");
    partial_cmd->add_flag("--four-qnd", cfg.four_qnd,
                          "use the four-coupler network instead of the two-coupler one");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "tabulate fidelities over a parameter grid");
    add_protocol_flags(sweep_cmd, cfg, out);
    sweep_cmd->add_option("--param", sw.param, "parameter to sweep")
        ->required()
        ->check(CLI::IsMember({"gamma", "kappa", "gain", "L"}));
    sweep_cmd->add_option("--from", sw.from, "first grid value")->required();
    sweep_cmd->add_option("--to", sw.to, "last grid value")->required();
    sweep_cmd->add_option("--steps", sw.steps, "number of grid points (default 21)");
    sweep_cmd->add_option("--protocol", sw.protocol, "protocol to drive (default from --param)")
        ->check(CLI::IsMember({"clone", "reverse", "partial", "distributed"}));
    sweep_cmd->add_flag("--four-qnd", cfg.four_qnd,
                        "use the four-coupler network instead of the two-coupler one");

    CLI::App* verify_cmd = app.add_subcommand("verify", "run the self-verification suites");
    verify_cmd->add_flag("--inject-y-sign-error", inject_y_sign_error,
                         "flip the feedforward sign to prove the suite catches it")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::vector<std::pair<std::string, CLI::App*>> protocol_cmds = {
        {"clone", clone_cmd},
        {"reverse", reverse_cmd},
        {"partial", partial_cmd},
        {"distributed", distributed_cmd}};
    try {
        for (const auto& [name, sub] : protocol_cmds)
            if (sub->parsed()) return run_protocol_command(cfg, name, out, attempt_idler_restoration);
        if (sweep_cmd->parsed()) return run_sweep_command(cfg, sw, out);
        if (verify_cmd->parsed()) return run_verify_command(inject_y_sign_error);
        return 2;
    } catch (const NonCommutingMeasurement& e) {
        fmt::print(stderr, "non-commuting measurement: {}\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
}
