#pragma once

#include <charconv>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocols.hpp"

namespace clonerlab {

// 17 significant digits, locale-independent; enough to round-trip a double
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

using ordered_json = nlohmann::ordered_json;

inline ordered_json config_to_json(const ProtocolConfig& cfg) {
    ordered_json j;
    j["protocol"] = cfg.protocol;
    j["gamma"] = cfg.gamma;
    j["kappa"] = cfg.kappa;
    j["M"] = cfg.clones;
    j["L"] = cfg.collaborators;
    j["gain"] = cfg.gain;
    j["input"] = cfg.input;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["four_qnd"] = cfg.four_qnd;
    return j;
}

inline ProtocolConfig config_from_json(const nlohmann::json& j) {
    ProtocolConfig cfg;
    auto bad = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument(fmt::format("config field '{}': {}", key, why));
    };
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "protocol")
                cfg.protocol = value.get<std::string>();
            else if (key == "gamma")
                cfg.gamma = value.get<double>();
            else if (key == "kappa")
                cfg.kappa = value.get<double>();
            else if (key == "M")
                cfg.clones = value.get<int>();
            else if (key == "L")
                cfg.collaborators = value.get<int>();
            else if (key == "gain")
                cfg.gain = value.is_string() ? value.get<std::string>()
                                             : format_double(value.get<double>());
            else if (key == "input")
                cfg.input = value.get<std::string>();
            else if (key == "trials")
                cfg.trials = value.get<long long>();
            else if (key == "seed")
                cfg.seed = value.get<unsigned long long>();
            else if (key == "four_qnd")
                cfg.four_qnd = value.get<bool>();
            else
                bad(key, "unknown field");
        } catch (const nlohmann::json::exception& e) {
            bad(key, e.what());
        }
    }
    return cfg;
}

inline ordered_json report_to_json(const FidelityReport& rep) {
    ordered_json j;
    j["protocol"] = rep.protocol;
    j["input"] = rep.input_description;
    j["target"] = rep.target_label;
    j["fidelities"] = rep.fidelities;
    j["closed_form"] = rep.closed_form;
    if (!rep.chaotic_photons.empty()) j["chaotic_photons"] = rep.chaotic_photons;
    if (!rep.baseline.empty()) j["baseline"] = rep.baseline;
    if (rep.gamma_effective) j["gamma_effective"] = *rep.gamma_effective;
    j["gain_used"] = rep.gain_used;
    j["mc_trials"] = rep.mc_trials;
    if (rep.mc_trials > 0) {
        j["mc_fidelities"] = rep.mc_fidelities;
        j["mc_stderrs"] = rep.mc_stderrs;
        j["mc_stderr"] = rep.mc_stderr;
        j["trajectory_fidelity_mean"] = rep.trajectory_fidelity_mean;
        j["trajectory_fidelity_stderr"] = rep.trajectory_fidelity_stderr;
    }
    return j;
}

// flat key,value rows mirroring the JSON report
inline std::string report_to_csv(const FidelityReport& rep) {
    std::string out = "key,value\n";
    auto row = [&out](const std::string& key, const std::string& value) {
        out += key;
        out += ',';
        out += value;
        out += '\n';
    };
    row("protocol", rep.protocol);
    row("input", rep.input_description);
    row("target", rep.target_label);
    for (const auto& [label, f] : rep.fidelities) row("fidelity." + label, format_double(f));
    for (const auto& [label, f] : rep.closed_form) row("closed_form." + label, format_double(f));
    for (const auto& [label, f] : rep.chaotic_photons)
        row("chaotic_photons." + label, format_double(f));
    for (const auto& [label, f] : rep.baseline) row("baseline." + label, format_double(f));
    if (rep.gamma_effective) row("gamma_effective", format_double(*rep.gamma_effective));
    row("gain_used", format_double(rep.gain_used));
    row("mc_trials", std::to_string(rep.mc_trials));
    if (rep.mc_trials > 0) {
        for (const auto& [label, f] : rep.mc_fidelities)
            row("mc_fidelity." + label, format_double(f));
        for (const auto& [label, f] : rep.mc_stderrs)
            row("mc_stderr." + label, format_double(f));
        row("mc_stderr", format_double(rep.mc_stderr));
        row("trajectory_fidelity_mean", format_double(rep.trajectory_fidelity_mean));
        row("trajectory_fidelity_stderr", format_double(rep.trajectory_fidelity_stderr));
    }
    return out;
}

struct SweepRow {
    std::string param;
    double value;
    double f_s_sim;
    std::optional<double> f_sp_sim;
    std::optional<double> f_s_closed;
    std::optional<double> f_sp_closed;
    double abs_delta;
    std::optional<double> n_ch;
    std::optional<double> gamma_eff;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "param,value,F_S_sim,F_Sp_sim,F_S_closed,F_Sp_closed,abs_delta,n_ch,gamma_eff\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : rows) {
        out += r.param;
        out += ',';
        out += format_double(r.value);
        out += ',';
        out += format_double(r.f_s_sim);
        out += ',';
        out += cell(r.f_sp_sim);
        out += ',';
        out += cell(r.f_s_closed);
        out += ',';
        out += cell(r.f_sp_closed);
        out += ',';
        out += format_double(r.abs_delta);
        out += ',';
        out += cell(r.n_ch);
        out += ',';
        out += cell(r.gamma_eff);
        out += '\n';
    }
    return out;
}

inline ordered_json sweep_to_json(const std::vector<SweepRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json j;
        j["param"] = r.param;
        j["value"] = r.value;
        j["F_S_sim"] = r.f_s_sim;
        if (r.f_sp_sim) j["F_Sp_sim"] = *r.f_sp_sim;
        if (r.f_s_closed) j["F_S_closed"] = *r.f_s_closed;
        if (r.f_sp_closed) j["F_Sp_closed"] = *r.f_sp_closed;
        j["abs_delta"] = r.abs_delta;
        if (r.n_ch) j["n_ch"] = *r.n_ch;
        if (r.gamma_eff) j["gamma_eff"] = *r.gamma_eff;
        arr.push_back(j);
    }
    return arr;
}

inline ordered_json manifest_to_json(const ProtocolConfig& cfg, const std::string& version,
                                     const std::vector<std::string>& outputs,
                                     long long wall_time_ms) {
    ordered_json j;
    j["config"] = config_to_json(cfg);
    j["artifact_version"] = version;
    j["seed"] = cfg.seed;
    j["outputs"] = outputs;
    j["wall_time_ms"] = wall_time_ms;
    return j;
}

} // namespace clonerlab
