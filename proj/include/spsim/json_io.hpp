#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spsim/analyze.hpp"
#include "spsim/errors.hpp"
#include "spsim/fitting.hpp"
#include "spsim/loss_chain.hpp"
#include "spsim/simulate.hpp"

namespace spsim {

using json = nlohmann::json;

namespace detail {

inline const json& member(const json& j, const std::string& path,
                          const std::string& key) {
    if (!j.is_object())
        throw data_error(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end())
        throw data_error(path + "." + key + ": missing required field");
    return *it;
}

inline double num_field(const json& j, const std::string& path,
                        const std::string& key, double fallback) {
    if (!j.is_object()) throw data_error(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number())
        throw data_error(path + "." + key + ": expected a number");
    return it->get<double>();
}

inline double req_num_field(const json& j, const std::string& path,
                            const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number())
        throw data_error(path + "." + key + ": expected a number");
    return v.get<double>();
}

}  // namespace detail

inline LossChain loss_chain_from_json(const json& j,
                                      const std::string& path = "chain") {
    LossChain chain;
    if (j.is_null()) return chain;
    const json* stages = &j;
    if (j.is_object()) {
        auto it = j.find("stages");
        if (it == j.end()) return chain;
        stages = &*it;
    }
    if (!stages->is_array())
        throw data_error(path + ".stages: expected an array");
    size_t i = 0;
    for (const auto& s : *stages) {
        const std::string spath = path + ".stages[" + std::to_string(i) + "]";
        if (!s.is_object()) throw data_error(spath + ": expected an object");
        LossChain::Stage stage;
        stage.name = s.value("name", "stage" + std::to_string(i));
        stage.efficiency = detail::req_num_field(s, spath, "efficiency");
        if (!(stage.efficiency > 0.0 && stage.efficiency <= 1.0))
            throw data_error(spath + ".efficiency: must be in (0, 1], got " +
                             std::to_string(stage.efficiency));
        chain.stages.push_back(std::move(stage));
        ++i;
    }
    return chain;
}

inline json loss_chain_to_json(const LossChain& chain) {
    json stages = json::array();
    for (const auto& s : chain.stages)
        stages.push_back({{"name", s.name}, {"efficiency", s.efficiency}});
    return {{"stages", stages}};
}

inline SimConfig sim_config_from_json(const json& j) {
    SimConfig cfg;
    const json& mode = detail::member(j, "config", "mode");
    if (!mode.is_string())
        throw data_error("config.mode: expected \"pulsed\", \"cw\" or "
                         "\"laser\"");
    const std::string m = mode.get<std::string>();
    if (m == "pulsed")
        cfg.mode = SimMode::pulsed;
    else if (m == "cw")
        cfg.mode = SimMode::cw;
    else if (m == "laser")
        cfg.mode = SimMode::laser;
    else
        throw data_error("config.mode: unknown mode \"" + m + "\"");

    cfg.duration = detail::req_num_field(j, "config", "duration_s");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
            throw data_error("config.seed: expected an integer");
        cfg.seed = j["seed"].get<uint64_t>();
    }

    if (j.contains("drive")) {
        const json& d = j["drive"];
        cfg.drive.area = detail::num_field(d, "config.drive", "area_rad",
                                           cfg.drive.area);
        cfg.drive.damping = detail::num_field(d, "config.drive",
                                              "damping_per_rad",
                                              cfg.drive.damping);
        cfg.drive.rep_rate = detail::num_field(d, "config.drive",
                                               "rep_rate_hz",
                                               cfg.drive.rep_rate);
    }
    if (j.contains("emitter")) {
        const json& e = j["emitter"];
        const std::string p = "config.emitter";
        cfg.emitter.t1 = detail::num_field(e, p, "t1_s", cfg.emitter.t1);
        cfg.emitter.t2 = detail::num_field(e, p, "t2_s", cfg.emitter.t2);
        cfg.emitter.t_slab =
            detail::num_field(e, p, "t_slab_s", cfg.emitter.t_slab);
        cfg.emitter.purcell =
            detail::num_field(e, p, "purcell", cfg.emitter.purcell);
        cfg.emitter.q = detail::num_field(e, p, "q", cfg.emitter.q);
        cfg.emitter.q0 = detail::num_field(e, p, "q0", cfg.emitter.q0);
        cfg.emitter.qe_espe =
            detail::num_field(e, p, "qe_espe", cfg.emitter.qe_espe);
        cfg.emitter.pee = detail::num_field(e, p, "pee", cfg.emitter.pee);
    }
    if (j.contains("chain"))
        cfg.chain = loss_chain_from_json(j["chain"], "config.chain");
    if (j.contains("detector")) {
        const json& d = j["detector"];
        const std::string p = "config.detector";
        cfg.detector.efficiency =
            detail::num_field(d, p, "efficiency", cfg.detector.efficiency);
        cfg.detector.dead_time =
            detail::num_field(d, p, "dead_time_s", cfg.detector.dead_time);
        cfg.detector.jitter_sigma = detail::num_field(
            d, p, "jitter_sigma_s", cfg.detector.jitter_sigma);
    }
    cfg.two_photon_prob = detail::num_field(j, "config", "two_photon_prob",
                                            cfg.two_photon_prob);
    cfg.attenuation =
        detail::num_field(j, "config", "attenuation", cfg.attenuation);
    cfg.laser_rate =
        detail::num_field(j, "config", "laser_rate_hz", cfg.laser_rate);
    cfg.power = detail::num_field(j, "config", "power_w", cfg.power);
    cfg.p_sat = detail::num_field(j, "config", "p_sat_w", cfg.p_sat);

    try {
        validate(cfg);
    } catch (const data_error& e) {
        throw data_error("config." + std::string(e.what()));
    }
    return cfg;
}

inline SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw data_error("config " + path + ": " + e.what());
    }
    return sim_config_from_json(j);
}

inline json squeezing_report_to_json(const SqueezingReport& rep) {
    json j{{"n_bins", rep.n_bins},
           {"bin_width_s", rep.bin_width},
           {"mean", rep.mean},
           {"sigma", rep.sigma},
           {"shot_sigma", rep.shot_sigma},
           {"sigma_ratio", rep.sigma_ratio},
           {"sigma_ratio_se", rep.sigma_ratio_se},
           {"db", rep.db},
           {"fano", rep.fano}};
    if (rep.n_pulses_per_bin > 0) {
        j["binomial"] = {{"n_pulses_per_bin", rep.n_pulses_per_bin},
                         {"p_hat", rep.binomial.p_hat},
                         {"model_sigma", rep.binomial.model_sigma},
                         {"gof_chi2", rep.binomial.chi2},
                         {"gof_dof", rep.binomial.dof},
                         {"gof_p", rep.binomial.gof_p}};
    }
    return j;
}

inline json g2_result_to_json(const G2Result& res) {
    json peaks = json::array();
    for (const auto& [k, c] : res.peaks)
        peaks.push_back({{"order", k}, {"coincidences", c}});
    return {{"g2", res.g2},
            {"center_counts", res.center_counts},
            {"side_mean", res.side_mean},
            {"n_side_peaks", res.n_side_peaks},
            {"peaks", peaks}};
}

inline json fit_result_to_json(const FitResult& res) {
    json params = json::object();
    json errors = json::object();
    for (size_t i = 0; i < res.names.size(); ++i) {
        params[res.names[i]] = res.params[i];
        if (res.errors_valid) errors[res.names[i]] = res.std_errors[i];
    }
    json j{{"params", params},
           {"converged", res.converged},
           {"n_iter", res.n_iter},
           {"residual_norm", res.residual_norm},
           {"at_bound", res.at_bound}};
    if (res.errors_valid) j["std_errors"] = errors;
    if (!res.message.empty()) j["message"] = res.message;
    for (const auto& [name, value] : res.derived) j["derived"][name] = value;
    return j;
}

// CSV with columns x, y[, sigma_y]; '#' comments and a non-numeric
// header line are skipped; commas or whitespace separate fields.
inline CurveData read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open data file " + path);
    CurveData data;
    std::string line;
    size_t lineno = 0;
    bool saw_sigma = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        std::istringstream ss(line);
        double x, y, s;
        if (!(ss >> x >> y)) {
            if (data.x.empty()) continue;  // header line
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": expected numeric columns x, y[, sigma]");
        }
        data.x.push_back(x);
        data.y.push_back(y);
        if (ss >> s) {
            data.sigma.push_back(s);
            saw_sigma = true;
        } else if (saw_sigma) {
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": missing sigma column");
        }
    }
    if (data.x.empty()) throw data_error(path + ": no data rows");
    return data;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open output file " + path);
    out << j.dump(2) << "\n";
}

}  // namespace spsim
