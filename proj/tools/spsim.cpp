// spsim -- simulate and analyze time-tagged single-photon counting runs.
//
// Subcommands map one experiment step each: simulate writes a PTAG1 tag
// file from a JSON config, analyze reduces tag files (squeezing, g2,
// lifetime fold), sweep scans the drive amplitude, fit handles the four
// curve shapes, budget prints a loss-chain table.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 fit did not
// converge.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "spsim/analyze.hpp"
#include "spsim/fitting.hpp"
#include "spsim/json_io.hpp"
#include "spsim/loss_chain.hpp"
#include "spsim/physics.hpp"
#include "spsim/simulate.hpp"
#include "spsim/tagio.hpp"

namespace {

using namespace spsim;

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_no_convergence = 3;

void emit_json(const json& j, const std::string& path) {
    if (path.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_json_file(j, path);
}

std::vector<double> parse_areas(const std::string& spec) {
    std::vector<double> areas;
    if (spec.find(':') != std::string::npos) {
        double start, stop, step;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &stop, &step) !=
                3 ||
            step <= 0)
            throw data_error("--areas: expected start:stop:step, got " + spec);
        for (double a = start; a <= stop + 1e-12; a += step)
            areas.push_back(a);
    } else {
        std::istringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) areas.push_back(std::stod(tok));
    }
    if (areas.empty()) throw data_error("--areas: no values in " + spec);
    return areas;
}

// Split a stream by recorded channel for two-detector analyses.
std::pair<TagStream, TagStream> by_channel(const TagStream& in) {
    TagStream a, b;
    a.resolution_ps = b.resolution_ps = in.resolution_ps;
    for (const auto& t : in.tags)
        (t.channel == 0 ? a : b).tags.push_back(t);
    return {a, b};
}

struct SimulateCmd {
    std::string config_path, out_path;
    double hbt_split = 0;
    uint64_t seed = 0;
    bool seed_set = false;
    double duration = 0;

    int run(const std::string& mode) const {
        SimConfig cfg = load_sim_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (duration > 0) cfg.duration = duration;
        const SimMode want = mode == "pulsed" ? SimMode::pulsed
                             : mode == "cw"   ? SimMode::cw
                                              : SimMode::laser;
        if (cfg.mode != want)
            throw data_error("config mode does not match subcommand '" +
                             mode + "'");

        TagStream stream;
        if (hbt_split > 0) {
            // one source, two detectors: dead time acts per channel
            // after the beamsplitter
            SimConfig open = cfg;
            open.detector.dead_time = 0;
            stream = simulate(open);
            auto [a, b] = split_hbt(stream, hbt_split, cfg.seed ^ 0x9e3779b9);
            a = apply_dead_time(a, cfg.detector.dead_time);
            b = apply_dead_time(b, cfg.detector.dead_time);
            stream.tags.clear();
            std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(),
                       b.tags.end(), std::back_inserter(stream.tags),
                       [](const Tag& x, const Tag& y) {
                           return x.time < y.time;
                       });
        } else {
            stream = simulate(cfg);
        }
        tagio::write_tags(stream, out_path);
        std::cerr << "wrote " << stream.tags.size() << " tags to " << out_path
                  << "\n";
        return 0;
    }
};

int run_squeeze(const std::string& tags_path, double bin_us, double rep_mhz,
                double duration_s, const std::string& json_path,
                const std::string& csv_path) {
    const auto stream = tagio::read_tags(tags_path);
    const auto binned =
        bin_counts(stream, bin_us * 1e-6, duration_s, rep_mhz * 1e6);
    const auto rep = squeezing_stats(binned);
    emit_json(squeezing_report_to_json(rep), json_path);

    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw data_error("cannot open " + csv_path);
        uint32_t max_count = 0;
        for (auto c : binned.counts) max_count = std::max(max_count, c);
        std::vector<uint64_t> hist(max_count + 1, 0);
        for (auto c : binned.counts) ++hist[c];
        const double n = double(binned.counts.size());
        out << "count,occurrences,binomial_model,poisson_model\n";
        for (uint32_t k = 0; k <= max_count; ++k) {
            double binom = 0;
            if (binned.n_pulses_per_bin > 0)
                binom = n * stats::binomial_pmf(k, binned.n_pulses_per_bin,
                                                rep.binomial_p);
            const double pois =
                n * std::exp(-rep.mean + k * std::log(rep.mean) -
                             std::lgamma(k + 1.0));
            out << k << "," << hist[k] << "," << binom << "," << pois << "\n";
        }
    }
    return 0;
}

int run_g2(const std::string& tags_path, double period_ns, double window_ns,
           const std::string& json_path, const std::string& csv_path) {
    const auto stream = tagio::read_tags(tags_path);
    const auto [a, b] = by_channel(stream);
    if (a.tags.empty() || b.tags.empty())
        throw data_error("g2 needs a two-channel tag file (see simulate "
                         "--hbt-split)");
    const auto res =
        g2_zero_pulsed(a, b, period_ns * 1e-9, window_ns * 1e-9);
    emit_json(g2_result_to_json(res), json_path);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw data_error("cannot open " + csv_path);
        out << "peak_order,coincidences,normalized\n";
        for (const auto& [k, c] : res.peaks)
            out << k << "," << c << "," << double(c) / res.side_mean << "\n";
    }
    return 0;
}

int run_decay(const std::string& tags_path, double period_ns, int bins,
              double offset_ps, const std::string& json_path,
              const std::string& csv_path) {
    const auto stream = tagio::read_tags(tags_path);
    const auto hist = decay_histogram(stream, period_ns * 1e-9, size_t(bins),
                                      offset_ps * 1e-12);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw data_error("cannot open " + csv_path);
        out << "time_s,counts\n";
        for (size_t i = 0; i < hist.counts.size(); ++i)
            out << hist.bin_center(i) << "," << hist.counts[i] << "\n";
    }
    json j{{"period_s", hist.period},
           {"bin_width_s", hist.bin_width},
           {"n_bins", hist.counts.size()},
           {"total_counts", [&] {
                uint64_t t = 0;
                for (auto c : hist.counts) t += c;
                return t;
            }()}};
    emit_json(j, json_path);
    return 0;
}

int run_sweep(const std::string& config_path, const std::string& areas_spec,
              double bin_us, const std::string& json_path,
              const std::string& csv_path) {
    const SimConfig base = load_sim_config(config_path);
    const auto areas = parse_areas(areas_spec);
    const auto points = sweep_squeezing(base, areas, bin_us * 1e-6);

    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw data_error("cannot open " + csv_path);
        out << "area_rad,mean_per_bin,sigma_ratio,sigma_ratio_se,db\n";
        for (const auto& p : points)
            out << p.area << "," << p.mean << "," << p.sigma_ratio << ","
                << p.sigma_ratio_se << "," << p.db << "\n";
    }
    json arr = json::array();
    for (const auto& p : points)
        arr.push_back({{"area_rad", p.area},
                       {"mean_per_bin", p.mean},
                       {"sigma_ratio", p.sigma_ratio},
                       {"sigma_ratio_se", p.sigma_ratio_se},
                       {"db", p.db}});
    emit_json({{"points", arr}}, json_path);
    return 0;
}

int run_fit(const std::string& kind, const std::string& data_path,
            const std::string& json_path, double irf_ps, double gauss_fwhm,
            bool power_axis, int max_iter) {
    const auto data = read_curve_csv(data_path);
    FitOptions opts;
    if (max_iter > 0) opts.max_iter = max_iter;

    FitResult res;
    if (kind == "saturation")
        res = fit_saturation(data, opts);
    else if (kind == "decay")
        res = fit_exp_decay(data, irf_ps * 1e-12, opts);
    else if (kind == "rabi")
        res = fit_rabi(data, power_axis, opts);
    else
        res = fit_voigt(data, gauss_fwhm, opts);

    emit_json(fit_result_to_json(res), json_path);
    return res.converged ? 0 : exit_no_convergence;
}

int run_budget(const std::string& chain_path, double rho,
               const std::string& json_path) {
    std::ifstream in(chain_path);
    if (!in) throw data_error("cannot open chain file " + chain_path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw data_error("chain " + chain_path + ": " + e.what());
    }
    const LossChain chain = loss_chain_from_json(j);
    if (rho <= 0 && j.is_object() && j.contains("rho"))
        rho = j["rho"].get<double>();

    std::printf("%-20s %12s %12s", "stage", "efficiency", "cumulative");
    if (rho > 0) std::printf(" %12s %10s", "sigma_ratio", "dB");
    std::printf("\n");

    auto plane = [&](const char* name, double eta, double cumulative) {
        std::printf("%-20s %12.6f %12.6f", name, eta, cumulative);
        if (rho > 0) {
            const auto pred = losschain::predict(rho, cumulative);
            std::printf(" %12.4f %10.4f", pred.sigma_ratio, pred.db);
        }
        std::printf("\n");
    };

    double cumulative = 1.0;
    plane("(first lens)", 1.0, cumulative);
    json stages = json::array();
    for (const auto& s : chain.stages) {
        cumulative *= s.efficiency;
        plane(s.name.c_str(), s.efficiency, cumulative);
        json row{{"name", s.name},
                 {"efficiency", s.efficiency},
                 {"cumulative", cumulative}};
        if (rho > 0) {
            const auto pred = losschain::predict(rho, cumulative);
            row["sigma_ratio"] = pred.sigma_ratio;
            row["db"] = pred.db;
        }
        stages.push_back(row);
    }
    std::printf("%-20s %12s %12.6f\n", "total", "", cumulative);

    if (!json_path.empty()) {
        json out{{"total_efficiency", cumulative}, {"stages", stages}};
        if (rho > 0) {
            out["rho"] = rho;
            const auto first = losschain::predict(rho, 1.0);
            out["first_lens"] = {{"sigma_ratio", first.sigma_ratio},
                                 {"db", first.db}};
        }
        write_json_file(out, json_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulsed single-photon source simulator and time-tag "
                 "analysis toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate",
                                   "generate a tag stream from a config");
    sim->require_subcommand(1);
    SimulateCmd sim_args;
    std::string sim_mode;
    for (const char* mode : {"pulsed", "cw", "laser"}) {
        auto* sub = sim->add_subcommand(mode);
        sub->add_option("--config", sim_args.config_path, "JSON config")
            ->required();
        sub->add_option("--out", sim_args.out_path, "output .ptag path")
            ->required();
        sub->add_option("--seed", sim_args.seed, "override config seed")
            ->each([&](const std::string&) { sim_args.seed_set = true; });
        sub->add_option("--duration", sim_args.duration,
                        "override config duration (s)");
        sub->add_option("--hbt-split", sim_args.hbt_split,
                        "route tags onto channels 0/1 with this ratio")
            ->check(CLI::Range(1e-9, 1.0));
        sub->callback([&, mode] { sim_mode = mode; });
    }

    // analyze
    auto* analyze = app.add_subcommand("analyze", "reduce a tag stream");
    analyze->require_subcommand(1);
    std::string tags_path, json_path, csv_path;
    double bin_us = 1.0, rep_mhz = 0, duration_s = 0;
    auto* squeeze = analyze->add_subcommand(
        "squeeze", "binned counts, sigma ratio, binomial fit");
    squeeze->add_option("--tags", tags_path)->required();
    squeeze->add_option("--bin-us", bin_us, "bin width (us)");
    squeeze->add_option("--rep-mhz", rep_mhz,
                        "pulse rate (MHz); enables the binomial fit");
    squeeze->add_option("--duration-s", duration_s,
                        "measurement span; default = last tag");
    squeeze->add_option("--json", json_path, "report path (default stdout)");
    squeeze->add_option("--csv", csv_path, "count histogram CSV");

    double period_ns = 13.157894736842105, window_ns = 2.0, offset_ps = 0;
    int decay_bins = 1024;
    auto* g2 = analyze->add_subcommand("g2", "pulsed g2(0) from channels 0/1");
    g2->add_option("--tags", tags_path)->required();
    g2->add_option("--period-ns", period_ns, "pulse period (ns)");
    g2->add_option("--window-ns", window_ns, "coincidence window (ns)");
    g2->add_option("--json", json_path);
    g2->add_option("--csv", csv_path, "per-peak coincidence CSV");

    auto* decay = analyze->add_subcommand(
        "decay", "fold tag times onto the pulse period");
    decay->add_option("--tags", tags_path)->required();
    decay->add_option("--period-ns", period_ns, "pulse period (ns)");
    decay->add_option("--bins", decay_bins, "histogram bins");
    decay->add_option("--offset-ps", offset_ps, "fold phase shift (ps)");
    decay->add_option("--json", json_path);
    decay->add_option("--csv", csv_path, "time_s,counts CSV");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "scan a drive parameter");
    sweep->require_subcommand(1);
    auto* amplitude = sweep->add_subcommand(
        "amplitude", "sigma ratio versus pulse area");
    std::string sweep_config, areas_spec;
    double sweep_bin_us = 1.0;
    amplitude->add_option("--config", sweep_config, "JSON config")->required();
    amplitude->add_option("--areas", areas_spec,
                          "start:stop:step or comma list (rad)")
        ->required();
    amplitude->add_option("--bin-us", sweep_bin_us, "bin width (us)");
    amplitude->add_option("--json", json_path);
    amplitude->add_option("--csv", csv_path);

    // fit
    auto* fit = app.add_subcommand("fit", "nonlinear curve fits on CSV data");
    fit->require_subcommand(1);
    std::string fit_kind, data_path;
    double irf_ps = 0, gauss_fwhm = 0.22;  // 220 MHz for GHz-valued x
    bool power_axis = false;
    int max_iter = 0;
    for (const char* kind : {"saturation", "decay", "rabi", "voigt"}) {
        auto* sub = fit->add_subcommand(kind);
        sub->add_option("--data", data_path, "CSV with x,y[,sigma]")
            ->required();
        sub->add_option("--json", json_path, "fit report (default stdout)");
        sub->add_option("--max-iter", max_iter);
        if (std::string(kind) == "decay")
            sub->add_option("--irf-ps", irf_ps, "Gaussian IRF sigma (ps)");
        if (std::string(kind) == "rabi")
            sub->add_flag("--power-axis", power_axis,
                          "x is power, area goes as sqrt(x)");
        if (std::string(kind) == "voigt")
            sub->add_option("--gauss-fwhm", gauss_fwhm,
                            "fixed instrument FWHM in x units "
                            "(default 0.22)");
        sub->callback([&, kind] { fit_kind = kind; });
    }

    // budget
    auto* budget = app.add_subcommand(
        "budget", "loss-chain table with squeezing predictions");
    std::string chain_path;
    double rho = 0;
    budget->add_option("--chain", chain_path, "chain JSON")->required();
    budget->add_option("--rho", rho,
                       "internal efficiency for per-plane predictions");
    budget->add_option("--json", json_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return exit_usage;
    }

    try {
        if (sim->parsed()) return sim_args.run(sim_mode);
        if (squeeze->parsed())
            return run_squeeze(tags_path, bin_us, rep_mhz, duration_s,
                               json_path, csv_path);
        if (g2->parsed())
            return run_g2(tags_path, period_ns, window_ns, json_path,
                          csv_path);
        if (decay->parsed())
            return run_decay(tags_path, period_ns, decay_bins, offset_ps,
                             json_path, csv_path);
        if (amplitude->parsed())
            return run_sweep(sweep_config, areas_spec, sweep_bin_us,
                             json_path, csv_path);
        if (fit->parsed())
            return run_fit(fit_kind, data_path, json_path, irf_ps, gauss_fwhm,
                           power_axis, max_iter);
        if (budget->parsed()) return run_budget(chain_path, rho, json_path);
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    } catch (const fit_error& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    }
    return exit_usage;
}
