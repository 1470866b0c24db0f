#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "spsim/errors.hpp"
#include "spsim/loss_chain.hpp"
#include "spsim/physics.hpp"
#include "spsim/rng.hpp"
#include "spsim/tag_stream.hpp"

namespace spsim {

// Detector with binomial efficiency, Gaussian timing jitter and a
// non-paralyzable recovery window (each accepted click blanks the
// channel for dead_time, rejected clicks do not extend it).
struct DetectorParams {
    double efficiency = 1.0;
    double dead_time = 0.0;     // seconds
    double jitter_sigma = 0.0;  // seconds, Gaussian RMS
};

enum class SimMode { pulsed, cw, laser };

struct SimConfig {
    SimMode mode = SimMode::pulsed;
    double duration = 0;  // seconds
    uint64_t seed = 0;
    PulseDrive drive;
    EmitterParams emitter;
    LossChain chain;
    DetectorParams detector;
    double two_photon_prob = 0;  // same-slot extra emission probability
    double attenuation = 1;      // extra scalar loss, >= 1
    double laser_rate = 0;       // Hz, laser mode only
    double power = 0;            // W, cw mode only
    double p_sat = 0;            // W, cw mode only
};

// All simulators emit 1 ps ticks; 1 simulated second is 1e12 ticks.
inline constexpr uint64_t sim_resolution_ps = 1;
// Keep every timestamp (epoch + decay tail) well inside uint64 ticks.
inline constexpr double max_duration_s = 4.0e6;

inline void validate(const DetectorParams& d) {
    if (d.efficiency < 0 || d.efficiency > 1)
        throw data_error("detector.efficiency: must be in [0, 1]");
    if (d.dead_time < 0) throw data_error("detector.dead_time_s: must be >= 0");
    if (d.jitter_sigma < 0)
        throw data_error("detector.jitter_sigma_s: must be >= 0");
}

inline void validate(const SimConfig& cfg) {
    if (cfg.duration <= 0) throw data_error("duration_s: must be > 0");
    if (cfg.duration > max_duration_s)
        throw data_error("duration_s: exceeds tick range, must be <= " +
                         std::to_string(max_duration_s) + " s at 1 ps ticks");
    if (cfg.two_photon_prob < 0 || cfg.two_photon_prob > 0.5)
        throw data_error("two_photon_prob: must be in [0, 0.5]");
    if (cfg.attenuation < 1) throw data_error("attenuation: must be >= 1");
    validate(cfg.detector);
    validate(cfg.chain);
    switch (cfg.mode) {
        case SimMode::pulsed:
            validate(cfg.drive);
            validate(cfg.emitter);
            break;
        case SimMode::cw:
            validate(cfg.emitter);
            if (cfg.power < 0) throw data_error("power_w: must be >= 0");
            if (cfg.p_sat <= 0) throw data_error("p_sat_w: must be > 0");
            break;
        case SimMode::laser:
            if (cfg.laser_rate <= 0)
                throw data_error("laser_rate_hz: must be > 0");
            break;
    }
}

// Per-photon survival probability from source to detector output.
inline double survival_probability(const SimConfig& cfg) {
    return cfg.emitter.pee * losschain::total_efficiency(cfg.chain) *
           cfg.detector.efficiency / cfg.attenuation;
}

// Expected clicks per pulse slot, dead time aside.
inline double per_pulse_click_probability(const SimConfig& cfg) {
    const double p_em =
        physics::excited_population(cfg.drive) * cfg.emitter.qe_espe;
    return (p_em + cfg.two_photon_prob) * survival_probability(cfg);
}

// Non-paralyzable dead-time filter, independently per channel: a tag is
// kept iff its time is >= the last kept tag on that channel plus the
// dead time. Idempotent.
inline TagStream apply_dead_time(const TagStream& in, double dead_time_s) {
    if (!in.sorted())
        throw data_error("apply_dead_time: stream must be sorted");
    if (dead_time_s < 0)
        throw data_error("apply_dead_time: dead time must be >= 0");
    const uint64_t dead = in.seconds_to_ticks(dead_time_s);
    if (dead == 0) return in;

    TagStream out;
    out.resolution_ps = in.resolution_ps;
    out.tags.reserve(in.tags.size());
    std::array<uint64_t, 256> open_at{};  // next accepted time per channel
    for (const auto& tag : in.tags) {
        if (tag.time >= open_at[tag.channel]) {
            out.tags.push_back(tag);
            open_at[tag.channel] = tag.time + dead;
        }
    }
    return out;
}

// Random 50/50-style routing of one stream onto two detector channels
// (0 and 1), one Bernoulli trial per tag.
inline std::pair<TagStream, TagStream> split_hbt(const TagStream& in,
                                                 double ratio,
                                                 uint64_t seed) {
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw data_error("split_hbt: ratio must be in (0, 1]");
    TagStream a, b;
    a.resolution_ps = b.resolution_ps = in.resolution_ps;
    for (size_t i = 0; i < in.tags.size(); ++i) {
        SlotRng rng(seed, i, RngStream::split);
        if (rng.bernoulli(ratio))
            a.tags.push_back({in.tags[i].time, 0});
        else
            b.tags.push_back({in.tags[i].time, 1});
    }
    return {std::move(a), std::move(b)};
}

namespace detail {

inline uint64_t clamp_ticks(double t_ps) {
    return t_ps <= 0.0 ? 0 : uint64_t(std::llround(t_ps));
}

}  // namespace detail

// Pulsed resonance fluorescence. Per pulse slot: emit a photon with
// probability P_e(drive) * qe_espe, plus an independent same-slot extra
// with probability two_photon_prob; each photon survives the loss chain
// independently; surviving photons get the pulse epoch plus an
// exponential decay delay plus Gaussian jitter, then the dead-time
// filter runs. RNG streams are indexed per pulse, so output is
// reproducible bit for bit regardless of generation order.
inline TagStream simulate_pulsed(const SimConfig& cfg) {
    validate(cfg);
    if (cfg.mode != SimMode::pulsed)
        throw data_error("simulate_pulsed: config mode is not pulsed");

    const uint64_t n_pulses =
        uint64_t(std::floor(cfg.duration * cfg.drive.rep_rate));
    const double p_em =
        physics::excited_population(cfg.drive) * cfg.emitter.qe_espe;
    const double survival = survival_probability(cfg);
    const double period_ps = 1e12 / cfg.drive.rep_rate;
    const double t1_ps = cfg.emitter.t1 * 1e12;
    const double jitter_ps = cfg.detector.jitter_sigma * 1e12;
    const double two_ph = cfg.two_photon_prob;

    TagStream out;
    out.resolution_ps = sim_resolution_ps;
    out.tags.reserve(size_t(double(n_pulses) * (p_em + two_ph) * survival *
                                1.02 +
                            1024));

    for (uint64_t i = 0; i < n_pulses; ++i) {
        SlotRng rng(cfg.seed, i, RngStream::pulsed);
        int photons = rng.bernoulli(p_em) ? 1 : 0;
        if (two_ph > 0.0 && rng.bernoulli(two_ph)) ++photons;
        const double epoch = double(i) * period_ps;
        for (int p = 0; p < photons; ++p) {
            if (!rng.bernoulli(survival)) continue;
            double t = epoch + rng.exponential(t1_ps);
            if (jitter_ps > 0.0) t += jitter_ps * rng.gaussian();
            out.tags.push_back({detail::clamp_ticks(t), 0});
        }
    }
    sort_by_time(out);
    if (cfg.detector.dead_time > 0)
        return apply_dead_time(out, cfg.detector.dead_time);
    return out;
}

// Attenuated coherent light: a homogeneous Poisson process at `rate`
// thinned by the detector efficiency, jittered, then dead-time
// filtered. Without dead time the binned counts are Poisson.
inline TagStream simulate_laser(double rate, double duration, uint64_t seed,
                                const DetectorParams& detector) {
    if (rate < 0) throw data_error("simulate_laser: rate must be >= 0");
    if (duration <= 0 || duration > max_duration_s)
        throw data_error("simulate_laser: duration out of range");
    validate(detector);

    TagStream out;
    out.resolution_ps = sim_resolution_ps;
    if (rate == 0) return out;
    const double duration_ps = duration * 1e12;
    const double mean_gap_ps = 1e12 / rate;
    const double jitter_ps = detector.jitter_sigma * 1e12;
    out.tags.reserve(size_t(rate * duration * detector.efficiency * 1.02) +
                     1024);

    double t = 0;
    for (uint64_t i = 0;; ++i) {
        SlotRng rng(seed, i, RngStream::laser);
        t += rng.exponential(mean_gap_ps);
        if (t >= duration_ps) break;
        if (!rng.bernoulli(detector.efficiency)) continue;
        double tt = t;
        if (jitter_ps > 0.0) tt += jitter_ps * rng.gaussian();
        out.tags.push_back({detail::clamp_ticks(tt), 0});
    }
    sort_by_time(out);
    if (detector.dead_time > 0)
        return apply_dead_time(out, detector.dead_time);
    return out;
}

namespace detail {

// Interval scale for the CW renewal model. Emission gaps are drawn as
// max(Exp(1/lambda), Exp(t1)); the max with the re-excitation floor
// lengthens the mean, so lambda is calibrated to make the mean gap
// exactly 1/target_rate:  1/lambda + t1 - 1/(lambda + 1/t1) = 1/rate.
inline double renewal_exp_rate(double target_rate, double t1) {
    const double want = 1.0 / target_rate;
    auto mean_gap = [&](double lambda) {
        return 1.0 / lambda + t1 - 1.0 / (lambda + 1.0 / t1);
    };
    double lo = 1e-6 * target_rate;
    while (mean_gap(lo) < want) lo *= 0.5;
    double hi = 1e6 / t1;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mean_gap(mid) > want ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// CW resonance fluorescence as a renewal process: emission intervals
// are max(Exp(1/lambda), Exp(t1)), which suppresses back-to-back
// emissions on the lifetime scale (antibunching) while the calibrated
// lambda keeps the mean emission rate at cw_rate(power). Approximate on
// purpose; rate and interval statistics only, no coherent dynamics.
inline TagStream simulate_cw_rf(const SimConfig& cfg) {
    validate(cfg);
    if (cfg.mode != SimMode::cw)
        throw data_error("simulate_cw_rf: config mode is not cw");

    TagStream out;
    out.resolution_ps = sim_resolution_ps;
    const double i_inf = physics::max_cw_flux(cfg.emitter.t1);
    const double rate = physics::cw_rate(cfg.power, cfg.p_sat, i_inf);
    if (rate <= 0.0) return out;

    const double lambda = detail::renewal_exp_rate(rate, cfg.emitter.t1);
    const double exp_gap_ps = 1e12 / lambda;
    const double floor_ps = cfg.emitter.t1 * 1e12;
    const double survival = survival_probability(cfg);
    const double jitter_ps = cfg.detector.jitter_sigma * 1e12;
    const double duration_ps = cfg.duration * 1e12;
    out.tags.reserve(size_t(rate * cfg.duration * survival * 1.02) + 1024);

    double t = 0;
    for (uint64_t i = 0;; ++i) {
        SlotRng rng(cfg.seed, i, RngStream::cw);
        t += std::max(rng.exponential(exp_gap_ps),
                      rng.exponential(floor_ps));
        if (t >= duration_ps) break;
        if (!rng.bernoulli(survival)) continue;
        double tt = t;
        if (jitter_ps > 0.0) tt += jitter_ps * rng.gaussian();
        out.tags.push_back({detail::clamp_ticks(tt), 0});
    }
    sort_by_time(out);
    if (cfg.detector.dead_time > 0)
        return apply_dead_time(out, cfg.detector.dead_time);
    return out;
}

// Mode dispatcher for config-driven callers.
inline TagStream simulate(const SimConfig& cfg) {
    switch (cfg.mode) {
        case SimMode::pulsed:
            return simulate_pulsed(cfg);
        case SimMode::cw:
            return simulate_cw_rf(cfg);
        case SimMode::laser:
            validate(cfg);
            return simulate_laser(cfg.laser_rate, cfg.duration, cfg.seed,
                                  cfg.detector);
    }
    throw data_error("simulate: unknown mode");
}

}  // namespace spsim
