#pragma once

#include <cmath>
#include <stdexcept>

#include "spsim/errors.hpp"

namespace spsim {

// Two-level emitter and cavity constants. Times in seconds,
// efficiencies as probabilities.
struct EmitterParams {
    double t1 = 0;       // excited-state lifetime
    double t2 = 0;       // coherence time, <= 2 t1
    double t_slab = 0;   // bulk reference lifetime
    double purcell = 0;  // lifetime enhancement factor
    double q = 0;        // cavity quality factor
    double q0 = 0;       // planar-cavity quality factor
    double qe_espe = 1;  // quantum efficiency x state-preparation efficiency
    double pee = 1;      // photon extraction efficiency
};

// One excitation pulse train: area in radians, phenomenological
// area-proportional damping, repetition rate in Hz.
struct PulseDrive {
    double area = 0;         // radians
    double damping = 0;      // per radian
    double rep_rate = 76e6;  // Hz
};

namespace physics {

// Excited-state population after a pulse of area theta with damping
// gamma: 1/2 (1 - exp(-gamma theta) cos theta). Reduces to
// sin^2(theta/2) for gamma = 0 and saturates at 1/2 for strong damping.
inline double excited_population(const PulseDrive& drive) {
    return 0.5 * (1.0 - std::exp(-drive.damping * drive.area) *
                            std::cos(drive.area));
}

// Saturation curve of a driven two-level emitter: rate approaches
// i_inf as power >> p_sat, and is exactly i_inf/2 at p_sat.
inline double cw_rate(double power, double p_sat, double i_inf) {
    if (p_sat <= 0) throw data_error("cw_rate: p_sat must be > 0");
    return i_inf * power / (power + p_sat);
}

// Upper bound on CW emission: one photon per two lifetimes.
inline double max_cw_flux(double t1) {
    if (t1 <= 0) throw data_error("max_cw_flux: t1 must be > 0");
    return 1.0 / (2.0 * t1);
}

// Lifetime-ratio Purcell factor.
inline double purcell_factor(double t_slab, double t1) {
    if (t_slab <= 0 || t1 <= 0)
        throw data_error("purcell_factor: lifetimes must be > 0");
    return t_slab / t1;
}

// Fraction of emission funnelled into the collected cavity mode:
// F_p/(F_p+1) * Q/Q0. Values of q > q0 make this exceed its intended
// range; callers that care should check q <= q0 themselves.
inline double extraction_efficiency(double f_p, double q, double q0) {
    if (f_p < 0) throw data_error("extraction_efficiency: f_p must be >= 0");
    if (q <= 0 || q0 <= 0)
        throw data_error("extraction_efficiency: q and q0 must be > 0");
    return f_p / (f_p + 1.0) * q / q0;
}

// Distance from the Fourier transform limit: t2 / (2 t1), 1 at the limit.
inline double fourier_fraction(double t2, double t1) {
    if (t1 <= 0 || t2 <= 0)
        throw data_error("fourier_fraction: times must be > 0");
    return t2 / (2.0 * t1);
}

// Coherence time from the homogeneous (Lorentzian) linewidth,
// T2 = 1/(pi fwhm). The argument must be the Lorentzian component
// alone; feeding a Gaussian-broadened total width overestimates T2.
inline double t2_from_linewidth(double lorentzian_fwhm) {
    if (lorentzian_fwhm <= 0)
        throw data_error("t2_from_linewidth: fwhm must be > 0");
    return 1.0 / (M_PI * lorentzian_fwhm);
}

}  // namespace physics

inline void validate(const EmitterParams& e) {
    if (e.t1 <= 0) throw data_error("emitter.t1_s: must be > 0");
    if (e.t2 <= 0) throw data_error("emitter.t2_s: must be > 0");
    if (e.t2 > 2.0 * e.t1 + 1e-15 * e.t1)
        throw data_error("emitter.t2_s: must be <= 2*t1_s");
    if (e.t_slab <= 0) throw data_error("emitter.t_slab_s: must be > 0");
    if (e.purcell < 0) throw data_error("emitter.purcell: must be >= 0");
    if (e.q <= 0) throw data_error("emitter.q: must be > 0");
    if (e.q0 <= 0) throw data_error("emitter.q0: must be > 0");
    if (e.qe_espe < 0 || e.qe_espe > 1)
        throw data_error("emitter.qe_espe: must be in [0, 1]");
    if (e.pee < 0 || e.pee > 1)
        throw data_error("emitter.pee: must be in [0, 1]");
}

inline void validate(const PulseDrive& d) {
    if (d.area < 0) throw data_error("drive.area_rad: must be >= 0");
    if (d.damping < 0) throw data_error("drive.damping_per_rad: must be >= 0");
    if (d.rep_rate <= 0) throw data_error("drive.rep_rate_hz: must be > 0");
}

}  // namespace spsim
