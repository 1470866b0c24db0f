#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "spsim/analyze.hpp"
#include "spsim/errors.hpp"
#include "spsim/faddeeva.hpp"

namespace spsim {

struct CurveData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;  // optional; empty = unit weights
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> std_errors;  // valid only when errors_valid
    bool errors_valid = false;
    double residual_norm = 0;  // weighted 2-norm at the solution
    bool converged = false;
    int n_iter = 0;
    bool at_bound = false;
    std::string message;
    // outputs computed from the fitted parameters (fixed widths,
    // derived drive settings, ...)
    std::vector<std::pair<std::string, double>> derived;

    double param(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params[i];
        for (const auto& [n, v] : derived)
            if (n == name) return v;
        throw fit_error("no fit parameter named " + name);
    }

    double std_error(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return std_errors[i];
        throw fit_error("no fit parameter named " + name);
    }
};

struct FitOptions {
    int max_iter = 500;
    double step_tol = 1e-10;  // relative parameter step
    double grad_tol = 1e-12;  // infinity norm of J^T r
};

namespace detail {

inline void check_curve_data(const CurveData& d, size_t n_params) {
    if (d.y.size() != d.x.size() ||
        (!d.sigma.empty() && d.sigma.size() != d.x.size()))
        throw fit_error("data arrays have mismatched lengths");
    if (d.x.size() < n_params)
        throw fit_error("fewer data points than parameters");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(),
                           [](double t) { return std::isfinite(t); });
    };
    if (!finite(d.x) || !finite(d.y) || !finite(d.sigma))
        throw fit_error("data contains non-finite values");
    for (double s : d.sigma)
        if (s <= 0) throw fit_error("sigma_y values must be > 0");
}

}  // namespace detail

// Damped least squares (Levenberg-Marquardt with additive scaled
// damping). Model requirements:
//   names()                      -> vector of parameter names
//   eval(x, p)                   -> model value
//   grad(x, p, g)                -> d model / d p into g
// Box bounds are enforced by clamping trial steps; hitting a bound at
// the solution sets at_bound. Parameter errors are the square roots of
// diag((J^T J)^-1) taking the supplied sigma_y at face value, so they
// scale with any uniform rescaling of sigma_y.
template <typename Model>
FitResult least_squares(const Model& model, const CurveData& data,
                        const std::vector<double>& init,
                        const std::vector<double>& lower = {},
                        const std::vector<double>& upper = {},
                        const FitOptions& opts = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const auto names = model.names();
    const int np = int(names.size());
    const int nd = int(data.x.size());
    if (int(init.size()) != np) throw fit_error("init size mismatch");
    detail::check_curve_data(data, np);

    const double inf = std::numeric_limits<double>::infinity();
    VectorXd lb = VectorXd::Constant(np, -inf);
    VectorXd ub = VectorXd::Constant(np, inf);
    for (size_t i = 0; i < lower.size(); ++i) lb[int(i)] = lower[i];
    for (size_t i = 0; i < upper.size(); ++i) ub[int(i)] = upper[i];

    auto clamp = [&](VectorXd p) {
        for (int i = 0; i < np; ++i) p[i] = std::clamp(p[i], lb[i], ub[i]);
        return p;
    };

    VectorXd p = clamp(Eigen::Map<const VectorXd>(init.data(), np));
    VectorXd g(np);

    auto weight = [&](int i) {
        return data.sigma.empty() ? 1.0 : 1.0 / data.sigma[i];
    };
    auto cost = [&](const VectorXd& q) {
        double s = 0;
        for (int i = 0; i < nd; ++i) {
            const double r = (data.y[i] - model.eval(data.x[i], q)) * weight(i);
            s += r * r;
        }
        return s;
    };

    MatrixXd jac(nd, np);
    VectorXd residual(nd);
    auto linearize = [&](const VectorXd& q) {
        for (int i = 0; i < nd; ++i) {
            const double w = weight(i);
            residual[i] = (data.y[i] - model.eval(data.x[i], q)) * w;
            model.grad(data.x[i], q, g);
            jac.row(i) = w * g.transpose();
        }
    };

    double s_cur = cost(p);
    double lambda = 1e-3;
    FitResult res;
    res.names = names;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        res.n_iter = iter + 1;
        linearize(p);
        const MatrixXd jtj = jac.transpose() * jac;
        const VectorXd jtr = jac.transpose() * residual;

        if (iter == 0) {
            const double dmax = jtj.diagonal().maxCoeff();
            if (!(dmax > 0) || jtj.diagonal().minCoeff() <= dmax * 1e-300)
                throw fit_error("degenerate fit: singular Jacobian");
        }
        if (jtr.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            break;
        }

        bool stepped = false;
        for (int tries = 0; tries < 60 && !stepped; ++tries) {
            MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal();
            const VectorXd delta = a.ldlt().solve(jtr);
            if (!delta.allFinite()) {
                lambda = std::min(lambda * 4.0, 1e14);
                continue;
            }
            const VectorXd trial = clamp(p + delta);
            const double s_trial = cost(trial);
            if (s_trial <= s_cur) {
                if ((trial - p).norm() < opts.step_tol * (p.norm() + 1e-300))
                    res.converged = true;
                p = trial;
                s_cur = s_trial;
                lambda = std::max(lambda / 3.0, 1e-14);
                stepped = true;
            } else {
                lambda = std::min(lambda * 4.0, 1e14);
            }
        }
        // no downhill direction even at maximal damping: stationary
        if (!stepped) res.converged = true;
        if (res.converged || !stepped) break;
    }

    res.params.assign(p.data(), p.data() + np);
    res.residual_norm = std::sqrt(s_cur);
    for (int i = 0; i < np; ++i)
        if (p[i] <= lb[i] || p[i] >= ub[i]) res.at_bound = true;
    if (!res.converged) res.message = "did not converge";

    // covariance in a unit-diagonal basis; raw J^T J can span the
    // squared dynamic range of the parameter units
    linearize(p);
    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd d = jtj.diagonal().cwiseSqrt();
    if (d.minCoeff() > 0) {
        const MatrixXd scaled =
            d.cwiseInverse().asDiagonal() * jtj * d.cwiseInverse().asDiagonal();
        Eigen::FullPivLU<MatrixXd> lu(scaled);
        lu.setThreshold(1e-12);
        if (lu.isInvertible()) {
            const MatrixXd cov = lu.inverse();
            res.std_errors.resize(np);
            res.errors_valid = true;
            for (int i = 0; i < np; ++i) {
                if (cov(i, i) < 0) res.errors_valid = false;
                res.std_errors[i] =
                    std::sqrt(std::max(cov(i, i), 0.0)) / d[i];
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Models

// rate = i_inf * P / (P + p_sat)
struct SaturationModel {
    std::vector<std::string> names() const { return {"i_inf", "p_sat"}; }

    double eval(double x, const Eigen::VectorXd& p) const {
        return p[0] * x / (x + p[1]);
    }
    void grad(double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) const {
        const double d = x + p[1];
        g[0] = x / d;
        g[1] = -p[0] * x / (d * d);
    }
};

namespace detail {

// Unit-area exponential decay (lifetime tau, onset t0) convolved with a
// Gaussian of std dev sigma, evaluated stably via erfcx on the rising
// flank and exp*erfc on the tail. d_t0 and d_tau receive the partial
// derivatives when non-null.
inline double exp_gauss_decay(double t, double t0, double tau, double sigma,
                              double* d_t0 = nullptr,
                              double* d_tau = nullptr) {
    const double delta = t - t0;
    if (sigma <= 0.0) {
        if (delta < 0.0) {
            if (d_t0) *d_t0 = 0;
            if (d_tau) *d_tau = 0;
            return 0.0;
        }
        const double e = std::exp(-delta / tau) / tau;
        if (d_t0) *d_t0 = e / tau;
        if (d_tau) *d_tau = e * (delta / (tau * tau) - 1.0 / tau);
        return e;
    }
    const double u = (sigma / tau - delta / sigma) * M_SQRT1_2;
    const double gauss = std::exp(-0.5 * delta * delta / (sigma * sigma));
    double big_e;  // exp(a) erfc(u) with a = sigma^2/(2 tau^2) - delta/tau
    if (u >= 0.0) {
        big_e = erfcx(u) * gauss;
    } else {
        const double a = 0.5 * sigma * sigma / (tau * tau) - delta / tau;
        big_e = std::exp(a) * std::erfc(u);
    }
    const double val = 0.5 / tau * big_e;
    if (d_t0 || d_tau) {
        const double de_du = -2.0 / std::sqrt(M_PI) * gauss;
        if (d_t0) {
            const double da = 1.0 / tau;
            const double du = M_SQRT1_2 / sigma;
            *d_t0 = 0.5 / tau * (big_e * da + de_du * du);
        }
        if (d_tau) {
            const double da = -sigma * sigma / (tau * tau * tau) +
                              delta / (tau * tau);
            const double du = -sigma / (tau * tau) * M_SQRT1_2;
            *d_tau = -val / tau + 0.5 / tau * (big_e * da + de_du * du);
        }
    }
    return val;
}

}  // namespace detail

// counts(t) = amplitude * (exp decay (*) Gaussian IRF)(t) + background
struct ExpDecayModel {
    double irf_sigma = 0;  // fixed instrument width, same unit as x

    std::vector<std::string> names() const {
        return {"amplitude", "t0", "t1", "background"};
    }
    double eval(double x, const Eigen::VectorXd& p) const {
        return p[0] * detail::exp_gauss_decay(x, p[1], p[2], irf_sigma) + p[3];
    }
    void grad(double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) const {
        double d_t0, d_tau;
        const double e =
            detail::exp_gauss_decay(x, p[1], p[2], irf_sigma, &d_t0, &d_tau);
        g[0] = e;
        g[1] = p[0] * d_t0;
        g[2] = p[0] * d_tau;
        g[3] = 1.0;
    }
};

// counts(x) = count_scale * (1 - exp(-damping theta) cos theta) / 2,
// theta = area_scale * x (amplitude axis) or area_scale * sqrt(x)
// (power axis).
struct RabiModel {
    bool power_axis = false;

    std::vector<std::string> names() const {
        return {"area_scale", "damping", "count_scale"};
    }
    double drive(double x) const { return power_axis ? std::sqrt(x) : x; }

    double eval(double x, const Eigen::VectorXd& p) const {
        const double theta = p[0] * drive(x);
        return p[2] * 0.5 *
               (1.0 - std::exp(-p[1] * theta) * std::cos(theta));
    }
    void grad(double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) const {
        const double xe = drive(x);
        const double theta = p[0] * xe;
        const double damp = std::exp(-p[1] * theta);
        const double pe = 0.5 * (1.0 - damp * std::cos(theta));
        const double dp_dtheta =
            0.5 * damp * (p[1] * std::cos(theta) + std::sin(theta));
        g[0] = p[2] * dp_dtheta * xe;
        g[1] = p[2] * 0.5 * theta * damp * std::cos(theta);
        g[2] = pe;
    }
};

// intensity(x) = amplitude * Voigt(x - center; gauss fixed, lorentz
// free) + background
struct VoigtModel {
    double gauss_fwhm = 0;  // fixed instrument width, same unit as x

    std::vector<std::string> names() const {
        return {"amplitude", "center", "lorentz_fwhm", "background"};
    }

    double eval(double x, const Eigen::VectorXd& p) const {
        return p[0] * profile(x - p[1], p[2]) + p[3];
    }
    void grad(double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) const {
        double dv_dx, dv_dgamma;
        const double v = profile(x - p[1], p[2], &dv_dx, &dv_dgamma);
        g[0] = v;
        g[1] = -p[0] * dv_dx;
        g[2] = p[0] * dv_dgamma * 0.5;  // gamma = lorentz_fwhm / 2
        g[3] = 1.0;
    }

    double profile(double dx, double lorentz_fwhm, double* d_dx = nullptr,
                   double* d_dgamma = nullptr) const {
        const double gamma = 0.5 * lorentz_fwhm;
        const double sigma = gauss_fwhm / gauss_fwhm_factor;
        if (sigma <= 0.0) {
            const double den = dx * dx + gamma * gamma;
            const double v = gamma / (M_PI * den);
            if (d_dx) *d_dx = -2.0 * dx * gamma / (M_PI * den * den);
            if (d_dgamma)
                *d_dgamma = (dx * dx - gamma * gamma) / (M_PI * den * den);
            return v;
        }
        const double s = sigma * M_SQRT2;
        const std::complex<double> z(dx / s, gamma / s);
        const std::complex<double> w = faddeeva_w(z);
        const double norm = 1.0 / (s * std::sqrt(M_PI));
        if (d_dx || d_dgamma) {
            // w'(z) = 2i/sqrt(pi) - 2 z w(z)
            const std::complex<double> wp =
                std::complex<double>(0.0, 2.0 / std::sqrt(M_PI)) -
                2.0 * z * w;
            if (d_dx) *d_dx = wp.real() / s * norm;
            if (d_dgamma) *d_dgamma = -wp.imag() / s * norm;
        }
        return w.real() * norm;
    }
};

// ---------------------------------------------------------------------------
// Curve-specific drivers with data-driven starting points

inline FitResult fit_saturation(const CurveData& data,
                                const FitOptions& opts = {}) {
    if (data.x.size() < 3) throw fit_error("fit_saturation: need >= 3 points");
    const double y_max = *std::max_element(data.y.begin(), data.y.end());
    size_t half = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < data.y.size(); ++i) {
        const double d = std::abs(data.y[i] - 0.5 * y_max);
        if (d < best && data.x[i] > 0) {
            best = d;
            half = i;
        }
    }
    const std::vector<double> init = {1.1 * y_max, data.x[half]};
    const double x_min_pos = [&] {
        double m = std::numeric_limits<double>::infinity();
        for (double x : data.x)
            if (x > 0) m = std::min(m, x);
        return m;
    }();
    return least_squares(SaturationModel{}, data, init,
                         {0.0, 1e-6 * x_min_pos}, {}, opts);
}

// Fits decay-histogram data: x in seconds, y in counts per bin.
// Internally rescaled to picoseconds; t0/t1 come back in seconds.
inline FitResult fit_exp_decay(const CurveData& curve, double irf_sigma,
                               const FitOptions& opts = {}) {
    if (curve.x.size() < 5) throw fit_error("fit_exp_decay: need >= 5 points");
    if (irf_sigma < 0) throw fit_error("fit_exp_decay: irf_sigma must be >= 0");

    // picosecond working unit keeps parameter scales near unity
    const double ps = 1e-12;
    CurveData data;
    data.x.reserve(curve.x.size());
    for (size_t i = 0; i < curve.x.size(); ++i) {
        data.x.push_back(curve.x[i] / ps);
        data.y.push_back(curve.y[i]);
        data.sigma.push_back(curve.sigma.empty()
                                 ? std::sqrt(std::max(1.0, curve.y[i]))
                                 : curve.sigma[i]);
    }
    const double sig_ps = irf_sigma / ps;
    const double bw_ps = (data.x.back() - data.x.front()) /
                         double(data.x.size() - 1);

    const size_t i_peak = size_t(
        std::max_element(data.y.begin(), data.y.end()) - data.y.begin());
    const double y_peak = data.y[i_peak];
    // background from the quietest decile of bins
    std::vector<double> sorted_y = data.y;
    std::sort(sorted_y.begin(), sorted_y.end());
    double b0 = 0;
    const size_t n_low = std::max<size_t>(1, sorted_y.size() / 10);
    for (size_t i = 0; i < n_low; ++i) b0 += sorted_y[i];
    b0 /= double(n_low);

    // crude lifetime: bins from the peak to 1/e of its height
    double tau0 = 0;
    const double target = b0 + (y_peak - b0) / M_E;
    for (size_t i = i_peak; i < data.y.size(); ++i) {
        if (data.y[i] <= target) {
            tau0 = (double(i) - double(i_peak)) * bw_ps;
            break;
        }
    }
    if (tau0 <= 0) tau0 = 0.25 * double(data.y.size()) * bw_ps;
    double area = 0;
    for (double y : data.y) area += (y - b0) * bw_ps;
    const std::vector<double> init = {std::max(area, y_peak * tau0),
                                      data.x[i_peak] - sig_ps, tau0, b0};
    const double t_span = data.x.back() - data.x.front();
    auto res = least_squares(
        ExpDecayModel{sig_ps}, data, init, {0.0, -t_span, 1e-6 * bw_ps, 0.0},
        {std::numeric_limits<double>::infinity(), 2.0 * t_span, 10.0 * t_span,
         std::numeric_limits<double>::infinity()},
        opts);
    // report times in seconds
    res.params[1] *= ps;
    res.params[2] *= ps;
    if (res.errors_valid) {
        res.std_errors[1] *= ps;
        res.std_errors[2] *= ps;
    }
    if (res.at_bound) res.message = "lifetime or onset at bound";
    return res;
}

inline FitResult fit_exp_decay(const DecayHistogram& hist, double irf_sigma,
                               const FitOptions& opts = {}) {
    CurveData data;
    data.x.reserve(hist.counts.size());
    for (size_t i = 0; i < hist.counts.size(); ++i) {
        data.x.push_back(hist.bin_center(i));
        data.y.push_back(double(hist.counts[i]));
    }
    return fit_exp_decay(data, irf_sigma, opts);
}

// Rabi-oscillation fit; x is drive amplitude, or drive power when
// power_axis is set (pulse area taken proportional to sqrt(power)).
// Derived output pi_drive is the x value where the area reaches pi.
inline FitResult fit_rabi(const CurveData& data, bool power_axis = false,
                          const FitOptions& opts = {}) {
    if (data.x.size() < 4) throw fit_error("fit_rabi: need >= 4 points");
    RabiModel model{power_axis};
    size_t i_max = 0;
    for (size_t i = 0; i < data.y.size(); ++i)
        if (data.y[i] > data.y[i_max]) i_max = i;
    const double xe = model.drive(data.x[i_max]);
    if (xe <= 0) throw fit_error("fit_rabi: peak at non-positive drive");
    const std::vector<double> init = {M_PI / xe, 0.01, data.y[i_max]};
    auto res = least_squares(model, data, init, {1e-12, 0.0, 0.0}, {}, opts);
    const double scale = res.params[0];
    const double x_pi = power_axis ? (M_PI / scale) * (M_PI / scale)
                                   : M_PI / scale;
    res.derived.emplace_back("pi_drive", x_pi);
    return res;
}

// Voigt line fit with the Gaussian instrument width held fixed.
// Derived outputs: the fixed gauss_fwhm and the total (Voigt) FWHM of
// the fitted profile.
inline FitResult fit_voigt(const CurveData& data, double gauss_fwhm,
                           const FitOptions& opts = {}) {
    if (data.x.size() < 5) throw fit_error("fit_voigt: need >= 5 points");
    if (gauss_fwhm < 0) throw fit_error("fit_voigt: gauss_fwhm must be >= 0");

    VoigtModel model{gauss_fwhm};
    size_t i_max = 0;
    double y_min = data.y[0];
    for (size_t i = 0; i < data.y.size(); ++i) {
        if (data.y[i] > data.y[i_max]) i_max = i;
        y_min = std::min(y_min, data.y[i]);
    }
    const double center0 = data.x[i_max];
    const double height = data.y[i_max] - y_min;
    // half-max crossings around the peak
    double left = data.x.front(), right = data.x.back();
    for (size_t i = i_max; i-- > 0;)
        if (data.y[i] - y_min < 0.5 * height) {
            left = data.x[i];
            break;
        }
    for (size_t i = i_max + 1; i < data.y.size(); ++i)
        if (data.y[i] - y_min < 0.5 * height) {
            right = data.x[i];
            break;
        }
    const double total0 = std::max(right - left, 1e-12);
    const double lorentz0 =
        std::max(lorentz_fwhm_from_voigt(total0, gauss_fwhm), 0.05 * total0);
    const double amp0 = height / model.profile(0.0, lorentz0);
    const std::vector<double> init = {amp0, center0, lorentz0, y_min};
    auto res = least_squares(model, data, init,
                             {0.0, -std::numeric_limits<double>::infinity(),
                              0.0, -std::numeric_limits<double>::infinity()},
                             {}, opts);
    res.derived.emplace_back("gauss_fwhm", gauss_fwhm);
    res.derived.emplace_back(
        "total_fwhm", voigt_fwhm(res.param("lorentz_fwhm"), gauss_fwhm));
    return res;
}

}  // namespace spsim
