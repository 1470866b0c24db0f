#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "spsim/errors.hpp"
#include "spsim/loss_chain.hpp"
#include "spsim/simulate.hpp"
#include "spsim/tag_stream.hpp"

namespace spsim {

struct BinnedCounts {
    double bin_width = 0;          // seconds
    std::vector<uint32_t> counts;  // one entry per full bin
    uint32_t n_pulses_per_bin = 0; // 0 when not a pulsed measurement
};

struct BinomialFit {
    double p_hat = 0;
    double gof_p = 1;       // chi-square tail probability
    double chi2 = 0;
    int dof = 0;
    double model_sigma = 0; // sqrt(n p (1-p)) per bin
};

struct SqueezingReport {
    double mean = 0;        // counts per bin
    double sigma = 0;       // sample std dev, N-1 denominator
    double shot_sigma = 0;  // sqrt(mean)
    double sigma_ratio = 0;
    double sigma_ratio_se = 0;
    double db = 0;          // -10 log10(sigma_ratio)
    double fano = 0;        // sigma^2 / mean = sigma_ratio^2
    size_t n_bins = 0;
    double bin_width = 0;
    uint32_t n_pulses_per_bin = 0;
    double binomial_p = 0;      // valid when n_pulses_per_bin > 0
    double binomial_gof_p = 0;
    BinomialFit binomial;
};

namespace stats {

inline double chi2_sf(double x, double dof) {
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

inline double binomial_pmf(uint32_t k, uint32_t n, double p) {
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double lp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                      std::lgamma(n - k + 1.0) + k * std::log(p) +
                      (n - k) * std::log1p(-p);
    return std::exp(lp);
}

}  // namespace stats

// Fixed-width binning from t = 0; bins beyond `duration` (or beyond the
// last tag when duration <= 0) are partial and dropped. `rep_rate` > 0
// records the pulse slots per bin for binomial analysis.
inline BinnedCounts bin_counts(const TagStream& stream, double bin_width,
                               double duration = 0, double rep_rate = 0) {
    if (bin_width <= 0) throw data_error("bin_counts: bin width must be > 0");
    if (!stream.sorted()) throw data_error("bin_counts: stream must be sorted");

    const uint64_t bin_ticks = stream.seconds_to_ticks(bin_width);
    if (bin_ticks == 0)
        throw data_error("bin_counts: bin width below tick resolution");

    BinnedCounts out;
    out.bin_width = bin_width;
    if (rep_rate > 0)
        out.n_pulses_per_bin = uint32_t(std::llround(bin_width * rep_rate));

    uint64_t n_bins;
    if (duration > 0) {
        n_bins = stream.seconds_to_ticks(duration) / bin_ticks;
    } else if (stream.tags.empty()) {
        n_bins = 0;
    } else {
        n_bins = stream.tags.back().time / bin_ticks;
    }
    out.counts.assign(n_bins, 0);
    for (const auto& tag : stream.tags) {
        const uint64_t b = tag.time / bin_ticks;
        if (b < n_bins) ++out.counts[b];
    }
    return out;
}

// Maximum-likelihood binomial fit of a count histogram plus a
// chi-square goodness-of-fit test. Cells with expected occupancy < 5
// are pooled with their neighbours before the test.
inline BinomialFit fit_binomial(const BinnedCounts& binned) {
    const uint32_t n = binned.n_pulses_per_bin;
    if (n == 0)
        throw data_error("fit_binomial: pulses per bin unknown");
    if (binned.counts.size() < 2)
        throw data_error("fit_binomial: need at least 2 bins");

    double sum = 0;
    for (uint32_t c : binned.counts) {
        if (c > n)
            throw data_error("fit_binomial: counts exceed pulse slots (" +
                             std::to_string(c) + " > " + std::to_string(n) +
                             ")");
        sum += c;
    }
    BinomialFit fit;
    const double n_obs = double(binned.counts.size());
    fit.p_hat = sum / n_obs / n;
    fit.model_sigma = std::sqrt(n * fit.p_hat * (1.0 - fit.p_hat));

    std::vector<uint64_t> hist(n + 1, 0);
    for (uint32_t c : binned.counts) ++hist[c];

    // pool adjacent low-expectation cells left to right; fold a
    // low-expectation tail into the last closed cell
    std::vector<double> obs, exp;
    double o_acc = 0, e_acc = 0;
    for (uint32_t k = 0; k <= n; ++k) {
        o_acc += double(hist[k]);
        e_acc += n_obs * stats::binomial_pmf(k, n, fit.p_hat);
        if (e_acc >= 5.0) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
            o_acc = e_acc = 0;
        }
    }
    if (e_acc > 0 && !exp.empty()) {
        obs.back() += o_acc;
        exp.back() += e_acc;
    }

    fit.dof = int(obs.size()) - 2;  // one for totals, one for p_hat
    if (fit.dof < 1) {
        fit.chi2 = 0;
        fit.dof = 0;
        fit.gof_p = 1.0;  // too degenerate to test
        return fit;
    }
    for (size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - exp[i];
        fit.chi2 += d * d / exp[i];
    }
    fit.gof_p = stats::chi2_sf(fit.chi2, fit.dof);
    return fit;
}

// Mean/deviation statistics of binned counts against the shot-noise
// reference sqrt(mean). The standard error of the sigma ratio comes
// from a delta-method estimate using the empirical third and fourth
// central moments.
inline SqueezingReport squeezing_stats(const BinnedCounts& binned) {
    const size_t n = binned.counts.size();
    if (n < 2) throw data_error("squeezing_stats: need at least 2 bins");

    SqueezingReport rep;
    rep.n_bins = n;
    rep.bin_width = binned.bin_width;
    rep.n_pulses_per_bin = binned.n_pulses_per_bin;

    double sum = 0;
    for (uint32_t c : binned.counts) sum += c;
    rep.mean = sum / double(n);
    if (rep.mean <= 0) throw data_error("squeezing_stats: no signal");

    double m2 = 0, m3 = 0, m4 = 0;
    for (uint32_t c : binned.counts) {
        const double d = c - rep.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double var = m2 / double(n - 1);
    m2 /= double(n);
    m3 /= double(n);
    m4 /= double(n);

    rep.sigma = std::sqrt(var);
    rep.shot_sigma = std::sqrt(rep.mean);
    rep.sigma_ratio = rep.sigma / rep.shot_sigma;
    rep.fano = var / rep.mean;
    rep.db = rep.sigma_ratio > 0
                 ? -10.0 * std::log10(rep.sigma_ratio)
                 : std::numeric_limits<double>::infinity();

    // Var(F) for F = s^2/mean, then SE(sqrt(F)) = SE(F) / (2 sqrt(F))
    const double mean2 = rep.mean * rep.mean;
    double var_f = (m4 - m2 * m2) / mean2 + m2 * m2 * m2 / (mean2 * mean2) -
                   2.0 * m2 * m3 / (mean2 * rep.mean);
    var_f = std::max(var_f, 0.0) / double(n);
    rep.sigma_ratio_se =
        rep.fano > 0 ? std::sqrt(var_f) / (2.0 * rep.sigma_ratio) : 0.0;

    if (rep.n_pulses_per_bin > 0) {
        rep.binomial = fit_binomial(binned);
        rep.binomial_p = rep.binomial.p_hat;
        rep.binomial_gof_p = rep.binomial.gof_p;
    }
    return rep;
}

struct G2Options {
    int n_side_peaks = 10;  // side peaks per side in the baseline
    int exclude_nearest = 1;
};

struct G2Result {
    double g2 = 0;
    uint64_t center_counts = 0;
    double side_mean = 0;
    int n_side_peaks = 0;  // total peaks in the baseline
    // coincidence counts per peak order, including the excluded ones
    std::vector<std::pair<int, uint64_t>> peaks;
};

// Pulsed second-order correlation at zero delay from two detector
// streams: coincidences folded onto peaks at integer multiples of the
// pulse period, center peak normalised by the mean of the side peaks.
// The nearest `exclude_nearest` peaks on each side stay out of the
// baseline to keep slow correlations (blinking) from biasing it.
inline G2Result g2_zero_pulsed(const TagStream& a, const TagStream& b,
                               double period_s, double window_s,
                               const G2Options& opts = {}) {
    if (!a.sorted() || !b.sorted())
        throw data_error("g2_zero_pulsed: streams must be sorted");
    if (a.resolution_ps != b.resolution_ps)
        throw data_error("g2_zero_pulsed: stream resolutions differ");
    if (window_s <= 0 || window_s >= period_s / 2)
        throw data_error("g2_zero_pulsed: need 0 < window < period/2");

    const double period = period_s * 1e12 / double(a.resolution_ps);
    const double half_win = 0.5 * window_s * 1e12 / double(a.resolution_ps);
    const int k_max = opts.exclude_nearest + opts.n_side_peaks;
    const double max_lag = k_max * period + half_win;

    std::vector<uint64_t> hist(2 * k_max + 1, 0);
    size_t lo = 0;
    for (const auto& ta : a.tags) {
        const double t = double(ta.time);
        while (lo < b.tags.size() && double(b.tags[lo].time) < t - max_lag)
            ++lo;
        for (size_t j = lo; j < b.tags.size(); ++j) {
            const double d = double(b.tags[j].time) - t;
            if (d > max_lag) break;
            const int k = int(std::llround(d / period));
            if (std::abs(k) > k_max) continue;
            if (std::abs(d - k * period) <= half_win) ++hist[k + k_max];
        }
    }

    G2Result res;
    res.center_counts = hist[k_max];
    uint64_t side_total = 0;
    for (int k = -k_max; k <= k_max; ++k) {
        res.peaks.emplace_back(k, hist[k + k_max]);
        if (std::abs(k) > opts.exclude_nearest) {
            side_total += hist[k + k_max];
            ++res.n_side_peaks;
        }
    }
    if (side_total == 0)
        throw data_error("g2_zero_pulsed: insufficient statistics, empty "
                         "side peaks");
    res.side_mean = double(side_total) / res.n_side_peaks;
    res.g2 = double(res.center_counts) / res.side_mean;
    return res;
}

struct DecayHistogram {
    double bin_width = 0;  // seconds
    double period = 0;     // seconds
    std::vector<uint64_t> counts;

    double bin_center(size_t i) const { return (i + 0.5) * bin_width; }
};

// Histogram of tag times folded onto one pulse period. `offset` shifts
// the fold phase, useful to move a decay edge away from the wrap-around
// point before fitting.
inline DecayHistogram decay_histogram(const TagStream& stream,
                                      double period_s, size_t n_bins,
                                      double offset_s = 0) {
    if (period_s <= 0) throw data_error("decay_histogram: period must be > 0");
    if (n_bins < 2) throw data_error("decay_histogram: need >= 2 bins");

    const double period = period_s * 1e12 / double(stream.resolution_ps);
    const double offset = offset_s * 1e12 / double(stream.resolution_ps);
    DecayHistogram hist;
    hist.period = period_s;
    hist.bin_width = period_s / double(n_bins);
    hist.counts.assign(n_bins, 0);
    for (const auto& tag : stream.tags) {
        double phase = std::fmod(double(tag.time) + offset, period);
        if (phase < 0) phase += period;
        size_t b = size_t(phase / period * double(n_bins));
        if (b >= n_bins) b = n_bins - 1;
        ++hist.counts[b];
    }
    return hist;
}

struct SweepPoint {
    double area = 0;
    double mean = 0;
    double sigma_ratio = 0;
    double sigma_ratio_se = 0;
    double db = 0;
};

// Squeezing versus pulse area: one pulsed run per area (seeded
// seed+index), binned and reduced to the sigma ratio. Areas that
// produce no clicks (vacuum drive) come back with NaN statistics.
inline std::vector<SweepPoint> sweep_squeezing(
    const SimConfig& base, const std::vector<double>& areas,
    double bin_width = 1e-6) {
    if (areas.empty()) throw data_error("sweep_squeezing: no areas given");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<SweepPoint> out;
    out.reserve(areas.size());
    for (size_t i = 0; i < areas.size(); ++i) {
        SimConfig cfg = base;
        cfg.drive.area = areas[i];
        cfg.seed = base.seed + i;
        const TagStream tags = simulate_pulsed(cfg);
        const auto binned =
            bin_counts(tags, bin_width, cfg.duration, cfg.drive.rep_rate);
        if (tags.tags.empty()) {
            out.push_back({areas[i], 0.0, nan, nan, nan});
            continue;
        }
        const auto rep = squeezing_stats(binned);
        out.push_back({areas[i], rep.mean, rep.sigma_ratio,
                       rep.sigma_ratio_se, rep.db});
    }
    return out;
}

}  // namespace spsim
