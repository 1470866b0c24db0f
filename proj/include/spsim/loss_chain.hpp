#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "spsim/errors.hpp"

namespace spsim {

// Ordered efficiency budget from emitter to detector. An empty chain is
// the identity.
struct LossChain {
    struct Stage {
        std::string name;
        double efficiency;  // in (0, 1]
    };
    std::vector<Stage> stages;
};

inline void validate(const LossChain& chain) {
    for (size_t i = 0; i < chain.stages.size(); ++i) {
        const double eta = chain.stages[i].efficiency;
        if (!(eta > 0.0 && eta <= 1.0))
            throw data_error("chain.stages[" + std::to_string(i) +
                             "].efficiency: must be in (0, 1], got " +
                             std::to_string(eta));
    }
}

struct SqueezingPrediction {
    double rho;          // internal efficiency
    double t_ext;        // external efficiency
    double sigma_ratio;  // sqrt(1 - rho t_ext)
    double db;           // -10 log10(sigma_ratio)
};

enum class DbConvention {
    // -10 log10(sigma ratio); matches how count-noise reductions are
    // usually quoted for photon streams.
    sigma_ratio,
    // -10 log10(variance ratio) = twice the sigma-ratio value.
    variance_ratio,
};

namespace losschain {

inline double total_efficiency(const LossChain& chain) {
    validate(chain);
    double prod = 1.0;
    for (const auto& s : chain.stages) prod *= s.efficiency;
    return prod;
}

// Count-noise standard deviation relative to shot noise for a
// deterministic single-photon stream seen through total efficiency
// rho * t_ext: sqrt(1 - rho t_ext).
inline double predicted_sigma_ratio(double rho, double t_ext) {
    if (rho < 0 || rho > 1) throw data_error("rho must be in [0, 1]");
    if (t_ext < 0 || t_ext > 1) throw data_error("t_ext must be in [0, 1]");
    return std::sqrt(1.0 - rho * t_ext);
}

inline double squeezing_db(double sigma_ratio,
                           DbConvention conv = DbConvention::sigma_ratio) {
    if (!(sigma_ratio > 0.0))
        throw data_error("squeezing_db: sigma ratio must be > 0");
    const double db = -10.0 * std::log10(sigma_ratio);
    return conv == DbConvention::sigma_ratio ? db : 2.0 * db;
}

inline SqueezingPrediction predict(double rho, double t_ext) {
    const double ratio = predicted_sigma_ratio(rho, t_ext);
    return {rho, t_ext, ratio, squeezing_db(ratio)};
}

// Fano factor after binomial thinning with survival eta:
// F -> 1 - eta (1 - F). Poisson (F = 1) is a fixed point.
inline double thin_fano(double fano_in, double eta) {
    if (fano_in < 0) throw data_error("thin_fano: fano must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0))
        throw data_error("thin_fano: eta must be in (0, 1]");
    return 1.0 - eta * (1.0 - fano_in);
}

// Exact inverse of thin_fano: the source-side Fano factor implied by a
// measurement downstream of efficiency eta.
inline double unfold_fano(double fano_meas, double eta_downstream) {
    if (!(eta_downstream > 0.0 && eta_downstream <= 1.0))
        throw data_error("unfold_fano: eta must be in (0, 1]");
    const double f = 1.0 - (1.0 - fano_meas) / eta_downstream;
    if (f < -1e-12)
        throw data_error(
            "unfold_fano: unphysical: measured statistics imply negative "
            "upstream Fano");
    return f < 0.0 ? 0.0 : f;
}

}  // namespace losschain

}  // namespace spsim
