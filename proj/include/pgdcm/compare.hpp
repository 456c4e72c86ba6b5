#ifndef PGDCM_COMPARE_HPP
#define PGDCM_COMPARE_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/gibbs.hpp"
#include "pgdcm/metrics.hpp"
#include "pgdcm/vb.hpp"

namespace pgdcm {

struct ParameterLocation {
    std::size_t item = 0;
    std::size_t pattern = 0;
};

/// Side-by-side agreement between a VB fit and a Gibbs run on the same data.
struct Comparison {
    double max_eap_theta_diff = 0.0;
    ParameterLocation max_eap_theta_at;
    double max_sd_theta_diff = 0.0;
    double max_sd_theta_excess = 0.0; ///< max over parameters of (VB SD - Gibbs SD)
    std::size_t sd_underestimated = 0; ///< parameters with VB SD below Gibbs SD
    std::size_t theta_parameters = 0;
    double max_eap_pi_diff = 0.0;
    std::size_t max_eap_pi_at = 0;
    double max_sd_pi_diff = 0.0;
    std::vector<double> element_agreement;
    double pattern_agreement = 0.0;
    double max_rhat = 0.0;
    double vb_seconds = 0.0;
    double gibbs_seconds = 0.0;
};

inline Comparison compare_fits(const FitReport& vb, const McmcSummary& mcmc, const ProfileSpace& space) {
    Comparison c;
    c.max_sd_theta_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < vb.eap_theta.size(); ++j) {
        for (std::size_t p = 0; p < vb.eap_theta[j].size(); ++p) {
            const double d = std::abs(vb.eap_theta[j][p] - mcmc.eap_theta[j][p]);
            if (d > c.max_eap_theta_diff) {
                c.max_eap_theta_diff = d;
                c.max_eap_theta_at = {j, p};
            }
            const double excess = vb.sd_theta[j][p] - mcmc.sd_theta[j][p];
            c.max_sd_theta_diff = std::max(c.max_sd_theta_diff, std::abs(excess));
            c.max_sd_theta_excess = std::max(c.max_sd_theta_excess, excess);
            c.sd_underestimated += excess < 0.0 ? 1 : 0;
            ++c.theta_parameters;
        }
    }
    if (c.theta_parameters == 0) {
        c.max_sd_theta_excess = 0.0;
    }
    for (std::size_t l = 0; l < vb.eap_pi.size(); ++l) {
        const double d = std::abs(vb.eap_pi[l] - mcmc.eap_pi[l]);
        if (d > c.max_eap_pi_diff) {
            c.max_eap_pi_diff = d;
            c.max_eap_pi_at = l;
        }
        c.max_sd_pi_diff = std::max(c.max_sd_pi_diff, std::abs(vb.sd_pi[l] - mcmc.sd_pi[l]));
    }
    const auto rates = classification_rates({vb.map_profiles}, {mcmc.map_profiles}, space);
    c.element_agreement = rates.eacr;
    c.pattern_agreement = rates.pacr;
    c.max_rhat = mcmc.max_rhat;
    c.vb_seconds = vb.wall_time;
    c.gibbs_seconds = mcmc.wall_time;
    return c;
}

} // namespace pgdcm

#endif
