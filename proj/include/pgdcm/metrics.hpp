#ifndef PGDCM_METRICS_HPP
#define PGDCM_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/vb.hpp"

namespace pgdcm {

struct BiasRmse {
    double bias = 0.0;
    double rmse = 0.0;
    std::size_t parameters = 0;
};

/// Bucket key: number of attributes the item measures (K*_j).
using ThetaRecovery = std::map<std::size_t, BiasRmse>;

struct PiRecovery {
    double max_bias = 0.0;
    double min_bias = 0.0;
    double max_rmse = 0.0;
    double min_rmse = 0.0;
};

struct ClassificationRates {
    std::vector<double> eacr; ///< per attribute
    double pacr = 0.0;
};

struct MonotonicityViolation {
    std::size_t item = 0;
    std::size_t lower = 0; ///< pattern index dominated coordinatewise
    std::size_t upper = 0;
    double lower_value = 0.0;
    double upper_value = 0.0;
};

struct RecoveryReport {
    ThetaRecovery theta;
    PiRecovery pi;
    ClassificationRates rates;
    double convergence_rate = 0.0;
    double mean_wall_time = 0.0;
    std::size_t replications = 0;
};

/// Per-parameter bias and RMSE over replications, then averaged over all
/// parameters of items measuring the same number of attributes.
inline ThetaRecovery bias_rmse_theta(const std::vector<ItemTable>& estimates, const ItemTable& truth, const QMatrix& q) {
    require(!estimates.empty(), "need at least one replication");
    require(truth.size() == q.items(), "truth item count does not match the Q-matrix");
    const double reps = static_cast<double>(estimates.size());
    ThetaRecovery out;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        auto& bucket = out[k_star(q.row(j))];
        for (std::size_t p = 0; p < truth[j].size(); ++p) {
            double err = 0.0;
            double sq = 0.0;
            for (const auto& est : estimates) {
                require(est.size() == truth.size() && est[j].size() == truth[j].size(),
                        "estimate indexing does not match truth");
                const double d = est[j][p] - truth[j][p];
                err += d;
                sq += d * d;
            }
            bucket.bias += err / reps;
            bucket.rmse += std::sqrt(sq / reps);
            ++bucket.parameters;
        }
    }
    for (auto& [k, b] : out) {
        b.bias /= static_cast<double>(b.parameters);
        b.rmse /= static_cast<double>(b.parameters);
    }
    return out;
}

/// Extremes of per-profile bias and RMSE across the L mixing proportions.
inline PiRecovery bias_rmse_pi(const std::vector<std::vector<double>>& estimates, const std::vector<double>& truth) {
    require(!estimates.empty(), "need at least one replication");
    PiRecovery out{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    const double reps = static_cast<double>(estimates.size());
    for (std::size_t l = 0; l < truth.size(); ++l) {
        double err = 0.0;
        double sq = 0.0;
        for (const auto& est : estimates) {
            require(est.size() == truth.size(), "mixing-proportion length mismatch");
            const double d = est[l] - truth[l];
            err += d;
            sq += d * d;
        }
        const double bias = err / reps;
        const double rmse = std::sqrt(sq / reps);
        out.max_bias = std::max(out.max_bias, bias);
        out.min_bias = std::min(out.min_bias, bias);
        out.max_rmse = std::max(out.max_rmse, rmse);
        out.min_rmse = std::min(out.min_rmse, rmse);
    }
    return out;
}

/// Element-wise (per attribute) and pattern-wise exact-match rates, averaged
/// over examinees and then over replications.
inline ClassificationRates classification_rates(const std::vector<std::vector<std::size_t>>& estimated,
                                                const std::vector<std::vector<std::size_t>>& truth,
                                                const ProfileSpace& space) {
    require(!estimated.empty() && estimated.size() == truth.size(), "replication count mismatch");
    ClassificationRates out{std::vector<double>(space.attributes(), 0.0), 0.0};
    for (std::size_t t = 0; t < estimated.size(); ++t) {
        require(estimated[t].size() == truth[t].size(), "examinee count mismatch");
        const double n = static_cast<double>(truth[t].size());
        std::vector<double> element(space.attributes(), 0.0);
        double pattern = 0.0;
        for (std::size_t i = 0; i < truth[t].size(); ++i) {
            const auto a = space.profile(estimated[t][i]);
            const auto b = space.profile(truth[t][i]);
            for (std::size_t k = 0; k < a.size(); ++k) {
                element[k] += a[k] == b[k] ? 1.0 : 0.0;
            }
            pattern += estimated[t][i] == truth[t][i] ? 1.0 : 0.0;
        }
        for (std::size_t k = 0; k < element.size(); ++k) {
            out.eacr[k] += n > 0 ? element[k] / n : 1.0;
        }
        out.pacr += n > 0 ? pattern / n : 1.0;
    }
    const double reps = static_cast<double>(estimated.size());
    for (auto& e : out.eacr) {
        e /= reps;
    }
    out.pacr /= reps;
    return out;
}

/// Pairs of item patterns p <= q (coordinatewise, p != q) where the estimate
/// for q is strictly below the estimate for p. Incomparable pairs are skipped.
inline std::vector<MonotonicityViolation> monotonicity_check(const ItemTable& theta, const std::vector<GMatrix>& gmatrices) {
    require(theta.size() == gmatrices.size(), "theta item count does not match G-matrices");
    std::vector<MonotonicityViolation> out;
    for (std::size_t j = 0; j < gmatrices.size(); ++j) {
        const auto& g = gmatrices[j];
        require(theta[j].size() == g.pattern_count(), "theta pattern count mismatch");
        for (std::size_t p = 0; p < g.pattern_count(); ++p) {
            for (std::size_t q = 0; q < g.pattern_count(); ++q) {
                if (p == q) {
                    continue;
                }
                const auto a = g.pattern(p);
                const auto b = g.pattern(q);
                bool dominated = true;
                for (std::size_t k = 0; k < a.size() && dominated; ++k) {
                    dominated = a[k] <= b[k];
                }
                if (dominated && theta[j][q] < theta[j][p]) {
                    out.push_back({j, p, q, theta[j][p], theta[j][q]});
                }
            }
        }
    }
    return out;
}

} // namespace pgdcm

#endif
