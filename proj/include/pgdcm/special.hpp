#ifndef PGDCM_SPECIAL_HPP
#define PGDCM_SPECIAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

namespace pgdcm {

inline double digamma(double x) { return boost::math::digamma(x); }

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// (E[log theta], E[log(1 - theta)]) for theta ~ Beta(a, b).
inline std::pair<double, double> expected_log_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("expected_log_beta: parameters must be positive");
    }
    const double total = digamma(a + b);
    return {digamma(a) - total, digamma(b) - total};
}

/// E[log pi_l] for pi ~ Dirichlet(delta).
inline std::vector<double> expected_log_dirichlet(std::span<const double> delta) {
    double sum = 0.0;
    for (double d : delta) {
        sum += d;
    }
    const double total = digamma(sum);
    std::vector<double> out(delta.size());
    for (std::size_t l = 0; l < delta.size(); ++l) {
        out[l] = digamma(delta[l]) - total;
    }
    return out;
}

/// log of the Dirichlet normalizer, log Gamma(sum delta) - sum log Gamma(delta_l).
inline double log_dirichlet_norm(std::span<const double> delta) {
    double sum = 0.0;
    double lg = 0.0;
    for (double d : delta) {
        sum += d;
        lg += std::lgamma(d);
    }
    return std::lgamma(sum) - lg;
}

inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) {
        return m;
    }
    double s = 0.0;
    for (double x : v) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

inline double beta_sd(double a, double b) {
    const double s = a + b;
    return std::sqrt(a * b / (s * s * (s + 1.0)));
}

/// Marginal standard deviations of a Dirichlet(delta).
inline std::vector<double> dirichlet_sd(std::span<const double> delta) {
    double s = 0.0;
    for (double d : delta) {
        s += d;
    }
    std::vector<double> out(delta.size());
    for (std::size_t l = 0; l < delta.size(); ++l) {
        const double m = delta[l] / s;
        out[l] = std::sqrt(m * (1.0 - m) / (s + 1.0));
    }
    return out;
}

} // namespace pgdcm

#endif
