#ifndef PGDCM_RHAT_HPP
#define PGDCM_RHAT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "pgdcm/error.hpp"

namespace pgdcm {

/// Ranks (1-based) of the values, ties receiving their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t stop = start + 1;
        while (stop < order.size() && v[order[stop]] == v[order[start]]) {
            ++stop;
        }
        const double avg = 0.5 * static_cast<double>(start + 1 + stop);
        for (std::size_t t = start; t < stop; ++t) {
            ranks[order[t]] = avg;
        }
        start = stop;
    }
    return ranks;
}

/// Rank-normalized split R-hat. All chains are pooled and rank-normalized
/// with the (r - 3/8) / (S + 1/4) offset, each chain is cut into two halves
/// (dropping the middle draw of odd-length chains), and the classic
/// between/within variance ratio is computed over the 2 * chains pieces.
/// Constant input yields 1.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    require(!chains.empty(), "split_rhat needs at least one chain");
    const std::size_t n = chains.front().size();
    for (const auto& c : chains) {
        require(c.size() == n, "split_rhat chains must have equal length");
    }
    const std::size_t half = n / 2;
    require(half >= 4, "split_rhat needs at least 4 draws per split chain");

    std::vector<double> pooled;
    pooled.reserve(chains.size() * n);
    for (const auto& c : chains) {
        pooled.insert(pooled.end(), c.begin(), c.end());
    }
    const auto ranks = average_ranks(pooled);
    const boost::math::normal standard;
    const double total = static_cast<double>(pooled.size());
    std::vector<double> z(pooled.size());
    for (std::size_t t = 0; t < z.size(); ++t) {
        z[t] = boost::math::quantile(standard, (ranks[t] - 0.375) / (total + 0.25));
    }

    std::vector<double> means;
    std::vector<double> vars;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t piece = 0; piece < 2; ++piece) {
            const std::size_t begin = c * n + (piece == 0 ? 0 : n - half);
            double m = 0.0;
            for (std::size_t t = 0; t < half; ++t) {
                m += z[begin + t];
            }
            m /= static_cast<double>(half);
            double v = 0.0;
            for (std::size_t t = 0; t < half; ++t) {
                v += (z[begin + t] - m) * (z[begin + t] - m);
            }
            means.push_back(m);
            vars.push_back(v / static_cast<double>(half - 1));
        }
    }
    const double pieces = static_cast<double>(means.size());
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / pieces;
    double var_means = 0.0;
    for (double m : means) {
        var_means += (m - grand) * (m - grand);
    }
    var_means /= pieces - 1.0;
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / pieces;
    const double h = static_cast<double>(half);
    if (w <= 0.0) {
        return var_means <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    // B / h is the variance of the piece means.
    return std::sqrt(((h - 1.0) / h * w + var_means) / w);
}

} // namespace pgdcm

#endif
