#ifndef PGDCM_TEST_ORACLES_HPP
#define PGDCM_TEST_ORACLES_HPP

// Reference computations written independently of the library code paths:
// nested enumeration, extended precision and dense linear algebra.

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "pgdcm/pgdcm.hpp"

namespace oracle {

/// Profile l decoded as a mixed-radix number, last attribute fastest.
inline std::vector<int> decode_profile(std::size_t l, const std::vector<int>& levels) {
    std::vector<int> a(levels.size());
    for (std::size_t k = levels.size(); k-- > 0;) {
        a[k] = static_cast<int>(l % static_cast<std::size_t>(levels[k]));
        l /= static_cast<std::size_t>(levels[k]);
    }
    return a;
}

inline std::size_t profile_count(const std::vector<int>& levels) {
    std::size_t l = 1;
    for (int m : levels) {
        l *= static_cast<std::size_t>(m);
    }
    return l;
}

/// Pattern index of a profile on an item: digits over the relevant
/// attributes, binary (alpha_k >= q_k) when collapsed, alpha_k when reduced.
inline std::size_t pattern_index(const std::vector<int>& alpha, std::span<const int> q_row,
                                 const std::vector<int>& levels, pgdcm::Flavor flavor) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < q_row.size(); ++k) {
        if (q_row[k] == 0) {
            continue;
        }
        if (flavor == pgdcm::Flavor::collapsed) {
            idx = idx * 2 + (alpha[k] >= q_row[k] ? 1 : 0);
        } else {
            idx = idx * static_cast<std::size_t>(levels[k]) + static_cast<std::size_t>(alpha[k]);
        }
    }
    return idx;
}

inline std::size_t pattern_total(std::span<const int> q_row, const std::vector<int>& levels, pgdcm::Flavor flavor) {
    std::size_t n = 1;
    for (std::size_t k = 0; k < q_row.size(); ++k) {
        if (q_row[k] > 0) {
            n *= flavor == pgdcm::Flavor::collapsed ? 2 : static_cast<std::size_t>(levels[k]);
        }
    }
    return n;
}

/// Dense pattern-by-profile indicator matrix of one item.
inline Eigen::MatrixXd dense_g(const pgdcm::QMatrix& q, std::size_t j, pgdcm::Flavor flavor) {
    const auto& levels = q.levels();
    const std::size_t l_count = profile_count(levels);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pattern_total(q.row(j), levels, flavor)),
                                              static_cast<Eigen::Index>(l_count));
    for (std::size_t l = 0; l < l_count; ++l) {
        g(static_cast<Eigen::Index>(pattern_index(decode_profile(l, levels), q.row(j), levels, flavor)),
          static_cast<Eigen::Index>(l)) = 1.0;
    }
    return g;
}

inline long double digamma_ld(long double x) { return boost::math::digamma(x); }

/// Normalized exp(E[log joint]) for every examinee and profile, each of the
/// L terms evaluated directly in long double.
inline std::vector<std::vector<long double>> brute_force_ve(const pgdcm::ResponseMatrix& x, const pgdcm::QMatrix& q,
                                                            pgdcm::Flavor flavor, const pgdcm::VariationalState& s) {
    const auto& levels = q.levels();
    const std::size_t l_count = profile_count(levels);
    long double dsum = 0;
    for (double d : s.delta_star) {
        dsum += d;
    }
    std::vector<std::vector<long double>> out(x.rows(), std::vector<long double>(l_count));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::vector<long double> w(l_count);
        long double total = 0;
        for (std::size_t l = 0; l < l_count; ++l) {
            const auto alpha = decode_profile(l, levels);
            long double lj = digamma_ld(s.delta_star[l]) - digamma_ld(dsum);
            for (std::size_t j = 0; j < q.items(); ++j) {
                const std::size_t p = pattern_index(alpha, q.row(j), levels, flavor);
                const long double a = s.a_star[j][p];
                const long double b = s.b_star[j][p];
                const long double e = x(i, j) ? digamma_ld(a) - digamma_ld(a + b) : digamma_ld(b) - digamma_ld(a + b);
                lj += e;
            }
            w[l] = std::exp(lj);
            total += w[l];
        }
        for (std::size_t l = 0; l < l_count; ++l) {
            out[i][l] = w[l] / total;
        }
    }
    return out;
}

/// a* and b* from the dense product G_j R^T x_j.
inline std::pair<pgdcm::ItemTable, pgdcm::ItemTable> dense_vm(const pgdcm::ResponseMatrix& x, const pgdcm::QMatrix& q,
                                                              pgdcm::Flavor flavor, const pgdcm::Matrix<double>& r,
                                                              const pgdcm::Priors& p) {
    Eigen::MatrixXd rm(static_cast<Eigen::Index>(r.rows()), static_cast<Eigen::Index>(r.cols()));
    for (std::size_t i = 0; i < r.rows(); ++i) {
        for (std::size_t l = 0; l < r.cols(); ++l) {
            rm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = r(i, l);
        }
    }
    pgdcm::ItemTable a = p.a0;
    pgdcm::ItemTable b = p.b0;
    for (std::size_t j = 0; j < q.items(); ++j) {
        Eigen::VectorXd xj(static_cast<Eigen::Index>(x.rows()));
        for (std::size_t i = 0; i < x.rows(); ++i) {
            xj(static_cast<Eigen::Index>(i)) = x(i, j);
        }
        const Eigen::MatrixXd g = dense_g(q, j, flavor);
        const Eigen::VectorXd pass = g * (rm.transpose() * xj);
        const Eigen::VectorXd fail = g * (rm.transpose() * (Eigen::VectorXd::Ones(xj.size()) - xj));
        for (Eigen::Index k = 0; k < pass.size(); ++k) {
            a[j][static_cast<std::size_t>(k)] += pass(k);
            b[j][static_cast<std::size_t>(k)] += fail(k);
        }
    }
    return {a, b};
}

/// Random positive variational parameters shaped for the model.
inline pgdcm::VariationalState random_state(pgdcm::Rng& rng, const pgdcm::Model& model, std::size_t n) {
    pgdcm::VariationalState s;
    s.r = pgdcm::Matrix<double>(n, model.profiles(), 0.0);
    s.delta_star.resize(model.profiles());
    for (auto& d : s.delta_star) {
        d = 0.2 + 5.0 * pgdcm::uniform01(rng);
    }
    s.a_star = pgdcm::make_item_table(model, 0.0);
    s.b_star = s.a_star;
    for (std::size_t j = 0; j < model.items(); ++j) {
        for (std::size_t p = 0; p < s.a_star[j].size(); ++p) {
            s.a_star[j][p] = 0.2 + 5.0 * pgdcm::uniform01(rng);
            s.b_star[j][p] = 0.2 + 5.0 * pgdcm::uniform01(rng);
        }
    }
    return s;
}

/// Random normalized responsibilities.
inline pgdcm::Matrix<double> random_r(pgdcm::Rng& rng, std::size_t n, std::size_t l_count) {
    pgdcm::Matrix<double> r(n, l_count);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (auto& v : r.row(i)) {
            v = pgdcm::uniform01(rng) + 1e-3;
            s += v;
        }
        for (auto& v : r.row(i)) {
            v /= s;
        }
    }
    return r;
}

/// Every levels vector with at most 9 profiles used by the small-instance sweeps.
inline std::vector<std::vector<int>> small_level_sets() {
    return {{2}, {3}, {4}, {5}, {9}, {2, 2}, {2, 3}, {3, 2}, {3, 3}, {2, 4}, {4, 2}, {2, 2, 2}};
}

} // namespace oracle

#endif
