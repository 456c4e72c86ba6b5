#ifndef PGDCM_EFFECTS_HPP
#define PGDCM_EFFECTS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/matrix.hpp"

namespace pgdcm {

/// Intercept, main and interaction effects of one item. Term t covers the
/// attribute subset terms[t] (positions into the item's relevant attributes);
/// terms are ordered by subset size, then lexicographically, so term 0 is the
/// intercept.
struct DeltaEffects {
    std::vector<std::vector<std::size_t>> terms;
    std::vector<double> values;
};

/// Every subset of {0..k-1}, by size then lexicographically.
inline std::vector<std::vector<std::size_t>> effect_terms(std::size_t k) {
    std::vector<std::vector<std::size_t>> out{{}};
    for (std::size_t size = 1; size <= k; ++size) {
        std::vector<std::size_t> cur(size);
        for (std::size_t i = 0; i < size; ++i) {
            cur[i] = i;
        }
        for (;;) {
            out.push_back(cur);
            std::size_t pos = size;
            while (pos-- > 0) {
                if (cur[pos] < k - size + pos) {
                    ++cur[pos];
                    for (std::size_t t = pos + 1; t < size; ++t) {
                        cur[t] = cur[t - 1] + 1;
                    }
                    break;
                }
            }
            if (pos == static_cast<std::size_t>(-1)) {
                break;
            }
        }
    }
    return out;
}

/// Design matrix with one row per pattern and one column per term; entry is
/// the product of the pattern's values over the term's attributes.
inline Eigen::MatrixXd effects_design(const Matrix<int>& patterns, const std::vector<std::vector<std::size_t>>& terms) {
    Eigen::MatrixXd d(static_cast<Eigen::Index>(patterns.rows()), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t p = 0; p < patterns.rows(); ++p) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            double v = 1.0;
            for (std::size_t a : terms[t]) {
                v *= patterns(p, a);
            }
            d(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)) = v;
        }
    }
    return d;
}

/// Least-squares effects delta = argmin ||D delta - theta||. The collapsed
/// full-factorial design is square and invertible, so the fit is exact.
inline DeltaEffects theta_to_delta(const std::vector<double>& theta, const Matrix<int>& patterns) {
    require(theta.size() == patterns.rows(), "theta length does not match the pattern count");
    DeltaEffects out;
    out.terms = effect_terms(patterns.cols());
    const Eigen::MatrixXd d = effects_design(patterns, out.terms);
    require(d.rows() >= d.cols(), "fewer patterns than effect terms");
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
    require(qr.rank() == d.cols(), "effects design matrix is rank deficient");
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    const Eigen::VectorXd delta = qr.solve(rhs);
    out.values.assign(delta.data(), delta.data() + delta.size());
    return out;
}

inline std::vector<double> delta_to_theta(const DeltaEffects& effects, const Matrix<int>& patterns) {
    const Eigen::MatrixXd d = effects_design(patterns, effects.terms);
    const Eigen::VectorXd v =
        d * Eigen::Map<const Eigen::VectorXd>(effects.values.data(), static_cast<Eigen::Index>(effects.values.size()));
    return {v.data(), v.data() + v.size()};
}

/// "d0", "d1", "d13" with 1-based original attribute numbers; numbers are
/// joined by '_' when K >= 10.
inline std::string effect_label(const std::vector<std::size_t>& term, const std::vector<std::size_t>& attributes,
                                std::size_t total_attributes) {
    if (term.empty()) {
        return "d0";
    }
    std::string s = "d";
    for (std::size_t t = 0; t < term.size(); ++t) {
        if (t > 0 && total_attributes >= 10) {
            s += '_';
        }
        s += std::to_string(attributes[term[t]] + 1);
    }
    return s;
}

} // namespace pgdcm

#endif
