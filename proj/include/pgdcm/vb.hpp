#ifndef PGDCM_VB_HPP
#define PGDCM_VB_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/matrix.hpp"
#include "pgdcm/parallel.hpp"
#include "pgdcm/rng.hpp"
#include "pgdcm/special.hpp"

namespace pgdcm {

/// Per-item, per-pattern values (theta_jl*, a_jl*, ...). Row j has one entry
/// per item-specific pattern, so rows have different lengths.
using ItemTable = std::vector<std::vector<double>>;

enum class PriorScheme { noninformative, weakly_informative };

inline const char* to_string(PriorScheme s) { return s == PriorScheme::noninformative ? "flat" : "weak"; }

inline PriorScheme parse_prior_scheme(const std::string& s) {
    if (s == "flat" || s == "noninformative") {
        return PriorScheme::noninformative;
    }
    if (s == "weak" || s == "weakly_informative") {
        return PriorScheme::weakly_informative;
    }
    throw InputError("unknown prior scheme '" + s + "' (expected weak|flat)");
}

/// Dirichlet concentration on the mixing proportions and Beta
/// hyperparameters on every item-pattern success probability.
struct Priors {
    std::vector<double> delta0;
    ItemTable a0;
    ItemTable b0;
};

inline ItemTable make_item_table(const Model& model, double fill) {
    ItemTable t(model.items());
    for (std::size_t j = 0; j < model.items(); ++j) {
        t[j].assign(model.gmatrix(j).pattern_count(), fill);
    }
    return t;
}

/// Index of the pattern whose every relevant attribute sits at its top level
/// (the all-ones row for the collapsed flavor).
inline std::size_t full_mastery_pattern(const GMatrix& g) { return g.pattern_count() - 1; }

/// flat: every hyperparameter 1. weak: Beta(1,2) on the no-mastery pattern
/// and Beta(2,1) on the full-mastery pattern so the prior means sit below and
/// above 0.5; everything else Beta(1,1).
inline Priors default_priors(const Model& model, PriorScheme scheme) {
    Priors p{std::vector<double>(model.profiles(), 1.0), make_item_table(model, 1.0), make_item_table(model, 1.0)};
    if (scheme == PriorScheme::weakly_informative) {
        for (std::size_t j = 0; j < model.items(); ++j) {
            p.b0[j][0] = 2.0;
            p.a0[j][full_mastery_pattern(model.gmatrix(j))] = 2.0;
        }
    }
    return p;
}

inline void validate_priors(const Model& model, const Priors& p) {
    require(p.delta0.size() == model.profiles(), "prior delta0 length does not match the number of profiles");
    for (double d : p.delta0) {
        require(d > 0.0, "prior delta0 entries must be positive");
    }
    require(p.a0.size() == model.items() && p.b0.size() == model.items(), "prior item count mismatch");
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto n = model.gmatrix(j).pattern_count();
        require(p.a0[j].size() == n && p.b0[j].size() == n, "prior pattern count mismatch on item " + std::to_string(j + 1));
        for (std::size_t q = 0; q < n; ++q) {
            require(p.a0[j][q] > 0.0 && p.b0[j][q] > 0.0, "Beta hyperparameters must be positive");
        }
    }
}

inline void validate_responses(const ResponseMatrix& x, const Model& model) {
    require(x.cols() == model.items(), "response matrix has " + std::to_string(x.cols()) + " items, Q-matrix has " +
                                           std::to_string(model.items()));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            require(x(i, j) <= 1, "response (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") is not 0/1");
        }
    }
}

struct VariationalState {
    Matrix<double> r;               ///< N x L responsibilities
    std::vector<double> delta_star; ///< Dirichlet parameters of q(pi)
    ItemTable a_star;               ///< Beta parameters of q(theta)
    ItemTable b_star;
    std::vector<double> vlb_trace;
};

/// Uniform responsibilities 1/L, or rows drawn from Dirichlet(1,...,1) when a
/// seed is given.
inline Matrix<double> initial_responsibilities(std::size_t n, std::size_t l_count, std::optional<std::uint64_t> dirichlet_seed) {
    Matrix<double> r(n, l_count, 1.0 / static_cast<double>(l_count));
    if (!dirichlet_seed) {
        return r;
    }
    Rng rng = make_rng(*dirichlet_seed, "vb-init");
    for (std::size_t i = 0; i < n; ++i) {
        auto row = r.row(i);
        double s = 0.0;
        for (auto& v : row) {
            v = -std::log1p(-uniform01(rng)); // Exp(1) = Gamma(1,1)
            s += v;
        }
        for (auto& v : row) {
            v /= s;
        }
    }
    return r;
}

namespace detail {

/// E[log theta] and E[log(1-theta)] expanded from patterns to profiles:
/// table[j][x * L + l] is the expected log-likelihood of response x to item j
/// for profile l. This is the gather form of the G-matrix product.
inline std::vector<std::vector<double>> expanded_log_lik(const Model& model, const ItemTable& a, const ItemTable& b) {
    const std::size_t l_count = model.profiles();
    std::vector<std::vector<double>> table(model.items(), std::vector<double>(2 * l_count));
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto& g = model.gmatrix(j);
        std::vector<double> e1(g.pattern_count());
        std::vector<double> e0(g.pattern_count());
        for (std::size_t p = 0; p < g.pattern_count(); ++p) {
            std::tie(e1[p], e0[p]) = expected_log_beta(a[j][p], b[j][p]);
        }
        for (std::size_t l = 0; l < l_count; ++l) {
            table[j][l] = e0[g.lookup()[l]];
            table[j][l_count + l] = e1[g.lookup()[l]];
        }
    }
    return table;
}

/// E[log p(pi)] - E[log q(pi)] + E[log p(theta)] - E[log q(theta)].
inline double parameter_terms(const VariationalState& s, const Priors& p) {
    const auto elog_pi = expected_log_dirichlet(s.delta_star);
    double out = log_dirichlet_norm(p.delta0) - log_dirichlet_norm(s.delta_star);
    for (std::size_t l = 0; l < elog_pi.size(); ++l) {
        out += (p.delta0[l] - s.delta_star[l]) * elog_pi[l];
    }
    for (std::size_t j = 0; j < s.a_star.size(); ++j) {
        for (std::size_t q = 0; q < s.a_star[j].size(); ++q) {
            const double a = s.a_star[j][q];
            const double b = s.b_star[j][q];
            const auto [e1, e0] = expected_log_beta(a, b);
            out += log_beta(a, b) - log_beta(p.a0[j][q], p.b0[j][q]) + (p.a0[j][q] - a) * e1 + (p.b0[j][q] - b) * e0;
        }
    }
    return out;
}

} // namespace detail

/// Updates s.r from the current q(theta), q(pi). Examinees are split into
/// pool.size() contiguous chunks. Returns log sum_l rho_il per examinee.
inline std::vector<double> ve_step(const ResponseMatrix& x, const Model& model, VariationalState& s, WorkerPool& pool) {
    const std::size_t n = x.rows();
    const std::size_t l_count = model.profiles();
    const std::size_t j_count = model.items();
    const auto table = detail::expanded_log_lik(model, s.a_star, s.b_star);
    const auto elog_pi = expected_log_dirichlet(s.delta_star);
    std::vector<double> log_norm(n);

    pool.run([&](std::size_t c) {
        const auto range = chunk_range(n, pool.size(), c);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            double* row = s.r.row(i).data();
            const unsigned char* xi = x.row(i).data();
            std::copy(elog_pi.begin(), elog_pi.end(), row);
            for (std::size_t j = 0; j < j_count; ++j) {
                const double* t = table[j].data() + (xi[j] ? l_count : 0);
                for (std::size_t l = 0; l < l_count; ++l) {
                    row[l] += t[l];
                }
            }
            const double lse = log_sum_exp(std::span<const double>(row, l_count));
            for (std::size_t l = 0; l < l_count; ++l) {
                row[l] = std::exp(row[l] - lse);
            }
            log_norm[i] = lse;
        }
    });
    return log_norm;
}

inline std::vector<double> ve_step(const ResponseMatrix& x, const Model& model, VariationalState& s, std::size_t chunks) {
    WorkerPool pool(chunks);
    return ve_step(x, model, s, pool);
}

/// delta*_l = delta0_l + sum_i r_il, accumulated in examinee order.
inline std::vector<double> update_pi(const Matrix<double>& r, const Priors& p) {
    std::vector<double> delta = p.delta0;
    for (std::size_t i = 0; i < r.rows(); ++i) {
        const auto row = r.row(i);
        for (std::size_t l = 0; l < row.size(); ++l) {
            delta[l] += row[l];
        }
    }
    return delta;
}

/// a*_jl* = a0 + sum_i sum_l g r x, b*_jl* = b0 + sum_i sum_l g r (1-x).
/// Items are split into pool.size() chunks; each item accumulates the
/// per-profile sums over examinees in index order, then folds profiles into
/// their pattern bucket.
inline std::pair<ItemTable, ItemTable> vm_step(const ResponseMatrix& x, const Model& model, const Matrix<double>& r,
                                               const Priors& p, WorkerPool& pool) {
    const std::size_t n = x.rows();
    const std::size_t l_count = model.profiles();
    const std::size_t j_count = model.items();
    ItemTable a = p.a0;
    ItemTable b = p.b0;
    std::vector<double> acc(j_count * 2 * l_count, 0.0);

    pool.run([&](std::size_t c) {
        const auto range = chunk_range(j_count, pool.size(), c);
        if (range.begin == range.end) {
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = r.row(i).data();
            const unsigned char* xi = x.row(i).data();
            for (std::size_t j = range.begin; j < range.end; ++j) {
                double* dst = acc.data() + (2 * j + xi[j]) * l_count;
                for (std::size_t l = 0; l < l_count; ++l) {
                    dst[l] += ri[l];
                }
            }
        }
        for (std::size_t j = range.begin; j < range.end; ++j) {
            const auto& lookup = model.gmatrix(j).lookup();
            const double* fail = acc.data() + 2 * j * l_count;
            const double* pass = fail + l_count;
            for (std::size_t l = 0; l < l_count; ++l) {
                a[j][lookup[l]] += pass[l];
                b[j][lookup[l]] += fail[l];
            }
        }
    });
    return {std::move(a), std::move(b)};
}

inline std::pair<ItemTable, ItemTable> vm_step(const ResponseMatrix& x, const Model& model, const Matrix<double>& r,
                                               const Priors& p, std::size_t chunks) {
    WorkerPool pool(chunks);
    return vm_step(x, model, r, p, pool);
}

/// Variational lower bound assembled term by term:
///   E[log p(X|Z,theta)] + E[log p(Z|pi)] + E[log p(pi)] + E[log p(theta)]
///   - E[log q(Z)] - E[log q(theta)] - E[log q(pi)]
/// with 0 log 0 = 0 in the entropy of q(Z).
inline double compute_vlb(const ResponseMatrix& x, const Model& model, const VariationalState& s, const Priors& p) {
    const std::size_t l_count = model.profiles();
    const auto table = detail::expanded_log_lik(model, s.a_star, s.b_star);
    const auto elog_pi = expected_log_dirichlet(s.delta_star);

    double likelihood = 0.0;
    double z_prior = 0.0;
    double z_entropy = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto ri = s.r.row(i);
        for (std::size_t j = 0; j < model.items(); ++j) {
            const double* t = table[j].data() + (x(i, j) ? l_count : 0);
            for (std::size_t l = 0; l < l_count; ++l) {
                likelihood += ri[l] * t[l];
            }
        }
        for (std::size_t l = 0; l < l_count; ++l) {
            z_prior += ri[l] * elog_pi[l];
            if (ri[l] > 0.0) {
                z_entropy += ri[l] * std::log(ri[l]);
            }
        }
    }

    double pi_prior = log_dirichlet_norm(p.delta0);
    double pi_q = log_dirichlet_norm(s.delta_star);
    for (std::size_t l = 0; l < l_count; ++l) {
        pi_prior += (p.delta0[l] - 1.0) * elog_pi[l];
        pi_q += (s.delta_star[l] - 1.0) * elog_pi[l];
    }

    double theta_prior = 0.0;
    double theta_q = 0.0;
    for (std::size_t j = 0; j < model.items(); ++j) {
        for (std::size_t q = 0; q < s.a_star[j].size(); ++q) {
            const auto [e1, e0] = expected_log_beta(s.a_star[j][q], s.b_star[j][q]);
            theta_prior += -log_beta(p.a0[j][q], p.b0[j][q]) + (p.a0[j][q] - 1.0) * e1 + (p.b0[j][q] - 1.0) * e0;
            theta_q += -log_beta(s.a_star[j][q], s.b_star[j][q]) + (s.a_star[j][q] - 1.0) * e1 + (s.b_star[j][q] - 1.0) * e0;
        }
    }
    return likelihood + z_prior + pi_prior + theta_prior - z_entropy - theta_q - pi_q;
}

struct FitConfig {
    double tol = 1e-4;
    std::size_t max_iter = 2000;
    std::size_t cores = 8;
    std::optional<std::uint64_t> dirichlet_seed; ///< unset: uniform 1/L start
};

struct FitReport {
    VariationalState state;
    bool converged = false;
    std::size_t iterations = 0;
    ItemTable eap_theta;
    ItemTable sd_theta;
    std::vector<double> eap_pi;
    std::vector<double> sd_pi;
    std::vector<std::size_t> map_profiles;
    double wall_time = 0.0;
};

inline double posterior_sd_beta(double a, double b) { return beta_sd(a, b); }

inline std::vector<double> posterior_sd_dirichlet(std::span<const double> delta) { return dirichlet_sd(delta); }

/// argmax_l of each row, lowest index on ties.
inline std::vector<std::size_t> map_profiles(const Matrix<double>& r) {
    std::vector<std::size_t> out(r.rows());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        const auto row = r.row(i);
        std::size_t best = 0;
        for (std::size_t l = 1; l < row.size(); ++l) {
            if (row[l] > row[best]) {
                best = l;
            }
        }
        out[i] = best;
    }
    return out;
}

inline void summarize(FitReport& rep) {
    const auto& s = rep.state;
    rep.eap_theta = s.a_star;
    rep.sd_theta = s.a_star;
    for (std::size_t j = 0; j < s.a_star.size(); ++j) {
        for (std::size_t q = 0; q < s.a_star[j].size(); ++q) {
            const double a = s.a_star[j][q];
            const double b = s.b_star[j][q];
            rep.eap_theta[j][q] = a / (a + b);
            rep.sd_theta[j][q] = posterior_sd_beta(a, b);
        }
    }
    double total = 0.0;
    for (double d : s.delta_star) {
        total += d;
    }
    rep.eap_pi.resize(s.delta_star.size());
    for (std::size_t l = 0; l < s.delta_star.size(); ++l) {
        rep.eap_pi[l] = s.delta_star[l] / total;
    }
    rep.sd_pi = posterior_sd_dirichlet(s.delta_star);
    rep.map_profiles = map_profiles(s.r);
}

/// Coordinate-ascent VB. Each iteration runs VM, the pi update, then VE, and
/// records the VLB; stops once |VLB change| < tol or after max_iter sweeps.
/// The trace is bit-identical for every value of config.cores.
inline FitReport fit(const ResponseMatrix& x, const Model& model, const Priors& priors, const FitConfig& config) {
    validate_responses(x, model);
    validate_priors(model, priors);
    require(config.max_iter >= 1, "max_iter must be at least 1");
    require(config.tol > 0.0, "tol must be positive");
    const auto start = std::chrono::steady_clock::now();

    FitReport rep;
    auto& s = rep.state;
    s.r = initial_responsibilities(x.rows(), model.profiles(), config.dirichlet_seed);
    WorkerPool pool(config.cores);

    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        std::tie(s.a_star, s.b_star) = vm_step(x, model, s.r, priors, pool);
        s.delta_star = update_pi(s.r, priors);
        const auto log_norm = ve_step(x, model, s, pool);

        double vlb = detail::parameter_terms(s, priors);
        for (double v : log_norm) {
            vlb += v;
        }
        if (!std::isfinite(vlb)) {
            throw NumericalError("VLB became non-finite at iteration " + std::to_string(iter));
        }
        s.vlb_trace.push_back(vlb);
        rep.iterations = iter;
        if (iter > 1 && std::abs(vlb - s.vlb_trace[iter - 2]) < config.tol) {
            rep.converged = true;
            break;
        }
    }
    summarize(rep);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

inline FitReport fit(const ResponseMatrix& x, const QMatrix& q, Flavor flavor, const Priors& priors, const FitConfig& config) {
    return fit(x, Model(q, flavor), priors, config);
}

} // namespace pgdcm

#endif
