#ifndef PGDCM_GIBBS_HPP
#define PGDCM_GIBBS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/matrix.hpp"
#include "pgdcm/parallel.hpp"
#include "pgdcm/rhat.hpp"
#include "pgdcm/rng.hpp"
#include "pgdcm/vb.hpp"

namespace pgdcm {

struct ChainConfig {
    std::size_t n_chains = 3;
    std::size_t n_iter = 5000;
    std::size_t burn_in = 2000;
    std::size_t thin = 1;
    std::uint64_t seed = 1;
    std::size_t cores = 3;    ///< chains run concurrently on up to this many threads
    bool keep_draws = false;  ///< retain raw post-burn-in draws in the summary
};

/// Post-burn-in draws of one chain: one row per kept sweep.
struct ChainDraws {
    Matrix<double> theta; ///< kept sweeps x flattened (item, pattern)
    Matrix<double> pi;    ///< kept sweeps x L
};

struct McmcSummary {
    ItemTable eap_theta;
    ItemTable sd_theta;
    ItemTable rhat_theta;
    std::vector<double> eap_pi;
    std::vector<double> sd_pi;
    std::vector<double> rhat_pi;
    std::vector<std::size_t> map_profiles; ///< per-examinee modal profile of the z draws
    double max_rhat = 0.0;
    double pi_sum_error = 0.0;             ///< |sum(eap_pi) - 1|
    double wall_time = 0.0;
    std::vector<ChainDraws> draws;         ///< filled only with keep_draws
};

namespace detail {

inline double draw_beta(Rng& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double v = x / (x + y);
    // Keep log(theta) and log(1 - theta) finite.
    return std::clamp(v, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon());
}

inline void draw_dirichlet(Rng& rng, const std::vector<double>& alpha, std::vector<double>& out) {
    out.resize(alpha.size());
    double s = 0.0;
    for (std::size_t l = 0; l < alpha.size(); ++l) {
        std::gamma_distribution<double> g(alpha[l], 1.0);
        out[l] = g(rng);
        s += out[l];
    }
    for (auto& v : out) {
        v = std::max(v / s, std::numeric_limits<double>::min());
    }
}

struct ChainResult {
    ChainDraws draws;
    Matrix<std::uint32_t> profile_counts; ///< N x L visit counts after burn-in
};

/// One Gibbs chain. Starts from pi and theta drawn from their priors; every
/// sweep draws z | pi, theta, then pi | z, then theta | z.
inline ChainResult run_chain(const ResponseMatrix& x, const Model& model, const Priors& priors, const ChainConfig& cfg,
                             std::size_t chain) {
    Rng rng = make_rng(cfg.seed, "gibbs-chain", chain);
    const std::size_t n = x.rows();
    const std::size_t l_count = model.profiles();
    const std::size_t j_count = model.items();
    std::vector<std::size_t> offset(j_count + 1, 0);
    for (std::size_t j = 0; j < j_count; ++j) {
        offset[j + 1] = offset[j] + model.gmatrix(j).pattern_count();
    }
    const std::size_t n_theta = offset[j_count];

    std::vector<double> pi;
    draw_dirichlet(rng, priors.delta0, pi);
    std::vector<double> theta(n_theta);
    for (std::size_t j = 0; j < j_count; ++j) {
        for (std::size_t p = 0; p < priors.a0[j].size(); ++p) {
            theta[offset[j] + p] = draw_beta(rng, priors.a0[j][p], priors.b0[j][p]);
        }
    }

    const std::size_t kept = (cfg.n_iter - cfg.burn_in + cfg.thin - 1) / cfg.thin;
    ChainResult out{{Matrix<double>(kept, n_theta), Matrix<double>(kept, l_count)},
                    Matrix<std::uint32_t>(n, l_count, 0)};

    std::vector<std::vector<double>> log_lik(j_count, std::vector<double>(2 * l_count));
    std::vector<double> logp(l_count);
    std::vector<std::size_t> z(n);
    std::vector<double> counts(l_count);
    std::vector<double> success(n_theta);
    std::vector<double> failure(n_theta);
    std::vector<double> alpha(l_count);

    std::size_t row = 0;
    for (std::size_t sweep = 0; sweep < cfg.n_iter; ++sweep) {
        for (std::size_t j = 0; j < j_count; ++j) {
            const auto& lookup = model.gmatrix(j).lookup();
            for (std::size_t l = 0; l < l_count; ++l) {
                const double t = theta[offset[j] + lookup[l]];
                log_lik[j][l] = std::log1p(-t);
                log_lik[j][l_count + l] = std::log(t);
            }
        }
        std::fill(counts.begin(), counts.end(), 0.0);
        std::fill(success.begin(), success.end(), 0.0);
        std::fill(failure.begin(), failure.end(), 0.0);

        for (std::size_t i = 0; i < n; ++i) {
            const unsigned char* xi = x.row(i).data();
            for (std::size_t l = 0; l < l_count; ++l) {
                logp[l] = std::log(pi[l]);
            }
            for (std::size_t j = 0; j < j_count; ++j) {
                const double* t = log_lik[j].data() + (xi[j] ? l_count : 0);
                for (std::size_t l = 0; l < l_count; ++l) {
                    logp[l] += t[l];
                }
            }
            const double m = *std::max_element(logp.begin(), logp.end());
            double total = 0.0;
            for (auto& v : logp) {
                v = std::exp(v - m);
                total += v;
            }
            double u = uniform01(rng) * total;
            std::size_t pick = l_count - 1;
            for (std::size_t l = 0; l < l_count; ++l) {
                u -= logp[l];
                if (u < 0.0) {
                    pick = l;
                    break;
                }
            }
            z[i] = pick;
            counts[pick] += 1.0;
            for (std::size_t j = 0; j < j_count; ++j) {
                const std::size_t idx = offset[j] + model.gmatrix(j).lookup()[pick];
                (xi[j] ? success : failure)[idx] += 1.0;
            }
        }

        for (std::size_t l = 0; l < l_count; ++l) {
            alpha[l] = priors.delta0[l] + counts[l];
        }
        draw_dirichlet(rng, alpha, pi);
        for (std::size_t j = 0; j < j_count; ++j) {
            for (std::size_t p = 0; p < priors.a0[j].size(); ++p) {
                const std::size_t idx = offset[j] + p;
                theta[idx] = draw_beta(rng, priors.a0[j][p] + success[idx], priors.b0[j][p] + failure[idx]);
            }
        }

        if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) {
            std::copy(theta.begin(), theta.end(), out.draws.theta.row(row).begin());
            std::copy(pi.begin(), pi.end(), out.draws.pi.row(row).begin());
            for (std::size_t i = 0; i < n; ++i) {
                ++out.profile_counts(i, z[i]);
            }
            ++row;
        }
    }
    return out;
}

inline void column_summary(const std::vector<ChainResult>& chains, bool use_theta, std::size_t col, double& mean,
                           double& sd, double& rhat) {
    std::vector<std::vector<double>> per_chain;
    double s = 0.0;
    std::size_t count = 0;
    for (const auto& c : chains) {
        const auto& m = use_theta ? c.draws.theta : c.draws.pi;
        std::vector<double> v(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            v[r] = m(r, col);
            s += v[r];
        }
        count += v.size();
        per_chain.push_back(std::move(v));
    }
    mean = s / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& v : per_chain) {
        for (double d : v) {
            ss += (d - mean) * (d - mean);
        }
    }
    sd = std::sqrt(ss / static_cast<double>(count - 1));
    rhat = split_rhat(per_chain);
}

} // namespace detail

/// Conjugate Gibbs sampler for the same model as fit(). Chains use private
/// generator streams derived from cfg.seed, so summaries do not depend on
/// cfg.cores.
inline McmcSummary gibbs_fit(const ResponseMatrix& x, const Model& model, const Priors& priors, const ChainConfig& cfg) {
    validate_responses(x, model);
    validate_priors(model, priors);
    require(cfg.n_chains >= 1, "need at least one chain");
    require(cfg.n_iter > cfg.burn_in, "n_iter must exceed burn_in");
    require(cfg.thin >= 1, "thin must be at least 1");
    const auto start = std::chrono::steady_clock::now();

    std::vector<detail::ChainResult> chains(cfg.n_chains);
    WorkerPool pool(std::min(cfg.cores, cfg.n_chains));
    pool.run([&](std::size_t c) {
        const auto range = chunk_range(cfg.n_chains, pool.size(), c);
        for (std::size_t ch = range.begin; ch < range.end; ++ch) {
            chains[ch] = detail::run_chain(x, model, priors, cfg, ch);
        }
    });

    McmcSummary out;
    out.eap_theta = make_item_table(model, 0.0);
    out.sd_theta = out.eap_theta;
    out.rhat_theta = out.eap_theta;
    std::size_t col = 0;
    for (std::size_t j = 0; j < model.items(); ++j) {
        for (std::size_t p = 0; p < out.eap_theta[j].size(); ++p, ++col) {
            detail::column_summary(chains, true, col, out.eap_theta[j][p], out.sd_theta[j][p], out.rhat_theta[j][p]);
            out.max_rhat = std::max(out.max_rhat, out.rhat_theta[j][p]);
        }
    }
    const std::size_t l_count = model.profiles();
    out.eap_pi.resize(l_count);
    out.sd_pi.resize(l_count);
    out.rhat_pi.resize(l_count);
    double pi_sum = 0.0;
    for (std::size_t l = 0; l < l_count; ++l) {
        detail::column_summary(chains, false, l, out.eap_pi[l], out.sd_pi[l], out.rhat_pi[l]);
        out.max_rhat = std::max(out.max_rhat, out.rhat_pi[l]);
        pi_sum += out.eap_pi[l];
    }
    out.pi_sum_error = std::abs(pi_sum - 1.0);

    out.map_profiles.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t best = 0;
        std::uint64_t best_count = 0;
        for (std::size_t l = 0; l < l_count; ++l) {
            std::uint64_t total = 0;
            for (const auto& c : chains) {
                total += c.profile_counts(i, l);
            }
            if (total > best_count) {
                best_count = total;
                best = l;
            }
        }
        out.map_profiles[i] = best;
    }
    if (cfg.keep_draws) {
        for (auto& c : chains) {
            out.draws.push_back(std::move(c.draws));
        }
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace pgdcm

#endif
