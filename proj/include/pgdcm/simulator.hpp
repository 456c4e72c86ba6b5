#ifndef PGDCM_SIMULATOR_HPP
#define PGDCM_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/parallel.hpp"
#include "pgdcm/rng.hpp"
#include "pgdcm/vb.hpp"

namespace pgdcm {

// ---------------------------------------------------------------------------
// Built-in Q-matrix designs
// ---------------------------------------------------------------------------

enum class Design { K4J60, K4J120, K7J60, K7J120, G9 };

inline Design parse_design(const std::string& s) {
    if (s == "K4J60") return Design::K4J60;
    if (s == "K4J120") return Design::K4J120;
    if (s == "K7J60") return Design::K7J60;
    if (s == "K7J120") return Design::K7J120;
    if (s == "G9") return Design::G9;
    throw InputError("unknown design '" + s + "' (expected K4J60|K4J120|K7J60|K7J120|G9)");
}

inline const char* to_string(Design d) {
    switch (d) {
    case Design::K4J60: return "K4J60";
    case Design::K4J120: return "K4J120";
    case Design::K7J60: return "K7J60";
    case Design::K7J120: return "K7J120";
    case Design::G9: return "G9";
    }
    return "?";
}

namespace detail {

/// Subsets of {0..k-1} with `size` elements, lexicographic.
inline std::vector<std::vector<std::size_t>> combinations(std::size_t k, std::size_t size) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur(size);
    std::iota(cur.begin(), cur.end(), 0);
    if (size == 0 || size > k) {
        return out;
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
            return out;
        }
    }
}

/// Identity blocks at level 1 and level 2, then multi-attribute rows. Each
/// row of a given size takes the attribute combination with the largest
/// total remaining need; ties go to the combination used least so far, then
/// to the lexicographically first. Each attribute's entries in
/// multi-attribute rows alternate 1,2,1,2,... so both thresholds of every
/// attribute are measured about equally often.
inline QMatrix balanced_qmatrix(const std::vector<int>& per_attribute,
                                const std::vector<std::pair<std::size_t, std::size_t>>& rows_by_size) {
    const std::size_t k = per_attribute.size();
    std::vector<std::vector<int>> rows;
    for (int level : {1, 2}) {
        for (std::size_t a = 0; a < k; ++a) {
            std::vector<int> row(k, 0);
            row[a] = level;
            rows.push_back(row);
        }
    }
    std::vector<int> need(per_attribute);
    for (auto& n : need) {
        n -= 2;
    }
    std::vector<std::size_t> uses(k, 0);
    for (const auto& [size, count] : rows_by_size) {
        const auto combos = combinations(k, size);
        std::vector<std::size_t> used(combos.size(), 0);
        for (std::size_t r = 0; r < count; ++r) {
            std::size_t best = 0;
            int best_need = std::numeric_limits<int>::min();
            for (std::size_t c = 0; c < combos.size(); ++c) {
                int total = 0;
                for (std::size_t a : combos[c]) {
                    total += need[a];
                }
                if (total > best_need || (total == best_need && used[c] < used[best])) {
                    best = c;
                    best_need = total;
                }
            }
            ++used[best];
            std::vector<int> row(k, 0);
            for (std::size_t a : combos[best]) {
                row[a] = 1 + static_cast<int>(uses[a]++ % 2);
                --need[a];
            }
            rows.push_back(row);
        }
    }
    Matrix<int> m(rows.size(), k);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        std::copy(rows[j].begin(), rows[j].end(), m.row(j).begin());
    }
    return QMatrix(std::move(m), std::vector<int>(k, 3));
}

inline QMatrix stacked(const QMatrix& q) {
    Matrix<int> m(2 * q.items(), q.attributes());
    for (std::size_t j = 0; j < 2 * q.items(); ++j) {
        const auto src = q.row(j % q.items());
        std::copy(src.begin(), src.end(), m.row(j).begin());
    }
    return QMatrix(std::move(m), q.levels());
}

} // namespace detail

inline QMatrix builtin_qmatrix(Design design) {
    switch (design) {
    case Design::K4J60:
        return detail::balanced_qmatrix({34, 34, 34, 34}, {{3, 24}, {2, 28}});
    case Design::K4J120:
        return detail::stacked(builtin_qmatrix(Design::K4J60));
    case Design::K7J60:
        return detail::balanced_qmatrix({20, 21, 22, 23, 22, 21, 20}, {{4, 11}, {3, 21}, {2, 14}});
    case Design::K7J120:
        return detail::stacked(builtin_qmatrix(Design::K7J60));
    case Design::G9: {
        // 34 items, binary / three-level / binary attributes.
        static const int rows[34][3] = {
            {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {0, 1, 1}, {0, 1, 0},
            {0, 1, 1}, {1, 1, 0}, {0, 2, 0}, {0, 1, 0}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 0}, {1, 1, 0},
            {1, 1, 0}, {1, 1, 0}, {1, 1, 0}, {1, 1, 0}, {1, 1, 0}, {0, 0, 1}, {0, 2, 0}, {0, 0, 1}, {1, 1, 0},
            {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {0, 1, 1}, {0, 1, 0}, {0, 2, 0}, {0, 2, 0}};
        Matrix<int> m(34, 3);
        for (std::size_t j = 0; j < 34; ++j) {
            for (std::size_t k = 0; k < 3; ++k) {
                m(j, k) = rows[j][k];
            }
        }
        return QMatrix(std::move(m), {2, 3, 2});
    }
    }
    throw InputError("unknown design");
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct SimConfig {
    std::size_t n = 10000;
    QMatrix qmatrix;
    double rho = 0.1;
    Flavor flavor = Flavor::collapsed;
    std::uint64_t seed = 1;
    Range p_low{0.05, 0.25};
    Range p_high{0.75, 0.95};
    std::size_t truth_mc_draws = 10'000'000;
};

struct SimTruth {
    QMatrix qmatrix;
    Flavor flavor = Flavor::collapsed;
    double rho = 0.0;
    ItemTable theta_true;
    std::vector<double> pi_true;
    std::vector<std::size_t> profiles_true;
    std::size_t truth_mc_draws = 0;
};

struct SimData {
    SimTruth truth;
    ResponseMatrix responses;
};

/// Per-attribute thresholds Phi^-1(m / M_k), m = 1..M_k-1.
inline std::vector<std::vector<double>> level_cutpoints(const std::vector<int>& levels) {
    const boost::math::normal standard;
    std::vector<std::vector<double>> cuts(levels.size());
    for (std::size_t k = 0; k < levels.size(); ++k) {
        for (int m = 1; m < levels[k]; ++m) {
            cuts[k].push_back(boost::math::quantile(standard, static_cast<double>(m) / levels[k]));
        }
    }
    return cuts;
}

/// Draws attribute profiles by thresholding a compound-symmetric normal
/// vector (unit variances, correlation rho). The latent draws are discarded.
class ProfileGenerator {
public:
    ProfileGenerator(std::vector<int> levels, double rho) : space_(levels), cuts_(level_cutpoints(levels)) {
        require(rho >= 0.0 && rho < 1.0, "attribute correlation must lie in [0, 1)");
        const auto k = static_cast<Eigen::Index>(levels.size());
        Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(k, k, rho);
        sigma.diagonal().setOnes();
        chol_ = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
    }

    const ProfileSpace& space() const { return space_; }

    std::size_t draw(Rng& rng, std::normal_distribution<double>& normal) {
        const auto k = static_cast<std::size_t>(chol_.rows());
        z_.resize(k);
        for (std::size_t a = 0; a < k; ++a) {
            z_[a] = normal(rng);
        }
        std::size_t idx = 0;
        for (std::size_t a = 0; a < k; ++a) {
            double lambda = 0.0;
            for (std::size_t b = 0; b <= a; ++b) {
                lambda += chol_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * z_[b];
            }
            const auto& c = cuts_[a];
            const auto level = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), lambda) - c.begin());
            idx = idx * static_cast<std::size_t>(space_.levels()[a]) + level;
        }
        return idx;
    }

private:
    ProfileSpace space_;
    std::vector<std::vector<double>> cuts_;
    Eigen::MatrixXd chol_;
    std::vector<double> z_;
};

/// Profile indices (canonical order) for n examinees.
inline std::vector<std::size_t> gen_profiles(std::size_t n, const std::vector<int>& levels, double rho, std::uint64_t seed) {
    ProfileGenerator gen(levels, rho);
    Rng rng = make_rng(seed, "profiles");
    std::normal_distribution<double> normal;
    std::vector<std::size_t> out(n);
    for (auto& p : out) {
        p = gen.draw(rng, normal);
    }
    return out;
}

/// Empirical profile frequencies from `draws` simulated examinees. Work is
/// split into fixed blocks with their own sub-streams, so the result does
/// not depend on `workers`.
inline std::vector<double> true_mixing_proportions(const std::vector<int>& levels, double rho, std::size_t draws,
                                                   std::uint64_t seed, std::size_t workers = 1) {
    require(draws >= 1, "need at least one Monte Carlo draw");
    constexpr std::size_t block = 1'000'000;
    const std::size_t blocks = (draws + block - 1) / block;
    const ProfileSpace space(levels);
    std::vector<std::vector<std::uint64_t>> counts(blocks, std::vector<std::uint64_t>(space.size(), 0));
    WorkerPool pool(std::min(workers, blocks));
    pool.run([&](std::size_t c) {
        const auto range = chunk_range(blocks, pool.size(), c);
        ProfileGenerator gen(levels, rho);
        for (std::size_t b = range.begin; b < range.end; ++b) {
            Rng rng = make_rng(seed, "truth-pi", b);
            std::normal_distribution<double> normal;
            const std::size_t m = std::min(block, draws - b * block);
            for (std::size_t d = 0; d < m; ++d) {
                ++counts[b][gen.draw(rng, normal)];
            }
        }
    });
    std::vector<double> pi(space.size(), 0.0);
    for (std::size_t l = 0; l < space.size(); ++l) {
        std::uint64_t total = 0;
        for (const auto& c : counts) {
            total += c[l];
        }
        pi[l] = static_cast<double>(total) / static_cast<double>(draws);
    }
    return pi;
}

/// Monotone linear ramp from p_low to p_high per item. Collapsed patterns
/// move by the fraction of relevant attributes mastered; reduced patterns by
/// the fraction of total attainable levels.
inline ItemTable item_params_from_bounds(const Model& model, const std::vector<double>& low, const std::vector<double>& high) {
    ItemTable theta = make_item_table(model, 0.0);
    const auto& levels = model.qmatrix().levels();
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto& g = model.gmatrix(j);
        double scale = 0.0;
        for (std::size_t a : g.attributes()) {
            scale += model.flavor() == Flavor::collapsed ? 1.0 : static_cast<double>(levels[a] - 1);
        }
        for (std::size_t p = 0; p < g.pattern_count(); ++p) {
            const auto pat = g.pattern(p);
            const double mastered = std::accumulate(pat.begin(), pat.end(), 0.0);
            theta[j][p] = low[j] + (mastered / scale) * (high[j] - low[j]);
        }
    }
    return theta;
}

inline ItemTable gen_item_params(const Model& model, std::uint64_t seed, Range p_low = {0.05, 0.25},
                                 Range p_high = {0.75, 0.95}) {
    require(p_low.lo > 0.0 && p_low.hi <= p_high.lo && p_high.hi < 1.0 && p_low.lo <= p_low.hi && p_high.lo <= p_high.hi,
            "probability ranges must lie in (0,1) with the high range above the low range");
    Rng rng = make_rng(seed, "items");
    std::vector<double> low(model.items());
    std::vector<double> high(model.items());
    for (std::size_t j = 0; j < model.items(); ++j) {
        low[j] = p_low.lo + (p_low.hi - p_low.lo) * uniform01(rng);
        high[j] = p_high.lo + (p_high.hi - p_high.lo) * uniform01(rng);
    }
    return item_params_from_bounds(model, low, high);
}

inline ResponseMatrix gen_responses(const std::vector<std::size_t>& profiles, const Model& model, const ItemTable& theta,
                                    std::uint64_t seed) {
    Rng rng = make_rng(seed, "responses");
    ResponseMatrix x(profiles.size(), model.items(), 0);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (std::size_t j = 0; j < model.items(); ++j) {
            const double p = theta[j][model.gmatrix(j).lookup()[profiles[i]]];
            x(i, j) = uniform01(rng) < p ? 1 : 0;
        }
    }
    return x;
}

/// Full synthetic dataset. Pass precomputed `pi_true` to reuse one Monte
/// Carlo truth across replications of the same condition.
inline SimData simulate(const SimConfig& cfg, std::vector<double> pi_true = {}, std::size_t workers = 1) {
    require(cfg.n >= 1, "simulation needs N >= 1");
    const Model model(cfg.qmatrix, cfg.flavor);
    SimData out;
    out.truth.qmatrix = cfg.qmatrix;
    out.truth.flavor = cfg.flavor;
    out.truth.rho = cfg.rho;
    out.truth.profiles_true = gen_profiles(cfg.n, cfg.qmatrix.levels(), cfg.rho, cfg.seed);
    out.truth.theta_true = gen_item_params(model, cfg.seed, cfg.p_low, cfg.p_high);
    out.responses = gen_responses(out.truth.profiles_true, model, out.truth.theta_true, cfg.seed);
    out.truth.truth_mc_draws = cfg.truth_mc_draws;
    out.truth.pi_true = pi_true.empty()
                            ? true_mixing_proportions(cfg.qmatrix.levels(), cfg.rho, cfg.truth_mc_draws, cfg.seed, workers)
                            : std::move(pi_true);
    return out;
}

} // namespace pgdcm

#endif
