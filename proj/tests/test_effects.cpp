#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "pgdcm/pgdcm.hpp"
#include "test_util.hpp"

namespace {

// Full-factorial binary patterns over k attributes in lexicographic order.
pgdcm::Matrix<int> binary_patterns(std::size_t k) {
    pgdcm::Matrix<int> p(std::size_t{1} << k, k);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        for (std::size_t a = 0; a < k; ++a) {
            p(r, a) = static_cast<int>((r >> (k - 1 - a)) & 1u);
        }
    }
    return p;
}

std::size_t mask_of(std::span<const int> pattern) {
    std::size_t m = 0;
    for (std::size_t a = 0; a < pattern.size(); ++a) {
        m |= static_cast<std::size_t>(pattern[a]) << a;
    }
    return m;
}

std::size_t mask_of(const std::vector<std::size_t>& term) {
    std::size_t m = 0;
    for (auto a : term) {
        m |= std::size_t{1} << a;
    }
    return m;
}

// Mobius inversion on the subset lattice: delta_S = sum over T subset of S
// of (-1)^{|S|-|T|} theta(T).
std::map<std::size_t, double> mobius(const std::vector<double>& theta, const pgdcm::Matrix<int>& patterns) {
    std::map<std::size_t, double> by_mask;
    for (std::size_t r = 0; r < patterns.rows(); ++r) {
        by_mask[mask_of(patterns.row(r))] = theta[r];
    }
    std::map<std::size_t, double> out;
    for (const auto& [s, unused] : by_mask) {
        double v = 0;
        for (std::size_t t = s;; t = (t - 1) & s) {
            const int sign = (__builtin_popcountll(s) - __builtin_popcountll(t)) % 2 ? -1 : 1;
            v += sign * by_mask.at(t);
            if (t == 0) {
                break;
            }
        }
        out[s] = v;
    }
    return out;
}

} // namespace

TEST(Effects, TermOrder) {
    const auto t = pgdcm::effect_terms(3);
    const std::vector<std::vector<std::size_t>> expected{{}, {0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
    EXPECT_EQ(t, expected);
    EXPECT_EQ(pgdcm::effect_terms(0).size(), 1u);
}

TEST(Effects, DinaStructure) {
    const double g = 0.15;
    const double s = 0.1;
    const auto patterns = binary_patterns(2); // (0,0), (0,1), (1,0), (1,1)
    const auto d = pgdcm::theta_to_delta({g, g, g, 1 - s}, patterns);
    EXPECT_NEAR(d.values[0], g, 1e-12);
    EXPECT_NEAR(d.values[1], 0.0, 1e-12);
    EXPECT_NEAR(d.values[2], 0.0, 1e-12);
    EXPECT_NEAR(d.values[3], 1 - s - g, 1e-12);
}

TEST(Effects, ConstantTheta) {
    const auto patterns = binary_patterns(3);
    const auto d = pgdcm::theta_to_delta(std::vector<double>(8, 0.42), patterns);
    EXPECT_NEAR(d.values[0], 0.42, 1e-12);
    for (std::size_t t = 1; t < d.values.size(); ++t) {
        EXPECT_NEAR(d.values[t], 0.0, 1e-12);
    }
}

TEST(Effects, AdditiveRamp) {
    const auto patterns = binary_patterns(2);
    const auto d = pgdcm::theta_to_delta({0.2, 0.5, 0.5, 0.8}, patterns);
    EXPECT_NEAR(d.values[0], 0.2, 1e-12);
    EXPECT_NEAR(d.values[1], 0.3, 1e-12);
    EXPECT_NEAR(d.values[2], 0.3, 1e-12);
    EXPECT_NEAR(d.values[3], 0.0, 1e-12);
}

TEST(Effects, MatchesMobiusInversionAndRoundTrips) {
    pgdcm::Rng rng(13);
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto patterns = binary_patterns(k);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> theta(patterns.rows());
            for (auto& v : theta) {
                v = pgdcm::uniform01(rng);
            }
            const auto d = pgdcm::theta_to_delta(theta, patterns);
            const auto ref = mobius(theta, patterns);
            for (std::size_t t = 0; t < d.terms.size(); ++t) {
                EXPECT_NEAR(d.values[t], ref.at(mask_of(d.terms[t])), 1e-12);
            }
            const auto back = pgdcm::delta_to_theta(d, patterns);
            for (std::size_t r = 0; r < theta.size(); ++r) {
                EXPECT_NEAR(back[r], theta[r], 1e-12);
            }
        }
    }
}

TEST(Effects, RoundTripOnModelPatterns) {
    pgdcm::Rng rng(14);
    const auto q = testutil::random_qmatrix(rng, 25, {3, 2, 3, 2});
    const pgdcm::Model model(q, pgdcm::Flavor::collapsed);
    const auto theta = pgdcm::gen_item_params(model, 5);
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto& g = model.gmatrix(j);
        const auto d = pgdcm::theta_to_delta(theta[j], g.patterns());
        ASSERT_EQ(d.values.size(), g.pattern_count());
        const auto back = pgdcm::delta_to_theta(d, g.patterns());
        for (std::size_t p = 0; p < back.size(); ++p) {
            EXPECT_NEAR(back[p], theta[j][p], 1e-12);
        }
    }
}

TEST(Effects, AttributePermutationPermutesLabels) {
    // Item measuring attributes 1 and 3 of a K=3 test, then the same item
    // with the attribute order reversed.
    const auto q = testutil::qmatrix({{1, 0, 2}}, {3, 3, 3});
    const auto qr = testutil::qmatrix({{2, 0, 1}}, {3, 3, 3});
    const pgdcm::Model m(q, pgdcm::Flavor::collapsed);
    const pgdcm::Model mr(qr, pgdcm::Flavor::collapsed);
    // theta on (a1,a3) patterns (0,0),(0,1),(1,0),(1,1)
    const std::vector<double> theta{0.1, 0.3, 0.45, 0.9};
    // Same function of the attributes, written in the reversed pattern order (a3,a1).
    const std::vector<double> theta_r{0.1, 0.45, 0.3, 0.9};
    const auto d = pgdcm::theta_to_delta(theta, m.gmatrix(0).patterns());
    const auto dr = pgdcm::theta_to_delta(theta_r, mr.gmatrix(0).patterns());
    std::map<std::string, double> by_label;
    std::map<std::string, double> by_label_r;
    for (std::size_t t = 0; t < d.terms.size(); ++t) {
        auto attrs = m.gmatrix(0).attributes();
        by_label[pgdcm::effect_label(d.terms[t], attrs, 3)] = d.values[t];
    }
    // In the reversed matrix the relevant attributes are still (0, 2) by
    // index; relabel so position 0 means original attribute 3.
    const std::vector<std::size_t> reversed_attrs{2, 0};
    for (std::size_t t = 0; t < dr.terms.size(); ++t) {
        auto term = dr.terms[t];
        std::string label = pgdcm::effect_label(term, reversed_attrs, 3);
        if (label.size() == 3 && label[1] > label[2]) {
            std::swap(label[1], label[2]);
        }
        by_label_r[label] = dr.values[t];
    }
    ASSERT_EQ(by_label.size(), by_label_r.size());
    for (const auto& [label, value] : by_label) {
        EXPECT_NEAR(by_label_r.at(label), value, 1e-12) << label;
    }
    EXPECT_NEAR(by_label.at("d1"), 0.35, 1e-12);
    EXPECT_NEAR(by_label.at("d3"), 0.2, 1e-12);
    EXPECT_NEAR(by_label.at("d13"), 0.25, 1e-12);
}

TEST(Effects, Labels) {
    EXPECT_EQ(pgdcm::effect_label({}, {0, 2}, 4), "d0");
    EXPECT_EQ(pgdcm::effect_label({0, 1}, {0, 2}, 4), "d13");
    EXPECT_EQ(pgdcm::effect_label({0, 1}, {1, 10}, 12), "d2_11");
}

TEST(Effects, RejectsRankDeficientPatterns) {
    pgdcm::Matrix<int> p(4, 2, 0);
    p(1, 0) = 1;
    p(2, 0) = 1;
    p(3, 0) = 1; // second attribute never varies
    EXPECT_THROW(pgdcm::theta_to_delta({0.1, 0.2, 0.3, 0.4}, p), pgdcm::InputError);
    EXPECT_THROW(pgdcm::theta_to_delta({0.1, 0.2}, p), pgdcm::InputError);
}

TEST(Effects, ReducedPatternsFitByLeastSquares) {
    // Three-level attribute: patterns 0,1,2 with one main term is
    // overdetermined; an exactly linear theta is recovered.
    pgdcm::Matrix<int> p(3, 1);
    p(0, 0) = 0;
    p(1, 0) = 1;
    p(2, 0) = 2;
    const auto d = pgdcm::theta_to_delta({0.2, 0.35, 0.5}, p);
    EXPECT_NEAR(d.values[0], 0.2, 1e-12);
    EXPECT_NEAR(d.values[1], 0.15, 1e-12);
}
