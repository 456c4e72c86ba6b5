#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>

#include "test_util.hpp"

using namespace pgdcm;
using testutil::vec;

TEST(ProfileSpace, TwoThreeLevelAttributesGiveNineProfilesInCanonicalOrder) {
    const ProfileSpace s({3, 3});
    ASSERT_EQ(s.size(), 9u);
    const std::vector<std::vector<int>> expected{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};
    for (std::size_t l = 0; l < 9; ++l) {
        EXPECT_EQ(vec(s.profile(l)), expected[l]);
    }
}

TEST(ProfileSpace, SameSetAsPresentationalColumnOrder) {
    const ProfileSpace s({3, 3});
    // Column order used by the published G-matrix tables.
    const std::vector<std::vector<int>> table_order{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {1, 2}, {2, 1}, {2, 2}};
    std::set<std::vector<int>> a(table_order.begin(), table_order.end());
    std::set<std::vector<int>> b;
    for (std::size_t l = 0; l < s.size(); ++l) {
        b.insert(vec(s.profile(l)));
    }
    EXPECT_EQ(a, b);
}

TEST(ProfileSpace, SingleBinaryAttribute) {
    const ProfileSpace s({2});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(vec(s.profile(0)), std::vector<int>{0});
    EXPECT_EQ(vec(s.profile(1)), std::vector<int>{1});
}

TEST(ProfileSpace, MixedLevelsMatchNestedLoopEnumeration) {
    const ProfileSpace s({3, 2, 4});
    ASSERT_EQ(s.size(), 24u);
    std::size_t l = 0;
    std::set<std::vector<int>> seen;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 2; ++b) {
            for (int c = 0; c < 4; ++c, ++l) {
                const std::vector<int> p{a, b, c};
                EXPECT_EQ(vec(s.profile(l)), p);
                EXPECT_EQ(s.index_of(p), l);
                seen.insert(p);
            }
        }
    }
    EXPECT_EQ(seen.size(), 24u);
}

TEST(ProfileSpace, RejectsEmptyOrDegenerateLevels) {
    EXPECT_THROW(ProfileSpace(std::vector<int>{}), InputError);
    EXPECT_THROW(ProfileSpace({3, 1}), InputError);
}

TEST(ProfileSpace, EnumerationIsStable) {
    EXPECT_EQ(enumerate_profiles({3, 4, 2}).profiles(), enumerate_profiles({3, 4, 2}).profiles());
}

TEST(ProfileSpace, Labels) {
    const ProfileSpace s({3, 3, 3});
    EXPECT_EQ(s.label(0), "000");
    EXPECT_EQ(s.label(s.index_of(std::vector<int>{1, 0, 2})), "102");
}

TEST(QMatrix, Validation) {
    EXPECT_NO_THROW(testutil::qmatrix({{2, 1, 0}}, {3, 3, 3}));
    EXPECT_THROW(testutil::qmatrix({{3, 0}}, {3, 3}), InputError);
    EXPECT_THROW(testutil::qmatrix({{-1, 1}}, {3, 3}), InputError);
    EXPECT_THROW(testutil::qmatrix({{0, 0}}, {3, 3}), InputError);
    EXPECT_THROW(testutil::qmatrix({{1, 0}}, {3}), InputError);
    EXPECT_THROW(testutil::qmatrix({{1, 0}}, {3, 1}), InputError);
}

TEST(KStar, CountsRelevantAttributes) {
    EXPECT_EQ(k_star(std::vector<int>{2, 1, 0}), 2u);
    EXPECT_EQ(k_star(std::vector<int>{1, 0, 0}), 1u);
    EXPECT_EQ(k_star(std::vector<int>{1, 1, 1, 1}), 4u);
}

TEST(ReduceCollapse, PublishedExampleRows) {
    const std::vector<int> q{2, 1, 0};
    EXPECT_EQ(reduce_profile(std::vector<int>{1, 0, 2}, q), (std::vector<int>{1, 0}));
    EXPECT_EQ(reduce_profile(std::vector<int>{2, 2, 2}, q), (std::vector<int>{2, 2}));
    EXPECT_EQ(reduce_profile(std::vector<int>{0, 0, 0}, q), (std::vector<int>{0, 0}));
    EXPECT_EQ(collapse_profile(std::vector<int>{2, 0}, q), (std::vector<int>{1, 0}));
    EXPECT_EQ(collapse_profile(std::vector<int>{1, 2}, q), (std::vector<int>{0, 1}));
    EXPECT_EQ(collapse_profile(std::vector<int>{2, 1}, q), (std::vector<int>{1, 1}));
}

TEST(ReduceCollapse, FullPublishedTableForQ210) {
    // Every original profile with its reduced and collapsed vector.
    struct Row {
        std::vector<int> reduced;
        std::vector<int> collapsed;
    };
    const std::map<std::vector<int>, Row> table{
        {{0, 0}, {{0, 0}, {0, 0}}}, {{1, 0}, {{1, 0}, {0, 0}}}, {{2, 0}, {{2, 0}, {1, 0}}},
        {{0, 1}, {{0, 1}, {0, 1}}}, {{1, 1}, {{1, 1}, {0, 1}}}, {{0, 2}, {{0, 2}, {0, 1}}},
        {{1, 2}, {{1, 2}, {0, 1}}}, {{2, 1}, {{2, 1}, {1, 1}}}, {{2, 2}, {{2, 2}, {1, 1}}}};
    const std::vector<int> q{2, 1, 0};
    const ProfileSpace s({3, 3, 3});
    for (std::size_t l = 0; l < s.size(); ++l) {
        const auto p = s.profile(l);
        const auto reduced = reduce_profile(p, q);
        const auto& row = table.at({p[0], p[1]});
        EXPECT_EQ(reduced, row.reduced);
        EXPECT_EQ(collapse_profile(reduced, q), row.collapsed);
    }
}

namespace {

/// Checks one G-matrix against a published table given in its own column order.
void expect_gmatrix(const GMatrix& g, const ProfileSpace& s, const std::vector<std::vector<int>>& columns,
                    const std::vector<std::vector<int>>& dense_rows) {
    const auto dense = g.dense();
    ASSERT_EQ(dense.rows(), dense_rows.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const std::size_t l = s.index_of(columns[c]);
        for (std::size_t r = 0; r < dense_rows.size(); ++r) {
            EXPECT_EQ(dense(r, l), dense_rows[r][c]) << "pattern " << r << " column " << c;
        }
    }
}

} // namespace

TEST(GMatrix, BinaryThreeAttributeTable) {
    const ProfileSpace s({2, 2, 2});
    const auto g = build_gmatrix(0, std::vector<int>{1, 1, 0}, s, Flavor::collapsed);
    const std::vector<std::vector<int>> cols{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
                                             {1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    // Our pattern rows are sorted lexicographically: 00, 01, 10, 11.
    expect_gmatrix(g, s, cols,
                   {{1, 0, 0, 1, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0, 1, 0}, {0, 1, 0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 1}});
    // Profile (1,1,1) maps to pattern (1,1).
    const std::size_t l = s.index_of(std::vector<int>{1, 1, 1});
    EXPECT_EQ(vec(g.pattern(g.lookup()[l])), (std::vector<int>{1, 1}));
    EXPECT_EQ(g.lookup()[l], 3u);
}

TEST(GMatrix, CollapsedPolytomousTable) {
    const ProfileSpace s({3, 3});
    const auto g = build_gmatrix(0, std::vector<int>{2, 0}, s, Flavor::collapsed);
    ASSERT_EQ(g.pattern_count(), 2u);
    const std::vector<std::vector<int>> cols{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {1, 2}, {2, 1}, {2, 2}};
    expect_gmatrix(g, s, cols, {{1, 1, 1, 1, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 1, 1}});
    EXPECT_EQ(vec(g.pattern(g.lookup()[s.index_of(std::vector<int>{2, 1})])), std::vector<int>{1});
}

TEST(GMatrix, ReducedPolytomousTable) {
    const ProfileSpace s({3, 3});
    const auto g = build_gmatrix(0, std::vector<int>{2, 0}, s, Flavor::reduced);
    ASSERT_EQ(g.pattern_count(), 3u);
    const std::vector<std::vector<int>> cols{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {1, 2}, {2, 1}, {2, 2}};
    expect_gmatrix(g, s, cols,
                   {{1, 0, 1, 0, 0, 1, 0, 0, 0}, {0, 1, 0, 1, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 1, 1}});
    EXPECT_EQ(vec(g.pattern(g.lookup()[s.index_of(std::vector<int>{1, 2})])), std::vector<int>{1});
}

namespace {

void for_each_q_row(const std::vector<int>& levels, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> q(levels.size(), 0);
    for (;;) {
        if (k_star(q) > 0) {
            fn(q);
        }
        std::size_t pos = levels.size();
        while (pos-- > 0) {
            if (++q[pos] < levels[pos]) {
                break;
            }
            q[pos] = 0;
        }
        if (pos == static_cast<std::size_t>(-1)) {
            return;
        }
    }
}

} // namespace

TEST(GMatrix, ExhaustiveInvariantsSmallSpaces) {
    std::size_t checked = 0;
    for (std::size_t k = 1; k <= 4; ++k) {
        for (int m = 2; m <= 4; ++m) {
            if (k == 4 && m == 4) {
                continue; // covered by the mixed-level sweep below
            }
            const std::vector<int> levels(k, m);
            const ProfileSpace s(levels);
            for_each_q_row(levels, [&](const std::vector<int>& q) {
                for (auto flavor : {Flavor::collapsed, Flavor::reduced}) {
                    const auto g = build_gmatrix(0, q, s, flavor);
                    std::size_t expect_rows = 1;
                    for (std::size_t a = 0; a < k; ++a) {
                        if (q[a] > 0) {
                            expect_rows *= flavor == Flavor::collapsed ? 2 : static_cast<std::size_t>(levels[a]);
                        }
                    }
                    ASSERT_EQ(g.pattern_count(), expect_rows);
                    const auto dense = g.dense();
                    for (std::size_t l = 0; l < s.size(); ++l) {
                        int col = 0;
                        for (std::size_t r = 0; r < dense.rows(); ++r) {
                            col += dense(r, l);
                        }
                        ASSERT_EQ(col, 1);
                        auto expected = reduce_profile(s.profile(l), q);
                        if (flavor == Flavor::collapsed) {
                            expected = collapse_profile(expected, q);
                        }
                        ASSERT_EQ(vec(g.pattern(g.lookup()[l])), expected);
                    }
                    std::set<std::vector<int>> distinct;
                    for (std::size_t r = 0; r < g.pattern_count(); ++r) {
                        distinct.insert(vec(g.pattern(r)));
                    }
                    ASSERT_EQ(distinct.size(), g.pattern_count());
                    ++checked;
                }
            });
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(GMatrix, ExhaustiveMixedLevels) {
    const std::vector<int> levels{4, 2, 3, 4};
    const ProfileSpace s(levels);
    for_each_q_row(levels, [&](const std::vector<int>& q) {
        const auto g = build_gmatrix(0, q, s, Flavor::collapsed);
        ASSERT_EQ(g.pattern_count(), std::size_t{1} << k_star(q));
        for (std::size_t l = 0; l < s.size(); ++l) {
            ASSERT_EQ(vec(g.pattern(g.lookup()[l])), collapse_profile(reduce_profile(s.profile(l), q), q));
        }
    });
}

TEST(GMatrix, ProfilesWithSameCollapsedVectorShareColumns) {
    const ProfileSpace s({3, 3, 3});
    const std::vector<int> q{2, 1, 0};
    const auto g = build_gmatrix(0, q, s, Flavor::collapsed);
    const auto dense = g.dense();
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = 0; b < s.size(); ++b) {
            const auto ca = collapse_profile(reduce_profile(s.profile(a), q), q);
            const auto cb = collapse_profile(reduce_profile(s.profile(b), q), q);
            if (ca == cb) {
                for (std::size_t r = 0; r < dense.rows(); ++r) {
                    ASSERT_EQ(dense(r, a), dense(r, b));
                }
            }
        }
    }
}

TEST(GMatrix, BinaryCaseFlavorsCoincide) {
    const std::vector<int> levels{2, 2, 2};
    const ProfileSpace s(levels);
    for_each_q_row(levels, [&](const std::vector<int>& q) {
        const auto c = build_gmatrix(0, q, s, Flavor::collapsed);
        const auto r = build_gmatrix(0, q, s, Flavor::reduced);
        EXPECT_EQ(c.dense(), r.dense());
        EXPECT_EQ(c.patterns(), r.patterns());
    });
}

TEST(Model, BuildsOneGMatrixPerItem) {
    const Model m(testutil::qmatrix({{1, 0}, {2, 1}, {0, 2}}, {3, 3}), Flavor::collapsed);
    EXPECT_EQ(m.items(), 3u);
    EXPECT_EQ(m.profiles(), 9u);
    EXPECT_EQ(m.gmatrix(1).pattern_count(), 4u);
    EXPECT_EQ(m.gmatrix(2).attributes(), std::vector<std::size_t>{1});
}

TEST(Flavor, ParseAndPrint) {
    EXPECT_EQ(parse_flavor("collapsed"), Flavor::collapsed);
    EXPECT_EQ(parse_flavor("reduced"), Flavor::reduced);
    EXPECT_THROW(parse_flavor("other"), InputError);
    EXPECT_STREQ(to_string(Flavor::reduced), "reduced");
}
