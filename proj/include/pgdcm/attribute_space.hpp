#ifndef PGDCM_ATTRIBUTE_SPACE_HPP
#define PGDCM_ATTRIBUTE_SPACE_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pgdcm/error.hpp"
#include "pgdcm/matrix.hpp"

namespace pgdcm {

/// Which item-specific patterns an item distinguishes.
///  - collapsed: each relevant attribute is thresholded at q_jk (2^{K*_j} patterns)
///  - reduced: each relevant attribute keeps its full level (prod M_k patterns)
enum class Flavor { collapsed, reduced };

inline const char* to_string(Flavor f) { return f == Flavor::collapsed ? "collapsed" : "reduced"; }

inline Flavor parse_flavor(const std::string& s) {
    if (s == "collapsed") {
        return Flavor::collapsed;
    }
    if (s == "reduced") {
        return Flavor::reduced;
    }
    throw InputError("unknown flavor '" + s + "' (expected collapsed|reduced)");
}

/// J x K matrix of required mastery levels plus the number of levels of each
/// attribute. Entry q_jk = m > 0 means item j needs level >= m on attribute k.
class QMatrix {
public:
    QMatrix() = default;

    QMatrix(Matrix<int> entries, std::vector<int> levels)
        : entries_(std::move(entries)), levels_(std::move(levels)) {
        validate();
    }

    std::size_t items() const { return entries_.rows(); }
    std::size_t attributes() const { return levels_.size(); }
    const std::vector<int>& levels() const { return levels_; }
    std::span<const int> row(std::size_t j) const { return entries_.row(j); }
    int operator()(std::size_t j, std::size_t k) const { return entries_(j, k); }
    const Matrix<int>& entries() const { return entries_; }

    bool operator==(const QMatrix&) const = default;

private:
    void validate() const {
        require(!levels_.empty(), "Q-matrix needs at least one attribute");
        require(entries_.cols() == levels_.size(), "Q-matrix column count does not match levels");
        for (int m : levels_) {
            require(m >= 2, "every attribute needs at least 2 levels");
        }
        for (std::size_t j = 0; j < entries_.rows(); ++j) {
            bool any = false;
            for (std::size_t k = 0; k < levels_.size(); ++k) {
                const int q = entries_(j, k);
                require(q >= 0 && q < levels_[k],
                        "Q-matrix entry (" + std::to_string(j + 1) + "," + std::to_string(k + 1) +
                            ") outside 0.." + std::to_string(levels_[k] - 1));
                any = any || q > 0;
            }
            require(any, "Q-matrix row " + std::to_string(j + 1) + " measures no attribute");
        }
    }

    Matrix<int> entries_;
    std::vector<int> levels_;
};

/// All L = prod M_k attribute mastery profiles. Order is lexicographic with
/// the last attribute varying fastest, so row 0 is the all-zero profile and
/// profile indices are mixed-radix numbers.
class ProfileSpace {
public:
    ProfileSpace() = default;

    explicit ProfileSpace(std::vector<int> levels) : levels_(std::move(levels)) {
        require(!levels_.empty(), "profile space needs K >= 1");
        std::size_t total = 1;
        for (int m : levels_) {
            require(m >= 2, "every attribute needs at least 2 levels");
            total *= static_cast<std::size_t>(m);
        }
        const std::size_t k = levels_.size();
        profiles_ = Matrix<int>(total, k, 0);
        std::vector<int> current(k, 0);
        for (std::size_t l = 0; l < total; ++l) {
            std::copy(current.begin(), current.end(), profiles_.row(l).begin());
            for (std::size_t pos = k; pos-- > 0;) {
                if (++current[pos] < levels_[pos]) {
                    break;
                }
                current[pos] = 0;
            }
        }
    }

    std::size_t size() const { return profiles_.rows(); }
    std::size_t attributes() const { return levels_.size(); }
    const std::vector<int>& levels() const { return levels_; }
    std::span<const int> profile(std::size_t l) const { return profiles_.row(l); }
    const Matrix<int>& profiles() const { return profiles_; }

    std::size_t index_of(std::span<const int> profile) const {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < levels_.size(); ++k) {
            idx = idx * static_cast<std::size_t>(levels_[k]) + static_cast<std::size_t>(profile[k]);
        }
        return idx;
    }

    /// "0120"-style label; digits are joined with '-' when some attribute has
    /// more than 10 levels.
    std::string label(std::size_t l) const {
        return pattern_label(profile(l), *std::max_element(levels_.begin(), levels_.end()) > 10);
    }

    static std::string pattern_label(std::span<const int> pattern, bool separated = false) {
        std::string s;
        for (std::size_t k = 0; k < pattern.size(); ++k) {
            if (separated && k > 0) {
                s += '-';
            }
            s += std::to_string(pattern[k]);
        }
        return s;
    }

private:
    std::vector<int> levels_;
    Matrix<int> profiles_;
};

inline ProfileSpace enumerate_profiles(const std::vector<int>& levels) { return ProfileSpace(levels); }

/// Number of attributes item j measures.
inline std::size_t k_star(std::span<const int> q_row) {
    return static_cast<std::size_t>(std::count_if(q_row.begin(), q_row.end(), [](int q) { return q > 0; }));
}

/// Positions (attribute indices) with q_jk > 0, in attribute order.
inline std::vector<std::size_t> relevant_attributes(std::span<const int> q_row) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < q_row.size(); ++k) {
        if (q_row[k] > 0) {
            out.push_back(k);
        }
    }
    return out;
}

inline std::vector<int> reduce_profile(std::span<const int> profile, std::span<const int> q_row) {
    std::vector<int> out;
    for (std::size_t k = 0; k < q_row.size(); ++k) {
        if (q_row[k] > 0) {
            out.push_back(profile[k]);
        }
    }
    return out;
}

inline std::vector<int> collapse_profile(std::span<const int> reduced, std::span<const int> q_row) {
    std::vector<int> out;
    out.reserve(reduced.size());
    std::size_t pos = 0;
    for (int q : q_row) {
        if (q > 0) {
            out.push_back(reduced[pos] < q ? 0 : 1);
            ++pos;
        }
    }
    return out;
}

/// Item-specific mapping from global profiles to the patterns the item can
/// distinguish. `lookup()[l]` is the pattern row of profile l; the dense
/// L*_j x L indicator form is produced on demand for export.
class GMatrix {
public:
    GMatrix(std::size_t item, Flavor flavor, std::vector<std::size_t> attributes, Matrix<int> patterns,
            std::vector<std::size_t> lookup)
        : item_(item),
          flavor_(flavor),
          attributes_(std::move(attributes)),
          patterns_(std::move(patterns)),
          lookup_(std::move(lookup)) {}

    std::size_t item() const { return item_; }
    Flavor flavor() const { return flavor_; }
    std::size_t pattern_count() const { return patterns_.rows(); }
    std::size_t profile_count() const { return lookup_.size(); }
    /// Original indices of the item's relevant attributes (pattern columns).
    const std::vector<std::size_t>& attributes() const { return attributes_; }
    std::span<const int> pattern(std::size_t p) const { return patterns_.row(p); }
    const Matrix<int>& patterns() const { return patterns_; }
    const std::vector<std::size_t>& lookup() const { return lookup_; }

    Matrix<int> dense() const {
        Matrix<int> g(pattern_count(), profile_count(), 0);
        for (std::size_t l = 0; l < lookup_.size(); ++l) {
            g(lookup_[l], l) = 1;
        }
        return g;
    }

private:
    std::size_t item_;
    Flavor flavor_;
    std::vector<std::size_t> attributes_;
    Matrix<int> patterns_;
    std::vector<std::size_t> lookup_;
};

inline GMatrix build_gmatrix(std::size_t item, std::span<const int> q_row, const ProfileSpace& space, Flavor flavor) {
    require(q_row.size() == space.attributes(), "Q-matrix row length does not match the profile space");
    std::vector<std::vector<int>> per_profile(space.size());
    for (std::size_t l = 0; l < space.size(); ++l) {
        auto reduced = reduce_profile(space.profile(l), q_row);
        per_profile[l] = flavor == Flavor::collapsed ? collapse_profile(reduced, q_row) : std::move(reduced);
    }

    // Every admissible pattern, in lexicographic order. Collapsed patterns
    // range over {0,1}^{K*}; reduced ones over the relevant attributes' levels.
    const auto attrs = relevant_attributes(q_row);
    std::vector<int> radix;
    for (std::size_t k : attrs) {
        radix.push_back(flavor == Flavor::collapsed ? 2 : space.levels()[k]);
    }
    std::size_t count = 1;
    for (int m : radix) {
        count *= static_cast<std::size_t>(m);
    }
    Matrix<int> patterns(count, attrs.size(), 0);
    std::map<std::vector<int>, std::size_t> index;
    std::vector<int> current(attrs.size(), 0);
    for (std::size_t p = 0; p < count; ++p) {
        std::copy(current.begin(), current.end(), patterns.row(p).begin());
        index.emplace(current, p);
        for (std::size_t pos = attrs.size(); pos-- > 0;) {
            if (++current[pos] < radix[pos]) {
                break;
            }
            current[pos] = 0;
        }
    }

    std::vector<std::size_t> lookup(space.size());
    for (std::size_t l = 0; l < space.size(); ++l) {
        lookup[l] = index.at(per_profile[l]);
    }
    return GMatrix(item, flavor, attrs, std::move(patterns), std::move(lookup));
}

/// Q-matrix, its profile space and every item's G-matrix: the fixed
/// structure shared by the estimators. Immutable once built.
class Model {
public:
    Model(QMatrix q, Flavor flavor) : q_(std::move(q)), space_(q_.levels()), flavor_(flavor) {
        gmatrices_.reserve(q_.items());
        for (std::size_t j = 0; j < q_.items(); ++j) {
            gmatrices_.push_back(build_gmatrix(j, q_.row(j), space_, flavor_));
        }
    }

    const QMatrix& qmatrix() const { return q_; }
    const ProfileSpace& space() const { return space_; }
    Flavor flavor() const { return flavor_; }
    std::size_t items() const { return q_.items(); }
    std::size_t profiles() const { return space_.size(); }
    const std::vector<GMatrix>& gmatrices() const { return gmatrices_; }
    const GMatrix& gmatrix(std::size_t j) const { return gmatrices_[j]; }

private:
    QMatrix q_;
    ProfileSpace space_;
    Flavor flavor_;
    std::vector<GMatrix> gmatrices_;
};

} // namespace pgdcm

#endif
