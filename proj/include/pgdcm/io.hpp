#ifndef PGDCM_IO_HPP
#define PGDCM_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgdcm/attribute_space.hpp"
#include "pgdcm/effects.hpp"
#include "pgdcm/error.hpp"
#include "pgdcm/gibbs.hpp"
#include "pgdcm/matrix.hpp"
#include "pgdcm/simulator.hpp"
#include "pgdcm/vb.hpp"

namespace pgdcm::io {

using nlohmann::json;

inline constexpr const char* profile_order_note = "profile order: lexicographic, last attribute varying fastest";

// ---------------------------------------------------------------------------
// CSV primitives
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

/// Non-empty, non-comment ('#') lines split into cells.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') {
            continue;
        }
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline bool is_integer(const std::string& s) {
    if (s.empty()) {
        return false;
    }
    std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (start == s.size()) {
        return false;
    }
    for (std::size_t i = start; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') {
            return false;
        }
    }
    return true;
}

inline int parse_int(const std::string& s, const std::string& where) {
    require(is_integer(s), "expected an integer in " + where + ", got '" + s + "'");
    return std::stoi(s);
}

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    require(static_cast<bool>(in), "cannot open " + p.string());
    return in;
}

/// Writes `content` to a sibling temporary file and renames it into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// Q-matrix, levels, responses
// ---------------------------------------------------------------------------

inline std::string qmatrix_csv(const QMatrix& q) {
    std::ostringstream out;
    for (std::size_t k = 0; k < q.attributes(); ++k) {
        out << (k ? "," : "") << 'k' << (k + 1);
    }
    out << '\n';
    for (std::size_t j = 0; j < q.items(); ++j) {
        for (std::size_t k = 0; k < q.attributes(); ++k) {
            out << (k ? "," : "") << q(j, k);
        }
        out << '\n';
    }
    return out.str();
}

inline Matrix<int> read_qmatrix_entries(std::istream& in) {
    auto rows = read_csv(in);
    if (!rows.empty() && !rows.front().empty() && !is_integer(rows.front().front())) {
        rows.erase(rows.begin());
    }
    require(!rows.empty(), "Q-matrix CSV has no rows");
    const std::size_t k = rows.front().size();
    Matrix<int> m(rows.size(), k);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        require(rows[j].size() == k, "Q-matrix row " + std::to_string(j + 1) + " has the wrong number of columns");
        for (std::size_t c = 0; c < k; ++c) {
            m(j, c) = parse_int(rows[j][c], "Q-matrix row " + std::to_string(j + 1));
        }
    }
    return m;
}

inline std::string levels_json(const std::vector<int>& levels) { return json{{"levels", levels}}.dump() + "\n"; }

inline std::vector<int> read_levels(std::istream& in) {
    json j;
    try {
        in >> j;
        return j.at("levels").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid levels JSON: ") + e.what());
    }
}

/// Sidecar path convention: qmatrix.csv -> qmatrix.levels.json
inline std::filesystem::path levels_sidecar(const std::filesystem::path& qmatrix_path) {
    auto p = qmatrix_path;
    p.replace_extension(".levels.json");
    return p;
}

inline QMatrix load_qmatrix(const std::filesystem::path& csv, std::filesystem::path levels_path = {}) {
    if (levels_path.empty()) {
        levels_path = levels_sidecar(csv);
    }
    auto qin = open_in(csv);
    auto entries = read_qmatrix_entries(qin);
    require(std::filesystem::exists(levels_path), "levels file " + levels_path.string() + " not found (pass --levels)");
    auto lin = open_in(levels_path);
    return QMatrix(std::move(entries), read_levels(lin));
}

/// Header `id,j1..jJ` then one row per examinee.
inline std::string responses_csv(const ResponseMatrix& x) {
    std::string out = "id";
    for (std::size_t j = 0; j < x.cols(); ++j) {
        out += ",j" + std::to_string(j + 1);
    }
    out += '\n';
    out.reserve(out.size() + x.rows() * (2 * x.cols() + 8));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out += std::to_string(i + 1);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out += ',';
            out += static_cast<char>('0' + x(i, j));
        }
        out += '\n';
    }
    return out;
}

/// Reads a 0/1 response table. A header row is optional; the first column is
/// treated as examinee ids when the header names it "id".
inline ResponseMatrix read_responses(std::istream& in) {
    auto rows = read_csv(in);
    bool has_id = false;
    if (!rows.empty() && !rows.front().empty() && !is_integer(rows.front().front())) {
        auto first = rows.front().front();
        for (auto& c : first) {
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        has_id = first == "id";
        rows.erase(rows.begin());
    }
    const std::size_t skip = has_id ? 1 : 0;
    const std::size_t j_count = rows.empty() ? 0 : rows.front().size() - skip;
    ResponseMatrix x(rows.size(), j_count);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == j_count + skip, "response row " + std::to_string(i + 1) + " has the wrong number of columns");
        for (std::size_t j = 0; j < j_count; ++j) {
            const auto& cell = rows[i][j + skip];
            require(cell == "0" || cell == "1", "response (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                                    ") is '" + cell + "', expected 0 or 1");
            x(i, j) = cell == "1" ? 1 : 0;
        }
    }
    return x;
}

inline ResponseMatrix load_responses(const std::filesystem::path& p) {
    auto in = open_in(p);
    return read_responses(in);
}

// ---------------------------------------------------------------------------
// G-matrix and effects export
// ---------------------------------------------------------------------------

/// Pattern columns (one per relevant attribute) followed by one indicator
/// column per global profile.
inline std::string gmatrix_csv(const GMatrix& g, const ProfileSpace& space) {
    std::ostringstream out;
    out << "# item " << (g.item() + 1) << ", " << to_string(g.flavor()) << "; " << profile_order_note << '\n';
    bool first = true;
    for (std::size_t a : g.attributes()) {
        out << (first ? "" : ",") << 'k' << (a + 1);
        first = false;
    }
    for (std::size_t l = 0; l < space.size(); ++l) {
        out << ",p" << space.label(l);
    }
    out << '\n';
    const auto dense = g.dense();
    for (std::size_t p = 0; p < g.pattern_count(); ++p) {
        const auto pat = g.pattern(p);
        for (std::size_t c = 0; c < pat.size(); ++c) {
            out << (c ? "," : "") << pat[c];
        }
        for (std::size_t l = 0; l < space.size(); ++l) {
            out << ',' << dense(p, l);
        }
        out << '\n';
    }
    return out.str();
}

inline std::string effects_csv(const Model& model, const ItemTable& theta) {
    require(model.flavor() == Flavor::collapsed, "effects are defined for the collapsed flavor only");
    const std::size_t k = model.qmatrix().attributes();
    std::vector<std::string> columns;
    std::vector<std::vector<std::pair<std::string, double>>> rows;
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto& g = model.gmatrix(j);
        const auto eff = theta_to_delta(theta[j], g.patterns());
        std::vector<std::pair<std::string, double>> row;
        for (std::size_t t = 0; t < eff.terms.size(); ++t) {
            auto label = effect_label(eff.terms[t], g.attributes(), k);
            if (std::find(columns.begin(), columns.end(), label) == columns.end()) {
                columns.push_back(label);
            }
            row.emplace_back(label, eff.values[t]);
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(columns.begin(), columns.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    std::ostringstream out;
    out << "item";
    for (const auto& c : columns) {
        out << ',' << c;
    }
    out << '\n';
    for (std::size_t j = 0; j < rows.size(); ++j) {
        out << (j + 1);
        for (const auto& c : columns) {
            out << ',';
            for (const auto& [label, v] : rows[j]) {
                if (label == c) {
                    out << std::setprecision(10) << v;
                }
            }
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

inline std::vector<std::string> pattern_labels(const GMatrix& g) {
    std::vector<std::string> out;
    for (std::size_t p = 0; p < g.pattern_count(); ++p) {
        out.push_back(ProfileSpace::pattern_label(g.pattern(p)));
    }
    return out;
}

/// One row per item: for each item pattern, its label and "EAP (SD)".
inline std::string theta_table_csv(const Model& model, const ItemTable& eap, const ItemTable& sd) {
    std::size_t width = 0;
    for (const auto& g : model.gmatrices()) {
        width = std::max(width, g.pattern_count());
    }
    std::ostringstream out;
    out << "item";
    for (std::size_t c = 1; c <= width; ++c) {
        out << ",pattern" << c << ",estimate" << c;
    }
    out << '\n';
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto labels = pattern_labels(model.gmatrix(j));
        out << (j + 1);
        for (std::size_t c = 0; c < width; ++c) {
            if (c < labels.size()) {
                out << ",P(" << labels[c] << ")," << fixed(eap[j][c], 3) << " (" << fixed(sd[j][c], 3) << ')';
            } else {
                out << ",,";
            }
        }
        out << '\n';
    }
    return out.str();
}

inline std::string theta_long_csv(const Model& model, const ItemTable& eap, const ItemTable& sd,
                                  const ItemTable* rhat = nullptr) {
    std::ostringstream out;
    out << "item,pattern,eap,sd" << (rhat ? ",rhat" : "") << '\n';
    out << std::setprecision(10);
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto labels = pattern_labels(model.gmatrix(j));
        for (std::size_t p = 0; p < labels.size(); ++p) {
            out << (j + 1) << ',' << labels[p] << ',' << eap[j][p] << ',' << sd[j][p];
            if (rhat) {
                out << ',' << (*rhat)[j][p];
            }
            out << '\n';
        }
    }
    return out.str();
}

inline std::string pi_csv(const ProfileSpace& space, const std::vector<double>& eap, const std::vector<double>& sd,
                          const std::vector<double>* rhat = nullptr) {
    std::ostringstream out;
    out << "# " << profile_order_note << '\n';
    out << "profile,label,eap,sd" << (rhat ? ",rhat" : "") << '\n';
    out << std::setprecision(10);
    for (std::size_t l = 0; l < space.size(); ++l) {
        out << l << ',' << space.label(l) << ',' << eap[l] << ',' << sd[l];
        if (rhat) {
            out << ',' << (*rhat)[l];
        }
        out << '\n';
    }
    return out.str();
}

inline json model_json(const Model& model) {
    json items = json::array();
    for (const auto& g : model.gmatrices()) {
        std::vector<std::size_t> attrs;
        for (std::size_t a : g.attributes()) {
            attrs.push_back(a + 1);
        }
        items.push_back({{"attributes", attrs}, {"patterns", pattern_labels(g)}});
    }
    std::vector<std::string> profiles;
    for (std::size_t l = 0; l < model.profiles(); ++l) {
        profiles.push_back(model.space().label(l));
    }
    return {{"flavor", to_string(model.flavor())},
            {"levels", model.qmatrix().levels()},
            {"profile_order", profile_order_note},
            {"profiles", profiles},
            {"items", items}};
}

inline json fit_report_json(const Model& model, const FitReport& rep) {
    return {{"model", model_json(model)},
            {"converged", rep.converged},
            {"iterations", rep.iterations},
            {"wall_time", rep.wall_time},
            {"vlb_trace", rep.state.vlb_trace},
            {"eap_theta", rep.eap_theta},
            {"sd_theta", rep.sd_theta},
            {"eap_pi", rep.eap_pi},
            {"sd_pi", rep.sd_pi},
            {"delta_star", rep.state.delta_star},
            {"a_star", rep.state.a_star},
            {"b_star", rep.state.b_star},
            {"map_profiles", rep.map_profiles}};
}

inline json mcmc_summary_json(const Model& model, const McmcSummary& s, const ChainConfig& cfg) {
    return {{"model", model_json(model)},
            {"chains", {{"n_chains", cfg.n_chains}, {"n_iter", cfg.n_iter}, {"burn_in", cfg.burn_in}, {"thin", cfg.thin}, {"seed", cfg.seed}}},
            {"wall_time", s.wall_time},
            {"max_rhat", s.max_rhat},
            {"pi_sum_error", s.pi_sum_error},
            {"eap_theta", s.eap_theta},
            {"sd_theta", s.sd_theta},
            {"rhat_theta", s.rhat_theta},
            {"eap_pi", s.eap_pi},
            {"sd_pi", s.sd_pi},
            {"rhat_pi", s.rhat_pi},
            {"map_profiles", s.map_profiles}};
}

/// Raw post-burn-in draws: one CSV per parameter block.
inline std::pair<std::string, std::string> draws_csv(const Model& model, const std::vector<ChainDraws>& draws) {
    std::ostringstream theta;
    std::ostringstream pi;
    theta << "chain,draw";
    for (std::size_t j = 0; j < model.items(); ++j) {
        for (const auto& label : pattern_labels(model.gmatrix(j))) {
            theta << ",theta_" << (j + 1) << '_' << label;
        }
    }
    theta << '\n';
    pi << "# " << profile_order_note << "\nchain,draw";
    for (std::size_t l = 0; l < model.profiles(); ++l) {
        pi << ",pi_" << model.space().label(l);
    }
    pi << '\n';
    theta << std::setprecision(8);
    pi << std::setprecision(8);
    for (std::size_t c = 0; c < draws.size(); ++c) {
        for (std::size_t r = 0; r < draws[c].theta.rows(); ++r) {
            theta << (c + 1) << ',' << (r + 1);
            for (double v : draws[c].theta.row(r)) {
                theta << ',' << v;
            }
            theta << '\n';
            pi << (c + 1) << ',' << (r + 1);
            for (double v : draws[c].pi.row(r)) {
                pi << ',' << v;
            }
            pi << '\n';
        }
    }
    return {theta.str(), pi.str()};
}

inline json truth_json(const SimTruth& t) {
    return {{"levels", t.qmatrix.levels()},
            {"flavor", to_string(t.flavor)},
            {"rho", t.rho},
            {"profile_order", profile_order_note},
            {"truth_mc_draws", t.truth_mc_draws},
            {"theta_true", t.theta_true},
            {"pi_true", t.pi_true},
            {"profiles_true", t.profiles_true}};
}

inline SimTruth read_truth(std::istream& in, const QMatrix& q) {
    try {
        json j;
        in >> j;
        SimTruth t;
        t.qmatrix = q;
        t.flavor = parse_flavor(j.at("flavor").get<std::string>());
        t.rho = j.at("rho").get<double>();
        t.truth_mc_draws = j.at("truth_mc_draws").get<std::size_t>();
        t.theta_true = j.at("theta_true").get<ItemTable>();
        t.pi_true = j.at("pi_true").get<std::vector<double>>();
        t.profiles_true = j.at("profiles_true").get<std::vector<std::size_t>>();
        return t;
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid truth JSON: ") + e.what());
    }
}

} // namespace pgdcm::io

#endif
