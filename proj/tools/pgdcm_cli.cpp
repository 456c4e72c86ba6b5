// pgdcm: command-line front end for simulation, VB fitting, Gibbs sampling,
// VB/Gibbs comparison, replication studies and core-scaling benchmarks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgdcm/pgdcm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pgdcm;

namespace {

constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_input = 2, exit_not_converged = 3, exit_disagreement = 4 };

struct Common {
    std::string qmatrix;
    std::string levels;
    std::string design;
    std::string responses;
    std::string flavor = "collapsed";
    std::string prior = "weak";
    double tol = 1e-4;
    std::size_t max_iter = 2000;
    std::size_t cores = 8;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::string format = "csv";
    bool random_init = false;
};

/// Collects written files and emits manifest.json next to them.
class Output {
public:
    Output(std::string command, const fs::path& dir) : command_(std::move(command)), dir_(dir) {
        fs::create_directories(dir_);
        start_ = std::chrono::steady_clock::now();
    }

    void write(const std::string& name, const std::string& content) {
        io::atomic_write(dir_ / name, content);
        files_.push_back(name);
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    json& config() { return config_; }
    json& seeds() { return seeds_; }
    json& inputs() { return inputs_; }

    void finish() {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m{{"command", command_},
               {"tool_version", tool_version},
               {"config", config_},
               {"seeds", seeds_},
               {"inputs", inputs_},
               {"outputs", files_},
               {"wall_time", wall}};
        io::atomic_write(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path dir_;
    json config_ = json::object();
    json seeds_ = json::object();
    json inputs_ = json::object();
    std::vector<std::string> files_;
    std::chrono::steady_clock::time_point start_;
};

QMatrix resolve_qmatrix(const Common& c) {
    if (!c.design.empty()) {
        require(c.qmatrix.empty(), "pass either --design or --qmatrix, not both");
        return builtin_qmatrix(parse_design(c.design));
    }
    require(!c.qmatrix.empty(), "a Q-matrix is required (--qmatrix or --design)");
    return io::load_qmatrix(c.qmatrix, c.levels);
}

void record_inputs(Output& out, const Common& c) {
    if (!c.design.empty()) {
        out.inputs()["design"] = c.design;
    }
    if (!c.qmatrix.empty()) {
        out.inputs()["qmatrix"] = fs::absolute(c.qmatrix).string();
        out.inputs()["levels"] = fs::absolute(c.levels.empty() ? io::levels_sidecar(c.qmatrix) : fs::path(c.levels)).string();
    }
    if (!c.responses.empty()) {
        out.inputs()["responses"] = fs::absolute(c.responses).string();
    }
}

FitConfig fit_config(const Common& c) {
    require(c.tol > 0.0, "--tol must be positive");
    require(c.max_iter >= 1, "--max-iter must be at least 1");
    require(c.cores >= 1, "--cores must be at least 1");
    FitConfig f;
    f.tol = c.tol;
    f.max_iter = c.max_iter;
    f.cores = c.cores;
    if (c.random_init) {
        f.dirichlet_seed = c.seed;
    }
    return f;
}

void record_fit_config(Output& out, const Common& c) {
    out.config()["flavor"] = c.flavor;
    out.config()["prior"] = to_string(parse_prior_scheme(c.prior));
    out.config()["tol"] = c.tol;
    out.config()["max_iter"] = c.max_iter;
    out.config()["cores"] = c.cores;
    out.config()["init"] = c.random_init ? "dirichlet" : "uniform";
    if (c.random_init) {
        out.seeds()["master"] = c.seed;
        out.seeds()["vb-init"] = derive_seed(c.seed, "vb-init");
    }
}

void check_format(const std::string& f) { require(f == "csv" || f == "json", "--format must be csv or json"); }

std::string vlb_csv(const std::vector<double>& trace) {
    std::ostringstream s;
    s << "iteration,vlb\n" << std::setprecision(17);
    for (std::size_t t = 0; t < trace.size(); ++t) {
        s << (t + 1) << ',' << trace[t] << '\n';
    }
    return s.str();
}

std::string profiles_csv(const ProfileSpace& space, const std::vector<std::size_t>& map) {
    std::ostringstream s;
    s << "# " << io::profile_order_note << "\nid,profile,label\n";
    for (std::size_t i = 0; i < map.size(); ++i) {
        s << (i + 1) << ',' << map[i] << ',' << space.label(map[i]) << '\n';
    }
    return s.str();
}

void write_fit(Output& out, const Model& model, const FitReport& rep, const std::string& format) {
    if (format == "json") {
        out.write_json("fit.json", io::fit_report_json(model, rep));
    } else {
        out.write("theta.csv", io::theta_table_csv(model, rep.eap_theta, rep.sd_theta));
        out.write("theta_long.csv", io::theta_long_csv(model, rep.eap_theta, rep.sd_theta));
        out.write("pi.csv", io::pi_csv(model.space(), rep.eap_pi, rep.sd_pi));
        out.write("vlb_trace.csv", vlb_csv(rep.state.vlb_trace));
        out.write("profiles.csv", profiles_csv(model.space(), rep.map_profiles));
        out.write_json("fit_summary.json", {{"converged", rep.converged},
                                            {"iterations", rep.iterations},
                                            {"wall_time", rep.wall_time},
                                            {"final_vlb", rep.state.vlb_trace.back()}});
    }
    if (model.flavor() == Flavor::collapsed) {
        out.write("effects.csv", io::effects_csv(model, rep.eap_theta));
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::size_t n = 10000;
    double rho = 0.1;
    std::size_t truth_draws = 10'000'000;
    double p_low_lo = 0.05, p_low_hi = 0.25, p_high_lo = 0.75, p_high_hi = 0.95;
};

/// A JSON config file supplies defaults; explicit flags win.
void apply_sim_config(const std::string& path, Common& c, SimulateArgs& a, const CLI::App& sub) {
    auto in = io::open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid config JSON: ") + e.what());
    }
    auto take = [&](const char* key, const char* flag, auto& dst) {
        if (j.contains(key) && sub.count(flag) == 0) {
            try {
                j.at(key).get_to(dst);
            } catch (const json::exception& e) {
                throw InputError(std::string("config key '") + key + "': " + e.what());
            }
        }
    };
    take("design", "--design", c.design);
    take("qmatrix", "--qmatrix", c.qmatrix);
    take("levels", "--levels", c.levels);
    take("flavor", "--flavor", c.flavor);
    take("seed", "--seed", c.seed);
    take("n", "--n", a.n);
    take("rho", "--rho", a.rho);
    take("truth_draws", "--truth-draws", a.truth_draws);
}

int cmd_simulate(Common& c, SimulateArgs& a, const CLI::App& sub) {
    if (!a.config.empty()) {
        apply_sim_config(a.config, c, a, sub);
    }
    require(a.n >= 1, "N must be at least 1");
    SimConfig cfg;
    cfg.qmatrix = resolve_qmatrix(c);
    cfg.n = a.n;
    cfg.rho = a.rho;
    cfg.flavor = parse_flavor(c.flavor);
    cfg.seed = c.seed;
    cfg.p_low = {a.p_low_lo, a.p_low_hi};
    cfg.p_high = {a.p_high_lo, a.p_high_hi};
    cfg.truth_mc_draws = a.truth_draws;
    const auto data = simulate(cfg, {}, c.cores);

    Output out("simulate", c.out_dir);
    record_inputs(out, c);
    if (!a.config.empty()) {
        out.inputs()["config"] = fs::absolute(a.config).string();
    }
    out.config() = {{"n", cfg.n},
                    {"rho", cfg.rho},
                    {"flavor", to_string(cfg.flavor)},
                    {"p_low", {cfg.p_low.lo, cfg.p_low.hi}},
                    {"p_high", {cfg.p_high.lo, cfg.p_high.hi}},
                    {"truth_draws", cfg.truth_mc_draws}};
    out.seeds() = {{"master", cfg.seed},
                   {"profiles", derive_seed(cfg.seed, "profiles")},
                   {"items", derive_seed(cfg.seed, "items")},
                   {"responses", derive_seed(cfg.seed, "responses")},
                   {"truth-pi", "per 1e6-draw block b: derive(master, truth-pi, b)"}};
    out.write("qmatrix.csv", io::qmatrix_csv(cfg.qmatrix));
    out.write("qmatrix.levels.json", io::levels_json(cfg.qmatrix.levels()));
    out.write("responses.csv", io::responses_csv(data.responses));
    out.write_json("truth.json", io::truth_json(data.truth));
    out.finish();
    return exit_ok;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const Common& c) {
    check_format(c.format);
    const auto q = resolve_qmatrix(c);
    require(!c.responses.empty(), "--responses is required");
    const auto x = io::load_responses(c.responses);
    const Model model(q, parse_flavor(c.flavor));
    const auto priors = default_priors(model, parse_prior_scheme(c.prior));
    const auto rep = fit(x, model, priors, fit_config(c));

    Output out("fit", c.out_dir);
    record_inputs(out, c);
    record_fit_config(out, c);
    write_fit(out, model, rep, c.format);
    out.finish();
    if (!rep.converged) {
        std::cerr << "warning: VB did not converge within " << c.max_iter << " iterations\n";
        return exit_not_converged;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// gibbs / compare
// ---------------------------------------------------------------------------

struct ChainArgs {
    std::size_t chains = 3;
    std::size_t iter = 5000;
    std::size_t burn_in = 2000;
    std::size_t thin = 1;
    bool dump_draws = false;
};

ChainConfig chain_config(const Common& c, const ChainArgs& a) {
    ChainConfig cfg;
    cfg.n_chains = a.chains;
    cfg.n_iter = a.iter;
    cfg.burn_in = a.burn_in;
    cfg.thin = a.thin;
    cfg.seed = c.seed;
    cfg.cores = c.cores;
    cfg.keep_draws = a.dump_draws;
    return cfg;
}

void record_chain_config(Output& out, const ChainConfig& cfg) {
    out.config()["chains"] = {{"n_chains", cfg.n_chains}, {"n_iter", cfg.n_iter}, {"burn_in", cfg.burn_in}, {"thin", cfg.thin}};
    out.seeds()["master"] = cfg.seed;
    json chains = json::array();
    for (std::size_t ch = 0; ch < cfg.n_chains; ++ch) {
        chains.push_back(derive_seed(cfg.seed, "gibbs-chain", ch));
    }
    out.seeds()["gibbs-chain"] = chains;
}

void write_gibbs(Output& out, const Model& model, const McmcSummary& s, const ChainConfig& cfg, const std::string& format) {
    if (format == "json") {
        out.write_json("gibbs.json", io::mcmc_summary_json(model, s, cfg));
    } else {
        out.write("gibbs_theta.csv", io::theta_table_csv(model, s.eap_theta, s.sd_theta));
        out.write("gibbs_theta_long.csv", io::theta_long_csv(model, s.eap_theta, s.sd_theta, &s.rhat_theta));
        out.write("gibbs_pi.csv", io::pi_csv(model.space(), s.eap_pi, s.sd_pi, &s.rhat_pi));
        out.write("gibbs_profiles.csv", profiles_csv(model.space(), s.map_profiles));
        out.write_json("gibbs_summary.json",
                       {{"max_rhat", s.max_rhat}, {"pi_sum_error", s.pi_sum_error}, {"wall_time", s.wall_time}});
    }
    if (!s.draws.empty()) {
        const auto [theta, pi] = io::draws_csv(model, s.draws);
        out.write("draws_theta.csv", theta);
        out.write("draws_pi.csv", pi);
    }
}

int cmd_gibbs(const Common& c, const ChainArgs& a) {
    check_format(c.format);
    const auto q = resolve_qmatrix(c);
    require(!c.responses.empty(), "--responses is required");
    const auto x = io::load_responses(c.responses);
    const Model model(q, parse_flavor(c.flavor));
    const auto priors = default_priors(model, parse_prior_scheme(c.prior));
    const auto cfg = chain_config(c, a);
    const auto s = gibbs_fit(x, model, priors, cfg);

    Output out("gibbs", c.out_dir);
    record_inputs(out, c);
    out.config()["flavor"] = c.flavor;
    out.config()["prior"] = to_string(parse_prior_scheme(c.prior));
    out.config()["cores"] = c.cores;
    record_chain_config(out, cfg);
    write_gibbs(out, model, s, cfg, c.format);
    out.finish();
    if (s.max_rhat >= 1.05) {
        std::cerr << "warning: max split-Rhat " << s.max_rhat << " >= 1.05\n";
    }
    return exit_ok;
}

struct Thresholds {
    double eap_theta = 0.03;
    double eap_pi = 0.005;
    double agreement = 0.99;
};

int cmd_compare(const Common& c, const ChainArgs& a, const Thresholds& t) {
    const auto q = resolve_qmatrix(c);
    require(!c.responses.empty(), "--responses is required");
    const auto x = io::load_responses(c.responses);
    const Model model(q, parse_flavor(c.flavor));
    const auto priors = default_priors(model, parse_prior_scheme(c.prior));
    const auto vb = fit(x, model, priors, fit_config(c));
    const auto cfg = chain_config(c, a);
    const auto mcmc = gibbs_fit(x, model, priors, cfg);
    const auto cmp = compare_fits(vb, mcmc, model.space());

    const auto& worst_g = model.gmatrix(cmp.max_eap_theta_at.item);
    json report{
        {"largest_abs_eap_theta_difference", cmp.max_eap_theta_diff},
        {"largest_abs_eap_theta_difference_at",
         {{"item", cmp.max_eap_theta_at.item + 1},
          {"pattern", ProfileSpace::pattern_label(worst_g.pattern(cmp.max_eap_theta_at.pattern))}}},
        {"largest_abs_sd_theta_difference", cmp.max_sd_theta_diff},
        {"largest_sd_theta_excess_vb_over_gibbs", cmp.max_sd_theta_excess},
        {"theta_sd_underestimated_by_vb", cmp.sd_underestimated},
        {"theta_parameters", cmp.theta_parameters},
        {"largest_abs_eap_pi_difference", cmp.max_eap_pi_diff},
        {"largest_abs_eap_pi_difference_at", model.space().label(cmp.max_eap_pi_at)},
        {"largest_abs_sd_pi_difference", cmp.max_sd_pi_diff},
        {"element_wise_matched_ratio", cmp.element_agreement},
        {"pattern_wise_matched_ratio", cmp.pattern_agreement},
        {"max_rhat", cmp.max_rhat},
        {"vb_converged", vb.converged},
        {"vb_iterations", vb.iterations},
        {"vb_seconds", cmp.vb_seconds},
        {"gibbs_seconds", cmp.gibbs_seconds},
        {"time_ratio_gibbs_over_vb", cmp.vb_seconds > 0 ? cmp.gibbs_seconds / cmp.vb_seconds : 0.0},
        {"thresholds", {{"eap_theta", t.eap_theta}, {"eap_pi", t.eap_pi}, {"pattern_agreement", t.agreement}}}};
    const bool unconverged = cmp.max_rhat >= 1.05;
    if (unconverged) {
        report["warning"] = "Gibbs chains not converged: max split-Rhat >= 1.05";
        std::cerr << "warning: max split-Rhat " << cmp.max_rhat << " >= 1.05\n";
    }

    std::ostringstream side;
    side << "item,pattern,vb_eap,gibbs_eap,eap_diff,vb_sd,gibbs_sd,sd_diff,rhat\n" << std::setprecision(10);
    for (std::size_t j = 0; j < model.items(); ++j) {
        const auto labels = io::pattern_labels(model.gmatrix(j));
        for (std::size_t p = 0; p < labels.size(); ++p) {
            side << (j + 1) << ',' << labels[p] << ',' << vb.eap_theta[j][p] << ',' << mcmc.eap_theta[j][p] << ','
                 << vb.eap_theta[j][p] - mcmc.eap_theta[j][p] << ',' << vb.sd_theta[j][p] << ',' << mcmc.sd_theta[j][p]
                 << ',' << vb.sd_theta[j][p] - mcmc.sd_theta[j][p] << ',' << mcmc.rhat_theta[j][p] << '\n';
        }
    }
    std::ostringstream side_pi;
    side_pi << "# " << io::profile_order_note << "\nprofile,label,vb_eap,gibbs_eap,eap_diff,vb_sd,gibbs_sd,rhat\n"
            << std::setprecision(10);
    for (std::size_t l = 0; l < model.profiles(); ++l) {
        side_pi << l << ',' << model.space().label(l) << ',' << vb.eap_pi[l] << ',' << mcmc.eap_pi[l] << ','
                << vb.eap_pi[l] - mcmc.eap_pi[l] << ',' << vb.sd_pi[l] << ',' << mcmc.sd_pi[l] << ',' << mcmc.rhat_pi[l]
                << '\n';
    }

    Output out("compare", c.out_dir);
    record_inputs(out, c);
    record_fit_config(out, c);
    record_chain_config(out, cfg);
    out.write_json("compare.json", report);
    out.write("compare_theta.csv", side.str());
    out.write("compare_pi.csv", side_pi.str());
    if (!mcmc.draws.empty()) {
        const auto [theta, pi] = io::draws_csv(model, mcmc.draws);
        out.write("draws_theta.csv", theta);
        out.write("draws_pi.csv", pi);
    }
    out.finish();

    std::printf("largest absolute EAP difference (theta): %.4f\n", cmp.max_eap_theta_diff);
    std::printf("largest absolute EAP difference (pi):    %.5f\n", cmp.max_eap_pi_diff);
    std::printf("pattern-wise matched ratio:              %.4f\n", cmp.pattern_agreement);
    std::printf("max split-Rhat:                          %.4f\n", cmp.max_rhat);

    const bool disagree = cmp.max_eap_theta_diff > t.eap_theta || cmp.max_eap_pi_diff > t.eap_pi ||
                          cmp.pattern_agreement < t.agreement;
    return disagree ? exit_disagreement : exit_ok;
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

struct ReplicateArgs {
    std::size_t n = 10000;
    double rho = 0.1;
    std::size_t reps = 10;
    std::string priors = "weak";
    std::size_t truth_draws = 10'000'000;
    std::size_t fit_cores = 0;       ///< 0: derived from the parallelism rule
    bool oversubscribe = false;
};

struct ReplicationOutcome {
    bool ok = false;
    bool converged = false;
    double wall = 0.0;
    std::string error;
    ItemTable theta;
    ItemTable theta_truth;
    std::vector<double> pi;
    std::vector<std::size_t> profiles;
    std::vector<std::size_t> truth_profiles;
    std::size_t violations = 0;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string condition_prefix(const std::string& design, const ReplicateArgs& a, const std::string& flavor) {
    std::ostringstream s;
    s << design << ',' << a.n << ',' << a.rho << ',' << flavor;
    return s.str();
}

int cmd_replicate(const Common& c, const ReplicateArgs& a) {
    require(a.reps >= 1, "--reps must be at least 1");
    require(a.n >= 1, "N must be at least 1");
    require(c.cores >= 1, "--cores must be at least 1");
    const auto q = resolve_qmatrix(c);
    const Flavor flavor = parse_flavor(c.flavor);
    const Model model(q, flavor);
    std::vector<PriorScheme> schemes;
    for (const auto& s : split_list(a.priors)) {
        schemes.push_back(parse_prior_scheme(s));
    }
    require(!schemes.empty(), "--priors needs at least one scheme");

    // Parallelism budget: replications in parallel with single-core fits, or
    // sequential replications with multi-core fits. Both only on request.
    std::size_t rep_workers = std::min(c.cores, a.reps);
    std::size_t fit_cores = 1;
    if (a.fit_cores > 0) {
        fit_cores = a.fit_cores;
        if (fit_cores > 1 && !a.oversubscribe) {
            rep_workers = 1;
        }
    }

    const auto pi_true = true_mixing_proportions(q.levels(), a.rho, a.truth_draws, c.seed, c.cores);

    std::map<PriorScheme, std::vector<ReplicationOutcome>> results;
    for (auto scheme : schemes) {
        results[scheme].resize(a.reps);
    }
    WorkerPool pool(rep_workers);
    pool.run([&](std::size_t w) {
        const auto range = chunk_range(a.reps, pool.size(), w);
        for (std::size_t t = range.begin; t < range.end; ++t) {
            SimConfig cfg;
            cfg.qmatrix = q;
            cfg.n = a.n;
            cfg.rho = a.rho;
            cfg.flavor = flavor;
            cfg.seed = derive_seed(c.seed, "replication", t);
            cfg.truth_mc_draws = a.truth_draws;
            std::optional<SimData> data;
            std::string sim_error;
            try {
                data = simulate(cfg, pi_true);
            } catch (const std::exception& e) {
                sim_error = e.what();
            }
            for (auto scheme : schemes) {
                auto& r = results[scheme][t];
                if (!data) {
                    r.error = "simulation failed: " + sim_error;
                    continue;
                }
                try {
                    FitConfig fc = fit_config(c);
                    fc.cores = fit_cores;
                    const auto rep = fit(data->responses, model, default_priors(model, scheme), fc);
                    r.ok = true;
                    r.converged = rep.converged;
                    r.wall = rep.wall_time;
                    r.theta = rep.eap_theta;
                    r.pi = rep.eap_pi;
                    r.profiles = rep.map_profiles;
                    r.theta_truth = data->truth.theta_true;
                    r.truth_profiles = data->truth.profiles_true;
                    r.violations = monotonicity_check(rep.eap_theta, model.gmatrices()).size();
                } catch (const std::exception& e) {
                    r.error = e.what();
                }
            }
        }
    });

    std::size_t max_kstar = 0;
    for (std::size_t j = 0; j < q.items(); ++j) {
        max_kstar = std::max(max_kstar, k_star(q.row(j)));
    }
    const std::string design_name = c.design.empty() ? "custom" : c.design;
    const std::string prefix = condition_prefix(design_name, a, c.flavor);

    std::ostringstream t_theta;
    std::ostringstream t_pi;
    std::ostringstream t_rates;
    std::ostringstream t_time;
    std::ostringstream t_prior;
    t_theta << "design,n,rho,flavor,prior";
    for (std::size_t k = 1; k <= max_kstar; ++k) {
        t_theta << ",bias_k" << k << ",rmse_k" << k;
    }
    t_theta << '\n';
    t_pi << "design,n,rho,flavor,prior,bias_max,bias_min,rmse_max,rmse_min\n";
    t_rates << "design,n,rho,flavor,prior";
    for (std::size_t k = 1; k <= q.attributes(); ++k) {
        t_rates << ",eacr_a" << k;
    }
    t_rates << ",pacr\n";
    t_time << "design,n,rho,flavor,prior,mean_wall_time,convergence_rate,failed_replications\n";
    t_prior << "prior,design,n";
    for (std::size_t k = 1; k <= max_kstar; ++k) {
        t_prior << ",bias_k" << k << ",rmse_k" << k;
    }
    t_prior << ",monotonicity_violations\n";

    json summary = json::array();
    bool any_failed = false;
    Output out("replicate", c.out_dir);
    for (auto scheme : schemes) {
        const auto& rs = results[scheme];
        std::vector<ItemTable> theta_est;
        std::vector<ItemTable> theta_truth;
        std::vector<std::vector<double>> pi_est;
        std::vector<std::vector<std::size_t>> prof_est;
        std::vector<std::size_t> failed;
        std::vector<json> errors;
        std::vector<std::vector<std::size_t>> prof_true;
        std::size_t converged = 0;
        std::size_t violations = 0;
        double wall = 0.0;
        for (std::size_t t = 0; t < rs.size(); ++t) {
            if (!rs[t].ok) {
                failed.push_back(t);
                errors.push_back({{"replication", t + 1}, {"error", rs[t].error}});
                continue;
            }
            converged += rs[t].converged ? 1 : 0;
            wall += rs[t].wall;
            violations += rs[t].violations;
            theta_est.push_back(rs[t].theta);
            pi_est.push_back(rs[t].pi);
            prof_est.push_back(rs[t].profiles);
            prof_true.push_back(rs[t].truth_profiles);
            theta_truth.push_back(rs[t].theta_truth);
        }
        any_failed = any_failed || !failed.empty();
        const double conv_rate = static_cast<double>(converged) / static_cast<double>(rs.size());
        const std::size_t ok = theta_est.size();
        t_time << prefix << ',' << to_string(scheme) << ',' << (ok ? wall / static_cast<double>(ok) : 0.0) << ','
               << conv_rate << ',' << failed.size() << '\n';
        json entry{{"prior", to_string(scheme)}, {"replications", rs.size()}, {"convergence_rate", conv_rate},
                   {"failures", errors}, {"monotonicity_violations", violations}};
        if (ok == 0) {
            summary.push_back(entry);
            continue;
        }
        // Each replication has its own true theta: accumulate errors against
        // matching truths.
        ThetaRecovery theta_rec;
        {
            std::map<std::size_t, std::pair<double, double>> acc;
            std::map<std::size_t, std::size_t> counts;
            const double reps = static_cast<double>(ok);
            for (std::size_t j = 0; j < q.items(); ++j) {
                const std::size_t ks = k_star(q.row(j));
                for (std::size_t p = 0; p < theta_est[0][j].size(); ++p) {
                    double err = 0.0;
                    double sq = 0.0;
                    for (std::size_t t = 0; t < ok; ++t) {
                        const double d = theta_est[t][j][p] - theta_truth[t][j][p];
                        err += d;
                        sq += d * d;
                    }
                    acc[ks].first += err / reps;
                    acc[ks].second += std::sqrt(sq / reps);
                    ++counts[ks];
                }
            }
            for (const auto& [ks, v] : acc) {
                theta_rec[ks] = {v.first / static_cast<double>(counts[ks]), v.second / static_cast<double>(counts[ks]),
                                 counts[ks]};
            }
        }
        const auto pi_rec = bias_rmse_pi(pi_est, pi_true);
        const auto rates = classification_rates(prof_est, prof_true, model.space());

        {
            const std::string row = prefix + "," + to_string(scheme);
            t_theta << row;
            for (std::size_t k = 1; k <= max_kstar; ++k) {
                const auto it = theta_rec.find(k);
                t_theta << ',' << (it == theta_rec.end() ? 0.0 : it->second.bias) << ','
                        << (it == theta_rec.end() ? 0.0 : it->second.rmse);
            }
            t_theta << '\n';
            t_pi << row << ',' << pi_rec.max_bias << ',' << pi_rec.min_bias << ',' << pi_rec.max_rmse << ','
                 << pi_rec.min_rmse << '\n';
            t_rates << row;
            for (double e : rates.eacr) {
                t_rates << ',' << e;
            }
            t_rates << ',' << rates.pacr << '\n';
        }
        t_prior << to_string(scheme) << ',' << design_name << ',' << a.n;
        for (std::size_t k = 1; k <= max_kstar; ++k) {
            const auto it = theta_rec.find(k);
            t_prior << ',' << (it == theta_rec.end() ? 0.0 : it->second.bias) << ','
                    << (it == theta_rec.end() ? 0.0 : it->second.rmse);
        }
        t_prior << ',' << violations << '\n';

        json buckets = json::object();
        for (const auto& [k, b] : theta_rec) {
            buckets[std::to_string(k)] = {{"bias", b.bias}, {"rmse", b.rmse}, {"parameters", b.parameters}};
        }
        entry["theta"] = buckets;
        entry["pi"] = {{"max_bias", pi_rec.max_bias}, {"min_bias", pi_rec.min_bias}, {"max_rmse", pi_rec.max_rmse},
                       {"min_rmse", pi_rec.min_rmse}};
        entry["eacr"] = rates.eacr;
        entry["pacr"] = rates.pacr;
        entry["mean_wall_time"] = wall / static_cast<double>(ok);
        summary.push_back(entry);
    }

    record_inputs(out, c);
    out.config() = {{"n", a.n},           {"rho", a.rho},           {"reps", a.reps},
                    {"flavor", c.flavor}, {"priors", a.priors},     {"tol", c.tol},
                    {"max_iter", c.max_iter}, {"replication_workers", rep_workers}, {"fit_cores", fit_cores},
                    {"truth_draws", a.truth_draws}};
    json rep_seeds = json::array();
    for (std::size_t t = 0; t < a.reps; ++t) {
        rep_seeds.push_back(derive_seed(c.seed, "replication", t));
    }
    out.seeds() = {{"master", c.seed}, {"replication", rep_seeds}};
    out.write("recovery_theta.csv", t_theta.str());
    out.write("recovery_pi.csv", t_pi.str());
    out.write("classification.csv", t_rates.str());
    out.write("timing.csv", t_time.str());
    if (schemes.size() > 1) {
        out.write("prior_comparison.csv", t_prior.str());
    }
    out.write_json("recovery.json", summary);
    out.finish();
    if (any_failed) {
        std::cerr << "warning: some replications failed; see recovery.json\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
    std::size_t n = 10000;
    double rho = 0.1;
    std::string cores_list = "1,2,4,8";
    bool dry_run = false;
};

int cmd_bench(const Common& c, const BenchArgs& a) {
    require(a.n >= 1, "N must be at least 1");
    SimConfig sim;
    sim.qmatrix = resolve_qmatrix(c);
    sim.n = a.n;
    sim.rho = a.rho;
    sim.flavor = parse_flavor(c.flavor);
    sim.seed = c.seed;
    sim.truth_mc_draws = 1;
    const auto data = simulate(sim);
    const Model model(sim.qmatrix, sim.flavor);
    const auto priors = default_priors(model, parse_prior_scheme(c.prior));

    std::vector<std::size_t> cores;
    for (const auto& s : split_list(a.cores_list)) {
        require(io::is_integer(s) && std::stoi(s) >= 1, "--cores-list entries must be positive integers");
        cores.push_back(static_cast<std::size_t>(std::stoi(s)));
    }
    require(!cores.empty(), "--cores-list is empty");

    std::ostringstream table;
    table << "cores,wall_time,iterations,converged,speedup,identical_trace\n";
    double base = 0.0;
    std::vector<double> ref_trace;
    for (std::size_t i = 0; i < cores.size(); ++i) {
        FitConfig fc = fit_config(c);
        fc.cores = cores[i];
        if (a.dry_run) {
            fc.max_iter = 1;
        }
        const auto rep = fit(data.responses, model, priors, fc);
        if (i == 0) {
            base = rep.wall_time;
            ref_trace = rep.state.vlb_trace;
        }
        table << cores[i] << ',' << rep.wall_time << ',' << rep.iterations << ',' << (rep.converged ? 1 : 0) << ','
              << (rep.wall_time > 0 ? base / rep.wall_time : 0.0) << ','
              << (rep.state.vlb_trace == ref_trace ? 1 : 0) << '\n';
        std::printf("cores=%zu wall=%.3fs iterations=%zu speedup=%.2f\n", cores[i], rep.wall_time, rep.iterations,
                    rep.wall_time > 0 ? base / rep.wall_time : 0.0);
    }

    Output out("bench", c.out_dir);
    record_inputs(out, c);
    out.config() = {{"n", a.n}, {"rho", a.rho}, {"cores_list", cores}, {"dry_run", a.dry_run},
                    {"flavor", c.flavor}, {"prior", c.prior}, {"tol", c.tol}, {"max_iter", c.max_iter},
                    {"hardware_threads", std::thread::hardware_concurrency()}};
    out.seeds() = {{"master", c.seed}};
    out.write("bench.csv", table.str());
    out.finish();
    return exit_ok;
}

// ---------------------------------------------------------------------------
// gmatrix / effects
// ---------------------------------------------------------------------------

int cmd_gmatrix(const Common& c, std::size_t item) {
    const auto q = resolve_qmatrix(c);
    const Model model(q, parse_flavor(c.flavor));
    require(item <= model.items(), "--item out of range");
    Output out("gmatrix", c.out_dir);
    record_inputs(out, c);
    out.config() = {{"flavor", c.flavor}, {"item", item}};
    for (std::size_t j = 0; j < model.items(); ++j) {
        if (item == 0 || item == j + 1) {
            out.write("gmatrix_item" + std::to_string(j + 1) + ".csv", io::gmatrix_csv(model.gmatrix(j), model.space()));
        }
    }
    out.finish();
    return exit_ok;
}

int cmd_effects(const Common& c, const std::string& fit_json) {
    const auto q = resolve_qmatrix(c);
    const Model model(q, Flavor::collapsed);
    auto in = io::open_in(fit_json);
    ItemTable theta;
    try {
        json j;
        in >> j;
        require(j.at("model").at("flavor").get<std::string>() == "collapsed", "effects need a collapsed-flavor fit");
        theta = j.at("eap_theta").get<ItemTable>();
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid fit JSON: ") + e.what());
    }
    require(theta.size() == model.items(), "fit item count does not match the Q-matrix");
    Output out("effects", c.out_dir);
    record_inputs(out, c);
    out.inputs()["fit"] = fs::absolute(fit_json).string();
    out.write("effects.csv", io::effects_csv(model, theta));
    out.finish();
    return exit_ok;
}

void add_model_flags(CLI::App* sub, Common& c) {
    sub->add_option("--qmatrix", c.qmatrix, "Q-matrix CSV (header k1..kK)");
    sub->add_option("--levels", c.levels, "levels JSON {\"levels\":[...]} (default: <qmatrix>.levels.json)");
    sub->add_option("--design", c.design, "builtin Q-matrix: K4J60 K4J120 K7J60 K7J120 G9");
    sub->add_option("--flavor", c.flavor, "collapsed|reduced")->capture_default_str();
}

void add_fit_flags(CLI::App* sub, Common& c) {
    sub->add_option("--prior", c.prior, "weak|flat")->capture_default_str();
    sub->add_option("--tol", c.tol, "VLB convergence tolerance")->capture_default_str();
    sub->add_option("--max-iter", c.max_iter, "maximum VB iterations")->capture_default_str();
    sub->add_flag("--random-init", c.random_init, "start from Dirichlet(1) responsibilities seeded by --seed");
}

void add_run_flags(CLI::App* sub, Common& c) {
    sub->add_option("--cores", c.cores, "worker threads")->capture_default_str();
    sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
    sub->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
}

void add_chain_flags(CLI::App* sub, ChainArgs& a) {
    sub->add_option("--chains", a.chains, "number of chains")->capture_default_str();
    sub->add_option("--iter", a.iter, "sweeps per chain")->capture_default_str();
    sub->add_option("--burn-in", a.burn_in, "discarded sweeps")->capture_default_str();
    sub->add_option("--thin", a.thin, "keep every k-th sweep")->capture_default_str();
    sub->add_flag("--dump-draws", a.dump_draws, "write raw post-burn-in draws");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational Bayes and Gibbs estimation for polytomous-attribute saturated DCMs"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    Common c;
    SimulateArgs sim;
    ChainArgs chains;
    Thresholds thresholds;
    ReplicateArgs rep;
    BenchArgs bench;
    std::size_t gmatrix_item = 0;
    std::string fit_json;

    auto* s_sim = app.add_subcommand("simulate", "simulate a dataset (Q-matrix, responses, truth)");
    add_model_flags(s_sim, c);
    add_run_flags(s_sim, c);
    s_sim->add_option("--config", sim.config, "JSON config (keys: design qmatrix levels flavor seed n rho truth_draws)");
    s_sim->add_option("--n", sim.n, "examinees")->capture_default_str();
    s_sim->add_option("--rho", sim.rho, "attribute correlation")->capture_default_str();
    s_sim->add_option("--truth-draws", sim.truth_draws, "Monte Carlo draws for true mixing proportions")->capture_default_str();
    s_sim->add_option("--p-low-min", sim.p_low_lo)->capture_default_str();
    s_sim->add_option("--p-low-max", sim.p_low_hi)->capture_default_str();
    s_sim->add_option("--p-high-min", sim.p_high_lo)->capture_default_str();
    s_sim->add_option("--p-high-max", sim.p_high_hi)->capture_default_str();

    auto* s_fit = app.add_subcommand("fit", "variational Bayes fit");
    add_model_flags(s_fit, c);
    add_fit_flags(s_fit, c);
    add_run_flags(s_fit, c);
    s_fit->add_option("--responses", c.responses, "0/1 response CSV")->required();
    s_fit->add_option("--format", c.format, "csv|json")->capture_default_str();

    auto* s_gibbs = app.add_subcommand("gibbs", "Gibbs sampler fit");
    add_model_flags(s_gibbs, c);
    s_gibbs->add_option("--prior", c.prior, "weak|flat")->capture_default_str();
    add_run_flags(s_gibbs, c);
    add_chain_flags(s_gibbs, chains);
    s_gibbs->add_option("--responses", c.responses, "0/1 response CSV")->required();
    s_gibbs->add_option("--format", c.format, "csv|json")->capture_default_str();

    auto* s_cmp = app.add_subcommand("compare", "VB versus Gibbs on the same data");
    add_model_flags(s_cmp, c);
    add_fit_flags(s_cmp, c);
    add_run_flags(s_cmp, c);
    add_chain_flags(s_cmp, chains);
    s_cmp->add_option("--responses", c.responses, "0/1 response CSV")->required();
    s_cmp->add_option("--max-eap-theta-diff", thresholds.eap_theta)->capture_default_str();
    s_cmp->add_option("--max-eap-pi-diff", thresholds.eap_pi)->capture_default_str();
    s_cmp->add_option("--min-pattern-agreement", thresholds.agreement)->capture_default_str();

    auto* s_rep = app.add_subcommand("replicate", "simulation study: simulate + fit per replication");
    add_model_flags(s_rep, c);
    add_fit_flags(s_rep, c);
    add_run_flags(s_rep, c);
    s_rep->add_option("--n", rep.n, "examinees")->capture_default_str();
    s_rep->add_option("--rho", rep.rho, "attribute correlation")->capture_default_str();
    s_rep->add_option("--reps", rep.reps, "replications")->capture_default_str();
    s_rep->add_option("--priors", rep.priors, "comma list of prior schemes, e.g. weak,flat")->capture_default_str();
    s_rep->add_option("--truth-draws", rep.truth_draws)->capture_default_str();
    s_rep->add_option("--fit-cores", rep.fit_cores, "threads per fit (runs replications sequentially unless --oversubscribe)");
    s_rep->add_flag("--oversubscribe", rep.oversubscribe, "allow parallel replications and parallel fits together");

    auto* s_bench = app.add_subcommand("bench", "fit wall time per core count");
    add_model_flags(s_bench, c);
    add_fit_flags(s_bench, c);
    add_run_flags(s_bench, c);
    s_bench->add_option("--n", bench.n)->capture_default_str();
    s_bench->add_option("--rho", bench.rho)->capture_default_str();
    s_bench->add_option("--cores-list", bench.cores_list)->capture_default_str();
    s_bench->add_flag("--dry-run", bench.dry_run, "single VB iteration per core count");

    auto* s_g = app.add_subcommand("gmatrix", "export item G-matrices");
    add_model_flags(s_g, c);
    s_g->add_option("--out-dir", c.out_dir)->capture_default_str();
    s_g->add_option("--item", gmatrix_item, "1-based item (default: all)");

    auto* s_eff = app.add_subcommand("effects", "effects table from a JSON fit report");
    add_model_flags(s_eff, c);
    s_eff->add_option("--out-dir", c.out_dir)->capture_default_str();
    s_eff->add_option("--fit", fit_json, "fit.json written by `fit --format json`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_input;
    }

    try {
        if (*s_sim) {
            return cmd_simulate(c, sim, *s_sim);
        }
        if (*s_fit) {
            return cmd_fit(c);
        }
        if (*s_gibbs) {
            return cmd_gibbs(c, chains);
        }
        if (*s_cmp) {
            return cmd_compare(c, chains, thresholds);
        }
        if (*s_rep) {
            return cmd_replicate(c, rep);
        }
        if (*s_bench) {
            return cmd_bench(c, bench);
        }
        if (*s_g) {
            return cmd_gmatrix(c, gmatrix_item);
        }
        if (*s_eff) {
            return cmd_effects(c, fit_json);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_ok;
}
