// Simulates one K4J60 dataset, fits it with VB and prints recovery numbers.
#include <cstdio>
#include <cstdlib>

#include "pgdcm/pgdcm.hpp"

int main(int argc, char** argv) {
    using namespace pgdcm;
    SimConfig cfg;
    cfg.qmatrix = builtin_qmatrix(Design::K4J60);
    cfg.n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 10000;
    cfg.truth_mc_draws = 1'000'000;
    const auto data = simulate(cfg);
    const Model model(cfg.qmatrix, cfg.flavor);

    FitConfig fc;
    fc.cores = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 8;
    const auto rep = fit(data.responses, model, default_priors(model, PriorScheme::weakly_informative), fc);
    std::printf("converged=%d iterations=%zu wall=%.2fs vlb=%.4f\n", rep.converged, rep.iterations, rep.wall_time,
                rep.state.vlb_trace.back());

    const auto theta = bias_rmse_theta({rep.eap_theta}, data.truth.theta_true, cfg.qmatrix);
    for (const auto& [k, b] : theta) {
        std::printf("K*=%zu bias=%+.4f rmse=%.4f (%zu parameters)\n", k, b.bias, b.rmse, b.parameters);
    }
    const auto pi = bias_rmse_pi({rep.eap_pi}, data.truth.pi_true);
    std::printf("pi max|err|=%.4f\n", std::max(pi.max_bias, -pi.min_bias));
    const auto rates = classification_rates({rep.map_profiles}, {data.truth.profiles_true}, model.space());
    for (std::size_t k = 0; k < rates.eacr.size(); ++k) {
        std::printf("EACR[%zu]=%.3f ", k + 1, rates.eacr[k]);
    }
    std::printf("PACR=%.3f\n", rates.pacr);
    return 0;
}
