#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "pgdcm/special.hpp"

namespace {

// E[log t] under Beta(a, b) by quadrature of the density.
double integrate_log_beta(double a, double b, bool complement) {
    boost::math::quadrature::tanh_sinh<double> q;
    const double norm = boost::math::beta(a, b);
    auto f = [&](double t) {
        const double dens = std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0) / norm;
        return dens * std::log(complement ? 1.0 - t : t);
    };
    return q.integrate(f, 0.0, 1.0);
}

} // namespace

TEST(Special, UniformExpectedLogIsMinusOne) {
    const auto [e0, e1] = pgdcm::expected_log_beta(1.0, 1.0);
    EXPECT_NEAR(e0, -1.0, 1e-12);
    EXPECT_NEAR(e1, -1.0, 1e-12);
}

TEST(Special, ExpectedLogBetaMatchesQuadrature) {
    for (auto [a, b] : std::vector<std::pair<double, double>>{{1, 2}, {2, 1}, {3.5, 0.7}, {12, 40}, {0.6, 0.9}}) {
        const auto [e0, e1] = pgdcm::expected_log_beta(a, b);
        EXPECT_NEAR(e0, integrate_log_beta(a, b, false), 1e-8) << a << "," << b;
        EXPECT_NEAR(e1, integrate_log_beta(a, b, true), 1e-8) << a << "," << b;
    }
}

TEST(Special, LargeSymmetricBetaNearLogHalf) {
    const auto [e0, e1] = pgdcm::expected_log_beta(1000.0, 1000.0);
    EXPECT_NEAR(e0, std::log(0.5), 1e-3);
    EXPECT_NEAR(e1, std::log(0.5), 1e-3);
}

TEST(Special, NonPositiveParametersRejected) {
    EXPECT_THROW(pgdcm::expected_log_beta(0.0, 1.0), std::domain_error);
    EXPECT_THROW(pgdcm::expected_log_beta(1.0, -2.0), std::domain_error);
}

TEST(Special, DirichletExpectedLogMatchesBetaMarginal) {
    const std::vector<double> delta{1.5, 2.0, 0.5, 4.0};
    const auto e = pgdcm::expected_log_dirichlet(delta);
    const double total = 8.0;
    for (std::size_t l = 0; l < delta.size(); ++l) {
        EXPECT_NEAR(e[l], integrate_log_beta(delta[l], total - delta[l], false), 1e-8);
    }
}

TEST(Special, DirichletNormOfTwoIsBeta) {
    const std::vector<double> delta{2.5, 0.75};
    EXPECT_NEAR(pgdcm::log_dirichlet_norm(delta), -std::log(boost::math::beta(2.5, 0.75)), 1e-12);
    const std::vector<double> ones(5, 1.0);
    EXPECT_NEAR(pgdcm::log_dirichlet_norm(ones), std::log(24.0), 1e-12);
}

TEST(Special, LogSumExp) {
    const std::vector<double> v{-1000.0, -1000.0};
    EXPECT_NEAR(pgdcm::log_sum_exp(v), -1000.0 + std::log(2.0), 1e-12);
    const std::vector<double> w{0.1, -2.0, 3.0};
    long double s = 0;
    for (double x : w) {
        s += std::exp(static_cast<long double>(x));
    }
    EXPECT_NEAR(pgdcm::log_sum_exp(w), static_cast<double>(std::log(s)), 1e-14);
    EXPECT_TRUE(std::isinf(pgdcm::log_sum_exp(std::vector<double>{})));
}

TEST(Special, BetaSdUniform) {
    EXPECT_NEAR(pgdcm::beta_sd(1.0, 1.0), std::sqrt(1.0 / 12.0), 1e-15);
}

TEST(Special, DirichletSdMatchesBetaMarginal) {
    std::vector<double> delta(12, 1.0);
    delta[3] = 5.0;
    const auto sd = pgdcm::dirichlet_sd(delta);
    const double total = 16.0;
    for (std::size_t l = 0; l < delta.size(); ++l) {
        EXPECT_NEAR(sd[l], pgdcm::beta_sd(delta[l], total - delta[l]), 1e-15);
    }
}
