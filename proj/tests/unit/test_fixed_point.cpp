#include <cmath>

#include <gtest/gtest.h>
#include "lassodist/covariance.hpp"
#include "lassodist/fixed_point.hpp"
#include "../support/oracles.hpp"

using namespace lassodist;

TEST(ClosedForm, SoftThresholdMseMatchesQuadrature)
{
    for (double mu : {0.0, 0.3, 1.0, 2.5, -4.0, 10.0})
        for (double tau : {0.5, 1.0, 2.0})
            for (double t : {0.1, 1.0, 3.0}) {
                EXPECT_NEAR(soft_threshold_mse(mu, tau, t), oracle::soft_mse(mu, tau, t), 1e-8)
                    << mu << " " << tau << " " << t;
                EXPECT_NEAR(soft_threshold_nonzero_prob(mu, tau, t), oracle::soft_nonzero(mu, tau, t), 1e-8);
            }
}

TEST(ClosedForm, NullSignalLimits)
{
    // μ = 0, t = 0 leaves pure noise
    EXPECT_NEAR(soft_threshold_mse(0.0, 1.5, 1e-12), 2.25, 1e-9);
    EXPECT_NEAR(soft_threshold_nonzero_prob(0.0, 1.0, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(soft_threshold_mse(0.0, 1.0, 50.0), 0.0, 1e-12);
}

TEST(MonteCarlo, IdentityRiskDfAgreeWithClosedForm)
{
    const int p = 200;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    theta.head(20).setConstant(2.0);
    const auto m = identity_covariance(p);
    const double n = 100.0;
    const auto mc = estimate_risk_df(theta, m, 1.0, 1.3, 0.7, n, 4000, SeedSpec{5});
    const auto cf = risk_df_identity_closed_form(theta, 1.0, 1.3, 0.7, n / p);
    EXPECT_NEAR(mc.risk, cf.risk, 4.0 * mc.se_risk);
    EXPECT_NEAR(mc.df, cf.df, 4.0 * mc.se_df);
}

TEST(MonteCarlo, SmoothedDfUsesSteinAndConvergesToCount)
{
    const int p = 200;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    theta.head(30).setConstant(-1.5);
    const auto m = identity_covariance(p);
    const auto cf = risk_df_identity_closed_form(theta, 1.0, 1.0, 0.8, 0.5);
    const auto sm = estimate_risk_df(theta, m, 1.0, 1.0, 0.8, 100.0, 8000, SeedSpec{6}, 1e-4);
    EXPECT_NEAR(sm.df, cf.df, 4.0 * sm.se_df + 1e-3);
    EXPECT_NEAR(sm.risk, cf.risk, 4.0 * sm.se_risk + 1e-3);
}

TEST(MonteCarlo, DrawsArePrefixConsistent)
{
    const auto m = build_ar_covariance(0.5, 30);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(30);
    theta[3] = 2.0;
    FixedDesignSampler a(theta, m, 1.0, 15.0, 0.0, SeedSpec{9});
    FixedDesignSampler b(theta, m, 1.0, 15.0, 0.0, SeedSpec{9});
    const auto small = a.estimate(1.2, 0.8, 10);
    b.ensure_samples(50);
    const auto again = b.estimate(1.2, 0.8, 10);
    EXPECT_DOUBLE_EQ(small.risk, again.risk);
    EXPECT_DOUBLE_EQ(small.df, again.df);
}

TEST(FixedPoint, IdentityClosedFormSatisfiesEquations)
{
    const int p = 400;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    theta.head(40).setConstant(3.0);
    FixedPointConfig cfg;
    cfg.fp_tol = 1e-10;
    cfg.max_outer = 20000;
    const auto sol = solve_fixed_point_identity(theta, 1.5, 1.0, 0.5, cfg);
    ASSERT_TRUE(sol.converged);
    const auto rd = risk_df_identity_closed_form(theta, 1.5, sol.tau_star, sol.zeta_star, 0.5);
    EXPECT_NEAR(sol.tau_star * sol.tau_star, 1.0 + rd.risk, 1e-9);
    EXPECT_NEAR(sol.zeta_star, 1.0 - rd.df, 1e-9);
    EXPECT_GT(sol.zeta_star, 0.0);
    EXPECT_LE(sol.zeta_star, 1.0);
}

TEST(FixedPoint, HomogeneousUnderJointScaling)
{
    const int p = 300;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    theta.head(30).setConstant(1.0);
    FixedPointConfig cfg;
    cfg.fp_tol = 1e-11;
    cfg.max_outer = 20000;
    const auto a = solve_fixed_point_identity(theta, 1.0, 1.0, 0.5, cfg);
    const auto b = solve_fixed_point_identity(2.0 * theta, 2.0, 2.0, 0.5, cfg);
    EXPECT_NEAR(b.tau_star, 2.0 * a.tau_star, 1e-8);
    EXPECT_NEAR(b.zeta_star, a.zeta_star, 1e-8);
}

TEST(FixedPoint, MonteCarloMatchesClosedForm)
{
    const int p = 200;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    theta.head(20).setConstant(2.0);
    theta.segment(20, 20).setConstant(-2.0);
    FixedPointConfig cfg;
    cfg.n_mc = 500;
    cfg.n_mc_max = 2000;
    const auto mc = solve_fixed_point(theta, identity_covariance(p), 1.0, 1.0, 100.0, cfg, SeedSpec{3});
    FixedPointConfig exact = cfg;
    exact.fp_tol = 1e-10;
    exact.max_outer = 20000;
    const auto cf = solve_fixed_point_identity(theta, 1.0, 1.0, 0.5, exact);
    ASSERT_TRUE(mc.converged);
    EXPECT_GT(mc.se_tau, 0.0);
    EXPECT_NEAR(mc.tau_star, cf.tau_star, 4.0 * mc.se_tau + 2e-4);
    EXPECT_NEAR(mc.zeta_star, cf.zeta_star, 4.0 * mc.se_zeta + 2e-4);
    EXPECT_FALSE(mc.trace.empty());
}

TEST(FixedPoint, ZeroSignalHasZeroRiskLimit)
{
    const int p = 100;
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    FixedPointConfig cfg;
    cfg.fp_tol = 1e-10;
    cfg.max_outer = 20000;
    const auto sol = solve_fixed_point_identity(theta, 3.0, 1.0, 0.5, cfg);
    ASSERT_TRUE(sol.converged);
    EXPECT_GE(sol.tau_star, 1.0);
    EXPECT_LT(sol.tau_star, 1.01);
}

TEST(FixedPoint, RejectsNonPositiveNoise)
{
    Eigen::VectorXd theta = Eigen::VectorXd::Ones(10);
    EXPECT_THROW(solve_fixed_point_identity(theta, 1.0, 0.0, 0.5, FixedPointConfig{}), Error);
    FixedPointConfig bad;
    bad.damping = 1.5;
    EXPECT_THROW(solve_fixed_point_identity(theta, 1.0, 1.0, 0.5, bad), Error);
}

TEST(OmegaStar, MatchesStatisticalDimensionFormula)
{
    for (double eps : {0.01, 0.05, 0.1, 0.2, 0.4, 0.7, 0.95})
        EXPECT_NEAR(omega_star(eps), oracle::omega_star_statdim(eps), 1e-7) << eps;
}

TEST(OmegaStar, StrictlyIncreasingWithLimits)
{
    double prev = 0.0;
    for (int i = 1; i < 100; ++i) {
        const double w = omega_star(i / 100.0);
        EXPECT_GT(w, prev);
        EXPECT_LT(w, 1.0);
        prev = w;
    }
    EXPECT_THROW(omega_star(0.0), Error);
    EXPECT_THROW(omega_star(1.0), Error);
}

TEST(EpsStar, RoundTripsAndSaturates)
{
    for (double eps : {0.05, 0.2, 0.5}) {
        const double w = omega_star(eps);
        EXPECT_NEAR(eps_star(1.0, w * w), eps, 1e-6);
    }
    EXPECT_DOUBLE_EQ(eps_star(1.0, 1.0), 1.0);
    EXPECT_LT(eps_star(4.0, 0.5), eps_star(1.0, 0.5));
    EXPECT_THROW(eps_star(0.5, 0.5), Error);
}
