#include <cmath>

#include <gtest/gtest.h>
#include "lassodist/covariance.hpp"
#include "lassodist/data.hpp"
#include "lassodist/inference.hpp"
#include "lassodist/solvers.hpp"
#include "../support/oracles.hpp"

using namespace lassodist;

namespace {

struct Problem
{
    ProblemInstance inst;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Problem make_problem(const CovarianceModel& m, int n, double target, std::uint64_t seed,
                     Normalization norm = Normalization::by_n)
{
    Problem pr;
    pr.inst.theta_star = Eigen::VectorXd::Zero(m.dim());
    pr.inst.theta_star.head(4) << 2.0, -2.0, 1.5, -1.0;
    pr.inst.theta_star[m.dim() / 2] = target;
    pr.inst.n = n;
    pr.inst.lambda = 1.0;
    pr.inst.normalization = norm;
    pr.X = sample_design(m, pr.inst, SeedSpec{seed});
    pr.y = generate_data(pr.inst, pr.X, SeedSpec{seed}).y;
    return pr;
}

} // namespace

TEST(Debias, TauHatMatchesFormula)
{
    const auto m = build_ar_covariance(0.5, 60);
    const Problem pr = make_problem(m, 40, 0.0, 1);
    const LassoFit fit = solve_lasso(pr.X, pr.y, 1.0);
    const double expected = (pr.y - pr.X * fit.theta_hat).norm() / std::sqrt(40.0) /
                            (1.0 - double(fit.active_count) / 40.0);
    EXPECT_NEAR(tau_hat(pr.y, pr.X, fit), expected, 1e-14);
}

TEST(Debias, AdjustedDiffersFromUnadjustedByDofFactor)
{
    const auto m = build_ar_covariance(0.5, 60);
    const Problem pr = make_problem(m, 40, 0.0, 2);
    const LassoFit fit = solve_lasso(pr.X, pr.y, 1.0);
    const auto adj = debias(pr.X, pr.y, fit, m, true);
    const auto raw = debias(pr.X, pr.y, fit, m, false);
    const double f = 1.0 - double(fit.active_count) / 40.0;
    const Eigen::VectorXd corr_adj = adj.theta_d - fit.theta_hat;
    const Eigen::VectorXd corr_raw = raw.theta_d - fit.theta_hat;
    EXPECT_LT((f * corr_adj - corr_raw).norm(), 1e-10);
    const Eigen::VectorXd direct = m.inv() * pr.X.transpose() * (pr.y - pr.X * fit.theta_hat);
    EXPECT_LT((corr_raw - direct).norm(), 1e-10);
}

TEST(Debias, SaturatedFitIsDegenerate)
{
    const auto m = identity_covariance(30);
    ProblemInstance inst;
    inst.theta_star = Eigen::VectorXd::Constant(30, 5.0);
    inst.n = 10;
    inst.sigma_noise = 1.0;
    const Eigen::MatrixXd X = sample_design(m, inst, SeedSpec{4});
    const Eigen::VectorXd y = generate_data(inst, X, SeedSpec{4}).y;
    LassoFit fit = solve_lasso(X, y, 1e-4);
    fit.active_count = 10;
    try {
        debias(X, y, fit, m, true);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_dof);
    }
    EXPECT_NO_THROW(debias(X, y, fit, m, false));
}

TEST(Debias, ByPScalingMatchesByNAnalysis)
{
    const auto m = build_ar_covariance(0.5, 50);
    const Problem pp = make_problem(m, 30, 1.0, 5, Normalization::by_p);
    const double c = std::sqrt(30.0 / 50.0);
    const LassoFit fp = solve_lasso(pp.X, pp.y, 1.0);
    const Eigen::MatrixXd Xn = pp.X / c;
    const LassoFit fn = solve_lasso(Xn, pp.y, 1.0 / c);
    const auto dp = debias(pp.X, pp.y, fp, m, true, Normalization::by_p);
    const auto dn = debias(Xn, pp.y, fn, m, true, Normalization::by_n);
    EXPECT_LT((c * dp.theta_d - dn.theta_d).norm(), 1e-6);
    const auto cp = debiased_cis(dp, tau_hat(pp.y, pp.X, fp), m, 0.05);
    const auto cn = debiased_cis(dn, tau_hat(pp.y, Xn, fn), m, 0.05);
    EXPECT_LT((c * (cp.hi - cp.lo) - (cn.hi - cn.lo)).norm(), 1e-6);
}

TEST(ConfidenceIntervals, CoverageIndicatorsAndFcp)
{
    const auto m = identity_covariance(4);
    DebiasedEstimate est;
    est.theta_d = Eigen::Vector4d(0.0, 1.0, 2.0, 3.0);
    est.n = 100;
    const Eigen::Vector4d truth(0.0, 1.0, 2.0, 10.0);
    const auto rep = debiased_cis(est, 1.0, m, 0.05, truth);
    ASSERT_EQ(rep.covered.size(), 4u);
    EXPECT_FALSE(rep.covered[3]);
    EXPECT_NEAR(rep.fcp, 0.25, 1e-15);
    EXPECT_NEAR(rep.hi[0] - rep.lo[0], 2.0 * 1.959963984540054, 1e-9);
    EXPECT_THROW(debiased_cis(est, 1.0, m, 1.5), Error);
    EXPECT_THROW(no_dof_ci(est, 1.0, m, 0.05), Error);  // adjusted estimate
}

TEST(LeaveOneOut, StatisticFormula)
{
    const auto m = build_ar_covariance(0.5, 40);
    const Problem pr = make_problem(m, 30, 0.0, 7);
    const Eigen::Index j = 20;
    const LooResult r = loo_statistic(pr.X, pr.y, m, j, 1.0);
    const Eigen::MatrixXd Xr = drop_column(pr.X, j);
    const LassoFit fit = solve_lasso(Xr, pr.y, 1.0);
    const Eigen::VectorXd res = pr.y - Xr * fit.theta_hat;
    const double f = 1.0 - double(fit.active_count) / 30.0;
    const Eigen::VectorXd xp = residualized_feature(pr.X, m, j);
    EXPECT_NEAR(r.xi, xp.dot(res) / (m.cond_var(j) * f), 1e-8);
    EXPECT_NEAR(r.tau_hat_loo, res.norm() / (std::sqrt(30.0) * f), 1e-8);
    EXPECT_LT(r.lo, r.xi);
    EXPECT_GT(r.hi, r.xi);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
}

TEST(ExactTest, NullStatisticIsStandardNormal)
{
    // ξ Σ_{j|-j}^{1/2}/τ̂ is exactly N(0, 1) when θ*_j = ω
    const auto m = build_ar_covariance(0.5, 30);
    std::vector<double> z;
    for (std::uint64_t r = 0; r < 600; ++r) {
        const Problem pr = make_problem(m, 20, 0.7, 100 + r);
        const LooResult res = exact_test(pr.X, pr.y, m, 15, 0.7, 1.0);
        z.push_back(res.xi * std::sqrt(m.cond_var(15)) / res.tau_hat_loo);
    }
    EXPECT_LT(oracle::ks_normal(z), 1.63 / std::sqrt(600.0));
}

TEST(ExactTest, InversionCoversTruth)
{
    const auto m = build_ar_covariance(0.5, 30);
    const Problem pr = make_problem(m, 25, 1.0, 8);
    std::vector<double> grid;
    for (int i = -40; i <= 60; ++i) grid.push_back(i * 0.1);
    const ExactInterval ci = invert_exact_test(pr.X, pr.y, m, 15, 1.0, 0.05, grid);
    ASSERT_FALSE(ci.empty);
    EXPECT_LE(ci.lo, ci.hi);
    EXPECT_EQ(ci.p_values.size(), grid.size());
    std::vector<double> unsorted{1.0, 0.0};
    EXPECT_THROW(invert_exact_test(pr.X, pr.y, m, 15, 1.0, 0.05, unsorted), Error);
}

TEST(ExactTest, PValueLargeAtTruthSmallFarAway)
{
    const auto m = identity_covariance(20);
    const Problem pr = make_problem(m, 200, 2.0, 9);
    LeaveOneOut loo(pr.X, pr.y, m, 10, 1.0);
    EXPECT_GT(loo.test(2.0).p_value, 0.01);
    EXPECT_LT(loo.test(-20.0).p_value, 1e-6);
}
