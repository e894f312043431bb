#include <cmath>

#include <gtest/gtest.h>
#include "lassodist/covariance.hpp"
#include "lassodist/rng.hpp"
#include "lassodist/solvers.hpp"
#include "../support/oracles.hpp"

using namespace lassodist;

namespace {

Eigen::MatrixXd random_design(int n, int p, std::uint64_t seed)
{
    auto eng = make_engine(SeedSpec{seed}, Stream::design);
    std::normal_distribution<double> N;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = N(eng) / std::sqrt(double(n));
    return X;
}

SolverConfig tight()
{
    SolverConfig c;
    c.tol = 1e-12;
    c.kkt_tol = 1e-10;
    return c;
}

} // namespace

TEST(SoftThreshold, Examples)
{
    EXPECT_DOUBLE_EQ(soft_threshold(3.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-0.5, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold(-4.0, 1.5), -2.5);
}

TEST(Huber, ValuesAndLimit)
{
    EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
    EXPECT_DOUBLE_EQ(huber(3.0, 1.0), 2.5);
    EXPECT_DOUBLE_EQ(huber(-3.0, 0.0), 3.0);
    Eigen::VectorXd t(3);
    t << 1.0, -2.0, 0.25;
    EXPECT_NEAR(moreau_l1(t, 1e-9), t.lpNorm<1>(), 1e-8);
    EXPECT_LE(moreau_l1(t, 0.5), t.lpNorm<1>());
}

TEST(Huber, ProxMatchesScalarMinimization)
{
    for (double alpha : {0.0, 0.1, 1.0}) {
        for (double c : {-3.0, -0.7, 0.0, 0.2, 1.1, 4.0}) {
            const double a = 1.7, w = 0.9;
            auto f = [&](double th) { return 0.5 * a * (th - c) * (th - c) + w * huber(th, alpha); };
            const double ref = oracle::argmin_scalar(f, -10.0, 10.0);
            EXPECT_NEAR(huber_prox(c, a, w, alpha), ref, 1e-7) << "alpha=" << alpha << " c=" << c;
        }
    }
}

TEST(Lasso, MatchesEnumerationOracle)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::MatrixXd X = random_design(12, 6, seed);
        const Eigen::VectorXd y = standard_normal_vector(12, SeedSpec{seed}, Stream::noise);
        const double lambda = 0.1 + 0.05 * static_cast<double>(seed % 5);
        const LassoFit fit = solve_lasso(X, y, lambda, tight());
        const Eigen::VectorXd ref = oracle::lasso_enumerate(X, y, lambda);
        ASSERT_TRUE(fit.converged);
        EXPECT_LT((fit.theta_hat - ref).lpNorm<Eigen::Infinity>(), 1e-8) << "seed " << seed;
    }
}

TEST(Lasso, MatchesFistaInHighDimensions)
{
    const Eigen::MatrixXd X = random_design(30, 80, 4);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(80);
    theta.head(6) << 3, -2, 2, 1.5, -1, 4;
    const Eigen::VectorXd y = X * theta + 0.5 * standard_normal_vector(30, SeedSpec{4}, Stream::noise);
    const LassoFit fit = solve_lasso(X, y, 0.3, tight());
    const Eigen::VectorXd ref = oracle::fista_lasso(X, y, 0.3, 200000);
    EXPECT_LT((fit.theta_hat - ref).norm(), 1e-6);
    EXPECT_LE(fit.active_count, 30);
}

TEST(Lasso, LargeLambdaGivesZero)
{
    const Eigen::MatrixXd X = random_design(20, 10, 2);
    const Eigen::VectorXd y = standard_normal_vector(20, SeedSpec{2}, Stream::noise);
    const double lambda_max = (X.transpose() * y).lpNorm<Eigen::Infinity>();
    const LassoFit fit = solve_lasso(X, y, 1.0001 * lambda_max);
    EXPECT_EQ(fit.active_count, 0);
    EXPECT_TRUE(fit.theta_hat.isZero(0.0));
    EXPECT_LE(fit.subgrad.lpNorm<Eigen::Infinity>(), 1.0);
}

TEST(Lasso, WarmStartReachesSameSolution)
{
    const Eigen::MatrixXd X = random_design(40, 60, 3);
    const Eigen::VectorXd y = standard_normal_vector(40, SeedSpec{3}, Stream::noise);
    const LassoFit cold = solve_lasso(X, y, 0.2, tight());
    const LassoFit warm = solve_lasso(X, y, 0.2, tight(), Eigen::VectorXd::Constant(60, 0.5));
    EXPECT_LT((cold.theta_hat - warm.theta_hat).norm(), 1e-8);
}

TEST(Lasso, RejectsBadInput)
{
    const Eigen::MatrixXd X = random_design(5, 3, 1);
    EXPECT_THROW(solve_lasso(X, Eigen::VectorXd::Zero(4), 1.0), Error);
    EXPECT_THROW(solve_lasso(X, Eigen::VectorXd::Zero(5), 0.0), Error);
}

TEST(Lasso, SubgradientExtraction)
{
    const Eigen::MatrixXd X = random_design(25, 15, 8);
    const Eigen::VectorXd y = standard_normal_vector(25, SeedSpec{8}, Stream::noise);
    const LassoFit fit = solve_lasso(X, y, 0.2, tight());
    const Eigen::VectorXd t = extract_subgradient(X, y, fit.theta_hat, 0.2);
    EXPECT_LT((t - fit.subgrad).norm(), 1e-12);
    for (int j = 0; j < 15; ++j)
        if (fit.theta_hat[j] != 0.0) {
            EXPECT_NEAR(t[j], fit.theta_hat[j] > 0 ? 1.0 : -1.0, 1e-8);
        }
    try {
        extract_subgradient(X, y, fit.theta_hat, 0.02);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::stale_fit);
    }
}

TEST(SmoothedLasso, ApproachesLassoAsAlphaVanishes)
{
    const Eigen::MatrixXd X = random_design(30, 20, 6);
    const Eigen::VectorXd y = standard_normal_vector(30, SeedSpec{6}, Stream::noise);
    const LassoFit base = solve_lasso(X, y, 0.15, tight());
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const LassoFit sm = solve_smoothed_lasso(X, y, 0.15, alpha, tight());
        EXPECT_LT(sm.kkt_residual, 1e-8);
        const double gap = (sm.theta_hat - base.theta_hat).norm();
        EXPECT_LE(gap, prev + 1e-12);
        prev = gap;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(SmoothedLasso, ZeroLambdaIsLeastSquares)
{
    const Eigen::MatrixXd X = random_design(30, 5, 9);
    const Eigen::VectorXd y = standard_normal_vector(30, SeedSpec{9}, Stream::noise);
    const LassoFit fit = solve_smoothed_lasso(X, y, 0.0, 0.1, tight());
    const Eigen::VectorXd ls = X.colPivHouseholderQr().solve(y);
    EXPECT_LT((fit.theta_hat - ls).norm(), 1e-8);
}

TEST(Prox, IdentityIsSoftThresholding)
{
    const auto m = identity_covariance(50);
    const Eigen::VectorXd yf = 3.0 * standard_normal_vector(50, SeedSpec{1}, Stream::monte_carlo);
    const ProxFit fit = fixed_design_prox(yf, m, 1.2, 0.6);
    for (int j = 0; j < 50; ++j) EXPECT_NEAR(fit.theta_hat[j], oracle::soft(yf[j], 2.0), 1e-10);
}

TEST(Prox, CorrelatedMatchesFista)
{
    const auto m = build_ar_covariance(0.5, 40);
    const Eigen::VectorXd yf = 2.0 * standard_normal_vector(40, SeedSpec{2}, Stream::monte_carlo);
    SolverConfig cfg = tight();
    const ProxFit fit = fixed_design_prox(yf, m, 1.0, 0.8, cfg);
    const Eigen::VectorXd ref = oracle::fista_quadratic(m.sigma(), m.sqrt() * yf, 1.0 / 0.8, 50000);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT((fit.theta_hat - ref).norm(), 1e-8);
    EXPECT_LT(fit.kkt_residual, 1e-9);
}

TEST(Prox, SmoothedWithZeroAlphaDelegates)
{
    const auto m = build_ar_covariance(0.3, 10);
    const Eigen::VectorXd yf = standard_normal_vector(10, SeedSpec{3}, Stream::monte_carlo);
    const ProxFit a = smoothed_prox(yf, m, 0.5, 0.7, 0.0, tight());
    const ProxFit b = fixed_design_prox(yf, m, 0.5, 0.7, tight());
    EXPECT_EQ(a.theta_hat, b.theta_hat);
    EXPECT_THROW(fixed_design_prox(yf, m, 0.5, 0.0), Error);
}
