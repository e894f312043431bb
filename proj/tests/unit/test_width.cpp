#include <cmath>
#include <memory>

#include <gtest/gtest.h>
#include "lassodist/covariance.hpp"
#include "lassodist/fixed_point.hpp"
#include "lassodist/rng.hpp"
#include "lassodist/width.hpp"
#include "../support/oracles.hpp"

using namespace lassodist;

namespace {

Eigen::VectorXd sign_pattern(int p, int s)
{
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < s; ++i) x[(i * 7) % p] = i % 2 ? -1.0 : 1.0;
    return x;
}

} // namespace

TEST(SignedSupport, Examples)
{
    const Eigen::Vector3d x = signed_support(Eigen::Vector3d(3.0, 0.0, -1.0));
    EXPECT_EQ(x, Eigen::Vector3d(1.0, 0.0, -1.0));
    EXPECT_EQ(signed_support(Eigen::Vector3d(0.5, 0.0, -7.0)), x);
    try {
        signed_support(Eigen::VectorXd::Zero(4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::empty_support);
    }
}

TEST(Cone, Validation)
{
    auto m = std::make_shared<const CovarianceModel>(identity_covariance(3));
    EXPECT_THROW(make_cone(Eigen::Vector3d(2.0, 0.0, 0.0), m), Error);
    EXPECT_THROW(make_cone(Eigen::Vector2d(1.0, 0.0), m), Error);
    EXPECT_THROW(make_cone(Eigen::Vector3d::Zero(), m), Error);
    EXPECT_EQ(make_cone(Eigen::Vector3d(1.0, 0.0, -1.0), m).support.size(), 2u);
}

TEST(WidthSample, IdentityMatchesPolarDistanceOracle)
{
    const int p = 200;
    auto m = std::make_shared<const CovarianceModel>(identity_covariance(p));
    const ConeSpec cone = make_cone(sign_pattern(p, 40), m);
    for (std::uint64_t i = 0; i < 10; ++i) {
        const Eigen::VectorXd g = standard_normal_vector(p, SeedSpec{1}, Stream::width, i);
        const WidthSample s = sample_width(cone, g);
        ASSERT_TRUE(s.feasible && s.converged);
        const double ref = oracle::identity_cone_projection_norm(cone.signs, g) / std::sqrt(double(p));
        EXPECT_NEAR(s.value, ref, 1e-6);
        EXPECT_LE(s.value, ref + 1e-9);
    }
}

TEST(WidthSample, CertificateHoldsUnderCorrelation)
{
    const int p = 80;
    auto m = std::make_shared<const CovarianceModel>(build_ar_covariance(0.5, p));
    const ConeSpec cone = make_cone(sign_pattern(p, 16), m);
    WidthConfig cfg;
    for (std::uint64_t i = 0; i < 5; ++i) {
        const Eigen::VectorXd g = standard_normal_vector(p, SeedSpec{2}, Stream::width, i);
        const WidthSample s = sample_width(cone, g, cfg);
        EXPECT_TRUE(s.feasible);
        EXPECT_TRUE(s.converged);
        EXPECT_GE(s.value, 0.0);
        EXPECT_LE(s.norm_sq_ratio, 1.0 + cfg.feas_tol);
        EXPECT_LE(s.value, g.norm() / std::sqrt(double(p)) + 1e-12);
    }
}

TEST(WidthSample, DualFeasibleGivesZero)
{
    // g in the polar cone: g = t·u with u_S = x_S and |u_{S^c}| ≤ 1
    const int p = 6;
    auto m = std::make_shared<const CovarianceModel>(identity_covariance(p));
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(p);
    const ConeSpec cone = make_cone(x, m);
    const WidthSample s = sample_width(cone, 2.0 * x);
    EXPECT_TRUE(s.feasible);
    EXPECT_NEAR(s.value, 0.0, 1e-9);
}

TEST(WidthSample, Deterministic)
{
    const int p = 60;
    auto m = std::make_shared<const CovarianceModel>(build_ar_covariance(0.4, p));
    const ConeSpec cone = make_cone(sign_pattern(p, 10), m);
    const Eigen::VectorXd g = standard_normal_vector(p, SeedSpec{3}, Stream::width, 0);
    const WidthSample a = sample_width(cone, g), b = sample_width(cone, g);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(WidthSample, MonotoneInNestedSupports)
{
    const int p = 60;
    auto m = std::make_shared<const CovarianceModel>(build_ar_covariance(0.5, p));
    const Eigen::VectorXd g = standard_normal_vector(p, SeedSpec{4}, Stream::width, 0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    double prev = -1.0;
    for (int k = 0; k < 30; k += 3) {
        for (int i = k; i < k + 3; ++i) x[(i * 11) % p] = i % 2 ? -1.0 : 1.0;
        const WidthSample s = sample_width(make_cone(x, m), g);
        EXPECT_GE(s.value, prev - 1e-6);
        prev = s.value;
    }
}

TEST(WidthEstimate, IdentityMedianNearOmegaStar)
{
    const int p = 400;
    auto m = std::make_shared<const CovarianceModel>(identity_covariance(p));
    const ConeSpec cone = make_cone(sign_pattern(p, 80), m);
    const WidthEstimate est = estimate_width(cone, 100, SeedSpec{5});
    EXPECT_EQ(est.n_flagged, 0);
    EXPECT_FALSE(est.unreliable);
    EXPECT_NEAR(est.median, omega_star(0.2), 0.05 * omega_star(0.2));
    EXPECT_NEAR(est.mean, omega_star(0.2), 0.05 * omega_star(0.2));
    EXPECT_LE(est.q05, est.median);
    EXPECT_GE(est.q95, est.median);
}

TEST(WidthEstimate, FirstSampleIndependentOfCount)
{
    const int p = 50;
    auto m = std::make_shared<const CovarianceModel>(build_ar_covariance(0.5, p));
    const ConeSpec cone = make_cone(sign_pattern(p, 10), m);
    const WidthEstimate one = estimate_width(cone, 1, SeedSpec{6});
    const WidthEstimate many = estimate_width(cone, 20, SeedSpec{6}, WidthConfig{}, 3);
    EXPECT_EQ(one.samples[0].value, many.samples[0].value);
    EXPECT_THROW(estimate_width(cone, 0, SeedSpec{6}), Error);
}
