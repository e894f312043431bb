#pragma once
#include <cmath>
#include <numbers>
#include <boost/math/distributions/normal.hpp>

namespace lassodist {

/// Standard normal density.
inline double normal_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal cdf, accurate in both tails.
inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_quantile(double prob)
{
    static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    return boost::math::quantile(std_normal, prob);
}

} // namespace lassodist
