#pragma once
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>
#include <Eigen/Dense>
#include "covariance.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solvers.hpp"

namespace lassodist {

/// Signed support x ∈ {−1, 0, +1}^p and the covariance defining the cone K(x, Σ).
struct ConeSpec
{
    Eigen::VectorXd signs;
    std::vector<Eigen::Index> support;
    std::shared_ptr<const CovarianceModel> model;

    Eigen::Index dim() const noexcept { return signs.size(); }
};

struct WidthConfig
{
    double feas_tol = 1e-6;
    int max_iter = 5000;        // coordinate sweeps per sample, summed over multiplier updates
    int max_root_iter = 200;
    SolverConfig solver{1e-10, 5000, 1e-12, 1e-9};
};

struct WidthSample
{
    double value = 0.0;        // (1/p)⟨v̂, g⟩ with ||v̂||²/p = 1, a certified lower bound
    double constraint = 0.0;   // F(v̂; x, Σ)
    double multiplier = 0.0;   // μ in the penalized projection
    double norm_sq_ratio = 0.0;  // ||v̂||²/p
    int iterations = 0;
    bool feasible = false;
    bool converged = false;
};

struct WidthEstimate
{
    std::vector<WidthSample> samples;
    double mean = 0.0;
    double median = 0.0;
    double q05 = 0.0, q25 = 0.0, q75 = 0.0, q95 = 0.0;
    int n_samples = 0;
    int n_flagged = 0;
    bool unreliable = false;

    /// median², the aspect ratio n/p at which the phase transition is expected.
    double median_sq() const noexcept { return median * median; }
};

/// sign(θ*) entrywise with sign(0) = 0.
inline Eigen::VectorXd signed_support(const Eigen::VectorXd& theta_star)
{
    Eigen::VectorXd x(theta_star.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = (theta_star[j] > 0.0) - (theta_star[j] < 0.0);
    require((x.array() != 0.0).any(), ErrorKind::empty_support, "theta_star is identically zero");
    return x;
}

inline ConeSpec make_cone(const Eigen::VectorXd& signs, std::shared_ptr<const CovarianceModel> model)
{
    require(model != nullptr, ErrorKind::invalid_parameter, "cone needs a covariance model");
    require(signs.size() == model->dim(), ErrorKind::dimension_mismatch, "sign vector length differs from p");
    ConeSpec cone;
    cone.signs = signs;
    cone.model = std::move(model);
    for (Eigen::Index j = 0; j < signs.size(); ++j) {
        const double s = signs[j];
        require(s == 0.0 || s == 1.0 || s == -1.0, ErrorKind::invalid_parameter,
                "sign vector entries must be -1, 0 or +1");
        if (s != 0.0) cone.support.push_back(j);
    }
    require(!cone.support.empty(), ErrorKind::empty_support, "sign vector has empty support");
    return cone;
}

/// h(w) = ⟨x_S, w_S⟩ + ||w_{S^c}||₁, so that F(v) = h(Σ^{-1/2}v).
inline double cone_gauge(const Eigen::VectorXd& signs, const Eigen::VectorXd& w)
{
    double h = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) h += signs[j] != 0.0 ? signs[j] * w[j] : std::abs(w[j]);
    return h;
}

/// F(v; x, Σ).
inline double cone_constraint(const ConeSpec& cone, const Eigen::VectorXd& v)
{
    return cone_gauge(cone.signs, cone.model->inv_sqrt() * v);
}

/**
 * One realization of max{⟨v, g⟩/p : v ∈ K(x, Σ), ||v||²/p ≤ 1}.
 *
 * The maximum equals ||Π_K(g)||/√p, so we compute the projection of g onto
 * the cone. In w = Σ^{-1/2}v coordinates the projection solves
 * min ½(w − u)ᵀΣ(w − u) subject to h(w) ≤ 0 with u = Σ^{-1/2}g; for a
 * multiplier μ the penalized problem ½wᵀΣw − (Σ^{1/2}g − μx)ᵀw + μ||w_{S^c}||₁
 * is a weighted Lasso solved by coordinate descent, and h(w(μ)) is
 * non-increasing in μ. The root is bracketed and refined by Illinois
 * regula falsi, always keeping the feasible end. The feasible iterate is
 * rescaled onto the ball, so the reported value is a lower bound on the
 * per-sample maximum.
 */
inline WidthSample sample_width(const ConeSpec& cone, const Eigen::VectorXd& g, const WidthConfig& cfg = {})
{
    const CovarianceModel& model = *cone.model;
    const Eigen::Index p = cone.dim();
    require(g.size() == p, ErrorKind::dimension_mismatch, "g has wrong length");
    const double sqrt_p = std::sqrt(static_cast<double>(p));
    WidthSample out;

    auto finish = [&](const Eigen::VectorXd& v_raw) {
        const double norm = v_raw.norm();
        if (norm == 0.0) {
            out.value = 0.0;
            out.constraint = 0.0;
            out.norm_sq_ratio = 0.0;
            out.feasible = true;
            return;
        }
        const Eigen::VectorXd v = (sqrt_p / norm) * v_raw;
        out.value = std::max(0.0, v.dot(g) / static_cast<double>(p));
        out.constraint = cone_constraint(cone, v);
        out.norm_sq_ratio = v.squaredNorm() / static_cast<double>(p);
        out.feasible = out.constraint <= cfg.feas_tol * v.norm() && out.norm_sq_ratio <= 1.0 + cfg.feas_tol;
    };

    const Eigen::VectorXd u = model.inv_sqrt() * g;
    if (cone_gauge(cone.signs, u) <= 0.0) {
        out.converged = true;
        finish(g);
        return out;
    }

    const Eigen::VectorXd lin = model.sqrt() * g;  // Σu
    Eigen::VectorXd weights(p);
    for (Eigen::Index j = 0; j < p; ++j) weights[j] = cone.signs[j] != 0.0 ? 0.0 : 1.0;

    Eigen::VectorXd w = u, q = lin;
    bool cd_ok = true;
    auto solve_at = [&](double mu) -> Eigen::VectorXd {
        const Eigen::VectorXd b = lin - mu * cone.signs;
        if (model.is_diagonal()) {
            const Eigen::VectorXd d = model.sigma().diagonal();
            Eigen::VectorXd ww(p);
            for (Eigen::Index j = 0; j < p; ++j) ww[j] = soft_threshold(b[j], mu * weights[j]) / d[j];
            ++out.iterations;
            return ww;
        }
        SolverConfig sc = cfg.solver;
        sc.max_iter = std::max(1, cfg.max_iter - out.iterations);
        q = model.sigma() * w;
        const auto run = detail::quadratic_cd(model.sigma(), b, mu * weights, 0.0, sc, w, q);
        out.iterations += run.iterations;
        cd_ok = cd_ok && run.converged;
        return w;
    };

    double mu_lo = 0.0, h_lo = cone_gauge(cone.signs, u);
    double mu_hi = 1.0;
    Eigen::VectorXd w_hi = solve_at(mu_hi);
    double h_hi = cone_gauge(cone.signs, w_hi);
    int roots = 0;
    while (h_hi > 0.0 && roots < cfg.max_root_iter) {
        mu_lo = mu_hi;
        h_lo = h_hi;
        mu_hi *= 2.0;
        w_hi = solve_at(mu_hi);
        h_hi = cone_gauge(cone.signs, w_hi);
        ++roots;
    }
    bool root_ok = h_hi <= 0.0;
    int side = 0;
    while (root_ok && roots < cfg.max_root_iter && mu_hi - mu_lo > 1e-13 * mu_hi &&
           h_hi < -1e-12 * std::max(1.0, w_hi.lpNorm<1>())) {
        double mu = (mu_lo * h_hi - mu_hi * h_lo) / (h_hi - h_lo);
        if (!(mu > mu_lo && mu < mu_hi)) mu = 0.5 * (mu_lo + mu_hi);
        w = w_hi;
        const Eigen::VectorXd w_mid = solve_at(mu);
        const double h_mid = cone_gauge(cone.signs, w_mid);
        if (h_mid <= 0.0) {
            mu_hi = mu;
            h_hi = h_mid;
            w_hi = w_mid;
            if (side == 1) h_lo *= 0.5;
            side = 1;
        } else {
            mu_lo = mu;
            h_lo = h_mid;
            if (side == -1) h_hi *= 0.5;
            side = -1;
        }
        ++roots;
        if (out.iterations >= cfg.max_iter) break;
    }
    out.multiplier = mu_hi;
    out.converged = root_ok && cd_ok && out.iterations < cfg.max_iter;
    finish(model.is_diagonal() ? Eigen::VectorXd(model.sigma().diagonal().cwiseSqrt().cwiseProduct(w_hi))
                               : Eigen::VectorXd(model.sqrt() * w_hi));
    if (!out.feasible) out.converged = false;
    return out;
}

namespace detail {

/// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double prob)
{
    if (sorted.empty()) return 0.0;
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/**
 * Monte Carlo estimate of the standard Gaussian width. Sample i uses the
 * i-th draw of the width stream, so estimates with different sample counts
 * share their leading samples. Flagged (non-converged or infeasible)
 * samples are excluded from the summary; more than 10% flagged marks the
 * estimate unreliable.
 */
inline WidthEstimate estimate_width(const ConeSpec& cone, int n_samples, SeedSpec seed,
                                    const WidthConfig& cfg = {}, int threads = 1)
{
    require(n_samples >= 1, ErrorKind::invalid_parameter, "n_samples must be >= 1");
    WidthEstimate est;
    est.n_samples = n_samples;
    est.samples.resize(n_samples);
    parallel_for(static_cast<std::size_t>(n_samples), threads, [&](std::size_t i) {
        const Eigen::VectorXd g = standard_normal_vector(cone.dim(), seed, Stream::width, i);
        est.samples[i] = sample_width(cone, g, cfg);
    });
    std::vector<double> values;
    for (const auto& s : est.samples) {
        if (s.converged && s.feasible) values.push_back(s.value);
        else ++est.n_flagged;
    }
    est.unreliable = est.n_flagged * 10 > n_samples;
    std::sort(values.begin(), values.end());
    if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        est.mean = sum / static_cast<double>(values.size());
        est.median = detail::sorted_quantile(values, 0.5);
        est.q05 = detail::sorted_quantile(values, 0.05);
        est.q25 = detail::sorted_quantile(values, 0.25);
        est.q75 = detail::sorted_quantile(values, 0.75);
        est.q95 = detail::sorted_quantile(values, 0.95);
    }
    return est;
}

} // namespace lassodist
