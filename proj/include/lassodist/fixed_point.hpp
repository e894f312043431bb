#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>
#include <Eigen/Dense>
#include "covariance.hpp"
#include "error.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solvers.hpp"

namespace lassodist {

/// Sample-average (or exact) fixed-design risk R(τ², ζ) and df(τ², ζ).
struct RiskDfEstimate
{
    double risk = 0.0;
    double df = 0.0;
    double se_risk = 0.0;
    double se_df = 0.0;
    double cov_risk_df = 0.0;  // covariance of the two sample means
    int n_mc = 0;
    int flagged = 0;           // prox solves that did not converge
};

/**
 * Common-random-number engine for the fixed-design model.
 *
 * Draw i is g_i ~ N(0, I_p) from the Monte Carlo stream at index i, so the
 * first k draws are the same whatever the total sample count. Each draw
 * keeps its own warm start, which makes repeated evaluation along a
 * fixed-point iteration cheap.
 */
class FixedDesignSampler
{
public:
    FixedDesignSampler(Eigen::VectorXd theta_star, const CovarianceModel& model, double lambda,
                       double n, double alpha, SeedSpec seed, SolverConfig cfg = {},
                       int threads = 1)
        : theta_star_(std::move(theta_star)), model_(model), lambda_(lambda), n_(n),
          alpha_(alpha), seed_(seed), cfg_(cfg), threads_(threads)
    {
        require(theta_star_.size() == model.dim(), ErrorKind::dimension_mismatch,
                "theta_star length differs from covariance dimension");
        require(lambda > 0.0, ErrorKind::invalid_parameter, "lambda must be positive");
        require(n > 0.0, ErrorKind::invalid_parameter, "n must be positive");
        require(alpha >= 0.0, ErrorKind::invalid_parameter, "alpha must be non-negative");
        cfg_.validate();
        sigma_theta_ = model.sigma() * theta_star_;
        signal_energy_ = theta_star_.dot(sigma_theta_);
    }

    /// ||Σ^{1/2}θ*||²/n, the λ/ζ → ∞ limit of the risk.
    double null_risk() const noexcept { return signal_energy_ / n_; }
    double n() const noexcept { return n_; }

    RiskDfEstimate estimate(double tau, double zeta, int n_mc)
    {
        require(tau > 0.0, ErrorKind::invalid_parameter, "tau must be positive");
        require(zeta > 0.0, ErrorKind::invalid_parameter, "zeta must be positive");
        require(n_mc >= 1, ErrorKind::invalid_parameter, "n_mc must be >= 1");
        ensure_samples(n_mc);
        std::vector<double> risk(n_mc), df(n_mc);
        std::vector<char> failed(n_mc, 0);
        parallel_for(static_cast<std::size_t>(n_mc), threads_, [&](std::size_t i) {
            const Eigen::Index col = static_cast<Eigen::Index>(i);
            const Eigen::VectorXd b = sigma_theta_ + tau * sqrt_draws_.col(col);
            Eigen::VectorXd q;
            const Eigen::VectorXd warm = model_.is_diagonal() ? Eigen::VectorXd() : Eigen::VectorXd(warm_.col(col));
            ProxFit fit = prox_from_linear_term(model_, b, lambda_, zeta, alpha_, cfg_, warm, &q);
            if (!fit.converged) failed[i] = 1;
            const Eigen::VectorXd& th = fit.theta_hat;
            const double quad = th.dot(q) - 2.0 * th.dot(sigma_theta_) + signal_energy_;
            risk[i] = std::max(0.0, quad) / n_;
            if (alpha_ == 0.0) {
                df[i] = static_cast<double>(fit.active_count) / n_;
            } else {
                df[i] = (th - theta_star_).dot(sqrt_draws_.col(col)) / (n_ * tau);
            }
            if (!model_.is_diagonal()) warm_.col(col) = th;
        });
        return summarize(risk, df, failed);
    }

    void ensure_samples(int n_mc)
    {
        const Eigen::Index have = sqrt_draws_.cols();
        if (n_mc <= have) return;
        const Eigen::Index p = model_.dim();
        Eigen::MatrixXd fresh(p, n_mc - have);
        for (Eigen::Index i = have; i < n_mc; ++i)
            fresh.col(i - have) = standard_normal_vector(p, seed_, Stream::monte_carlo,
                                                         static_cast<std::uint64_t>(i));
        Eigen::MatrixXd sqrt_draws(p, n_mc);
        if (have > 0) sqrt_draws.leftCols(have) = sqrt_draws_;
        if (model_.is_diagonal()) {
            sqrt_draws.rightCols(n_mc - have) = model_.sqrt().diagonal().asDiagonal() * fresh;
        } else {
            sqrt_draws.rightCols(n_mc - have) = model_.sqrt() * fresh;
        }
        sqrt_draws_ = std::move(sqrt_draws);
        if (!model_.is_diagonal()) {
            Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(p, n_mc);
            if (have > 0) warm.leftCols(have) = warm_;
            warm_ = std::move(warm);
        }
    }

private:
    static RiskDfEstimate summarize(const std::vector<double>& risk, const std::vector<double>& df,
                                    const std::vector<char>& failed)
    {
        const std::size_t m = risk.size();
        RiskDfEstimate out;
        out.n_mc = static_cast<int>(m);
        double sr = 0.0, sd = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sr += risk[i];
            sd += df[i];
            out.flagged += failed[i];
        }
        out.risk = sr / m;
        out.df = sd / m;
        if (m > 1) {
            double vr = 0.0, vd = 0.0, c = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                vr += (risk[i] - out.risk) * (risk[i] - out.risk);
                vd += (df[i] - out.df) * (df[i] - out.df);
                c += (risk[i] - out.risk) * (df[i] - out.df);
            }
            const double denom = static_cast<double>(m - 1) * static_cast<double>(m);
            out.se_risk = std::sqrt(vr / denom);
            out.se_df = std::sqrt(vd / denom);
            out.cov_risk_df = c / denom;
        }
        return out;
    }

    Eigen::VectorXd theta_star_;
    const CovarianceModel& model_;
    double lambda_, n_, alpha_;
    SeedSpec seed_;
    SolverConfig cfg_;
    int threads_;
    Eigen::VectorXd sigma_theta_;
    double signal_energy_ = 0.0;
    Eigen::MatrixXd sqrt_draws_, warm_;  // columns Σ^{1/2}g_i and per-draw warm starts
};

/**
 * Monte Carlo estimate of R(τ², ζ) and df(τ², ζ) at sample count n.
 * df is the mean of ||θ̂||₀/n when α = 0 and the centered Stein inner
 * product ⟨Σ^{1/2}(θ̂ − θ*), g⟩/(nτ) when α > 0.
 */
inline RiskDfEstimate estimate_risk_df(const Eigen::VectorXd& theta_star, const CovarianceModel& model,
                                       double lambda, double tau, double zeta, double n, int n_mc,
                                       SeedSpec seed, double alpha = 0.0,
                                       const SolverConfig& cfg = {}, int threads = 1)
{
    FixedDesignSampler sampler(theta_star, model, lambda, n, alpha, seed, cfg, threads);
    return sampler.estimate(tau, zeta, n_mc);
}

/**
 * E[(η_soft(μ + τG; t) − μ)²] for G ~ N(0, 1), in closed form.
 */
inline double soft_threshold_mse(double mu, double tau, double t)
{
    const double m = mu / tau, s = t / tau;
    const double upper = (1.0 + s * s) * normal_cdf(m - s) - (s + m) * normal_pdf(s - m);
    const double lower = (1.0 + s * s) * normal_cdf(-s - m) - (s - m) * normal_pdf(s + m);
    const double middle = m * m * (normal_cdf(s - m) - normal_cdf(-s - m));
    return tau * tau * (upper + lower + middle);
}

/// P(η_soft(μ + τG; t) ≠ 0).
inline double soft_threshold_nonzero_prob(double mu, double tau, double t)
{
    return normal_cdf((mu - t) / tau) + normal_cdf((-mu - t) / tau);
}

/**
 * Exact R and df for Σ = I, where the fixed-design estimator is separable
 * soft thresholding at λ/ζ and n = δp.
 */
inline RiskDfEstimate risk_df_identity_closed_form(const Eigen::VectorXd& theta_star, double lambda,
                                                   double tau, double zeta, double delta)
{
    require(tau > 0.0 && zeta > 0.0 && delta > 0.0 && lambda > 0.0, ErrorKind::invalid_parameter,
            "tau, zeta, delta and lambda must be positive");
    const double n = delta * static_cast<double>(theta_star.size());
    const double t = lambda / zeta;
    double risk = 0.0, df = 0.0;
    for (Eigen::Index j = 0; j < theta_star.size(); ++j) {
        risk += soft_threshold_mse(theta_star[j], tau, t);
        df += soft_threshold_nonzero_prob(theta_star[j], tau, t);
    }
    RiskDfEstimate out;
    out.risk = risk / n;
    out.df = df / n;
    return out;
}

struct FixedPointConfig
{
    double damping = 0.5;
    double min_damping = 1.0 / 64.0;
    double fp_tol = 1e-4;
    int max_outer = 2000;
    int n_mc = 400;
    int n_mc_max = 1600;
    int n_mc_growth = 4;
    double zeta_floor = 1e-3;
    bool compute_se = true;
    int threads = 1;
    SolverConfig solver;

    void validate() const
    {
        require(damping > 0.0 && damping <= 1.0 && min_damping > 0.0 && min_damping <= damping,
                ErrorKind::invalid_parameter, "damping must lie in (0, 1]");
        require(fp_tol > 0.0 && max_outer > 0, ErrorKind::invalid_parameter, "bad tolerance settings");
        require(n_mc >= 1 && n_mc_max >= n_mc && n_mc_growth >= 2, ErrorKind::invalid_parameter,
                "bad Monte Carlo schedule");
        require(zeta_floor > 0.0 && zeta_floor < 1.0, ErrorKind::invalid_parameter,
                "zeta floor must lie in (0, 1)");
        solver.validate();
    }
};

struct FixedPointTraceRow
{
    int iter = 0;
    double tau = 0.0;
    double zeta = 0.0;
    double risk = 0.0;
    double df = 0.0;
    double se_risk = 0.0;
    double se_df = 0.0;
    int n_mc = 0;
};

struct FixedPointSolution
{
    double tau_star = 0.0;
    double zeta_star = 0.0;
    double se_tau = 0.0;   // delta-method Monte Carlo standard errors
    double se_zeta = 0.0;
    int iterations = 0;
    double residual_tau = 0.0;   // |τ² − σ² − R|
    double residual_zeta = 0.0;  // |ζ − 1 + df|
    bool converged = false;
    bool width_warning = false;  // ζ pinned at the floor
    int n_mc = 0;
    RiskDfEstimate last;
    std::vector<FixedPointTraceRow> trace;
};

using RiskDfEvaluator = std::function<RiskDfEstimate(double tau, double zeta, int n_mc)>;

/**
 * Damped iteration τ² ← (1−γ)τ² + γ(σ² + R), ζ ← clip((1−γ)ζ + γ(1 − df)),
 * started from the λ → ∞ limit. The damping is halved whenever the residual
 * grows for three consecutive steps. When the residuals drop below fp_tol the
 * Monte Carlo sample count is grown until n_mc_max before accepting.
 */
inline FixedPointSolution iterate_fixed_point(const RiskDfEvaluator& eval, double sigma_noise,
                                              double null_risk, const FixedPointConfig& cfg,
                                              bool exact = false)
{
    cfg.validate();
    require(sigma_noise > 0.0, ErrorKind::invalid_parameter, "noise level must be positive");
    const double sigma2 = sigma_noise * sigma_noise;
    double tau2 = sigma2 + null_risk;
    double zeta = 1.0;
    double gamma = cfg.damping;
    int n_mc = exact ? 1 : cfg.n_mc;
    const int n_mc_max = exact ? 1 : cfg.n_mc_max;
    double prev_res = std::numeric_limits<double>::infinity();
    int worsening = 0, floor_streak = 0;

    FixedPointSolution sol;
    for (int it = 1; it <= cfg.max_outer; ++it) {
        const RiskDfEstimate est = eval(std::sqrt(tau2), zeta, n_mc);
        const double rt = std::abs(tau2 - sigma2 - est.risk);
        const double rz = std::abs(zeta - 1.0 + est.df);
        sol.trace.push_back({it, std::sqrt(tau2), zeta, est.risk, est.df, est.se_risk, est.se_df, n_mc});
        sol.iterations = it;
        sol.tau_star = std::sqrt(tau2);
        sol.zeta_star = zeta;
        sol.residual_tau = rt;
        sol.residual_zeta = rz;
        sol.last = est;
        sol.n_mc = n_mc;
        if (rt < cfg.fp_tol && rz < cfg.fp_tol) {
            if (n_mc < n_mc_max) {
                n_mc = std::min(n_mc * cfg.n_mc_growth, n_mc_max);
                prev_res = std::numeric_limits<double>::infinity();
                continue;
            }
            sol.converged = true;
            break;
        }
        const double res = std::max(rt, rz);
        worsening = res > prev_res ? worsening + 1 : 0;
        if (worsening >= 3) {
            gamma = std::max(cfg.min_damping, 0.5 * gamma);
            worsening = 0;
        }
        prev_res = res;
        tau2 = (1.0 - gamma) * tau2 + gamma * (sigma2 + est.risk);
        zeta = std::clamp((1.0 - gamma) * zeta + gamma * (1.0 - est.df), cfg.zeta_floor, 1.0);
        floor_streak = zeta <= cfg.zeta_floor ? floor_streak + 1 : 0;
        if (floor_streak >= 10) sol.width_warning = true;
    }
    if (sol.zeta_star <= cfg.zeta_floor) sol.width_warning = true;

    if (!exact && cfg.compute_se && sol.converged) {
        // Implicit-function propagation of Monte Carlo noise in (R, df) to
        // (τ², ζ), with the Jacobian taken by central differences under CRN.
        const double t2 = sol.tau_star * sol.tau_star;
        const double z = sol.zeta_star;
        const double ht = 1e-2 * t2;
        const double hz = 1e-2 * z;
        auto at = [&](double tt2, double zz) { return eval(std::sqrt(tt2), zz, n_mc); };
        const RiskDfEstimate tp = at(t2 + ht, z), tm = at(t2 - ht, z);
        const RiskDfEstimate zp = at(t2, std::min(1.0, z + hz)), zm = at(t2, z - hz);
        const double dz = std::min(1.0, z + hz) - (z - hz);
        Eigen::Matrix2d J;
        J(0, 0) = 1.0 - (tp.risk - tm.risk) / (2.0 * ht);
        J(0, 1) = -(zp.risk - zm.risk) / dz;
        J(1, 0) = (tp.df - tm.df) / (2.0 * ht);
        J(1, 1) = 1.0 + (zp.df - zm.df) / dz;
        Eigen::Matrix2d C;
        C << sol.last.se_risk * sol.last.se_risk, -sol.last.cov_risk_df,
             -sol.last.cov_risk_df, sol.last.se_df * sol.last.se_df;
        const Eigen::Matrix2d Jinv = J.inverse();
        const Eigen::Matrix2d cov = Jinv * C * Jinv.transpose();
        sol.se_tau = std::sqrt(std::max(0.0, cov(0, 0))) / (2.0 * sol.tau_star);
        sol.se_zeta = std::sqrt(std::max(0.0, cov(1, 1)));
    }
    return sol;
}

/**
 * Solves τ² = σ² + R(τ², ζ), ζ = 1 − df(τ², ζ) by Monte Carlo with common
 * random numbers. `n` is the sample count of the random-design problem, in
 * the Σ/n convention. α > 0 solves the smoothed equations.
 */
inline FixedPointSolution solve_fixed_point(const Eigen::VectorXd& theta_star,
                                            const CovarianceModel& model, double lambda,
                                            double sigma_noise, double n,
                                            const FixedPointConfig& cfg, SeedSpec seed,
                                            double alpha = 0.0)
{
    FixedDesignSampler sampler(theta_star, model, lambda, n, alpha, seed, cfg.solver, cfg.threads);
    RiskDfEvaluator eval = [&](double tau, double zeta, int n_mc) {
        return sampler.estimate(tau, zeta, n_mc);
    };
    return iterate_fixed_point(eval, sigma_noise, sampler.null_risk(), cfg);
}

/// Same iteration driven by the exact Σ = I risk and df.
inline FixedPointSolution solve_fixed_point_identity(const Eigen::VectorXd& theta_star, double lambda,
                                                     double sigma_noise, double delta,
                                                     const FixedPointConfig& cfg)
{
    RiskDfEvaluator eval = [&](double tau, double zeta, int) {
        return risk_df_identity_closed_form(theta_star, lambda, tau, zeta, delta);
    };
    const double n = delta * static_cast<double>(theta_star.size());
    return iterate_fixed_point(eval, sigma_noise, theta_star.squaredNorm() / n, cfg, true);
}

namespace detail {

/// ε(α) = 2[φ(α) − αΦ(−α)] / (α + 2[φ(α) − αΦ(−α)]), decreasing from 1 to 0.
inline double sparsity_of_threshold(double a)
{
    const double g = 2.0 * (normal_pdf(a) - a * normal_cdf(-a));
    return g / (a + g);
}

} // namespace detail

/**
 * ω*(ε): Gaussian width of an ε-fraction signed support under Σ = I,
 * ω*² = ε + 2(1−ε)Φ(−α) where α solves ε = ε(α) (bisection).
 */
inline double omega_star(double eps)
{
    require(eps > 0.0 && eps < 1.0, ErrorKind::invalid_parameter, "eps must lie in (0, 1)");
    double lo = 0.0, hi = 1.0;
    while (detail::sparsity_of_threshold(hi) > eps) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::sparsity_of_threshold(mid) > eps) lo = mid; else hi = mid;
    }
    const double a = 0.5 * (lo + hi);
    return std::sqrt(eps + 2.0 * (1.0 - eps) * normal_cdf(-a));
}

/// ε*(κ_cond, δ) = sup{ε : ω*(ε) ≤ √(δ/κ_cond)}.
inline double eps_star(double kappa_cond, double delta)
{
    require(kappa_cond >= 1.0, ErrorKind::invalid_parameter, "kappa_cond must be >= 1");
    require(delta > 0.0, ErrorKind::invalid_parameter, "delta must be positive");
    const double target = std::sqrt(delta / kappa_cond);
    if (target >= 1.0) return 1.0;
    if (target <= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (omega_star(mid) <= target) lo = mid; else hi = mid;
    }
    return lo;
}

} // namespace lassodist
