#pragma once
#include <cmath>
#include <optional>
#include <vector>
#include <Eigen/Dense>
#include "covariance.hpp"
#include "data.hpp"
#include "error.hpp"
#include "normal.hpp"
#include "solvers.hpp"

namespace lassodist {

/**
 * Debiased Lasso θ̂ + (d/n) Σ⁻¹Xᵀ(y − Xθ̂) / (1 − ||θ̂||₀/n), where d is the
 * row-scale denominator of the design (d = n for Σ/n, so the factor is 1).
 * The unadjusted variant drops the 1 − ||θ̂||₀/n denominator.
 */
struct DebiasedEstimate
{
    Eigen::VectorXd theta_d;
    bool adjusted = true;
    double dof_factor = 1.0;  // 1/(1 − ||θ̂||₀/n) when adjusted, else 1
    Eigen::Index active_count = 0;
    Eigen::Index n = 0;
    Normalization normalization = Normalization::by_n;
};

struct ConfidenceReport
{
    Eigen::VectorXd estimate;  // interval centres
    Eigen::VectorXd lo, hi;
    double level = 0.05;
    double tau = 0.0;
    std::vector<bool> covered;  // empty unless θ* was supplied
    double fcp = 0.0;
};

struct LooResult
{
    Eigen::Index j = 0;
    double omega = 0.0;
    double xi = 0.0;
    double tau_hat_loo = 0.0;
    double lo = 0.0, hi = 0.0;  // interval centred at xi, for θ*_j − ω
    double p_value = 1.0;
    Eigen::Index active_count_loo = 0;
    bool converged = true;
};

struct ExactInterval
{
    bool empty = true;
    double lo = 0.0, hi = 0.0;
    std::size_t accepted = 0;
    std::vector<double> p_values;  // one per grid point
};

/// A residual at round-off level relative to the response counts as an exact fit.
inline bool residual_is_degenerate(double residual_norm, double response_norm)
{
    return residual_norm <= 1e-7 * response_norm || residual_norm == 0.0;
}

namespace detail {

inline double dof_denominator(Eigen::Index active, Eigen::Index n)
{
    require(active < n, ErrorKind::degenerate_dof,
            "active set size " + std::to_string(active) + " is not below n = " + std::to_string(n));
    return 1.0 - static_cast<double>(active) / static_cast<double>(n);
}

inline ConfidenceReport symmetric_intervals(const Eigen::VectorXd& centre, const Eigen::VectorXd& half,
                                            double q, double tau, const Eigen::VectorXd& theta_star)
{
    ConfidenceReport rep;
    rep.estimate = centre;
    rep.lo = centre - half;
    rep.hi = centre + half;
    rep.level = q;
    rep.tau = tau;
    if (theta_star.size() > 0) {
        require(theta_star.size() == centre.size(), ErrorKind::dimension_mismatch,
                "theta_star length differs from estimate");
        rep.covered.resize(centre.size());
        Eigen::Index misses = 0;
        for (Eigen::Index j = 0; j < centre.size(); ++j) {
            rep.covered[j] = rep.lo[j] <= theta_star[j] && theta_star[j] <= rep.hi[j];
            misses += !rep.covered[j];
        }
        rep.fcp = static_cast<double>(misses) / static_cast<double>(centre.size());
    }
    return rep;
}

inline Eigen::VectorXd half_widths(const CovarianceModel& model, double scale)
{
    Eigen::VectorXd half(model.dim());
    for (Eigen::Index j = 0; j < model.dim(); ++j) half[j] = scale / std::sqrt(model.cond_var(j));
    return half;
}

} // namespace detail

/// τ̂ = ||y − Xθ̂|| / (√n (1 − ||θ̂||₀/n)).
inline double tau_hat(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const LassoFit& fit)
{
    const Eigen::Index n = X.rows();
    const double f = detail::dof_denominator(fit.active_count, n);
    return (y - X * fit.theta_hat).norm() / (std::sqrt(static_cast<double>(n)) * f);
}

inline DebiasedEstimate debias(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoFit& fit,
                               const CovarianceModel& model, bool adjusted,
                               Normalization norm = Normalization::by_n)
{
    require(X.cols() == model.dim() && X.rows() == y.size() && fit.theta_hat.size() == X.cols(),
            ErrorKind::dimension_mismatch, "shapes do not agree");
    const Eigen::Index n = X.rows();
    DebiasedEstimate est;
    est.adjusted = adjusted;
    est.active_count = fit.active_count;
    est.n = n;
    est.normalization = norm;
    est.dof_factor = adjusted ? 1.0 / detail::dof_denominator(fit.active_count, n) : 1.0;
    const double gram_scale = row_scale(norm, n, X.cols()) / static_cast<double>(n);
    const Eigen::VectorXd corr = X.transpose() * (y - X * fit.theta_hat);
    est.theta_d = fit.theta_hat + (gram_scale * est.dof_factor) * (model.inv() * corr);
    return est;
}

/**
 * CI_j = θ̂ᵈ_j ± √(d/n) Σ_{j|-j}^{-1/2} τ z_{1−q/2}. Pass θ* to fill the
 * coverage indicators and the false-coverage proportion.
 */
inline ConfidenceReport debiased_cis(const DebiasedEstimate& est, double tau, const CovarianceModel& model,
                                     double q, const Eigen::VectorXd& theta_star = Eigen::VectorXd())
{
    require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "level must lie in (0, 1)");
    require(tau > 0.0, ErrorKind::invalid_parameter, "tau must be positive");
    require(est.theta_d.size() == model.dim(), ErrorKind::dimension_mismatch, "estimate/covariance mismatch");
    const double scale = std::sqrt(row_scale(est.normalization, est.n, model.dim()) / static_cast<double>(est.n));
    const double z = normal_quantile(1.0 - q / 2.0);
    return detail::symmetric_intervals(est.theta_d, detail::half_widths(model, scale * tau * z), q, tau,
                                       theta_star);
}

/// Interval without DOF adjustment: θ̂ᵈ₀_j ± √(d/n) Σ_{j|-j}^{-1/2} (||y − Xθ̂||/√n) z_{1−q/2}.
inline ConfidenceReport no_dof_ci(const DebiasedEstimate& est, double residual_norm,
                                  const CovarianceModel& model, double q,
                                  const Eigen::VectorXd& theta_star = Eigen::VectorXd())
{
    require(!est.adjusted, ErrorKind::invalid_parameter, "no_dof_ci expects the unadjusted estimate");
    require(residual_norm > 0.0, ErrorKind::degenerate_dof, "residual norm is zero");
    return debiased_cis(est, residual_norm / std::sqrt(static_cast<double>(est.n)), model, q, theta_star);
}

/**
 * Shared state for leave-one-out fits on coordinate j: the residualized
 * feature and X_{-j} are computed once and reused across pseudo-outcomes,
 * with the previous fit as warm start.
 */
class LeaveOneOut
{
public:
    LeaveOneOut(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const CovarianceModel& model,
                Eigen::Index j, double lambda, SolverConfig cfg = {},
                Normalization norm = Normalization::by_n)
        : y_(y), j_(j), lambda_(lambda), cfg_(cfg)
    {
        require(X.cols() == model.dim() && X.rows() == y.size(), ErrorKind::dimension_mismatch,
                "shapes do not agree");
        require(model.dim() >= 2, ErrorKind::invalid_parameter, "leave-one-out needs p >= 2");
        x_perp_ = residualized_feature(X, model, j);
        x_rest_ = drop_column(X, j);
        cond_var_ = model.cond_var(j);
        scale_ = row_scale(norm, X.rows(), X.cols()) / static_cast<double>(X.rows());
    }

    const Eigen::VectorXd& residualized() const noexcept { return x_perp_; }

    /// Test of θ*_j = ω at level q via the pseudo-outcome y − ω x̆⊥_j.
    LooResult test(double omega, double q = 0.05)
    {
        require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "level must lie in (0, 1)");
        const Eigen::Index n = x_rest_.rows();
        const Eigen::VectorXd y_omega = omega == 0.0 ? y_ : Eigen::VectorXd(y_ - omega * x_perp_);
        const LassoFit fit = solve_lasso(x_rest_, y_omega, lambda_, cfg_, warm_);
        warm_ = fit.theta_hat;
        const Eigen::VectorXd resid = y_omega - x_rest_ * fit.theta_hat;
        const double f = detail::dof_denominator(fit.active_count, n);
        const double rnorm = resid.norm();
        require(!residual_is_degenerate(rnorm, y_omega.norm()), ErrorKind::degenerate_dof,
                "leave-one-out residual is zero");

        LooResult out;
        out.j = j_;
        out.omega = omega;
        out.active_count_loo = fit.active_count;
        out.converged = fit.converged;
        out.xi = scale_ * x_perp_.dot(resid) / (cond_var_ * f);
        out.tau_hat_loo = rnorm / (std::sqrt(static_cast<double>(n)) * f);
        const double sd = std::sqrt(scale_ / cond_var_) * out.tau_hat_loo;
        const double half = sd * normal_quantile(1.0 - q / 2.0);
        out.lo = out.xi - half;
        out.hi = out.xi + half;
        out.p_value = std::min(1.0, 2.0 * normal_cdf(-std::abs(out.xi) / sd));
        return out;
    }

private:
    Eigen::VectorXd y_;
    Eigen::Index j_;
    double lambda_;
    SolverConfig cfg_;
    Eigen::VectorXd x_perp_;
    Eigen::MatrixXd x_rest_;
    double cond_var_ = 1.0;
    double scale_ = 1.0;
    Eigen::VectorXd warm_;
};

/// Leave-one-out statistic ξ_j, τ̂_loo and CI^loo (the ω = 0 test).
inline LooResult loo_statistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const CovarianceModel& model, Eigen::Index j, double lambda,
                               const SolverConfig& cfg = {}, double q = 0.05,
                               Normalization norm = Normalization::by_n)
{
    LeaveOneOut loo(X, y, model, j, lambda, cfg, norm);
    return loo.test(0.0, q);
}

/**
 * Exact test of θ*_j = ω. Under the null, x̆⊥_j is independent of the
 * pseudo-outcome and X_{-j}, so the standardized statistic is exactly N(0, 1)
 * conditionally and the p-value uses that law directly.
 */
inline LooResult exact_test(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const CovarianceModel& model, Eigen::Index j, double omega, double lambda,
                            const SolverConfig& cfg = {}, double q = 0.05,
                            Normalization norm = Normalization::by_n)
{
    LeaveOneOut loo(X, y, model, j, lambda, cfg, norm);
    return loo.test(omega, q);
}

/**
 * Inverts the exact tests over a sorted grid: the convex hull of all ω with
 * p-value ≥ level. One leave-one-out refit per grid point.
 */
inline ExactInterval invert_exact_test(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const CovarianceModel& model, Eigen::Index j, double lambda,
                                       double level, const std::vector<double>& omega_grid,
                                       const SolverConfig& cfg = {},
                                       Normalization norm = Normalization::by_n)
{
    require(level > 0.0 && level < 1.0, ErrorKind::invalid_parameter, "level must lie in (0, 1)");
    for (std::size_t i = 0; i < omega_grid.size(); ++i) {
        require(std::isfinite(omega_grid[i]), ErrorKind::invalid_parameter, "grid must be finite");
        require(i == 0 || omega_grid[i - 1] <= omega_grid[i], ErrorKind::invalid_parameter,
                "grid must be sorted");
    }
    LeaveOneOut loo(X, y, model, j, lambda, cfg, norm);
    ExactInterval out;
    for (double omega : omega_grid) {
        const LooResult r = loo.test(omega, level);
        out.p_values.push_back(r.p_value);
        if (r.p_value >= level) {
            if (out.empty) out.lo = omega;
            out.hi = omega;
            out.empty = false;
            ++out.accepted;
        }
    }
    return out;
}

} // namespace lassodist
