#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <Eigen/Dense>
#include "covariance.hpp"
#include "error.hpp"

namespace lassodist {

struct SolverConfig
{
    double tol = 1e-8;               // max coordinate change, relative to max(1, ||θ||∞)
    int max_iter = 100000;           // coordinate sweeps
    double active_threshold = 1e-8;  // |θ_j| above this counts as active
    double kkt_tol = 1e-6;

    void validate() const
    {
        require(tol > 0 && max_iter > 0 && active_threshold > 0 && kkt_tol > 0,
                ErrorKind::invalid_parameter, "solver settings must be strictly positive");
    }
};

/// Random-design fit of (1/2n)||y − Xθ||² + (λ/n)·penalty(θ).
struct LassoFit
{
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd subgrad;   // t̂ = Xᵀ(y − Xθ̂)/λ
    Eigen::Index active_count = 0;
    int iterations = 0;
    double kkt_residual = 0.0;
    double objective = 0.0;
    bool converged = false;
};

/// Fixed-design fit of (ζ/2)||y^f − Σ^{1/2}θ||² + λ·penalty(θ).
struct ProxFit
{
    Eigen::VectorXd theta_hat;
    Eigen::Index active_count = 0;
    int iterations = 0;
    double kkt_residual = 0.0;
    bool converged = false;
};

/// Soft thresholding; the kink resolves to exactly zero.
inline double soft_threshold(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// Huber function h_α: t²/(2α) for |t| ≤ α, |t| − α/2 beyond; h_0 = |t|.
inline double huber(double t, double alpha)
{
    const double a = std::abs(t);
    if (alpha <= 0.0) return a;
    return a <= alpha ? 0.5 * t * t / alpha : a - 0.5 * alpha;
}

/// h_α'(t), and sign(t) when α = 0.
inline double huber_grad(double t, double alpha)
{
    if (alpha <= 0.0) return (t > 0.0) - (t < 0.0);
    return std::clamp(t / alpha, -1.0, 1.0);
}

/// argmin_θ (a/2)(θ − c)² + w·h_α(θ) for curvature a > 0 and weight w ≥ 0.
inline double huber_prox(double c, double a, double w, double alpha)
{
    if (alpha <= 0.0) return soft_threshold(c, w / a);
    if (std::abs(c) <= alpha + w / a) return c * (a * alpha) / (a * alpha + w);
    return c > 0.0 ? c - w / a : c + w / a;
}

/// Moreau envelope of the ℓ1 norm, Σ_j h_α(θ_j); M_0 = ||θ||₁.
inline double moreau_l1(const Eigen::VectorXd& theta, double alpha)
{
    require(alpha >= 0.0, ErrorKind::invalid_parameter, "alpha must be non-negative");
    double total = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) total += huber(theta[j], alpha);
    return total;
}

inline Eigen::Index count_active(const Eigen::VectorXd& theta, double threshold)
{
    return (theta.array().abs() > threshold).count();
}

namespace detail {

struct CdOutcome
{
    int iterations = 0;
    bool converged = false;
};

/**
 * Stationarity violation of a penalized problem whose smooth part has
 * negative gradient `grad`, in units of the per-coordinate weight (raw units
 * where the weight is zero). For α = 0 this is the ℓ1 KKT residual.
 */
inline double stationarity_residual(const Eigen::VectorXd& grad, const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& weights, double alpha)
{
    double worst = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double w = weights[j];
        double viol;
        if (w <= 0.0) {
            viol = std::abs(grad[j]);
        } else if (alpha > 0.0 || theta[j] != 0.0) {
            viol = std::abs(grad[j] / w - huber_grad(theta[j], alpha));
        } else {
            viol = std::max(0.0, std::abs(grad[j]) / w - 1.0);
        }
        worst = std::max(worst, viol);
    }
    return worst;
}

/**
 * Cyclic coordinate descent for ½||y − Xθ||² + λ Σ h_α(θ_j), alternating
 * full sweeps with sweeps over the current active set. Stops once a full
 * sweep moves no coordinate by more than tol·max(1, ||θ||∞) and the
 * stationarity residual is below kkt_tol.
 */
inline CdOutcome lasso_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                          double alpha, const SolverConfig& cfg, Eigen::VectorXd& theta,
                          Eigen::VectorXd& resid)
{
    const Eigen::Index p = X.cols();
    const Eigen::VectorXd col_sq = X.colwise().squaredNorm().transpose();
    const Eigen::VectorXd weights = Eigen::VectorXd::Constant(p, lambda);
    resid = y - X * theta;
    std::vector<Eigen::Index> active;
    bool full = true;
    CdOutcome out;
    while (out.iterations < cfg.max_iter) {
        if (!full) {
            active.clear();
            for (Eigen::Index j = 0; j < p; ++j)
                if (theta[j] != 0.0) active.push_back(j);
        }
        double max_change = 0.0;
        auto update = [&](Eigen::Index j) {
            const double a = col_sq[j];
            if (a <= 0.0) return;
            const double c = theta[j] + X.col(j).dot(resid) / a;
            const double next = huber_prox(c, a, lambda, alpha);
            const double d = next - theta[j];
            if (d != 0.0) {
                resid.noalias() -= d * X.col(j);
                theta[j] = next;
                max_change = std::max(max_change, std::abs(d));
            }
        };
        if (full) {
            for (Eigen::Index j = 0; j < p; ++j) update(j);
        } else {
            for (Eigen::Index j : active) update(j);
        }
        ++out.iterations;
        const double scale = std::max(1.0, theta.cwiseAbs().maxCoeff());
        if (max_change < cfg.tol * scale) {
            if (!full) {
                full = true;
                continue;
            }
            const Eigen::VectorXd grad = X.transpose() * resid;
            if (stationarity_residual(grad, theta, weights, alpha) <= cfg.kkt_tol) {
                out.converged = true;
                break;
            }
            if (max_change == 0.0) break;
        } else if (full) {
            full = false;
        }
    }
    return out;
}

/**
 * Coordinate descent for ½θᵀQθ − bᵀθ + Σ_j w_j h_α(θ_j) with Q positive
 * definite. `q` tracks Qθ and must be consistent with `theta` on entry.
 */
inline CdOutcome quadratic_cd(const Eigen::MatrixXd& Q, const Eigen::VectorXd& b,
                              const Eigen::VectorXd& weights, double alpha,
                              const SolverConfig& cfg, Eigen::VectorXd& theta, Eigen::VectorXd& q)
{
    const Eigen::Index p = Q.rows();
    std::vector<Eigen::Index> active;
    bool full = true;
    CdOutcome out;
    while (out.iterations < cfg.max_iter) {
        if (!full) {
            active.clear();
            for (Eigen::Index j = 0; j < p; ++j)
                if (theta[j] != 0.0 || weights[j] <= 0.0) active.push_back(j);
        }
        double max_change = 0.0;
        auto update = [&](Eigen::Index j) {
            const double a = Q(j, j);
            const double c = theta[j] + (b[j] - q[j]) / a;
            const double next = weights[j] <= 0.0 ? c : huber_prox(c, a, weights[j], alpha);
            const double d = next - theta[j];
            if (d != 0.0) {
                q.noalias() += d * Q.col(j);
                theta[j] = next;
                max_change = std::max(max_change, std::abs(d));
            }
        };
        if (full) {
            for (Eigen::Index j = 0; j < p; ++j) update(j);
        } else {
            for (Eigen::Index j : active) update(j);
        }
        ++out.iterations;
        const double scale = std::max(1.0, theta.cwiseAbs().maxCoeff());
        if (max_change < cfg.tol * scale) {
            if (!full) {
                full = true;
                continue;
            }
            q.noalias() = Q * theta;  // refresh accumulated round-off
            if (stationarity_residual(b - q, theta, weights, alpha) <= cfg.kkt_tol) {
                out.converged = true;
                break;
            }
            if (max_change == 0.0) break;
        } else if (full) {
            full = false;
        }
    }
    return out;
}

} // namespace detail

/**
 * Lasso by cyclic coordinate descent. Non-convergence within max_iter is
 * reported through `converged`, with the last iterate returned.
 */
inline LassoFit solve_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                            const SolverConfig& cfg = {},
                            const Eigen::VectorXd& warm_start = Eigen::VectorXd())
{
    cfg.validate();
    require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::invalid_parameter, "lambda must be positive");
    require(X.rows() == y.size(), ErrorKind::dimension_mismatch, "X rows must match y");
    require(X.allFinite() && y.allFinite(), ErrorKind::invalid_parameter, "inputs must be finite");
    const Eigen::Index n = X.rows(), p = X.cols();
    LassoFit fit;
    fit.theta_hat = warm_start.size() == p ? warm_start : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid;
    const auto run = detail::lasso_cd(X, y, lambda, 0.0, cfg, fit.theta_hat, resid);
    fit.iterations = run.iterations;
    fit.converged = run.converged;
    fit.subgrad = X.transpose() * resid / lambda;
    fit.kkt_residual = detail::stationarity_residual(
        fit.subgrad * lambda, fit.theta_hat, Eigen::VectorXd::Constant(p, lambda), 0.0);
    fit.active_count = count_active(fit.theta_hat, cfg.active_threshold);
    fit.objective = 0.5 * resid.squaredNorm() / n + lambda * fit.theta_hat.lpNorm<1>() / n;
    return fit;
}

/**
 * Minimizes (1/2n)||y − Xθ||² + (λ/n)M_α(θ). λ = 0 gives least squares.
 * `kkt_residual` is the gradient residual in subgradient units (raw units
 * when λ = 0) and `subgrad` holds Xᵀ(y − Xθ̂)/λ.
 */
inline LassoFit solve_smoothed_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     double lambda, double alpha, const SolverConfig& cfg = {},
                                     const Eigen::VectorXd& warm_start = Eigen::VectorXd())
{
    cfg.validate();
    require(alpha > 0.0, ErrorKind::invalid_parameter, "smoothing alpha must be positive");
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::invalid_parameter, "lambda must be >= 0");
    require(X.rows() == y.size(), ErrorKind::dimension_mismatch, "X rows must match y");
    const Eigen::Index n = X.rows(), p = X.cols();
    LassoFit fit;
    fit.theta_hat = warm_start.size() == p ? warm_start : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid;
    const auto run = detail::lasso_cd(X, y, lambda, alpha, cfg, fit.theta_hat, resid);
    fit.iterations = run.iterations;
    fit.converged = run.converged;
    const Eigen::VectorXd grad = X.transpose() * resid;
    fit.subgrad = lambda > 0.0 ? Eigen::VectorXd(grad / lambda) : grad;
    fit.kkt_residual = detail::stationarity_residual(grad, fit.theta_hat,
                                                     Eigen::VectorXd::Constant(p, lambda), alpha);
    fit.active_count = count_active(fit.theta_hat, cfg.active_threshold);
    fit.objective = 0.5 * resid.squaredNorm() / n + lambda * moreau_l1(fit.theta_hat, alpha) / n;
    return fit;
}

/**
 * Solves the fixed-design problem given its linear term b = Σ^{1/2}y^f:
 * argmin ½θᵀΣθ − bᵀθ + (λ/ζ) Σ h_α(θ_j). Diagonal Σ is solved in closed form.
 * If `sigma_theta` is non-null it receives Σθ̂.
 */
inline ProxFit prox_from_linear_term(const CovarianceModel& model, const Eigen::VectorXd& b,
                                     double lambda, double zeta, double alpha,
                                     const SolverConfig& cfg = {},
                                     const Eigen::VectorXd& warm_start = Eigen::VectorXd(),
                                     Eigen::VectorXd* sigma_theta = nullptr)
{
    const Eigen::Index p = model.dim();
    require(b.size() == p, ErrorKind::dimension_mismatch, "linear term has wrong length");
    const double weight = lambda / zeta;
    ProxFit fit;
    const Eigen::VectorXd weights = Eigen::VectorXd::Constant(p, weight);
    Eigen::VectorXd q;
    if (model.is_diagonal()) {
        const Eigen::VectorXd d = model.sigma().diagonal();
        fit.theta_hat.resize(p);
        for (Eigen::Index j = 0; j < p; ++j)
            fit.theta_hat[j] = huber_prox(b[j] / d[j], d[j], weight, alpha);
        q = d.cwiseProduct(fit.theta_hat);
        fit.iterations = 1;
        fit.converged = true;
    } else {
        fit.theta_hat = warm_start.size() == p ? warm_start : Eigen::VectorXd::Zero(p);
        q = model.sigma() * fit.theta_hat;
        const auto run = detail::quadratic_cd(model.sigma(), b, weights, alpha, cfg, fit.theta_hat, q);
        fit.iterations = run.iterations;
        fit.converged = run.converged;
    }
    fit.kkt_residual = detail::stationarity_residual(b - q, fit.theta_hat, weights, alpha);
    fit.active_count = count_active(fit.theta_hat, cfg.active_threshold);
    if (sigma_theta) *sigma_theta = std::move(q);
    return fit;
}

/**
 * η(y^f, ζ) = argmin (ζ/2)||y^f − Σ^{1/2}θ||² + λ||θ||₁. Strongly convex,
 * so the minimizer is unique; for Σ = I it is soft thresholding at λ/ζ.
 */
inline ProxFit fixed_design_prox(const Eigen::VectorXd& y_f, const CovarianceModel& model,
                                 double lambda, double zeta, const SolverConfig& cfg = {},
                                 const Eigen::VectorXd& warm_start = Eigen::VectorXd())
{
    cfg.validate();
    require(zeta > 0.0, ErrorKind::invalid_parameter, "zeta must be positive");
    require(lambda > 0.0, ErrorKind::invalid_parameter, "lambda must be positive");
    require(y_f.size() == model.dim(), ErrorKind::dimension_mismatch, "y_f has wrong length");
    return prox_from_linear_term(model, model.sqrt() * y_f, lambda, zeta, 0.0, cfg, warm_start);
}

/// α-smoothed fixed-design estimator η_α; α = 0 is fixed_design_prox.
inline ProxFit smoothed_prox(const Eigen::VectorXd& y_f, const CovarianceModel& model, double lambda,
                             double zeta, double alpha, const SolverConfig& cfg = {},
                             const Eigen::VectorXd& warm_start = Eigen::VectorXd())
{
    require(alpha >= 0.0, ErrorKind::invalid_parameter, "alpha must be non-negative");
    if (alpha == 0.0) return fixed_design_prox(y_f, model, lambda, zeta, cfg, warm_start);
    cfg.validate();
    require(zeta > 0.0, ErrorKind::invalid_parameter, "zeta must be positive");
    require(lambda > 0.0, ErrorKind::invalid_parameter, "lambda must be positive");
    require(y_f.size() == model.dim(), ErrorKind::dimension_mismatch, "y_f has wrong length");
    return prox_from_linear_term(model, model.sqrt() * y_f, lambda, zeta, alpha, cfg, warm_start);
}

/**
 * t̂ = Xᵀ(y − Xθ̂)/λ. Throws stale-fit when ||t̂||∞ > 1 + kkt_tol, i.e. θ̂
 * is not a Lasso solution at this λ.
 */
inline Eigen::VectorXd extract_subgradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& theta_hat, double lambda,
                                           double kkt_tol = 1e-6)
{
    require(lambda > 0.0, ErrorKind::invalid_parameter, "lambda must be positive");
    require(X.rows() == y.size() && X.cols() == theta_hat.size(), ErrorKind::dimension_mismatch,
            "shapes do not agree");
    Eigen::VectorXd t = X.transpose() * (y - X * theta_hat) / lambda;
    require(t.lpNorm<Eigen::Infinity>() <= 1.0 + kkt_tol, ErrorKind::stale_fit,
            "subgradient exceeds 1 in max-norm; fit is not optimal at this lambda");
    return t;
}

} // namespace lassodist
