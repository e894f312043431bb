#pragma once
#include <cmath>
#include <string>
#include <Eigen/Dense>
#include "error.hpp"

namespace lassodist {

/**
 * A known population covariance Σ together with its symmetric square root,
 * inverse, inverse square root and extreme eigenvalues.
 *
 * Instances are immutable once built and may be shared across threads.
 * Build them through factor_covariance() or build_ar_covariance().
 */
class CovarianceModel
{
public:
    Eigen::Index dim() const noexcept { return sigma_.rows(); }
    const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
    const Eigen::MatrixXd& sqrt() const noexcept { return sqrt_; }
    const Eigen::MatrixXd& inv() const noexcept { return inv_; }
    const Eigen::MatrixXd& inv_sqrt() const noexcept { return inv_sqrt_; }
    double kappa_min() const noexcept { return kappa_min_; }
    double kappa_max() const noexcept { return kappa_max_; }
    double kappa_cond() const noexcept { return kappa_max_ / kappa_min_; }
    bool is_diagonal() const noexcept { return diagonal_; }

    /// Conditional variance Σ_{j|-j} = 1 / (Σ⁻¹)_{jj}.
    double cond_var(Eigen::Index j) const
    {
        check_index(j);
        return 1.0 / inv_(j, j);
    }

    /**
     * Population regression coefficients of feature j on the others,
     * (Σ_{-j,-j})⁻¹ Σ_{-j,j}, returned in the order of the remaining columns.
     */
    Eigen::VectorXd regression_coefs(Eigen::Index j) const
    {
        check_index(j);
        const Eigen::Index p = dim();
        Eigen::VectorXd out(p - 1);
        const double pivot = inv_(j, j);
        for (Eigen::Index k = 0, m = 0; k < p; ++k) {
            if (k == j) continue;
            out[m++] = -inv_(k, j) / pivot;
        }
        return out;
    }

    friend CovarianceModel factor_covariance(const Eigen::MatrixXd& sigma);

private:
    CovarianceModel() = default;

    void check_index(Eigen::Index j) const
    {
        require(j >= 0 && j < dim(), ErrorKind::invalid_parameter,
                "coordinate " + std::to_string(j) + " out of range");
    }

    Eigen::MatrixXd sigma_, sqrt_, inv_, inv_sqrt_;
    double kappa_min_ = 0.0;
    double kappa_max_ = 0.0;
    bool diagonal_ = false;
};

/**
 * Factors a symmetric positive definite matrix through its symmetric
 * eigendecomposition. Rejects asymmetric input (relative max-entry tolerance
 * 1e-10) and near-singular input (λ_min ≤ 1e-12 λ_max).
 */
inline CovarianceModel factor_covariance(const Eigen::MatrixXd& sigma)
{
    require(sigma.rows() == sigma.cols() && sigma.rows() >= 1,
            ErrorKind::dimension_mismatch, "covariance must be square and non-empty");
    require(sigma.allFinite(), ErrorKind::invalid_parameter, "covariance has non-finite entries");
    const double scale = sigma.cwiseAbs().maxCoeff();
    require(scale > 0.0, ErrorKind::singular_covariance, "covariance is identically zero");
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-10 * scale, ErrorKind::invalid_parameter, "covariance is not symmetric");

    const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    require(eig.info() == Eigen::Success, ErrorKind::singular_covariance,
            "eigendecomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double vmin = values.minCoeff();
    const double vmax = values.maxCoeff();
    require(vmax > 0.0 && vmin > 1e-12 * vmax, ErrorKind::singular_covariance,
            "covariance is not positive definite (min eigenvalue " + std::to_string(vmin) + ")");

    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    CovarianceModel model;
    model.sigma_ = sym;
    model.sqrt_ = vecs * values.cwiseSqrt().asDiagonal() * vecs.transpose();
    model.inv_ = vecs * values.cwiseInverse().asDiagonal() * vecs.transpose();
    model.inv_sqrt_ = vecs * values.cwiseSqrt().cwiseInverse().asDiagonal() * vecs.transpose();
    model.kappa_min_ = vmin;
    model.kappa_max_ = vmax;

    Eigen::MatrixXd off = sym;
    off.diagonal().setZero();
    model.diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
    if (model.diagonal_) {
        // Exact factors avoid eigen-solver round-off in the separable case.
        const Eigen::VectorXd d = sym.diagonal();
        model.sqrt_ = d.cwiseSqrt().asDiagonal();
        model.inv_ = d.cwiseInverse().asDiagonal();
        model.inv_sqrt_ = d.cwiseSqrt().cwiseInverse().asDiagonal();
    }

    const double recon = (model.sqrt_ * model.sqrt_ - sym).cwiseAbs().maxCoeff();
    require(recon <= 1e-8 * scale, ErrorKind::singular_covariance,
            "square root failed to reconstruct covariance");
    return model;
}

/// AR(ρ) covariance, Σ_ij = ρ^|i-j|.
inline CovarianceModel build_ar_covariance(double rho, Eigen::Index p)
{
    require(std::abs(rho) < 1.0, ErrorKind::invalid_parameter, "AR correlation must satisfy |rho| < 1");
    require(p >= 1, ErrorKind::invalid_parameter, "dimension must be positive");
    Eigen::MatrixXd sigma(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            sigma(i, j) = (i == j) ? 1.0 : std::pow(rho, static_cast<double>(std::abs(i - j)));
    return factor_covariance(sigma);
}

inline CovarianceModel identity_covariance(Eigen::Index p)
{
    return factor_covariance(Eigen::MatrixXd::Identity(p, p));
}

} // namespace lassodist
