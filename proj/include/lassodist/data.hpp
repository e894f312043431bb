#pragma once
#include <cmath>
#include <random>
#include <Eigen/Dense>
#include "covariance.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace lassodist {

/// Row covariance of the design: Σ/n (theory) or Σ/p (simulation convention).
enum class Normalization { by_n, by_p };

/**
 * The denominator d in x_i ~ N(0, Σ/d). Under this normalization
 * E[XᵀX] = (n/d) Σ, which is the factor every debiasing and interval formula
 * has to undo.
 */
inline double row_scale(Normalization norm, Eigen::Index n, Eigen::Index p)
{
    return norm == Normalization::by_n ? static_cast<double>(n) : static_cast<double>(p);
}

struct ProblemInstance
{
    Eigen::VectorXd theta_star;
    double sigma_noise = 1.0;
    double lambda = 1.0;
    Eigen::Index n = 1;
    Normalization normalization = Normalization::by_n;

    Eigen::Index p() const noexcept { return theta_star.size(); }

    /// Noise level 0 is accepted so noiseless data can be generated.
    void validate() const
    {
        require(n >= 1, ErrorKind::invalid_parameter, "n must be >= 1");
        require(p() >= 1, ErrorKind::invalid_parameter, "p must be >= 1");
        require(sigma_noise >= 0.0 && std::isfinite(sigma_noise), ErrorKind::invalid_parameter,
                "noise level must be finite and non-negative");
        require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::invalid_parameter,
                "lambda must be positive");
        require(theta_star.allFinite(), ErrorKind::invalid_parameter, "theta_star must be finite");
    }
};

/**
 * Re-expresses a Σ/p instance in Σ/n units: with c = sqrt(n/p) the same data
 * solve the Lasso with θ* → cθ* and λ → λ/c. Returns by_n instances unchanged.
 * This is the only place the two normalizations are converted.
 */
inline ProblemInstance to_by_n_units(const ProblemInstance& inst)
{
    if (inst.normalization == Normalization::by_n) return inst;
    const double c = std::sqrt(static_cast<double>(inst.n) / static_cast<double>(inst.p()));
    ProblemInstance out = inst;
    out.theta_star = c * inst.theta_star;
    out.lambda = inst.lambda / c;
    out.normalization = Normalization::by_n;
    return out;
}

struct Dataset
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
};

/// Rows iid N(0, Σ/d); deterministic in the seed.
inline Eigen::MatrixXd sample_design(const CovarianceModel& model, const ProblemInstance& inst,
                                     SeedSpec seed)
{
    inst.validate();
    const Eigen::Index p = model.dim();
    require(inst.p() == p, ErrorKind::dimension_mismatch, "instance dimension differs from covariance");
    auto engine = make_engine(seed, Stream::design);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd Z(inst.n, p);
    for (Eigen::Index i = 0; i < inst.n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = normal(engine);
    const double scale = 1.0 / std::sqrt(row_scale(inst.normalization, inst.n, p));
    if (model.is_diagonal()) return Z * (scale * model.sqrt().diagonal()).asDiagonal();
    return scale * (Z * model.sqrt());
}

/// y = Xθ* + σz with z ~ N(0, I_n) from the noise stream.
inline Dataset generate_data(const ProblemInstance& inst, const Eigen::MatrixXd& X, SeedSpec seed)
{
    inst.validate();
    require(X.rows() == inst.n && X.cols() == inst.p(), ErrorKind::dimension_mismatch,
            "design shape does not match instance");
    Dataset data;
    data.X = X;
    data.z = standard_normal_vector(inst.n, seed, Stream::noise);
    data.y = X * inst.theta_star + inst.sigma_noise * data.z;
    return data;
}

/// Removes column j from X.
inline Eigen::MatrixXd drop_column(const Eigen::MatrixXd& X, Eigen::Index j)
{
    const Eigen::Index p = X.cols();
    Eigen::MatrixXd out(X.rows(), p - 1);
    if (j > 0) out.leftCols(j) = X.leftCols(j);
    if (j < p - 1) out.rightCols(p - 1 - j) = X.rightCols(p - 1 - j);
    return out;
}

/**
 * x̆⊥_j = x̆_j − X_{-j}(Σ_{-j,-j})⁻¹Σ_{-j,j}: the part of feature j that is
 * independent of the other columns. Entries are iid N(0, Σ_{j|-j}/d).
 */
inline Eigen::VectorXd residualized_feature(const Eigen::MatrixXd& X, const CovarianceModel& model,
                                            Eigen::Index j)
{
    require(X.cols() == model.dim(), ErrorKind::dimension_mismatch, "design/covariance mismatch");
    require(model.dim() >= 2, ErrorKind::invalid_parameter, "residualization needs p >= 2");
    const Eigen::VectorXd coefs = model.regression_coefs(j);
    Eigen::VectorXd out = X.col(j);
    for (Eigen::Index k = 0, m = 0; k < X.cols(); ++k) {
        if (k == j) continue;
        if (coefs[m] != 0.0) out.noalias() -= coefs[m] * X.col(k);
        ++m;
    }
    return out;
}

} // namespace lassodist
