#pragma once
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <json.hpp>
#include "covariance.hpp"
#include "data.hpp"
#include "error.hpp"
#include "fixed_point.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "width.hpp"

namespace lassodist {

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig
{
    Eigen::Index p = 100;
    Eigen::Index n = 25;
    Eigen::Index s = 20;
    double mu = 25.0;
    std::string placement = "random";  // "random" or "first"
    double sigma = 1.0;
    double lambda = 4.0;
    Normalization normalization = Normalization::by_p;
    nlohmann::json covariance = {{"kind", "ar"}, {"rho", 0.5}};
    int n_sim = 1000;
    std::uint64_t seed = 1;
    std::vector<double> q_levels{0.05};
    int threads = 1;
    SolverConfig solver;

    // coverage
    Eigen::Index target_index = 49;
    std::optional<double> target_value;

    // width threshold
    std::vector<Eigen::Index> n_grid;
    std::vector<double> n_offsets{-0.15, -0.1, -0.05, 0.05, 0.1, 0.15};
    std::vector<double> mu_grid{0.0, 3.0, 10.0, 25.0};
    int width_samples = 200;
    WidthConfig width;

    // fixed point
    FixedPointConfig fixed_point;
    double alpha = 0.0;

    std::filesystem::path base_dir;

    void validate() const
    {
        auto check = [](bool c, const std::string& msg) { require(c, ErrorKind::config, msg); };
        check(p >= 2, "p must be >= 2");
        check(n >= 1, "n must be >= 1");
        check(s >= 0 && s <= p, "s must lie in [0, p]");
        check(std::isfinite(mu), "mu must be finite");
        check(placement == "random" || placement == "first", "placement must be 'random' or 'first'");
        check(sigma >= 0.0 && std::isfinite(sigma), "sigma must be finite and non-negative");
        check(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
        check(n_sim >= 1, "n_sim must be >= 1");
        check(!q_levels.empty(), "q_levels must be nonempty");
        for (double q : q_levels) check(q > 0.0 && q < 1.0, "q levels must lie in (0, 1)");
        check(threads >= 1, "threads must be >= 1");
        check(target_index >= 0, "target_index must be non-negative");
        for (auto v : n_grid) check(v >= 1, "n_grid entries must be >= 1");
        check(!mu_grid.empty(), "mu_grid must be nonempty");
        check(width_samples >= 1, "width_samples must be >= 1");
        check(alpha >= 0.0, "alpha must be non-negative");
    }
};

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& target)
{
    if (j.contains(key)) target = j.at(key).get<T>();
}

} // namespace detail

/// Parses the JSON run description; unknown keys are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    static const std::vector<std::string> known{
        "experiment", "p", "n", "s", "mu", "placement", "sigma", "lambda", "normalization",
        "covariance", "n_sim", "seed", "q_levels", "threads", "solver", "target_index",
        "target_value", "n_grid", "n_offsets", "mu_grid", "width_samples", "width",
        "fixed_point", "alpha"};
    require(j.is_object(), ErrorKind::config, "config must be a JSON object");
    for (const auto& item : j.items())
        require(std::find(known.begin(), known.end(), item.key()) != known.end(), ErrorKind::config,
                "unknown config key '" + item.key() + "'");
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    try {
        detail::read_field(j, "p", cfg.p);
        detail::read_field(j, "n", cfg.n);
        detail::read_field(j, "s", cfg.s);
        detail::read_field(j, "mu", cfg.mu);
        detail::read_field(j, "placement", cfg.placement);
        detail::read_field(j, "sigma", cfg.sigma);
        detail::read_field(j, "lambda", cfg.lambda);
        if (j.contains("normalization")) {
            const auto norm = j.at("normalization").get<std::string>();
            require(norm == "by_n" || norm == "by_p", ErrorKind::config,
                    "normalization must be 'by_n' or 'by_p'");
            cfg.normalization = norm == "by_n" ? Normalization::by_n : Normalization::by_p;
        }
        if (j.contains("covariance")) cfg.covariance = j.at("covariance");
        detail::read_field(j, "n_sim", cfg.n_sim);
        detail::read_field(j, "seed", cfg.seed);
        detail::read_field(j, "q_levels", cfg.q_levels);
        detail::read_field(j, "threads", cfg.threads);
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            detail::read_field(s, "tol", cfg.solver.tol);
            detail::read_field(s, "max_iter", cfg.solver.max_iter);
            detail::read_field(s, "active_threshold", cfg.solver.active_threshold);
            detail::read_field(s, "kkt_tol", cfg.solver.kkt_tol);
        }
        detail::read_field(j, "target_index", cfg.target_index);
        if (j.contains("target_value") && !j.at("target_value").is_null())
            cfg.target_value = j.at("target_value").get<double>();
        detail::read_field(j, "n_grid", cfg.n_grid);
        detail::read_field(j, "n_offsets", cfg.n_offsets);
        detail::read_field(j, "mu_grid", cfg.mu_grid);
        detail::read_field(j, "width_samples", cfg.width_samples);
        if (j.contains("width")) {
            const auto& w = j.at("width");
            detail::read_field(w, "feas_tol", cfg.width.feas_tol);
            detail::read_field(w, "max_iter", cfg.width.max_iter);
        }
        if (j.contains("fixed_point")) {
            const auto& f = j.at("fixed_point");
            detail::read_field(f, "damping", cfg.fixed_point.damping);
            detail::read_field(f, "min_damping", cfg.fixed_point.min_damping);
            detail::read_field(f, "fp_tol", cfg.fixed_point.fp_tol);
            detail::read_field(f, "max_outer", cfg.fixed_point.max_outer);
            detail::read_field(f, "n_mc", cfg.fixed_point.n_mc);
            detail::read_field(f, "n_mc_max", cfg.fixed_point.n_mc_max);
            detail::read_field(f, "n_mc_growth", cfg.fixed_point.n_mc_growth);
            detail::read_field(f, "zeta_floor", cfg.fixed_point.zeta_floor);
            detail::read_field(f, "compute_se", cfg.fixed_point.compute_se);
        }
        detail::read_field(j, "alpha", cfg.alpha);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, e.what());
    }
    cfg.validate();
    try {
        cfg.solver.validate();
        cfg.fixed_point.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::config, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, std::string("malformed config: ") + e.what());
    }
    return parse_config(j, path.parent_path());
}

/**
 * θ* with s nonzero entries: ⌊s/2⌋ at +μ and the rest at −μ. With "random"
 * placement the support is a seeded uniform subset in random order; "first"
 * uses coordinates 0..s−1. A forced target value keeps the sparsity level:
 * a zero target is swapped out of the support, a nonzero one swapped in.
 */
inline Eigen::VectorXd build_theta_star(Eigen::Index p, Eigen::Index s, double mu, const std::string& placement,
                                        SeedSpec seed, std::optional<Eigen::Index> target = std::nullopt,
                                        std::optional<double> target_value = std::nullopt)
{
    std::vector<Eigen::Index> order(p);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (placement == "random") {
        auto eng = make_engine(seed, Stream::support, 0);
        for (Eigen::Index i = p - 1; i > 0; --i) {
            const auto k = static_cast<Eigen::Index>(eng() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[k]);
        }
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < s; ++i) theta[order[i]] = i < s / 2 ? mu : -mu;
    if (target && target_value) {
        const Eigen::Index t = *target;
        const double v = *target_value;
        const auto pos = std::find(order.begin(), order.end(), t) - order.begin();
        const bool in_support = pos < s;
        if (v == 0.0 && in_support && s < p) {
            theta[order[s]] = theta[t];
        } else if (v != 0.0 && s > 0) {
            // keep the sign split: hand the target's old sign to a member carrying v's sign,
            // or evict such a member when the target enters the support
            Eigen::Index partner = -1;
            for (Eigen::Index i = s - 1; i >= 0; --i) {
                const Eigen::Index k = order[i];
                if (k != t && (theta[k] > 0) == (v > 0)) {
                    partner = k;
                    break;
                }
            }
            const bool same_sign = in_support && (theta[t] > 0) == (v > 0);
            if (partner >= 0 && !same_sign) theta[partner] = in_support ? theta[t] : 0.0;
            if (partner < 0 && !in_support) theta[order[s - 1]] = 0.0;
        }
        theta[t] = v;
    }
    return theta;
}

/// Tidy result rows; `coordinate` is −1 when a row is not tied to one.
struct ResultRow
{
    int replica = 0;
    std::string group;
    long long coordinate = -1;
    std::string metric;
    double value = 0.0;
};

struct ResultTable
{
    int schema_version = kSchemaVersion;
    std::string experiment;
    std::vector<ResultRow> rows;

    void add(int replica, std::string group, long long coordinate, std::string metric, double value)
    {
        rows.push_back({replica, std::move(group), coordinate, std::move(metric), value});
    }

    void write_csv(const std::filesystem::path& path) const
    {
        CsvWriter w(path, {"schema_version", "experiment", "replica", "group", "coordinate", "metric", "value"});
        for (const auto& r : rows)
            w.cell(schema_version).cell(experiment).cell(r.replica).cell(r.group).cell(r.coordinate)
                .cell(r.metric).cell(r.value).end_row();
    }
};

/// Auxiliary plot-ready table.
struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(const std::filesystem::path& path) const
    {
        CsvWriter w(path, header);
        for (const auto& row : rows) {
            for (const auto& f : row) w.cell(f);
            w.end_row();
        }
    }
};

struct ExperimentOutput
{
    ResultTable results;
    std::map<std::string, Table> tables;  // file stem → table
    nlohmann::json summary;

    /// results.csv, <stem>.csv for each table, and summary.json.
    void write(const std::filesystem::path& dir) const
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        require(!ec, ErrorKind::io, "cannot create output directory " + dir.string());
        results.write_csv(dir / "results.csv");
        for (const auto& [stem, table] : tables) table.write_csv(dir / (stem + ".csv"));
        write_json(dir / "summary.json", summary);
    }
};

/// Carries the trace of a fixed point that failed to converge.
class FixedPointFailure : public Error
{
public:
    FixedPointFailure(const std::string& what, FixedPointSolution sol)
        : Error(ErrorKind::no_convergence, what), solution_(std::move(sol))
    {}
    const FixedPointSolution& solution() const noexcept { return solution_; }

private:
    FixedPointSolution solution_;
};

namespace detail {

/// sup |F_n − Φ| for sorted data.
inline double ks_statistic_normal(const std::vector<double>& sorted)
{
    const double m = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normal_cdf(sorted[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / m - f, f - static_cast<double>(i) / m});
    }
    return d;
}

inline double median_of(std::vector<double> v)
{
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    return sorted_quantile(v, 0.5);
}

inline bool is_soft_failure(const Error& e)
{
    return e.kind() == ErrorKind::degenerate_dof || e.kind() == ErrorKind::stale_fit ||
           e.kind() == ErrorKind::no_convergence;
}

inline std::string group_label(double value)
{
    return value > 0.0 ? "pos" : value < 0.0 ? "neg" : "zero";
}

inline nlohmann::json summary_header(const char* experiment, const ExperimentConfig& cfg)
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["experiment"] = experiment;
    j["seed"] = cfg.seed;
    j["n_sim"] = cfg.n_sim;
    j["threads"] = cfg.threads;
    j["config"] = {{"p", cfg.p},
                   {"n", cfg.n},
                   {"s", cfg.s},
                   {"mu", cfg.mu},
                   {"placement", cfg.placement},
                   {"sigma", cfg.sigma},
                   {"lambda", cfg.lambda},
                   {"normalization", cfg.normalization == Normalization::by_n ? "by_n" : "by_p"},
                   {"covariance", cfg.covariance},
                   {"q_levels", cfg.q_levels},
                   {"alpha", cfg.alpha}};
    return j;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ProblemInstance make_instance(const ExperimentConfig& cfg, Eigen::VectorXd theta_star, Eigen::Index n)
{
    ProblemInstance inst;
    inst.theta_star = std::move(theta_star);
    inst.sigma_noise = cfg.sigma;
    inst.lambda = cfg.lambda;
    inst.n = n;
    inst.normalization = cfg.normalization;
    inst.validate();
    return inst;
}

} // namespace detail

/**
 * Standardized debiased values per coordinate and replica, with and without
 * the degrees-of-freedom adjustment, grouped by the sign of θ*_j. Emits the
 * tidy rows plus sorted QQ tables and fixed-bin histograms.
 */
inline ExperimentOutput run_qq_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = load_covariance(cfg.covariance, cfg.p, cfg.base_dir);
    const SeedSpec seed{cfg.seed};
    const Eigen::VectorXd theta_star = build_theta_star(cfg.p, cfg.s, cfg.mu, cfg.placement, seed);
    const ProblemInstance inst = detail::make_instance(cfg, theta_star, cfg.n);
    const double n = static_cast<double>(cfg.n);
    const double unit = std::sqrt(row_scale(cfg.normalization, cfg.n, cfg.p) / n);

    struct Replica
    {
        bool flagged = false;
        Eigen::VectorXd adjusted, unadjusted;
    };
    std::vector<Replica> reps(cfg.n_sim);
    parallel_for(static_cast<std::size_t>(cfg.n_sim), cfg.threads, [&](std::size_t r) {
        const SeedSpec rs = derive_replica_seed(seed, r);
        Replica& rep = reps[r];
        try {
            const Eigen::MatrixXd X = sample_design(model, inst, rs);
            const Dataset data = generate_data(inst, X, rs);
            const LassoFit fit = solve_lasso(X, data.y, cfg.lambda, cfg.solver);
            if (!fit.converged) {
                rep.flagged = true;
                return;
            }
            const double rn = (data.y - X * fit.theta_hat).norm() / std::sqrt(n);
            require(!residual_is_degenerate(rn * std::sqrt(n), data.y.norm()), ErrorKind::degenerate_dof,
                    "zero residual");
            const double f = detail::dof_denominator(fit.active_count, cfg.n);
            const DebiasedEstimate adj = debias(X, data.y, fit, model, true, cfg.normalization);
            const DebiasedEstimate raw = debias(X, data.y, fit, model, false, cfg.normalization);
            rep.adjusted.resize(cfg.p);
            rep.unadjusted.resize(cfg.p);
            for (Eigen::Index j = 0; j < cfg.p; ++j) {
                const double c = std::sqrt(model.cond_var(j)) / (rn * unit);
                rep.adjusted[j] = c * f * (adj.theta_d[j] - theta_star[j]);
                rep.unadjusted[j] = c * (raw.theta_d[j] - theta_star[j]);
            }
        } catch (const Error& e) {
            if (!detail::is_soft_failure(e)) throw;
            rep.flagged = true;
        }
    });

    ExperimentOutput out;
    out.results.experiment = "qq";
    std::map<std::string, std::vector<double>> pooled;  // "<estimator>/<group>"
    int flagged = 0;
    for (int r = 0; r < cfg.n_sim; ++r) {
        const Replica& rep = reps[r];
        if (rep.flagged) {
            ++flagged;
            out.results.add(r, "all", -1, "flagged", 1.0);
            continue;
        }
        for (Eigen::Index j = 0; j < cfg.p; ++j) {
            const std::string g = detail::group_label(theta_star[j]);
            out.results.add(r, g, j, "adjusted", rep.adjusted[j]);
            out.results.add(r, g, j, "unadjusted", rep.unadjusted[j]);
            pooled["adjusted/" + g].push_back(rep.adjusted[j]);
            pooled["unadjusted/" + g].push_back(rep.unadjusted[j]);
        }
    }

    Table qq{{"estimator", "group", "rank", "empirical", "theoretical"}, {}};
    Table hist{{"estimator", "group", "bin_lo", "bin_hi", "count"}, {}};
    nlohmann::json metrics = nlohmann::json::object();
    constexpr int kBins = 40;
    constexpr double kLo = -5.0, kHi = 5.0;
    for (auto& [key, values] : pooled) {
        std::sort(values.begin(), values.end());
        const auto slash = key.find('/');
        const std::string est = key.substr(0, slash), grp = key.substr(slash + 1);
        const double m = static_cast<double>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double theo = normal_quantile((static_cast<double>(i) + 0.5) / m);
            qq.rows.push_back({est, grp, std::to_string(i), format_double(values[i]), format_double(theo)});
        }
        std::vector<long long> counts(kBins + 2, 0);
        for (double v : values) {
            if (v < kLo) ++counts[0];
            else if (v >= kHi) ++counts[kBins + 1];
            else ++counts[1 + static_cast<int>((v - kLo) / (kHi - kLo) * kBins)];
        }
        const double width = (kHi - kLo) / kBins;
        hist.rows.push_back({est, grp, "-inf", format_double(kLo), std::to_string(counts[0])});
        for (int b = 0; b < kBins; ++b)
            hist.rows.push_back({est, grp, format_double(kLo + b * width), format_double(kLo + (b + 1) * width),
                                 std::to_string(counts[b + 1])});
        hist.rows.push_back({est, grp, format_double(kHi), "inf", std::to_string(counts[kBins + 1])});

        double mean = 0.0, var = 0.0;
        for (double v : values) mean += v;
        mean /= m;
        for (double v : values) var += (v - mean) * (v - mean);
        metrics[key] = {{"count", values.size()},
                        {"mean", mean},
                        {"sd", values.size() > 1 ? std::sqrt(var / (m - 1.0)) : 0.0},
                        {"ks_statistic", detail::ks_statistic_normal(values)}};
    }
    out.tables["qq"] = std::move(qq);
    out.tables["histogram"] = std::move(hist);
    out.summary = detail::summary_header("qq", cfg);
    out.summary["metrics"] = metrics;
    out.summary["flagged"] = flagged;
    out.summary["timings"] = {{"total_seconds", detail::seconds_since(t0)}};
    return out;
}

/**
 * Coverage of CI^d, CI^{d,noDOF} and CI^loo for coordinate target_index at
 * each level in q_levels. Flagged replicas are excluded from denominators.
 */
inline ExperimentOutput run_coverage_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = load_covariance(cfg.covariance, cfg.p, cfg.base_dir);
    const SeedSpec seed{cfg.seed};
    const Eigen::Index j = cfg.target_index;
    require(j < cfg.p, ErrorKind::config, "target_index out of range");
    const Eigen::VectorXd theta_star =
        build_theta_star(cfg.p, cfg.s, cfg.mu, cfg.placement, seed, j, cfg.target_value);
    const ProblemInstance inst = detail::make_instance(cfg, theta_star, cfg.n);
    const std::size_t nq = cfg.q_levels.size();
    static const char* methods[] = {"debiased", "no_dof", "loo"};

    struct Replica
    {
        bool flagged = false;
        std::vector<std::array<double, 3>> lo, hi;  // per q, per method
    };
    std::vector<Replica> reps(cfg.n_sim);
    parallel_for(static_cast<std::size_t>(cfg.n_sim), cfg.threads, [&](std::size_t r) {
        const SeedSpec rs = derive_replica_seed(seed, r);
        Replica& rep = reps[r];
        try {
            const Eigen::MatrixXd X = sample_design(model, inst, rs);
            const Dataset data = generate_data(inst, X, rs);
            const LassoFit fit = solve_lasso(X, data.y, cfg.lambda, cfg.solver);
            LeaveOneOut loo(X, data.y, model, j, cfg.lambda, cfg.solver, cfg.normalization);
            const double t = tau_hat(data.y, X, fit);
            const DebiasedEstimate adj = debias(X, data.y, fit, model, true, cfg.normalization);
            const DebiasedEstimate raw = debias(X, data.y, fit, model, false, cfg.normalization);
            const double rnorm = (data.y - X * fit.theta_hat).norm();
            require(!residual_is_degenerate(rnorm, data.y.norm()), ErrorKind::degenerate_dof, "zero residual");
            bool ok = fit.converged;
            for (double q : cfg.q_levels) {
                const ConfidenceReport d = debiased_cis(adj, t, model, q);
                const ConfidenceReport nd = no_dof_ci(raw, rnorm, model, q);
                const LooResult l = loo.test(0.0, q);
                ok = ok && l.converged;
                rep.lo.push_back({d.lo[j], nd.lo[j], l.lo});
                rep.hi.push_back({d.hi[j], nd.hi[j], l.hi});
            }
            rep.flagged = !ok;
        } catch (const Error& e) {
            if (!detail::is_soft_failure(e)) throw;
            rep.flagged = true;
        }
    });

    ExperimentOutput out;
    out.results.experiment = "coverage";
    std::vector<std::array<double, 3>> covered(nq, {0, 0, 0}), width(nq, {0, 0, 0});
    int flagged = 0;
    for (int r = 0; r < cfg.n_sim; ++r) {
        const Replica& rep = reps[r];
        if (rep.flagged) {
            ++flagged;
            out.results.add(r, "all", j, "flagged", 1.0);
            continue;
        }
        for (std::size_t k = 0; k < nq; ++k) {
            const std::string q = format_label(cfg.q_levels[k]);
            for (int m = 0; m < 3; ++m) {
                const double lo = rep.lo[k][m], hi = rep.hi[k][m];
                const bool c = lo <= theta_star[j] && theta_star[j] <= hi;
                covered[k][m] += c;
                width[k][m] += hi - lo;
                const std::string g = std::string(methods[m]) + "@q=" + q;
                out.results.add(r, g, j, "lo", lo);
                out.results.add(r, g, j, "hi", hi);
                out.results.add(r, g, j, "covered", c ? 1.0 : 0.0);
            }
        }
    }
    const int used = cfg.n_sim - flagged;
    Table cov{{"q", "method", "coverage", "mean_width", "replicas_used", "flagged"}, {}};
    nlohmann::json metrics = nlohmann::json::object();
    for (std::size_t k = 0; k < nq; ++k) {
        for (int m = 0; m < 3; ++m) {
            const double c = used > 0 ? covered[k][m] / used : std::nan("");
            const double w = used > 0 ? width[k][m] / used : std::nan("");
            cov.rows.push_back({format_double(cfg.q_levels[k]), methods[m], format_double(c), format_double(w),
                                std::to_string(used), std::to_string(flagged)});
            metrics[std::string(methods[m]) + "@q=" + format_label(cfg.q_levels[k])] = {
                {"coverage", c}, {"mean_width", w}};
        }
    }
    out.tables["coverage"] = std::move(cov);
    out.summary = detail::summary_header("coverage", cfg);
    out.summary["target_index"] = j;
    out.summary["target_value"] = theta_star[j];
    out.summary["metrics"] = metrics;
    out.summary["flagged"] = flagged;
    out.summary["replicas_used"] = used;
    out.summary["timings"] = {{"total_seconds", detail::seconds_since(t0)}};
    return out;
}

/**
 * Lasso risk and sparsity over an (n, μ) grid on a fixed signed support,
 * beside the Monte Carlo standard Gaussian width of that support. With an
 * empty n_grid the grid is p·(median² + offset) for each configured offset.
 */
inline ExperimentOutput run_width_threshold_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto model = std::make_shared<const CovarianceModel>(load_covariance(cfg.covariance, cfg.p, cfg.base_dir));
    const SeedSpec seed{cfg.seed};
    const Eigen::VectorXd pattern = build_theta_star(cfg.p, cfg.s, 1.0, cfg.placement, seed);
    const ConeSpec cone = make_cone(signed_support(pattern), model);

    const WidthEstimate width = estimate_width(cone, cfg.width_samples, seed, cfg.width, cfg.threads);
    const double pd = static_cast<double>(cfg.p);
    const double threshold = width.median_sq();
    const double width_seconds = detail::seconds_since(t0);

    std::vector<Eigen::Index> n_grid = cfg.n_grid;
    if (n_grid.empty()) {
        for (double off : cfg.n_offsets) {
            const auto nn = static_cast<Eigen::Index>(std::lround(pd * (threshold + off)));
            if (nn >= 1 && (n_grid.empty() || n_grid.back() != nn)) n_grid.push_back(nn);
        }
    }
    require(!n_grid.empty(), ErrorKind::config, "empty n grid");

    struct Cell
    {
        Eigen::Index n;
        double mu;
    };
    std::vector<Cell> cells;
    for (auto nn : n_grid)
        for (double mu : cfg.mu_grid) cells.push_back({nn, mu});
    struct Fit
    {
        double risk = 0.0, sparsity = 0.0;
        bool converged = false;
    };
    const std::size_t reps = static_cast<std::size_t>(cfg.n_sim);
    std::vector<Fit> fits(cells.size() * reps);
    parallel_for(fits.size(), cfg.threads, [&](std::size_t k) {
        const Cell& cell = cells[k / reps];
        const std::size_t r = k % reps;
        const SeedSpec rs = derive_replica_seed(seed, r);
        const ProblemInstance inst = detail::make_instance(cfg, cell.mu * pattern, cell.n);
        const Eigen::MatrixXd X = sample_design(*model, inst, rs);
        const Dataset data = generate_data(inst, X, rs);
        const LassoFit fit = solve_lasso(X, data.y, cfg.lambda, cfg.solver);
        fits[k].risk = (fit.theta_hat - inst.theta_star).squaredNorm() / pd;
        fits[k].sparsity = static_cast<double>(fit.active_count) / static_cast<double>(cell.n);
        fits[k].converged = fit.converged;
    });

    ExperimentOutput out;
    out.results.experiment = "width";
    Table grid{{"n", "n_over_p", "mu", "median_risk", "median_sparsity", "nonconverged", "replicas"}, {}};
    nlohmann::json cells_json = nlohmann::json::array();
    int nonconverged_total = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> risk, sparsity;
        int nonconv = 0;
        const std::string g = "n=" + std::to_string(cells[c].n) + ";mu=" + format_label(cells[c].mu);
        for (std::size_t r = 0; r < reps; ++r) {
            const Fit& f = fits[c * reps + r];
            risk.push_back(f.risk);
            sparsity.push_back(f.sparsity);
            nonconv += !f.converged;
            out.results.add(static_cast<int>(r), g, -1, "risk", f.risk);
            out.results.add(static_cast<int>(r), g, -1, "sparsity", f.sparsity);
            out.results.add(static_cast<int>(r), g, -1, "converged", f.converged ? 1.0 : 0.0);
        }
        nonconverged_total += nonconv;
        const double mr = detail::median_of(risk), ms = detail::median_of(sparsity);
        const double ratio = static_cast<double>(cells[c].n) / pd;
        grid.rows.push_back({std::to_string(cells[c].n), format_double(ratio), format_double(cells[c].mu),
                             format_double(mr), format_double(ms), std::to_string(nonconv), std::to_string(reps)});
        cells_json.push_back({{"n", cells[c].n}, {"n_over_p", ratio}, {"mu", cells[c].mu},
                              {"median_risk", mr}, {"median_sparsity", ms}, {"nonconverged", nonconv}});
    }
    Table samples{{"sample_idx", "value", "p_times_value_sq", "feasible", "iterations"}, {}};
    for (std::size_t i = 0; i < width.samples.size(); ++i) {
        const auto& s = width.samples[i];
        samples.rows.push_back({std::to_string(i), format_double(s.value), format_double(pd * s.value * s.value),
                                s.feasible && s.converged ? "1" : "0", std::to_string(s.iterations)});
    }
    out.tables["grid"] = std::move(grid);
    out.tables["width_samples"] = std::move(samples);
    out.summary = detail::summary_header("width", cfg);
    out.summary["metrics"] = {{"width_mean", width.mean},
                              {"width_median", width.median},
                              {"width_median_sq", threshold},
                              {"p_times_median_sq", pd * threshold},
                              {"width_q05", width.q05},
                              {"width_q95", width.q95},
                              {"width_unreliable", width.unreliable},
                              {"cells", cells_json}};
    out.summary["flagged"] = {{"width_samples", width.n_flagged}, {"lasso_nonconverged", nonconverged_total}};
    out.summary["label"] = "standard Gaussian width";
    out.summary["timings"] = {{"width_seconds", width_seconds}, {"total_seconds", detail::seconds_since(t0)}};
    return out;
}

/**
 * Solves the fixed point and compares each replica against it: residual
 * norm against τ*ζ*, sparsity against 1 − ζ*, τ̂ against τ*, and the KS
 * distance of (θ̂ᵈ − θ*)_j / (τ* (Σ⁻¹)_jj^{1/2}) to N(0, 1). Everything is
 * computed in Σ/n units; Σ/p configs are converted first.
 */
inline ExperimentOutput run_fixed_point_validation(const ExperimentConfig& cfg)
{
    cfg.validate();
    require(cfg.sigma > 0.0, ErrorKind::config, "fixed point validation needs sigma > 0");
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = load_covariance(cfg.covariance, cfg.p, cfg.base_dir);
    const SeedSpec seed{cfg.seed};
    const Eigen::VectorXd theta_raw = build_theta_star(cfg.p, cfg.s, cfg.mu, cfg.placement, seed);
    const ProblemInstance inst = to_by_n_units(detail::make_instance(cfg, theta_raw, cfg.n));
    const double n = static_cast<double>(cfg.n);

    FixedPointConfig fpc = cfg.fixed_point;
    fpc.threads = cfg.threads;
    fpc.solver = cfg.solver;
    const FixedPointSolution sol =
        solve_fixed_point(inst.theta_star, model, inst.lambda, cfg.sigma, n, fpc, seed, cfg.alpha);
    if (!sol.converged) throw FixedPointFailure("fixed point iteration did not converge", sol);
    std::optional<FixedPointSolution> oracle;
    if (model.is_diagonal() && (model.sigma().diagonal().array() == 1.0).all() && cfg.alpha == 0.0)
        oracle = solve_fixed_point_identity(inst.theta_star, inst.lambda, cfg.sigma, n / cfg.p, fpc);
    const double fp_seconds = detail::seconds_since(t0);

    const double tau = sol.tau_star, zeta = sol.zeta_star;
    struct Replica
    {
        bool flagged = false;
        double resid_rel = 0, sparsity_abs = 0, tau_hat_rel = 0, ks = 0;
    };
    std::vector<Replica> reps(cfg.n_sim);
    parallel_for(static_cast<std::size_t>(cfg.n_sim), cfg.threads, [&](std::size_t r) {
        const SeedSpec rs = derive_replica_seed(seed, r);
        Replica& rep = reps[r];
        try {
            const Eigen::MatrixXd X = sample_design(model, inst, rs);
            const Dataset data = generate_data(inst, X, rs);
            const LassoFit fit = solve_lasso(X, data.y, inst.lambda, cfg.solver);
            const double rn = (data.y - X * fit.theta_hat).norm() / std::sqrt(n);
            rep.resid_rel = std::abs(rn - tau * zeta) / (tau * zeta);
            rep.sparsity_abs = std::abs(static_cast<double>(fit.active_count) / n - (1.0 - zeta));
            rep.tau_hat_rel = std::abs(tau_hat(data.y, X, fit) - tau) / tau;
            const DebiasedEstimate adj = debias(X, data.y, fit, model, true);
            std::vector<double> z(cfg.p);
            for (Eigen::Index j = 0; j < cfg.p; ++j)
                z[j] = (adj.theta_d[j] - inst.theta_star[j]) / (tau * std::sqrt(model.inv()(j, j)));
            std::sort(z.begin(), z.end());
            rep.ks = detail::ks_statistic_normal(z);
            rep.flagged = !fit.converged;
        } catch (const Error& e) {
            if (!detail::is_soft_failure(e)) throw;
            rep.flagged = true;
        }
    });

    ExperimentOutput out;
    out.results.experiment = "fixpoint";
    std::vector<double> resid, spars, tauh, ks;
    int flagged = 0;
    for (int r = 0; r < cfg.n_sim; ++r) {
        const Replica& rep = reps[r];
        if (rep.flagged) {
            ++flagged;
            out.results.add(r, "all", -1, "flagged", 1.0);
            continue;
        }
        out.results.add(r, "all", -1, "residual_rel_error", rep.resid_rel);
        out.results.add(r, "all", -1, "sparsity_abs_error", rep.sparsity_abs);
        out.results.add(r, "all", -1, "tau_hat_rel_error", rep.tau_hat_rel);
        out.results.add(r, "all", -1, "debiased_ks", rep.ks);
        resid.push_back(rep.resid_rel);
        spars.push_back(rep.sparsity_abs);
        tauh.push_back(rep.tau_hat_rel);
        ks.push_back(rep.ks);
    }
    Table trace{{"iter", "tau", "zeta", "risk", "df", "se_risk", "se_df", "n_mc"}, {}};
    for (const auto& t : sol.trace)
        trace.rows.push_back({std::to_string(t.iter), format_double(t.tau), format_double(t.zeta),
                              format_double(t.risk), format_double(t.df), format_double(t.se_risk),
                              format_double(t.se_df), std::to_string(t.n_mc)});
    out.tables["trace"] = std::move(trace);

    nlohmann::json metrics = {{"tau_star", tau},
                              {"zeta_star", zeta},
                              {"se_tau", sol.se_tau},
                              {"se_zeta", sol.se_zeta},
                              {"fixed_point_iterations", sol.iterations},
                              {"width_warning", sol.width_warning},
                              {"median_residual_rel_error", detail::median_of(resid)},
                              {"median_sparsity_abs_error", detail::median_of(spars)},
                              {"median_tau_hat_rel_error", detail::median_of(tauh)},
                              {"median_debiased_ks", detail::median_of(ks)}};
    if (oracle) {
        metrics["oracle_tau_star"] = oracle->tau_star;
        metrics["oracle_zeta_star"] = oracle->zeta_star;
        metrics["oracle_converged"] = oracle->converged;
    }
    out.summary = detail::summary_header("fixpoint", cfg);
    out.summary["units"] = "by_n";
    out.summary["lambda_by_n"] = inst.lambda;
    out.summary["metrics"] = metrics;
    out.summary["flagged"] = {{"replicas", flagged}, {"prox_solves", sol.last.flagged}};
    out.summary["timings"] = {{"fixed_point_seconds", fp_seconds}, {"total_seconds", detail::seconds_since(t0)}};
    return out;
}

} // namespace lassodist
