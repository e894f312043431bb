#pragma once
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <json.hpp>
#include "covariance.hpp"
#include "error.hpp"
#include "fixed_point.hpp"
#include "solvers.hpp"
#include "width.hpp"

namespace lassodist {

/// Shortest round-trip representation, so identical values print identically.
inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Compact form for labels and keys.
inline std::string format_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Header-first CSV writer. Every row must match the header width.
class CsvWriter
{
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
        : out_(path), width_(header.size())
    {
        require(out_.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
        write_fields(header);
    }

    CsvWriter& cell(const std::string& s)
    {
        row_.push_back(s);
        return *this;
    }
    CsvWriter& cell(double v) { return cell(format_double(v)); }
    CsvWriter& cell(long long v) { return cell(std::to_string(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(long v) { return cell(std::to_string(v)); }
    CsvWriter& cell(bool v) { return cell(std::string(v ? "1" : "0")); }

    void end_row()
    {
        require(row_.size() == width_, ErrorKind::io, "row width differs from header");
        write_fields(row_);
        row_.clear();
    }

private:
    void write_fields(const std::vector<std::string>& fields)
    {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
        out_ << '\n';
    }

    std::ofstream out_;
    std::size_t width_;
    std::vector<std::string> row_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        require(used == s.size() || s.find_first_not_of(" \r\t", used) == std::string::npos,
                ErrorKind::io, "trailing characters in number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::io, "not a number: '" + s + "'");
    }
}

} // namespace detail

/// Reads a numeric matrix; the first line is a header and is skipped.
inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& f : detail::split_csv_line(line)) row.push_back(detail::parse_double(f));
        require(rows.empty() || row.size() == rows.front().size(), ErrorKind::io,
                "ragged rows in " + path.string());
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorKind::io, "no data rows in " + path.string());
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                             const std::string& prefix = "c")
{
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < m.cols(); ++j) header.push_back(prefix + std::to_string(j));
    CsvWriter w(path, header);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.cell(m(i, j));
        w.end_row();
    }
}

inline void write_fit_csv(const std::filesystem::path& path, const LassoFit& fit)
{
    CsvWriter w(path, {"coordinate", "theta_hat", "subgrad"});
    for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j)
        w.cell(static_cast<long long>(j)).cell(fit.theta_hat[j]).cell(fit.subgrad[j]).end_row();
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<FixedPointTraceRow>& trace)
{
    CsvWriter w(path, {"iter", "tau", "zeta", "risk", "df", "se_risk", "se_df", "n_mc"});
    for (const auto& r : trace)
        w.cell(r.iter).cell(r.tau).cell(r.zeta).cell(r.risk).cell(r.df).cell(r.se_risk).cell(r.se_df)
            .cell(r.n_mc).end_row();
}

inline void write_width_csv(const std::filesystem::path& path, const WidthEstimate& est, Eigen::Index p)
{
    CsvWriter w(path, {"sample_idx", "value", "p_times_value_sq", "feasible", "iterations"});
    const double pd = static_cast<double>(p);
    for (std::size_t i = 0; i < est.samples.size(); ++i) {
        const auto& s = est.samples[i];
        w.cell(i).cell(s.value).cell(pd * s.value * s.value).cell(s.feasible && s.converged)
            .cell(s.iterations).end_row();
    }
}

/**
 * Covariance from JSON: {"kind": "ar", "rho": r, "p": p}, {"kind": "identity", "p": p}
 * or {"kind": "dense", "path": file} with a headered CSV matrix. Relative
 * paths resolve against `base_dir`.
 */
inline CovarianceModel load_covariance(const nlohmann::json& desc, Eigen::Index p,
                                       const std::filesystem::path& base_dir = {})
{
    require(desc.is_object(), ErrorKind::config, "covariance must be an object");
    const std::string kind = desc.value("kind", std::string("ar"));
    try {
        if (kind == "ar") return build_ar_covariance(desc.value("rho", 0.5), p);
        if (kind == "identity") return identity_covariance(p);
        if (kind == "dense") {
            require(desc.contains("path"), ErrorKind::config, "dense covariance needs a path");
            std::filesystem::path file = desc.at("path").get<std::string>();
            if (file.is_relative()) file = base_dir / file;
            const Eigen::MatrixXd m = read_matrix_csv(file);
            require(m.rows() == p && m.cols() == p, ErrorKind::config,
                    "dense covariance has the wrong dimension");
            return factor_covariance(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, std::string("covariance: ") + e.what());
    }
    throw Error(ErrorKind::config, "unknown covariance kind '" + kind + "'");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

} // namespace lassodist
