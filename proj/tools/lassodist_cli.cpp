#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include "lassodist.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(lassodist::ErrorKind kind)
{
    using lassodist::ErrorKind;
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::invalid_parameter:
        case ErrorKind::dimension_mismatch:
        case ErrorKind::empty_support:
        case ErrorKind::io:
            return kExitConfig;
        default:
            return kExitNumerical;
    }
}

struct Options
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int threads = 1;
};

using Runner = std::function<lassodist::ExperimentOutput(const lassodist::ExperimentConfig&)>;

int run(const Options& opt, const Runner& runner)
{
    std::filesystem::path out_dir = opt.out;
    try {
        lassodist::ExperimentConfig cfg = lassodist::load_config(opt.config);
        if (opt.seed) cfg.seed = *opt.seed;
        cfg.threads = opt.threads;
        cfg.validate();
        const lassodist::ExperimentOutput result = runner(cfg);
        result.write(out_dir);
        std::cout << result.summary.dump(2) << '\n';
        return kExitOk;
    } catch (const lassodist::FixedPointFailure& e) {
        std::filesystem::create_directories(out_dir);
        lassodist::write_trace_csv(out_dir / "trace.csv", e.solution().trace);
        std::cerr << "error: " << e.what() << " (trace written to " << (out_dir / "trace.csv").string() << ")\n";
        return kExitNumerical;
    } catch (const lassodist::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Lasso distributional theory experiments"};
    app.require_subcommand(1);

    const std::map<std::string, std::pair<std::string, Runner>> commands{
        {"qq", {"standardized debiased values and QQ tables", lassodist::run_qq_experiment}},
        {"coverage", {"single-coordinate confidence interval coverage", lassodist::run_coverage_experiment}},
        {"width", {"Gaussian width and Lasso phase transition", lassodist::run_width_threshold_experiment}},
        {"fixpoint", {"fixed point versus simulation cross-check", lassodist::run_fixed_point_validation}},
    };

    std::map<std::string, Options> options;
    for (const auto& [name, entry] : commands) {
        Options& opt = options[name];
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", opt.config, "JSON run description")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    for (const auto& [name, entry] : commands)
        if (app.got_subcommand(name)) return run(options[name], entry.second);
    return kExitConfig;
}
