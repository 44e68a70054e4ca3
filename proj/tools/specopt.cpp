// specopt: command-line front end for spectral collaborative optimization experiments.
//
//   specopt decompose --config graph.json [--out dir]
//   specopt train     --config experiment.json [--out dir]
//   specopt sweep     --config experiment.json [--out dir] [--axis name --values v1,v2,...]
//   specopt denoise   --config experiment.json [--out dir]
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or parse error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "specopt/experiment.hpp"
#include "specopt/io.hpp"

namespace fs = std::filesystem;
using namespace specopt;

namespace
{

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

std::int64_t seed_offset_from_env()
{
    const char* raw = std::getenv("SPECOPT_SEED_OFFSET");
    if (raw == nullptr || *raw == '\0')
        return 0;
    std::size_t used = 0;
    try
    {
        const long long v = std::stoll(raw, &used);
        if (used == std::string(raw).size())
            return v;
    }
    catch (const std::exception&)
    {
    }
    throw ConfigError({std::string("SPECOPT_SEED_OFFSET: expected an integer, got '") + raw + "'"});
}

ExperimentConfig load_config(const fs::path& path, Command cmd)
{
    const nlohmann::json doc = read_json_file(path);
    ExperimentConfig cfg = parse_config(doc, cmd, path.parent_path());
    apply_seed_offset(cfg, seed_offset_from_env());
    return cfg;
}

fs::path output_dir(const std::string& cli_out, const ExperimentConfig& cfg)
{
    if (!cli_out.empty())
        return cli_out;
    return cfg.output.value_or(".");
}

std::string format_eigenvalue(double v, double scale)
{
    if (std::abs(v) <= 1e-12 * scale)
        v = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

int cmd_decompose(const fs::path& config, const std::string& out)
{
    const ParameterGraph g = graph_from_json(read_json_file(config), config.string());
    const SpectralBasis basis = eigendecompose(g);
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    write_file_atomic(dir / "basis.json", basis_to_json(basis).dump(2) + "\n");

    const double scale = std::max(1.0, basis.eigenvalues.maxCoeff());
    std::string line;
    for (Index k = 0; k < basis.size(); ++k)
        line += (k ? " " : "") + format_eigenvalue(basis.eigenvalues(k), scale);
    std::cout << line << "\n";
    return kOk;
}

int cmd_train(const fs::path& config, const std::string& out)
{
    const ExperimentConfig cfg = load_config(config, Command::train);
    const fs::path dir = output_dir(out, cfg);
    const auto runs = run_experiment(cfg);

    bool diverged = false;
    for (const auto& r : runs)
    {
        write_file_atomic(dir / trace_file_name(r.variant, r.seed), trace_csv(r.result.trace));
        if (r.result.status == RunStatus::diverged)
        {
            diverged = true;
            std::cerr << "run " << to_string(r.variant) << " seed " << r.seed << " diverged: " << r.result.diagnostic
                      << "\n";
        }
    }
    if (cfg.dump_dataset)
        for (auto seed : cfg.seeds)
        {
            const RunSetup setup = build_run(*cfg.graph, *cfg.task, seed);
            nlohmann::json dump = setup.task->dump();
            dump["run_seed"] = seed;
            write_file_atomic(dir / ("dataset_seed" + std::to_string(seed) + ".json"), dump.dump() + "\n");
        }
    write_file_atomic(dir / "summary.json", summary_json(cfg, runs).dump(2) + "\n");
    std::cout << "wrote " << runs.size() << " trace(s) and summary.json to " << dir.string() << "\n";
    return diverged ? kRuntimeFailure : kOk;
}

int cmd_sweep(const fs::path& config, const std::string& out, const std::string& axis,
              const std::vector<double>& values)
{
    // command-line axis and values override the config's sweep section before validation
    nlohmann::json doc = read_json_file(config);
    if (!axis.empty())
        doc["sweep"]["axis"] = axis;
    if (!values.empty())
        doc["sweep"]["values"] = values;
    ExperimentConfig cfg = parse_config(doc, Command::sweep, config.parent_path());
    apply_seed_offset(cfg, seed_offset_from_env());
    const fs::path dir = output_dir(out, cfg);
    const auto rows = run_sweep(cfg);
    write_file_atomic(dir / "sweep.csv", sweep_csv(rows));
    std::cout << "wrote " << rows.size() << " sweep row(s) to " << (dir / "sweep.csv").string() << "\n";
    for (const auto& r : rows)
        if (r.status == RunStatus::diverged)
            return kRuntimeFailure;
    return kOk;
}

int cmd_denoise(const fs::path& config, const std::string& out)
{
    const ExperimentConfig cfg = load_config(config, Command::denoise);
    const fs::path dir = output_dir(out, cfg);
    const auto rows = run_denoise(cfg);
    write_file_atomic(dir / "denoise.csv", denoise_csv(rows));
    int wins = 0;
    for (const auto& r : rows)
        wins += r.result.mse_filtered < r.result.mse_unfiltered ? 1 : 0;
    std::cout << "filtered beats unfiltered in " << wins << " of " << rows.size() << " trial(s)\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spectral collaborative optimization experiments"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string axis;
    std::vector<double> values;

    auto* decompose = app.add_subcommand("decompose", "eigendecompose a graph Laplacian");
    auto* train = app.add_subcommand("train", "run every (variant, seed) training job");
    auto* sweep = app.add_subcommand("sweep", "sweep one axis over a list of values");
    auto* denoise = app.add_subcommand("denoise", "spectral denoising demo");
    for (auto* sub : {decompose, train, sweep, denoise})
    {
        sub->add_option("--config", config, "config or graph JSON file")->required();
        sub->add_option("--out", out, "output directory");
    }
    sweep->add_option("--axis", axis, "sample_fraction | lambda | filter_param");
    sweep->add_option("--values", values, "comma-separated axis values")->delimiter(',');

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try
    {
        if (*decompose)
            return cmd_decompose(config, out);
        if (*train)
            return cmd_train(config, out);
        if (*sweep)
            return cmd_sweep(config, out, axis, values);
        return cmd_denoise(config, out);
    }
    catch (const ConfigError& e)
    {
        std::cerr << e.what() << "\n";
        return kConfigError;
    }
    catch (const ParseError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    catch (const EigenSolverError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}
