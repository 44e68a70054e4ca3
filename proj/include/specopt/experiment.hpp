#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "specopt/optimizer.hpp"
#include "specopt/param_graph.hpp"
#include "specopt/spectral.hpp"
#include "specopt/toy_tasks.hpp"

namespace specopt
{

/// Every problem found while validating a config document.
class ConfigError : public std::runtime_error
{
  public:
    explicit ConfigError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const { return issues_; }

  private:
    std::vector<std::string> issues_;
};

/// splitmix64 of (seed, stream); gives independent RNG streams per run component.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Random spanning tree plus independent extra edges with probability edge_prob;
/// weights uniform in [w_min, w_max]. Always connected.
ParameterGraph random_connected_graph(Index n, double edge_prob, double w_min, double w_max, std::uint64_t seed);

enum class GraphKind
{
    edges,
    file,
    layer_chain,
    random,
    similarity,
};

struct GraphSpec
{
    GraphKind kind = GraphKind::random;
    nlohmann::json edges_doc; // edges / file (after loading)
    std::vector<Index> group_sizes;
    double intra_w = 1.0;
    double inter_w = 1.0;
    Index n = 0;
    double edge_prob = 0.1;
    double w_min = 0.5;
    double w_max = 1.5;
    std::uint64_t seed = 0;
    Index k = 3;
    double sigma = 1.0;
};

enum class TaskKind
{
    node_regression,
    tiny_net,
};

struct TaskSpec
{
    TaskKind kind = TaskKind::node_regression;
    // node_regression
    Index dim = 4;
    Index cutoff = 2;
    double signal_scale = 1.0;
    double noise_sd = 0.3;
    Index observations = 8;
    // tiny_net
    TinyNetWidths widths;
    Index samples = 96;
    std::optional<std::uint64_t> dataset_seed;
    // shared
    double sample_fraction = 1.0;
    double init_scale = 1.0;
};

enum class Variant
{
    task_only,
    spec_only,
    joint,
    joint_filtered,
};

std::string to_string(Variant v);
std::string to_string(FilterTarget t);

enum class SweepAxis
{
    sample_fraction,
    lambda,
    filter_param,
};

std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepSpec
{
    SweepAxis axis = SweepAxis::lambda;
    std::vector<double> values;
};

struct DenoiseSpec
{
    Index cutoff = 2;
    double signal_scale = 1.0;
    Index dim = 1;
    std::vector<double> noise_sds{0.5};
    FilterSpec filter = FilterSpec::heat(0.3);
};

struct ExperimentConfig
{
    std::optional<GraphSpec> graph;
    std::optional<TaskSpec> task;
    OptimizerConfig optimizer;
    std::vector<Variant> variants;
    std::vector<std::uint64_t> seeds;
    std::optional<double> threshold;
    std::optional<std::string> output;
    std::optional<SweepSpec> sweep;
    std::optional<DenoiseSpec> denoise;
    bool dump_dataset = false;
};

enum class Command
{
    train,
    sweep,
    denoise,
};

/**
 * Parses and validates a config document for `cmd`. Unknown keys anywhere are
 * errors. All violations are collected and thrown together as a ConfigError.
 * Relative graph file paths resolve against `base_dir`.
 */
ExperimentConfig parse_config(const nlohmann::json& doc, Command cmd, const std::filesystem::path& base_dir = {});

FilterSpec parse_filter(const nlohmann::json& doc, const std::string& where = "filter");

/// Adds `offset` to every configured seed.
void apply_seed_offset(ExperimentConfig& cfg, std::int64_t offset);

/// Optimizer settings for one ablation variant.
OptimizerConfig variant_config(const OptimizerConfig& base, Variant v);

/// Everything a single seed needs before training starts.
struct RunSetup
{
    ParameterGraph graph;
    SpectralBasis basis;
    std::unique_ptr<ToyTask> task;
    ParameterMatrix theta0;
    std::optional<ParameterMatrix> ground_truth;
};

RunSetup build_run(const GraphSpec& graph, const TaskSpec& task, std::uint64_t seed);

struct RunReport
{
    Variant variant = Variant::joint;
    std::uint64_t seed = 0;
    TrainResult result;
    LossBreakdown final_loss;
    std::optional<int> steps_to_threshold;
    std::optional<double> accuracy;
    std::optional<double> ground_truth_mse;
    double wall_ms = 0.0;
};

/// First step whose metric (task loss for task_only, joint loss otherwise) is <= threshold.
std::optional<int> steps_to_threshold(const TrainTrace& trace, Variant v, double threshold);

/// All (variant, seed) runs, ordered by variant then seed.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kTraceHeader =
    "step,task_loss,spec_loss,joint_loss,grad_norm_pre,grad_norm_post,dirichlet_energy";
inline constexpr const char* kSweepHeader = "axis_value,variant,seed,final_task_loss,steps_to_threshold";
inline constexpr const char* kDenoiseHeader = "seed,noise_sd,mse_unfiltered,mse_filtered";

std::string trace_csv(const TrainTrace& trace);
std::string trace_file_name(Variant v, std::uint64_t seed);
nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<RunReport>& runs);

struct SweepRow
{
    double axis_value = 0.0;
    Variant variant = Variant::joint;
    std::uint64_t seed = 0;
    double final_task_loss = 0.0;
    std::optional<int> steps_to_threshold;
    RunStatus status = RunStatus::completed;
};

/// Runs every (value, variant, seed) combination of cfg.sweep.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct DenoiseResult
{
    double mse_unfiltered = 0.0;
    double mse_filtered = 0.0;
};

/**
 * One denoising trial: a smooth field G* (cutoff K) is corrupted with white
 * noise of standard deviation noise_sd and low-pass filtered; both fields are
 * scored by mean squared error to G*.
 */
DenoiseResult denoise_trial(const SpectralBasis& basis, const SmoothSignalSpec& signal, Index dim,
                            const FilterSpec& filter, double noise_sd, std::uint64_t seed);

struct DenoiseRow
{
    std::uint64_t seed = 0;
    double noise_sd = 0.0;
    DenoiseResult result;
};

std::vector<DenoiseRow> run_denoise(const ExperimentConfig& cfg);
std::string denoise_csv(const std::vector<DenoiseRow>& rows);

} // namespace specopt
