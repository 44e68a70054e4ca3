#include "specopt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "specopt/coopt_loss.hpp"
#include "specopt/io.hpp"

namespace specopt
{

namespace
{

std::string join_issues(const std::vector<std::string>& issues)
{
    std::string out = "invalid config:";
    for (const auto& s : issues)
        out += "\n  " + s;
    return out;
}

/// Collects type and range problems while walking a JSON config.
class Reader
{
  public:
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

    bool expect_object(const nlohmann::json& j, const std::string& path)
    {
        if (!j.is_object())
        {
            fail(path, "expected an object");
            return false;
        }
        return true;
    }

    void allowed_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<const char*> keys)
    {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [key, value] : obj.items())
            if (!ok.count(key))
                fail(join(path, key), "unknown key");
    }

    static std::string join(const std::string& path, const std::string& key)
    {
        return path.empty() ? key : path + "." + key;
    }

    void require(const nlohmann::json& obj, const std::string& path, const char* key)
    {
        if (!obj.contains(key))
            fail(join(path, key), "missing required key");
    }

    void number(const nlohmann::json& obj, const std::string& path, const char* key, double& out)
    {
        if (!obj.contains(key))
            return;
        const auto& v = obj[key];
        if (!v.is_number())
            fail(join(path, key), "expected a number");
        else
            out = v.get<double>();
    }

    template <typename Int>
    void integer(const nlohmann::json& obj, const std::string& path, const char* key, Int& out)
    {
        if (!obj.contains(key))
            return;
        const auto& v = obj[key];
        if (!v.is_number_integer())
            fail(join(path, key), "expected an integer");
        else
            out = v.get<Int>();
    }

    void string(const nlohmann::json& obj, const std::string& path, const char* key, std::string& out)
    {
        if (!obj.contains(key))
            return;
        const auto& v = obj[key];
        if (!v.is_string())
            fail(join(path, key), "expected a string");
        else
            out = v.get<std::string>();
    }

    std::vector<double> numbers(const nlohmann::json& obj, const std::string& path, const char* key)
    {
        std::vector<double> out;
        if (!obj.contains(key))
            return out;
        const auto& v = obj[key];
        if (!v.is_array())
        {
            fail(join(path, key), "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (!v[i].is_number())
                fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
            else
                out.push_back(v[i].get<double>());
        }
        return out;
    }

    void check(bool ok, const std::string& path, const std::string& msg)
    {
        if (!ok)
            fail(path, msg);
    }
};

std::optional<FilterSpec> read_filter(Reader& r, const nlohmann::json& doc, const std::string& path)
{
    if (!r.expect_object(doc, path))
        return std::nullopt;
    std::string type;
    r.require(doc, path, "type");
    r.string(doc, path, "type", type);
    if (type == "identity")
    {
        r.allowed_keys(doc, path, {"type"});
        return FilterSpec::identity();
    }
    if (type == "ideal_lowpass")
    {
        r.allowed_keys(doc, path, {"type", "keep"});
        r.require(doc, path, "keep");
        Index keep = 0;
        r.integer(doc, path, "keep", keep);
        r.check(!doc.contains("keep") || keep >= 1, path + ".keep", "must be >= 1");
        return FilterSpec::ideal_lowpass(keep);
    }
    if (type == "heat" || type == "tikhonov")
    {
        r.allowed_keys(doc, path, {"type", "t"});
        r.require(doc, path, "t");
        double t = 0.0;
        r.number(doc, path, "t", t);
        r.check(std::isfinite(t) && t >= 0.0, path + ".t", "must be finite and >= 0");
        return type == "heat" ? FilterSpec::heat(t) : FilterSpec::tikhonov(t);
    }
    if (!type.empty())
        r.fail(path + ".type", "unknown filter type '" + type + "'");
    return std::nullopt;
}

std::optional<GraphSpec> read_graph(Reader& r, const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    const std::string path = "graph";
    if (!r.expect_object(doc, path))
        return std::nullopt;
    std::string type;
    r.require(doc, path, "type");
    r.string(doc, path, "type", type);
    GraphSpec g;
    if (type == "edges")
    {
        g.kind = GraphKind::edges;
        g.edges_doc = doc;
        g.edges_doc.erase("type");
        try
        {
            g.n = graph_from_json(g.edges_doc, path).n_nodes();
        }
        catch (const ParseError& e)
        {
            r.issues.push_back(e.what());
            return std::nullopt;
        }
        return g;
    }
    if (type == "file")
    {
        g.kind = GraphKind::file;
        r.allowed_keys(doc, path, {"type", "path"});
        std::string file;
        r.require(doc, path, "path");
        r.string(doc, path, "path", file);
        if (file.empty())
            return std::nullopt;
        std::filesystem::path p(file);
        if (p.is_relative() && !base_dir.empty())
            p = base_dir / p;
        try
        {
            g.edges_doc = read_json_file(p);
            g.n = graph_from_json(g.edges_doc, p.string()).n_nodes();
        }
        catch (const ParseError& e)
        {
            r.issues.push_back(e.what());
            return std::nullopt;
        }
        return g;
    }
    if (type == "layer_chain")
    {
        g.kind = GraphKind::layer_chain;
        r.allowed_keys(doc, path, {"type", "group_sizes", "intra_w", "inter_w"});
        r.require(doc, path, "group_sizes");
        for (double s : r.numbers(doc, path, "group_sizes"))
        {
            if (s < 1 || s != std::floor(s))
                r.fail(path + ".group_sizes", "entries must be positive integers");
            else
                g.group_sizes.push_back(static_cast<Index>(s));
        }
        r.check(!doc.contains("group_sizes") || !g.group_sizes.empty(), path + ".group_sizes", "must not be empty");
        r.number(doc, path, "intra_w", g.intra_w);
        r.number(doc, path, "inter_w", g.inter_w);
        r.check(g.intra_w >= 0.0 && g.inter_w >= 0.0, path, "intra_w and inter_w must be >= 0");
        g.n = std::accumulate(g.group_sizes.begin(), g.group_sizes.end(), Index(0));
        return g;
    }
    if (type == "random")
    {
        g.kind = GraphKind::random;
        r.allowed_keys(doc, path, {"type", "n", "edge_prob", "w_min", "w_max", "seed"});
        r.require(doc, path, "n");
        r.integer(doc, path, "n", g.n);
        r.number(doc, path, "edge_prob", g.edge_prob);
        r.number(doc, path, "w_min", g.w_min);
        r.number(doc, path, "w_max", g.w_max);
        r.integer(doc, path, "seed", g.seed);
        r.check(!doc.contains("n") || g.n >= 1, path + ".n", "must be >= 1");
        r.check(g.edge_prob >= 0.0 && g.edge_prob <= 1.0, path + ".edge_prob", "must lie in [0, 1]");
        r.check(g.w_min > 0.0 && g.w_max >= g.w_min, path, "need 0 < w_min <= w_max");
        return g;
    }
    if (type == "similarity")
    {
        g.kind = GraphKind::similarity;
        r.allowed_keys(doc, path, {"type", "k", "sigma"});
        r.require(doc, path, "k");
        r.require(doc, path, "sigma");
        r.integer(doc, path, "k", g.k);
        r.number(doc, path, "sigma", g.sigma);
        r.check(g.k >= 1, path + ".k", "must be >= 1");
        r.check(g.sigma > 0.0, path + ".sigma", "must be > 0");
        return g;
    }
    if (!type.empty())
        r.fail(path + ".type", "unknown graph type '" + type + "'");
    return std::nullopt;
}

std::optional<TaskSpec> read_task(Reader& r, const nlohmann::json& doc)
{
    const std::string path = "task";
    if (!r.expect_object(doc, path))
        return std::nullopt;
    std::string type;
    r.require(doc, path, "type");
    r.string(doc, path, "type", type);
    TaskSpec t;
    if (type == "node_regression")
    {
        t.kind = TaskKind::node_regression;
        r.allowed_keys(doc, path,
                       {"type", "dim", "cutoff", "signal_scale", "noise_sd", "observations", "sample_fraction",
                        "init_scale"});
        r.integer(doc, path, "dim", t.dim);
        r.integer(doc, path, "cutoff", t.cutoff);
        r.number(doc, path, "signal_scale", t.signal_scale);
        r.number(doc, path, "noise_sd", t.noise_sd);
        r.integer(doc, path, "observations", t.observations);
        r.check(t.dim >= 1, path + ".dim", "must be >= 1");
        r.check(t.cutoff >= 1, path + ".cutoff", "must be >= 1");
        r.check(t.noise_sd >= 0.0, path + ".noise_sd", "must be >= 0");
        r.check(t.observations >= 1, path + ".observations", "must be >= 1");
    }
    else if (type == "tiny_net")
    {
        t.kind = TaskKind::tiny_net;
        r.allowed_keys(doc, path, {"type", "widths", "samples", "dataset_seed", "sample_fraction", "init_scale"});
        r.require(doc, path, "widths");
        const auto w = r.numbers(doc, path, "widths");
        if (doc.contains("widths"))
        {
            if (w.size() != 3 || std::any_of(w.begin(), w.end(), [](double x) { return x != std::floor(x); }))
                r.fail(path + ".widths", "expected [in, hidden, out] integers");
            else
            {
                t.widths = {static_cast<Index>(w[0]), static_cast<Index>(w[1]), static_cast<Index>(w[2])};
                r.check(t.widths.in >= 1 && t.widths.hidden >= 1 && t.widths.out >= 2, path + ".widths",
                        "need in >= 1, hidden >= 1, out >= 2");
            }
        }
        r.integer(doc, path, "samples", t.samples);
        r.check(t.samples >= 1, path + ".samples", "must be >= 1");
        if (doc.contains("dataset_seed"))
        {
            std::uint64_t s = 0;
            r.integer(doc, path, "dataset_seed", s);
            t.dataset_seed = s;
        }
        t.init_scale = 0.5;
    }
    else
    {
        if (!type.empty())
            r.fail(path + ".type", "unknown task type '" + type + "'");
        return std::nullopt;
    }
    r.number(doc, path, "sample_fraction", t.sample_fraction);
    r.number(doc, path, "init_scale", t.init_scale);
    r.check(t.sample_fraction > 0.0 && t.sample_fraction <= 1.0, path + ".sample_fraction", "must lie in (0, 1]");
    r.check(t.init_scale >= 0.0, path + ".init_scale", "must be >= 0");
    return t;
}

void read_optimizer(Reader& r, const nlohmann::json& doc, OptimizerConfig& opt)
{
    const std::string path = "optimizer";
    if (!r.expect_object(doc, path))
        return;
    r.allowed_keys(doc, path, {"eta", "lambda", "filter", "filter_target", "max_steps", "stop_loss"});
    r.require(doc, path, "eta");
    r.require(doc, path, "max_steps");
    r.number(doc, path, "eta", opt.eta);
    r.number(doc, path, "lambda", opt.lambda);
    r.integer(doc, path, "max_steps", opt.max_steps);
    r.check(std::isfinite(opt.eta) && opt.eta > 0.0, path + ".eta", "must be > 0");
    r.check(std::isfinite(opt.lambda) && opt.lambda >= 0.0, path + ".lambda", "must be >= 0");
    r.check(opt.max_steps >= 1, path + ".max_steps", "must be >= 1");
    if (doc.contains("stop_loss") && !doc["stop_loss"].is_null())
    {
        double s = 0.0;
        r.number(doc, path, "stop_loss", s);
        opt.stop_loss = s;
    }
    if (doc.contains("filter"))
        if (auto f = read_filter(r, doc["filter"], path + ".filter"))
            opt.filter = *f;
    std::string target = "task_gradient";
    r.string(doc, path, "filter_target", target);
    if (target == "task_gradient")
        opt.filter_target = FilterTarget::task_gradient;
    else if (target == "total_gradient")
        opt.filter_target = FilterTarget::total_gradient;
    else
        r.fail(path + ".filter_target", "expected task_gradient or total_gradient");
}

std::optional<Variant> parse_variant(const std::string& s)
{
    if (s == "task_only")
        return Variant::task_only;
    if (s == "spec_only")
        return Variant::spec_only;
    if (s == "joint")
        return Variant::joint;
    if (s == "joint_filtered")
        return Variant::joint_filtered;
    return std::nullopt;
}

void check_filter_fits(Reader& r, const FilterSpec& f, Index n, const std::string& path)
{
    try
    {
        validate_filter(f, n);
    }
    catch (const std::invalid_argument& e)
    {
        r.fail(path, e.what());
    }
}

void check_axis_values(Reader& r, const ExperimentConfig& cfg, Index n)
{
    const auto& sw = *cfg.sweep;
    for (std::size_t i = 0; i < sw.values.size(); ++i)
    {
        const double v = sw.values[i];
        const std::string at = "sweep.values[" + std::to_string(i) + "]";
        switch (sw.axis)
        {
        case SweepAxis::sample_fraction:
            r.check(v > 0.0 && v <= 1.0, at, "sample_fraction must lie in (0, 1]");
            break;
        case SweepAxis::lambda:
            r.check(std::isfinite(v) && v >= 0.0, at, "lambda must be >= 0");
            break;
        case SweepAxis::filter_param:
            switch (cfg.optimizer.filter.kind)
            {
            case FilterKind::identity:
                r.fail(at, "filter_param sweep needs a non-identity optimizer.filter");
                break;
            case FilterKind::ideal_lowpass:
                r.check(v == std::floor(v) && v >= 1 && (n == 0 || v <= static_cast<double>(n)), at,
                        "ideal_lowpass keep must be an integer in [1, N]");
                break;
            default:
                r.check(std::isfinite(v) && v >= 0.0, at, "filter t must be >= 0");
            }
            break;
        }
    }
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues))
    , issues_(std::move(issues))
{
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

ParameterGraph random_connected_graph(Index n, double edge_prob, double w_min, double w_max, std::uint64_t seed)
{
    if (n < 1)
        throw std::invalid_argument("random graph needs n >= 1");
    if (!(w_min > 0.0) || w_max < w_min)
        throw std::invalid_argument("random graph needs 0 < w_min <= w_max");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(w_min, w_max);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    MatrixXd w = MatrixXd::Zero(n, n);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::shuffle(order.begin(), order.end(), rng);
    for (Index k = 1; k < n; ++k)
    {
        std::uniform_int_distribution<Index> pick(0, k - 1);
        const Index a = order[k];
        const Index b = order[pick(rng)];
        w(a, b) = w(b, a) = weight(rng);
    }
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (w(i, j) == 0.0 && coin(rng) < edge_prob)
                w(i, j) = w(j, i) = weight(rng);
    return ParameterGraph::from_weights(std::move(w));
}

std::string to_string(Variant v)
{
    switch (v)
    {
    case Variant::task_only:
        return "task_only";
    case Variant::spec_only:
        return "spec_only";
    case Variant::joint:
        return "joint";
    case Variant::joint_filtered:
        return "joint_filtered";
    }
    return "unknown";
}

std::string to_string(FilterTarget t)
{
    return t == FilterTarget::task_gradient ? "task_gradient" : "total_gradient";
}

std::string to_string(SweepAxis a)
{
    switch (a)
    {
    case SweepAxis::sample_fraction:
        return "sample_fraction";
    case SweepAxis::lambda:
        return "lambda";
    case SweepAxis::filter_param:
        return "filter_param";
    }
    return "unknown";
}

SweepAxis parse_sweep_axis(const std::string& name)
{
    if (name == "sample_fraction")
        return SweepAxis::sample_fraction;
    if (name == "lambda")
        return SweepAxis::lambda;
    if (name == "filter_param")
        return SweepAxis::filter_param;
    throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

FilterSpec parse_filter(const nlohmann::json& doc, const std::string& where)
{
    Reader r;
    auto f = read_filter(r, doc, where);
    if (!r.issues.empty() || !f)
        throw ConfigError(r.issues.empty() ? std::vector<std::string>{where + ": invalid filter"} : r.issues);
    return *f;
}

ExperimentConfig parse_config(const nlohmann::json& doc, Command cmd, const std::filesystem::path& base_dir)
{
    Reader r;
    ExperimentConfig cfg;
    if (!doc.is_object())
        throw ConfigError({"<root>: expected a JSON object"});
    r.allowed_keys(doc, "", {"graph", "task", "optimizer", "variants", "seeds", "threshold", "output", "sweep",
                             "denoise", "dump_dataset"});

    r.require(doc, "", "graph");
    r.require(doc, "", "seeds");
    if (doc.contains("graph"))
        cfg.graph = read_graph(r, doc["graph"], base_dir);

    const bool training = cmd == Command::train || cmd == Command::sweep;
    if (training)
    {
        r.require(doc, "", "task");
        r.require(doc, "", "optimizer");
        r.require(doc, "", "variants");
    }
    if (cmd == Command::sweep)
        r.require(doc, "", "sweep");
    if (cmd == Command::denoise)
        r.require(doc, "", "denoise");

    if (doc.contains("task"))
        cfg.task = read_task(r, doc["task"]);
    if (doc.contains("optimizer"))
        read_optimizer(r, doc["optimizer"], cfg.optimizer);

    if (doc.contains("variants"))
    {
        const auto& v = doc["variants"];
        if (!v.is_array() || v.empty())
            r.fail("variants", "expected a non-empty array of variant names");
        else
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                const std::string at = "variants[" + std::to_string(i) + "]";
                const auto parsed = v[i].is_string() ? parse_variant(v[i].get<std::string>()) : std::nullopt;
                if (!parsed)
                    r.fail(at, "expected one of task_only, spec_only, joint, joint_filtered");
                else if (std::find(cfg.variants.begin(), cfg.variants.end(), *parsed) != cfg.variants.end())
                    r.fail(at, "duplicate variant");
                else
                    cfg.variants.push_back(*parsed);
            }
    }

    if (doc.contains("seeds"))
    {
        const auto& s = doc["seeds"];
        if (!s.is_array() || s.empty())
            r.fail("seeds", "expected a non-empty array of integers");
        else
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                if (!s[i].is_number_integer() || s[i].get<long long>() < 0)
                    r.fail("seeds[" + std::to_string(i) + "]", "expected a nonnegative integer");
                else
                    cfg.seeds.push_back(s[i].get<std::uint64_t>());
            }
    }

    if (doc.contains("threshold"))
    {
        double t = 0.0;
        r.number(doc, "", "threshold", t);
        cfg.threshold = t;
    }
    if (doc.contains("output"))
    {
        std::string out;
        r.string(doc, "", "output", out);
        cfg.output = out;
    }
    if (doc.contains("dump_dataset"))
    {
        if (!doc["dump_dataset"].is_boolean())
            r.fail("dump_dataset", "expected a boolean");
        else
            cfg.dump_dataset = doc["dump_dataset"].get<bool>();
    }

    if (doc.contains("sweep"))
    {
        const auto& s = doc["sweep"];
        if (r.expect_object(s, "sweep"))
        {
            r.allowed_keys(s, "sweep", {"axis", "values"});
            r.require(s, "sweep", "axis");
            r.require(s, "sweep", "values");
            SweepSpec spec;
            std::string axis;
            r.string(s, "sweep", "axis", axis);
            bool axis_ok = true;
            try
            {
                if (!axis.empty())
                    spec.axis = parse_sweep_axis(axis);
            }
            catch (const std::invalid_argument& e)
            {
                r.fail("sweep.axis", e.what());
                axis_ok = false;
            }
            spec.values = r.numbers(s, "sweep", "values");
            r.check(!s.contains("values") || !spec.values.empty(), "sweep.values", "must not be empty");
            if (axis_ok)
                cfg.sweep = spec;
        }
    }

    if (doc.contains("denoise"))
    {
        const auto& d = doc["denoise"];
        if (r.expect_object(d, "denoise"))
        {
            r.allowed_keys(d, "denoise", {"cutoff", "signal_scale", "dim", "noise_sds", "filter"});
            DenoiseSpec spec;
            r.integer(d, "denoise", "cutoff", spec.cutoff);
            r.number(d, "denoise", "signal_scale", spec.signal_scale);
            r.integer(d, "denoise", "dim", spec.dim);
            if (d.contains("noise_sds"))
                spec.noise_sds = r.numbers(d, "denoise", "noise_sds");
            r.check(!spec.noise_sds.empty(), "denoise.noise_sds", "must not be empty");
            for (double s : spec.noise_sds)
                r.check(std::isfinite(s) && s >= 0.0, "denoise.noise_sds", "entries must be >= 0");
            r.check(spec.cutoff >= 1, "denoise.cutoff", "must be >= 1");
            r.check(spec.dim >= 1, "denoise.dim", "must be >= 1");
            if (d.contains("filter"))
                if (auto f = read_filter(r, d["filter"], "denoise.filter"))
                    spec.filter = *f;
            cfg.denoise = spec;
        }
    }

    // cross-section checks
    const Index n = cfg.graph && cfg.graph->kind != GraphKind::similarity ? cfg.graph->n : 0;
    if (cfg.graph && cfg.task)
    {
        if (cfg.graph->kind == GraphKind::similarity)
        {
            if (cfg.task->kind != TaskKind::tiny_net)
                r.fail("graph.type", "similarity graphs are built from task gradients and need a tiny_net task");
            else
                r.check(cfg.graph->k < cfg.task->widths.hidden, "graph.k", "must be < hidden width");
        }
        else if (cfg.task->kind == TaskKind::tiny_net)
            r.check(cfg.task->widths.hidden == n, "task.widths",
                    "hidden width must equal the graph node count (" + std::to_string(n) + ")");
        else
            r.check(cfg.task->cutoff <= n, "task.cutoff", "must be <= graph node count");
    }
    if (training && doc.contains("optimizer") && n > 0)
        check_filter_fits(r, cfg.optimizer.filter, n, "optimizer.filter");
    if (cfg.sweep)
        check_axis_values(r, cfg, cfg.graph ? cfg.graph->n : 0);
    if (cmd == Command::denoise && cfg.graph && cfg.denoise)
    {
        if (cfg.graph->kind == GraphKind::similarity)
            r.fail("graph.type", "denoise needs a fixed graph, not similarity");
        else
        {
            r.check(cfg.denoise->cutoff <= n, "denoise.cutoff", "must be <= graph node count");
            check_filter_fits(r, cfg.denoise->filter, n, "denoise.filter");
        }
    }

    if (!r.issues.empty())
        throw ConfigError(std::move(r.issues));
    return cfg;
}

void apply_seed_offset(ExperimentConfig& cfg, std::int64_t offset)
{
    for (auto& s : cfg.seeds)
        s = static_cast<std::uint64_t>(static_cast<std::int64_t>(s) + offset);
}

OptimizerConfig variant_config(const OptimizerConfig& base, Variant v)
{
    OptimizerConfig cfg = base;
    switch (v)
    {
    case Variant::task_only:
        cfg.lambda = 0.0;
        cfg.filter = FilterSpec::identity();
        break;
    case Variant::spec_only:
        cfg.use_task_gradient = false;
        break;
    case Variant::joint:
        cfg.filter = FilterSpec::identity();
        break;
    case Variant::joint_filtered:
        break;
    }
    return cfg;
}

namespace
{

ParameterGraph build_static_graph(const GraphSpec& spec)
{
    switch (spec.kind)
    {
    case GraphKind::edges:
    case GraphKind::file:
        return graph_from_json(spec.edges_doc);
    case GraphKind::layer_chain:
        return layer_chain_graph(spec.group_sizes, spec.intra_w, spec.inter_w);
    case GraphKind::random:
        return random_connected_graph(spec.n, spec.edge_prob, spec.w_min, spec.w_max, spec.seed);
    case GraphKind::similarity:
        break;
    }
    throw std::logic_error("similarity graphs depend on the task");
}

} // namespace

RunSetup build_run(const GraphSpec& graph, const TaskSpec& task, std::uint64_t seed)
{
    if (task.kind == TaskKind::node_regression)
    {
        if (graph.kind == GraphKind::similarity)
            throw std::invalid_argument("node_regression needs a fixed graph");
        ParameterGraph g = build_static_graph(graph);
        SpectralBasis basis = eigendecompose(g);
        ParameterMatrix truth =
            gen_smooth_signal(basis, {task.cutoff, task.signal_scale, task.noise_sd}, task.dim, derive_seed(seed, 1));
        auto t = std::make_unique<NodeRegressionTask>(node_regression_task(
            truth, task.noise_sd, task.observations, task.sample_fraction, derive_seed(seed, 2)));
        ParameterMatrix theta0 = random_parameters(g.n_nodes(), task.dim, task.init_scale, derive_seed(seed, 3));
        return {std::move(g), std::move(basis), std::move(t), std::move(theta0), std::move(truth)};
    }

    auto t = std::make_unique<TinyNetTask>(
        tiny_net_task(task.widths, task.dataset_seed.value_or(seed), task.sample_fraction, task.samples));
    ParameterMatrix theta0 = random_parameters(t->n_nodes(), t->dim(), task.init_scale, derive_seed(seed, 3));
    ParameterGraph g = graph.kind == GraphKind::similarity ? similarity_graph(t->gradient(theta0), graph.k, graph.sigma)
                                                           : build_static_graph(graph);
    if (g.n_nodes() != t->n_nodes())
        throw std::invalid_argument("tiny net hidden width does not match the graph node count");
    SpectralBasis basis = eigendecompose(g);
    return {std::move(g), std::move(basis), std::move(t), std::move(theta0), std::nullopt};
}

std::optional<int> steps_to_threshold(const TrainTrace& trace, Variant v, double threshold)
{
    for (const auto& rec : trace)
    {
        const double metric = v == Variant::task_only ? rec.task_loss : rec.joint_loss;
        if (metric <= threshold)
            return rec.step;
    }
    return std::nullopt;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg)
{
    if (!cfg.graph || !cfg.task)
        throw std::invalid_argument("run_experiment needs graph and task sections");
    std::vector<Variant> variants = cfg.variants;
    std::sort(variants.begin(), variants.end());
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::sort(seeds.begin(), seeds.end());

    std::vector<RunReport> reports;
    for (std::uint64_t seed : seeds)
    {
        const RunSetup setup = build_run(*cfg.graph, *cfg.task, seed);
        for (Variant v : variants)
        {
            const OptimizerConfig opt = variant_config(cfg.optimizer, v);
            RunReport rep;
            rep.variant = v;
            rep.seed = seed;
            const auto start = std::chrono::steady_clock::now();
            rep.result = train(*setup.task, setup.graph, setup.basis, opt, setup.theta0);
            rep.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

            if (rep.result.status != RunStatus::diverged)
            {
                const double task_loss = setup.task->loss(rep.result.theta);
                rep.final_loss = joint_loss(task_loss, spectral_reg(setup.graph, rep.result.theta), {opt.lambda});
                if (const auto* net = dynamic_cast<const TinyNetTask*>(setup.task.get()))
                    rep.accuracy = net->accuracy(rep.result.theta);
                if (setup.ground_truth)
                    rep.ground_truth_mse = (rep.result.theta - *setup.ground_truth).squaredNorm() /
                                           static_cast<double>(setup.ground_truth->size());
            }
            else if (!rep.result.trace.empty())
            {
                const auto& last = rep.result.trace.back();
                rep.final_loss = {last.task_loss, last.spec_loss, last.joint_loss};
            }
            if (cfg.threshold)
                rep.steps_to_threshold = steps_to_threshold(rep.result.trace, v, *cfg.threshold);
            reports.push_back(std::move(rep));
        }
    }
    std::stable_sort(reports.begin(), reports.end(), [](const RunReport& a, const RunReport& b) {
        return std::tie(a.variant, a.seed) < std::tie(b.variant, b.seed);
    });
    return reports;
}

std::string trace_csv(const TrainTrace& trace)
{
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& r : trace)
    {
        out += std::to_string(r.step);
        for (double v : {r.task_loss, r.spec_loss, r.joint_loss, r.grad_norm_pre, r.grad_norm_post, r.dirichlet_energy})
        {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string trace_file_name(Variant v, std::uint64_t seed)
{
    return "trace_" + to_string(v) + "_seed" + std::to_string(seed) + ".csv";
}

nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<RunReport>& runs)
{
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : runs)
    {
        nlohmann::json j = {
            {"variant", to_string(r.variant)},
            {"seed", r.seed},
            {"status", r.result.status == RunStatus::diverged ? "diverged" : "ok"},
            {"stop_reason", to_string(r.result.status)},
            {"steps_run", r.result.trace.size()},
            {"final", {{"task_loss", r.final_loss.task}, {"spec_loss", r.final_loss.spec}, {"joint_loss", r.final_loss.joint}}},
            {"steps_to_threshold", r.steps_to_threshold ? nlohmann::json(*r.steps_to_threshold) : nlohmann::json("not_reached")},
            {"wall_ms", r.wall_ms},
            {"trace_file", trace_file_name(r.variant, r.seed)},
        };
        if (!r.result.diagnostic.empty())
            j["diagnostic"] = r.result.diagnostic;
        if (r.accuracy)
            j["accuracy"] = *r.accuracy;
        if (r.ground_truth_mse)
            j["ground_truth_mse"] = *r.ground_truth_mse;
        list.push_back(std::move(j));
    }
    nlohmann::json out = {{"runs", std::move(list)}};
    out["threshold"] = cfg.threshold ? nlohmann::json(*cfg.threshold) : nlohmann::json(nullptr);
    out["optimizer"] = {{"eta", cfg.optimizer.eta},
                        {"lambda", cfg.optimizer.lambda},
                        {"filter", to_string(cfg.optimizer.filter.kind)},
                        {"filter_target", to_string(cfg.optimizer.filter_target)},
                        {"max_steps", cfg.optimizer.max_steps}};
    return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg)
{
    if (!cfg.sweep || cfg.sweep->values.empty())
        throw std::invalid_argument("sweep needs a non-empty value list");
    std::vector<SweepRow> rows;
    for (double value : cfg.sweep->values)
    {
        ExperimentConfig local = cfg;
        switch (cfg.sweep->axis)
        {
        case SweepAxis::sample_fraction:
            local.task->sample_fraction = value;
            break;
        case SweepAxis::lambda:
            local.optimizer.lambda = value;
            break;
        case SweepAxis::filter_param:
            if (local.optimizer.filter.kind == FilterKind::ideal_lowpass)
                local.optimizer.filter.keep = static_cast<Index>(value);
            else
                local.optimizer.filter.t = value;
            break;
        }
        for (const auto& rep : run_experiment(local))
            rows.push_back({value, rep.variant, rep.seed, rep.final_loss.task, rep.steps_to_threshold, rep.result.status});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = kSweepHeader;
    out += '\n';
    for (const auto& r : rows)
    {
        out += format_double(r.axis_value) + ',' + to_string(r.variant) + ',' + std::to_string(r.seed) + ',' +
               format_double(r.final_task_loss) + ',' +
               (r.steps_to_threshold ? std::to_string(*r.steps_to_threshold) : std::string("not_reached")) + '\n';
    }
    return out;
}

DenoiseResult denoise_trial(const SpectralBasis& basis, const SmoothSignalSpec& signal, Index dim,
                            const FilterSpec& filter, double noise_sd, std::uint64_t seed)
{
    if (!std::isfinite(noise_sd) || noise_sd < 0.0)
        throw std::invalid_argument("noise_sd must be finite and >= 0");
    const ParameterMatrix clean = gen_smooth_signal(basis, signal, dim, derive_seed(seed, 1));
    const ParameterMatrix noisy = clean + random_parameters(basis.size(), dim, noise_sd, derive_seed(seed, 2));
    const MatrixXd filtered = apply_filter(basis, filter, noisy);
    const double count = static_cast<double>(clean.size());
    return {(noisy - clean).squaredNorm() / count, (filtered - clean).squaredNorm() / count};
}

std::vector<DenoiseRow> run_denoise(const ExperimentConfig& cfg)
{
    if (!cfg.graph || !cfg.denoise)
        throw std::invalid_argument("denoise needs graph and denoise sections");
    const ParameterGraph g = build_static_graph(*cfg.graph);
    const SpectralBasis basis = eigendecompose(g);
    const auto& d = *cfg.denoise;
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::sort(seeds.begin(), seeds.end());
    std::vector<DenoiseRow> rows;
    for (std::uint64_t seed : seeds)
        for (double sd : d.noise_sds)
            rows.push_back({seed, sd, denoise_trial(basis, {d.cutoff, d.signal_scale, sd}, d.dim, d.filter, sd, seed)});
    return rows;
}

std::string denoise_csv(const std::vector<DenoiseRow>& rows)
{
    std::string out = kDenoiseHeader;
    out += '\n';
    for (const auto& r : rows)
        out += std::to_string(r.seed) + ',' + format_double(r.noise_sd) + ',' + format_double(r.result.mse_unfiltered) +
               ',' + format_double(r.result.mse_filtered) + '\n';
    return out;
}

} // namespace specopt
