#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "specopt/coopt_loss.hpp"
#include "specopt/experiment.hpp"
#include "specopt/io.hpp"

using namespace specopt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

json base_config()
{
    return json::parse(R"({
        "graph": {"type": "random", "n": 10, "edge_prob": 0.2, "seed": 3},
        "task": {"type": "node_regression", "dim": 3, "cutoff": 2, "noise_sd": 0.3, "observations": 6},
        "optimizer": {"eta": 0.2, "lambda": 0.1, "max_steps": 3},
        "variants": ["task_only", "joint"],
        "seeds": [1, 2],
        "threshold": 0.1
    })");
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("specopt_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct CliResult
{
    int code;
    std::string out;
};

CliResult cli(const std::string& args, const fs::path& dir, const std::string& env = "")
{
    const fs::path log = dir / "stdout.txt";
    const std::string cmd = env + " " + std::string(SPECOPT_CLI) + " " + args + " > " + log.string() + " 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

} // namespace

TEST_CASE("parse_config accepts the base document")
{
    const auto cfg = parse_config(base_config(), Command::train);
    CHECK(cfg.graph->kind == GraphKind::random);
    CHECK(cfg.graph->n == 10);
    CHECK(cfg.task->observations == 6);
    CHECK(cfg.optimizer.eta == 0.2);
    CHECK(cfg.optimizer.max_steps == 3);
    CHECK(cfg.variants.size() == 2);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("parse_config reports every violation")
{
    json doc = base_config();
    doc["optimiser"] = json::object();
    doc["optimizer"]["eta"] = -1.0;
    doc["optimizer"]["max_steps"] = 0;
    doc["task"]["dimm"] = 2;
    doc["variants"] = json::array({"joint", "bogus"});
    try
    {
        parse_config(doc, Command::train);
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        const std::string all = e.what();
        CHECK(e.issues().size() >= 5);
        CHECK(all.find("optimiser") != std::string::npos);
        CHECK(all.find("optimizer.eta") != std::string::npos);
        CHECK(all.find("optimizer.max_steps") != std::string::npos);
        CHECK(all.find("task.dimm") != std::string::npos);
        CHECK(all.find("variants[1]") != std::string::npos);
    }

    json empty = base_config();
    empty["seeds"] = json::array();
    CHECK_THROWS_AS(parse_config(empty, Command::train), ConfigError);
    json no_variants = base_config();
    no_variants.erase("variants");
    CHECK_THROWS_AS(parse_config(no_variants, Command::train), ConfigError);
    json bad_cutoff = base_config();
    bad_cutoff["task"]["cutoff"] = 11;
    CHECK_THROWS_AS(parse_config(bad_cutoff, Command::train), ConfigError);
    json bad_filter = base_config();
    bad_filter["optimizer"]["filter"] = {{"type", "ideal_lowpass"}, {"keep", 11}};
    CHECK_THROWS_AS(parse_config(bad_filter, Command::train), ConfigError);
    json sweep_empty = base_config();
    sweep_empty["sweep"] = {{"axis", "lambda"}, {"values", json::array()}};
    CHECK_THROWS_AS(parse_config(sweep_empty, Command::sweep), ConfigError);
    json similarity = base_config();
    similarity["graph"] = {{"type", "similarity"}, {"k", 2}, {"sigma", 1.0}};
    CHECK_THROWS_AS(parse_config(similarity, Command::train), ConfigError);
}

TEST_CASE("seed offset and variant settings")
{
    auto cfg = parse_config(base_config(), Command::train);
    apply_seed_offset(cfg, 100);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{101, 102});
    CHECK(derive_seed(5, 1) != derive_seed(5, 2));
    CHECK(derive_seed(5, 1) == derive_seed(5, 1));

    OptimizerConfig base;
    base.lambda = 0.7;
    base.filter = FilterSpec::heat(0.5);
    const auto t = variant_config(base, Variant::task_only);
    CHECK(t.lambda == 0.0);
    CHECK(t.filter.kind == FilterKind::identity);
    const auto s = variant_config(base, Variant::spec_only);
    CHECK(!s.use_task_gradient);
    CHECK(s.lambda == 0.7);
    CHECK(variant_config(base, Variant::joint).filter.kind == FilterKind::identity);
    CHECK(variant_config(base, Variant::joint_filtered).filter.kind == FilterKind::heat);
}

TEST_CASE("random_connected_graph is connected and reproducible")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const auto g = random_connected_graph(15, 0.05, 0.5, 1.5, seed);
        CHECK(connected_components(g).count == 1);
        CHECK(g.weights() == random_connected_graph(15, 0.05, 0.5, 1.5, seed).weights());
    }
}

TEST_CASE("train outputs")
{
    const auto cfg = parse_config(base_config(), Command::train);
    const auto runs = run_experiment(cfg);
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].variant == Variant::task_only);
    CHECK(runs[0].seed == 1);
    CHECK(runs[3].variant == Variant::joint);
    CHECK(runs[3].seed == 2);

    const std::string csv = trace_csv(runs[0].result.trace);
    CHECK(count_lines(csv) == 4);
    CHECK(csv.substr(0, csv.find('\n')) == kTraceHeader);
    CHECK(csv == trace_csv(run_experiment(cfg)[0].result.trace));
    CHECK(trace_file_name(Variant::joint, 7) == "trace_joint_seed7.csv");

    SUBCASE("task_only spec_loss is the regularizer of the iterate it was measured at")
    {
        const RunSetup setup = build_run(*cfg.graph, *cfg.task, 1);
        const OptimizerConfig opt = variant_config(cfg.optimizer, Variant::task_only);
        ParameterMatrix theta = setup.theta0;
        for (const auto& rec : runs[0].result.trace)
        {
            CHECK(rec.spec_loss == doctest::Approx(spectral_reg(setup.graph, theta)).epsilon(1e-12));
            theta -= opt.eta * setup.task->gradient(theta);
        }
    }
    SUBCASE("summary")
    {
        const json s = summary_json(cfg, runs);
        REQUIRE(s["runs"].size() == 4);
        for (const auto& r : s["runs"])
        {
            CHECK(r["status"] == "ok");
            CHECK((r["steps_to_threshold"].is_number_integer() || r["steps_to_threshold"] == "not_reached"));
            CHECK(r.contains("ground_truth_mse"));
        }
    }
}

TEST_CASE("steps_to_threshold metric")
{
    TrainTrace trace{{1, 5.0, 10.0, 6.0, 0, 0, 0}, {2, 0.5, 10.0, 1.5, 0, 0, 0}, {3, 0.4, 1.0, 0.5, 0, 0, 0}};
    CHECK(steps_to_threshold(trace, Variant::task_only, 1.0) == 2);
    CHECK(steps_to_threshold(trace, Variant::joint, 1.0) == 3);
    CHECK(!steps_to_threshold(trace, Variant::joint, 0.1).has_value());
}

TEST_CASE("sweep")
{
    json doc = base_config();
    doc["variants"] = json::array({"task_only", "joint"});
    doc["seeds"] = json::array({1, 2, 3});
    doc["sweep"] = {{"axis", "sample_fraction"}, {"values", {0.2, 0.4, 0.6}}};
    const auto cfg = parse_config(doc, Command::sweep);
    const auto rows = run_sweep(cfg);
    CHECK(rows.size() == 18);
    const std::string csv = sweep_csv(rows);
    CHECK(count_lines(csv) == 19);
    CHECK(csv.substr(0, csv.find('\n')) == kSweepHeader);

    SUBCASE("lambda = 0 rows match a task_only run")
    {
        json d = doc;
        d["sweep"] = {{"axis", "lambda"}, {"values", {0.0, 0.5}}};
        d["variants"] = json::array({"joint"});
        const auto lam = run_sweep(parse_config(d, Command::sweep));
        json t = base_config();
        t["variants"] = json::array({"task_only"});
        t["seeds"] = doc["seeds"];
        const auto ref = run_experiment(parse_config(t, Command::train));
        for (std::size_t i = 0; i < 3; ++i)
        {
            CHECK(lam[i].axis_value == 0.0);
            CHECK(lam[i].seed == ref[i].seed);
            CHECK(lam[i].final_task_loss == ref[i].final_loss.task);
        }
    }
    SUBCASE("sample_fraction = 1 equals an unswept run")
    {
        json d = doc;
        d["sweep"] = {{"axis", "sample_fraction"}, {"values", {1.0}}};
        const auto full = run_sweep(parse_config(d, Command::sweep));
        json t = doc;
        t.erase("sweep");
        const auto ref = run_experiment(parse_config(t, Command::train));
        REQUIRE(full.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
        {
            CHECK(full[i].variant == ref[i].variant);
            CHECK(full[i].final_task_loss == ref[i].final_loss.task);
        }
    }
}

TEST_CASE("denoise")
{
    const auto g = random_connected_graph(20, 0.1, 0.5, 1.5, 4);
    const auto basis = eigendecompose(g);
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        const auto same = denoise_trial(basis, {2, 1.0, 0.4}, 2, FilterSpec::identity(), 0.4, seed);
        CHECK(same.mse_filtered == same.mse_unfiltered);
        const auto clean = denoise_trial(basis, {2, 1.0, 0.0}, 2, FilterSpec::ideal_lowpass(2), 0.0, seed);
        CHECK(clean.mse_filtered <= 1e-16);
        CHECK(clean.mse_unfiltered == 0.0);
    }
    json doc = base_config();
    doc["denoise"] = {{"cutoff", 2}, {"noise_sds", {0.1, 0.5}}, {"filter", {{"type", "heat"}, {"t", 0.3}}}};
    const auto rows = run_denoise(parse_config(doc, Command::denoise));
    CHECK(rows.size() == 4);
    CHECK(count_lines(denoise_csv(rows)) == 5);
    CHECK(denoise_csv(rows).rfind(kDenoiseHeader, 0) == 0);
}

TEST_CASE("CLI")
{
    const fs::path dir = scratch("cli");
    write(dir / "k2.json", R"({"n": 2, "edges": [[0, 1, 1.0]]})");
    write(dir / "p3.json", R"({"n": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0]]})");
    write(dir / "bad.json", R"({"n": 2, "edges": [[0, 1, 1.0]])");

    auto r = cli("decompose --config " + (dir / "k2.json").string() + " --out " + (dir / "k2").string(), dir);
    CHECK(r.code == 0);
    CHECK(r.out == "0 2\n");
    CHECK(fs::exists(dir / "k2" / "basis.json"));
    r = cli("decompose --config " + (dir / "p3.json").string() + " --out " + (dir / "p3").string(), dir);
    CHECK(r.code == 0);
    CHECK(r.out == "0 1 3\n");
    r = cli("decompose --config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string(), dir);
    CHECK(r.code == 2);
    CHECK(!fs::exists(dir / "bad" / "basis.json"));

    write(dir / "train.json", base_config().dump());
    const std::string train_args = "train --config " + (dir / "train.json").string() + " --out ";
    CHECK(cli(train_args + (dir / "a").string(), dir).code == 0);
    CHECK(cli(train_args + (dir / "b").string(), dir).code == 0);
    for (const char* f : {"trace_task_only_seed1.csv", "trace_joint_seed2.csv"})
    {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(count_lines(slurp(dir / "a" / f)) == 4);
    }
    CHECK(fs::exists(dir / "a" / "summary.json"));

    CHECK(cli(train_args + (dir / "off").string(), dir, "SPECOPT_SEED_OFFSET=10").code == 0);
    CHECK(fs::exists(dir / "off" / "trace_joint_seed12.csv"));
    CHECK(cli(train_args + (dir / "off2").string(), dir, "SPECOPT_SEED_OFFSET=x").code == 2);

    json diverge = base_config();
    diverge["optimizer"]["eta"] = 1e6;
    diverge["optimizer"]["max_steps"] = 50;
    write(dir / "diverge.json", diverge.dump());
    CHECK(cli("train --config " + (dir / "diverge.json").string() + " --out " + (dir / "d").string(), dir).code == 1);
    const json summary = read_json_file(dir / "d" / "summary.json");
    CHECK(summary["runs"][0]["status"] == "diverged");

    json typo = base_config();
    typo["seedz"] = json::array({1});
    write(dir / "typo.json", typo.dump());
    CHECK(cli("train --config " + (dir / "typo.json").string() + " --out " + (dir / "t").string(), dir).code == 2);
    CHECK(!fs::exists(dir / "t"));
    CHECK(cli("frobnicate", dir).code == 2);

    json sw = base_config();
    sw["seeds"] = json::array({1, 2, 3});
    sw["sweep"] = {{"axis", "lambda"}, {"values", {0.5}}};
    write(dir / "sweep.json", sw.dump());
    r = cli("sweep --config " + (dir / "sweep.json").string() + " --out " + (dir / "s").string() +
                " --axis sample_fraction --values 0.2,0.4,0.6",
            dir);
    CHECK(r.code == 0);
    const std::string sweep = slurp(dir / "s" / "sweep.csv");
    CHECK(count_lines(sweep) == 19);
    CHECK(sweep.substr(0, sweep.find('\n')) == kSweepHeader);

    fs::remove_all(dir);
}
