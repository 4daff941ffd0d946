#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "engage/config.hpp"
#include "engage/io.hpp"
#include "engage/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using namespace engage;

namespace {

// Scratch directory with a small simulation config and a fast run config.
struct Workspace {
    fs::path dir;

    Workspace()
    {
        dir = fs::temp_directory_path() / "engage_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        auto sim = load_sim_config(fs::path(ENGAGE_SOURCE_DIR) / "config" / "sim_default.json");
        sim.n_students = 3;
        sim.duration_s = 320.0;
        sim.schedule = {{0, 160, SectionType::Instructional}, {160, 320, SectionType::Assessment}};
        write_file_atomic(dir / "sim.json", dump_sim_config(sim));
        write_file_atomic(dir / "run.json", R"({"repeats": 2, "seed": 4, "forest": {"n_trees": 15}})");
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run_cli(const std::string& args, const std::string& log = "/dev/null")
{
    const std::string command = std::string("\"") + ENGAGE_BIN + "\" " + args + " > \"" + log + "\" 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("generate, extract, evaluate and report")
{
    Workspace ws;
    REQUIRE(run_cli("generate --config " + ws.path("sim.json") + " --seed 9 --out " + ws.path("data")) == 0);
    for (const char* f : {"samples.csv", "annotations.csv", "schedule.csv"}) {
        CHECK(fs::exists(ws.dir / "data" / f));
    }
    REQUIRE(run_cli("extract --data " + ws.path("data") + " --out " + ws.path("inst.csv")) == 0);
    CHECK_FALSE(load_instances(ws.path("inst.csv")).empty());

    REQUIRE(run_cli("evaluate --instances " + ws.path("inst.csv") + " --config " + ws.path("run.json") +
                       " --out " + ws.path("eval"),
                   ws.path("eval.log")) == 0);
    for (const char* f : {"metrics.json", "report.txt", "report.csv"}) {
        CHECK(fs::exists(ws.dir / "eval" / f));
    }
    const auto printed = read_file(ws.path("eval.log"));
    CHECK(printed.find(read_file(ws.dir / "eval" / "report.txt")) != std::string::npos);

    REQUIRE(run_cli("report --metrics " + ws.path("eval/metrics.json"), ws.path("report.log")) == 0);
    const auto table = read_file(ws.path("report.log"));
    CHECK(table == read_file(ws.dir / "eval" / "report.txt"));
    for (const char* row : {"On-Task", "Off-Task", "OVERALL", "INSTR.", "ASSESS.", "FUSION"}) {
        CHECK(table.find(row) != std::string::npos);
    }
    const auto report = metrics_from_json(read_file(ws.dir / "eval" / "metrics.json"));
    CHECK(report.metadata.repeats == 2);
    CHECK(report.metadata.master_seed == 4);

    SUBCASE("the data directory can be evaluated directly")
    {
        REQUIRE(run_cli("evaluate --data " + ws.path("data") + " --config " + ws.path("run.json") +
                       " --out " + ws.path("eval2")) == 0);
        CHECK(read_file(ws.dir / "eval2" / "metrics.json") == read_file(ws.dir / "eval" / "metrics.json"));
    }
    SUBCASE("holdout is recorded in the report header")
    {
        REQUIRE(run_cli("evaluate --instances " + ws.path("inst.csv") + " --config " + ws.path("run.json") +
                       " --protocol holdout --out " + ws.path("hold")) == 0);
        CHECK(read_file(ws.dir / "hold" / "report.txt").find("protocol=holdout") != std::string::npos);
    }
    SUBCASE("train and predict")
    {
        REQUIRE(run_cli("train --instances " + ws.path("inst.csv") + " --config " + ws.path("run.json") +
                       " --section Assessment --out " + ws.path("model.json")) == 0);
        const auto bundle = load_model(ws.path("model.json"));
        CHECK(bundle.section == "Assessment");
        CHECK(bundle.config_hash == config_hash(load_run_config(ws.path("run.json"))));
        REQUIRE(run_cli("predict --model " + ws.path("model.json") + " --instances " + ws.path("inst.csv") +
                       " --out " + ws.path("pred.csv")) == 0);
        const auto pred = read_file(ws.path("pred.csv"));
        CHECK(pred.rfind(std::string(kPredictionsHeader) + "\n", 0) == 0);
        const auto lines = static_cast<std::size_t>(std::count(pred.begin(), pred.end(), '\n'));
        CHECK(lines == load_instances(ws.path("inst.csv")).size() + 1);
    }
}

TEST_CASE("bad input exits with status 1 and an error line")
{
    Workspace ws;
    CHECK(run_cli("evaluate --data " + ws.path("missing")) == 1);
    CHECK(run_cli("report --metrics " + ws.path("missing.json"), ws.path("err.log")) == 1);
    CHECK(read_file(ws.path("err.log")).rfind("error: ", 0) == 0);
    CHECK(run_cli("generate --out " + ws.path("x")) == 1);
    write_file_atomic(ws.dir / "bad.json", R"({"repeats": 2, "colour": "blue"})");
    CHECK(run_cli("evaluate --data " + ws.path("x") + " --config " + ws.path("bad.json")) == 1);
    CHECK(run_cli("evaluate --protocol kfold --data " + ws.path("x")) != 0);
    CHECK(run_cli("no-such-command") != 0);
}
