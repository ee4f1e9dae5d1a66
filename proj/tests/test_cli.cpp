#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gle/config.hpp"
#include "gle/csv.hpp"
#include "gle/experiments.hpp"

using namespace gle;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("gle_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string model_json() {
    return R"("model": {"gamma": 5.0, "alpha": [3, 3, 3], "lambda": [2, 2, 2],
                        "potential": "double_well"})";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const char* cli = std::getenv("GLE_CLI");
    REQUIRE(cli != nullptr);
    const int rc = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config loading and validation") {
    const fs::path dir = temp_dir("config");
    const fs::path good = dir / "good.json";
    write_file(good, "{\"experiment\": \"simulate\", " + model_json() +
                         ", \"seed\": 7, \"simulate\": {\"T\": 2.0, \"h\": 0.25}}");
    const RunConfig cfg = load_run_config(good.string());
    CHECK(cfg.experiment == "simulate");
    CHECK(cfg.seed == 7);
    CHECK(cfg.model.k == 3);
    CHECK(cfg.simulate.T == 2.0);
    CHECK(cfg.simulate.initial == std::vector<double>(5, 1.0));

    const fs::path unknown = dir / "unknown.json";
    write_file(unknown, "{\"experiment\": \"simulate\", " + model_json() + ", \"typo\": 1}");
    CHECK_THROWS_AS(load_run_config(unknown.string()), std::invalid_argument);

    const fs::path unknown2 = dir / "unknown2.json";
    write_file(unknown2, "{\"experiment\": \"simulate\", " + model_json() +
                             ", \"simulate\": {\"dt\": 0.1}}");
    CHECK_THROWS_AS(load_run_config(unknown2.string()), std::invalid_argument);

    const fs::path mismatch = dir / "mismatch.json";
    write_file(mismatch, "{\"experiment\": \"simulate\", " + model_json() +
                             ", \"converge\": {\"T\": 1.0}}");
    CHECK_THROWS_AS(load_run_config(mismatch.string()), std::invalid_argument);

    const fs::path badpot = dir / "badpot.json";
    write_file(badpot,
               R"({"experiment": "simulate", "model": {"gamma": 5.0, "alpha": [3],
                   "lambda": [2], "potential": [0, 0, -0.5, 0, 0.25]}})");
    CHECK_THROWS_AS(load_run_config(badpot.string()), std::invalid_argument);  // K missing

    // Resolved echo parses back to the same configuration.
    const fs::path echo = dir / "echo.json";
    write_file(echo, resolved_config_json(cfg));
    const RunConfig cfg2 = load_run_config(echo.string());
    CHECK(cfg2.simulate.T == cfg.simulate.T);
    CHECK(cfg2.seed == cfg.seed);
    CHECK(cfg2.model.potential.coefficients == cfg.model.potential.coefficients);
}

TEST_CASE("converge experiment rejects fewer than three levels") {
    const fs::path dir = temp_dir("levels");
    RunConfig cfg;
    cfg.experiment = "converge";
    cfg.model = make_model(5.0, {3, 3, 3}, {2, 2, 2}, double_well());
    cfg.out_dir = (dir / "out").string();
    cfg.converge.levels = {0.125};
    cfg.converge.initial = std::vector<double>(5, 1.0);
    CHECK_THROWS_WITH_AS(run_converge(cfg), "converge: need >= 3 levels",
                         std::invalid_argument);
}

TEST_CASE("simulate writes trajectories with stride and markers") {
    const fs::path dir = temp_dir("simulate");
    RunConfig cfg;
    cfg.experiment = "simulate";
    cfg.model = make_model(5.0, {3, 3, 3}, {2, 2, 2}, double_well());
    cfg.out_dir = dir.string();
    cfg.seed = 11;
    cfg.simulate.T = 1.25;
    cfg.simulate.h = 0.125;
    cfg.simulate.n_paths = 1;
    cfg.simulate.stride = 1;
    cfg.simulate.initial = std::vector<double>(5, 1.0);
    auto report = run_simulate(cfg);
    CHECK(report.all_pass());
    auto rows = read_csv((dir / "trajectory.csv").string());
    CHECK(rows.size() == 12);  // header + t=0 + 10 steps
    CHECK(rows[0][0] == "path");
    CHECK(fs::exists(dir / "config_resolved.json"));

    // Zero noise from an equilibrium: constant rows.
    cfg.zero_noise = true;
    cfg.simulate.initial = {0, 0, 0, 0, 0};
    run_simulate(cfg);
    rows = read_csv((dir / "trajectory.csv").string());
    for (size_t r = 1; r < rows.size(); ++r)
        for (int c = 3; c < 8; ++c) CHECK(rows[r][c] == "0");

    // The explicit baseline blows up from a large start and leaves a marker.
    cfg.zero_noise = false;
    cfg.simulate.method = "em";
    cfg.simulate.initial = {0, 0, 0, 0, 10.0};
    cfg.simulate.h = 0.125;
    auto em_report = run_simulate(cfg);
    rows = read_csv((dir / "trajectory.csv").string());
    CHECK(rows.back()[8] == "1");
    CHECK(!em_report.notes.empty());
}

TEST_CASE("error table csv round-trips exactly") {
    const fs::path dir = temp_dir("roundtrip");
    RunConfig cfg;
    cfg.experiment = "converge";
    cfg.model = make_model(5.0, {3, 3, 3}, {2, 2, 2}, double_well());
    cfg.out_dir = dir.string();
    cfg.seed = 99;
    cfg.converge.n_paths = 120;
    cfg.converge.T = 0.5;
    cfg.converge.levels = {1.0 / 32, 1.0 / 64, 1.0 / 128};
    cfg.converge.initial = std::vector<double>(5, 1.0);
    run_converge(cfg);

    const auto rows = read_csv((dir / "error_table.csv").string());
    REQUIRE(rows.size() == 3);  // header + 2 pairs
    // Every numeric cell re-parses and re-prints to the identical string.
    for (size_t r = 1; r < rows.size(); ++r)
        for (size_t c = 0; c < 5; ++c) {
            if (rows[r][c].empty()) continue;
            CHECK(csv_num(std::strtod(rows[r][c].c_str(), nullptr)) == rows[r][c]);
        }
}

TEST_CASE("cli end to end: exit codes and determinism across workers") {
    const fs::path dir = temp_dir("cli");
    const fs::path cfg_path = dir / "run.json";
    write_file(cfg_path, "{\"experiment\": \"converge\", " + model_json() +
                             ", \"seed\": 31415, \"converge\": {\"n_paths\": 120, \"T\": 0.5, "
                             "\"levels\": [0.03125, 0.015625, 0.0078125]}}");

    CHECK(run_cli("--config " + (dir / "missing.json").string()) == 2);

    const fs::path bad = dir / "bad.json";
    write_file(bad, "{\"experiment\": \"nope\", " + model_json() + "}");
    CHECK(run_cli("--config " + bad.string()) == 2);

    const auto out1 = dir / "out1", out2 = dir / "out2";
    CHECK(run_cli("--config " + cfg_path.string() + " --out " + out1.string() +
                  " --workers 1") == 0);
    CHECK(run_cli("--config " + cfg_path.string() + " --out " + out2.string() +
                  " --workers 4") == 0);
    CHECK(slurp(out1 / "error_table.csv") == slurp(out2 / "error_table.csv"));
    CHECK(slurp(out1 / "converge_summary.csv") == slurp(out2 / "converge_summary.csv"));
    CHECK(!slurp(out1 / "error_table.csv").empty());

    // Same command twice: byte-identical outputs.
    const auto out3 = dir / "out3";
    CHECK(run_cli("--config " + cfg_path.string() + " --out " + out3.string() +
                  " --workers 4") == 0);
    CHECK(slurp(out2 / "error_table.csv") == slurp(out3 / "error_table.csv"));
}

TEST_CASE("cli malliavin smoke run") {
    const fs::path dir = temp_dir("cli_mall");
    const fs::path cfg_path = dir / "run.json";
    write_file(cfg_path,
               "{\"experiment\": \"malliavin\", " + model_json() +
                   ", \"seed\": 5, \"malliavin\": {\"T\": 0.5, \"h_list\": [0.0625, 0.03125], "
                   "\"n_paths\": 8, \"fd_states\": 5, \"det_draws\": 200}}");
    const auto out = dir / "out";
    CHECK(run_cli("--config " + cfg_path.string() + " --out " + out.string() + " --check") == 0);
    const auto rows = read_csv((out / "malliavin_diagnostics.csv").string());
    CHECK(rows.size() > 100);
    CHECK(rows[0][3] == "lambda_min");
}
