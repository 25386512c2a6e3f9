#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfim/harness.hpp"

using namespace rfim;

TEST_CASE("config validation rejects bad input before any computation") {
    ExperimentConfig config;
    config.replicas = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = ExperimentConfig{};
    config.engine = "magic";
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = ExperimentConfig{};
    config.scales = {2, 2};
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = ExperimentConfig{};
    config.kind = ExperimentKind::Mandelbrot;
    config.removal_p = 1.5;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = ExperimentConfig{};
    config.kind = ExperimentKind::Avalanche;
    config.h_min = 2.0;
    config.h_max = -2.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("config hash covers numeric inputs and ignores threads/out") {
    ExperimentConfig a;
    ExperimentConfig b = a;
    CHECK(a.hash() == b.hash());
    b.threads = 8;
    b.out_dir = "elsewhere";
    CHECK(a.hash() == b.hash());
    b = a;
    b.params.epsilon = 1.25;
    CHECK(a.hash() != b.hash());
    b = a;
    b.base_seed = 99;
    CHECK(a.hash() != b.hash());
    b = a;
    b.scales = {1, 2, 4, 8};
    CHECK(a.hash() != b.hash());
}

TEST_CASE("identical configs yield byte-identical csv bodies") {
    ExperimentConfig config;
    config.kind = ExperimentKind::MScan;
    config.scales = {1, 2};
    config.replicas = 40;
    config.base_seed = 11;
    config.threads = 2;
    auto first = run(config);
    auto second = run(config);
    CHECK(render_csv(first) == render_csv(second));
    CHECK(render_summary_json(first) == render_summary_json(second));
    CHECK(first.config_hash == second.config_hash);
}

TEST_CASE("experiment kinds round-trip by name") {
    for (auto kind : {ExperimentKind::MScan, ExperimentKind::Tension, ExperimentKind::Variance,
                      ExperimentKind::Covariance, ExperimentKind::PosT, ExperimentKind::Curdle,
                      ExperimentKind::Mandelbrot, ExperimentKind::HighDisorder,
                      ExperimentKind::Avalanche})
        CHECK(experiment_kind_from(to_string(kind)) == kind);
    CHECK_THROWS(experiment_kind_from("nonsense"));
}

TEST_CASE("tension experiment reports the bound verdict") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Tension;
    config.scales = {1};
    config.replicas = 60;
    config.base_seed = 5;
    config.threads = 2;
    config.check_identity = true;
    auto record = run(config);
    REQUIRE(record.verdicts.size() == 2);
    CHECK(record.verdicts[0].verdict == Verdict::Pass);
    CHECK(record.verdicts[1].verdict == Verdict::Pass);
    CHECK(record.failed_replicas.empty());
    bool has_tension_row = false;
    for (const auto& row : record.rows)
        if (row.statistic == "tension_mean") has_tension_row = true;
    CHECK(has_tension_row);
}

TEST_CASE("outputs are written atomically with the frozen csv schema") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Mandelbrot;
    config.removal_p = 0.4;
    config.levels = 2;
    config.replicas = 50;
    config.threads = 1;
    auto dir = std::filesystem::temp_directory_path() / "rfim-harness-test";
    std::filesystem::remove_all(dir);
    config.out_dir = dir.string();
    auto record = run(config);
    write_outputs(record);

    std::ifstream csv(dir / "results.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "scale,statistic,mean,std_err,replicas,seed,params_hash");

    std::ifstream summary(dir / "summary.json");
    REQUIRE(summary.good());
    std::stringstream body;
    body << summary.rdbuf();
    CHECK(body.str() == render_summary_json(record));
    CHECK(body.str().find("schema_version") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "run.log"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("curdle experiment emits layered grids") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Curdle;
    config.max_level = 2;
    config.replicas = 3;
    config.params.epsilon = 8.0;
    config.threads = 1;
    auto record = run(config);
    CHECK(!record.grid_text.empty());
    CHECK(record.verdicts.size() == 1);
    CHECK(record.verdicts[0].verdict == Verdict::Pass);
}

TEST_CASE("avalanche experiment verdicts depend on grid coverage") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Avalanche;
    config.scales = {2};
    config.replicas = 5;
    config.h_min = -12.0;
    config.h_max = 12.0;
    config.h_steps = 31;
    config.threads = 2;
    auto record = run(config);
    REQUIRE(record.verdicts.size() == 1);
    CHECK(record.verdicts[0].verdict == Verdict::Pass);

    config.h_min = -0.5;
    config.h_max = 0.5;
    auto partial = run(config);
    CHECK(partial.verdicts[0].verdict == Verdict::Inconclusive);
}

TEST_CASE("spin configs export as JSON arrays with region metadata") {
    Region region = Region::ball({0, 0}, 1);
    SpinConfig config{region, {1, -1, 1, 1, -1}};
    auto text = spin_config_json(config);
    CHECK(text.find("\"region\"") != std::string::npos);
    CHECK(text.find("ball:center=(0,0):radius=1") != std::string::npos);
    CHECK(text.find("[1,-1,1,1,-1]") != std::string::npos);
}
