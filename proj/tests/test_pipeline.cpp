#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtlfault/errors.hpp"
#include "mtlfault/pipeline.hpp"

using namespace mtlfault;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A reduced configuration that runs in a second or two.
PipelineConfig small_config() {
  PipelineConfig c = parse_config(R"({
    "datasets": [
      {"name": "ohl", "section": 0, "start_km": 10, "step_km": 10, "count": 20, "window": "auto"},
      {"name": "ugc", "section": 1, "start_km": 0.5, "step_km": 0.5, "count": 20, "window": "auto"}
    ],
    "render": {"width": 128, "height": 128},
    "models": [
      {"name": "ff_lm", "family": "mlp", "max_epochs": 30},
      {"name": "ols", "family": "linear", "variant": "ols"},
      {"name": "tree", "family": "tree", "min_leaf": 2},
      {"name": "gpr", "family": "gpr", "kernel": "matern52", "max_evaluations": 200}
    ]
  })");
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MTLFAULT_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("stage names") {
  CHECK(parse_stages("eval,simulate") == std::vector<Stage>{Stage::kSimulate, Stage::kEval});
  CHECK_THROWS_AS(parse_stages("simulate,paint"), ValidationError);
  CHECK(scenario_id("ugc", 7) == "ugc_007");
  CHECK(dataset_of("my_set_012") == "my_set");
}

TEST_CASE("full run writes every artifact and reruns are byte-identical") {
  const PipelineConfig cfg = small_config();
  const fs::path out = fresh_dir("mtlfault_pipeline_a");
  const RunManifest m = run_pipeline(cfg, all_stages(), out);
  REQUIRE(m.stages.size() == 5);
  for (const auto& s : m.stages) {
    for (const auto& a : s.artifacts) CHECK(fs::exists(out / a));
  }
  CHECK(fs::exists(out / "images/ohl/ohl_019.pgm"));
  CHECK(fs::exists(out / "loci/ugc/ugc_000.csv"));
  const auto rows = read_features_csv(out / "features.csv");
  CHECK(rows.size() == 40);
  CHECK(rows[0].target_norm == doctest::Approx(10.0 / 200.0));
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report["datasets"].size() == 2);
  CHECK(report["datasets"][0]["models"].size() + report["datasets"][0]["failed"].size() == 4);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["content_hash"] == m.content_hash);
  CHECK(manifest["config_hash"] == config_hash(cfg));

  const std::string report_before = slurp(out / "report.json");
  const std::string model_before = slurp(out / "models/ohl/ff_lm.model");
  const RunManifest again = run_pipeline(cfg, {Stage::kEval}, out);
  CHECK(slurp(out / "report.json") == report_before);
  CHECK(slurp(out / "models/ohl/ff_lm.model") == model_before);
  CHECK(again.stages.size() == 1);

  const fs::path out2 = fresh_dir("mtlfault_pipeline_b");
  const RunManifest m2 = run_pipeline(cfg, all_stages(), out2);
  CHECK(m2.content_hash == m.content_hash);
  CHECK(slurp(out2 / "features.csv") == slurp(out / "features.csv"));
  fs::remove_all(out2);

  // Deleting downstream artifacts leaves upstream outputs unchanged on rerun.
  const std::string features_before = slurp(out / "features.csv");
  fs::remove_all(out / "models");
  fs::remove(out / "report.json");
  run_pipeline(cfg, {Stage::kFeatures, Stage::kTrain, Stage::kEval}, out);
  CHECK(slurp(out / "features.csv") == features_before);
  CHECK(slurp(out / "report.json") == report_before);
  fs::remove_all(out);
}

TEST_CASE("thread count does not change outputs") {
  const PipelineConfig cfg = small_config();
  const fs::path a = fresh_dir("mtlfault_threads_1");
  const fs::path b = fresh_dir("mtlfault_threads_4");
  const std::vector<Stage> early{Stage::kSimulate, Stage::kRender, Stage::kFeatures};
  setenv("MTLFAULT_THREADS", "1", 1);
  run_pipeline(cfg, early, a);
  setenv("MTLFAULT_THREADS", "4", 1);
  run_pipeline(cfg, early, b);
  unsetenv("MTLFAULT_THREADS");
  CHECK(slurp(a / "features.csv") == slurp(b / "features.csv"));
  CHECK(slurp(a / "images/ugc/ugc_003.pgm") == slurp(b / "images/ugc/ugc_003.pgm"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("missing upstream artifacts name the stage to run") {
  const fs::path out = fresh_dir("mtlfault_pipeline_missing");
  try {
    run_pipeline(small_config(), {Stage::kTrain}, out);
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("'features'") != std::string::npos);
  }
  try {
    run_pipeline(small_config(), {Stage::kRender}, out);
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("'simulate'") != std::string::npos);
  }
  fs::remove_all(out);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = fresh_dir("mtlfault_cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << R"({"line": {"sectionss": []}})";
    std::ofstream(dir / "ok.json") << R"({"datasets": [{"name": "u", "section": 1, "start_km": 1, "step_km": 1, "count": 5}],
      "render": {"width": 64, "height": 64}})";
  }
  CHECK(run_cli("info") == 0);
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string()) == 1);
  CHECK(run_cli("simulate --no-such-flag") == 1);
  CHECK(run_cli("pipeline --stages simulate,paint") == 1);
  CHECK(run_cli("train --config " + (dir / "ok.json").string() + " --out " + (dir / "run").string()) == 2);
  CHECK(run_cli("pipeline --stages simulate,render,features --config " + (dir / "ok.json").string() + " --out " +
                (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "features.csv"));
  fs::remove_all(dir);
}
