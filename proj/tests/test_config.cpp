#include <doctest.h>

#include "mtlfault/config.hpp"
#include "mtlfault/errors.hpp"

using namespace mtlfault;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config equals the documented defaults") {
  const PipelineConfig c = parse_config("{}");
  const PipelineConfig d = PipelineConfig::defaults();
  CHECK(to_json(c) == to_json(d));
  CHECK(c.seed == 1);
  CHECK(c.line.sections.size() == 3);
  CHECK(c.datasets.size() == 2);
  CHECK(c.datasets[0].count == 40);
  CHECK(c.datasets[1].count == 50);
  CHECK(c.models.size() == 17);
  CHECK(c.glcm.levels == 8);
  CHECK(c.split.test_every == 5);
  CHECK(c.warnings.empty());
}

TEST_CASE("resolved json parses back to the same config") {
  const PipelineConfig c = PipelineConfig::defaults();
  CHECK(to_json(parse_config(to_json(c))) == to_json(c));
  CHECK(config_hash(parse_config(to_json(c))) == config_hash(c));
}

TEST_CASE("overrides are applied and comments allowed") {
  const PipelineConfig c = parse_config(R"({
    // a comment
    "seed": 7,
    "line": {"sections": [{"kind": "OHL", "length_km": 100}, {"kind": "UGC", "length_km": 5, "params": {"x1": 0.25}}]},
    "datasets": [{"name": "a", "section": 1, "start_km": 0.5, "step_km": 0.5, "count": 10, "window": "auto"}],
    "models": [{"name": "t", "family": "tree", "min_leaf": 3}]
  })");
  CHECK(c.seed == 7);
  CHECK(c.line.sections[1].params.x1 == 0.25);
  CHECK(c.line.sections[1].params.c1_nf == 300.0);
  CHECK(c.datasets[0].auto_window);
  CHECK(c.models.size() == 1);
  CHECK(c.models[0].min_leaf == 3);
  CHECK(config_hash(c) != config_hash(PipelineConfig::defaults()));
}

TEST_CASE("unknown keys are named") {
  CHECK(error_of(R"({"line": {"sectionss": []}})").find("line.sectionss") != std::string::npos);
  CHECK(error_of(R"({"models": [{"name": "x", "family": "tree", "leaf": 3}]})").find("models[0].leaf") !=
        std::string::npos);
}

TEST_CASE("type and value errors name the field") {
  CHECK(error_of(R"({"seed": "one"})").find("seed") != std::string::npos);
  CHECK(error_of(R"({"glcm": {"levels": 1}})").find("glcm.levels") != std::string::npos);
  CHECK(error_of(R"({"models": [{"name": "x", "family": "svm"}]})").find("family") != std::string::npos);
  CHECK(error_of(R"({"datasets": [{"name": "a", "section": 0, "start_km": 5, "step_km": 5, "count": 41}]})")
            .find("index 40") != std::string::npos);
}

TEST_CASE("syntax errors report the line") {
  const std::string e = error_of("{\n  \"seed\": 1,\n  \"output_dir\": \"x\"\n  \"oops\": 2\n}");
  CHECK(e.find("line 4") != std::string::npos);
}

TEST_CASE("ratio violations are warnings") {
  const PipelineConfig c = parse_config(R"({"line": {"sections": [
    {"kind": "OHL", "length_km": 200}, {"kind": "UGC", "length_km": 10, "params": {"x1": 0.39}},
    {"kind": "OHL", "length_km": 50}]}})");
  REQUIRE(c.warnings.size() == 1);
  CHECK(c.warnings[0].find("x1") != std::string::npos);
}

TEST_CASE("auto window covers the dataset's fault points") {
  const PipelineConfig c = PipelineConfig::defaults();
  const ViewWindow w = c.window_for(c.datasets[1]);
  CHECK(w.r_min < w.r_max);
  CHECK(w.x_max - w.x_min < 10.0);
  CHECK(w.x_min > 70.0);
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const PipelineConfig c = load_config(std::string(MTLFAULT_SOURCE_DIR) + "/configs/default.json");
  CHECK(config_hash(c) == config_hash(PipelineConfig::defaults()));
}
