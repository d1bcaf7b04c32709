#include <doctest.h>

#include <fstream>

#include "rlihf/config.hpp"
#include "rlihf/errors.hpp"
#include "test_util.hpp"

using namespace rlihf;
using nlohmann::json;

TEST_CASE("defaults resolve and round-trip through JSON") {
  const ExperimentConfig cfg = resolve_config(json::object());
  CHECK(cfg.scene.arm.num_links() == 3);
  CHECK(cfg.sac.gamma == 0.99);
  CHECK(cfg.sac.batch_size == 256);
  CHECK(cfg.sac.terminal_value == 100.0);
  CHECK(cfg.sweep.alphas.size() == 6);
  CHECK(cfg.loso.subjects.empty());
  const ExperimentConfig again = resolve_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(to_json(cfg)["loso"]["subjects"] == "all");
}

TEST_CASE("overrides apply after the document") {
  const json doc = {{"alpha", 0.1}, {"sac", {{"hidden_sizes", {16}}}}};
  const ExperimentConfig cfg =
      resolve_config(doc, {"alpha=0.4", "feedback.observer.tpr=0.7", "sweep.subjects=[\"S01\",\"S03\"]",
                           "sweep.alphas.0=0.05", "output_dir=out dir"});
  CHECK(cfg.alpha == 0.4);
  CHECK(cfg.sac.hidden_sizes == std::vector<int>{16});
  CHECK(cfg.feedback.observer.tpr == 0.7);
  CHECK(cfg.sweep.subjects == std::vector<std::string>{"S01", "S03"});
  CHECK(cfg.sweep.alphas.front() == 0.05);
  CHECK(cfg.output_dir == "out dir");
  CHECK(resolve_config(json::object(), {"sweep.subjects=all"}).sweep.subjects.empty());
}

TEST_CASE("errors name the offending field") {
  auto fails_with = [](const json& doc, std::vector<std::string> ov, const std::string& needle) {
    CHECK_THROWS_WITH_AS(resolve_config(doc, ov), doctest::Contains(needle.c_str()), ConfigError);
  };
  fails_with(json{{"alpah", 0.3}}, {}, "alpah");
  fails_with(json{{"sac", {{"gama", 0.9}}}}, {}, "sac.gama");
  fails_with(json::object(), {"sac.nope=1"}, "sac.nope");
  fails_with(json::object(), {"alpha=-0.1"}, "alpha");
  fails_with(json{{"alpha", "high"}}, {}, "alpha");
  fails_with(json::object(), {"feedback.source=psychic"}, "feedback.source");
  fails_with(json::object(), {"sweep.subjects=[]"}, "sweep.subjects");
  fails_with(json::object(), {"loso.subjects=[\"S01\",\"S01\"]"}, "loso.subjects");
  fails_with(json::object(), {"sweep.alphas=[0.1,0.1]"}, "sweep.alphas");
  fails_with(json::object(), {"feedback.observer.tnr=0.3"}, "tnr");
  fails_with(json::object(), {"total_timesteps=500"}, "total_timesteps");
  fails_with(json::object(), {"scene.preset=cube"}, "scene.preset");
  fails_with(json::object(), {"sac.terminal_value=nan"}, "sac.terminal_value");
  fails_with(json::object(), {"noequals"}, "noequals");
  fails_with(json::array(), {}, "top level");
}

TEST_CASE("spatial preset swaps the scene") {
  const ExperimentConfig cfg = resolve_config(json::object(), {"scene.preset=spatial7"});
  CHECK(cfg.scene.arm.num_links() == 7);
  CHECK(cfg.scene.arm.spatial);
}

TEST_CASE("config files load and report parse errors") {
  TempDir dir;
  std::ofstream(dir.path / "ok.json") << R"({"alpha": 0.2, "seed": 3})";
  const ExperimentConfig cfg = load_config(dir.path / "ok.json", {"seed=4"});
  CHECK(cfg.alpha == 0.2);
  CHECK(cfg.seed == 4);
  std::ofstream(dir.path / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir.path / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path / "missing.json"), ConfigError);
}
