#include <cstdlib>
#include <sys/wait.h>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/cli/pipeline.hpp"
#include "frforge/common/error.hpp"

using namespace frforge;
using namespace frforge::cli;

namespace {

struct Outcome {
  int status;
  std::string output;
};

Outcome run_cli(const std::string& args, const fixtures::TempDir& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(FRFORGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_text_file(log)};
}

}  // namespace

TEST_CASE("run configuration is strict") {
  CHECK_NOTHROW(run_config_from_json(Json::object()));
  const auto round = run_config_from_json(Json::parse(run_config_to_json(RunConfig{}).dump()));
  CHECK(run_config_to_json(round) == run_config_to_json(RunConfig{}));
  CHECK_THROWS_AS(run_config_from_json(Json{{"sed", 3}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"train", {{"epochs", "3"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"eval", {{"split", "test"}}}}), ConfigError);
  try {
    run_config_from_json(Json{{"corpus", {{"sizee", 10}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sizee") != std::string::npos);
  }
}

TEST_CASE("stages name the missing producer") {
  fixtures::TempDir dir("stages");
  const RunPaths paths{dir.path()};
  const RunConfig config;
  try {
    stage_train(config, paths);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("build-dataset") != std::string::npos);
  }
  write_text_file(paths.dataset() / "dataset.meta.json", "{}");
  try {
    stage_evaluate(config, paths);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("detect") != std::string::npos);
  }
}

TEST_CASE("command-line exit codes") {
  fixtures::TempDir dir("cli");
  write_text_file(dir / "run" / "dataset" / "dataset.meta.json", "{}");
  auto out = run_cli("-q -d " + (dir / "run").string() + " evaluate", dir);
  CHECK(out.status == 2);
  CHECK(out.output.find("detect") != std::string::npos);

  write_text_file(dir / "bad.json", R"({"train":{"epochs":0}})");
  out = run_cli("-q -c " + (dir / "bad.json").string() + " --print-config gen-corpus", dir);
  CHECK(out.status == 2);

  out = run_cli("frobnicate", dir);
  CHECK(out.status == 2);

  out = run_cli("--print-config gen-corpus", dir);
  CHECK(out.status == 0);
  CHECK(Json::parse(out.output).at("seed") == 7);
}
