#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const std::string kSecret = "000102030405060708090a0b0c0d0e0f";

struct Workdir {
  fs::path root;
  explicit Workdir(const std::string& name) : root(fs::temp_directory_path() / ("spdmark_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
  std::string operator/(const std::string& f) const { return (root / f).string(); }
};

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SPDMARK_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return Json::parse(in);
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("key to verdict over files") {
  Workdir w("flow");
  REQUIRE(run("keygen --seed 5 --out " + (w / "key.json")) == 0);
  CHECK(read_json(w / "key.json")["config"]["M"] == 28);
  REQUIRE(run("schedule --key " + (w / "key.json") + " --secret " + kSecret + " --frames 25 --out " +
              (w / "schedule.json")) == 0);
  CHECK(read_json(w / "schedule.json")["frames"].size() == 25);

  REQUIRE(run("attack --schedule " + (w / "schedule.json") +
              " --attack '{\"attack\":\"drop\",\"fraction\":0.5,\"seed\":2}' --out " + (w / "dropped.json")) == 0);
  CHECK(read_json(w / "dropped.json.tamper.json")["dropped"].size() == 12);
  REQUIRE(run("extract --sequence " + (w / "dropped.json") + " --channel '{\"kind\":\"bitflip\",\"q\":0.02,\"seed\":1}'" +
              " --out " + (w / "extracted.json")) == 0);

  REQUIRE(run("verify --schedule " + (w / "schedule.json") + " --extracted " + (w / "extracted.json") + " --record " +
              (w / "dropped.json.tamper.json") + " --out " + (w / "verdict.json")) == 0);
  const Json v = read_json(w / "verdict.json");
  CHECK(v["valid"] == true);
  CHECK(v["tamper"]["dropped_score"]["f1"] == 1.0);

  REQUIRE(run("diagnose --schedule " + (w / "schedule.json") + " --extracted " + (w / "extracted.json") + " --out " +
              (w / "diag.json")) == 0);
  CHECK(read_json(w / "diag.json")["tamper"]["predicted_dropped"].size() == 12);
}

TEST_CASE("exit codes") {
  Workdir w("codes");
  REQUIRE(run("keygen --seed 1 --out " + (w / "key.json")) == 0);
  REQUIRE(run("schedule --key " + (w / "key.json") + " --secret " + kSecret + " --frames 25 --out " +
              (w / "a.json")) == 0);
  REQUIRE(run("keygen --seed 2 --out " + (w / "other.json")) == 0);
  REQUIRE(run("schedule --key " + (w / "other.json") + " --secret " + kSecret + " --frames 25 --out " +
              (w / "b.json")) == 0);
  REQUIRE(run("extract --schedule " + (w / "b.json") + " --channel '{\"kind\":\"ideal\"}' --out " +
              (w / "foreign.json")) == 0);
  CHECK(run("verify --schedule " + (w / "a.json") + " --extracted " + (w / "foreign.json")) == 3);

  CHECK(run("keygen --bits 30") == 2);
  CHECK(run("schedule --key " + (w / "key.json") + " --secret 00ff") == 2);
  CHECK(run("verify --gamma-f 2 --schedule " + (w / "a.json") + " --extracted " + (w / "foreign.json")) == 2);
  CHECK(run("calibrate --trials 10") == 2);
  CHECK(run("no-such-command") == 2);
  write_file(w / "bad.json", "{broken");
  CHECK(run("keygen --config " + (w / "bad.json")) == 2);
  CHECK(run("extract --video " + (w / "missing.spdf") + " --extractor " + (w / "missing.bin")) == 4);
}

TEST_CASE("config file, environment fallback and flag precedence") {
  Workdir w("config");
  write_file(w / "cfg.json", R"({"seed": 11, "trials": 5, "null_trials": 0, "attacks": [{"attack": "none"}]})");
  REQUIRE(run("keygen --config " + (w / "cfg.json") + " --out " + (w / "k1.json")) == 0);
  REQUIRE(run("keygen --seed 11 --out " + (w / "k2.json")) == 0);
  CHECK(read_json(w / "k1.json") == read_json(w / "k2.json"));

  REQUIRE(run("keygen --out " + (w / "k3.json"), "SPDMARK_CONFIG=" + (w / "cfg.json")) == 0);
  CHECK(read_json(w / "k3.json") == read_json(w / "k1.json"));

  REQUIRE(run("keygen --seed 12 --out " + (w / "k4.json"), "SPDMARK_CONFIG=" + (w / "cfg.json")) == 0);
  CHECK(read_json(w / "k4.json") != read_json(w / "k1.json"));

  REQUIRE(run("run-pipeline --config " + (w / "cfg.json") + " --trials 3 --out " + (w / "run")) == 0);
  const Json report = read_json(w / "run/report.json");
  CHECK(report["rows"][0]["trials"] == 3);
  CHECK(read_json(w / "run/config.json")["trials"] == 3);
  CHECK(fs::exists(w / "run/0_none/verdict.json"));
}

TEST_CASE("toy video commands") {
  Workdir w("toy");
  REQUIRE(run("fit-extractor --videos 60 --frames 8 --out " + (w / "ex.bin")) == 0);
  REQUIRE(run("keygen --seed 3 --out " + (w / "key.json")) == 0);
  REQUIRE(run("schedule --key " + (w / "key.json") + " --secret " + kSecret + " --frames 12 --out " +
              (w / "s.json")) == 0);
  REQUIRE(run("embed --schedule " + (w / "s.json") + " --out " + (w / "v.spdf")) == 0);
  REQUIRE(run("attack --video " + (w / "v.spdf") + " --attack '{\"attack\":\"trim\",\"head_fraction\":0.25,\"tail_fraction\":0}' --out " +
              (w / "t.spdf")) == 0);
  CHECK(read_json(w / "t.spdf.tamper.json")["trim"]["head"] == 3);
  REQUIRE(run("extract --video " + (w / "t.spdf") + " --extractor " + (w / "ex.bin") + " --out " + (w / "x.json")) ==
          0);
  CHECK(read_json(w / "x.json")["length"] == 9);
  CHECK(run("verify --schedule " + (w / "s.json") + " --extracted " + (w / "x.json")) == 0);
}
