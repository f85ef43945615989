#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vfa/image.hpp"
#include "vfa/runconfig.hpp"

using namespace vfa;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = VFA_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vfa_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  auto bytes = read_file(p.string());
  return std::string(bytes.begin(), bytes.end());
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// one demo workspace with a fast config, shared by the cases below
fs::path setup_demo(const TempDir& tmp, int steps = 8) {
  REQUIRE(run("init-demo --out " + (tmp.path / "demo").string() + " --seed 5") == 0);
  fs::path cfg_path = tmp.path / "demo" / "config.json";
  json cfg = read_json(cfg_path);
  cfg["attack"]["steps"] = steps;
  std::ofstream(cfg_path) << cfg.dump(2);
  return cfg_path;
}

}  // namespace

TEST_CASE("init-demo creates a runnable workspace") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp);
  CHECK(fs::exists(tmp.path / "demo" / "registry.json"));
  CHECK(fs::exists(tmp.path / "demo" / "weights" / "toy-a.vfw"));
  CHECK(fs::exists(tmp.path / "demo" / "dataset.jsonl"));
  CHECK(fs::exists(tmp.path / "demo" / "images" / "img-0.png"));

  // config round-trips losslessly through serialization
  RunConfig parsed = config_from_json(read_json(cfg));
  json again = config_to_json(parsed);
  RunConfig parsed2 = config_from_json(again);
  CHECK(config_to_json(parsed2) == again);
}

TEST_CASE("attack: three records produce images, traces, manifest; re-runs skip") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp);
  REQUIRE(run("attack --config " + cfg.string() + " --dump-masks") == 0);

  fs::path out = tmp.path / "demo" / "out";
  for (const char* id : {"img-0", "img-1", "img-2"}) {
    CHECK(fs::exists(out / "adv" / (std::string(id) + ".png")));
    CHECK(fs::exists(out / "trace" / (std::string(id) + ".json")));
    CHECK(fs::exists(out / "masks" / (std::string(id) + ".json")));
  }
  json manifest = read_json(out / "manifest.json");
  CHECK(manifest.contains("config_sha256"));
  CHECK(manifest.contains("weight_sha256"));
  CHECK(manifest.contains("record_seeds"));
  CHECK(manifest["resampling"] == "bilinear");

  // idempotent re-run: adversarial bytes unchanged without --force
  auto before = read_file((out / "adv" / "img-0.png").string());
  auto t_before = fs::last_write_time(out / "adv" / "img-0.png");
  REQUIRE(run("attack --config " + cfg.string()) == 0);
  auto after = read_file((out / "adv" / "img-0.png").string());
  CHECK(before == after);
  CHECK(fs::last_write_time(out / "adv" / "img-0.png") == t_before);

  // budget holds on the saved rasters (16-bit demo config)
  json dataset_line;
  Image adv = load_image((out / "adv" / "img-0.png").string());
  Image orig = load_image((tmp.path / "demo" / "images" / "img-0.png").string());
  double linf = 0;
  for (size_t i = 0; i < adv.data.size(); ++i)
    linf = std::max(linf, std::abs(adv.data[i] - orig.data[i]));
  CHECK(linf <= 16.0 / 255.0 + 1.0 / 65535.0);
}

TEST_CASE("attack: --jobs parallelism yields the same bytes as serial") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp, 4);
  REQUIRE(run("attack --config " + cfg.string()) == 0);
  fs::path out = tmp.path / "demo" / "out";
  auto serial = read_file((out / "adv" / "img-1.png").string());

  fs::remove_all(out);
  REQUIRE(run("attack --config " + cfg.string() + " --jobs 3") == 0);
  auto parallel = read_file((out / "adv" / "img-1.png").string());
  CHECK(serial == parallel);
}

TEST_CASE("attack: invalid epsilon fails before any work") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp);
  json doc = read_json(cfg);
  doc["attack"]["epsilon"] = 1.5;
  std::ofstream(cfg.string()) << doc.dump(2);
  CHECK(run("attack --config " + cfg.string()) != 0);
  CHECK(!fs::exists(tmp.path / "demo" / "out" / "adv" / "img-0.png"));
}

TEST_CASE("analyze: report plus plots, and plots re-render identically from JSON") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp);
  REQUIRE(run("analyze --config " + cfg.string()) == 0);

  fs::path dir = tmp.path / "demo" / "out" / "analysis";
  json report = read_json(dir / "report.json");
  CHECK(report["entropy_x"].size() == 2);  // toy depth
  CHECK(report["entropy_v"].size() == 2);
  CHECK(report["maps_v"].contains("dog"));

  CHECK(fs::exists(dir / "entropy_layers.png"));
  CHECK(fs::exists(dir / "align_v_dog.png"));
  CHECK(fs::exists(dir / "align_x_dog.png"));
  CHECK(fs::exists(dir / "token_norms.png"));

  auto first = read_file((dir / "align_v_dog.png").string());
  fs::remove(dir / "align_v_dog.png");
  REQUIRE(run("analyze --config " + cfg.string()) == 0);
  auto second = read_file((dir / "align_v_dog.png").string());
  CHECK(first == second);
}

TEST_CASE("evaluate --offline: canned responses, rubric scores, report") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp);
  REQUIRE(run("attack --config " + cfg.string()) == 0);
  REQUIRE(run("evaluate --offline --config " + cfg.string()) == 0);

  fs::path dir = tmp.path / "demo" / "out" / "eval";
  CHECK(fs::exists(dir / "responses.jsonl"));
  CHECK(fs::exists(dir / "verdicts.jsonl"));
  json report = read_json(dir / "report.json");

  // demo canned replies: cap always names the target -> ASR 1.0;
  // vqa per record scores {1, 0, 0.5} -> record mean 0.5
  bool saw_cap = false, saw_vqa = false;
  for (const auto& row : report["asr"]) {
    if (row["defense"] != "none") continue;
    if (row["task"] == "cap") {
      CHECK(row["asr"].get<double>() == doctest::Approx(1.0));
      saw_cap = true;
    }
    if (row["task"] == "vqa") {
      CHECK(row["asr"].get<double>() == doctest::Approx(0.5));
      CHECK(row["asr_per_question"].get<double>() == doctest::Approx(0.5));
      saw_vqa = true;
    }
  }
  CHECK(saw_cap);
  CHECK(saw_vqa);
  CHECK(report["imperceptibility"]["images"] == 3);
  CHECK(report["imperceptibility"]["mean_l1"].get<double>() <= 16.0 / 255.0 + 1e-6);

  // defense sweep present: none + blur + jpeg + dropout, cap+vqa each
  CHECK(report["asr"].size() == 8);
}

TEST_CASE("evaluate: --defense restricts the sweep; none equals absent defense") {
  TempDir tmp;
  fs::path cfg = setup_demo(tmp, 4);
  REQUIRE(run("attack --config " + cfg.string()) == 0);

  REQUIRE(run("evaluate --offline --config " + cfg.string() + " --defense none") == 0);
  json with_none = read_json(tmp.path / "demo" / "out" / "eval" / "report.json");

  json doc = read_json(cfg);
  doc["evaluate"]["defenses"] = json::array();  // absent defense list
  std::ofstream(cfg.string()) << doc.dump(2);
  REQUIRE(run("evaluate --offline --config " + cfg.string()) == 0);
  json absent = read_json(tmp.path / "demo" / "out" / "eval" / "report.json");

  CHECK(with_none["asr"] == absent["asr"]);
}

TEST_CASE("render-prompt prints the templates") {
  TempDir tmp;
  std::string out_file = (tmp.path / "prompt.txt").string();
  std::string cmd = kCli + " render-prompt --kind similar-object --object bulldog > " + out_file + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  std::string text = slurp(out_file);
  CHECK(text.find("raccoon: A gray-brown furry mammal") != std::string::npos);
  CHECK(text.find("bulldog") != std::string::npos);

  cmd = kCli + " render-prompt --kind judge --response \"a cat\" --original dog --target cat > " +
        out_file + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  text = slurp(out_file);
  CHECK(text.find("Output ONLY the number 0, 0.5, or 1") != std::string::npos);
}

TEST_CASE("gen-surrogate writes a loadable weights file") {
  TempDir tmp;
  std::string w = (tmp.path / "toy.vfw").string();
  REQUIRE(run("gen-surrogate --out " + w + " --seed 3 --depth 3") == 0);
  auto loaded = load_weights(w);
  CHECK(loaded.vision.cfg.depth == 3);
}
