#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <sys/wait.h>

#include "hprobe/dataset.hpp"
#include "hprobe/io.hpp"

namespace fs = std::filesystem;
using namespace hprobe;

namespace {

struct Result {
  int code = -1;
  std::string err;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hprobe_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(const std::string& args, const fs::path& store) {
  const fs::path tmp = store / ".cli_out";
  const std::string cmd = "HPROBE_STORE='" + store.string() + "' '" HPROBE_CLI "' " + args + " >'" + tmp.string() +
                          ".o' 2>'" + tmp.string() + ".e'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(tmp.string() + ".o");
  r.err = read_file(tmp.string() + ".e");
  return r;
}

void expect_error(const Result& r, int code, const std::string& kind) {
  CHECK(r.code == code);
  REQUIRE(!r.err.empty());
  CHECK(r.err.find('\n') == r.err.size() - 1);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.at("error") == kind);
  CHECK(j.at("exit") == code);
}

}  // namespace

TEST_CASE("help on every subcommand exits 0 and lists its flags") {
  const fs::path store = scratch("help");
  const std::map<std::string, std::vector<std::string>> flags{
      {"create-dataset", {"--setting", "--depth-range", "--steps-range", "--num-samples", "--seed", "--sparsity"}},
      {"synth", {"--tag", "--layers", "--preset", "--dim", "--noise"}},
      {"eval-probe", {"--proj-dims", "--layers", "--pca-dim", "--train-split", "--seed", "--pca-sweep"}},
      {"intervene", {"--ablation-kind", "--proj-dim", "--include-rescue", "--layers"}},
      {"similarity", {"--folds", "--pca-dim", "--train-split", "--layers"}},
      {"grid", {"--grid-p", "--grid-lr", "--grid-steps"}},
      {"report", {"--proj-dim", "--out", "--store"}},
  };
  for (const auto& [cmd, expected] : flags) {
    CAPTURE(cmd);
    const Result r = run(cmd + " --help", store);
    CHECK(r.code == 0);
    for (const auto& f : expected) CHECK(r.out.find(f) != std::string::npos);
  }
  CHECK(run("--help", store).code == 0);
}

TEST_CASE("errors are single-line JSON with the documented exit codes") {
  const fs::path store = scratch("errors");
  expect_error(run("create-dataset --no-such-flag", store), 2, "usage");
  expect_error(run("intervene --bases-only --include-rescue", store), 2, "usage");
  expect_error(run("synth --preset pca-sweep --dim 64", store), 2, "usage");
  expect_error(run("eval-probe", store), 2, "usage");  // no dataset yet
  expect_error(run("create-dataset --setting graph", store), 2, "usage");

  fs::create_directories(store / "tree");
  write_file_atomic(store / "tree" / "dataset.jsonl", "{not json\n");
  expect_error(run("synth", store), 3, "data_integrity");

  REQUIRE(run("create-dataset --num-samples 40 --seed 1", store).code == 0);
  REQUIRE(run("synth --dim 32 --layers 0 --seed 1", store).code == 0);
  expect_error(run("eval-probe --proj-dims 2 --lr 1e30 --steps 50", store), 4, "numerical");
  expect_error(run("eval-probe --layers 7", store), 2, "usage");
}

TEST_CASE("create-dataset balances step counts") {
  const fs::path store = scratch("balance");
  const Result r = run("create-dataset --setting tree --depth-range 1 2 --steps-range 1 2 --num-samples 1000 --seed 7",
                       store);
  REQUIRE(r.code == 0);
  const auto examples = read_dataset(store / "tree" / "dataset.jsonl");
  CHECK(examples.size() == 1000);
  std::map<int, int> steps;
  for (const auto& e : examples) steps[e.steps]++;
  CHECK(steps[1] == 500);
  CHECK(steps[2] == 500);
}

TEST_CASE("reruns reproduce dataset and probe artifacts byte for byte") {
  const fs::path store = scratch("rerun");
  const std::vector<std::string> files{"tree/dataset.jsonl",          "tree/oracle/activations.hpak",
                                       "tree/oracle/0/pca.json",       "tree/oracle/0/depth.json",
                                       "tree/oracle/0/distance_p2.json", "tree/oracle/0/distance_p3.json",
                                       "tree/oracle/0/eval.json"};
  const auto pipeline = [&] {
    REQUIRE(run("create-dataset --num-samples 120 --seed 5", store).code == 0);
    REQUIRE(run("synth --dim 48 --layers 0 1 --seed 5", store).code == 0);
    REQUIRE(run("eval-probe --proj-dims 2 3 --steps 200 --seed 5", store).code == 0);
    std::map<std::string, std::string> bytes;
    for (const auto& f : files) bytes[f] = read_file(store / f);
    return bytes;
  };
  const auto first = pipeline();
  const auto second = pipeline();
  for (const auto& f : files) {
    CAPTURE(f);
    CHECK(!first.at(f).empty());
    CHECK(first.at(f) == second.at(f));
  }

  // The manifest lists every output and the inputs' hashes.
  int manifests = 0;
  for (const auto& e : fs::directory_iterator(store / "manifests")) {
    const auto m = nlohmann::json::parse(read_file(e.path()));
    for (const auto& k : {"command", "config", "config_hash", "inputs", "seed", "tool_version", "outputs", "wall_time_s"}) {
      CHECK(m.contains(k));
    }
    for (const auto& out : m.at("outputs")) CHECK(fs::exists(out.get<std::string>()));
    if (m.at("command") == "eval-probe") {
      CHECK(m.at("outputs").size() == 2 * 5);  // per layer: pca, depth, two distance probes, eval
    }
    ++manifests;
  }
  CHECK(manifests == 3);
}
