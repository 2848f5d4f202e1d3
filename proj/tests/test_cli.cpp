#include <doctest.h>

#include "immtsf/cli.hpp"
#include "immtsf/io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "immtsf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = immtsf::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// A small text-informative dataset shared by the tests below.
const fs::path& synth_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "immtsf_cli_synth";
    fs::remove_all(d);
    const auto r = run({"synth", "--kind", "text-informative", "--out", d.string(), "--periods", "40", "--seed", "3"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string manifest() { return (synth_dir() / "manifest.json").string(); }

}  // namespace

TEST_CASE("usage errors exit with status 1") {
  auto r = run({"profile", "--no-such-flag"});
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  r = run({"profile", "--manifest", "/nonexistent/m.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(run({"compare", "--manifest", manifest(), "--variant-mmf", "none"}).code == 1);
  CHECK(run({"train", "--manifest", manifest(), "--kappa", "-1", "--variant-mmf", "xattn-add", "--max-epochs", "1"}).code == 1);
}

TEST_CASE("synth output loads back") {
  const auto numeric = immtsf::io::load_numeric(synth_dir() / "numeric.csv");
  const auto text = immtsf::io::load_text(synth_dir() / "text.jsonl", 4);
  CHECK(numeric.items.size() == 2);
  CHECK(text.items.size() == 2);
  CHECK(text.items[0].records.size() == 39);
}

TEST_CASE("profile prints one row per dataset") {
  const auto table = run({"profile", "--manifest", manifest(), "--unit", "hours"});
  REQUIRE(table.code == 0);
  CHECK(table.out.find("synth-text-informative") != std::string::npos);
  const auto csv = run({"profile", "--manifest", manifest(), "--unit", "hours", "--csv"});
  REQUIRE(csv.code == 0);
  std::istringstream lines(csv.out);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header.rfind("dataset,", 0) == 0);
  CHECK(row.find(",hours,") != std::string::npos);
  CHECK(!std::getline(lines, extra));
}

TEST_CASE("prealign emits one JSON object per window") {
  const auto r = run({"prealign", "--manifest", manifest()});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t n = 0, width = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    if (n == 0) width = j["t"].size();
    CHECK(j["t"].size() == width);
    CHECK(j.contains("entity_id"));
    ++n;
  }
  CHECK(n > 60);
}

TEST_CASE("compare reports both errors and the improvement") {
  const std::vector<std::string> args{"compare", "--manifest", manifest(), "--seed", "7", "--variant-ttf", "recavg",
                                      "--variant-mmf", "gr-add", "--max-epochs", "20"};
  const auto a = run(args);
  REQUIRE(a.code == 0);
  const auto j = json::parse(a.out);
  for (const char* key : {"dataset", "variant", "seed", "epochs_run", "best_val_mse", "test_mse", "test_mse_unimodal",
                          "relative_improvement_pct"})
    CHECK(j.contains(key));
  CHECK(j["variant"] == "RecAvg+GR-Add");
  CHECK(j["seed"] == 7);
  const double base = j["test_mse_unimodal"], mse = j["test_mse"];
  CHECK(std::abs(j["relative_improvement_pct"].get<double>() - 100.0 * (base - mse) / base) < 1e-9);
  CHECK(j["unimodal"]["test_mse"] == j["test_mse_unimodal"]);
  CHECK(j["candidates"].size() == 1);
  CHECK(run(args).out == a.out);

  const auto table = run({"compare", "--manifest", manifest(), "--seed", "7", "--variant-ttf", "recavg", "--variant-mmf",
                          "gr-add", "--max-epochs", "2", "--table"});
  REQUIRE(table.code == 0);
  CHECK(table.out.find("selected: RecAvg+GR-Add") != std::string::npos);
}

TEST_CASE("the seed environment variable sits between the flag and the manifest") {
  const std::vector<std::string> base{"train", "--manifest", manifest(), "--variant-mmf", "gr-add", "--max-epochs", "1"};
  ::setenv("IMMTSF_SEED", "11", 1);
  const auto env = json::parse(run(base).out);
  auto flagged = base;
  flagged.insert(flagged.end(), {"--seed", "5"});
  const auto flag = json::parse(run(flagged).out);
  ::setenv("IMMTSF_SEED", "eleven", 1);
  CHECK(run(base).code == 1);
  ::unsetenv("IMMTSF_SEED");
  const auto manifest_seed = json::parse(run(base).out);
  CHECK(env["seed"] == 11);
  CHECK(flag["seed"] == 5);
  CHECK(manifest_seed["seed"] == 3);
}

TEST_CASE("train writes a checkpoint that evaluate reproduces") {
  const auto ckpt = synth_dir() / "model.json";
  const auto trained = run({"train", "--manifest", manifest(), "--variant-ttf", "t2v-xattn", "--variant-mmf", "xattn-add",
                            "--max-epochs", "4", "--seed", "2", "--out", ckpt.string()});
  REQUIRE(trained.code == 0);
  REQUIRE(fs::exists(ckpt));
  const auto evaluated = run({"evaluate", "--manifest", manifest(), "--checkpoint", ckpt.string()});
  REQUIRE(evaluated.code == 0);
  const auto a = json::parse(trained.out), b = json::parse(evaluated.out);
  CHECK(a["variant"] == "T2V-XAttn+XAttn-Add");
  CHECK(b["variant"] == a["variant"]);
  CHECK(b["test_mse"].get<double>() == a["test_mse"].get<double>());
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string exe = IMMTSF_CLI_PATH;
  const int ok = std::system((exe + " synth --help > /dev/null").c_str());
  const int bad = std::system((exe + " synth --bogus > /dev/null 2>&1").c_str());
  REQUIRE(WIFEXITED(ok));
  REQUIRE(WIFEXITED(bad));
  CHECK(WEXITSTATUS(ok) == 0);
  CHECK(WEXITSTATUS(bad) == 1);
}
