#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"

namespace rert::cli {
namespace {

namespace fs = std::filesystem;

const char* kSmall = R"(seed: 3
benchmark:
  task_types: 3
  reference_per_type: 60
  test_per_type: 20
  router_epochs: 40
strategies:
  - name: base
    kind: identity
  - name: ngd
    kind: ngd
    neighborhood: {k: 4}
  - name: kr
    kind: kernel_regression
    linesearch_iters: 2
sweeps:
  - strategy: ngd
    axis: k
    values: [2, 4]
)";

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("rert-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

ExperimentConfig small_config(const std::string& out) {
  auto c = parse_config(kSmall, "small.yaml");
  c.output_dir = out;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "t.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// path -> sha256 from a manifest, which also carries timestamps.
std::map<std::string, std::string> inventory(const fs::path& dir) {
  const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  std::map<std::string, std::string> files;
  for (const auto& f : m["files"]) files[f["path"]] = f["sha256"];
  return files;
}

TEST(Config, UnknownKeyNamesLine) {
  EXPECT_EQ(config_error("seed: 1\nbenchmark:\n  task_typo: 3\n"),
            "t.yaml:3: unknown key 'task_typo'");
  EXPECT_NE(config_error("strategies:\n  - name: a\n    kind: ngd\n    lr: 2\n").find("t.yaml:4"),
            std::string::npos);
  EXPECT_NE(config_error("threads: many\n").find("t.yaml:1"), std::string::npos);
}

TEST(Config, RejectsInconsistentSettings) {
  EXPECT_NE(config_error("retain_trajectories: false\nper_step_transitions: true\n"), "");
  EXPECT_NE(config_error("strategies:\n  - {name: a, kind: ngd}\n  - {name: a, kind: ngd}\n"), "");
  EXPECT_NE(config_error("sweeps:\n  - {strategy: nope, axis: k, values: [1]}\n"), "");
  EXPECT_NE(config_error("sweeps:\n  - {strategy: ngd, axis: k, values: [0]}\n"), "");
  EXPECT_NE(config_error("strategies:\n  - {name: a, kind: teleport}\n"), "");
  EXPECT_NE(config_error("benchmark: {skew_expert: 9}\n"), "");
}

TEST(Config, EmitParseRoundTrip) {
  auto c = parse_config(kSmall, "small.yaml");
  c.bench.embedding_noise_sigma = 0.1 + 0.2;  // not a short decimal
  c.strategies[1].spec.schedule.lr_max = 1.0 / 3;
  const std::string once = emit_config(c);
  const auto back = parse_config(once, "emitted");
  EXPECT_EQ(emit_config(back), once);
  EXPECT_EQ(back.bench.embedding_noise_sigma, c.bench.embedding_noise_sigma);
  EXPECT_EQ(back.strategies[1].spec.schedule.lr_max, 1.0 / 3);
  EXPECT_EQ(back.sweeps[0].values, (std::vector<std::string>{"2", "4"}));
}

TEST(Config, OverridesBeatFileValues) {
  TempDir tmp;
  std::ofstream(tmp / "c.yaml") << kSmall << "threads: 2\noutput: from-file\n";
  const auto from_file = resolve_config(tmp / "c.yaml", {});
  EXPECT_EQ(from_file.bench.seed.value, 3u);
  EXPECT_EQ(from_file.threads, 2);
  EXPECT_EQ(from_file.output_dir, "from-file");
  const auto c = resolve_config(tmp / "c.yaml", {7u, "flag-out", 4, false});
  EXPECT_EQ(c.bench.seed.value, 7u);
  EXPECT_EQ(c.threads, 4);
  EXPECT_EQ(c.output_dir, "flag-out");
  EXPECT_FALSE(c.retain_trajectories);
  EXPECT_EQ(resolve_config("", {}).strategies.size(), 5u);
}

TEST(Generate, TwiceGivesIdenticalFiles) {
  TempDir tmp;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_generate(small_config(tmp / "a"), log, err), kExitOk) << err.str();
  const auto first = inventory(tmp.path() / "a");
  ASSERT_EQ(cmd_generate(small_config(tmp / "a"), log, err), kExitOk) << err.str();
  EXPECT_EQ(first, inventory(tmp.path() / "a"));
  for (const char* f : {"model.txt", "reference.txt", "test.txt", "config.yaml"}) {
    EXPECT_TRUE(first.count(f)) << f;
  }
}

TEST(Run, TwiceIsBitIdenticalAndThreadInvariant) {
  TempDir tmp;
  std::ostringstream log, err;
  auto c = small_config(tmp / "a");
  ASSERT_EQ(cmd_run(c, std::nullopt, log, err), kExitOk) << err.str();
  const auto first = inventory(tmp.path() / "a");
  ASSERT_EQ(cmd_run(c, std::nullopt, log, err), kExitOk) << err.str();
  EXPECT_EQ(first, inventory(tmp.path() / "a"));
  for (const char* f : {"base.summary.json", "ngd.samples.jsonl", "sweep-ngd-k.json", "cost.json"}) {
    EXPECT_TRUE(first.count(f)) << f;
  }
  c.threads = 3;
  ASSERT_EQ(cmd_run(c, std::nullopt, log, err), kExitOk) << err.str();
  auto threaded = inventory(tmp.path() / "a");
  // The echoed config records the thread count; everything else must match.
  auto single = first;
  EXPECT_NE(threaded.at("config.yaml"), single.at("config.yaml"));
  threaded.erase("config.yaml");
  single.erase("config.yaml");
  EXPECT_EQ(single, threaded);
}

TEST(Run, FromGeneratedBenchMatchesInline) {
  TempDir tmp;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_generate(small_config(tmp / "bench"), log, err), kExitOk);
  ASSERT_EQ(cmd_run(small_config(tmp / "loaded"), tmp / "bench", log, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_run(small_config(tmp / "inline"), std::nullopt, log, err), kExitOk);
  const auto loaded = inventory(tmp.path() / "loaded");
  const auto inl = inventory(tmp.path() / "inline");
  EXPECT_EQ(loaded.at("ngd.summary.json"), inl.at("ngd.summary.json"));
  EXPECT_EQ(loaded.at("kr.samples.jsonl"), inl.at("kr.samples.jsonl"));
}

TEST(Report, SortsByAccuracyAndDetectsTampering) {
  TempDir tmp;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_run(small_config(tmp / "r"), std::nullopt, log, err), kExitOk);
  std::ostringstream table;
  ASSERT_EQ(cmd_report(tmp / "r", table, err), kExitOk) << err.str();
  std::istringstream lines(table.str());
  std::string line;
  std::getline(lines, line);  // header
  std::vector<double> acc;
  std::set<std::string> names;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    std::string name;
    double a = 0;
    f >> name >> a;
    names.insert(name);
    acc.push_back(a);
  }
  EXPECT_EQ(names, (std::set<std::string>{"base", "ngd", "kr"}));
  EXPECT_TRUE(std::is_sorted(acc.rbegin(), acc.rend()));

  std::ofstream(tmp / "r/ngd.summary.json", std::ios::app) << " ";
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_report(tmp / "r", out2, err2), kExitIntegrity);
  EXPECT_NE(err2.str().find("ngd.summary.json"), std::string::npos);
}

TEST(Run, TamperedBenchIsRefused) {
  TempDir tmp;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_generate(small_config(tmp / "bench"), log, err), kExitOk);
  std::ofstream(tmp / "bench/test.txt", std::ios::app) << "\n";
  EXPECT_EQ(cmd_run(small_config(tmp / "out"), tmp / "bench", log, err), kExitIntegrity);
}

TEST(Run, FailingStrategyIsIsolated) {
  TempDir tmp;
  auto c = small_config(tmp / "r");
  // Passes config validation only because it is injected after parsing;
  // ngd refuses routing-weight neighborhoods at evaluation time.
  c.strategies.insert(c.strategies.begin() + 1, {"bad", StrategySpec::defaults(StrategyKind::ngd)});
  c.strategies[1].spec.neighborhood = NeighborhoodSpec::knn(4, NeighborSpace::routing_weight);
  std::ostringstream log, err;
  EXPECT_EQ(cmd_run(c, std::nullopt, log, err), kExitRuntime);
  EXPECT_NE(err.str().find("strategy bad failed"), std::string::npos);
  const auto inv = inventory(tmp.path() / "r");
  EXPECT_TRUE(inv.count("base.summary.json"));
  EXPECT_TRUE(inv.count("ngd.summary.json"));
  EXPECT_FALSE(inv.count("bad.summary.json"));
  const auto m = nlohmann::json::parse(read_file(tmp.path() / "r/manifest.json"));
  ASSERT_EQ(m["failures"].size(), 1u);
  EXPECT_EQ(m["failures"][0]["strategy"], "bad");
}

#ifdef RERT_BINARY
int run_binary(const std::string& args) {
  const int status = std::system((std::string(RERT_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  TempDir tmp;
  std::ofstream(tmp / "bad.yaml") << "seed: 1\nbenchmark:\n  task_typo: 3\n";
  EXPECT_EQ(run_binary("run --config " + (tmp / "bad.yaml")), kExitUsage);
  EXPECT_EQ(run_binary("--bogus"), kExitUsage);
  EXPECT_EQ(run_binary("report " + (tmp / "nowhere")), kExitUsage);
  std::ofstream(tmp / "ok.yaml") << kSmall;
  EXPECT_EQ(run_binary("run --config " + (tmp / "ok.yaml") + " --out " + (tmp / "r")), kExitOk);
  EXPECT_EQ(run_binary("report " + (tmp / "r")), kExitOk);
  std::ofstream(tmp / "r/cost.json", std::ios::app) << "x";
  EXPECT_EQ(run_binary("report " + (tmp / "r")), kExitIntegrity);
}

TEST(Binary, SeedFlagOverridesFile) {
  TempDir tmp;
  std::ofstream(tmp / "ok.yaml") << kSmall;
  ASSERT_EQ(run_binary("generate --config " + (tmp / "ok.yaml") + " --seed 11 --out " + (tmp / "g")),
            kExitOk);
  EXPECT_EQ(parse_config(read_file(tmp.path() / "g/config.yaml"), "echo").bench.seed.value, 11u);
}
#endif

}  // namespace
}  // namespace rert::cli
