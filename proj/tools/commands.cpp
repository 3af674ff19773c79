#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "rert/records.hpp"

namespace rert::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << bytes;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects written files and their digests for the manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void put(const std::string& name, const std::string& bytes) {
    write_atomic(dir_ / name, bytes);
    files_.push_back({{"path", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }

  void manifest(const std::string& command, const ExperimentConfig& config,
                const std::string& config_text, const std::string& started,
                const json& failures) {
    json m;
    m["artifact_version"] = kArtifactVersion;
    m["command"] = command;
    m["seed"] = config.bench.seed.value;
    m["config_digest"] = sha256_hex(config_text);
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["files"] = files_;
    m["failures"] = failures;
    write_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  json files_ = json::array();
};

template <typename F>
std::string to_text(F&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

struct LoadedBench {
  ToyMoE model;
  ReferenceSet refset;
  std::vector<Sample> test;
};

LoadedBench load_bench(const fs::path& dir) {
  verify_manifest(dir);
  std::istringstream model_in(read_file(dir / "model.txt"));
  ToyMoE model = read_model(model_in);
  std::istringstream ref_in(read_file(dir / "reference.txt"));
  ReferenceSet refset = read_reference_set(ref_in, model.bank);
  std::istringstream test_in(read_file(dir / "test.txt"));
  std::vector<Sample> test = read_split(test_in);
  return {std::move(model), std::move(refset), std::move(test)};
}

void put_bench(OutputDir& out, const PreparedBenchmark& prep) {
  const int t = prep.bench.spec.task_types;
  out.put("model.txt", to_text([&](std::ostream& o) { write_model(o, prep.model); }));
  out.put("reference.txt", to_text([&](std::ostream& o) {
            write_reference_set(o, prep.refset, prep.bench.bank.class_count(), t);
          }));
  out.put("test.txt", to_text([&](std::ostream& o) { write_split(o, prep.bench.test_pool, t); }));
}

json sweep_json(const SweepEntry& sw, const std::vector<SweepRow>& rows) {
  json j;
  j["strategy"] = sw.strategy;
  j["axis"] = to_string(sw.axis);
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"value", r.value},
                         {"accuracy", r.accuracy},
                         {"base_accuracy", r.base_accuracy},
                         {"mean_forward_evals", r.mean_forward_evals},
                         {"mean_gradient_evals", r.mean_gradient_evals}});
  }
  return j;
}

}  // namespace

void verify_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw IntegrityError("missing manifest " + path.string());
  json m;
  try {
    m = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable manifest " + path.string() + ": " + e.what());
  }
  if (!m.contains("files") || !m["files"].is_array()) {
    throw IntegrityError("manifest " + path.string() + " lists no files");
  }
  for (const auto& f : m["files"]) {
    const std::string name = f.value("path", "");
    const fs::path file = dir / name;
    if (name.empty() || !fs::exists(file)) throw IntegrityError("missing file " + file.string());
    if (sha256_hex(read_file(file)) != f.value("sha256", "")) {
      throw IntegrityError("digest mismatch for " + file.string());
    }
  }
}

ExperimentConfig resolve_config(const std::string& path, const Overrides& o) {
  ExperimentConfig c = path.empty() ? default_config() : load_config(path);
  if (o.seed) c.bench.seed.value = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.threads) c.threads = *o.threads;
  if (o.retain_trajectories) c.retain_trajectories = *o.retain_trajectories;
  c.validate();
  return c;
}

int cmd_generate(const ExperimentConfig& config, std::ostream& log, std::ostream& err) {
  const std::string started = utc_now();
  const std::string config_text = emit_config(config);
  try {
    const PreparedBenchmark prep = prepare(config.bench);
    OutputDir out(config.output_dir);
    put_bench(out, prep);
    out.put("config.yaml", config_text);
    out.manifest("generate", config, config_text, started, json::array());
    log << "wrote benchmark to " << config.output_dir << " (" << prep.refset.size()
        << " reference entries, " << prep.bench.test_pool.size() << " test samples)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "generate failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_run(const ExperimentConfig& config, const std::optional<std::string>& bench_dir,
            std::ostream& log, std::ostream& err) {
  const std::string started = utc_now();
  const std::string config_text = emit_config(config);

  std::optional<OutputDir> out;
  std::optional<LoadedBench> bench;
  try {
    out.emplace(config.output_dir);
    if (bench_dir) {
      bench = load_bench(*bench_dir);
    } else {
      PreparedBenchmark prep = prepare(config.bench);
      put_bench(*out, prep);
      bench = LoadedBench{std::move(prep.model), std::move(prep.refset),
                          std::move(prep.bench.test_pool)};
    }
  } catch (const IntegrityError& e) {
    err << "integrity failure: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const std::exception& e) {
    err << "cannot prepare the benchmark: " << e.what() << '\n';
    return kExitRuntime;
  }
  out->put("config.yaml", config_text);

  const EvalOptions options{config.retain_trajectories, config.threads};
  json failures = json::array();
  std::vector<EvalResult> results;
  for (const auto& s : config.strategies) {
    try {
      EvalResult r = evaluate(bench->model, bench->refset, bench->test, s.spec, options, s.name);
      out->put(s.name + ".summary.json",
               summary_json(r, config.per_step_transitions).dump(2) + "\n");
      out->put(s.name + ".samples.jsonl",
               to_text([&](std::ostream& o) { write_sample_records(o, r); }));
      log << std::left << std::setw(20) << s.name << " accuracy " << std::fixed
          << std::setprecision(4) << r.accuracy << '\n';
      results.push_back(std::move(r));
    } catch (const std::exception& e) {
      err << "strategy " << s.name << " failed: " << e.what() << '\n';
      failures.push_back({{"strategy", s.name}, {"error", e.what()}});
    }
  }

  const EvalOptions sweep_options{false, config.threads};
  for (const auto& sw : config.sweeps) {
    const std::string label = "sweep-" + sw.strategy + "-" + to_string(sw.axis);
    try {
      const auto it = std::find_if(config.strategies.begin(), config.strategies.end(),
                                   [&](const StrategyEntry& e) { return e.name == sw.strategy; });
      const auto rows = sweep(bench->model, bench->refset, bench->test, sw.axis, sw.values,
                              it->spec, sweep_options);
      out->put(label + ".json", sweep_json(sw, rows).dump(2) + "\n");
    } catch (const std::exception& e) {
      err << label << " failed: " << e.what() << '\n';
      failures.push_back({{"strategy", label}, {"error", e.what()}});
    }
  }

  json cost = json::array();
  for (const auto& row : cost_summary(results)) {
    cost.push_back({{"strategy", row.name},
                    {"kind", to_string(row.kind)},
                    {"mean_forward_evals", row.mean_forward_evals},
                    {"mean_gradient_evals", row.mean_gradient_evals},
                    {"mean_steps", row.mean_steps}});
  }
  out->put("cost.json", cost.dump(2) + "\n");
  out->manifest("run", config, config_text, started, failures);
  return failures.empty() ? kExitOk : kExitRuntime;
}

int cmd_report(const std::string& results_dir, std::ostream& out, std::ostream& err) {
  try {
    verify_manifest(results_dir);
  } catch (const IntegrityError& e) {
    err << "integrity failure: " << e.what() << '\n';
    return kExitIntegrity;
  }
  struct Row {
    std::string name;
    double accuracy, base, forward, gradient;
  };
  std::vector<Row> rows;
  try {
    const json m = json::parse(read_file(fs::path(results_dir) / "manifest.json"));
    for (const auto& f : m["files"]) {
      const std::string name = f["path"];
      const std::string suffix = ".summary.json";
      if (name.size() <= suffix.size() ||
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
        continue;
      }
      const json s = json::parse(read_file(fs::path(results_dir) / name));
      rows.push_back({s["strategy"], s["accuracy"]["final"], s["accuracy"]["base"],
                      s["cost"]["mean_forward_evals"], s["cost"]["mean_gradient_evals"]});
    }
  } catch (const std::exception& e) {
    err << "cannot read results: " << e.what() << '\n';
    return kExitRuntime;
  }
  if (rows.empty()) {
    err << "no strategy summaries in " << results_dir << '\n';
    return kExitRuntime;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.accuracy > b.accuracy; });
  out << std::left << std::setw(20) << "strategy" << std::right << std::setw(10) << "accuracy"
      << std::setw(10) << "base" << std::setw(14) << "forward/x" << std::setw(14)
      << "gradient/x" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << r.name << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << r.accuracy << std::setw(10) << r.base
        << std::setprecision(1) << std::setw(14) << r.forward << std::setw(14) << r.gradient
        << '\n';
  }
  return kExitOk;
}

}  // namespace rert::cli
