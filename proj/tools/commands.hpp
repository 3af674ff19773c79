#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "config.hpp"

namespace rert::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitIntegrity = 3;

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Digest mismatch or missing file listed in a manifest.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Recomputes every digest in dir/manifest.json. Throws IntegrityError
/// naming the first bad file.
void verify_manifest(const std::filesystem::path& dir);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<bool> retain_trajectories;
};

/// File (or defaults when path is empty), then overrides; validated.
ExperimentConfig resolve_config(const std::string& path, const Overrides& overrides);

/// Each returns a process exit code and writes diagnostics to err.
int cmd_generate(const ExperimentConfig& config, std::ostream& log, std::ostream& err);
/// bench_dir, when set, holds the output of a previous generate.
int cmd_run(const ExperimentConfig& config, const std::optional<std::string>& bench_dir,
            std::ostream& log, std::ostream& err);
int cmd_report(const std::string& results_dir, std::ostream& out, std::ostream& err);

}  // namespace rert::cli
