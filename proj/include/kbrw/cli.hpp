#pragma once

// Batch front-end: JSON run configs, command dispatch, CSV/JSON outputs and
// the exit-code contract (0 pass, 1 failed check or budget, 2 config error).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbrw/charfn.hpp"
#include "kbrw/group.hpp"
#include "kbrw/kernels.hpp"

namespace kbrw::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kConfigError = 2 };

struct Budgets {
  std::size_t n_replicas = 4000;
  std::size_t n_mc = 20000;
  std::size_t cap = 100000;
  int n_big = 12;
  std::size_t n_W = 1000;
  std::size_t seeds = 10000;
};

struct Tolerances {
  double atol = 1e-10;  // absorbs rounding in the exact-mode identities
  double sigma_level = 3.0;
  double significance = 0.01;
};

struct RunConfig {
  nlohmann::json raw;  // the document as given, with the effective seed filled in
  nlohmann::json kernel;
  nlohmann::json command;
  std::uint64_t seed = 0;
  Budgets budgets;
  Tolerances tolerances;
  std::string output;  // empty when unset
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Validates a config document. The seed must come from the document or the override.
RunConfig parse_config(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Built-in kernels by name ("dirichlet", "independent_uniform", "degenerate",
/// "isotropic", "frame_dependent") or an atom table ("atoms"). Atom tables are
/// user kernels and run in Monte-Carlo mode only.
KernelModel build_kernel(const nlohmann::json& spec);

/// "constant_one", "gaussian" {scale}, "stable" {alpha, sigma}, or
/// "stationary_file" {path} written by the stationary command.
CharFn build_datum(const nlohmann::json& spec);

/// Explicit points [{"r": .., "o": "identity" | [9 entries] | {"planar": theta}}
/// or {"xi": [x, y, z]}], or the default grid when absent.
std::vector<FourierPoint> build_grid(const nlohmann::json* spec);

struct RunResult {
  int exit_code = kPass;
  nlohmann::json summary;
};

/// Runs one command and writes its outputs into `out_dir` (created if needed).
RunResult run_command(const std::string& command, const RunConfig& config, const std::filesystem::path& out_dir);

/// Full command-line entry point; never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace kbrw::cli
