#pragma once

// Command-line front end. Every subcommand is reachable through run_cli so the
// tests can drive it without spawning processes.

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "capmeter/synthetic.hpp"

namespace capmeter::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitTraining = 3;
inline constexpr int kExitFit = 4;

inline constexpr const char* kVersion = "0.1.0";

// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "lo:hi:Klog" (K log-spaced integers, deduplicated) or a comma-separated list.
std::vector<std::size_t> parse_n_grid(std::string_view text);

// "d=20,kappa=1[,teacher=1000][,classes=2][,seed=3][,rows=50000]". `rows` is
// returned separately (0 when absent).
SyntheticConfig parse_synthetic_spec(std::string_view text, std::size_t* rows = nullptr);

// "key=value,key=value" into a map; ConfigError on malformed items or repeats.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// 100 * value / params with two decimals, e.g. 609 / 78902 -> "0.77%".
std::string format_percent(double value, double params);

// Drops "# timestamp" manifest lines so reruns can be compared byte for byte.
std::string strip_timestamps(std::string_view text);

}  // namespace capmeter::cli
