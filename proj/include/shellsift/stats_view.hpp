#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace shellsift {

// Fixed order; frozen into checkpoints. 11 names + max/mean line length +
// entropy = the 14-d statistical vector.
inline constexpr std::array<const char*, 11> kRiskyNames = {
    "eval",   "assert",    "system",        "exec",      "shell_exec", "passthru",
    "popen",  "proc_open", "base64_decode", "gzinflate", "str_rot13"};

inline constexpr size_t kStatDim = 14;

std::array<int, 11> risky_counts(std::string_view text);

// Base-2 entropy of the empirical symbol distribution. Symbols are decoded
// codepoints by default, raw bytes with bytes_mode. Empty input yields 0.
double shannon_entropy(std::string_view raw, bool bytes_mode = false,
                       bool* empty_input = nullptr);

struct LineStats {
  size_t max_len = 0;
  double mean_len = 0.0;
};

// Lines split on \n, a trailing terminator does not open an empty last line,
// one trailing \r per line is not counted. Lengths are in codepoints.
LineStats line_stats(std::string_view text);

std::array<double, kStatDim> stat_vector(std::string_view raw, bool bytes_entropy = false);

}  // namespace shellsift
