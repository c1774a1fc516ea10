#include "shellsift/stats_view.hpp"

#include "shellsift/util.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace shellsift {

std::array<int, 11> risky_counts(std::string_view text) {
  std::array<int, 11> out{};
  for (size_t i = 0; i < kRiskyNames.size(); ++i) out[i] = count_word_ci(text, kRiskyNames[i]);
  return out;
}

double shannon_entropy(std::string_view raw, bool bytes_mode, bool* empty_input) {
  if (raw.empty()) {
    if (empty_input) *empty_input = true;
    return 0.0;
  }
  if (empty_input) *empty_input = false;

  std::vector<size_t> counts;
  size_t total = 0;
  if (bytes_mode) {
    counts.assign(256, 0);
    for (unsigned char c : raw) ++counts[c];
    total = raw.size();
  } else {
    auto cps = to_codepoints(raw);
    std::sort(cps.begin(), cps.end());
    size_t i = 0;
    while (i < cps.size()) {
      size_t j = i;
      while (j < cps.size() && cps[j] == cps[i]) ++j;
      counts.push_back(j - i);
      i = j;
    }
    total = cps.size();
  }
  if (total == 0) return 0.0;
  double h = 0.0;
  for (size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

LineStats line_stats(std::string_view text) {
  LineStats st;
  if (text.empty()) return st;
  size_t total = 0;
  size_t lines = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    bool last_and_empty = nl == std::string_view::npos && line.empty();
    if (!last_and_empty) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      size_t len = count_codepoints(line);
      st.max_len = std::max(st.max_len, len);
      total += len;
      ++lines;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  st.mean_len = lines ? static_cast<double>(total) / static_cast<double>(lines) : 0.0;
  return st;
}

std::array<double, kStatDim> stat_vector(std::string_view raw, bool bytes_entropy) {
  std::string text = decode_utf8_lossy(raw);
  std::array<double, kStatDim> v{};
  auto counts = risky_counts(text);
  for (size_t i = 0; i < counts.size(); ++i) v[i] = static_cast<double>(counts[i]);
  auto ls = line_stats(text);
  v[11] = static_cast<double>(ls.max_len);
  v[12] = ls.mean_len;
  v[13] = bytes_entropy ? shannon_entropy(raw, true) : shannon_entropy(text, false);
  return v;
}

}  // namespace shellsift
