#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "shellsift/stats_view.hpp"
#include "shellsift/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

using namespace shellsift;

namespace {

// Independent oracle: histogram via std::map over decoded codepoints,
// probabilities accumulated in map order.
double entropy_oracle(std::string_view raw) {
  auto cps = to_codepoints(raw);
  if (cps.empty()) return 0.0;
  std::map<uint32_t, size_t> hist;
  for (uint32_t c : cps) hist[c] += 1;
  double h = 0.0;
  for (const auto& [cp, n] : hist) {
    (void)cp;
    double p = double(n) / double(cps.size());
    h += -p * (std::log(p) / std::log(2.0));
  }
  return h;
}

// Independent oracle: per-position manual comparison with boundary checks.
int word_count_oracle(std::string_view text, std::string_view name) {
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
  auto wordc = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  };
  int count = 0;
  for (size_t i = 0; i + name.size() <= text.size(); ++i) {
    bool match = true;
    for (size_t k = 0; k < name.size(); ++k) {
      if (lower(text[i + k]) != lower(name[k])) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    if (i > 0 && wordc(text[i - 1])) continue;
    if (i + name.size() < text.size() && wordc(text[i + name.size()])) continue;
    ++count;
  }
  return count;
}

std::string random_text(Rng& rng, size_t len) {
  static const char* frag[] = {"eval",       "system", "exec",  "shell_exec", "assert",
                               "base64_decode", "echo",   "$_POST", "(",          ")",
                               ";",          " ",      "\n",    "_",          "x",
                               "EVAL",       "Str_Rot13", "gzinflate", "passthru", "medieval"};
  std::string out;
  while (out.size() < len) out += frag[rng.below(std::size(frag))];
  return out;
}

}  // namespace

TEST_CASE("entropy basics") {
  CHECK(shannon_entropy("aaaa") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(shannon_entropy("ab") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(shannon_entropy("aab") == doctest::Approx(0.9183).epsilon(1e-4));
  bool empty = false;
  CHECK(shannon_entropy("", false, &empty) == 0.0);
  CHECK(empty);
}

TEST_CASE("entropy matches independent oracle to 1e-12") {
  Rng rng(515151);
  for (int i = 0; i < 100; ++i) {
    std::string t = random_text(rng, 20 + rng.below(400));
    double got = shannon_entropy(t);
    double want = entropy_oracle(t);
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("entropy permutation invariant") {
  Rng rng(99);
  std::string t = random_text(rng, 256);
  std::string shuffled = t;
  std::vector<char> v(shuffled.begin(), shuffled.end());
  rng.shuffle(v);
  shuffled.assign(v.begin(), v.end());
  CHECK(shannon_entropy(t) == shannon_entropy(shuffled));
}

TEST_CASE("entropy char vs byte mode") {
  std::string two_eacute = "\xC3\xA9\xC3\xA9";
  CHECK(shannon_entropy(two_eacute, false) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(shannon_entropy(two_eacute, true) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("line stats") {
  auto ab = line_stats("ab\ncdef");
  CHECK(ab.max_len == 4);
  CHECK(ab.mean_len == doctest::Approx(3.0));

  auto one = line_stats("0123456789");
  CHECK(one.max_len == 10);
  CHECK(one.mean_len == doctest::Approx(10.0));

  auto empty = line_stats("");
  CHECK(empty.max_len == 0);
  CHECK(empty.mean_len == 0.0);

  auto trail = line_stats("ab\n");
  CHECK(trail.max_len == 2);
  CHECK(trail.mean_len == doctest::Approx(2.0));

  auto crlf = line_stats("ab\r\ncd\r\n");
  CHECK(crlf.max_len == 2);
  CHECK(crlf.mean_len == doctest::Approx(2.0));

  std::string blob(300, 'Q');
  auto big = line_stats("short\n" + blob + "\nend");
  CHECK(big.max_len == 300);
}

TEST_CASE("risky counts spec examples") {
  auto c1 = risky_counts("eval($x); EVAL($y);");
  CHECK(c1[0] == 2);
  auto c2 = risky_counts("medieval_times()");
  CHECK(c2[0] == 0);
  auto c3 = risky_counts("shell_exec('ls')");
  CHECK(c3[4] == 1);  // shell_exec
  CHECK(c3[3] == 0);  // exec must not fire inside shell_exec
}

TEST_CASE("risky counts match scan oracle on fixtures") {
  Rng rng(424242);
  for (int i = 0; i < 50; ++i) {
    std::string t = random_text(rng, 30 + rng.below(500));
    auto got = risky_counts(t);
    for (size_t k = 0; k < kRiskyNames.size(); ++k) {
      CHECK(got[k] == word_count_oracle(t, kRiskyNames[k]));
    }
  }
}

TEST_CASE("risky counts case invariant") {
  std::string t = "eval system base64_decode";
  std::string upper = t;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return char(std::toupper(c)); });
  CHECK(risky_counts(t) == risky_counts(upper));
}

TEST_CASE("stat vector layout") {
  auto zeros = stat_vector("");
  for (double v : zeros) CHECK(v == 0.0);

  std::string line = "eval($_POST['x']);";
  auto v = stat_vector(line);
  CHECK(v[0] == 1.0);  // eval
  for (size_t i = 1; i < 11; ++i) CHECK(v[i] == 0.0);
  CHECK(v[11] == doctest::Approx(double(line.size())));
  CHECK(v[12] == doctest::Approx(double(line.size())));
  CHECK(v[13] == doctest::Approx(entropy_oracle(line)).epsilon(1e-12));
  CHECK(v.size() == 14);
}

TEST_CASE("stat vector bytes-entropy flag") {
  std::string t = "abc\xC3\xA9";
  auto chars = stat_vector(t, false);
  auto bytes = stat_vector(t, true);
  CHECK(chars[13] == doctest::Approx(2.0).epsilon(1e-12));       // a b c é equiprobable
  CHECK(bytes[13] == doctest::Approx(std::log2(5.0)).epsilon(1e-12));  // 5 distinct bytes
}
