#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "shellsift/util.hpp"

#include <filesystem>
#include <set>

using namespace shellsift;

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  std::string million(1000000, 'a');
  CHECK(sha256_hex(million) == "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = r.below(10);
    CHECK(v < 10);
    double d = r.real01();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    int k = r.range_int(-3, 3);
    CHECK(k >= -3);
    CHECK(k <= 3);
  }

  // below() reaches every residue for a small modulus
  Rng hits(9);
  std::set<uint64_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(hits.below(4));
  CHECK(seen.size() == 4);

  Rng s1(99), s2(99);
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1;
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_CASE("rng normal roughly standard") {
  Rng r(123);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("derive_seed stability and separation") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a", 5) == derive_seed(1, "a", 5));
}

TEST_CASE("utf8 lossy decode") {
  size_t repl = 0;
  CHECK(decode_utf8_lossy("plain ascii", &repl) == "plain ascii");
  CHECK(repl == 0);

  CHECK(decode_utf8_lossy("h\xC3\xA9llo") == "h\xC3\xA9llo");

  repl = 0;
  std::string bad = decode_utf8_lossy("a\xFF"
                                      "b",
                                      &repl);
  CHECK(repl == 1);
  CHECK(bad == "a\xEF\xBF\xBD"
               "b");

  repl = 0;
  decode_utf8_lossy("\xC3", &repl);  // truncated two-byte sequence
  CHECK(repl == 1);

  repl = 0;
  decode_utf8_lossy("\xC0\xAF", &repl);  // overlong '/'
  CHECK(repl == 2);

  repl = 0;
  decode_utf8_lossy("\xED\xA0\x80", &repl);  // surrogate half
  CHECK(repl >= 1);

  // 4-byte emoji survives
  CHECK(decode_utf8_lossy("\xF0\x9F\x98\x80") == "\xF0\x9F\x98\x80");
}

TEST_CASE("codepoint counting") {
  CHECK(count_codepoints("") == 0);
  CHECK(count_codepoints("abc") == 3);
  CHECK(count_codepoints("h\xC3\xA9llo") == 5);
  CHECK(count_codepoints("\xF0\x9F\x98\x80") == 1);
  auto cps = to_codepoints("a\xC3\xA9");
  REQUIRE(cps.size() == 2);
  CHECK(cps[0] == 'a');
  CHECK(cps[1] == 0xE9);
}

TEST_CASE("case-insensitive word counting") {
  CHECK(count_word_ci("eval($x); EVAL($y);", "eval") == 2);
  CHECK(count_word_ci("medieval_times()", "eval") == 0);
  CHECK(count_word_ci("evaluate(eval)", "eval") == 1);
  CHECK(count_word_ci("eval", "eval") == 1);
  CHECK(count_word_ci("", "eval") == 0);
  CHECK(count_word_ci("base64_decode(base64_decode($a))", "base64_decode") == 2);
  CHECK(count_word_ci("shell_exec", "exec") == 0);
}

TEST_CASE("base64 vectors") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foob") == "Zm9vYg==");
  CHECK(base64_encode("fooba") == "Zm9vYmE=");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_encode("hello") == "aGVsbG8=");
}

TEST_CASE("base64 decode") {
  CHECK(base64_decode("") == "");
  CHECK(base64_decode("Zg==") == "f");
  CHECK(base64_decode("Zm8=") == "fo");
  CHECK(base64_decode("Zm9vYmFy") == "foobar");
  CHECK(base64_decode("aGVsbG8=") == "hello");

  Rng rng(31337);
  for (int iter = 0; iter < 200; ++iter) {
    std::string raw;
    size_t len = rng.below(64);
    for (size_t i = 0; i < len; ++i) raw += char(rng.below(256));
    CHECK(base64_decode(base64_encode(raw)) == raw);
  }

  CHECK_THROWS_AS(base64_decode("abc"), IntegrityError);
  CHECK_THROWS_AS(base64_decode("a!=="), IntegrityError);
  CHECK_THROWS_AS(base64_decode("=abc"), IntegrityError);
  CHECK_THROWS_AS(base64_decode("Zg==Zg=="), IntegrityError);
}

TEST_CASE("file io round trip") {
  auto dir = std::filesystem::temp_directory_path() / "shellsift_util_test";
  std::filesystem::remove_all(dir);
  write_file(dir / "a" / "x.php", "<?php echo 1;");
  write_file(dir / "b.txt", std::string("\x00\x01\xFF", 3));
  CHECK(read_file(dir / "a" / "x.php") == "<?php echo 1;");
  CHECK(read_file(dir / "b.txt") == std::string("\x00\x01\xFF", 3));
  auto files = list_files_recursive(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "x.php");  // a/x.php sorts before b.txt
  CHECK_THROWS_AS(read_file(dir / "missing.txt"), NotFoundError);
  std::filesystem::remove_all(dir);
}
