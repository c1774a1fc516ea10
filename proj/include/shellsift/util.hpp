#ifndef SHELLSIFT_UTIL_HPP
#define SHELLSIFT_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace shellsift {

// Error taxonomy used across the toolkit. The CLI maps UsageError to exit
// code 1 and everything else to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- hashing ---------------------------------------------------------------

// Hex-encoded SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(std::string_view bytes);

// --- deterministic randomness ------------------------------------------------

// All randomized behavior in the toolkit flows through this wrapper so runs
// are reproducible byte-for-byte. Distribution helpers are implemented by
// hand; std:: distributions are not guaranteed identical across libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  // Real in [0, 1) with 53 bits of precision.
  double real01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  // Box-Muller; keeps the spare sample for the next call.
  double normal(double mean = 0.0, double stddev = 1.0);

  int range_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<size_t>(below(i))]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(below(v.size()))];
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable sub-seed derivation so one master seed can feed independent streams.
uint64_t derive_seed(uint64_t master, std::string_view tag);
uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index);

// --- text ------------------------------------------------------------------

// Decodes bytes as UTF-8, mapping invalid sequences to U+FFFD. The number of
// replacements made is added to *replacements when given.
std::string decode_utf8_lossy(std::string_view bytes, size_t* replacements = nullptr);

size_t count_codepoints(std::string_view utf8);
std::vector<uint32_t> to_codepoints(std::string_view utf8);

inline bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::string to_lower_ascii(std::string_view s);

// Case-insensitive whole-word occurrence count. Word boundaries are
// transitions between [A-Za-z0-9_] and anything else.
int count_word_ci(std::string_view haystack, std::string_view word);

std::string base64_encode(std::string_view bytes);

// Strict decoder for the encoder above: standard alphabet, correct padding.
// Throws IntegrityError on malformed input.
std::string base64_decode(std::string_view text);

// --- work scheduling ---------------------------------------------------------

// Index-addressed loop: results land in fixed slots regardless of worker
// count, so parallel runs match serial ones whenever f(i) is pure in i.
template <typename F>
void parallel_for(size_t n, int jobs, F&& f) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  size_t workers = std::min(size_t(jobs), n);
  std::vector<std::thread> threads;
  std::exception_ptr first;
  std::mutex mu;
  for (size_t t = 0; t < workers; ++t)
    threads.emplace_back([&, t] {
      for (size_t i = t; i < n; i += workers) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& th : threads) th.join();
  if (first) std::rethrow_exception(first);
}

// --- filesystem --------------------------------------------------------------

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view data);

// Regular files under root, sorted by relative path for determinism.
std::vector<std::filesystem::path> list_files_recursive(const std::filesystem::path& root);

}  // namespace shellsift

#endif
