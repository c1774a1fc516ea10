#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace shellsift {

inline constexpr const char* kLongStrToken = "<LONG_STR>";
inline constexpr const char* kHtmlToken = "<html>";
inline constexpr const char* kUnkToken = "<unk>";

struct PreprocessStats {
  size_t lossy_replacements = 0;
  bool lex_errors = false;
  bool unterminated_literal = false;
};

// Comment removal plus whitespace normalization. Comments become one space,
// runs of horizontal whitespace collapse to one space, newlines survive,
// trailing whitespace is stripped per line. String literal bytes pass through
// untouched. Total on any input.
std::string preprocess(std::string_view raw, PreprocessStats* stats = nullptr);

// Replaces every quoted/heredoc/nowdoc literal whose content exceeds tau
// characters (codepoints, strict >) with the literal "<LONG_STR>". Backtick
// execution strings are left alone; they are operators, not data.
std::string compress_long_strings(std::string_view text, size_t tau = 200,
                                  PreprocessStats* stats = nullptr);

// Lexical token surface strings: inline HTML chunks map to <html>, runs of
// unrecognizable bytes to <unk>, string literals stay single tokens.
std::vector<std::string> tokenize_texts(std::string_view text);

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> texts;
  bool truncated = false;
  size_t n_original = 0;
};

// Keeps the first floor(m/2) and last ceil(m/2) tokens when the sequence is
// longer than m; identity otherwise.
TokenSequence head_tail_truncate(TokenSequence seq, size_t m = 512);

struct TokenVocab {
  // ordered map keeps serialization deterministic
  std::map<std::string, int> token_to_id;
  int pad_id = 0;
  int unk_id = 1;
  int long_str_id = 2;
  int next_id = 3;

  size_t size() const { return static_cast<size_t>(next_id); }

  static TokenVocab build(const std::vector<std::vector<std::string>>& train_docs,
                          size_t cap = 20000);

  std::vector<int> apply(const std::vector<std::string>& texts) const;
};

// preprocess + compress + tokenize, the full text pipeline before vocab lookup.
std::vector<std::string> source_token_texts(std::string_view raw, size_t tau = 200,
                                            PreprocessStats* stats = nullptr);

}  // namespace shellsift
