#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace shellsift {

enum class TokKind : uint8_t {
  InlineHtml,
  OpenTag,   // <?php or <?=
  CloseTag,  // ?>
  Variable,  // $name, including the sigil
  Identifier,
  Number,
  String,  // quoted, backtick, heredoc, nowdoc; span includes delimiters
  Comment,
  Whitespace,
  Op,
  Unknown,
};

// Span of a "$name" occurrence inside an interpolated string, absolute offsets.
struct EmbeddedVar {
  size_t begin = 0;
  size_t end = 0;
};

struct Token {
  TokKind kind = TokKind::Unknown;
  size_t begin = 0;
  size_t end = 0;
  char quote = 0;  // strings only: ' " ` h(eredoc) n(owdoc)
  bool interpolated = false;
  bool unterminated = false;
  std::vector<EmbeddedVar> embedded;

  std::string_view text(std::string_view src) const { return src.substr(begin, end - begin); }
  size_t size() const { return end - begin; }
};

struct LexResult {
  std::vector<Token> tokens;
  bool had_errors = false;
};

// Tolerant PHP lexer. Never throws on malformed input; unterminated
// constructs run to EOF and set had_errors. With keep_trivia the token
// spans tile the input exactly (whitespace and comments included), which
// is what the span-splicing rewriters rely on.
LexResult lex_php(std::string_view src, bool keep_trivia = true);

inline bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}
inline bool is_ident_char(unsigned char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

}  // namespace shellsift
