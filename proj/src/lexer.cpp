#include "shellsift/lexer.hpp"

#include <array>
#include <cstring>

namespace shellsift {

namespace {

bool is_hspace(unsigned char c) { return c == ' ' || c == '\t'; }
bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

bool ci_eq(char a, char b) {
  auto lo = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
  return lo(a) == lo(b);
}

// Matches "<?php" (case-insensitive, followed by a non-identifier byte or EOF)
// or "<?=". Returns tag length, 0 if no tag here.
size_t open_tag_len(std::string_view s, size_t i) {
  if (i + 1 >= s.size() || s[i] != '<' || s[i + 1] != '?') return 0;
  if (i + 2 < s.size() && s[i + 2] == '=') return 3;
  static const char* php = "php";
  if (i + 5 <= s.size() && ci_eq(s[i + 2], php[0]) && ci_eq(s[i + 3], php[1]) &&
      ci_eq(s[i + 4], php[2])) {
    if (i + 5 == s.size() || !is_ident_char(static_cast<unsigned char>(s[i + 5]))) return 5;
  }
  return 0;
}

const std::array<std::string_view, 9> kOps3 = {"===", "!==", "<=>", "**=", "...",
                                               "<<=", ">>=", "?\?=", "?->"};
const std::array<std::string_view, 26> kOps2 = {"==", "!=", "<>", "<=", ">=", "&&", "||",
                                                "++", "--", "+=", "-=", "*=", "/=", ".=",
                                                "%=", "&=", "|=", "^=", "->", "=>", "::",
                                                "<<", ">>", "??", "**", "#["};
const char* kOps1 = "+-*/%.!,?:;()[]{}<>=&|^~@$\\";

size_t op_len(std::string_view s, size_t i) {
  for (auto op : kOps3) {
    if (s.compare(i, op.size(), op) == 0) return 3;
  }
  for (auto op : kOps2) {
    if (s.compare(i, op.size(), op) == 0) return 2;
  }
  if (std::strchr(kOps1, s[i]) && s[i] != '\0') return 1;
  return 0;
}

// Records $ident spans within [begin, end). Handles backslash escapes; the
// {$expr} form still contains a literal $ident that this picks up, while
// ${name} deliberately does not (callers treat ${ as unanalyzable).
void scan_embedded_vars(std::string_view s, size_t begin, size_t end, std::vector<EmbeddedVar>& out) {
  size_t i = begin;
  while (i < end) {
    char c = s[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (c == '$' && i + 1 < end && is_ident_start(static_cast<unsigned char>(s[i + 1]))) {
      size_t j = i + 1;
      while (j < end && is_ident_char(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({i, j});
      i = j;
      continue;
    }
    ++i;
  }
}

struct Lexer {
  std::string_view s;
  bool keep_trivia;
  LexResult res;

  void push(TokKind k, size_t b, size_t e) {
    if (!keep_trivia && (k == TokKind::Whitespace || k == TokKind::Comment)) return;
    Token t;
    t.kind = k;
    t.begin = b;
    t.end = e;
    res.tokens.push_back(std::move(t));
  }

  void run() {
    size_t i = 0;
    const size_t n = s.size();
    bool in_php = false;
    size_t html_start = 0;
    while (i < n) {
      if (!in_php) {
        size_t tag = open_tag_len(s, i);
        if (tag) {
          if (i > html_start) push(TokKind::InlineHtml, html_start, i);
          push(TokKind::OpenTag, i, i + tag);
          i += tag;
          in_php = true;
        } else {
          ++i;
        }
        continue;
      }
      char c = s[i];
      if (is_space(static_cast<unsigned char>(c))) {
        size_t j = i;
        while (j < n && is_space(static_cast<unsigned char>(s[j]))) ++j;
        push(TokKind::Whitespace, i, j);
        i = j;
        continue;
      }
      if (c == '?' && i + 1 < n && s[i + 1] == '>') {
        push(TokKind::CloseTag, i, i + 2);
        i += 2;
        in_php = false;
        html_start = i;
        continue;
      }
      if (c == '/' && i + 1 < n && s[i + 1] == '/') {
        i = line_comment(i);
        continue;
      }
      if (c == '#' && !(i + 1 < n && s[i + 1] == '[')) {
        i = line_comment(i);
        continue;
      }
      if (c == '/' && i + 1 < n && s[i + 1] == '*') {
        size_t j = i + 2;
        bool closed = false;
        while (j < n) {
          if (s[j] == '*' && j + 1 < n && s[j + 1] == '/') {
            j += 2;
            closed = true;
            break;
          }
          ++j;
        }
        if (!closed) res.had_errors = true;
        Token t;
        t.kind = TokKind::Comment;
        t.begin = i;
        t.end = j;
        t.unterminated = !closed;
        if (keep_trivia) res.tokens.push_back(std::move(t));
        i = j;
        continue;
      }
      if (c == '\'' || c == '"' || c == '`') {
        i = quoted_string(i, c);
        continue;
      }
      if (c == '<' && i + 2 < n && s[i + 1] == '<' && s[i + 2] == '<') {
        size_t adv = heredoc(i);
        if (adv) {
          i = adv;
          continue;
        }
        push(TokKind::Op, i, i + 2);  // stray <<<: fall back to shift operator
        i += 2;
        continue;
      }
      if (c == '$' && i + 1 < n && is_ident_start(static_cast<unsigned char>(s[i + 1]))) {
        size_t j = i + 1;
        while (j < n && is_ident_char(static_cast<unsigned char>(s[j]))) ++j;
        push(TokKind::Variable, i, j);
        i = j;
        continue;
      }
      if (is_digit(static_cast<unsigned char>(c)) ||
          (c == '.' && i + 1 < n && is_digit(static_cast<unsigned char>(s[i + 1])))) {
        i = number(i);
        continue;
      }
      if (is_ident_start(static_cast<unsigned char>(c))) {
        size_t j = i;
        while (j < n && is_ident_char(static_cast<unsigned char>(s[j]))) ++j;
        push(TokKind::Identifier, i, j);
        i = j;
        continue;
      }
      size_t ol = op_len(s, i);
      if (ol) {
        push(TokKind::Op, i, i + ol);
        i += ol;
        continue;
      }
      push(TokKind::Unknown, i, i + 1);
      ++i;
    }
    if (!in_php && i > html_start) push(TokKind::InlineHtml, html_start, i);
  }

  // Line comments end at a newline (exclusive) or a close tag (exclusive).
  size_t line_comment(size_t i) {
    const size_t n = s.size();
    size_t j = i;
    while (j < n && s[j] != '\n') {
      if (s[j] == '?' && j + 1 < n && s[j + 1] == '>') break;
      ++j;
    }
    push(TokKind::Comment, i, j);
    return j;
  }

  size_t quoted_string(size_t i, char q) {
    const size_t n = s.size();
    size_t j = i + 1;
    bool closed = false;
    while (j < n) {
      char c = s[j];
      if (c == '\\' && j + 1 < n) {
        j += 2;
        continue;
      }
      if (c == q) {
        ++j;
        closed = true;
        break;
      }
      ++j;
    }
    if (!closed) res.had_errors = true;
    Token t;
    t.kind = TokKind::String;
    t.begin = i;
    t.end = j;
    t.quote = q;
    t.interpolated = (q != '\'');
    t.unterminated = !closed;
    if (t.interpolated) {
      size_t body_end = closed ? j - 1 : j;
      scan_embedded_vars(s, i + 1, body_end, t.embedded);
    }
    res.tokens.push_back(std::move(t));
    return j;
  }

  size_t number(size_t i) {
    const size_t n = s.size();
    size_t j = i;
    if (s[j] == '0' && j + 1 < n && (s[j + 1] == 'x' || s[j + 1] == 'X')) {
      j += 2;
      while (j < n && (is_digit(static_cast<unsigned char>(s[j])) ||
                       (s[j] >= 'a' && s[j] <= 'f') || (s[j] >= 'A' && s[j] <= 'F') || s[j] == '_'))
        ++j;
      push(TokKind::Number, i, j);
      return j;
    }
    if (s[j] == '0' && j + 1 < n && (s[j + 1] == 'b' || s[j + 1] == 'B')) {
      j += 2;
      while (j < n && (s[j] == '0' || s[j] == '1' || s[j] == '_')) ++j;
      push(TokKind::Number, i, j);
      return j;
    }
    while (j < n && (is_digit(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
    if (j < n && s[j] == '.' && j + 1 < n && is_digit(static_cast<unsigned char>(s[j + 1]))) {
      ++j;
      while (j < n && (is_digit(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
    }
    if (j < n && (s[j] == 'e' || s[j] == 'E')) {
      size_t k = j + 1;
      if (k < n && (s[k] == '+' || s[k] == '-')) ++k;
      if (k < n && is_digit(static_cast<unsigned char>(s[k]))) {
        j = k;
        while (j < n && is_digit(static_cast<unsigned char>(s[j]))) ++j;
      }
    }
    push(TokKind::Number, i, j);
    return j;
  }

  // Returns position after the heredoc token, or 0 when the <<< here does not
  // introduce a well-formed heredoc header.
  size_t heredoc(size_t i) {
    const size_t n = s.size();
    size_t j = i + 3;
    while (j < n && is_hspace(static_cast<unsigned char>(s[j]))) ++j;
    char q = 0;
    if (j < n && (s[j] == '\'' || s[j] == '"')) {
      q = s[j];
      ++j;
    }
    size_t label_b = j;
    while (j < n && is_ident_char(static_cast<unsigned char>(s[j]))) ++j;
    if (j == label_b) return 0;
    std::string_view label = s.substr(label_b, j - label_b);
    if (q) {
      if (j >= n || s[j] != q) return 0;
      ++j;
    }
    while (j < n && is_hspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j < n && s[j] == '\r') ++j;
    if (j >= n || s[j] != '\n') return 0;
    ++j;
    size_t body_b = j;
    bool closed = false;
    size_t end = n;
    while (j < n) {
      size_t line_b = j;
      size_t k = line_b;
      while (k < n && is_hspace(static_cast<unsigned char>(s[k]))) ++k;
      if (s.compare(k, label.size(), label) == 0) {
        size_t after = k + label.size();
        if (after == n || !is_ident_char(static_cast<unsigned char>(s[after]))) {
          closed = true;
          end = after;
          break;
        }
      }
      while (j < n && s[j] != '\n') ++j;
      if (j < n) ++j;
    }
    if (!closed) res.had_errors = true;
    Token t;
    t.kind = TokKind::String;
    t.begin = i;
    t.end = end;
    t.quote = (q == '\'') ? 'n' : 'h';
    t.interpolated = (q != '\'');
    t.unterminated = !closed;
    if (t.interpolated) scan_embedded_vars(s, body_b, closed ? end - label.size() : end, t.embedded);
    res.tokens.push_back(std::move(t));
    return end;
  }
};

}  // namespace

LexResult lex_php(std::string_view src, bool keep_trivia) {
  Lexer lx{src, keep_trivia, {}};
  lx.run();
  return std::move(lx.res);
}

}  // namespace shellsift
