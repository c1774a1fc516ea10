#include "shellsift/source_view.hpp"

#include "shellsift/lexer.hpp"
#include "shellsift/util.hpp"

#include <algorithm>
#include <unordered_map>

namespace shellsift {

namespace {

void append_normalized(std::string& out, std::string_view piece) {
  for (char c : piece) {
    if (c == '\n') {
      while (!out.empty() && out.back() == ' ') out.pop_back();
      out.push_back('\n');
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
      else if (out.empty()) out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
}

}  // namespace

std::string preprocess(std::string_view raw, PreprocessStats* stats) {
  size_t repl = 0;
  std::string text = decode_utf8_lossy(raw, &repl);
  if (stats) stats->lossy_replacements += repl;

  auto lexed = lex_php(text, true);
  if (stats && lexed.had_errors) stats->lex_errors = true;

  std::string out;
  out.reserve(text.size());
  for (const auto& t : lexed.tokens) {
    switch (t.kind) {
      case TokKind::Comment:
        if (!out.empty() && out.back() != ' ' && out.back() != '\n') out.push_back(' ');
        break;
      case TokKind::String:
        out.append(t.text(text));
        break;
      default:
        append_normalized(out, t.text(text));
        break;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace {

// Content span of a string token, delimiters excluded. For heredocs that is
// the body between the header newline and the terminator line.
std::string_view literal_content(std::string_view text, const Token& t) {
  std::string_view whole = t.text(text);
  if (t.quote == 'h' || t.quote == 'n') {
    size_t first_nl = whole.find('\n');
    if (first_nl == std::string_view::npos) return std::string_view{};
    size_t body_b = first_nl + 1;
    if (t.unterminated) return whole.substr(body_b);
    size_t last_nl = whole.rfind('\n');
    if (last_nl == std::string_view::npos || last_nl < body_b) return std::string_view{};
    return whole.substr(body_b, last_nl - body_b);
  }
  size_t b = 1;
  size_t e = whole.size();
  if (!t.unterminated && e > b) --e;
  if (e < b) e = b;
  return whole.substr(b, e - b);
}

}  // namespace

std::string compress_long_strings(std::string_view text, size_t tau, PreprocessStats* stats) {
  auto lexed = lex_php(text, true);
  std::string out;
  out.reserve(text.size());
  for (const auto& t : lexed.tokens) {
    if (t.kind == TokKind::String && t.quote != '`') {
      if (t.unterminated && stats) stats->unterminated_literal = true;
      std::string_view content = literal_content(text, t);
      if (count_codepoints(content) > tau) {
        out.push_back('"');
        out.append(kLongStrToken);
        out.push_back('"');
        continue;
      }
    }
    out.append(t.text(text));
  }
  return out;
}

std::vector<std::string> tokenize_texts(std::string_view text) {
  auto lexed = lex_php(text, false);
  std::vector<std::string> out;
  out.reserve(lexed.tokens.size());
  bool last_was_unknown = false;
  for (const auto& t : lexed.tokens) {
    if (t.kind == TokKind::Unknown) {
      if (!last_was_unknown) out.emplace_back(kUnkToken);
      last_was_unknown = true;
      continue;
    }
    last_was_unknown = false;
    switch (t.kind) {
      case TokKind::InlineHtml:
        out.emplace_back(kHtmlToken);
        break;
      case TokKind::String: {
        std::string_view whole = t.text(text);
        if (whole.size() == 12 && whole[0] == '"' && whole.substr(1, 10) == kLongStrToken)
          out.emplace_back(kLongStrToken);
        else
          out.emplace_back(whole);
        break;
      }
      default:
        out.emplace_back(t.text(text));
        break;
    }
  }
  return out;
}

TokenSequence head_tail_truncate(TokenSequence seq, size_t m) {
  size_t n = std::max(seq.ids.size(), seq.texts.size());
  seq.n_original = n;
  if (n <= m) {
    seq.truncated = false;
    return seq;
  }
  size_t head = m / 2;
  size_t tail = m - head;
  auto cut = [&](auto& v) {
    using V = std::decay_t<decltype(v)>;
    if (v.empty()) return;
    V out;
    out.reserve(m);
    out.insert(out.end(), v.begin(), v.begin() + static_cast<ptrdiff_t>(head));
    out.insert(out.end(), v.end() - static_cast<ptrdiff_t>(tail), v.end());
    v = std::move(out);
  };
  cut(seq.ids);
  cut(seq.texts);
  seq.truncated = true;
  return seq;
}

TokenVocab TokenVocab::build(const std::vector<std::vector<std::string>>& train_docs, size_t cap) {
  std::unordered_map<std::string, uint64_t> freq;
  for (const auto& doc : train_docs) {
    for (const auto& tok : doc) {
      if (tok == kLongStrToken) continue;  // reserved
      ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  TokenVocab v;
  size_t keep = cap > 3 ? cap - 3 : 0;
  if (ranked.size() > keep) ranked.resize(keep);
  for (const auto& [tok, cnt] : ranked) {
    (void)cnt;
    v.token_to_id.emplace(tok, v.next_id++);
  }
  return v;
}

std::vector<int> TokenVocab::apply(const std::vector<std::string>& texts) const {
  std::vector<int> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) {
    if (t == kLongStrToken) {
      ids.push_back(long_str_id);
      continue;
    }
    auto it = token_to_id.find(t);
    ids.push_back(it == token_to_id.end() ? unk_id : it->second);
  }
  return ids;
}

std::vector<std::string> source_token_texts(std::string_view raw, size_t tau,
                                            PreprocessStats* stats) {
  std::string pre = preprocess(raw, stats);
  std::string compressed = compress_long_strings(pre, tau, stats);
  return tokenize_texts(compressed);
}

}  // namespace shellsift
