#include "shellsift/php_parser.hpp"

#include "shellsift/lexer.hpp"
#include "shellsift/util.hpp"

#include <array>
#include <initializer_list>

namespace shellsift {

const char* node_type_name(NodeType t) {
  static const char* names[] = {
#define SHELLSIFT_NT_NAME(id, name) name,
      SHELLSIFT_NODE_TYPES(SHELLSIFT_NT_NAME)
#undef SHELLSIFT_NT_NAME
  };
  return names[static_cast<size_t>(t)];
}

namespace {

using NT = NodeType;

bool kw_eq(std::string_view tok, std::string_view kw) {
  if (tok.size() != kw.size()) return false;
  for (size_t i = 0; i < tok.size(); ++i) {
    char a = tok[i];
    if (a >= 'A' && a <= 'Z') a = char(a - 'A' + 'a');
    if (a != kw[i]) return false;
  }
  return true;
}

bool is_cast_word(std::string_view w) {
  static const std::array<const char*, 12> words = {"int",    "integer", "bool",  "boolean",
                                                    "float",  "double",  "real",  "string",
                                                    "array",  "object",  "unset", "binary"};
  for (auto c : words)
    if (kw_eq(w, c)) return true;
  return false;
}

bool is_modifier_word(std::string_view w) {
  static const std::array<const char*, 8> words = {"public", "protected", "private", "static",
                                                   "abstract", "final", "readonly", "var"};
  for (auto c : words)
    if (kw_eq(w, c)) return true;
  return false;
}

struct Parser {
  std::string_view src;
  std::vector<Token> t;
  size_t p = 0;
  SyntaxTree tree;
  int depth = 0;
  static constexpr int kMaxDepth = 160;

  explicit Parser(std::string_view s) : src(s) {
    auto lexed = lex_php(s, false);
    t = std::move(lexed.tokens);
    if (lexed.had_errors) tree.had_errors = true;
  }

  bool at_end() const { return p >= t.size(); }
  const Token& cur() const { return t[p]; }
  std::string_view txt(size_t i) const { return t[i].text(src); }

  bool is_kind(TokKind k) const { return !at_end() && cur().kind == k; }
  bool is_op(std::string_view o) const {
    return !at_end() && cur().kind == TokKind::Op && txt(p) == o;
  }
  bool is_op_at(size_t i, std::string_view o) const {
    return i < t.size() && t[i].kind == TokKind::Op && txt(i) == o;
  }
  bool is_kw(std::string_view k) const {
    return !at_end() && cur().kind == TokKind::Identifier && kw_eq(txt(p), k);
  }
  bool is_kw_at(size_t i, std::string_view k) const {
    return i < t.size() && t[i].kind == TokKind::Identifier && kw_eq(txt(i), k);
  }
  bool eat_op(std::string_view o) {
    if (is_op(o)) {
      ++p;
      return true;
    }
    return false;
  }
  bool eat_kw(std::string_view k) {
    if (is_kw(k)) {
      ++p;
      return true;
    }
    return false;
  }

  size_t here() const { return at_end() ? src.size() : cur().begin; }
  size_t prev_end() const { return p ? t[p - 1].end : 0; }

  uint32_t add(NT ty, size_t b, size_t e, std::vector<uint32_t> kids = {}, bool err = false) {
    if (err) tree.had_errors = true;
    SyntaxTree::Node n;
    n.type = ty;
    // e < b means b was sampled at the next unconsumed token and nothing got
    // consumed; collapse the node at the last consumed edge so it stays inside
    // whatever parent is being assembled.
    n.begin = e < b ? e : b;
    n.end = e;
    n.error = err;
    n.kids = std::move(kids);
    tree.nodes.push_back(std::move(n));
    return static_cast<uint32_t>(tree.nodes.size() - 1);
  }

  uint32_t leaf_advance(NT ty) {
    size_t b = cur().begin, e = cur().end;
    ++p;
    return add(ty, b, e);
  }

  uint32_t error_advance() {
    size_t b = cur().begin, e = cur().end;
    ++p;
    return add(NT::error, b, e, {}, true);
  }

  uint32_t error_here() { return add(NT::error, prev_end(), prev_end(), {}, true); }

  struct DepthGuard {
    Parser& pr;
    explicit DepthGuard(Parser& q) : pr(q) { ++pr.depth; }
    ~DepthGuard() { --pr.depth; }
  };
  bool too_deep() const { return depth >= kMaxDepth; }

  // ---- entry ----

  void run() {
    std::vector<uint32_t> kids;
    while (!at_end()) {
      size_t before = p;
      kids.push_back(parse_statement());
      if (p == before) break;  // parse_statement guarantees progress; belt and suspenders
    }
    SyntaxTree::Node root;
    root.type = NT::program;
    root.begin = 0;
    root.end = src.size();
    root.kids = std::move(kids);
    tree.nodes.insert(tree.nodes.begin(), std::move(root));
    for (auto& n : tree.nodes)
      for (auto& k : n.kids) k += 1;
  }

  // ---- statements ----

  uint32_t parse_statement() {
    if (too_deep() || at_end()) return at_end() ? error_here() : error_advance();
    DepthGuard g(*this);
    size_t start_p = p;
    uint32_t node = parse_statement_inner();
    if (p == start_p && !at_end()) return error_advance();
    return node;
  }

  uint32_t parse_statement_inner() {
    size_t b = here();
    switch (cur().kind) {
      case TokKind::InlineHtml:
        return leaf_advance(NT::text);
      case TokKind::OpenTag:
        return leaf_advance(NT::php_tag);
      case TokKind::CloseTag: {
        std::vector<uint32_t> kids;
        ++p;
        if (is_kind(TokKind::InlineHtml)) kids.push_back(leaf_advance(NT::text));
        if (is_kind(TokKind::OpenTag)) ++p;
        return add(NT::text_interpolation, b, prev_end(), std::move(kids));
      }
      default:
        break;
    }
    if (is_op(";")) return leaf_advance(NT::empty_statement);
    if (is_op("{")) return parse_compound();
    if (is_op("#[")) return parse_attribute_list();

    if (is_kind(TokKind::Identifier)) {
      std::string_view w = txt(p);
      if (kw_eq(w, "if")) return parse_if();
      if (kw_eq(w, "while")) return parse_while();
      if (kw_eq(w, "do")) return parse_do();
      if (kw_eq(w, "for")) return parse_for();
      if (kw_eq(w, "foreach")) return parse_foreach();
      if (kw_eq(w, "switch")) return parse_switch();
      if (kw_eq(w, "break") || kw_eq(w, "continue")) {
        NT ty = kw_eq(w, "break") ? NT::break_statement : NT::continue_statement;
        ++p;
        std::vector<uint32_t> kids;
        if (!is_op(";") && !at_end() && !is_op("}") && !is_kind(TokKind::CloseTag))
          kids.push_back(parse_expr());
        eat_op(";");
        return add(ty, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "return")) {
        ++p;
        std::vector<uint32_t> kids;
        if (!is_op(";") && !at_end() && !is_op("}") && !is_kind(TokKind::CloseTag))
          kids.push_back(parse_expr());
        eat_op(";");
        return add(NT::return_statement, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "goto")) {
        ++p;
        std::vector<uint32_t> kids;
        if (is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
        eat_op(";");
        return add(NT::goto_statement, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "echo")) {
        ++p;
        std::vector<uint32_t> kids;
        if (!is_op(";") && !at_end()) {
          kids.push_back(parse_expr());
          while (eat_op(",") && !at_end()) kids.push_back(parse_expr());
        }
        eat_op(";");
        return add(NT::echo_statement, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "unset")) {
        ++p;
        std::vector<uint32_t> kids;
        if (eat_op("(")) {
          while (!is_op(")") && !at_end()) {
            kids.push_back(parse_expr());
            if (!eat_op(",")) break;
          }
          eat_op(")");
        }
        eat_op(";");
        return add(NT::unset_statement, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "global")) {
        ++p;
        std::vector<uint32_t> kids;
        while (is_kind(TokKind::Variable)) {
          kids.push_back(leaf_advance(NT::variable_name));
          if (!eat_op(",")) break;
        }
        eat_op(";");
        return add(NT::global_declaration, b, prev_end(), std::move(kids));
      }
      if (kw_eq(w, "static") && p + 1 < t.size() && t[p + 1].kind == TokKind::Variable)
        return parse_static_vars();
      if (kw_eq(w, "declare")) return parse_declare();
      if (kw_eq(w, "try")) return parse_try();
      if (kw_eq(w, "namespace")) return parse_namespace();
      if (kw_eq(w, "use")) return parse_namespace_use();
      if (kw_eq(w, "const")) return parse_const(NT::const_declaration);
      if (kw_eq(w, "function") && !(is_op_at(p + 1, "(") || is_op_at(p + 1, "&")))
        return parse_function_definition(NT::function_definition, {});
      if (kw_eq(w, "abstract") || kw_eq(w, "final") ||
          (kw_eq(w, "readonly") && is_kw_at(p + 1, "class"))) {
        size_t q = p;
        while (q < t.size() && t[q].kind == TokKind::Identifier && is_modifier_word(txt(q))) ++q;
        if (is_kw_at(q, "class")) return parse_class_like();
      }
      if (kw_eq(w, "class")) return parse_class_like();
      if (kw_eq(w, "interface")) return parse_class_like();
      if (kw_eq(w, "trait")) return parse_class_like();
      if (kw_eq(w, "enum") && p + 1 < t.size() && t[p + 1].kind == TokKind::Identifier &&
          !is_op_at(p + 1, "("))
        return parse_class_like();
      // goto label: identifier directly followed by ':' (but not '::')
      if (p + 1 < t.size() && is_op_at(p + 1, ":")) {
        std::vector<uint32_t> kids;
        kids.push_back(leaf_advance(NT::name));
        eat_op(":");
        return add(NT::named_label_statement, b, prev_end(), std::move(kids));
      }
    }

    // expression statement
    std::vector<uint32_t> kids;
    kids.push_back(parse_expr());
    eat_op(";");
    return add(NT::expression_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_compound() {
    size_t b = here();
    eat_op("{");
    std::vector<uint32_t> kids;
    while (!at_end() && !is_op("}")) {
      size_t before = p;
      kids.push_back(parse_statement());
      if (p == before) break;
    }
    eat_op("}");
    return add(NT::compound_statement, b, prev_end(), std::move(kids));
  }

  // condition in parens; tolerant when parens are missing
  uint32_t parse_paren_expr() {
    if (eat_op("(")) {
      uint32_t e = at_end() || is_op(")") ? error_here() : parse_expr();
      eat_op(")");
      return e;
    }
    return parse_expr();
  }

  void parse_stmts_until(std::vector<uint32_t>& kids,
                         std::initializer_list<std::string_view> terms) {
    while (!at_end() && !is_op("}")) {
      bool stop = false;
      for (auto kw : terms)
        if (is_kw(kw)) stop = true;
      if (stop) break;
      size_t before = p;
      kids.push_back(parse_statement());
      if (p == before) break;
    }
  }

  uint32_t parse_if() {
    size_t b = here();
    eat_kw("if");
    std::vector<uint32_t> kids;
    kids.push_back(parse_paren_expr());
    if (eat_op(":")) {
      parse_stmts_until(kids, {"elseif", "else", "endif"});
      while (is_kw("elseif")) {
        size_t cb = here();
        ++p;
        std::vector<uint32_t> ck;
        ck.push_back(parse_paren_expr());
        eat_op(":");
        parse_stmts_until(ck, {"elseif", "else", "endif"});
        kids.push_back(add(NT::else_if_clause, cb, prev_end(), std::move(ck)));
      }
      if (is_kw("else")) {
        size_t cb = here();
        ++p;
        eat_op(":");
        std::vector<uint32_t> ck;
        parse_stmts_until(ck, {"endif"});
        kids.push_back(add(NT::else_clause, cb, prev_end(), std::move(ck)));
      }
      eat_kw("endif");
      eat_op(";");
      return add(NT::if_statement, b, prev_end(), std::move(kids));
    }
    kids.push_back(parse_statement());
    while (is_kw("elseif")) {
      size_t cb = here();
      ++p;
      std::vector<uint32_t> ck;
      ck.push_back(parse_paren_expr());
      ck.push_back(parse_statement());
      kids.push_back(add(NT::else_if_clause, cb, prev_end(), std::move(ck)));
    }
    if (is_kw("else")) {
      size_t cb = here();
      ++p;
      std::vector<uint32_t> ck;
      ck.push_back(parse_statement());
      kids.push_back(add(NT::else_clause, cb, prev_end(), std::move(ck)));
    }
    return add(NT::if_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_while() {
    size_t b = here();
    eat_kw("while");
    std::vector<uint32_t> kids;
    kids.push_back(parse_paren_expr());
    if (eat_op(":")) {
      parse_stmts_until(kids, {"endwhile"});
      eat_kw("endwhile");
      eat_op(";");
    } else {
      kids.push_back(parse_statement());
    }
    return add(NT::while_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_do() {
    size_t b = here();
    eat_kw("do");
    std::vector<uint32_t> kids;
    kids.push_back(parse_statement());
    eat_kw("while");
    kids.push_back(parse_paren_expr());
    eat_op(";");
    return add(NT::do_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_for() {
    size_t b = here();
    eat_kw("for");
    std::vector<uint32_t> kids;
    if (eat_op("(")) {
      for (int section = 0; section < 3; ++section) {
        while (!at_end() && !is_op(";") && !is_op(")")) {
          kids.push_back(parse_expr());
          if (!eat_op(",")) break;
        }
        if (!eat_op(";")) break;
      }
      eat_op(")");
    }
    if (eat_op(":")) {
      parse_stmts_until(kids, {"endfor"});
      eat_kw("endfor");
      eat_op(";");
    } else {
      kids.push_back(parse_statement());
    }
    return add(NT::for_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_foreach() {
    size_t b = here();
    eat_kw("foreach");
    std::vector<uint32_t> kids;
    if (eat_op("(")) {
      if (!is_op(")") && !at_end()) kids.push_back(parse_expr());
      if (eat_kw("as")) {
        eat_op("&");
        if (!is_op(")") && !at_end()) kids.push_back(parse_expr());
        if (eat_op("=>")) {
          eat_op("&");
          if (!is_op(")") && !at_end()) kids.push_back(parse_expr());
        }
      }
      eat_op(")");
    }
    if (eat_op(":")) {
      parse_stmts_until(kids, {"endforeach"});
      eat_kw("endforeach");
      eat_op(";");
    } else {
      kids.push_back(parse_statement());
    }
    return add(NT::foreach_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_case_body(NT ty) {
    size_t b = here();
    ++p;  // case/default keyword
    std::vector<uint32_t> kids;
    if (ty == NT::case_statement && !is_op(":") && !is_op(";") && !at_end())
      kids.push_back(parse_expr());
    if (!eat_op(":")) eat_op(";");
    parse_stmts_until(kids, {"case", "default", "endswitch"});
    return add(ty, b, prev_end(), std::move(kids));
  }

  uint32_t parse_switch() {
    size_t b = here();
    eat_kw("switch");
    std::vector<uint32_t> kids;
    kids.push_back(parse_paren_expr());
    size_t blk_b = here();
    std::vector<uint32_t> cases;
    bool alt = false;
    if (eat_op("{")) {
    } else if (eat_op(":")) {
      alt = true;
    }
    while (!at_end()) {
      if (is_kw("case")) {
        cases.push_back(parse_case_body(NT::case_statement));
        continue;
      }
      if (is_kw("default")) {
        cases.push_back(parse_case_body(NT::default_statement));
        continue;
      }
      break;
    }
    if (alt) {
      eat_kw("endswitch");
      eat_op(";");
    } else {
      eat_op("}");
    }
    kids.push_back(add(NT::switch_block, blk_b, prev_end(), std::move(cases)));
    return add(NT::switch_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_static_vars() {
    size_t b = here();
    eat_kw("static");
    std::vector<uint32_t> kids;
    while (is_kind(TokKind::Variable)) {
      uint32_t v = leaf_advance(NT::variable_name);
      if (eat_op("=")) {
        uint32_t e = parse_expr();
        kids.push_back(add(NT::assignment_expression, tree.nodes[v].begin, prev_end(), {v, e}));
      } else {
        kids.push_back(v);
      }
      if (!eat_op(",")) break;
    }
    eat_op(";");
    return add(NT::function_static_declaration, b, prev_end(), std::move(kids));
  }

  uint32_t parse_declare() {
    size_t b = here();
    eat_kw("declare");
    std::vector<uint32_t> kids;
    if (eat_op("(")) {
      while (!at_end() && !is_op(")")) {
        kids.push_back(parse_expr());
        if (!eat_op(",")) break;
      }
      eat_op(")");
    }
    if (eat_op(":")) {
      parse_stmts_until(kids, {"enddeclare"});
      eat_kw("enddeclare");
      eat_op(";");
    } else if (!eat_op(";")) {
      if (!at_end()) kids.push_back(parse_statement());
    }
    return add(NT::declare_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_try() {
    size_t b = here();
    eat_kw("try");
    std::vector<uint32_t> kids;
    kids.push_back(parse_compound());
    while (is_kw("catch")) {
      size_t cb = here();
      ++p;
      std::vector<uint32_t> ck;
      if (eat_op("(")) {
        while (!at_end() && !is_op(")")) {
          if (is_kind(TokKind::Variable)) {
            ck.push_back(leaf_advance(NT::variable_name));
          } else if (is_kind(TokKind::Identifier) || is_op("\\")) {
            ck.push_back(parse_name());
          } else {
            ++p;
            continue;
          }
          if (!eat_op("|")) {
            if (is_kind(TokKind::Variable)) ck.push_back(leaf_advance(NT::variable_name));
            break;
          }
        }
        eat_op(")");
      }
      if (is_op("{")) ck.push_back(parse_compound());
      kids.push_back(add(NT::catch_clause, cb, prev_end(), std::move(ck)));
    }
    if (is_kw("finally")) {
      size_t fb = here();
      ++p;
      std::vector<uint32_t> fk;
      if (is_op("{")) fk.push_back(parse_compound());
      kids.push_back(add(NT::finally_clause, fb, prev_end(), std::move(fk)));
    }
    return add(NT::try_statement, b, prev_end(), std::move(kids));
  }

  uint32_t parse_namespace() {
    size_t b = here();
    eat_kw("namespace");
    std::vector<uint32_t> kids;
    if (is_kind(TokKind::Identifier) || is_op("\\")) kids.push_back(parse_name());
    if (is_op("{"))
      kids.push_back(parse_compound());
    else
      eat_op(";");
    return add(NT::namespace_definition, b, prev_end(), std::move(kids));
  }

  uint32_t parse_namespace_use() {
    size_t b = here();
    eat_kw("use");
    eat_kw("function") || eat_kw("const");
    std::vector<uint32_t> kids;
    while (!at_end() && !is_op(";")) {
      if (is_kind(TokKind::Identifier) || is_op("\\")) {
        kids.push_back(parse_name());
        if (eat_kw("as") && is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
        if (eat_op("{")) {  // group use
          int braces = 1;
          while (!at_end() && braces) {
            if (is_op("{")) ++braces;
            if (is_op("}")) --braces;
            if (braces) ++p;
          }
          eat_op("}");
        }
        if (!eat_op(",")) break;
      } else {
        ++p;
      }
    }
    eat_op(";");
    return add(NT::namespace_use_declaration, b, prev_end(), std::move(kids));
  }

  uint32_t parse_const(NT ty) {
    size_t b = here();
    eat_kw("const");
    std::vector<uint32_t> kids;
    while (is_kind(TokKind::Identifier)) {
      uint32_t n = leaf_advance(NT::name);
      if (eat_op("=")) {
        uint32_t e = parse_expr();
        kids.push_back(add(NT::assignment_expression, tree.nodes[n].begin, prev_end(), {n, e}));
      } else {
        kids.push_back(n);
      }
      if (!eat_op(",")) break;
    }
    eat_op(";");
    return add(ty, b, prev_end(), std::move(kids));
  }

  uint32_t parse_attribute_list() {
    size_t b = here();
    eat_op("#[");
    std::vector<uint32_t> kids;
    while (!at_end() && !is_op("]")) {
      if (is_kind(TokKind::Identifier) || is_op("\\")) {
        size_t ab = here();
        std::vector<uint32_t> ak;
        ak.push_back(parse_name());
        if (is_op("(")) ak.push_back(parse_arguments());
        kids.push_back(add(NT::attribute, ab, prev_end(), std::move(ak)));
        if (!eat_op(",")) break;
      } else {
        ++p;
      }
    }
    eat_op("]");
    return add(NT::attribute_list, b, prev_end(), std::move(kids));
  }

  // ---- declarations ----

  uint32_t parse_function_definition(NT ty, std::vector<uint32_t> kids) {
    size_t b = kids.empty() ? here() : tree.nodes[kids.front()].begin;
    eat_kw("function");
    eat_op("&");
    if (is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
    kids.push_back(parse_formal_parameters());
    if (eat_op(":")) skip_type();
    if (is_op("{"))
      kids.push_back(parse_compound());
    else
      eat_op(";");  // abstract/interface method
    return add(ty, b, prev_end(), std::move(kids));
  }

  void skip_type() {
    eat_op("?");
    while (!at_end()) {
      if (is_kind(TokKind::Identifier)) {
        ++p;
      } else if (is_op("\\")) {
        ++p;
        continue;
      } else if (is_op("(")) {  // DNF type group
        int pd = 1;
        ++p;
        while (!at_end() && pd) {
          if (is_op("(")) ++pd;
          if (is_op(")")) --pd;
          ++p;
        }
      } else {
        break;
      }
      if (is_op("\\")) {
        ++p;
        continue;
      }
      if (is_op("|") || is_op("&")) {
        // '&' might be a by-ref marker for the next parameter piece; only
        // continue when another type name follows
        if (p + 1 < t.size() &&
            (t[p + 1].kind == TokKind::Identifier || is_op_at(p + 1, "\\") ||
             is_op_at(p + 1, "("))) {
          ++p;
          continue;
        }
      }
      break;
    }
  }

  uint32_t parse_formal_parameters() {
    size_t b = here();
    std::vector<uint32_t> kids;
    if (eat_op("(")) {
      while (!at_end() && !is_op(")")) {
        size_t before = p;
        kids.push_back(parse_parameter());
        if (p == before) ++p;
        eat_op(",");
      }
      eat_op(")");
    }
    return add(NT::formal_parameters, b, prev_end(), std::move(kids));
  }

  uint32_t parse_parameter() {
    size_t b = here();
    std::vector<uint32_t> kids;
    if (is_op("#[")) kids.push_back(parse_attribute_list());
    while (is_kind(TokKind::Identifier) && is_modifier_word(txt(p))) ++p;
    if (!is_kind(TokKind::Variable) && !is_op("&") && !is_op("...")) skip_type();
    eat_op("&");
    bool variadic = eat_op("...");
    if (is_kind(TokKind::Variable)) kids.push_back(leaf_advance(NT::variable_name));
    if (eat_op("=")) kids.push_back(parse_expr());
    return add(variadic ? NT::variadic_parameter : NT::simple_parameter, b, prev_end(),
               std::move(kids));
  }

  uint32_t parse_class_like() {
    size_t b = here();
    while (is_kind(TokKind::Identifier) && is_modifier_word(txt(p))) ++p;
    NT ty = NT::class_declaration;
    if (eat_kw("class")) {
      ty = NT::class_declaration;
    } else if (eat_kw("interface")) {
      ty = NT::interface_declaration;
    } else if (eat_kw("trait")) {
      ty = NT::trait_declaration;
    } else if (eat_kw("enum")) {
      ty = NT::enum_declaration;
    }
    std::vector<uint32_t> kids;
    if (is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
    if (eat_op(":")) skip_type();  // enum backing type
    if (eat_kw("extends")) {
      kids.push_back(parse_name());
      while (eat_op(",")) {
        if (is_kind(TokKind::Identifier) || is_op("\\"))
          kids.push_back(parse_name());
        else
          break;
      }
    }
    if (eat_kw("implements")) {
      kids.push_back(parse_name());
      while (eat_op(",")) {
        if (is_kind(TokKind::Identifier) || is_op("\\"))
          kids.push_back(parse_name());
        else
          break;
      }
    }
    kids.push_back(parse_declaration_list());
    return add(ty, b, prev_end(), std::move(kids));
  }

  uint32_t parse_declaration_list() {
    size_t b = here();
    std::vector<uint32_t> kids;
    if (eat_op("{")) {
      while (!at_end() && !is_op("}")) {
        size_t before = p;
        kids.push_back(parse_member());
        if (p == before) kids.push_back(error_advance());
      }
      eat_op("}");
    }
    return add(NT::declaration_list, b, prev_end(), std::move(kids));
  }

  uint32_t parse_member() {
    size_t b = here();
    if (is_op("#[")) return parse_attribute_list();
    size_t q = p;
    while (q < t.size() && t[q].kind == TokKind::Identifier && is_modifier_word(txt(q))) ++q;
    if (is_kw_at(q, "function")) {
      while (p < q) ++p;
      return parse_function_definition(NT::method_declaration, {});
    }
    if (is_kw_at(q, "const")) {
      while (p < q) ++p;
      return parse_const(NT::const_declaration);
    }
    if (is_kw("use")) {
      ++p;
      std::vector<uint32_t> kids;
      while (is_kind(TokKind::Identifier) || is_op("\\")) {
        kids.push_back(parse_name());
        if (!eat_op(",")) break;
      }
      if (eat_op("{")) {
        while (!at_end() && !is_op("}")) ++p;
        eat_op("}");
      }
      eat_op(";");
      return add(NT::use_declaration, b, prev_end(), std::move(kids));
    }
    if (is_kw("case")) {
      ++p;
      std::vector<uint32_t> kids;
      if (is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
      if (eat_op("=")) kids.push_back(parse_expr());
      eat_op(";");
      return add(NT::enum_case, b, prev_end(), std::move(kids));
    }
    // property: modifiers, optional type, $var [= expr] (, ...) ;
    while (p < q) ++p;
    if (!is_kind(TokKind::Variable)) skip_type();
    if (is_kind(TokKind::Variable)) {
      std::vector<uint32_t> kids;
      while (is_kind(TokKind::Variable)) {
        uint32_t v = leaf_advance(NT::variable_name);
        if (eat_op("=")) {
          uint32_t e = parse_expr();
          kids.push_back(add(NT::assignment_expression, tree.nodes[v].begin, prev_end(), {v, e}));
        } else {
          kids.push_back(v);
        }
        if (!eat_op(",")) break;
      }
      eat_op(";");
      return add(NT::property_declaration, b, prev_end(), std::move(kids));
    }
    return error_advance();
  }

  // ---- expressions ----

  uint32_t parse_expr() {
    if (too_deep()) return at_end() ? error_here() : error_advance();
    DepthGuard g(*this);
    return parse_assignment();
  }

  uint32_t parse_assignment() {
    size_t b = here();
    uint32_t lhs = parse_ternary();
    if (is_op("=")) {
      ++p;
      if (eat_op("&")) {
        uint32_t rhs = parse_assignment();
        return add(NT::reference_assignment_expression, b, prev_end(), {lhs, rhs});
      }
      uint32_t rhs = parse_assignment();
      return add(NT::assignment_expression, b, prev_end(), {lhs, rhs});
    }
    static const std::array<const char*, 13> aug = {"+=", "-=", "*=", "/=",  ".=",  "%=", "**=",
                                                    "&=", "|=", "^=", "<<=", ">>=", "?\?="};
    for (auto op : aug) {
      if (is_op(op)) {
        ++p;
        uint32_t rhs = parse_assignment();
        return add(NT::augmented_assignment_expression, b, prev_end(), {lhs, rhs});
      }
    }
    return lhs;
  }

  uint32_t parse_ternary() {
    size_t b = here();
    uint32_t cond = parse_binary(0);
    if (is_op("?")) {
      ++p;
      if (eat_op(":")) {
        uint32_t rhs = parse_ternary();
        return add(NT::conditional_expression, b, prev_end(), {cond, rhs});
      }
      uint32_t mid = parse_expr();
      eat_op(":");
      uint32_t rhs = parse_ternary();
      return add(NT::conditional_expression, b, prev_end(), {cond, mid, rhs});
    }
    return cond;
  }

  // binary operator precedence, loosest first
  struct Level {
    std::vector<std::string_view> ops;
    std::vector<std::string_view> kws;
  };
  static const std::vector<Level>& levels() {
    static const std::vector<Level> ls = {
        {{}, {"or", "xor"}},
        {{}, {"and"}},
        {{"??"}, {}},
        {{"||"}, {}},
        {{"&&"}, {}},
        {{"|"}, {}},
        {{"^"}, {}},
        {{"&"}, {}},
        {{"==", "!=", "===", "!==", "<>"}, {}},
        {{"<", "<=", ">", ">=", "<=>"}, {}},
        {{"<<", ">>"}, {}},
        {{"+", "-", "."}, {}},
        {{"*", "/", "%"}, {}},
        {{}, {"instanceof"}},
    };
    return ls;
  }

  uint32_t parse_binary(size_t level) {
    if (level >= levels().size()) return parse_unary();
    size_t b = here();
    uint32_t lhs = parse_binary(level + 1);
    const Level& lv = levels()[level];
    for (;;) {
      bool matched = false;
      for (auto op : lv.ops) {
        if (is_op(op)) {
          ++p;
          matched = true;
          break;
        }
      }
      if (!matched) {
        for (auto kw : lv.kws) {
          if (is_kw(kw)) {
            ++p;
            matched = true;
            break;
          }
        }
      }
      if (!matched) return lhs;
      uint32_t rhs = parse_binary(level + 1);
      lhs = add(NT::binary_expression, b, prev_end(), {lhs, rhs});
    }
  }

  uint32_t parse_unary() {
    if (too_deep()) return at_end() ? error_here() : error_advance();
    DepthGuard g(*this);
    size_t b = here();
    if (at_end()) return error_here();

    if (is_op("++") || is_op("--")) {
      ++p;
      uint32_t e = parse_unary();
      return add(NT::update_expression, b, prev_end(), {e});
    }
    if (is_op("!") || is_op("~") || is_op("+") || is_op("-") || is_op("&")) {
      ++p;
      uint32_t e = parse_unary();
      return add(NT::unary_op_expression, b, prev_end(), {e});
    }
    if (is_op("@")) {
      ++p;
      uint32_t e = parse_unary();
      return add(NT::error_suppression_expression, b, prev_end(), {e});
    }
    if (is_op("(") && p + 2 < t.size() && t[p + 1].kind == TokKind::Identifier &&
        is_cast_word(txt(p + 1)) && is_op_at(p + 2, ")")) {
      p += 3;
      uint32_t e = parse_unary();
      return add(NT::cast_expression, b, prev_end(), {e});
    }
    if (is_kw("print")) {
      ++p;
      uint32_t e = parse_expr();
      return add(NT::print_intrinsic, b, prev_end(), {e});
    }
    if (is_kw("clone")) {
      ++p;
      uint32_t e = parse_unary();
      return add(NT::clone_expression, b, prev_end(), {e});
    }
    if (is_kw("throw")) {
      ++p;
      uint32_t e = parse_expr();
      return add(NT::throw_expression, b, prev_end(), {e});
    }
    if (is_kw("new")) return parse_new();
    if (is_kw("include") || is_kw("include_once") || is_kw("require") || is_kw("require_once")) {
      NT ty = is_kw("include")        ? NT::include_expression
              : is_kw("include_once") ? NT::include_once_expression
              : is_kw("require")      ? NT::require_expression
                                      : NT::require_once_expression;
      ++p;
      uint32_t e = parse_expr();
      return add(ty, b, prev_end(), {e});
    }
    if (is_kw("exit") || is_kw("die")) {
      ++p;
      std::vector<uint32_t> kids;
      if (eat_op("(")) {
        if (!is_op(")") && !at_end()) kids.push_back(parse_expr());
        eat_op(")");
      }
      return add(NT::exit_expression, b, prev_end(), std::move(kids));
    }
    if (is_kw("yield")) {
      ++p;
      eat_kw("from");
      std::vector<uint32_t> kids;
      if (!at_end() && !is_op(";") && !is_op(")") && !is_op(",") && !is_op("]") && !is_op("}"))
        kids.push_back(parse_expr());
      return add(NT::unary_op_expression, b, prev_end(), std::move(kids));
    }
    return parse_power();
  }

  uint32_t parse_new() {
    size_t b = here();
    eat_kw("new");
    std::vector<uint32_t> kids;
    if (is_kw("class")) {  // anonymous class
      ++p;
      if (is_op("(")) kids.push_back(parse_arguments());
      if (eat_kw("extends")) kids.push_back(parse_name());
      if (eat_kw("implements")) {
        kids.push_back(parse_name());
        while (eat_op(",") && (is_kind(TokKind::Identifier) || is_op("\\")))
          kids.push_back(parse_name());
      }
      kids.push_back(parse_declaration_list());
      return add(NT::object_creation_expression, b, prev_end(), std::move(kids));
    }
    if (is_kind(TokKind::Identifier) || is_op("\\")) {
      kids.push_back(parse_name());
    } else if (is_kind(TokKind::Variable)) {
      kids.push_back(leaf_advance(NT::variable_name));
    } else if (is_op("(")) {
      ++p;
      kids.push_back(parse_expr());
      eat_op(")");
    }
    if (is_op("(")) kids.push_back(parse_arguments());
    return add(NT::object_creation_expression, b, prev_end(), std::move(kids));
  }

  uint32_t parse_power() {
    size_t b = here();
    uint32_t base = parse_postfix();
    if (is_op("**")) {
      ++p;
      uint32_t e = parse_unary();
      return add(NT::binary_expression, b, prev_end(), {base, e});
    }
    return base;
  }

  uint32_t parse_postfix() {
    size_t b = here();
    uint32_t node = parse_primary();
    for (;;) {
      if (is_op("(")) {
        uint32_t args = parse_arguments();
        NT callee_ty = tree.nodes[node].type;
        NT call_ty = NT::function_call_expression;
        if (callee_ty == NT::member_access_expression) call_ty = NT::member_call_expression;
        else if (callee_ty == NT::nullsafe_member_access_expression)
          call_ty = NT::nullsafe_member_call_expression;
        else if (callee_ty == NT::scoped_property_access_expression ||
                 callee_ty == NT::class_constant_access_expression)
          call_ty = NT::scoped_call_expression;
        node = add(call_ty, b, prev_end(), {node, args});
        continue;
      }
      if (is_op("[")) {
        ++p;
        std::vector<uint32_t> kids{node};
        if (!is_op("]") && !at_end()) kids.push_back(parse_expr());
        eat_op("]");
        node = add(NT::subscript_expression, b, prev_end(), std::move(kids));
        continue;
      }
      if (is_op("->") || is_op("?->")) {
        bool nullsafe = is_op("?->");
        ++p;
        std::vector<uint32_t> kids{node};
        if (is_kind(TokKind::Identifier)) kids.push_back(leaf_advance(NT::name));
        else if (is_kind(TokKind::Variable))
          kids.push_back(leaf_advance(NT::variable_name));
        else if (eat_op("{")) {
          if (!is_op("}") && !at_end()) kids.push_back(parse_expr());
          eat_op("}");
        } else if (is_op("$")) {
          kids.push_back(parse_primary());
        }
        node = add(nullsafe ? NT::nullsafe_member_access_expression : NT::member_access_expression,
                   b, prev_end(), std::move(kids));
        continue;
      }
      if (is_op("::")) {
        ++p;
        std::vector<uint32_t> kids{node};
        NT ty = NT::class_constant_access_expression;
        if (is_kind(TokKind::Variable)) {
          kids.push_back(leaf_advance(NT::variable_name));
          ty = NT::scoped_property_access_expression;
        } else if (is_kind(TokKind::Identifier)) {
          kids.push_back(leaf_advance(NT::name));
        } else if (eat_op("{")) {
          if (!is_op("}") && !at_end()) kids.push_back(parse_expr());
          eat_op("}");
          ty = NT::scoped_property_access_expression;
        } else if (is_op("$")) {
          kids.push_back(parse_primary());
          ty = NT::scoped_property_access_expression;
        }
        node = add(ty, b, prev_end(), std::move(kids));
        continue;
      }
      if (is_op("++") || is_op("--")) {
        ++p;
        node = add(NT::update_expression, b, prev_end(), {node});
        continue;
      }
      return node;
    }
  }

  uint32_t parse_arguments() {
    size_t b = here();
    std::vector<uint32_t> kids;
    eat_op("(");
    while (!at_end() && !is_op(")")) {
      size_t ab = here();
      std::vector<uint32_t> ak;
      // named argument: identifier ':' not followed by ':'
      if (is_kind(TokKind::Identifier) && is_op_at(p + 1, ":")) {
        ak.push_back(leaf_advance(NT::name));
        eat_op(":");
      }
      if (is_op("...")) {
        size_t vb = here();
        ++p;
        uint32_t inner = at_end() || is_op(")") || is_op(",") ? error_here() : parse_expr();
        ak.push_back(add(NT::variadic_unpacking, vb, prev_end(), {inner}));
      } else if (!is_op(")") && !is_op(",") && !at_end()) {
        ak.push_back(parse_expr());
      }
      kids.push_back(add(NT::argument, ab, prev_end(), std::move(ak)));
      if (!eat_op(",")) break;
    }
    eat_op(")");
    return add(NT::arguments, b, prev_end(), std::move(kids));
  }

  uint32_t parse_name() {
    size_t b = here();
    bool qualified = false;
    if (eat_op("\\")) qualified = true;
    size_t parts = 0;
    while (is_kind(TokKind::Identifier)) {
      ++p;
      ++parts;
      if (is_op("\\")) {
        ++p;
        qualified = true;
        continue;
      }
      break;
    }
    if (parts == 0) return add(NT::error, b, prev_end() > b ? prev_end() : b, {}, true);
    return add(qualified ? NT::qualified_name : NT::name, b, prev_end());
  }

  uint32_t string_node(const Token& tok) {
    NT ty = NT::string;
    switch (tok.quote) {
      case '\'': ty = NT::string; break;
      case '"': ty = NT::encapsed_string; break;
      case 'h': ty = NT::heredoc; break;
      case 'n': ty = NT::nowdoc; break;
      case '`': ty = NT::shell_command_expression; break;
      default: break;
    }
    std::vector<uint32_t> kids;
    for (const auto& ev : tok.embedded)
      kids.push_back(add(NT::variable_name, ev.begin, ev.end));
    size_t b = tok.begin, e = tok.end;
    ++p;
    return add(ty, b, e, std::move(kids));
  }

  uint32_t parse_array(bool bracket_form) {
    size_t b = here();
    ++p;  // '[' or 'array'
    if (!bracket_form) {
      if (!eat_op("(")) return add(NT::name, b, prev_end());  // bare 'array' identifier
    }
    std::string_view closer = bracket_form ? "]" : ")";
    std::vector<uint32_t> kids;
    while (!at_end() && !is_op(closer)) {
      size_t eb = here();
      std::vector<uint32_t> ek;
      size_t before = p;
      if (is_op("...")) {
        size_t vb = here();
        ++p;
        uint32_t inner = at_end() || is_op(closer) || is_op(",") ? error_here() : parse_expr();
        ek.push_back(add(NT::variadic_unpacking, vb, prev_end(), {inner}));
      } else {
        eat_op("&");
        ek.push_back(parse_expr());
        if (eat_op("=>")) {
          eat_op("&");
          if (!is_op(closer) && !is_op(",") && !at_end()) ek.push_back(parse_expr());
        }
      }
      kids.push_back(add(NT::array_element_initializer, eb, prev_end(), std::move(ek)));
      if (p == before) ++p;
      if (!eat_op(",")) break;
    }
    eat_op(closer);
    return add(NT::array_creation_expression, b, prev_end(), std::move(kids));
  }

  uint32_t parse_match() {
    size_t b = here();
    eat_kw("match");
    std::vector<uint32_t> kids;
    kids.push_back(parse_paren_expr());
    if (eat_op("{")) {
      while (!at_end() && !is_op("}")) {
        size_t mb = here();
        std::vector<uint32_t> mk;
        size_t before = p;
        if (eat_kw("default")) {
        } else {
          mk.push_back(parse_expr());
          while (eat_op(",") && !is_op("=>") && !is_op("}") && !at_end())
            mk.push_back(parse_expr());
        }
        if (eat_op("=>")) {
          if (!is_op(",") && !is_op("}") && !at_end()) mk.push_back(parse_expr());
        }
        kids.push_back(add(NT::match_arm, mb, prev_end(), std::move(mk)));
        if (p == before) ++p;
        if (!eat_op(",")) break;
      }
      eat_op("}");
    }
    return add(NT::match_expression, b, prev_end(), std::move(kids));
  }

  uint32_t parse_closure(bool is_static) {
    size_t b = here();
    if (is_static) ++p;  // 'static'
    if (is_kw("fn")) {
      ++p;
      eat_op("&");
      std::vector<uint32_t> kids;
      kids.push_back(parse_formal_parameters());
      if (eat_op(":")) skip_type();
      eat_op("=>");
      kids.push_back(parse_expr());
      return add(NT::arrow_function, b, prev_end(), std::move(kids));
    }
    eat_kw("function");
    eat_op("&");
    std::vector<uint32_t> kids;
    kids.push_back(parse_formal_parameters());
    if (is_kw("use")) {
      size_t ub = here();
      ++p;
      std::vector<uint32_t> uk;
      if (eat_op("(")) {
        while (!at_end() && !is_op(")")) {
          eat_op("&");
          if (is_kind(TokKind::Variable))
            uk.push_back(leaf_advance(NT::variable_name));
          else
            ++p;
          eat_op(",");
        }
        eat_op(")");
      }
      kids.push_back(add(NT::anonymous_function_use_clause, ub, prev_end(), std::move(uk)));
    }
    if (eat_op(":")) skip_type();
    if (is_op("{")) kids.push_back(parse_compound());
    return add(NT::anonymous_function, b, prev_end(), std::move(kids));
  }

  uint32_t parse_primary() {
    if (at_end()) return error_here();
    size_t b = here();
    switch (cur().kind) {
      case TokKind::Number: {
        std::string_view w = txt(p);
        bool is_float = false;
        if (w.size() > 1 && (w[1] == 'x' || w[1] == 'X' || w[1] == 'b' || w[1] == 'B')) {
          is_float = false;
        } else {
          for (char c : w)
            if (c == '.' || c == 'e' || c == 'E') is_float = true;
        }
        return leaf_advance(is_float ? NT::float_literal : NT::integer);
      }
      case TokKind::String:
        return string_node(cur());
      case TokKind::Variable:
        return leaf_advance(NT::variable_name);
      case TokKind::Identifier: {
        std::string_view w = txt(p);
        if (kw_eq(w, "true") || kw_eq(w, "false")) return leaf_advance(NT::boolean);
        if (kw_eq(w, "null")) return leaf_advance(NT::null_literal);
        if (kw_eq(w, "array") && is_op_at(p + 1, "(")) return parse_array(false);
        if (kw_eq(w, "list") && is_op_at(p + 1, "(")) {
          ++p;
          uint32_t arr = parse_array_tail_paren(b);
          return arr;
        }
        if (kw_eq(w, "match") && is_op_at(p + 1, "(")) return parse_match();
        if (kw_eq(w, "function") && (is_op_at(p + 1, "(") || is_op_at(p + 1, "&")))
          return parse_closure(false);
        if (kw_eq(w, "fn")) return parse_closure(false);
        if (kw_eq(w, "static") &&
            (is_kw_at(p + 1, "function") || is_kw_at(p + 1, "fn")))
          return parse_closure(true);
        return parse_name();
      }
      case TokKind::Op: {
        if (is_op("(")) {
          ++p;
          std::vector<uint32_t> kids;
          if (!is_op(")") && !at_end()) kids.push_back(parse_expr());
          eat_op(")");
          return add(NT::parenthesized_expression, b, prev_end(), std::move(kids));
        }
        if (is_op("[")) return parse_array(true);
        if (is_op("\\")) return parse_name();
        if (is_op("#[")) return parse_attribute_list();
        if (is_op("$")) {
          ++p;
          std::vector<uint32_t> kids;
          if (is_kind(TokKind::Variable)) {
            kids.push_back(leaf_advance(NT::variable_name));
          } else if (eat_op("{")) {
            if (!is_op("}") && !at_end()) kids.push_back(parse_expr());
            eat_op("}");
          } else if (is_op("$")) {
            kids.push_back(parse_primary());
          }
          return add(NT::dynamic_variable_name, b, prev_end(), std::move(kids),
                     kids.empty());
        }
        return error_advance();
      }
      default:
        return error_advance();
    }
  }

  // list(...) tail after consuming the 'list' identifier
  uint32_t parse_array_tail_paren(size_t b) {
    std::vector<uint32_t> kids;
    if (eat_op("(")) {
      while (!at_end() && !is_op(")")) {
        size_t eb = here();
        std::vector<uint32_t> ek;
        size_t before = p;
        if (!is_op(",")) {
          ek.push_back(parse_expr());
          if (eat_op("=>")) {
            if (!is_op(")") && !is_op(",") && !at_end()) ek.push_back(parse_expr());
          }
        }
        kids.push_back(add(NT::array_element_initializer, eb, prev_end(), std::move(ek)));
        if (p == before && !is_op(",")) ++p;
        if (!eat_op(",")) break;
      }
      eat_op(")");
    }
    return add(NT::list_literal, b, prev_end(), std::move(kids));
  }
};

}  // namespace

SyntaxTree parse_php(std::string_view src) {
  Parser parser(src);
  parser.run();
  return std::move(parser.tree);
}

}  // namespace shellsift
