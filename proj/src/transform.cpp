#include "shellsift/transform.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>

#include "shellsift/lexer.hpp"
#include "shellsift/php_parser.hpp"
#include "shellsift/util.hpp"

using nlohmann::json;

namespace shellsift {

namespace {

using NT = NodeType;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = char(std::tolower((unsigned char)c));
  return out;
}

bool parses_clean(std::string_view src) {
  SyntaxTree t = parse_php(src);
  if (t.had_errors) return false;
  for (const auto& n : t.nodes)
    if (n.error || n.type == NT::error) return false;
  return true;
}

std::string_view node_text(std::string_view src, const SyntaxTree::Node& n) {
  return src.substr(n.begin, n.end - n.begin);
}

std::vector<uint32_t> parent_table(const SyntaxTree& t) {
  std::vector<uint32_t> parent(t.nodes.size(), 0);
  for (uint32_t i = 0; i < t.nodes.size(); ++i)
    for (uint32_t k : t.nodes[i].kids) parent[k] = i;
  return parent;
}

struct Splice {
  size_t begin, end;
  std::string text;
};

std::string splice_all(std::string_view src, std::vector<Splice> splices) {
  // Zero-width insertions at the same offset as a replacement must land first.
  std::sort(splices.begin(), splices.end(), [](const Splice& a, const Splice& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  std::string out;
  size_t pos = 0;
  for (const auto& s : splices) {
    if (s.begin < pos) throw HardError("overlapping rewrite splices");
    out.append(src.substr(pos, s.begin - pos));
    out.append(s.text);
    pos = s.end;
  }
  out.append(src.substr(pos));
  return out;
}

// Spans whose interior must not be rewritten by string-literal operators:
// interpolated strings, heredocs, and backtick commands have their own
// escaping rules.
std::vector<std::pair<size_t, size_t>> opaque_zones(const SyntaxTree& t) {
  std::vector<std::pair<size_t, size_t>> zones;
  for (const auto& n : t.nodes)
    if (n.type == NT::encapsed_string || n.type == NT::heredoc || n.type == NT::nowdoc ||
        n.type == NT::shell_command_expression)
      zones.emplace_back(n.begin, n.end);
  return zones;
}

bool inside_any(size_t begin, size_t end,
                const std::vector<std::pair<size_t, size_t>>& zones) {
  for (auto [zb, ze] : zones)
    if (begin >= zb && end <= ze) return true;
  return false;
}

// Single-quoted literals only, with no escape sequences, so the value is the
// raw interior text.
struct PlainString {
  size_t begin, end;  // full span including quotes
  std::string value;
};

std::vector<PlainString> plain_strings(std::string_view src, const SyntaxTree& t) {
  auto zones = opaque_zones(t);
  std::vector<PlainString> out;
  for (const auto& n : t.nodes) {
    if (n.type != NT::string || n.end - n.begin < 2) continue;
    if (src[n.begin] != '\'' || src[n.end - 1] != '\'') continue;
    if (inside_any(n.begin, n.end, zones)) continue;
    std::string_view inner = src.substr(n.begin + 1, n.end - n.begin - 2);
    if (inner.find('\\') != std::string_view::npos) continue;
    out.push_back({n.begin, n.end, std::string(inner)});
  }
  return out;
}

std::string fresh_name(std::string_view src, Rng& rng, const char* stem) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%05llx", stem,
                  (unsigned long long)(rng.below(0x100000)));
    if (src.find(buf) == std::string_view::npos) return buf;
  }
  throw HardError("cannot find a fresh identifier");
}

// ---------------------------------------------------------------------------
// Operators. Each returns the rewritten source, or absent when no usable
// site exists. Randomness comes only from the provided generator.

std::optional<std::string> op_base64_wrap_string(const std::string& src, const SyntaxTree& t,
                                                 Rng& rng) {
  auto sites = plain_strings(src, t);
  std::erase_if(sites, [](const PlainString& p) { return p.value.empty(); });
  if (sites.empty()) return std::nullopt;
  rng.shuffle(sites);
  size_t k = 1 + rng.below(std::min<size_t>(2, sites.size()));
  std::vector<Splice> splices;
  for (size_t i = 0; i < k; ++i)
    splices.push_back(
        {sites[i].begin, sites[i].end, "base64_decode('" + base64_encode(sites[i].value) + "')"});
  return splice_all(src, std::move(splices));
}

std::optional<std::string> op_string_split(const std::string& src, const SyntaxTree& t,
                                           Rng& rng) {
  auto sites = plain_strings(src, t);
  std::erase_if(sites, [](const PlainString& p) { return p.value.size() < 2; });
  if (sites.empty()) return std::nullopt;
  rng.shuffle(sites);
  size_t k = 1 + rng.below(std::min<size_t>(2, sites.size()));
  std::vector<Splice> splices;
  for (size_t i = 0; i < k; ++i) {
    const std::string& v = sites[i].value;
    size_t cut = 1 + rng.below(v.size() - 1);
    splices.push_back({sites[i].begin, sites[i].end,
                       "('" + v.substr(0, cut) + "' . '" + v.substr(cut) + "')"});
  }
  return splice_all(src, std::move(splices));
}

std::optional<std::string> op_charcode_build(const std::string& src, const SyntaxTree& t,
                                             Rng& rng) {
  auto sites = plain_strings(src, t);
  std::erase_if(sites, [](const PlainString& p) {
    if (p.value.empty() || p.value.size() > 8) return true;
    for (unsigned char c : p.value)
      if (c < 32 || c > 126) return true;
    return false;
  });
  if (sites.empty()) return std::nullopt;
  rng.shuffle(sites);
  const PlainString& s = sites[0];
  std::string repl = "(";
  for (size_t i = 0; i < s.value.size(); ++i) {
    if (i) repl += " . ";
    repl += "chr(" + std::to_string(int((unsigned char)s.value[i])) + ")";
  }
  repl += ")";
  return splice_all(src, {{s.begin, s.end, std::move(repl)}});
}

const std::vector<std::string>& protected_variables() {
  static const std::vector<std::string> names = {"$_GET",    "$_POST",  "$_REQUEST", "$_COOKIE",
                                                 "$_SERVER", "$_FILES", "$_ENV",     "$_SESSION",
                                                 "$GLOBALS", "$this"};
  return names;
}

std::optional<std::string> op_identifier_rename(const std::string& src, const SyntaxTree& t,
                                                Rng& rng) {
  // Indirect variable access defeats span-based renaming; leave such files alone.
  for (const auto& n : t.nodes)
    if (n.type == NT::dynamic_variable_name) return std::nullopt;
  std::string low = lower(src);
  if (low.find("compact(") != std::string::npos || low.find("extract(") != std::string::npos ||
      low.find("${") != std::string::npos)
    return std::nullopt;

  std::map<std::string, std::vector<std::pair<size_t, size_t>>> by_name;
  const auto& prot = protected_variables();
  for (const auto& n : t.nodes) {
    if (n.type != NT::variable_name) continue;
    std::string name(node_text(src, n));
    if (name.empty() || name[0] != '$') continue;
    if (std::find(prot.begin(), prot.end(), name) != prot.end()) continue;
    by_name[name].emplace_back(n.begin, n.end);
  }
  if (by_name.empty()) return std::nullopt;

  std::vector<std::string> names;
  for (const auto& [name, spans] : by_name) names.push_back(name);
  rng.shuffle(names);
  size_t k = 1 + rng.below(std::min<size_t>(3, names.size()));

  std::vector<Splice> splices;
  std::string current = src;
  for (size_t i = 0; i < k; ++i) {
    std::string repl = "$" + fresh_name(current, rng, "v");
    current += repl;  // reserve against later picks in this same pass
    for (auto [b, e] : by_name[names[i]]) splices.push_back({b, e, repl});
  }
  return splice_all(src, std::move(splices));
}

bool is_block_parent(const SyntaxTree& t, uint32_t idx) {
  NT ty = t.nodes[idx].type;
  return ty == NT::program || ty == NT::compound_statement;
}

std::optional<std::string> op_dead_code_insert(const std::string& src, const SyntaxTree& t,
                                               Rng& rng) {
  auto parent = parent_table(t);
  std::vector<uint32_t> sites;
  for (uint32_t i = 1; i < t.nodes.size(); ++i) {
    if (!is_block_parent(t, parent[i])) continue;
    NT ty = t.nodes[i].type;
    if (ty == NT::php_tag || ty == NT::text || ty == NT::text_interpolation ||
        ty == NT::case_statement || ty == NT::default_statement || ty == NT::error)
      continue;
    sites.push_back(i);
  }
  if (sites.empty()) return std::nullopt;
  uint32_t at = sites[rng.below(sites.size())];
  std::string var = "$" + fresh_name(src, rng, "z");
  std::string stmt;
  switch (rng.below(3)) {
    case 0: stmt = var + " = " + std::to_string(rng.below(100000)) + ";"; break;
    case 1: stmt = var + " = 'k" + std::to_string(rng.below(100000)) + "';"; break;
    default:
      stmt = var + " = " + std::to_string(rng.below(100)) + " + " +
             std::to_string(rng.below(100)) + ";";
      break;
  }
  uint32_t pos = t.nodes[at].end;
  return splice_all(src, {{pos, pos, "\n" + stmt}});
}

std::optional<std::string> op_whitespace_reflow(const std::string& src, const SyntaxTree&,
                                                Rng& rng) {
  LexResult lr = lex_php(src, true);
  for (const auto& tok : lr.tokens)
    if (tok.kind == TokKind::String && (tok.quote == 'h' || tok.quote == 'n'))
      return std::nullopt;  // heredoc bodies are newline-sensitive

  static const char* pool[] = {" ", "  ", "\n", "\n\n", "\t", " \n"};
  std::vector<size_t> sites;
  for (size_t i = 0; i < lr.tokens.size(); ++i) {
    if (lr.tokens[i].kind != TokKind::Whitespace) continue;
    if (i == 0 || i + 1 == lr.tokens.size()) continue;
    TokKind prev = lr.tokens[i - 1].kind;
    TokKind next = lr.tokens[i + 1].kind;
    if (prev == TokKind::Comment || prev == TokKind::InlineHtml || next == TokKind::InlineHtml)
      continue;
    sites.push_back(i);
  }
  if (sites.empty()) return std::nullopt;

  std::vector<Splice> splices;
  for (size_t i : sites)
    if (rng.below(2) == 0)
      splices.push_back({uint32_t(lr.tokens[i].begin), uint32_t(lr.tokens[i].end),
                         pool[rng.below(std::size(pool))]});
  if (splices.empty()) {
    size_t i = sites[rng.below(sites.size())];
    splices.push_back({uint32_t(lr.tokens[i].begin), uint32_t(lr.tokens[i].end),
                       pool[rng.below(std::size(pool))]});
  }
  return splice_all(src, std::move(splices));
}

// Call sites eligible for wrapper/dynamic rewrites: plain-name callees that
// are real functions, not language constructs.
bool callable_by_value(std::string_view name) {
  static const std::vector<std::string> constructs = {
      "eval",         "assert", "exit",  "die",   "isset",   "unset",
      "empty",        "list",   "print", "echo",  "include", "include_once",
      "require",      "require_once"};
  std::string low = lower(name);
  return std::find(constructs.begin(), constructs.end(), low) == constructs.end();
}

struct CallSite {
  uint32_t call = 0;
  size_t callee_begin = 0, callee_end = 0;
  std::string name;
};

std::vector<CallSite> named_call_sites(const std::string& src, const SyntaxTree& t) {
  std::vector<CallSite> out;
  for (uint32_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.type != NT::function_call_expression || n.kids.empty()) continue;
    const auto& callee = t.nodes[n.kids[0]];
    if (callee.type != NT::name) continue;
    std::string name(node_text(src, callee));
    if (!callable_by_value(name)) continue;
    out.push_back({i, callee.begin, callee.end, std::move(name)});
  }
  return out;
}

uint32_t first_php_tag_end(const std::string& src, const SyntaxTree& t) {
  for (const auto& n : t.nodes)
    if (n.type == NT::php_tag && node_text(src, n).substr(0, 5) == "<?php") return n.end;
  return 0;  // 0 = no usable tag
}

std::optional<std::string> op_wrapper_function(const std::string& src, const SyntaxTree& t,
                                               Rng& rng) {
  uint32_t anchor = first_php_tag_end(src, t);
  if (anchor == 0) return std::nullopt;
  auto sites = named_call_sites(src, t);
  std::erase_if(sites, [&](const CallSite& c) { return c.callee_begin < anchor; });
  if (sites.empty()) return std::nullopt;
  const CallSite& c = sites[rng.below(sites.size())];
  std::string wrapper = fresh_name(src, rng, "w");
  std::string decl = "\nfunction " + wrapper +
                     "() { $a = func_get_args(); return call_user_func_array('" + c.name +
                     "', $a); }";
  return splice_all(src, {{anchor, anchor, decl}, {c.callee_begin, c.callee_end, wrapper}});
}

std::optional<std::string> op_dynamic_invocation(const std::string& src, const SyntaxTree& t,
                                                 Rng& rng) {
  auto parent = parent_table(t);
  auto sites = named_call_sites(src, t);
  if (sites.empty()) return std::nullopt;
  const CallSite& c = sites[rng.below(sites.size())];
  // Hoist the name binding to the closest statement sitting in a real block,
  // so the prepended assignment cannot detach a braceless branch body.
  uint32_t stmt = c.call;
  while (stmt != 0 && !is_block_parent(t, parent[stmt])) stmt = parent[stmt];
  if (stmt == 0) return std::nullopt;
  std::string var = "$" + fresh_name(src, rng, "v");
  uint32_t at = t.nodes[stmt].begin;
  return splice_all(src, {{at, at, var + " = '" + c.name + "';\n"},
                          {c.callee_begin, c.callee_end, var}});
}

using OpFn = std::optional<std::string> (*)(const std::string&, const SyntaxTree&, Rng&);

struct OpEntry {
  const char* name;
  OpFn fn;
};

const std::array<OpEntry, 8> kOps = {{{"base64_wrap_string", op_base64_wrap_string},
                                      {"string_split", op_string_split},
                                      {"identifier_rename", op_identifier_rename},
                                      {"dead_code_insert", op_dead_code_insert},
                                      {"charcode_build", op_charcode_build},
                                      {"whitespace_reflow", op_whitespace_reflow},
                                      {"wrapper_function", op_wrapper_function},
                                      {"dynamic_invocation", op_dynamic_invocation}}};

OpFn find_op(std::string_view name) {
  for (const auto& e : kOps)
    if (name == e.name) return e.fn;
  throw UsageError("unknown operator: " + std::string(name));
}

std::string hex16(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
  return buf;
}

}  // namespace

OperatorWeights OperatorWeights::uniform() {
  OperatorWeights w;
  for (const char* name : kOperatorRegistry) w.w[name] = 1.0;
  return w;
}

double OperatorWeights::total() const {
  double s = 0;
  for (const auto& [name, v] : w) s += v;
  return s;
}

void OperatorWeights::normalize() {
  if (w.size() != kOperatorRegistry.size()) throw UsageError("weights must cover the registry");
  const double target = double(w.size());
  for (auto& [name, v] : w) v = std::clamp(v, kWeightMin, kWeightMax);
  for (int pass = 0; pass < 32; ++pass) {
    double sum = total();
    if (std::abs(sum - target) < 1e-12) return;
    bool up = sum < target;
    double movable = 0, fixed = 0;
    for (auto& [name, v] : w) {
      bool can_move = up ? v < kWeightMax - 1e-15 : v > kWeightMin + 1e-15;
      (can_move ? movable : fixed) += v;
    }
    if (movable <= 0) return;  // everything pinned at a bound
    double factor = (target - fixed) / movable;
    for (auto& [name, v] : w) {
      bool can_move = up ? v < kWeightMax - 1e-15 : v > kWeightMin + 1e-15;
      if (can_move) v = std::clamp(v * factor, kWeightMin, kWeightMax);
    }
  }
}

std::string weights_to_json(const OperatorWeights& w) {
  json j = json::object();
  for (const auto& [name, v] : w.w) j[name] = v;
  return j.dump(2) + "\n";
}

OperatorWeights weights_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    OperatorWeights out;
    for (const char* name : kOperatorRegistry) out.w[name] = j.at(name).get<double>();
    for (const auto& [name, v] : out.w)
      if (!(v > 0)) throw IntegrityError("weight for " + name + " must be positive");
    return out;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("weights file malformed: ") + e.what());
  }
}

MutationRecipe sample_recipe(const OperatorWeights& weights, uint64_t seed) {
  Rng rng(derive_seed(seed, "recipe"));
  size_t len = 1 + rng.below(4);

  std::vector<std::pair<std::string, double>> pool;
  for (const char* name : kOperatorRegistry) {
    auto it = weights.w.find(name);
    pool.emplace_back(name, it == weights.w.end() ? 1.0 : it->second);
  }
  MutationRecipe r;
  r.recipe_id = "r" + hex16(seed);
  r.seed = seed;
  for (size_t i = 0; i < len && !pool.empty(); ++i) {
    double total = 0;
    for (const auto& [name, v] : pool) total += v;
    double x = rng.real01() * total;
    size_t pick = pool.size() - 1;
    double acc = 0;
    for (size_t j = 0; j < pool.size(); ++j) {
      acc += pool[j].second;
      if (x < acc) {
        pick = j;
        break;
      }
    }
    r.ops.push_back({pool[pick].first, ""});
    pool.erase(pool.begin() + long(pick));
  }
  return r;
}

MutationResult apply_recipe(const ScriptSample& sample, const MutationRecipe& recipe) {
  if (recipe.ops.empty() || recipe.ops.size() > 4)
    throw UsageError("recipe must hold 1 to 4 operators");
  if (!parses_clean(sample.raw))
    throw UsageError("sample does not parse cleanly: " + sample.id);

  MutationResult res;
  std::string cur = sample.raw;
  for (size_t i = 0; i < recipe.ops.size(); ++i) {
    const std::string& name = recipe.ops[i].name;
    OpFn fn = find_op(name);
    SyntaxTree tree = parse_php(cur);
    Rng rng(derive_seed(recipe.seed, "op", i));
    std::optional<std::string> next = fn(cur, tree, rng);
    if (next && parses_clean(*next)) {
      cur = std::move(*next);
      res.applied.push_back(name);
    } else {
      res.skipped.push_back(name);
    }
  }
  res.no_op = res.applied.empty();
  res.child.id = sample.id + "#" + recipe.recipe_id;
  res.child.raw = std::move(cur);
  res.child.label = sample.label;
  res.child.origin = Origin::mutated;
  res.child.lineage = Lineage{sample.id, recipe.recipe_id, recipe.seed};
  res.child.content_hash = sha256_hex(res.child.raw);
  return res;
}

std::string recipe_log_line(const MutationRecipe& recipe, const MutationResult& result,
                            std::string_view parent_id) {
  json ops = json::array();
  for (const auto& s : recipe.ops) ops.push_back({{"name", s.name}, {"params", s.params}});
  json j{{"recipe_id", recipe.recipe_id}, {"ops", std::move(ops)},
         {"seed", recipe.seed},           {"parent_id", std::string(parent_id)},
         {"child_id", result.child.id},   {"applied", result.applied},
         {"skipped", result.skipped},     {"no_op", result.no_op}};
  return j.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Sink removal.

namespace {

const std::vector<std::string>& sink_names() {
  static const std::vector<std::string> names = {"eval",       "assert",   "system",
                                                 "exec",       "shell_exec", "passthru",
                                                 "popen",      "proc_open"};
  return names;
}

// Callback dispatchers get the same treatment as direct sinks: the callee
// they invoke is data, so removing them is the conservative choice.
const std::vector<std::string>& dispatcher_names() {
  static const std::vector<std::string> names = {"call_user_func", "call_user_func_array",
                                                 "create_function"};
  return names;
}

bool name_in(std::string_view name, const std::vector<std::string>& set) {
  std::string low = lower(name);
  return std::find(set.begin(), set.end(), low) != set.end();
}

// Neutral same-arity replacement: one length term per argument expression,
// keeping every argument's source text intact.
std::string neutral_over_args(const std::string& src, const SyntaxTree& t, uint32_t args_node) {
  std::vector<std::string> terms;
  for (uint32_t k : t.nodes[args_node].kids) {
    const auto& a = t.nodes[k];
    std::string text(node_text(src, a));
    if (a.type == NT::variadic_unpacking)
      terms.push_back("count([" + text + "])");
    else if (a.type == NT::argument)
      terms.push_back("strlen((string)(" + text + "))");
  }
  if (terms.empty()) return "strlen('')";
  if (terms.size() == 1) return terms[0];
  std::string out = "(";
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " + ";
    out += terms[i];
  }
  out += ")";
  return out;
}

struct SinkSite {
  uint32_t node;
  std::string repl;
};

// One removal pass: finds the outermost sink expressions in the tree and
// builds their replacements. Inner sinks survive inside preserved argument
// text and are caught by the next pass.
std::vector<SinkSite> find_sinks(const std::string& src, const SyntaxTree& t) {
  std::vector<SinkSite> sites;
  for (uint32_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.type == NT::shell_command_expression) {
      std::string_view span = node_text(src, n);
      std::string content;
      if (span.size() >= 2) content = std::string(span.substr(1, span.size() - 2));
      std::string escaped;
      for (size_t p = 0; p < content.size(); ++p) {
        if (content[p] == '"' && (p == 0 || content[p - 1] != '\\')) escaped += '\\';
        escaped += content[p];
      }
      sites.push_back({i, "strlen(\"" + escaped + "\")"});
      continue;
    }
    if (n.type == NT::function_call_expression && n.kids.size() >= 2) {
      const auto& callee = t.nodes[n.kids[0]];
      uint32_t args = n.kids[n.kids.size() - 1];
      if (t.nodes[args].type != NT::arguments) continue;
      bool remove = false;
      if (callee.type == NT::name) {
        std::string_view name = node_text(src, callee);
        remove = name_in(name, sink_names()) || name_in(name, dispatcher_names());
      } else if (callee.type != NT::qualified_name) {
        // variable, parenthesized, or otherwise computed callee: the target
        // is data, so treat it as a sink
        remove = true;
      }
      if (remove) sites.push_back({i, neutral_over_args(src, t, args)});
      continue;
    }
    if ((n.type == NT::member_call_expression || n.type == NT::nullsafe_member_call_expression ||
         n.type == NT::scoped_call_expression) &&
        n.kids.size() >= 2) {
      uint32_t args = n.kids[n.kids.size() - 1];
      if (t.nodes[args].type != NT::arguments) continue;
      // method name = any name node in the callee part
      bool remove = false;
      std::vector<uint32_t> stack = {n.kids[0]};
      while (!stack.empty()) {
        uint32_t cur = stack.back();
        stack.pop_back();
        if (t.nodes[cur].type == NT::name && name_in(node_text(src, t.nodes[cur]), sink_names()))
          remove = true;
        for (uint32_t k : t.nodes[cur].kids) stack.push_back(k);
      }
      if (remove) sites.push_back({i, neutral_over_args(src, t, args)});
    }
  }
  // keep only outermost sites; nested ones are rewritten on later passes
  std::vector<SinkSite> outer;
  for (const auto& s : sites) {
    bool nested = false;
    for (const auto& o : sites) {
      if (o.node == s.node) continue;
      const auto& a = t.nodes[s.node];
      const auto& b = t.nodes[o.node];
      if (a.begin >= b.begin && a.end <= b.end && (b.begin < a.begin || b.end > a.end))
        nested = true;
    }
    if (!nested) outer.push_back(s);
  }
  return outer;
}

}  // namespace

std::optional<std::string> sanitize_sinks(std::string_view src, std::string* diagnostic) {
  std::string cur(src);
  if (!parses_clean(cur)) {
    if (diagnostic) *diagnostic = "input does not parse cleanly";
    return std::nullopt;
  }
  for (int pass = 0; pass < 16; ++pass) {
    SyntaxTree t = parse_php(cur);
    auto sites = find_sinks(cur, t);
    if (sites.empty()) return cur;
    std::vector<Splice> splices;
    for (auto& s : sites)
      splices.push_back({t.nodes[s.node].begin, t.nodes[s.node].end, std::move(s.repl)});
    std::string next = splice_all(cur, std::move(splices));
    if (!parses_clean(next)) {
      if (diagnostic) *diagnostic = "rewrite produced unparseable output";
      return std::nullopt;
    }
    cur = std::move(next);
  }
  if (diagnostic) *diagnostic = "sink removal did not reach a fixed point";
  return std::nullopt;
}

std::optional<ScriptSample> de_malicious(const ScriptSample& sample, const ScriptSample* ancestor,
                                         const MutationRecipe* recipe, std::string* diagnostic) {
  if (sample.label != 1) throw UsageError("de_malicious expects a positive sample");
  bool replay = sample.origin == Origin::mutated && ancestor != nullptr && recipe != nullptr;
  const std::string& base = replay ? ancestor->raw : sample.raw;

  std::optional<std::string> sanitized = sanitize_sinks(base, diagnostic);
  if (!sanitized) return std::nullopt;

  std::string final_raw;
  if (replay) {
    ScriptSample defanged;
    defanged.id = sample.id + "~base";
    defanged.raw = *sanitized;
    defanged.label = 0;
    final_raw = apply_recipe(defanged, *recipe).child.raw;
  } else {
    final_raw = *sanitized;
  }

  // Verification: the defanged pre-mutation source must scan clean, and the
  // final text must still parse.
  if (!verify_benign_source(*sanitized) || !parses_clean(final_raw)) {
    if (diagnostic) *diagnostic = "verification failed after sink removal";
    return std::nullopt;
  }

  ScriptSample out;
  out.id = sample.id + "~demal";
  out.raw = std::move(final_raw);
  out.label = 0;
  out.origin = Origin::de_malicious;
  out.lineage = Lineage{sample.id, replay ? recipe->recipe_id : "sanitize",
                        replay ? recipe->seed : 0};
  out.content_hash = sha256_hex(out.raw);
  return out;
}

bool verify_benign_source(std::string_view raw) {
  LexResult lr = lex_php(raw, true);
  for (const auto& tok : lr.tokens) {
    if (tok.kind == TokKind::String && tok.quote == '`') return false;
    if (tok.kind == TokKind::Identifier && name_in(tok.text(raw), sink_names())) return false;
  }
  return parses_clean(raw);
}

bool verify_benign(const ScriptSample& sample) { return verify_benign_source(sample.raw); }

OperatorWeights update_weights(const OperatorWeights& weights,
                               const std::vector<MutationRecipe>& caught,
                               const std::vector<MutationRecipe>& evasive, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("eta must lie in (0, 1)");
  std::map<std::string, int> caught_n, evasive_n;
  for (const auto& r : caught)
    for (const auto& s : r.ops) caught_n[s.name]++;
  for (const auto& r : evasive)
    for (const auto& s : r.ops) evasive_n[s.name]++;

  OperatorWeights out = weights;
  for (auto& [name, v] : out.w) {
    int e = evasive_n.count(name) ? evasive_n[name] : 0;
    int c = caught_n.count(name) ? caught_n[name] : 0;
    v = v * std::pow(1.0 + eta, double(e)) * std::pow(1.0 - eta, double(c));
  }
  out.normalize();
  return out;
}

}  // namespace shellsift
