#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "shellsift/ast_view.hpp"
#include "shellsift/lexer.hpp"
#include "shellsift/php_parser.hpp"
#include "shellsift/transform.hpp"
#include "shellsift/util.hpp"

using namespace shellsift;

namespace {

ScriptSample make_sample(std::string raw, int label = 1, std::string id = "s") {
  ScriptSample s;
  s.id = std::move(id);
  s.raw = std::move(raw);
  s.label = label;
  s.content_hash = sha256_hex(s.raw);
  return s;
}

MutationRecipe one_op(const std::string& name, uint64_t seed) {
  MutationRecipe r;
  r.recipe_id = "t-" + name;
  r.ops = {{name, ""}};
  r.seed = seed;
  return r;
}

bool clean(std::string_view src) {
  SyntaxTree t = parse_php(src);
  if (t.had_errors) return false;
  for (const auto& n : t.nodes)
    if (n.error) return false;
  return true;
}

// Token stream with trivia removed, for checking that reflow touches only
// whitespace.
std::vector<std::string> code_tokens(const std::string& src) {
  std::vector<std::string> out;
  for (const auto& t : lex_php(src, true).tokens)
    if (t.kind != TokKind::Whitespace && t.kind != TokKind::Comment)
      out.emplace_back(t.text(src));
  return out;
}

}  // namespace

TEST_CASE("recipe sampling is deterministic and well-formed") {
  OperatorWeights w = OperatorWeights::uniform();
  MutationRecipe a = sample_recipe(w, 123);
  MutationRecipe b = sample_recipe(w, 123);
  CHECK(a == b);
  CHECK(a.recipe_id == b.recipe_id);
  MutationRecipe c = sample_recipe(w, 124);
  CHECK(a.recipe_id != c.recipe_id);

  std::set<std::string> registry(kOperatorRegistry.begin(), kOperatorRegistry.end());
  for (uint64_t seed = 0; seed < 200; ++seed) {
    MutationRecipe r = sample_recipe(w, seed);
    CHECK(r.ops.size() >= 1);
    CHECK(r.ops.size() <= 4);
    std::set<std::string> seen;
    for (const auto& s : r.ops) {
      CHECK(registry.count(s.name) == 1);
      CHECK(seen.insert(s.name).second);  // without replacement
    }
  }
}

TEST_CASE("uniform weights give uniform operator usage") {
  OperatorWeights w = OperatorWeights::uniform();
  std::map<std::string, double> freq;
  double total = 0;
  for (uint64_t seed = 0; seed < 10000; ++seed) {
    MutationRecipe r = sample_recipe(w, seed);
    for (const auto& s : r.ops) {
      freq[s.name] += 1;
      total += 1;
    }
  }
  double expected = total / 8.0;
  double chi2 = 0;
  for (const char* name : kOperatorRegistry) {
    double d = freq[name] - expected;
    chi2 += d * d / expected;
  }
  // 7 degrees of freedom; 24.3 is the 99.9th percentile
  CHECK(chi2 < 24.3);
}

TEST_CASE("a dominant weight dominates sampled recipes") {
  OperatorWeights w = OperatorWeights::uniform();
  for (auto& [name, v] : w.w) v = kWeightMin;
  w.w["dead_code_insert"] = kWeightMax;
  size_t hits = 0, n = 2000;
  for (uint64_t seed = 0; seed < n; ++seed) {
    MutationRecipe r = sample_recipe(w, seed);
    for (const auto& s : r.ops)
      if (s.name == "dead_code_insert") ++hits;
  }
  CHECK(double(hits) / double(n) > 0.5);
}

TEST_CASE("base64 wrap rewrites a literal into a decode call") {
  ScriptSample s = make_sample("<?php $a = 'hello';\n");
  MutationResult r = apply_recipe(s, one_op("base64_wrap_string", 9));
  CHECK(r.applied == std::vector<std::string>{"base64_wrap_string"});
  CHECK(r.child.raw == "<?php $a = base64_decode('aGVsbG8=');\n");
  CHECK(clean(r.child.raw));
  CHECK(r.child.label == 1);
  CHECK(r.child.origin == Origin::mutated);
  REQUIRE(r.child.lineage.has_value());
  CHECK(r.child.lineage->parent_id == "s");
}

TEST_CASE("string split keeps the concatenated value") {
  ScriptSample s = make_sample("<?php $a = 'abcdef';\n");
  MutationResult r = apply_recipe(s, one_op("string_split", 4));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(r.child.raw.find("' . '") != std::string::npos);
  // both halves concatenate back to the original
  size_t q1 = r.child.raw.find('\'');
  std::string tail = r.child.raw.substr(q1);
  std::string glued;
  bool in = false;
  for (char c : tail) {
    if (c == '\'') {
      in = !in;
      continue;
    }
    if (in) glued += c;
  }
  CHECK(glued == "abcdef");
}

TEST_CASE("charcode build emits chr chains for short strings") {
  ScriptSample s = make_sample("<?php $k = 'ab';\n");
  MutationResult r = apply_recipe(s, one_op("charcode_build", 2));
  REQUIRE(r.applied.size() == 1);
  CHECK(r.child.raw == "<?php $k = (chr(97) . chr(98));\n");
  CHECK(clean(r.child.raw));
}

TEST_CASE("identifier rename is consistent and AST-invariant") {
  std::string src =
      "<?php\n$data = $_POST['x'];\n$out = $data . \"$data!\";\necho $out;\n";
  ScriptSample s = make_sample(src);
  MutationResult r = apply_recipe(s, one_op("identifier_rename", 21));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(r.child.raw != src);
  CHECK(r.child.raw.find("$_POST") != std::string::npos);  // superglobal untouched

  SyntaxTree before = parse_php(src);
  SyntaxTree after = parse_php(r.child.raw);
  CHECK(linearize_pruned(before) == linearize_pruned(after));

  // renamed variables must be renamed at every occurrence
  for (const std::string& var : {std::string("$data"), std::string("$out")}) {
    size_t n_before = 0, n_after = 0;
    for (size_t p = src.find(var); p != std::string::npos; p = src.find(var, p + 1)) ++n_before;
    for (size_t p = r.child.raw.find(var); p != std::string::npos;
         p = r.child.raw.find(var, p + 1))
      ++n_after;
    CHECK((n_after == 0 || n_after == n_before));  // all gone or all kept
  }
}

TEST_CASE("rename skips files with indirect variable access") {
  ScriptSample s = make_sample("<?php $a = 'b'; $$a = 1; echo $b;\n");
  MutationResult r = apply_recipe(s, one_op("identifier_rename", 3));
  CHECK(r.no_op);
  CHECK(r.skipped == std::vector<std::string>{"identifier_rename"});
  CHECK(r.child.raw == s.raw);
}

TEST_CASE("dead code insert adds a parseable statement") {
  ScriptSample s = make_sample("<?php\n$x = 1;\necho $x;\n");
  MutationResult r = apply_recipe(s, one_op("dead_code_insert", 5));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(r.child.raw.size() > s.raw.size());
  CHECK(r.child.raw.find("$z") != std::string::npos);
}

TEST_CASE("whitespace reflow changes only trivia") {
  std::string src = "<?php\n$a = 1;\nif ($a) {\n    echo $a;\n}\n";
  ScriptSample s = make_sample(src);
  MutationResult r = apply_recipe(s, one_op("whitespace_reflow", 6));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(code_tokens(src) == code_tokens(r.child.raw));
}

TEST_CASE("wrapper function reroutes a call through a generated wrapper") {
  std::string src = "<?php\n$t = strtolower($_GET['q']);\necho $t;\n";
  ScriptSample s = make_sample(src);
  MutationResult r = apply_recipe(s, one_op("wrapper_function", 7));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(r.child.raw.find("func_get_args") != std::string::npos);
  CHECK(r.child.raw.find("call_user_func_array('strtolower'") != std::string::npos);
  CHECK(r.child.raw.find("function w") != std::string::npos);
}

TEST_CASE("dynamic invocation rewrites a direct call to a variable call") {
  std::string src = "<?php\nsystem($_GET['c']);\n";
  ScriptSample s = make_sample(src);
  MutationResult r = apply_recipe(s, one_op("dynamic_invocation", 8));
  REQUIRE(r.applied.size() == 1);
  CHECK(clean(r.child.raw));
  CHECK(r.child.raw.find("= 'system';") != std::string::npos);
  CHECK(r.child.raw.find("system(") == std::string::npos);  // direct call gone
}

TEST_CASE("inapplicable operators are skipped and recorded") {
  ScriptSample s = make_sample("<?php echo 1;\n");  // no strings, no calls
  MutationRecipe r;
  r.recipe_id = "rx";
  r.seed = 1;
  r.ops = {{"base64_wrap_string", ""}, {"charcode_build", ""}, {"wrapper_function", ""}};
  MutationResult res = apply_recipe(s, r);
  CHECK(res.applied.empty());
  CHECK(res.skipped.size() == 3);
  CHECK(res.no_op);
  CHECK(res.child.raw == s.raw);
  CHECK(res.child.origin == Origin::mutated);

  CHECK_THROWS_AS(apply_recipe(make_sample("<?php if (\n"), r), UsageError);
  MutationRecipe empty;
  empty.seed = 1;
  CHECK_THROWS_AS(apply_recipe(s, empty), UsageError);
}

TEST_CASE("recipes parse cleanly across a corpus sweep") {
  auto dir = std::filesystem::temp_directory_path() / "shellsift_transform_sweep";
  std::filesystem::remove_all(dir);
  CorpusManifest m = synth_fixtures(15, 15, 77, dir);
  OperatorWeights w = OperatorWeights::uniform();
  size_t applied_total = 0;
  for (const auto& e : m.entries) {
    ScriptSample s = load_sample(m, e.id);
    for (uint64_t k = 0; k < 3; ++k) {
      MutationRecipe r = sample_recipe(w, derive_seed(1000, e.id, k));
      MutationResult res = apply_recipe(s, r);
      CAPTURE(e.id);
      CAPTURE(r.recipe_id);
      CHECK(clean(res.child.raw));
      CHECK(res.child.label == e.label);
      applied_total += res.applied.size();
      std::string line = recipe_log_line(r, res, s.id);
      CHECK(line.find("\"recipe_id\"") != std::string::npos);
      CHECK(line.back() == '\n');
    }
  }
  CHECK(applied_total > 50);  // the sweep must actually exercise operators
  std::filesystem::remove_all(dir);
}

TEST_CASE("mutation is deterministic") {
  ScriptSample s = make_sample(
      "<?php\n$greet = 'hello there';\n$who = strtoupper('world');\necho $greet . $who;\n");
  OperatorWeights w = OperatorWeights::uniform();
  MutationRecipe r = sample_recipe(w, 31337);
  MutationResult a = apply_recipe(s, r);
  MutationResult b = apply_recipe(s, r);
  CHECK(a.child.raw == b.child.raw);
  CHECK(a.child.content_hash == b.child.content_hash);
  CHECK(a.applied == b.applied);
}

TEST_CASE("sink removal neutralizes direct sinks and preserves arguments") {
  std::string diag;
  auto out = sanitize_sinks("<?php eval($_POST['x']);\n", &diag);
  REQUIRE(out.has_value());
  CHECK(*out == "<?php strlen((string)($_POST['x']));\n");
  CHECK(clean(*out));

  auto multi = sanitize_sinks("<?php exec($a, $b);\n");
  REQUIRE(multi.has_value());
  CHECK(multi->find("strlen((string)($a))") != std::string::npos);
  CHECK(multi->find("strlen((string)($b))") != std::string::npos);

  auto zero = sanitize_sinks("<?php system();\n");
  REQUIRE(zero.has_value());
  CHECK(zero->find("strlen('')") != std::string::npos);
}

TEST_CASE("sink removal reaches nested and indirect forms") {
  auto nested = sanitize_sinks("<?php eval(system($x));\n");
  REQUIRE(nested.has_value());
  CHECK(nested->find("eval") == std::string::npos);
  CHECK(nested->find("system") == std::string::npos);
  CHECK(clean(*nested));

  auto backtick = sanitize_sinks("<?php $o = `ls $dir`;\n");
  REQUIRE(backtick.has_value());
  CHECK(backtick->find('`') == std::string::npos);
  CHECK(backtick->find("strlen(\"ls $dir\")") != std::string::npos);

  auto method = sanitize_sinks("<?php $svc->system('x');\n");
  REQUIRE(method.has_value());
  CHECK(method->find("system") == std::string::npos);

  auto scoped = sanitize_sinks("<?php Shell::exec($z);\n");
  REQUIRE(scoped.has_value());
  CHECK(scoped->find("exec") == std::string::npos);

  auto dispatch = sanitize_sinks("<?php call_user_func('system', $c);\n");
  REQUIRE(dispatch.has_value());
  CHECK(dispatch->find("call_user_func") == std::string::npos);

  auto varcall = sanitize_sinks("<?php $f = $_POST['f']; $f($a);\n");
  REQUIRE(varcall.has_value());
  CHECK(varcall->find("$f($a)") == std::string::npos);
  CHECK(varcall->find("$f = $_POST['f'];") != std::string::npos);  // data flow kept

  std::string diag;
  CHECK(!sanitize_sinks("<?php if (", &diag).has_value());
  CHECK(!diag.empty());

  auto harmless = sanitize_sinks("<?php echo strtolower('HI');\n");
  REQUIRE(harmless.has_value());
  CHECK(*harmless == "<?php echo strtolower('HI');\n");
}

TEST_CASE("de-malicious of an original sample defangs in place") {
  ScriptSample s = make_sample("<?php eval($_POST['x']);\n", 1, "shell-1");
  auto out = de_malicious(s);
  REQUIRE(out.has_value());
  CHECK(out->label == 0);
  CHECK(out->origin == Origin::de_malicious);
  REQUIRE(out->lineage.has_value());
  CHECK(out->lineage->parent_id == "shell-1");
  CHECK(out->raw.find("eval") == std::string::npos);
  CHECK(verify_benign(*out));
  CHECK(!verify_benign(s));

  ScriptSample benign_pos = make_sample("<?php echo 'hi';\n", 1, "p2");
  auto same = de_malicious(benign_pos);
  REQUIRE(same.has_value());
  CHECK(same->raw == benign_pos.raw);  // byte-identical body

  ScriptSample negative = make_sample("<?php echo 1;\n", 0);
  CHECK_THROWS_AS(de_malicious(negative), UsageError);

  std::string diag;
  ScriptSample broken = make_sample("<?php if (", 1);
  CHECK(!de_malicious(broken, nullptr, nullptr, &diag).has_value());
  CHECK(!diag.empty());
}

TEST_CASE("de-malicious replays the recipe on the sanitized ancestor") {
  ScriptSample orig = make_sample(
      "<?php\n$payload = $_POST['d'];\n$msg = 'hello';\neval(base64_decode($payload));\necho "
      "$msg;\n",
      1, "shell-2");
  OperatorWeights w = OperatorWeights::uniform();
  MutationRecipe recipe = sample_recipe(w, 424242);
  MutationResult mutated = apply_recipe(orig, recipe);
  REQUIRE(!mutated.no_op);

  auto twin = de_malicious(mutated.child, &orig, &recipe);
  REQUIRE(twin.has_value());
  CHECK(twin->label == 0);
  CHECK(twin->origin == Origin::de_malicious);
  CHECK(twin->lineage->recipe_id == recipe.recipe_id);
  CHECK(verify_benign(*twin));
  CHECK(twin->raw.find("eval") == std::string::npos);
  CHECK(clean(twin->raw));
}

TEST_CASE("de-malicious twin of a sink-free mutation matches its AST exactly") {
  ScriptSample orig =
      make_sample("<?php\n$name = 'world';\n$text = strtoupper($name);\necho $text;\n", 1, "p9");
  MutationRecipe recipe;
  recipe.recipe_id = "combo";
  recipe.seed = 99;
  recipe.ops = {{"base64_wrap_string", ""}, {"identifier_rename", ""}, {"dead_code_insert", ""}};
  MutationResult mutated = apply_recipe(orig, recipe);
  REQUIRE(!mutated.no_op);

  auto twin = de_malicious(mutated.child, &orig, &recipe);
  REQUIRE(twin.has_value());
  CHECK(twin->raw == mutated.child.raw);  // nothing to remove, replay reproduces bytes
  SyntaxTree a = parse_php(mutated.child.raw);
  SyntaxTree b = parse_php(twin->raw);
  CHECK(linearize_pruned(a) == linearize_pruned(b));
}

TEST_CASE("de-malicious preserves obfuscation markers introduced by the recipe") {
  ScriptSample orig = make_sample(
      "<?php\n$cmd = $_GET['c'];\n$banner = 'ready steady';\nsystem($cmd);\necho $banner;\n", 1,
      "shell-3");
  MutationRecipe recipe;
  recipe.recipe_id = "marked";
  recipe.seed = 7;
  recipe.ops = {{"base64_wrap_string", ""}, {"dynamic_invocation", ""}};
  MutationResult mutated = apply_recipe(orig, recipe);
  REQUIRE(mutated.applied.size() == 2);

  auto twin = de_malicious(mutated.child, &orig, &recipe);
  REQUIRE(twin.has_value());
  CHECK(twin->raw.find("base64_decode('") != std::string::npos);  // wrap survives
  // the dynamic-invocation signature (a variable holding a callee name,
  // then a variable call) survives on the defanged callee
  CHECK(twin->raw.find("= '") != std::string::npos);
  CHECK(twin->raw.find("system") == std::string::npos);
  CHECK(verify_benign(*twin));
}

TEST_CASE("verification scans independently of the rewriter") {
  CHECK(!verify_benign_source("<?php SyStEm($_GET['c']);\n"));       // case folded
  CHECK(!verify_benign_source("<?php $o->exec($x);\n"));             // method position counts
  CHECK(!verify_benign_source("<?php $x = `id`;\n"));                // backticks count
  CHECK(!verify_benign_source("<?php passthru;\n"));                 // bare identifier counts
  CHECK(verify_benign_source("<?php echo 'system of record';\n"));  // string content does not
  CHECK(verify_benign_source("<?php ecosystem($x);\n"));            // no substring matches
  CHECK(verify_benign_source("<?php // system\necho 1;\n"));        // comments do not count
  CHECK(!verify_benign_source("<?php if (\n"));                     // must parse
  CHECK(verify_benign_source(""));
}

TEST_CASE("verification agrees with a hand-audited set") {
  // expected values follow the documented rule: the eight sink names as
  // identifiers, or any backtick execution, or a parse failure mean "not
  // benign"; everything else passes.
  const std::vector<std::pair<std::string, bool>> audit = {
      {"<?php eval($_POST['a']);", false},
      {"<?php assert($_GET['b']);", false},
      {"<?php system('ls');", false},
      {"<?php exec($c);", false},
      {"<?php shell_exec($c);", false},
      {"<?php passthru($c);", false},
      {"<?php popen($c, 'r');", false},
      {"<?php proc_open($c, [], $p);", false},
      {"<?php `whoami`;", false},
      {"<?php $r = strlen((string)($_POST['a']));", true},
      {"<?php echo strtoupper('exec');", true},      // sink name only as data
      {"<?php $f = $_POST['f']; $f($x);", true},     // nameless dynamic call passes the scan
      {"<?php call_user_func('system', $x);", true}, // dispatcher name is not scanned
      {"<?php function execute() { return 1; }", true},
      {"<?php $shell_exec = 1; echo $shell_exec;", true},  // variable, not identifier
      {"<?php echo 'hello';", true},
      {"<?php class Runner { public function run() { return 'ok'; } }", true},
      {"<?php $data = base64_decode('aGk=');", true},
      {"<?php EXEC($x);", false},
      {"<?php echo 1; echo 2;", true},
  };
  for (const auto& [src, want] : audit) {
    CAPTURE(src);
    CHECK(verify_benign_source(src) == want);
  }
}

TEST_CASE("weight updates move weights the documented way") {
  OperatorWeights w = OperatorWeights::uniform();
  OperatorWeights same = update_weights(w, {}, {});
  for (const char* name : kOperatorRegistry) CHECK(same.w[name] == doctest::Approx(1.0));

  MutationRecipe evasive = one_op("charcode_build", 1);
  OperatorWeights up = update_weights(w, {}, {evasive});
  CHECK(up.w["charcode_build"] > up.w["string_split"]);
  CHECK(up.total() == doctest::Approx(8.0));

  OperatorWeights down = update_weights(w, {evasive}, {});
  CHECK(down.w["charcode_build"] < down.w["string_split"]);
  CHECK(down.total() == doctest::Approx(8.0));

  CHECK_THROWS_AS(update_weights(w, {}, {}, 0.0), UsageError);
  CHECK_THROWS_AS(update_weights(w, {}, {}, 1.0), UsageError);
}

TEST_CASE("repeated one-sided updates hit the effective bounds") {
  OperatorWeights w = OperatorWeights::uniform();
  MutationRecipe favored = one_op("dynamic_invocation", 1);
  for (int round = 0; round < 100; ++round) w = update_weights(w, {}, {favored});
  // the sum constraint pins the winner at 8 - 7 * w_min
  CHECK(w.w["dynamic_invocation"] == doctest::Approx(8.0 - 7 * kWeightMin));
  for (const char* name : kOperatorRegistry)
    if (std::string(name) != "dynamic_invocation")
      CHECK(w.w[name] == doctest::Approx(kWeightMin));
  for (const auto& [name, v] : w.w) {
    CHECK(v >= kWeightMin - 1e-12);
    CHECK(v <= kWeightMax + 1e-12);
  }
}

TEST_CASE("weights serialize and round-trip") {
  OperatorWeights w = OperatorWeights::uniform();
  w.w["string_split"] = 2.5;
  w.normalize();
  OperatorWeights back = weights_from_json(weights_to_json(w));
  for (const char* name : kOperatorRegistry)
    CHECK(back.w[name] == doctest::Approx(w.w[name]));
  CHECK_THROWS_AS(weights_from_json("{}"), IntegrityError);
  CHECK_THROWS_AS(weights_from_json("nope"), IntegrityError);
}
