#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "shellsift/php_parser.hpp"
#include "shellsift/util.hpp"

using namespace shellsift;

namespace {

size_t count_of(const SyntaxTree& t, NodeType ty) {
  size_t c = 0;
  for (const auto& n : t.nodes)
    if (n.type == ty) ++c;
  return c;
}

bool has(const SyntaxTree& t, NodeType ty) { return count_of(t, ty) > 0; }

void render(const SyntaxTree& t, uint32_t i, std::string& out) {
  const auto& n = t.nodes[i];
  out += node_type_name(n.type);
  if (!n.kids.empty()) {
    out += '(';
    for (size_t j = 0; j < n.kids.size(); ++j) {
      if (j) out += ' ';
      render(t, n.kids[j], out);
    }
    out += ')';
  }
}

std::string sexpr(std::string_view src) {
  SyntaxTree t = parse_php(src);
  std::string out;
  render(t, 0, out);
  return out;
}

// Structural soundness: valid kid indices, every non-root node attached
// exactly once, kid spans nested in the parent and ordered without overlap.
void check_tree(const SyntaxTree& t, std::string_view src) {
  REQUIRE(!t.nodes.empty());
  CHECK(t.nodes[0].type == NodeType::program);
  CHECK(t.nodes[0].begin == 0);
  CHECK(t.nodes[0].end == src.size());
  std::vector<int> ref_count(t.nodes.size(), 0);
  for (const auto& n : t.nodes) {
    CHECK(n.begin <= n.end);
    CHECK(n.end <= src.size());
    size_t prev_end = n.begin;
    for (uint32_t k : n.kids) {
      REQUIRE(k < t.nodes.size());
      REQUIRE(k != 0);
      ref_count[k] += 1;
      const auto& kid = t.nodes[k];
      CHECK(n.begin <= kid.begin);
      CHECK(kid.end <= n.end);
      CHECK(prev_end <= kid.begin);
      prev_end = kid.end;
    }
  }
  CHECK(ref_count[0] == 0);
  for (size_t i = 1; i < t.nodes.size(); ++i) CHECK(ref_count[i] == 1);
}

SyntaxTree parse_checked(std::string_view src) {
  SyntaxTree t = parse_php(src);
  check_tree(t, src);
  return t;
}

}  // namespace

TEST_CASE("empty input yields bare program root") {
  SyntaxTree t = parse_checked("");
  CHECK(t.nodes.size() == 1);
  CHECK(t.nodes[0].kids.empty());
  CHECK(!t.had_errors);
}

TEST_CASE("minimal assignment") {
  CHECK(sexpr("<?php $a=1;") ==
        "program(php_tag expression_statement(assignment_expression(variable_name integer)))");
  CHECK(!parse_checked("<?php $a=1;").had_errors);
}

TEST_CASE("pure html is a single text node") {
  SyntaxTree t = parse_checked("<html><body>hi</body></html>");
  CHECK(t.nodes.size() == 2);
  CHECK(t.nodes[1].type == NodeType::text);
  CHECK(!t.had_errors);
}

TEST_CASE("html before and after php") {
  SyntaxTree t = parse_checked("<b>x</b><?php $a=1; ?><i>y</i>");
  CHECK(has(t, NodeType::text));
  CHECK(has(t, NodeType::text_interpolation));
  CHECK(has(t, NodeType::assignment_expression));
  CHECK(!t.had_errors);
}

TEST_CASE("function definition") {
  SyntaxTree t = parse_checked("<?php function f($x, $y = 2) { return $x + $y; }");
  CHECK(count_of(t, NodeType::function_definition) == 1);
  CHECK(count_of(t, NodeType::formal_parameters) == 1);
  CHECK(count_of(t, NodeType::simple_parameter) == 2);
  CHECK(count_of(t, NodeType::return_statement) == 1);
  CHECK(count_of(t, NodeType::binary_expression) == 1);
  CHECK(!t.had_errors);
}

TEST_CASE("class with method and member access") {
  SyntaxTree t =
      parse_checked("<?php class A extends B { public function m() { $this->x = 1; } }");
  CHECK(count_of(t, NodeType::class_declaration) == 1);
  CHECK(count_of(t, NodeType::declaration_list) == 1);
  CHECK(count_of(t, NodeType::method_declaration) == 1);
  CHECK(count_of(t, NodeType::member_access_expression) == 1);
  CHECK(!t.had_errors);
}

TEST_CASE("control flow statements") {
  SyntaxTree t = parse_checked(
      "<?php if ($a) { f(); } elseif ($b) { g(); } else { h(); }"
      " while ($i < 3) { $i++; }"
      " foreach ($m as $k => $v) { echo $k; }"
      " for ($i = 0; $i < 2; $i++) ;");
  CHECK(count_of(t, NodeType::if_statement) == 1);
  CHECK(count_of(t, NodeType::else_if_clause) == 1);
  CHECK(count_of(t, NodeType::else_clause) == 1);
  CHECK(count_of(t, NodeType::while_statement) == 1);
  CHECK(count_of(t, NodeType::foreach_statement) == 1);
  CHECK(count_of(t, NodeType::for_statement) == 1);
  CHECK(count_of(t, NodeType::update_expression) == 2);
  CHECK(count_of(t, NodeType::function_call_expression) == 3);
  CHECK(!t.had_errors);
}

TEST_CASE("alternative syntax blocks") {
  SyntaxTree t = parse_checked("<?php if ($a): echo 1; else: echo 2; endif;");
  CHECK(count_of(t, NodeType::if_statement) == 1);
  CHECK(count_of(t, NodeType::else_clause) == 1);
  CHECK(count_of(t, NodeType::echo_statement) == 2);
  CHECK(!t.had_errors);
}

TEST_CASE("call with subscripted superglobal") {
  CHECK(sexpr("<?php eval($_POST['x']);") ==
        "program(php_tag expression_statement(function_call_expression(name "
        "arguments(argument(subscript_expression(variable_name string))))))");
}

TEST_CASE("string variants map to distinct node types") {
  SyntaxTree t = parse_checked(
      "<?php $a = 'plain'; $b = \"abc$x\"; $c = `ls $dir`;\n"
      "$d = <<<EOT\nhello $who\nEOT;\n$e = <<<'EOT'\nraw\nEOT;\n");
  CHECK(count_of(t, NodeType::string) == 1);
  CHECK(count_of(t, NodeType::encapsed_string) == 1);
  CHECK(count_of(t, NodeType::shell_command_expression) == 1);
  CHECK(count_of(t, NodeType::heredoc) == 1);
  CHECK(count_of(t, NodeType::nowdoc) == 1);
  CHECK(!t.had_errors);
}

TEST_CASE("interpolated string carries embedded variable kids") {
  SyntaxTree t = parse_checked("<?php $b = \"abc$x\";");
  for (const auto& n : t.nodes) {
    if (n.type == NodeType::encapsed_string) {
      REQUIRE(n.kids.size() == 1);
      CHECK(t.nodes[n.kids[0]].type == NodeType::variable_name);
      return;
    }
  }
  FAIL("no encapsed_string node");
}

TEST_CASE("object and scoped access forms") {
  SyntaxTree t = parse_checked(
      "<?php $o = new Foo(1); $o?->m(); A::m(); A::$p; A::C; $o->n();");
  CHECK(count_of(t, NodeType::object_creation_expression) == 1);
  CHECK(count_of(t, NodeType::nullsafe_member_call_expression) == 1);
  CHECK(count_of(t, NodeType::scoped_call_expression) == 1);
  CHECK(count_of(t, NodeType::scoped_property_access_expression) == 1);
  CHECK(count_of(t, NodeType::member_call_expression) == 1);
  CHECK(!t.had_errors);
}

TEST_CASE("call expressions keep the access form as callee") {
  CHECK(sexpr("<?php A::m(); A::C;") ==
        "program(php_tag expression_statement(scoped_call_expression("
        "class_constant_access_expression(name name) arguments)) "
        "expression_statement(class_constant_access_expression(name name)))");
  CHECK(sexpr("<?php $o->n(1);") ==
        "program(php_tag expression_statement(member_call_expression("
        "member_access_expression(variable_name name) arguments(argument(integer)))))");
}

TEST_CASE("closures and match") {
  SyntaxTree t = parse_checked(
      "<?php $f = function($a) use ($b) { return $a; };"
      " $g = fn($x) => $x + 1;"
      " $r = match($x) { 1, 2 => 'a', default => 'b' };");
  CHECK(count_of(t, NodeType::anonymous_function) == 1);
  CHECK(count_of(t, NodeType::anonymous_function_use_clause) == 1);
  CHECK(count_of(t, NodeType::arrow_function) == 1);
  CHECK(count_of(t, NodeType::match_expression) == 1);
  CHECK(count_of(t, NodeType::match_arm) == 2);
  CHECK(!t.had_errors);
}

TEST_CASE("array literals in both notations") {
  SyntaxTree t = parse_checked("<?php $a = array(1, 'k' => 2); $b = [3, [4, 5]];");
  CHECK(count_of(t, NodeType::array_creation_expression) == 3);
  CHECK(count_of(t, NodeType::array_element_initializer) == 6);
  CHECK(!t.had_errors);
}

TEST_CASE("unary and cast expressions") {
  SyntaxTree t = parse_checked(
      "<?php $a = (int)$x; $b = !$y; $c = @f(); $d = -3; print 1; include 'x.php';");
  CHECK(count_of(t, NodeType::cast_expression) == 1);
  CHECK(count_of(t, NodeType::unary_op_expression) == 2);
  CHECK(count_of(t, NodeType::error_suppression_expression) == 1);
  CHECK(count_of(t, NodeType::print_intrinsic) == 1);
  CHECK(count_of(t, NodeType::include_expression) == 1);
  CHECK(!t.had_errors);
}

TEST_CASE("precedence shapes the tree") {
  CHECK(sexpr("<?php $a = 1 + 2 * 3;") ==
        "program(php_tag expression_statement(assignment_expression(variable_name "
        "binary_expression(integer binary_expression(integer integer)))))");
  CHECK(sexpr("<?php $a = (1 + 2) * 3;") ==
        "program(php_tag expression_statement(assignment_expression(variable_name "
        "binary_expression(parenthesized_expression(binary_expression(integer integer)) "
        "integer))))");
}

TEST_CASE("broken statement flags an error without derailing the rest") {
  SyntaxTree t = parse_checked("<?php $a = ) ; $b = 2;");
  CHECK(t.had_errors);
  CHECK(has(t, NodeType::error));
  CHECK(count_of(t, NodeType::assignment_expression) == 2);
}

TEST_CASE("garbage after open tag yields error nodes, not a crash") {
  SyntaxTree t = parse_checked("<?php ]]][[ ??? )(");
  CHECK(t.had_errors);
  CHECK(has(t, NodeType::error));
}

TEST_CASE("unterminated constructs survive") {
  for (const char* src : {"<?php $a = \"unclosed", "<?php /* open comment", "<?php f(1, 2",
                          "<?php class A {", "<?php $h = <<<EOT\nnever closed"}) {
    SyntaxTree t = parse_checked(src);
    CHECK(t.nodes.size() >= 2);
  }
}

TEST_CASE("deep nesting is bounded, not fatal") {
  std::string src = "<?php $a = ";
  for (int i = 0; i < 5000; ++i) src += "(1+";
  src += "2";
  for (int i = 0; i < 5000; ++i) src += ")";
  src += ";";
  SyntaxTree t = parse_checked(src);
  CHECK(!t.nodes.empty());
}

TEST_CASE("parsing is deterministic") {
  const char* src = "<?php function f() { return [1, \"a$b\", g(2)]; }";
  SyntaxTree a = parse_php(src);
  SyntaxTree b = parse_php(src);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].type == b.nodes[i].type);
    CHECK(a.nodes[i].begin == b.nodes[i].begin);
    CHECK(a.nodes[i].end == b.nodes[i].end);
    CHECK(a.nodes[i].kids == b.nodes[i].kids);
  }
}

TEST_CASE("fuzz: random bytes never crash and keep tree invariants") {
  Rng rng(0x9e3779b97f4a7c15ull);
  for (int iter = 0; iter < 600; ++iter) {
    size_t len = rng.below(400);
    std::string src;
    src.reserve(len);
    for (size_t i = 0; i < len; ++i) src += char(rng.below(256));
    parse_checked(src);
  }
}

TEST_CASE("fuzz: php-shaped fragments never crash and keep tree invariants") {
  static const char* kPool[] = {
      "<?php ", "?>",      "$a",   "=",    ";",    "(",      ")",     "{",     "}",
      "[",      "]",       "\"",   "'",    "`",    "if",     "else",  "while", "for",
      "foreach","function","class","echo", "eval", "->",     "::",    "=>",    "??",
      "+",      "*",       "/*",   "*/",   "//",   "#",      "\n",    " ",     "123",
      "0x1f",   "1.5e3",   "$_POST","'x'", "\"y$z\"", "<<<EOT\n", "EOT;\n", "\\", "&",
      ",",      "new",     "match","fn",   "use",  "return", "@",     "...",   ":",
  };
  Rng rng(42);
  for (int iter = 0; iter < 400; ++iter) {
    std::string src = "<?php ";
    size_t parts = 2 + rng.below(60);
    for (size_t i = 0; i < parts; ++i) src += kPool[rng.below(std::size(kPool))];
    parse_checked(src);
  }
}
