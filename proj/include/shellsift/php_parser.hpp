#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace shellsift {

// Frozen grammar vocabulary. Order is part of the checkpoint format; append
// only, never reorder. First field is the enum identifier, second the
// serialized node-type name.
#define SHELLSIFT_NODE_TYPES(X)                                                     \
  X(program, "program")                                                            \
  X(php_tag, "php_tag")                                                            \
  X(text_interpolation, "text_interpolation")                                      \
  X(text, "text")                                                                  \
  X(empty_statement, "empty_statement")                                            \
  X(expression_statement, "expression_statement")                                  \
  X(compound_statement, "compound_statement")                                      \
  X(if_statement, "if_statement")                                                  \
  X(else_if_clause, "else_if_clause")                                              \
  X(else_clause, "else_clause")                                                    \
  X(while_statement, "while_statement")                                            \
  X(do_statement, "do_statement")                                                  \
  X(for_statement, "for_statement")                                                \
  X(foreach_statement, "foreach_statement")                                        \
  X(switch_statement, "switch_statement")                                          \
  X(switch_block, "switch_block")                                                  \
  X(case_statement, "case_statement")                                              \
  X(default_statement, "default_statement")                                        \
  X(break_statement, "break_statement")                                            \
  X(continue_statement, "continue_statement")                                      \
  X(return_statement, "return_statement")                                          \
  X(goto_statement, "goto_statement")                                              \
  X(named_label_statement, "named_label_statement")                                \
  X(echo_statement, "echo_statement")                                              \
  X(unset_statement, "unset_statement")                                            \
  X(global_declaration, "global_declaration")                                      \
  X(function_static_declaration, "function_static_declaration")                    \
  X(declare_statement, "declare_statement")                                        \
  X(try_statement, "try_statement")                                                \
  X(catch_clause, "catch_clause")                                                  \
  X(finally_clause, "finally_clause")                                              \
  X(namespace_definition, "namespace_definition")                                  \
  X(namespace_use_declaration, "namespace_use_declaration")                        \
  X(const_declaration, "const_declaration")                                        \
  X(function_definition, "function_definition")                                    \
  X(formal_parameters, "formal_parameters")                                        \
  X(simple_parameter, "simple_parameter")                                          \
  X(variadic_parameter, "variadic_parameter")                                      \
  X(class_declaration, "class_declaration")                                        \
  X(declaration_list, "declaration_list")                                          \
  X(method_declaration, "method_declaration")                                      \
  X(property_declaration, "property_declaration")                                  \
  X(interface_declaration, "interface_declaration")                                \
  X(trait_declaration, "trait_declaration")                                        \
  X(enum_declaration, "enum_declaration")                                          \
  X(enum_case, "enum_case")                                                        \
  X(use_declaration, "use_declaration")                                            \
  X(attribute_list, "attribute_list")                                              \
  X(attribute, "attribute")                                                        \
  X(assignment_expression, "assignment_expression")                                \
  X(reference_assignment_expression, "reference_assignment_expression")            \
  X(augmented_assignment_expression, "augmented_assignment_expression")            \
  X(conditional_expression, "conditional_expression")                              \
  X(binary_expression, "binary_expression")                                        \
  X(unary_op_expression, "unary_op_expression")                                    \
  X(cast_expression, "cast_expression")                                            \
  X(update_expression, "update_expression")                                        \
  X(error_suppression_expression, "error_suppression_expression")                  \
  X(clone_expression, "clone_expression")                                          \
  X(print_intrinsic, "print_intrinsic")                                            \
  X(include_expression, "include_expression")                                      \
  X(include_once_expression, "include_once_expression")                            \
  X(require_expression, "require_expression")                                      \
  X(require_once_expression, "require_once_expression")                            \
  X(throw_expression, "throw_expression")                                          \
  X(match_expression, "match_expression")                                          \
  X(match_arm, "match_arm")                                                        \
  X(exit_expression, "exit_expression")                                            \
  X(function_call_expression, "function_call_expression")                          \
  X(arguments, "arguments")                                                        \
  X(argument, "argument")                                                          \
  X(variadic_unpacking, "variadic_unpacking")                                      \
  X(member_access_expression, "member_access_expression")                          \
  X(nullsafe_member_access_expression, "nullsafe_member_access_expression")        \
  X(member_call_expression, "member_call_expression")                              \
  X(nullsafe_member_call_expression, "nullsafe_member_call_expression")            \
  X(scoped_call_expression, "scoped_call_expression")                              \
  X(scoped_property_access_expression, "scoped_property_access_expression")        \
  X(class_constant_access_expression, "class_constant_access_expression")          \
  X(subscript_expression, "subscript_expression")                                  \
  X(parenthesized_expression, "parenthesized_expression")                          \
  X(array_creation_expression, "array_creation_expression")                        \
  X(array_element_initializer, "array_element_initializer")                        \
  X(object_creation_expression, "object_creation_expression")                      \
  X(anonymous_function, "anonymous_function")                                      \
  X(arrow_function, "arrow_function")                                              \
  X(anonymous_function_use_clause, "anonymous_function_use_clause")                \
  X(list_literal, "list_literal")                                                  \
  X(variable_name, "variable_name")                                                \
  X(dynamic_variable_name, "dynamic_variable_name")                                \
  X(name, "name")                                                                  \
  X(qualified_name, "qualified_name")                                              \
  X(integer, "integer")                                                            \
  X(float_literal, "float")                                                        \
  X(string, "string")                                                              \
  X(encapsed_string, "encapsed_string")                                            \
  X(heredoc, "heredoc")                                                            \
  X(nowdoc, "nowdoc")                                                              \
  X(shell_command_expression, "shell_command_expression")                          \
  X(boolean, "boolean")                                                            \
  X(null_literal, "null")                                                          \
  X(error, "error")

enum class NodeType : uint16_t {
#define SHELLSIFT_NT_ENUM(id, name) id,
  SHELLSIFT_NODE_TYPES(SHELLSIFT_NT_ENUM)
#undef SHELLSIFT_NT_ENUM
};

constexpr size_t kNodeTypeCount = []() {
  size_t c = 0;
#define SHELLSIFT_NT_COUNT(id, name) ++c;
  SHELLSIFT_NODE_TYPES(SHELLSIFT_NT_COUNT)
#undef SHELLSIFT_NT_COUNT
  return c;
}();

const char* node_type_name(NodeType t);

struct SyntaxTree {
  struct Node {
    NodeType type = NodeType::error;
    size_t begin = 0;
    size_t end = 0;
    bool error = false;
    std::vector<uint32_t> kids;
  };
  std::vector<Node> nodes;  // index 0 is the program root
  bool had_errors = false;

  const Node& root() const { return nodes.front(); }
};

// Tolerant recursive-descent parse. Never throws on input content; broken
// regions become error-flagged nodes. Bounded recursion depth keeps
// adversarial nesting from overflowing the stack.
SyntaxTree parse_php(std::string_view src);

}  // namespace shellsift
