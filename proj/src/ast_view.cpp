#include "shellsift/ast_view.hpp"

namespace shellsift {

namespace {

bool is_inline_text(NodeType t) {
  return t == NodeType::text || t == NodeType::text_interpolation;
}

bool is_string_family(NodeType t) {
  switch (t) {
    case NodeType::string:
    case NodeType::encapsed_string:
    case NodeType::heredoc:
    case NodeType::nowdoc:
    case NodeType::shell_command_expression:
      return true;
    default:
      return false;
  }
}

struct Walker {
  const SyntaxTree& tree;
  size_t a_max;
  std::vector<int> ids;
  PrunedCounts counts;

  void visit(uint32_t index) {
    const SyntaxTree::Node& node = tree.nodes[index];
    if (is_inline_text(node.type)) {
      ++counts.html;
      return;
    }
    ids.push_back(ast_type_id(node.type));
    if (is_string_family(node.type)) {
      if (!node.kids.empty()) ++counts.strings;
      return;
    }
    if (node.type == NodeType::array_creation_expression && node.kids.size() > a_max) {
      for (size_t i = 0; i < a_max; ++i) visit(node.kids[i]);
      ids.push_back(kAstTruncMarkId);
      ++counts.array_truncations;
      return;
    }
    for (uint32_t kid : node.kids) visit(kid);
  }
};

}  // namespace

std::vector<int> linearize_pruned(const SyntaxTree& tree, size_t l_a, size_t a_max,
                                  PrunedCounts* counts) {
  Walker w{tree, a_max < 1 ? 1 : a_max, {}, {}};
  if (!tree.nodes.empty()) w.visit(0);
  if (counts) *counts = w.counts;
  if (w.ids.size() > l_a) w.ids.resize(l_a);
  return std::move(w.ids);
}

}  // namespace shellsift
