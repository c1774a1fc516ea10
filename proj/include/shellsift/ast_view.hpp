#pragma once

#include "shellsift/php_parser.hpp"

#include <cstddef>
#include <vector>

namespace shellsift {

// Reserved ids precede the grammar vocabulary; node type n maps to
// kAstReserved + (int)n.
inline constexpr int kAstPadId = 0;
inline constexpr int kAstTruncMarkId = 1;
inline constexpr int kAstUnkTypeId = 2;
inline constexpr int kAstReserved = 3;
inline constexpr size_t kAstVocabSize = kAstReserved + kNodeTypeCount;

inline int ast_type_id(NodeType t) { return kAstReserved + static_cast<int>(t); }

struct PrunedCounts {
  size_t html = 0;                // subtrees dropped by the HTML rule
  size_t strings = 0;             // string nodes whose children were suppressed
  size_t array_truncations = 0;   // array literals that lost elements to the cap
};

// Pre-order node-type linearization under three pruning rules:
// html/text subtrees skipped, string-family nodes emitted childless, array
// literals capped at a_max elements with a trailing TRUNC_MARK. The result
// keeps only the first l_a ids.
std::vector<int> linearize_pruned(const SyntaxTree& tree, size_t l_a = 128, size_t a_max = 10,
                                  PrunedCounts* counts = nullptr);

}  // namespace shellsift
