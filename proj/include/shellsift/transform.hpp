#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shellsift/corpus.hpp"

namespace shellsift {

// Obfuscation operator registry. Order is fixed; sampling and persisted
// weights rely on it.
inline constexpr std::array<const char*, 8> kOperatorRegistry = {
    "base64_wrap_string", "string_split",      "identifier_rename", "dead_code_insert",
    "charcode_build",     "whitespace_reflow", "wrapper_function",  "dynamic_invocation"};

inline constexpr double kWeightMin = 0.05;
inline constexpr double kWeightMax = 20.0;

struct OperatorWeights {
  std::map<std::string, double> w;  // one entry per registry operator

  static OperatorWeights uniform();
  double total() const;
  // Clip into [kWeightMin, kWeightMax] and rescale the unclipped weights so
  // the total equals the registry size again.
  void normalize();
};

std::string weights_to_json(const OperatorWeights& w);
OperatorWeights weights_from_json(std::string_view text);

struct RecipeStep {
  std::string name;
  std::string params;  // reserved; operators draw their choices from the seed
  bool operator==(const RecipeStep&) const = default;
};

struct MutationRecipe {
  std::string recipe_id;
  std::vector<RecipeStep> ops;  // 1..4 distinct registry operators
  uint64_t seed = 0;
  bool operator==(const MutationRecipe&) const = default;
};

// Length ~ uniform{1..4}; operators drawn without replacement with
// probability proportional to weight. Pure function of (weights, seed).
MutationRecipe sample_recipe(const OperatorWeights& weights, uint64_t seed);

struct MutationResult {
  ScriptSample child;
  std::vector<std::string> applied;  // operators that found a site and fired
  std::vector<std::string> skipped;  // inapplicable operators
  bool no_op = false;                // nothing fired; child.raw == parent raw
};

// Applies each operator in order as a syntax-tree-guided rewrite. Every
// accepted step must re-parse with zero error nodes, otherwise it is
// reverted and recorded as skipped.
MutationResult apply_recipe(const ScriptSample& sample, const MutationRecipe& recipe);

// One JSON line per mutation for the recipe log.
std::string recipe_log_line(const MutationRecipe& recipe, const MutationResult& result,
                            std::string_view parent_id);

// Replaces every risky-sink call (direct name, sink-named method, callback
// dispatchers, variable/complex callees) and every backtick execution with a
// same-arity length computation over the original argument expressions.
// Returns absent when the input cannot be parsed or the rewrite fails to
// reach a sink-free fixed point.
std::optional<std::string> sanitize_sinks(std::string_view src, std::string* diagnostic = nullptr);

// De-malicious transform: sanitize the pre-mutation source, then replay the
// recipe so obfuscation scaffolding is rebuilt on the defanged code. For
// origin != mutated, pass null ancestor/recipe and the sample itself is
// sanitized. Returns absent when sanitization or verification fails.
std::optional<ScriptSample> de_malicious(const ScriptSample& sample,
                                         const ScriptSample* ancestor = nullptr,
                                         const MutationRecipe* recipe = nullptr,
                                         std::string* diagnostic = nullptr);

// Independent check, deliberately not sharing the sanitizer's code path: a
// token-level scan (case-folded identifier occurrences of the eight sink
// names, plus backtick strings) must come up empty and the sample must parse
// with zero error nodes.
bool verify_benign(const ScriptSample& sample);
bool verify_benign_source(std::string_view raw);

// Multiplicative weight update: operators seen in evasive recipes are
// encouraged, operators seen in caught recipes are discouraged, then the
// result is clipped and renormalized.
OperatorWeights update_weights(const OperatorWeights& weights,
                               const std::vector<MutationRecipe>& caught,
                               const std::vector<MutationRecipe>& evasive, double eta = 0.2);

}  // namespace shellsift
