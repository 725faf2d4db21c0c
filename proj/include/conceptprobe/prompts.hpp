#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conceptprobe/hashing.hpp"

namespace cprobe {

enum class PromptRole { positive, negative, unified, scoring };

const char* to_string(PromptRole role) noexcept;
PromptRole parse_prompt_role(std::string_view text);

enum class Orientation { auto_anchors, manual_positive, manual_flip };

const char* to_string(Orientation o) noexcept;
Orientation parse_orientation(std::string_view text);

/// Known-positive and known-negative texts used to fix the concept sign.
struct Anchors {
  std::string positive_text;
  std::string negative_text;
};

inline constexpr std::string_view kPlaceholder = "{input}";

/// A measurable concept: the prompt templates for both poles, the unified
/// inference prompt, and optionally the direct-scoring prompt.
struct ConceptSpec {
  std::string name;
  std::string positive_template;
  std::string negative_template;
  std::string unified_template;
  std::optional<std::string> scoring_template;
  Orientation orientation = Orientation::manual_positive;
  std::optional<Anchors> anchors;

  /// Null when the role has no template (only possible for scoring).
  const std::string* template_for(PromptRole role) const noexcept;
};

/// Substitutes `input` for the single `{input}` placeholder. Nothing else in
/// the template is interpreted.
std::string render(const ConceptSpec& spec, PromptRole role, std::string_view input);
std::string render_template(std::string_view templ, std::string_view input);

/// Empty iff the spec is well formed. Each entry starts with the offending field.
std::vector<std::string> validate_spec(const ConceptSpec& spec);

/// Digest of a role's template text; part of every cache key.
Digest template_digest(const ConceptSpec& spec, PromptRole role);

/// A base concept plus its labelled rephrasings, e.g. "definition_rephrased".
struct PromptVariantSet {
  std::string base_label = "original";
  ConceptSpec base;
  std::vector<std::pair<std::string, ConceptSpec>> variants;

  /// `label` may name the base or any variant.
  const ConceptSpec& get(std::string_view label) const;
  std::vector<std::string> labels() const;
};

/// Concept file: a JSON document with the concept name, orientation, optional
/// anchors and a "variants" object mapping labels to template sets.
PromptVariantSet load_concept_file(const std::filesystem::path& path);
PromptVariantSet concept_set_from_json(const nlohmann::json& j);
nlohmann::json concept_set_to_json(const PromptVariantSet& set);

}  // namespace cprobe
