#include "conceptprobe/prompts.hpp"

#include <fstream>

#include "conceptprobe/error.hpp"

namespace cprobe {

using nlohmann::json;

const char* to_string(PromptRole role) noexcept {
  switch (role) {
    case PromptRole::positive: return "positive";
    case PromptRole::negative: return "negative";
    case PromptRole::unified: return "unified";
    case PromptRole::scoring: return "scoring";
  }
  return "unknown";
}

PromptRole parse_prompt_role(std::string_view text) {
  if (text == "positive") return PromptRole::positive;
  if (text == "negative") return PromptRole::negative;
  if (text == "unified") return PromptRole::unified;
  if (text == "scoring") return PromptRole::scoring;
  throw UsageError("unknown prompt role '" + std::string(text) + "'");
}

const char* to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::auto_anchors: return "auto_anchors";
    case Orientation::manual_positive: return "manual_positive";
    case Orientation::manual_flip: return "manual_flip";
  }
  return "unknown";
}

Orientation parse_orientation(std::string_view text) {
  if (text == "auto_anchors") return Orientation::auto_anchors;
  if (text == "manual_positive") return Orientation::manual_positive;
  if (text == "manual_flip") return Orientation::manual_flip;
  throw ConfigError("unknown orientation '" + std::string(text) + "'");
}

const std::string* ConceptSpec::template_for(PromptRole role) const noexcept {
  switch (role) {
    case PromptRole::positive: return &positive_template;
    case PromptRole::negative: return &negative_template;
    case PromptRole::unified: return &unified_template;
    case PromptRole::scoring: return scoring_template ? &*scoring_template : nullptr;
  }
  return nullptr;
}

namespace {

std::size_t count_placeholders(std::string_view t) {
  std::size_t n = 0;
  for (auto pos = t.find(kPlaceholder); pos != std::string_view::npos;
       pos = t.find(kPlaceholder, pos + kPlaceholder.size()))
    ++n;
  return n;
}

}  // namespace

std::string render_template(std::string_view templ, std::string_view input) {
  const auto pos = templ.find(kPlaceholder);
  if (pos == std::string_view::npos) throw ConfigError("template has no {input} placeholder");
  std::string out;
  out.reserve(templ.size() + input.size());
  out.append(templ.substr(0, pos));
  out.append(input);
  out.append(templ.substr(pos + kPlaceholder.size()));
  return out;
}

std::string render(const ConceptSpec& spec, PromptRole role, std::string_view input) {
  const auto* t = spec.template_for(role);
  if (t == nullptr)
    throw ConfigError("concept '" + spec.name + "' has no " + to_string(role) + " template");
  return render_template(*t, input);
}

std::vector<std::string> validate_spec(const ConceptSpec& spec) {
  std::vector<std::string> out;
  if (spec.name.empty()) out.emplace_back("name: empty");
  auto check = [&](const char* field, const std::string& t) {
    const auto n = count_placeholders(t);
    if (n == 0) out.push_back(std::string(field) + ": missing {input}");
    else if (n > 1) out.push_back(std::string(field) + ": " + std::to_string(n) + " {input} placeholders");
  };
  check("positive_template", spec.positive_template);
  check("negative_template", spec.negative_template);
  check("unified_template", spec.unified_template);
  if (spec.scoring_template) check("scoring_template", *spec.scoring_template);
  if (spec.orientation == Orientation::auto_anchors) {
    if (!spec.anchors) out.emplace_back("anchors: required when orientation is auto_anchors");
    else if (spec.anchors->positive_text.empty() || spec.anchors->negative_text.empty())
      out.emplace_back("anchors: anchor texts must be nonempty");
  }
  return out;
}

Digest template_digest(const ConceptSpec& spec, PromptRole role) {
  const auto* t = spec.template_for(role);
  return sha256(t ? std::string_view(*t) : std::string_view());
}

const ConceptSpec& PromptVariantSet::get(std::string_view label) const {
  if (label == base_label) return base;
  for (const auto& [l, spec] : variants)
    if (l == label) return spec;
  throw UsageError("unknown prompt variant '" + std::string(label) + "' for concept '" +
                   base.name + "'");
}

std::vector<std::string> PromptVariantSet::labels() const {
  std::vector<std::string> out{base_label};
  for (const auto& v : variants) out.push_back(v.first);
  return out;
}

namespace {

ConceptSpec spec_from_templates(const json& t, const std::string& name, Orientation orientation,
                                const std::optional<Anchors>& anchors) {
  ConceptSpec s;
  s.name = name;
  s.orientation = orientation;
  s.anchors = anchors;
  s.positive_template = t.at("positive").get<std::string>();
  s.negative_template = t.at("negative").get<std::string>();
  s.unified_template = t.at("unified").get<std::string>();
  if (t.contains("scoring") && !t.at("scoring").is_null())
    s.scoring_template = t.at("scoring").get<std::string>();
  return s;
}

}  // namespace

PromptVariantSet concept_set_from_json(const json& j) {
  try {
    const auto name = j.at("name").get<std::string>();
    const auto orientation = parse_orientation(j.value("orientation", std::string("manual_positive")));
    std::optional<Anchors> anchors;
    if (j.contains("anchors") && !j.at("anchors").is_null())
      anchors = Anchors{j.at("anchors").at("positive").get<std::string>(),
                        j.at("anchors").at("negative").get<std::string>()};

    PromptVariantSet set;
    set.base_label = j.value("base", std::string("original"));
    const auto& variants = j.at("variants");
    if (!variants.contains(set.base_label))
      throw ConfigError("concept '" + name + "': base variant '" + set.base_label + "' missing");
    set.base = spec_from_templates(variants.at(set.base_label), name, orientation, anchors);
    for (const auto& [label, t] : variants.items()) {
      if (label == set.base_label) continue;
      set.variants.emplace_back(label, spec_from_templates(t, name, orientation, anchors));
    }

    std::vector<std::string> problems;
    for (const auto& label : set.labels())
      for (auto& v : validate_spec(set.get(label))) problems.push_back(label + "." + v);
    if (!problems.empty()) {
      std::string msg = "concept '" + name + "' is invalid:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw ConfigError(msg);
    }
    return set;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("concept file: ") + e.what());
  }
}

json concept_set_to_json(const PromptVariantSet& set) {
  json j;
  j["format"] = "conceptprobe.concept/1";
  j["name"] = set.base.name;
  j["orientation"] = to_string(set.base.orientation);
  if (set.base.anchors)
    j["anchors"] = {{"positive", set.base.anchors->positive_text},
                    {"negative", set.base.anchors->negative_text}};
  j["base"] = set.base_label;
  auto templates = [](const ConceptSpec& s) {
    json t = {{"positive", s.positive_template},
              {"negative", s.negative_template},
              {"unified", s.unified_template}};
    if (s.scoring_template) t["scoring"] = *s.scoring_template;
    return t;
  };
  j["variants"][set.base_label] = templates(set.base);
  for (const auto& [label, s] : set.variants) j["variants"][label] = templates(s);
  return j;
}

PromptVariantSet load_concept_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open concept file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return concept_set_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cprobe
