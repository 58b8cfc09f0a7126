#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nexus {

enum class TemplateId {
  ContextAgent,
  MacroAgent,
  MicroAgent,
  CalibrationAgent,
  ValuePredictor,
  CotBaseline,
  Judge,
  GuidelineConsolidation,
};

/// The seven published agent, baseline and judge templates.
inline constexpr TemplateId kPublishedTemplates[] = {
    TemplateId::ContextAgent,   TemplateId::MacroAgent,  TemplateId::MicroAgent, TemplateId::CalibrationAgent,
    TemplateId::ValuePredictor, TemplateId::CotBaseline, TemplateId::Judge,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

/// A stored template. The system text is sent verbatim; the user text is a format string in which
/// `{name}` is a placeholder and `{{`/`}}` stand for literal braces.
struct PromptTemplate {
  TemplateId id;
  std::string system_text;
  std::string user_text;
  std::set<std::string> placeholders;
  /// Raw fixture bytes, front-matter included.
  std::string_view fixture;
};

struct PromptPair {
  std::string system;
  std::string user;
};

using Bindings = std::map<std::string, std::string>;

const PromptTemplate& prompt_template(TemplateId id);

/// Placeholder names that must be bound (optional sections excluded).
std::set<std::string> required_placeholders(TemplateId id);
std::set<std::string> required_placeholders(std::string_view template_name);

/// Placeholders that render as the empty string when unbound.
bool is_optional_placeholder(std::string_view name);

/// Literal substitution. Throws MissingBinding / UnknownPlaceholder.
PromptPair render(TemplateId id, const Bindings& bindings);

/// Parses a fixture file (front-matter + `=== system ===` / `=== user ===` sections).
PromptTemplate parse_prompt_fixture(TemplateId id, std::string_view fixture);

/// `{name}` tokens in a user format string, ignoring `{{`/`}}` escapes.
std::set<std::string> scan_placeholders(std::string_view format_text);

namespace detail {

struct EmbeddedPrompt {
  std::string_view name;
  std::string_view bytes;
};

std::span<const EmbeddedPrompt> embedded_prompts();

}  // namespace detail

}  // namespace nexus
