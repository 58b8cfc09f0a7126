#include "nexus/prompts.hpp"

#include <array>
#include <mutex>

#include <fmt/format.h>

#include "nexus/error.hpp"

namespace nexus {

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 8> kNames = {{
    {TemplateId::ContextAgent, "context_agent"},
    {TemplateId::MacroAgent, "macro_agent"},
    {TemplateId::MicroAgent, "micro_agent"},
    {TemplateId::CalibrationAgent, "calibration_agent"},
    {TemplateId::ValuePredictor, "value_predictor"},
    {TemplateId::CotBaseline, "cot_baseline"},
    {TemplateId::Judge, "judge"},
    {TemplateId::GuidelineConsolidation, "guideline_consolidation"},
}};

bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Walks a format string, calling on_text for literal runs and on_placeholder for `{name}` tokens.
template <typename OnText, typename OnPlaceholder>
void lex_format(std::string_view text, OnText&& on_text, OnPlaceholder&& on_placeholder) {
  std::size_t i = 0;
  std::size_t run = 0;
  auto flush = [&](std::size_t end) {
    if (end > run) on_text(text.substr(run, end - run));
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '{' || c == '}') {
      if (i + 1 < text.size() && text[i + 1] == c) {
        flush(i);
        on_text(text.substr(i, 1));
        i += 2;
        run = i;
        continue;
      }
      if (c == '{') {
        std::size_t j = i + 1;
        while (j < text.size() && is_ident_char(text[j])) ++j;
        if (j > i + 1 && j < text.size() && text[j] == '}') {
          flush(i);
          on_placeholder(text.substr(i + 1, j - i - 1));
          i = j + 1;
          run = i;
          continue;
        }
      }
      throw Error(ErrorKind::BadSpec, fmt::format("unescaped '{}' at byte {} of template", c, i));
    }
    ++i;
  }
  flush(text.size());
}

std::string_view strip_prefix(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix ? s.substr(prefix.size()) : std::string_view{};
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [k, name] : kNames) {
    if (k == id) return name;
  }
  return "unknown";
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::set<std::string> scan_placeholders(std::string_view format_text) {
  std::set<std::string> out;
  lex_format(format_text, [](std::string_view) {}, [&](std::string_view name) { out.emplace(name); });
  return out;
}

PromptTemplate parse_prompt_fixture(TemplateId id, std::string_view fixture) {
  const std::string where = fmt::format("prompt fixture '{}'", to_string(id));
  auto fail = [&](const std::string& what) -> Error { return Error(ErrorKind::BadSpec, where + ": " + what); };

  std::string_view rest = strip_prefix(fixture, "---\n");
  if (rest.data() == nullptr) throw fail("missing front-matter");
  const auto fm_end = rest.find("\n---\n");
  if (fm_end == std::string_view::npos) throw fail("unterminated front-matter");
  std::string_view front = rest.substr(0, fm_end);
  rest = rest.substr(fm_end + 5);

  std::string declared_name;
  std::set<std::string> declared;
  while (!front.empty()) {
    const auto nl = front.find('\n');
    std::string_view line = front.substr(0, nl);
    front = nl == std::string_view::npos ? std::string_view{} : front.substr(nl + 1);
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw fail(fmt::format("bad front-matter line '{}'", line));
    const std::string_view key = line.substr(0, colon);
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    if (key == "template") {
      declared_name = value;
    } else if (key == "placeholders") {
      while (!value.empty()) {
        const auto comma = value.find(',');
        std::string_view item = value.substr(0, comma);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) declared.emplace(item);
        value = comma == std::string_view::npos ? std::string_view{} : value.substr(comma + 1);
      }
    }
  }
  if (declared_name != to_string(id)) throw fail(fmt::format("declares template '{}'", declared_name));

  rest = strip_prefix(rest, "=== system ===\n");
  if (rest.data() == nullptr) throw fail("missing system section");
  const auto user_marker = rest.find("\n=== user ===\n");
  if (user_marker == std::string_view::npos) throw fail("missing user section");
  PromptTemplate t{id, std::string(rest.substr(0, user_marker)), {}, {}, fixture};
  std::string_view user = rest.substr(user_marker + 14);
  if (user.empty() || user.back() != '\n') throw fail("user section must end with a newline");
  user.remove_suffix(1);
  t.user_text = user;
  t.placeholders = scan_placeholders(t.user_text);
  if (t.placeholders != declared) throw fail("front-matter placeholders do not match the template text");
  return t;
}

const PromptTemplate& prompt_template(TemplateId id) {
  static const std::map<TemplateId, PromptTemplate> kTemplates = [] {
    std::map<TemplateId, PromptTemplate> out;
    for (const auto& embedded : detail::embedded_prompts()) {
      auto tid = parse_template_id(embedded.name);
      if (!tid) throw Error(ErrorKind::UnknownTemplate, fmt::format("unexpected prompt fixture '{}'", embedded.name));
      out.emplace(*tid, parse_prompt_fixture(*tid, embedded.bytes));
    }
    return out;
  }();
  auto it = kTemplates.find(id);
  if (it == kTemplates.end()) {
    throw Error(ErrorKind::UnknownTemplate, fmt::format("no fixture for template '{}'", to_string(id)));
  }
  return it->second;
}

bool is_optional_placeholder(std::string_view name) {
  return name == "guidelines_section" || name == "event_predictions_section";
}

std::set<std::string> required_placeholders(TemplateId id) {
  std::set<std::string> out;
  for (const auto& p : prompt_template(id).placeholders) {
    if (!is_optional_placeholder(p)) out.insert(p);
  }
  return out;
}

std::set<std::string> required_placeholders(std::string_view template_name) {
  auto id = parse_template_id(template_name);
  if (!id) throw Error(ErrorKind::UnknownTemplate, fmt::format("unknown template '{}'", template_name));
  return required_placeholders(*id);
}

PromptPair render(TemplateId id, const Bindings& bindings) {
  const PromptTemplate& t = prompt_template(id);
  for (const auto& [name, _] : bindings) {
    if (!t.placeholders.contains(name)) {
      throw Error(ErrorKind::UnknownPlaceholder,
                  fmt::format("template '{}' has no placeholder '{{{}}}'", to_string(id), name));
    }
  }
  for (const auto& name : t.placeholders) {
    if (!bindings.contains(name) && !is_optional_placeholder(name)) {
      throw Error(ErrorKind::MissingBinding,
                  fmt::format("template '{}' requires a binding for '{{{}}}'", to_string(id), name));
    }
  }

  PromptPair out{t.system_text, {}};
  out.user.reserve(t.user_text.size());
  lex_format(
      t.user_text, [&](std::string_view text) { out.user += text; },
      [&](std::string_view name) {
        auto it = bindings.find(std::string(name));
        if (it != bindings.end()) out.user += it->second;
      });
  return out;
}

}  // namespace nexus
