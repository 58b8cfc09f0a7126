#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nexus/error.hpp"
#include "nexus/prompts.hpp"
#include "support.hpp"

using namespace nexus;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("published templates match golden hashes and renders") {
  const auto bad = testing::golden_mismatches();
  for (const auto& b : bad) INFO(b);
  CHECK(bad.empty());
  CHECK(testing::golden_hashes().size() == 14u);
}

TEST_CASE("template ids round trip") {
  for (auto id : kPublishedTemplates) CHECK(parse_template_id(to_string(id)) == id);
  CHECK(parse_template_id("guideline_consolidation") == TemplateId::GuidelineConsolidation);
  CHECK_FALSE(parse_template_id("nope").has_value());
  CHECK(kind_of([] { required_placeholders("nope"); }) == ErrorKind::UnknownTemplate);
}

TEST_CASE("required placeholders") {
  CHECK(required_placeholders(TemplateId::MacroAgent) == std::set<std::string>{"history_str", "horizon", "target_name"});
  CHECK(required_placeholders(TemplateId::ContextAgent) ==
        std::set<std::string>{"domain", "history_str", "target_name", "ts_features"});
  const auto vp = required_placeholders("value_predictor");
  CHECK_FALSE(vp.contains("guidelines_section"));
  CHECK_FALSE(vp.contains("event_predictions_section"));
  CHECK(prompt_template(TemplateId::ValuePredictor).placeholders.contains("guidelines_section"));
  CHECK(is_optional_placeholder("guidelines_section"));
  CHECK_FALSE(is_optional_placeholder("horizon"));
}

TEST_CASE("render errors") {
  auto b = testing::upper_bindings(TemplateId::MacroAgent);
  b.erase("horizon");
  CHECK(kind_of([&] { render(TemplateId::MacroAgent, b); }) == ErrorKind::MissingBinding);
  b = testing::upper_bindings(TemplateId::MacroAgent);
  b["bogus"] = "x";
  CHECK(kind_of([&] { render(TemplateId::MacroAgent, b); }) == ErrorKind::UnknownPlaceholder);
}

TEST_CASE("optional sections render empty") {
  auto b = testing::upper_bindings(TemplateId::ValuePredictor);
  b.erase("guidelines_section");
  b.erase("event_predictions_section");
  const auto text = render(TemplateId::ValuePredictor, b).user;
  CHECK(text.find("<GUIDELINES_SECTION>") == std::string::npos);
  CHECK(text.find("{guidelines_section}") == std::string::npos);
  CHECK(text.find("<HISTORY_STR>\n\n2. Macro") != std::string::npos);
}

TEST_CASE("substitution is literal") {
  auto b = testing::upper_bindings(TemplateId::MacroAgent);
  b["history_str"] = "{horizon} {{x}} $1 \\n";
  const auto text = render(TemplateId::MacroAgent, b).user;
  CHECK(text.find("{horizon} {{x}} $1 \\n") != std::string::npos);
}

TEST_CASE("fixture parsing and escapes") {
  const std::string fixture =
      "---\ntemplate: macro_agent\nplaceholders: a, b\n---\n=== system ===\nSYS {not a placeholder}\n=== user ===\n"
      "x={a} {{literal}} {b}\n";
  auto t = parse_prompt_fixture(TemplateId::MacroAgent, fixture);
  CHECK(t.system_text == "SYS {not a placeholder}");
  CHECK(t.placeholders == std::set<std::string>{"a", "b"});
  CHECK(scan_placeholders("{a} {{b}} {c_1}") == std::set<std::string>{"a", "c_1"});
  CHECK(kind_of([] { scan_placeholders("a } b"); }) == ErrorKind::BadSpec);
}

TEST_CASE("every template renders its own placeholders") {
  for (auto id : kPublishedTemplates) {
    const auto& t = prompt_template(id);
    CHECK(scan_placeholders(t.user_text) == t.placeholders);
    const auto out = render(id, testing::upper_bindings(id));
    CHECK(out.system == t.system_text);
    for (const auto& p : t.placeholders) CHECK(out.user.find("{" + p + "}") == std::string::npos);
  }
}
