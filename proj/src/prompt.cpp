#include "huh/prompt.hpp"

#include <fstream>
#include <sstream>

#include "huh/segmenter.hpp"
#include "sha256.hpp"

namespace huh {

namespace {

constexpr std::string_view kLevel1 =
    "Use a third person singular perspective, referring to the speaker. Take the last sentence "
    "of this text which ends with a full stop, and explain it in your own words: {context}";

constexpr std::string_view kLevel2 =
    "Use a third person singular perspective, referring to the speaker. Consider the last two "
    "sentences of this text. Explain them in your own words, taking a broader perspective, and "
    "use simple language: {context}";

constexpr std::string_view kPunctuation =
    "Add missing punctuation and sentence casing to this transcript text. Do not change, add, "
    "or remove any words: {context}";

const char* file_name(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kLevel1: return "level1.txt";
    case TemplateKind::kLevel2: return "level2.txt";
    case TemplateKind::kPunctuation: return "punctuation.txt";
  }
  return "";
}

std::size_t count_placeholders(std::string_view text) {
  std::size_t count = 0;
  for (auto pos = text.find(kContextPlaceholder); pos != std::string_view::npos;
       pos = text.find(kContextPlaceholder, pos + kContextPlaceholder.size())) {
    ++count;
  }
  return count;
}

}  // namespace

std::string_view default_template_text(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kLevel1: return kLevel1;
    case TemplateKind::kLevel2: return kLevel2;
    case TemplateKind::kPunctuation: return kPunctuation;
  }
  return kLevel1;
}

PromptTemplate::PromptTemplate(TemplateKind kind, std::string instruction_text)
    : kind_(kind), text_(std::move(instruction_text)) {
  const auto n = count_placeholders(text_);
  if (n != 1) {
    throw PromptError(PromptError::Kind::kMissingTemplate,
                      std::string(file_name(kind)) + ": expected exactly one {context} placeholder, found " +
                          std::to_string(n));
  }
}

std::string PromptTemplate::render(std::string_view context) const {
  const auto pos = text_.find(kContextPlaceholder);
  std::string out;
  out.reserve(text_.size() + context.size());
  out.append(text_, 0, pos);
  out.append(context);
  out.append(text_, pos + kContextPlaceholder.size());
  return out;
}

std::string PromptTemplate::hash() const { return sha256_hex(text_); }

const PromptTemplate& TemplateSet::for_level(int level) const {
  if (level == 1) return level1;
  if (level == 2) return level2;
  throw PromptError(PromptError::Kind::kMissingTemplate,
                    "no template for level " + std::to_string(level));
}

TemplateSet load_templates(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw PromptError(PromptError::Kind::kIo, "template directory not found: " + dir.string());
  }
  TemplateSet set;
  for (auto* slot : {&set.level1, &set.level2, &set.punctuation}) {
    const auto path = dir / file_name(slot->kind());
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PromptError(PromptError::Kind::kIo, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.ends_with("\r\n")) {
      text.resize(text.size() - 2);
    } else if (text.ends_with('\n')) {
      text.pop_back();
    }
    *slot = PromptTemplate(slot->kind(), std::move(text));
  }
  return set;
}

std::string build_prompt(const ContextWindow& window, const TemplateSet& templates) {
  return templates.for_level(window.level).render(window.context_text);
}

std::string build_punctuation_prompt(std::string_view text, const TemplateSet& templates) {
  return templates.punctuation.render(text);
}

}  // namespace huh
