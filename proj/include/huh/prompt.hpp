#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "huh/error.hpp"

namespace huh {

struct ContextWindow;

class PromptError : public Error {
 public:
  enum class Kind { kMissingTemplate, kIo };
  PromptError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class TemplateKind { kLevel1, kLevel2, kPunctuation };

inline constexpr std::string_view kContextPlaceholder = "{context}";

// An instruction with exactly one {context} placeholder. Construction
// validates the placeholder count.
class PromptTemplate {
 public:
  PromptTemplate(TemplateKind kind, std::string instruction_text);

  TemplateKind kind() const { return kind_; }
  const std::string& instruction_text() const { return text_; }
  std::string render(std::string_view context) const;
  // Hex sha256 of the instruction text; recorded in bundle metadata.
  std::string hash() const;

 private:
  TemplateKind kind_;
  std::string text_;
};

std::string_view default_template_text(TemplateKind kind);

struct TemplateSet {
  PromptTemplate level1{TemplateKind::kLevel1, std::string(default_template_text(TemplateKind::kLevel1))};
  PromptTemplate level2{TemplateKind::kLevel2, std::string(default_template_text(TemplateKind::kLevel2))};
  PromptTemplate punctuation{TemplateKind::kPunctuation,
                             std::string(default_template_text(TemplateKind::kPunctuation))};

  const PromptTemplate& for_level(int level) const;
};

// Loads level1.txt, level2.txt and punctuation.txt from `dir`. Files that are
// absent keep the default; one trailing newline is dropped from each file.
// Throws kIo when `dir` is not a directory.
TemplateSet load_templates(const std::filesystem::path& dir);

std::string build_prompt(const ContextWindow& window, const TemplateSet& templates);
std::string build_punctuation_prompt(std::string_view text, const TemplateSet& templates);

}  // namespace huh
