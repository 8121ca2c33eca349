#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "huh/error.hpp"
#include "huh/provider.hpp"
#include "huh/transcript.hpp"

namespace huh {

struct TemplateSet;

class SegmenterError : public Error {
 public:
  enum class Kind { kNoTargetAvailable, kProviderFailure, kInvalidArgument };
  SegmenterError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::string> default_abbreviations();

struct SegmenterOptions {
  Millis gap_ms = 1200;
  std::size_t max_context_chars = 12000;
  std::vector<std::string> abbreviations = default_abbreviations();
};

// A sentence of the joined transcript text. `char_begin`/`char_end` are byte
// offsets into Segmentation::text; times are interpolated by code-point
// position inside the owning cue(s).
struct Sentence {
  std::size_t index = 0;
  std::string text;
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;

  bool operator==(const Sentence&) const = default;
};

struct Segmentation {
  // Cue texts joined with single spaces.
  std::string text;
  std::vector<Sentence> sentences;
  // Byte offset where the unterminated trailing fragment starts; equals
  // text.size() when the text ends on a sentence boundary.
  std::size_t fragment_begin = 0;
};

struct ContextWindow {
  std::string context_text;
  std::vector<std::size_t> target_sentence_indices;
  Millis trigger_ms = 0;
  int level = 1;

  bool operator==(const ContextWindow&) const = default;
};

// Pause-and-capitalization heuristic. A full stop is inserted at a cue
// junction when the pause is at least gap_ms, or at least half of it when the
// next cue opens with a capitalized word other than the pronoun "I".
// Junctions already carrying punctuation are left alone. The final cue is
// closed with a full stop when it ends on a word.
struct RulePunctuation {
  Millis gap_ms = 1200;
};

// Sends batches of cue text to a provider with the punctuation template and
// maps the reply back onto the cues word by word. The reply must keep every
// word; anything else is a kProviderFailure.
struct ProviderPunctuation {
  ExplanationProvider* provider = nullptr;
  const TemplateSet* templates = nullptr;
  RetryPolicy retry;
  Sleeper sleep;
  std::size_t max_batch_chars = 6000;
  std::string request_tag_prefix = "punctuate";
  std::function<void(const std::string& tag, const TokenUsage&)> on_usage;
};

using PunctuationStrategy = std::variant<RulePunctuation, ProviderPunctuation>;

// Only cue text changes; cue count and timestamps are preserved.
Transcript restore_punctuation(const Transcript& transcript, const PunctuationStrategy& strategy);

Segmentation segment(const Transcript& transcript, const SegmenterOptions& options = {});

// Target is the last sentence ending at or before trigger_ms (level 1) or the
// last two (level 2, falling back to one when only one has ended). Context
// runs from the transcript start through the target and is front-truncated
// at sentence boundaries to max_context_chars code points. Targets are never
// dropped, even when they alone exceed the cap.
ContextWindow context_window(const std::vector<Sentence>& sentences, std::string_view full_text,
                             Millis trigger_ms, int level, std::size_t max_context_chars);

}  // namespace huh
