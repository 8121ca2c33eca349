#include "huh/segmenter.hpp"

#include <algorithm>
#include <array>

#include "huh/prompt.hpp"
#include "huh/utf8.hpp"

namespace huh {

namespace {

using Kind = SegmenterError::Kind;

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Closing quotes and brackets that may follow a terminal mark.
std::size_t closer_length(std::string_view text, std::size_t pos) {
  static constexpr std::array<std::string_view, 8> kClosers = {
      "\"", "'", ")", "]", "\xE2\x80\x9D", "\xE2\x80\x99", "\xC2\xBB", "\xE2\x80\x9C"};
  for (auto closer : kClosers) {
    if (text.substr(pos).starts_with(closer)) return closer.size();
  }
  return 0;
}

bool iequals_ascii(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

bool is_abbreviation(std::string_view text, std::size_t mark, const std::vector<std::string>& abbreviations) {
  const auto space = text.rfind(' ', mark);
  std::size_t begin = space == std::string_view::npos ? 0 : space + 1;
  while (begin < mark && (text[begin] == '(' || text[begin] == '"' || text[begin] == '\'' || text[begin] == '[')) {
    ++begin;
  }
  const auto token = text.substr(begin, mark + 1 - begin);
  return std::any_of(abbreviations.begin(), abbreviations.end(),
                     [&](const std::string& a) { return iequals_ascii(token, a); });
}

struct CueSpan {
  std::size_t begin;  // byte offsets into the joined text
  std::size_t end;
  std::size_t length;  // code points
};

Millis interpolate(const TranscriptCue& cue, const CueSpan& span, std::string_view text,
                   std::size_t byte_offset) {
  if (span.length == 0) return cue.start_ms;
  const auto offset = utf8::codepoint_count_before(text.substr(span.begin), byte_offset - span.begin);
  const Millis duration = cue.end_ms - cue.start_ms;
  return cue.start_ms + static_cast<Millis>(offset) * duration / static_cast<Millis>(span.length);
}

// Index of the cue whose span contains `byte_offset`.
std::size_t owning_cue(const std::vector<CueSpan>& spans, std::size_t byte_offset) {
  const auto it = std::upper_bound(spans.begin(), spans.end(), byte_offset,
                                   [](std::size_t off, const CueSpan& s) { return off < s.begin; });
  return static_cast<std::size_t>(std::distance(spans.begin(), it)) - 1;
}

bool is_symbol(char32_t cp) {
  return (cp >= 0x2010 && cp <= 0x2027) || cp == 0xAB || cp == 0xBB || cp == 0xBF || cp == 0xA1 ||
         cp == 0xB7 || cp == 0xD7 || cp == 0xF7;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || (cp >= U'0' && cp <= U'9');
  }
  return cp >= 0xC0 && !is_symbol(cp);
}

bool ends_with_punctuation(std::string_view text) {
  if (text.empty()) return true;
  std::size_t pos = 0;
  char32_t last = 0;
  while (pos < text.size()) last = utf8::decode(text, pos);
  return !is_word_char(last);
}

bool starts_capitalized(std::string_view text) {
  std::size_t pos = 0;
  const char32_t first = text.empty() ? 0 : utf8::decode(text, pos);
  const bool upper = (first >= U'A' && first <= U'Z') || (first >= 0xC0 && first <= 0xDE && first != 0xD7);
  if (!upper) return false;
  const auto word = text.substr(0, text.find(' '));
  const bool pronoun = word == "I" || word.starts_with("I'") || word.starts_with("I\xE2\x80\x99");
  return !pronoun;
}

Transcript punctuate_by_rule(const Transcript& transcript, const RulePunctuation& rule) {
  Transcript out = transcript;
  auto& cues = out.cues;
  if (cues.empty()) return out;
  utf8::capitalize_first(cues.front().text);
  for (std::size_t i = 1; i < cues.size(); ++i) {
    auto& prev = cues[i - 1];
    auto& cur = cues[i];
    if (ends_with_punctuation(prev.text)) continue;
    const Millis gap = cur.start_ms - prev.end_ms;
    const bool long_pause = gap >= rule.gap_ms;
    const bool capital_pause = 2 * gap >= rule.gap_ms && starts_capitalized(cur.text);
    if (!long_pause && !capital_pause) continue;
    prev.text.push_back('.');
    utf8::capitalize_first(cur.text);
  }
  // The end of the recording closes the last sentence.
  if (!ends_with_punctuation(cues.back().text)) cues.back().text.push_back('.');
  return out;
}

// Letters and digits only, lower-cased, for comparing words across a
// punctuation pass.
std::string word_key(std::string_view word) {
  std::string key;
  std::size_t pos = 0;
  while (pos < word.size()) {
    char32_t cp = utf8::decode(word, pos);
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') {
        key.push_back(static_cast<char>(c + 32));
      } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
        key.push_back(c);
      }
      continue;
    }
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) cp += 0x20;
    if (is_word_char(cp)) utf8::append(key, cp);
  }
  return key;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t' || text[i] == '\r')) ++i;
    const auto begin = i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\n' || text[i] == '\t' || text[i] == '\r')) ++i;
    if (i > begin) words.push_back(text.substr(begin, i - begin));
  }
  return words;
}

void punctuate_batch(std::vector<TranscriptCue>& cues, std::size_t first, std::size_t last,
                     const Transcript& transcript, const ProviderPunctuation& strategy,
                     std::size_t batch_number) {
  std::string text;
  std::vector<std::size_t> owner;  // cue index per input word
  std::vector<std::string> keys;
  for (std::size_t c = first; c < last; ++c) {
    if (!text.empty()) text.push_back(' ');
    text += cues[c].text;
    for (auto w : split_words(cues[c].text)) {
      auto key = word_key(w);
      if (key.empty()) continue;
      owner.push_back(c);
      keys.push_back(std::move(key));
    }
  }

  ProviderRequest request;
  request.prompt = build_punctuation_prompt(text, *strategy.templates);
  request.max_output_tokens = static_cast<std::uint32_t>(std::max<std::size_t>(256, text.size()));
  request.kind = RequestKind::kPunctuate;
  request.context = text;
  request.request_tag = (transcript.video_id.empty() ? std::string("transcript") : transcript.video_id) +
                        "/" + strategy.request_tag_prefix + "/" + std::to_string(batch_number);

  ProviderResponse response;
  try {
    response = retrying(*strategy.provider, request, strategy.retry, strategy.sleep).response;
  } catch (const ProviderError& e) {
    throw SegmenterError(Kind::kProviderFailure, std::string("punctuation provider failed: ") + e.what());
  }
  if (strategy.on_usage) strategy.on_usage(request.request_tag, response.usage);

  std::vector<std::string> rebuilt(last - first);
  std::size_t word = 0;
  for (auto token : split_words(response.text)) {
    const auto key = word_key(token);
    if (key.empty()) {
      // Free-standing punctuation such as a dash attaches to the previous word.
      if (word == 0) continue;
      auto& target = rebuilt[owner[word - 1] - first];
      target += ' ';
      target += token;
      continue;
    }
    if (word >= keys.size() || key != keys[word]) {
      throw SegmenterError(Kind::kProviderFailure,
                           "punctuation reply altered the wording near '" + std::string(token) + "'");
    }
    auto& target = rebuilt[owner[word] - first];
    if (!target.empty()) target += ' ';
    target += token;
    ++word;
  }
  if (word != keys.size()) {
    throw SegmenterError(Kind::kProviderFailure, "punctuation reply dropped words");
  }
  for (std::size_t c = first; c < last; ++c) {
    // A cue holding only symbols has no words to carry; keep it as it was.
    if (!rebuilt[c - first].empty()) cues[c].text = std::move(rebuilt[c - first]);
  }
}

Transcript punctuate_by_provider(const Transcript& transcript, const ProviderPunctuation& strategy) {
  if (strategy.provider == nullptr || strategy.templates == nullptr) {
    throw SegmenterError(Kind::kInvalidArgument, "provider punctuation needs a provider and templates");
  }
  Transcript out = transcript;
  std::size_t first = 0;
  std::size_t batch = 0;
  while (first < out.cues.size()) {
    std::size_t last = first;
    std::size_t chars = 0;
    while (last < out.cues.size() && (last == first || chars + out.cues[last].text.size() + 1 <= strategy.max_batch_chars)) {
      chars += out.cues[last].text.size() + 1;
      ++last;
    }
    punctuate_batch(out.cues, first, last, transcript, strategy, batch++);
    first = last;
  }
  return normalize(std::move(out));
}

}  // namespace

std::vector<std::string> default_abbreviations() {
  return {"Dr.", "Mr.", "Mrs.", "Prof.", "z.B.", "bzw.", "etc.", "vs.", "Nr."};
}

Transcript restore_punctuation(const Transcript& transcript, const PunctuationStrategy& strategy) {
  if (const auto* rule = std::get_if<RulePunctuation>(&strategy)) {
    return punctuate_by_rule(transcript, *rule);
  }
  return punctuate_by_provider(transcript, std::get<ProviderPunctuation>(strategy));
}

Segmentation segment(const Transcript& transcript, const SegmenterOptions& options) {
  Segmentation result;
  std::vector<CueSpan> spans;
  for (const auto& cue : transcript.cues) {
    if (!result.text.empty()) result.text.push_back(' ');
    const auto begin = result.text.size();
    result.text += cue.text;
    spans.push_back({begin, result.text.size(), utf8::length(cue.text)});
  }

  const std::string_view text = result.text;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < text.size()) {
      const auto n = closer_length(text, end);
      if (n == 0) break;
      end += n;
    }
    const bool at_break = end == text.size() || text[end] == ' ';
    if (!at_break || (text[i] == '.' && is_abbreviation(text, i, options.abbreviations))) {
      i = end;
      continue;
    }
    Sentence s;
    s.index = result.sentences.size();
    s.text = std::string(text.substr(begin, end - begin));
    s.char_begin = begin;
    s.char_end = end;
    const auto first_cue = owning_cue(spans, begin);
    const auto last_cue = owning_cue(spans, end - 1);
    s.start_ms = interpolate(transcript.cues[first_cue], spans[first_cue], text, begin);
    s.end_ms = interpolate(transcript.cues[last_cue], spans[last_cue], text, end);
    result.sentences.push_back(std::move(s));
    begin = end + 1;
    i = begin;
  }
  result.fragment_begin = std::min(begin, text.size());
  return result;
}

ContextWindow context_window(const std::vector<Sentence>& sentences, std::string_view full_text,
                             Millis trigger_ms, int level, std::size_t max_context_chars) {
  if (level != 1 && level != 2) {
    throw SegmenterError(Kind::kInvalidArgument, "level must be 1 or 2");
  }
  // Sentence end times are non-decreasing, so the completed sentences form a prefix.
  const auto completed = std::partition_point(sentences.begin(), sentences.end(),
                                              [&](const Sentence& s) { return s.end_ms <= trigger_ms; });
  const auto count = static_cast<std::size_t>(std::distance(sentences.begin(), completed));
  if (count == 0 || trigger_ms < 0) {
    throw SegmenterError(Kind::kNoTargetAvailable,
                         "no sentence has ended by " + std::to_string(trigger_ms) + " ms");
  }

  ContextWindow window;
  window.trigger_ms = trigger_ms;
  window.level = level;
  const std::size_t last = count - 1;
  const std::size_t first_target = (level == 2 && last > 0) ? last - 1 : last;
  for (std::size_t t = first_target; t <= last; ++t) window.target_sentence_indices.push_back(t);

  // Sentences tile the text from offset 0, so dropping whole sentences from
  // the front keeps the window on a sentence boundary.
  const std::size_t end = sentences[last].char_end;
  std::size_t length = utf8::length(full_text.substr(0, end));
  std::size_t first = 0;
  while (first < first_target && length > max_context_chars) {
    const auto next = sentences[first + 1].char_begin;
    length -= utf8::length(full_text.substr(sentences[first].char_begin, next - sentences[first].char_begin));
    ++first;
  }
  const std::size_t begin = sentences[first].char_begin;
  window.context_text = std::string(full_text.substr(begin, end - begin));
  return window;
}

}  // namespace huh
