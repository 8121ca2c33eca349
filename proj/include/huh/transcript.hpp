#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "huh/error.hpp"

namespace huh {

using Millis = std::int64_t;

struct TranscriptCue {
  std::size_t index = 0;
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::string text;

  bool operator==(const TranscriptCue&) const = default;
};

struct Transcript {
  std::string video_id;
  std::string language;
  Millis duration_ms = 0;
  std::vector<TranscriptCue> cues;

  bool operator==(const Transcript&) const = default;
};

class TranscriptError : public Error {
 public:
  enum class Kind {
    kMalformedTimestamp,
    kNonMonotonicCues,
    kEmptyFile,
    kMissingHeader,
    kSchemaViolation,
    kInvalidEncoding,
  };

  TranscriptError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ParseOptions {
  // Identity fields for formats that do not carry them (SRT, WebVTT).
  std::string video_id;
  std::string language = "en";
  // Neighbouring cues may overlap by up to this much. Larger overlaps are
  // repaired by clipping both cues at the midpoint of the overlap.
  Millis overlap_tolerance_ms = 0;
};

Transcript parse_srt(std::string_view bytes, const ParseOptions& options = {});
Transcript parse_vtt(std::string_view bytes, const ParseOptions& options = {});

// Reads the CueFile JSON interchange form. `options.video_id` and
// `options.language` are ignored; the document carries its own.
Transcript parse_cue_json(std::string_view bytes, const ParseOptions& options = {});

enum class TranscriptFormat { kSrt, kVtt, kCueJson };

// Picks a parser from the content: "WEBVTT" header, a leading '{', else SRT.
TranscriptFormat sniff_format(std::string_view bytes);
Transcript parse_transcript(std::string_view bytes, const ParseOptions& options = {});

// Collapses whitespace, removes zero-width and control characters, drops cues
// left empty and re-numbers the survivors.
Transcript normalize(Transcript transcript);

// Cleans a single cue payload: markup tags and entities are removed, line
// breaks become spaces, and the result is whitespace-normalized.
std::string clean_cue_text(std::string_view raw);

std::string to_cue_json(const Transcript& transcript);
std::string to_srt(const Transcript& transcript);
std::string to_vtt(const Transcript& transcript);

std::string format_srt_time(Millis ms);
std::string format_vtt_time(Millis ms);

}  // namespace huh
