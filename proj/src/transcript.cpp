#include "huh/transcript.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>

#include <nlohmann/json.hpp>

#include "huh/utf8.hpp"

namespace huh {

namespace {

using Kind = TranscriptError::Kind;

constexpr std::string_view kBom = "\xEF\xBB\xBF";

struct RawCue {
  Millis start_ms = 0;
  Millis end_ms = 0;
  std::string text;
};

std::string_view strip_bom(std::string_view s) {
  if (s.starts_with(kBom)) s.remove_prefix(kBom.size());
  return s;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n' || s[i] == '\r') {
      lines.push_back(s.substr(begin, i - begin));
      if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      begin = i + 1;
    }
  }
  if (begin < s.size()) lines.push_back(s.substr(begin));
  return lines;
}

// Groups lines into blank-line separated blocks.
std::vector<std::vector<std::string_view>> split_blocks(
    const std::vector<std::string_view>& lines) {
  std::vector<std::vector<std::string_view>> blocks;
  std::vector<std::string_view> current;
  for (auto line : lines) {
    if (trim(line).empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(line);
    }
  }
  if (!current.empty()) blocks.push_back(std::move(current));
  return blocks;
}

std::optional<Millis> parse_digits(std::string_view s, std::size_t min_len,
                                   std::size_t max_len) {
  if (s.size() < min_len || s.size() > max_len) return std::nullopt;
  Millis value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

// Accepts [H+:]MM:SS<sep>mmm where <sep> is one of `separators`.
// Hours are mandatory when `hours_required` is set.
std::optional<Millis> parse_timestamp(std::string_view s, std::string_view separators,
                                      bool hours_required) {
  const auto sep = s.find_last_of(separators);
  if (sep == std::string_view::npos) return std::nullopt;
  const auto millis = parse_digits(s.substr(sep + 1), 3, 3);
  if (!millis) return std::nullopt;

  std::vector<std::string_view> fields;
  std::string_view clock = s.substr(0, sep);
  while (true) {
    const auto colon = clock.find(':');
    fields.push_back(clock.substr(0, colon));
    if (colon == std::string_view::npos) break;
    clock.remove_prefix(colon + 1);
  }
  if (fields.size() != 3 && (hours_required || fields.size() != 2)) return std::nullopt;

  Millis hours = 0;
  if (fields.size() == 3) {
    const auto h = parse_digits(fields[0], 1, 6);
    if (!h) return std::nullopt;
    hours = *h;
  }
  const auto minutes = parse_digits(fields[fields.size() - 2], 2, 2);
  const auto seconds = parse_digits(fields.back(), 2, 2);
  if (!minutes || !seconds || *minutes > 59 || *seconds > 59) return std::nullopt;
  return ((hours * 60 + *minutes) * 60 + *seconds) * 1000 + *millis;
}

struct Timing {
  Millis start_ms;
  Millis end_ms;
};

// "start --> end [settings...]"
Timing parse_timing_line(std::string_view line, std::string_view separators,
                         bool hours_required) {
  const auto arrow = line.find("-->");
  const auto fail = [&] {
    return TranscriptError(Kind::kMalformedTimestamp,
                           "malformed cue timing: '" + std::string(line) + "'");
  };
  if (arrow == std::string_view::npos) throw fail();
  const auto start_text = trim(line.substr(0, arrow));
  auto rest = trim(line.substr(arrow + 3));
  const auto end_text = rest.substr(0, rest.find_first_of(" \t"));
  const auto start = parse_timestamp(start_text, separators, hours_required);
  const auto end = parse_timestamp(end_text, separators, hours_required);
  if (!start || !end) throw fail();
  return {*start, *end};
}

bool is_all_digits(std::string_view s) {
  s = trim(s);
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string join_lines(const std::vector<std::string_view>& lines, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out.append(lines[i]);
  }
  return out;
}

bool looks_like_tag_start(std::string_view s, std::size_t lt) {
  if (lt + 1 >= s.size()) return false;
  const char c = s[lt + 1];
  return c == '/' || c == '.' || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

std::string strip_markup(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<' && looks_like_tag_start(s, i)) {
      const auto close = s.find('>', i);
      const auto reopen = s.find('<', i + 1);
      if (close != std::string_view::npos && (reopen == std::string_view::npos || close < reopen)) {
        i = close + 1;
        continue;
      }
    }
    // ASS-style override blocks such as {\an8}.
    if (s[i] == '{' && i + 1 < s.size() && s[i + 1] == '\\') {
      const auto close = s.find('}', i);
      if (close != std::string_view::npos) {
        i = close + 1;
        continue;
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

std::string decode_entities(std::string_view s) {
  static constexpr std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&amp;", "&"},   {"&lt;", "<"},        {"&gt;", ">"},
      {"&quot;", "\""}, {"&apos;", "'"},      {"&nbsp;", "\xC2\xA0"},
      {"&lrm;", ""},    {"&rlm;", ""},
  };
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    bool matched = false;
    if (s[i] == '&') {
      for (const auto& [entity, replacement] : kEntities) {
        if (s.substr(i).starts_with(entity)) {
          out.append(replacement);
          i += entity.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out.push_back(s[i++]);
  }
  return out;
}

bool is_whitespace(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
         cp == U'\f' || cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) ||
         cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

bool is_invisible(char32_t cp) {
  const bool control = cp < 0x20 || (cp >= 0x7F && cp <= 0x9F);
  const bool zero_width = (cp >= 0x200B && cp <= 0x200D) || cp == 0x2060 || cp == 0xFEFF ||
                          cp == 0x00AD || cp == 0x200E || cp == 0x200F;
  return control || zero_width;
}

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const char32_t cp = utf8::decode(s, pos);
    if (is_whitespace(cp)) {
      pending_space = true;
      continue;
    }
    if (is_invisible(cp)) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    utf8::append(out, cp);
  }
  return out;
}

void require_utf8(std::string_view bytes) {
  if (!utf8::is_valid(bytes)) {
    throw TranscriptError(Kind::kInvalidEncoding, "input is not valid UTF-8");
  }
}

// Shared tail of every parser: ordering checks, text normalization, overlap
// repair and duration.
Transcript finish(std::vector<RawCue> raw, const ParseOptions& options, std::string video_id,
                  std::string language, std::optional<Millis> duration_override) {
  Millis previous_start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& cue = raw[i];
    if (cue.end_ms <= cue.start_ms) {
      throw TranscriptError(Kind::kNonMonotonicCues,
                            "cue " + std::to_string(i + 1) + " ends before it starts");
    }
    if (i > 0 && cue.start_ms < previous_start) {
      throw TranscriptError(Kind::kNonMonotonicCues,
                            "cue " + std::to_string(i + 1) + " starts before cue " +
                                std::to_string(i));
    }
    previous_start = cue.start_ms;
  }

  Transcript transcript;
  transcript.video_id = std::move(video_id);
  transcript.language = std::move(language);
  for (auto& cue : raw) {
    transcript.cues.push_back({0, cue.start_ms, cue.end_ms, std::move(cue.text)});
  }
  transcript = normalize(std::move(transcript));
  if (transcript.cues.empty()) {
    throw TranscriptError(Kind::kEmptyFile, "no cues with text");
  }

  auto& cues = transcript.cues;
  for (std::size_t i = 1; i < cues.size(); ++i) {
    auto& prev = cues[i - 1];
    auto& cur = cues[i];
    const Millis overlap = prev.end_ms - cur.start_ms;
    if (overlap <= options.overlap_tolerance_ms || overlap <= 0) continue;
    Millis mid = cur.start_ms + overlap / 2;
    if (i + 1 < cues.size()) mid = std::min(mid, cues[i + 1].start_ms);
    prev.end_ms = mid;
    cur.start_ms = mid;
    if (prev.start_ms >= prev.end_ms || cur.start_ms >= cur.end_ms) {
      throw TranscriptError(Kind::kNonMonotonicCues,
                            "cue " + std::to_string(i + 1) + " overlaps cue " +
                                std::to_string(i) + " beyond repair");
    }
  }

  Millis last_end = 0;
  for (const auto& cue : cues) last_end = std::max(last_end, cue.end_ms);
  transcript.duration_ms = duration_override.value_or(last_end);
  if (transcript.duration_ms < last_end) {
    throw TranscriptError(Kind::kSchemaViolation, "duration_ms is shorter than the last cue");
  }
  return transcript;
}

}  // namespace

std::string clean_cue_text(std::string_view raw) { return normalize_text(strip_markup(raw)); }

Transcript normalize(Transcript transcript) {
  std::vector<TranscriptCue> kept;
  kept.reserve(transcript.cues.size());
  for (auto& cue : transcript.cues) {
    cue.text = normalize_text(cue.text);
    if (cue.text.empty()) continue;
    cue.index = kept.size();
    kept.push_back(std::move(cue));
  }
  transcript.cues = std::move(kept);
  return transcript;
}

Transcript parse_srt(std::string_view bytes, const ParseOptions& options) {
  require_utf8(bytes);
  const auto body = strip_bom(bytes);
  if (trim(body).empty()) throw TranscriptError(Kind::kEmptyFile, "empty SubRip file");

  std::vector<RawCue> raw;
  for (const auto& block : split_blocks(split_lines(body))) {
    std::size_t timing = block.size();
    if (block[0].find("-->") != std::string_view::npos) {
      timing = 0;
    } else if (block.size() > 1 && is_all_digits(block[0]) &&
               block[1].find("-->") != std::string_view::npos) {
      timing = 1;
    }
    if (timing == block.size()) {
      // Text continuing after a blank line inside a cue body.
      if (!raw.empty() && !is_all_digits(block[0])) {
        raw.back().text += ' ' + join_lines(block, 0);
        continue;
      }
      throw TranscriptError(Kind::kMalformedTimestamp,
                            "expected a timing line near '" + std::string(block[0]) + "'");
    }
    const auto t = parse_timing_line(block[timing], ",.", true);
    raw.push_back({t.start_ms, t.end_ms, join_lines(block, timing + 1)});
  }
  for (auto& cue : raw) cue.text = strip_markup(cue.text);
  return finish(std::move(raw), options, options.video_id, options.language, std::nullopt);
}

Transcript parse_vtt(std::string_view bytes, const ParseOptions& options) {
  require_utf8(bytes);
  const auto body = strip_bom(bytes);
  if (trim(body).empty()) throw TranscriptError(Kind::kEmptyFile, "empty WebVTT file");
  if (!body.starts_with("WEBVTT") ||
      (body.size() > 6 && body[6] != ' ' && body[6] != '\t' && body[6] != '\n' &&
       body[6] != '\r')) {
    throw TranscriptError(Kind::kMissingHeader, "file does not start with WEBVTT");
  }

  auto blocks = split_blocks(split_lines(body));
  std::vector<RawCue> raw;
  // blocks[0] is the header block.
  for (std::size_t b = 1; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    const auto first = trim(block[0]);
    if (first == "NOTE" || first.starts_with("NOTE ") || first.starts_with("NOTE\t") ||
        first == "STYLE" || first == "REGION") {
      continue;
    }
    std::size_t timing = block.size();
    if (block[0].find("-->") != std::string_view::npos) {
      timing = 0;
    } else if (block.size() > 1 && block[1].find("-->") != std::string_view::npos) {
      timing = 1;
    }
    if (timing == block.size()) {
      throw TranscriptError(Kind::kMalformedTimestamp,
                            "expected a cue timing line near '" + std::string(block[0]) + "'");
    }
    const auto t = parse_timing_line(block[timing], ".", false);
    raw.push_back({t.start_ms, t.end_ms, decode_entities(strip_markup(join_lines(block, timing + 1)))});
  }
  if (raw.empty()) throw TranscriptError(Kind::kEmptyFile, "WebVTT file has no cues");
  return finish(std::move(raw), options, options.video_id, options.language, std::nullopt);
}

Transcript parse_cue_json(std::string_view bytes, const ParseOptions& options) {
  using nlohmann::json;
  const auto violation = [](const std::string& what) {
    return TranscriptError(Kind::kSchemaViolation, "CueFile: " + what);
  };
  require_utf8(bytes);
  if (trim(bytes).empty()) throw TranscriptError(Kind::kEmptyFile, "empty CueFile");

  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw violation(e.what());
  }
  if (!doc.is_object()) throw violation("top level must be an object");

  const auto string_field = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw violation(std::string("missing string field '") + key + "'");
    }
    return doc[key].get<std::string>();
  };
  const auto millis = [&](const json& node, const std::string& where) {
    if (!node.is_number_integer()) throw violation(where + " must be an integer");
    if (node.is_number_unsigned()) return static_cast<Millis>(node.get<std::uint64_t>());
    const auto v = node.get<std::int64_t>();
    if (v < 0) throw violation(where + " must not be negative");
    return static_cast<Millis>(v);
  };

  auto video_id = string_field("video_id");
  auto language = string_field("language");
  std::optional<Millis> duration;
  if (doc.contains("duration_ms")) duration = millis(doc["duration_ms"], "duration_ms");
  if (!doc.contains("cues") || !doc["cues"].is_array()) throw violation("missing 'cues' array");

  std::vector<RawCue> raw;
  for (std::size_t i = 0; i < doc["cues"].size(); ++i) {
    const auto& node = doc["cues"][i];
    const auto where = "cues[" + std::to_string(i) + "]";
    if (!node.is_object()) throw violation(where + " must be an object");
    for (const char* key : {"start_ms", "end_ms", "text"}) {
      if (!node.contains(key)) throw violation(where + " lacks '" + key + "'");
    }
    const auto start = millis(node["start_ms"], where + ".start_ms");
    const auto end = millis(node["end_ms"], where + ".end_ms");
    if (end <= start) throw violation(where + ".end_ms must exceed start_ms");
    if (!node["text"].is_string()) throw violation(where + ".text must be a string");
    raw.push_back({start, end, node["text"].get<std::string>()});
  }
  if (raw.empty()) throw TranscriptError(Kind::kEmptyFile, "CueFile has no cues");
  return finish(std::move(raw), options, std::move(video_id), std::move(language), duration);
}

TranscriptFormat sniff_format(std::string_view bytes) {
  const auto body = trim(strip_bom(bytes));
  if (body.starts_with("WEBVTT")) return TranscriptFormat::kVtt;
  if (body.starts_with("{")) return TranscriptFormat::kCueJson;
  return TranscriptFormat::kSrt;
}

Transcript parse_transcript(std::string_view bytes, const ParseOptions& options) {
  switch (sniff_format(bytes)) {
    case TranscriptFormat::kVtt:
      return parse_vtt(bytes, options);
    case TranscriptFormat::kCueJson:
      return parse_cue_json(bytes, options);
    case TranscriptFormat::kSrt:
      break;
  }
  return parse_srt(bytes, options);
}

std::string to_cue_json(const Transcript& transcript) {
  nlohmann::ordered_json doc;
  doc["video_id"] = transcript.video_id;
  doc["language"] = transcript.language;
  doc["duration_ms"] = transcript.duration_ms;
  doc["cues"] = nlohmann::ordered_json::array();
  for (const auto& cue : transcript.cues) {
    doc["cues"].push_back({{"start_ms", cue.start_ms}, {"end_ms", cue.end_ms}, {"text", cue.text}});
  }
  return doc.dump(2) + "\n";
}

namespace {

std::string format_clock(Millis ms, char separator) {
  const Millis hours = ms / 3'600'000;
  const Millis minutes = ms / 60'000 % 60;
  const Millis seconds = ms / 1000 % 60;
  const Millis millis = ms % 1000;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld%c%03lld", static_cast<long long>(hours),
                static_cast<long long>(minutes), static_cast<long long>(seconds), separator,
                static_cast<long long>(millis));
  return buf;
}

std::string escape_vtt(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string format_srt_time(Millis ms) { return format_clock(ms, ','); }
std::string format_vtt_time(Millis ms) { return format_clock(ms, '.'); }

std::string to_srt(const Transcript& transcript) {
  std::string out;
  for (const auto& cue : transcript.cues) {
    out += std::to_string(cue.index + 1) + "\n";
    out += format_srt_time(cue.start_ms) + " --> " + format_srt_time(cue.end_ms) + "\n";
    out += cue.text + "\n\n";
  }
  return out;
}

std::string to_vtt(const Transcript& transcript) {
  std::string out = "WEBVTT\n\n";
  for (const auto& cue : transcript.cues) {
    out += format_vtt_time(cue.start_ms) + " --> " + format_vtt_time(cue.end_ms) + "\n";
    out += escape_vtt(cue.text) + "\n\n";
  }
  return out;
}

}  // namespace huh
