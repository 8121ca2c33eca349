#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <httplib.h>

namespace huh::test {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "model",  "weights", "the",      "a",        "layer",   "token",  "we",     "train",
      "loss",   "gradient", "batch",   "data",     "is",      "small",  "next",   "character",
      "attention", "head",  "über",    "Größe",    "naïve",   "café",   "Übung",  "größer",
      "value",  "query",   "key",      "softmax",  "of",      "and",    "then",   "step",
      "embedding", "vector", "table",  "count",    "sample",  "context", "window", "scale",
  };
  return words;
}

const std::vector<std::string>& lecture_vocabulary() {
  static const std::vector<std::string> words = {
      "we",   "now",    "take",  "the",    "model",   "and",    "look",    "at",     "how",
      "it",   "learns", "from",  "data",   "each",    "step",   "moves",   "weights", "a",
      "bit",  "toward", "lower", "loss",   "so",      "after",  "many",    "steps",  "output",
      "gets", "better", "this",  "is",     "what",    "training", "means", "for",    "us",
  };
  return words;
}

std::string random_sentence_text(std::mt19937_64& rng, std::size_t words) {
  const auto& vocab = vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> mark(0, 9);
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (!text.empty()) text += ' ';
    text += vocab[pick(rng)];
    const int m = mark(rng);
    if (m == 0) text += ',';
    if (m == 1 && i + 1 == words) text += '.';
    if (m == 2 && i + 1 == words) text += '?';
  }
  return text;
}

}  // namespace

fs::path fixture_path(const std::string& name) { return fs::path(HUH_TEST_DATA_DIR) / "fixtures" / name; }

fs::path golden_path(const std::string& name) { return fs::path(HUH_TEST_DATA_DIR) / "golden" / name; }

std::string read_fixture(const std::string& name) { return slurp(fixture_path(name)); }

std::string check_golden(const std::string& name, const std::string& actual) {
  const auto path = golden_path(name);
  const char* update = std::getenv("HUH_UPDATE_GOLDEN");
  if (update != nullptr && std::string(update) == "1") {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << actual;
    return {};
  }
  if (!fs::exists(path)) return "missing golden file " + path.string() + " (run with HUH_UPDATE_GOLDEN=1)";
  const auto expected = slurp(path);
  if (expected == actual) return {};
  std::size_t at = 0;
  while (at < expected.size() && at < actual.size() && expected[at] == actual[at]) ++at;
  return "golden mismatch in " + name + " at byte " + std::to_string(at) + " (expected " +
         std::to_string(expected.size()) + " bytes, got " + std::to_string(actual.size()) + ")";
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("huh-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Transcript random_transcript(std::mt19937_64& rng, const std::string& video_id) {
  std::uniform_int_distribution<int> cue_count(1, 25);
  std::uniform_int_distribution<int> word_count(1, 12);
  std::uniform_int_distribution<Millis> gap(0, 2000);
  std::uniform_int_distribution<Millis> length(1, 5000);
  std::uniform_int_distribution<int> far(0, 4);
  std::uniform_int_distribution<Millis> hours(0, 3);

  Transcript t;
  t.video_id = video_id;
  t.language = far(rng) == 0 ? "de" : "en";
  Millis clock = far(rng) == 0 ? hours(rng) * 3'600'000 : 0;
  const int n = cue_count(rng);
  for (int i = 0; i < n; ++i) {
    TranscriptCue cue;
    cue.index = static_cast<std::size_t>(i);
    cue.start_ms = clock + gap(rng);
    cue.end_ms = cue.start_ms + length(rng);
    cue.text = random_sentence_text(rng, static_cast<std::size_t>(word_count(rng)));
    clock = cue.end_ms;
    t.cues.push_back(std::move(cue));
  }
  t.duration_ms = t.cues.back().end_ms;
  return t;
}

Transcript lecture_transcript(std::size_t sentences, Millis lead_in_ms, std::uint64_t seed) {
  constexpr Millis kMsPerWord = 350;
  constexpr Millis kIntraGapMs = 150;
  constexpr Millis kSentenceGapMs = 1500;
  constexpr std::size_t kWordsPerCue = 5;
  const auto& vocab = lecture_vocabulary();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<std::size_t> length(6, 14);

  Transcript t;
  t.video_id = "lecture";
  t.language = "en";
  Millis clock = lead_in_ms;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t words = length(rng);
    for (std::size_t w = 0; w < words; w += kWordsPerCue) {
      const std::size_t take = std::min(kWordsPerCue, words - w);
      TranscriptCue cue;
      cue.index = t.cues.size();
      cue.start_ms = clock;
      cue.end_ms = clock + static_cast<Millis>(take) * kMsPerWord;
      for (std::size_t i = 0; i < take; ++i) {
        if (!cue.text.empty()) cue.text += ' ';
        cue.text += vocab[pick(rng)];
      }
      clock = cue.end_ms + (w + take == words ? kSentenceGapMs : kIntraGapMs);
      t.cues.push_back(std::move(cue));
    }
  }
  t.duration_ms = t.cues.back().end_ms;
  return t;
}

Transcript sentence_transcript(std::size_t sentences, Millis sentence_ms, Millis gap_ms, const std::string& video_id) {
  Transcript t;
  t.video_id = video_id;
  t.language = "en";
  Millis clock = 0;
  for (std::size_t s = 0; s < sentences; ++s) {
    TranscriptCue cue;
    cue.index = s;
    cue.start_ms = clock;
    cue.end_ms = clock + sentence_ms;
    cue.text = "Sentence " + std::to_string(s) + " explains part " + std::to_string(s * 7 % 11) + " of the idea.";
    clock = cue.end_ms + gap_ms;
    t.cues.push_back(std::move(cue));
  }
  t.duration_ms = t.cues.back().end_ms;
  return t;
}

void ScriptedProvider::push_error(ProviderError::Kind kind, int status) {
  push([kind, status](const ProviderRequest&) -> ProviderResponse {
    throw ProviderError(kind, std::string("scripted ") + to_string(kind), status);
  });
}

void ScriptedProvider::push_text(std::string text) {
  push([text](const ProviderRequest&) { return ProviderResponse{text, {10, 5}, {}}; });
}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request) {
  ++calls_;
  if (!steps_.empty()) {
    last_ = steps_.front();
    steps_.pop_front();
  }
  if (!last_) throw std::logic_error("ScriptedProvider has no steps");
  return last_(request);
}

ProviderResponse CountingProvider::complete(const ProviderRequest& request) {
  calls_.fetch_add(1);
  if (forbidden_) {
    late_calls_.fetch_add(1);
    ADD_FAILURE() << "provider called after generation: " << request.request_tag;
    throw ProviderError(ProviderError::Kind::kBackendError, "provider call after generation");
  }
  {
    std::lock_guard lock(mutex_);
    tags_.push_back(request.request_tag);
  }
  return inner_.complete(request);
}

std::vector<std::string> CountingProvider::tags() const {
  std::lock_guard lock(mutex_);
  return tags_;
}

ProviderResponse FailingProvider::complete(const ProviderRequest&) {
  calls_.fetch_add(1);
  throw ProviderError(kind_, "always fails", kind_ == ProviderError::Kind::kBackendError ? 500 : 0);
}

LookupResult brute_force_lookup(const ExplanationBundle& b, Millis t, int level) {
  LookupResult r;
  r.level = level;
  if (t < b.coverage_start_ms || t > b.coverage_end_ms) return r;
  const ExplanationSlot* best = nullptr;
  for (const auto& s : b.slots) {
    if (s.level == level && s.slot_start_ms <= t && (best == nullptr || s.slot_start_ms > best->slot_start_ms)) {
      best = &s;
    }
  }
  if (best == nullptr) return r;
  r.slot_start_ms = best->slot_start_ms;
  r.target_sentence_indices = best->target_sentence_indices;
  if (best->status == SlotStatus::kGenerated) {
    r.available = true;
    r.explanation_text = b.explanations.at(best->explanation_ref).text;
  }
  return r;
}

HttpResult http_get(int port, const std::string& path) {
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  client.set_read_timeout(5);
  HttpResult out;
  auto res = client.Get(path);
  if (!res) return out;
  out.status = res->status;
  out.body = res->body;
  out.cache_control = res->get_header_value("Cache-Control");
  out.allow_origin = res->get_header_value("Access-Control-Allow-Origin");
  return out;
}

}  // namespace huh::test
