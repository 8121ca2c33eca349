#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "huh/bundle.hpp"
#include "huh/provider.hpp"
#include "huh/transcript.hpp"

namespace huh::test {

std::filesystem::path fixture_path(const std::string& name);
std::filesystem::path golden_path(const std::string& name);
std::string read_fixture(const std::string& name);

// Compares `actual` with the stored golden file. With HUH_UPDATE_GOLDEN=1 the
// golden file is rewritten instead. Returns an empty string on match.
std::string check_golden(const std::string& name, const std::string& actual);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random cue lists whose text survives every serialization: already
// normalized, no markup, mixed ASCII and Latin-1 words.
Transcript random_transcript(std::mt19937_64& rng, const std::string& video_id = "gen");

// Unpunctuated lecture-style transcript built from `sentences` sentences of
// 6..14 words, one cue per 5 words, 1.5 s pauses between sentences.
Transcript lecture_transcript(std::size_t sentences, Millis lead_in_ms = 2000, std::uint64_t seed = 7);

// Punctuated transcript: one cue per sentence, `sentence_ms` long, separated
// by `gap_ms`.
Transcript sentence_transcript(std::size_t sentences, Millis sentence_ms, Millis gap_ms,
                               const std::string& video_id = "sentences");

// Returns queued results in order, then repeats the last one.
class ScriptedProvider final : public ExplanationProvider {
 public:
  using Step = std::function<ProviderResponse(const ProviderRequest&)>;
  void push(Step step) { steps_.push_back(std::move(step)); }
  void push_error(ProviderError::Kind kind, int status = 0);
  void push_text(std::string text);
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string model_name() const override { return "scripted"; }
  int calls() const { return calls_; }

 private:
  std::deque<Step> steps_;
  Step last_;
  int calls_ = 0;
};

// Forwards to an inner provider and counts calls. Once `forbid()` is called,
// any further call fails the test.
class CountingProvider final : public ExplanationProvider {
 public:
  explicit CountingProvider(ExplanationProvider& inner) : inner_(inner) {}
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string model_name() const override { return inner_.model_name(); }
  std::size_t calls() const { return calls_.load(); }
  std::size_t calls_after_forbid() const { return late_calls_.load(); }
  std::vector<std::string> tags() const;
  void forbid() { forbidden_ = true; }

 private:
  ExplanationProvider& inner_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> late_calls_{0};
  std::atomic<bool> forbidden_{false};
  mutable std::mutex mutex_;
  std::vector<std::string> tags_;
};

class FailingProvider final : public ExplanationProvider {
 public:
  explicit FailingProvider(ProviderError::Kind kind = ProviderError::Kind::kBackendError) : kind_(kind) {}
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string model_name() const override { return "failing"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  ProviderError::Kind kind_;
  std::atomic<std::size_t> calls_{0};
};

// Linear scan over every slot of the bundle.
LookupResult brute_force_lookup(const ExplanationBundle& bundle, Millis t_ms, int level);

// Blocking HTTP GET against 127.0.0.1; returns {status, body}. Status -1 on
// transport failure.
struct HttpResult {
  int status = -1;
  std::string body;
  std::string cache_control;
  std::string allow_origin;
};
HttpResult http_get(int port, const std::string& path);

}  // namespace huh::test
