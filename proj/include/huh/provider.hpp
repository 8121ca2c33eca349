#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "huh/error.hpp"

namespace huh {

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  std::uint64_t total() const { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    return *this;
  }
  bool operator==(const TokenUsage&) const = default;
};

inline TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }

// What the prompt asks for. Remote backends only ever see the prompt; the
// mock uses this to pick its deterministic transform.
enum class RequestKind { kExplainLevel1, kExplainLevel2, kPunctuate };

struct ProviderRequest {
  std::string prompt;
  std::uint32_t max_output_tokens = 512;
  double temperature = 0.0;
  // video_id/slot/level, for logs and the run ledger.
  std::string request_tag;
  RequestKind kind = RequestKind::kExplainLevel1;
  // The text substituted into the template's {context} placeholder.
  std::string context;
};

struct ProviderResponse {
  std::string text;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

class ProviderError : public Error {
 public:
  enum class Kind { kInvalidRequest, kTimeout, kRateLimited, kBackendError, kUsageMissing, kExhausted };

  ProviderError(Kind kind, const std::string& what, int status = 0,
                std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : Error(what), kind_(kind), status_(status), retry_after_(retry_after) {}

  Kind kind() const { return kind_; }
  // HTTP status for kBackendError and kRateLimited, 0 otherwise.
  int status() const { return status_; }
  std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }
  bool retryable() const { return kind_ == Kind::kTimeout || kind_ == Kind::kRateLimited; }

 private:
  Kind kind_;
  int status_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

const char* to_string(ProviderError::Kind kind);

// Completion backend contract. Implementations must accept concurrent calls.
class ExplanationProvider {
 public:
  virtual ~ExplanationProvider() = default;
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

// Throws ProviderError::kInvalidRequest on an empty prompt or a zero token cap.
void validate(const ProviderRequest& request);

// Deterministic offline backend.
//
// Explanations come back as
//   MOCK-EXPLAIN[<level>|sha=<first 8 hex of sha256(prompt)>]: <last sentence of context>
// with usage {ceil(chars(prompt) / 4), 48}. Punctuation requests split the
// context into groups of ten words, close each group with a full stop and
// capitalize its first word; completion tokens are ceil(chars(output) / 4).
class MockProvider final : public ExplanationProvider {
 public:
  static constexpr std::uint64_t kExplanationCompletionTokens = 48;
  static constexpr std::size_t kPunctuationGroupWords = 10;

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string model_name() const override { return "mock"; }
};

struct RemoteProviderConfig {
  // Base URL up to and excluding "/chat/completions".
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  std::string api_key;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_in_flight = 4;

  // Reads HUH_API_KEY, HUH_API_BASE_URL and HUH_MODEL over the defaults.
  static RemoteProviderConfig from_env();
};

// Chat-completions client. One POST per call, no retries.
class RemoteProvider final : public ExplanationProvider {
 public:
  explicit RemoteProvider(RemoteProviderConfig config);
  ~RemoteProvider() override;

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string model_name() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
  std::uint32_t max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30'000};
  // Each delay is scaled by a uniform factor in [1 - jitter, 1 + jitter].
  double jitter = 0.2;
  std::uint64_t seed = 0x5eed;
};

struct RetryOutcome {
  ProviderResponse response;
  std::uint32_t attempts = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Calls provider.complete, retrying Timeout and RateLimited with exponential
// backoff. Other errors propagate unchanged on first occurrence; running out
// of attempts throws kExhausted carrying the last error's message.
RetryOutcome retrying(ExplanationProvider& provider, const ProviderRequest& request,
                      const RetryPolicy& policy = {}, const Sleeper& sleep = {});

// Delay before attempt `attempt + 1` (attempt counts from 1), jitter excluded.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::uint32_t attempt);

}  // namespace huh
