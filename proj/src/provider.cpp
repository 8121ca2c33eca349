#include "huh/provider.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "huh/utf8.hpp"
#include "sha256.hpp"

namespace huh {

namespace {

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

// Text after the last ". ", "! " or "? " that precedes the final character.
std::string_view last_sentence(std::string_view context) {
  context = trim_spaces(context);
  if (context.size() < 2) return context;
  for (std::size_t i = context.size() - 1; i-- > 0;) {
    const char c = context[i];
    if ((c == '.' || c == '!' || c == '?') && context[i + 1] == ' ') {
      return trim_spaces(context.substr(i + 1));
    }
  }
  return context;
}

std::uint64_t ceil_quarter(std::size_t chars) { return (chars + 3) / 4; }

std::string mock_punctuate(std::string_view context) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < context.size()) {
    while (i < context.size() && context[i] == ' ') ++i;
    const auto begin = i;
    while (i < context.size() && context[i] != ' ') ++i;
    if (i > begin) words.emplace_back(context.substr(begin, i - begin));
  }
  std::string out;
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto word = words[w];
    if (w % MockProvider::kPunctuationGroupWords == 0) utf8::capitalize_first(word);
    const bool group_end = (w + 1) % MockProvider::kPunctuationGroupWords == 0 || w + 1 == words.size();
    if (group_end && !(word.ends_with('.') || word.ends_with('!') || word.ends_with('?'))) {
      word.push_back('.');
    }
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

}  // namespace

const char* to_string(ProviderError::Kind kind) {
  switch (kind) {
    case ProviderError::Kind::kInvalidRequest: return "InvalidRequest";
    case ProviderError::Kind::kTimeout: return "Timeout";
    case ProviderError::Kind::kRateLimited: return "RateLimited";
    case ProviderError::Kind::kBackendError: return "BackendError";
    case ProviderError::Kind::kUsageMissing: return "UsageMissing";
    case ProviderError::Kind::kExhausted: return "Exhausted";
  }
  return "Unknown";
}

void validate(const ProviderRequest& request) {
  if (request.prompt.empty()) {
    throw ProviderError(ProviderError::Kind::kInvalidRequest, "prompt must not be empty");
  }
  if (request.max_output_tokens == 0) {
    throw ProviderError(ProviderError::Kind::kInvalidRequest, "max_output_tokens must be positive");
  }
}

ProviderResponse MockProvider::complete(const ProviderRequest& request) {
  validate(request);
  ProviderResponse response;
  response.usage.prompt_tokens = ceil_quarter(utf8::length(request.prompt));
  if (request.kind == RequestKind::kPunctuate) {
    response.text = mock_punctuate(request.context);
    response.usage.completion_tokens = ceil_quarter(utf8::length(response.text));
    return response;
  }
  const char level = request.kind == RequestKind::kExplainLevel2 ? '2' : '1';
  response.text = std::string("MOCK-EXPLAIN[") + level + "|sha=" + sha256_hex(request.prompt).substr(0, 8) +
                  "]: " + std::string(last_sentence(request.context));
  response.usage.completion_tokens = kExplanationCompletionTokens;
  return response;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::uint32_t attempt) {
  const double factor = std::ldexp(1.0, static_cast<int>(std::min<std::uint32_t>(attempt, 40)) - 1);
  const double ms = std::min(static_cast<double>(policy.max_delay.count()),
                             static_cast<double>(policy.base_delay.count()) * factor);
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

RetryOutcome retrying(ExplanationProvider& provider, const ProviderRequest& request,
                      const RetryPolicy& policy, const Sleeper& sleep) {
  validate(request);
  std::mt19937_64 rng(policy.seed);
  std::uniform_real_distribution<double> spread(1.0 - policy.jitter, 1.0 + policy.jitter);
  const std::uint32_t max_attempts = std::max<std::uint32_t>(policy.max_attempts, 1);

  for (std::uint32_t attempt = 1;; ++attempt) {
    try {
      return {provider.complete(request), attempt};
    } catch (const ProviderError& e) {
      if (!e.retryable()) throw;
      if (attempt >= max_attempts) {
        throw ProviderError(ProviderError::Kind::kExhausted,
                            "gave up after " + std::to_string(attempt) + " attempts; last error " +
                                to_string(e.kind()) + ": " + e.what(),
                            e.status());
      }
      auto delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff_delay(policy, attempt).count()) * spread(rng)));
      if (e.retry_after()) delay = std::max(delay, *e.retry_after());
      if (sleep) {
        sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
}

}  // namespace huh
