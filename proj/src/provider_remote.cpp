#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "huh/provider.hpp"

namespace huh {

namespace {

using Kind = ProviderError::Kind;

std::string env_or(const char* name, std::string fallback) {
  const char* value = std::getenv(name);
  return (value != nullptr && *value != '\0') ? std::string(value) : std::move(fallback);
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

// Blocks callers while `limit` requests are outstanding.
class InFlightGate {
 public:
  explicit InFlightGate(std::size_t limit) : limit_(std::max<std::size_t>(limit, 1)) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t active_ = 0;
  std::size_t limit_;
};

struct GateHold {
  explicit GateHold(InFlightGate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateHold() { gate_.release(); }
  GateHold(const GateHold&) = delete;
  GateHold& operator=(const GateHold&) = delete;
  InFlightGate& gate_;
};

std::optional<std::chrono::milliseconds> parse_retry_after(const httplib::Result& res) {
  if (!res->has_header("Retry-After")) return std::nullopt;
  const auto value = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || seconds < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000));
}

}  // namespace

RemoteProviderConfig RemoteProviderConfig::from_env() {
  RemoteProviderConfig config;
  config.api_key = env_or("HUH_API_KEY", "");
  config.base_url = env_or("HUH_API_BASE_URL", config.base_url);
  config.model = env_or("HUH_MODEL", config.model);
  return config;
}

struct RemoteProvider::Impl {
  RemoteProviderConfig config;
  std::string origin;  // scheme://host[:port]
  std::string endpoint;
  InFlightGate gate;

  explicit Impl(RemoteProviderConfig c) : config(std::move(c)), gate(config.max_in_flight) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch match;
    if (!std::regex_match(config.base_url, match, kUrl)) {
      throw ProviderError(Kind::kInvalidRequest, "bad base URL: " + config.base_url);
    }
    origin = match[1];
    std::string prefix = match[2].matched ? match[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    endpoint = prefix + "/chat/completions";
  }
};

RemoteProvider::RemoteProvider(RemoteProviderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteProvider::~RemoteProvider() = default;

std::string RemoteProvider::model_name() const { return impl_->config.model; }

ProviderResponse RemoteProvider::complete(const ProviderRequest& request) {
  validate(request);
  const auto& config = impl_->config;

  nlohmann::json body = {
      {"model", config.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

  GateHold hold(impl_->gate);
  httplib::Client client(impl_->origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(impl_->endpoint, headers, body.dump(), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);

  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw ProviderError(Kind::kTimeout, "request timed out (" + httplib::to_string(err) + ")");
    }
    throw ProviderError(Kind::kBackendError, "transport failure: " + httplib::to_string(err));
  }
  if (res->status == 429) {
    throw ProviderError(Kind::kRateLimited, "rate limited: " + excerpt(res->body), 429,
                        parse_retry_after(res));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError(Kind::kBackendError,
                        "HTTP " + std::to_string(res->status) + ": " + excerpt(res->body), res->status);
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    throw ProviderError(Kind::kBackendError, "unparseable reply: " + excerpt(res->body), res->status);
  }

  if (!reply.is_object()) {
    throw ProviderError(Kind::kBackendError, "reply is not a JSON object: " + excerpt(res->body), res->status);
  }
  ProviderResponse response;
  response.latency = latency;
  const auto& choices = reply.value("choices", nlohmann::json::array());
  if (!choices.is_array() || choices.empty() || !choices[0].contains("message") ||
      !choices[0]["message"].is_object() || !choices[0]["message"].value("content", nlohmann::json()).is_string()) {
    throw ProviderError(Kind::kBackendError, "reply has no message content: " + excerpt(res->body),
                        res->status);
  }
  response.text = choices[0]["message"]["content"].get<std::string>();

  const auto usage = reply.value("usage", nlohmann::json());
  if (!usage.is_object() || !usage.value("prompt_tokens", nlohmann::json()).is_number_unsigned() ||
      !usage.value("completion_tokens", nlohmann::json()).is_number_unsigned()) {
    throw ProviderError(Kind::kUsageMissing, "reply lacks usage accounting", res->status);
  }
  response.usage.prompt_tokens = usage["prompt_tokens"].get<std::uint64_t>();
  response.usage.completion_tokens = usage["completion_tokens"].get<std::uint64_t>();
  return response;
}

}  // namespace huh
