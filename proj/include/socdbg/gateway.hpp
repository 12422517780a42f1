#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "socdbg/error.hpp"
#include "socdbg/model.hpp"

namespace socdbg {

enum class Provider { openai, anthropic, google };

std::string_view to_string(Provider p);
Provider parse_provider(std::string_view text);

struct ModelConfig {
  std::string config_id;
  Provider provider = Provider::openai;
  std::string model_name;
  bool reasoning_enabled = false;
  std::optional<std::string> reasoning_level;  // minimal | low | medium
  std::optional<double> temperature;
  int max_output_tokens = 0;
  std::optional<int> thinking_budget_tokens;
  std::optional<std::string> verbosity;
  bool include_thoughts = false;
  std::optional<std::string> profile;  // "judge" for the evaluation profile

  bool operator==(const ModelConfig&) const = default;
};

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

/// Provider-specific validity rules. Empty means valid.
std::vector<Violation> validate_config(const ModelConfig& c);

struct ReasoningFlags {
  bool reasoning = false;
  std::optional<std::string> level;
  std::optional<std::string> profile;
  std::optional<double> temperature;
};

/// Family defaults for a model. Throws ValidationError for combinations the
/// family does not support.
ModelConfig resolve_config(std::string_view model_name, const ReasoningFlags& flags);

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ModelRegistry {
 public:
  static const ModelRegistry& builtin();
  static ModelRegistry from_json(const Json& doc);
  static ModelRegistry load(const std::filesystem::path& path);

  /// The generation configurations (not the judge profile).
  const std::vector<ModelConfig>& configs() const { return configs_; }
  const std::vector<ModelConfig>& profiles() const { return profiles_; }
  /// Searches configurations, then profiles. Throws ValidationError for unknown ids.
  const ModelConfig& find(std::string_view config_id) const;
  bool contains(std::string_view config_id) const;
  /// Role default such as "judge" or "describer".
  const ModelConfig& default_for(std::string_view role) const;

 private:
  std::vector<ModelConfig> configs_;
  std::vector<ModelConfig> profiles_;
  std::map<std::string, std::string, std::less<>> defaults_;
};

struct GenerationRequest {
  std::string prompt;
  std::string config_id;
  std::string tag;
  std::optional<std::string> system;
};

struct Usage {
  long input_tokens = 0;
  long output_tokens = 0;
  long reasoning_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct GenerationResponse {
  std::string tag;
  std::string config_id;
  std::string text;
  std::optional<std::string> reasoning;
  Usage usage;
  long latency_ms = 0;
  int retry_count = 0;

  bool operator==(const GenerationResponse&) const = default;
};

enum class ErrorKind { auth, rate_limit, transient, timeout, invalid_request, empty_content, replay_miss };
std::string_view to_string(ErrorKind k);

class ProviderError : public Error {
 public:
  ProviderError(ErrorKind kind, const std::string& message, std::optional<std::chrono::milliseconds> retry_after = {})
      : Error(std::string(to_string(kind)) + ": " + message), kind_(kind), retry_after_(retry_after) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept {
    return kind_ == ErrorKind::rate_limit || kind_ == ErrorKind::transient || kind_ == ErrorKind::timeout;
  }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }
  int attempts = 1;

 private:
  ErrorKind kind_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

/// Replay key: SHA-256 over config id and prompt (and system text if any).
std::string request_hash(const GenerationRequest& request);
std::string sha256_hex(std::string_view data);

/// One provider call, no retries.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual GenerationResponse send(const GenerationRequest& request, const ModelConfig& config) = 0;
};

struct Endpoints {
  std::string openai = "https://api.openai.com";
  std::string anthropic = "https://api.anthropic.com";
  std::string google = "https://generativelanguage.googleapis.com";
};

/// Wire bodies, exposed for inspection.
Json provider_request_body(const ModelConfig& config, const GenerationRequest& request);
GenerationResponse parse_provider_response(Provider provider, const Json& body);
ErrorKind classify_http_status(int status);

class HttpTransport : public Transport {
 public:
  using KeyLookup = std::function<std::optional<std::string>(Provider)>;

  explicit HttpTransport(Endpoints endpoints = {}, KeyLookup keys = env_keys(),
                         std::chrono::seconds timeout = std::chrono::seconds(300));
  GenerationResponse send(const GenerationRequest& request, const ModelConfig& config) override;

  /// OPENAI_API_KEY, ANTHROPIC_API_KEY, GEMINI_API_KEY.
  static KeyLookup env_keys();
  static std::string_view key_variable(Provider p);

 private:
  Endpoints endpoints_;
  KeyLookup keys_;
  std::chrono::seconds timeout_;
};

struct CassetteEntry {
  std::string request_hash;
  std::string config_id;
  std::string tag;
  std::string text;
  std::optional<std::string> reasoning;
  Usage usage;
};

Json to_json(const CassetteEntry& e);
CassetteEntry cassette_entry_from_json(const Json& j);

/// Answers from recorded responses; a miss is a non-retryable error.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& cassette);
  explicit ReplayTransport(std::vector<CassetteEntry> entries);
  GenerationResponse send(const GenerationRequest& request, const ModelConfig& config) override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, CassetteEntry> entries_;
};

/// Forwards to another transport and appends each success to a cassette.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path cassette);
  GenerationResponse send(const GenerationRequest& request, const ModelConfig& config) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path cassette_;
  std::mutex mu_;
};

/// Scripted transport for tests: the script sees the request and the 0-based
/// attempt number for that tag, and returns text or throws ProviderError.
class MockTransport : public Transport {
 public:
  using Script = std::function<std::string(const GenerationRequest&, int attempt)>;

  explicit MockTransport(Script script, std::chrono::milliseconds delay = std::chrono::milliseconds(0));
  GenerationResponse send(const GenerationRequest& request, const ModelConfig& config) override;

  int peak_in_flight() const { return peak_.load(); }
  int calls() const { return calls_.load(); }

 private:
  Script script_;
  std::chrono::milliseconds delay_;
  std::mutex mu_;
  std::map<std::string, int> attempts_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::atomic<int> calls_{0};
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{30000};
  std::uint64_t seed = 0;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct UsageTotals {
  long requests = 0;
  long failures = 0;
  long retries = 0;
  Usage tokens;

  bool operator==(const UsageTotals&) const = default;
};

struct BatchItem {
  std::optional<GenerationResponse> response;
  std::optional<std::string> error;
  std::optional<ErrorKind> error_kind;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Transport> transport, const ModelRegistry& registry = ModelRegistry::builtin(),
          RetryPolicy retry = {}, int max_in_flight = 8);

  /// Throws ValidationError for an empty prompt or unknown config and
  /// ProviderError once retries are exhausted.
  GenerationResponse generate(const GenerationRequest& request);
  /// Order-preserving; a failed slot carries its error.
  std::vector<BatchItem> generate_batch(std::span<const GenerationRequest> requests, int max_in_flight);

  const ModelRegistry& registry() const { return registry_; }
  const RetryPolicy& retry_policy() const { return retry_; }
  std::map<std::string, UsageTotals> usage() const;

 private:
  std::chrono::milliseconds backoff(int attempt, std::optional<std::chrono::milliseconds> hint);

  std::shared_ptr<Transport> transport_;
  ModelRegistry registry_;
  RetryPolicy retry_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  std::mutex slots_mu_;
  std::condition_variable slots_cv_;
  int slots_;

  mutable std::mutex usage_mu_;
  std::map<std::string, UsageTotals> usage_;
};

}  // namespace socdbg
