#include "socdbg/gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "socdbg/assets.hpp"
#include "socdbg/jsonl.hpp"

namespace socdbg {

namespace {

const std::set<std::string, std::less<>> kEffortLevels = {"minimal", "low", "medium"};
const std::set<std::string, std::less<>> kVerbosity = {"low", "medium", "high"};

constexpr double kPlainTemperature = 0.1;
constexpr double kThinkingTemperature = 1.0;
constexpr int kPlainTokens = 4000;
constexpr int kThinkingTokens = 6000;
constexpr int kThinkingBudget = 2000;
constexpr int kJudgeTokens = 8000;

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::optional<Provider> family_of(std::string_view model) {
  if (starts_with(model, "gpt-5")) return Provider::openai;
  if (starts_with(model, "claude-")) return Provider::anthropic;
  if (starts_with(model, "gemini-2.5-")) return Provider::google;
  return std::nullopt;
}

std::string temperature_suffix(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-t%g", t);
  return buf;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(Provider p) {
  switch (p) {
    case Provider::openai: return "openai";
    case Provider::anthropic: return "anthropic";
    case Provider::google: return "google";
  }
  return "?";
}

Provider parse_provider(std::string_view text) {
  if (text == "openai") return Provider::openai;
  if (text == "anthropic") return Provider::anthropic;
  if (text == "google") return Provider::google;
  throw DataError("provider", "unknown provider '" + std::string(text) + "'");
}

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::auth: return "auth";
    case ErrorKind::rate_limit: return "rate_limit";
    case ErrorKind::transient: return "transient";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::invalid_request: return "invalid_request";
    case ErrorKind::empty_content: return "empty_content";
    case ErrorKind::replay_miss: return "replay_miss";
  }
  return "?";
}

Json to_json(const ModelConfig& c) {
  Json j;
  j["config_id"] = c.config_id;
  j["provider"] = std::string(to_string(c.provider));
  j["model_name"] = c.model_name;
  j["reasoning_enabled"] = c.reasoning_enabled;
  if (c.reasoning_level) j["reasoning_level"] = *c.reasoning_level;
  if (c.temperature) j["temperature"] = *c.temperature;
  j["max_output_tokens"] = c.max_output_tokens;
  if (c.thinking_budget_tokens) j["thinking_budget_tokens"] = *c.thinking_budget_tokens;
  if (c.verbosity) j["verbosity"] = *c.verbosity;
  if (c.include_thoughts) j["include_thoughts"] = true;
  if (c.profile) j["profile"] = *c.profile;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  ModelConfig c;
  c.config_id = r.str("config_id");
  const std::string provider = r.str("provider");
  try {
    c.provider = parse_provider(provider);
  } catch (const DataError&) {
    throw DataError(r.field("provider"), "unknown provider '" + provider + "'");
  }
  c.model_name = r.str("model_name");
  c.reasoning_enabled = r.boolean("reasoning_enabled");
  c.reasoning_level = r.opt_str("reasoning_level");
  c.temperature = r.opt_number("temperature");
  c.max_output_tokens = static_cast<int>(r.integer("max_output_tokens"));
  if (auto b = r.opt_integer("thinking_budget_tokens")) c.thinking_budget_tokens = static_cast<int>(*b);
  c.verbosity = r.opt_str("verbosity");
  c.include_thoughts = r.opt_boolean("include_thoughts").value_or(false);
  c.profile = r.opt_str("profile");
  r.finish();
  return c;
}

std::vector<Violation> validate_config(const ModelConfig& c) {
  std::vector<Violation> out;
  auto bad = [&](std::string field, std::string rule) { out.push_back({std::move(field), std::move(rule)}); };

  if (c.config_id.empty()) bad("config_id", "must not be empty");
  if (c.model_name.empty()) bad("model_name", "must not be empty");
  if (c.max_output_tokens <= 0) bad("max_output_tokens", "must be positive");
  if (c.profile && *c.profile != "judge") bad("profile", "unknown profile");
  auto family = family_of(c.model_name);
  if (!c.model_name.empty() && family != c.provider) bad("model_name", "not a model of this provider");

  switch (c.provider) {
    case Provider::openai:
      if (c.temperature) bad("temperature", "not supported by effort-based models");
      if (!c.reasoning_enabled) bad("reasoning_enabled", "effort-based models always reason");
      if (!c.reasoning_level || !kEffortLevels.count(*c.reasoning_level))
        bad("reasoning_level", "must be minimal, low or medium");
      if (c.verbosity && !kVerbosity.count(*c.verbosity)) bad("verbosity", "must be low, medium or high");
      if (c.thinking_budget_tokens) bad("thinking_budget_tokens", "not used by effort-based models");
      if (c.include_thoughts) bad("include_thoughts", "not used by effort-based models");
      break;
    case Provider::anthropic:
    case Provider::google: {
      const double hi = c.provider == Provider::anthropic ? 1.0 : 2.0;
      if (c.reasoning_level) bad("reasoning_level", "effort levels are not used by this provider");
      if (c.verbosity) bad("verbosity", "not used by this provider");
      if (!c.temperature)
        bad("temperature", "required");
      else if (*c.temperature < 0.0 || *c.temperature > hi)
        bad("temperature", "out of range");
      if (c.reasoning_enabled) {
        if (!c.thinking_budget_tokens)
          bad("thinking_budget_tokens", "required when reasoning is enabled");
        else if (*c.thinking_budget_tokens >= c.max_output_tokens)
          bad("thinking_budget_tokens", "must be below max_output_tokens");
        if (c.provider == Provider::anthropic) {
          if (c.thinking_budget_tokens && *c.thinking_budget_tokens < 1024)
            bad("thinking_budget_tokens", "must be at least 1024");
          if (c.temperature && *c.temperature != kThinkingTemperature)
            bad("temperature", "extended thinking requires temperature 1.0");
        }
      } else {
        if (c.thinking_budget_tokens) bad("thinking_budget_tokens", "only valid with reasoning enabled");
        if (c.include_thoughts) bad("include_thoughts", "only valid with reasoning enabled");
      }
      if (c.provider == Provider::anthropic && c.include_thoughts)
        bad("include_thoughts", "not used by this provider");
      break;
    }
  }
  return out;
}

ModelConfig resolve_config(std::string_view model_name, const ReasoningFlags& flags) {
  auto family = family_of(model_name);
  if (!family) throw ValidationError("unrecognized model family: " + std::string(model_name));
  const std::string model(model_name);
  if (flags.profile && *flags.profile != "judge") throw ValidationError("unknown profile: " + *flags.profile);

  ModelConfig c;
  c.provider = *family;
  c.model_name = model;

  switch (*family) {
    case Provider::openai:
      if (flags.temperature) throw ValidationError(model + " does not support temperature configuration");
      if (flags.profile) throw ValidationError("the judge profile needs an Anthropic model");
      if (!flags.level) throw ValidationError(model + " needs a reasoning level (minimal, low, medium)");
      if (!kEffortLevels.count(*flags.level))
        throw ValidationError("unsupported reasoning level '" + *flags.level + "' for " + model);
      c.reasoning_enabled = true;
      c.reasoning_level = flags.level;
      c.max_output_tokens = kPlainTokens;
      c.verbosity = "medium";
      c.config_id = model + "-" + *flags.level;
      break;

    case Provider::anthropic:
      if (flags.level) throw ValidationError("reasoning levels apply only to effort-based models");
      if (flags.profile) {
        if (flags.temperature && *flags.temperature != kThinkingTemperature)
          throw ValidationError("the judge profile runs at temperature 1.0");
        c.reasoning_enabled = true;
        c.temperature = kThinkingTemperature;
        c.max_output_tokens = kJudgeTokens;
        c.thinking_budget_tokens = kThinkingBudget;
        c.profile = "judge";
        c.config_id = "judge-" + model;
      } else if (flags.reasoning) {
        if (flags.temperature && *flags.temperature != kThinkingTemperature)
          throw ValidationError("extended thinking requires temperature 1.0");
        c.reasoning_enabled = true;
        c.temperature = kThinkingTemperature;
        c.max_output_tokens = kThinkingTokens;
        c.thinking_budget_tokens = kThinkingBudget;
        c.config_id = model + "-thinking";
      } else {
        c.temperature = flags.temperature.value_or(kPlainTemperature);
        c.max_output_tokens = kPlainTokens;
        c.config_id = model;
        if (*c.temperature != kPlainTemperature) c.config_id += temperature_suffix(*c.temperature);
      }
      break;

    case Provider::google:
      if (flags.level) throw ValidationError("reasoning levels apply only to effort-based models");
      if (flags.profile) throw ValidationError("the judge profile needs an Anthropic model");
      c.temperature = flags.temperature.value_or(kPlainTemperature);
      if (flags.reasoning) {
        c.reasoning_enabled = true;
        c.max_output_tokens = kThinkingTokens;
        c.thinking_budget_tokens = kThinkingBudget;
        c.include_thoughts = true;
        c.config_id = model + "-thinking";
      } else {
        c.max_output_tokens = kPlainTokens;
        c.config_id = model;
      }
      if (*c.temperature != kPlainTemperature) c.config_id += temperature_suffix(*c.temperature);
      break;
  }

  auto violations = validate_config(c);
  if (!violations.empty()) throw ValidationError(to_string(violations.front()));
  return c;
}

// Registry

ModelRegistry ModelRegistry::from_json(const Json& doc) {
  jsonl::ObjectReader r(doc);
  if (r.integer("schema_version") != 1) throw DataError("schema_version", "unsupported version");
  ModelRegistry reg;
  std::set<std::string> ids;

  auto read_list = [&](std::string_view key, std::vector<ModelConfig>& into) {
    const Json& list = r.any(key);
    if (!list.is_array()) throw DataError(std::string(key), "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
      ModelConfig c;
      try {
        c = model_config_from_json(list[i]);
      } catch (const DataError& e) {
        throw DataError(where + "." + e.field(), e.detail());
      }
      auto violations = validate_config(c);
      if (!violations.empty())
        throw DataError(where + "." + violations.front().field, violations.front().rule);
      if (!ids.insert(c.config_id).second) throw DataError(where + ".config_id", "duplicate id " + c.config_id);
      into.push_back(std::move(c));
    }
  };
  read_list("configurations", reg.configs_);
  read_list("profiles", reg.profiles_);

  if (const Json* defaults = r.opt_any("defaults")) {
    if (!defaults->is_object()) throw DataError("defaults", "expected an object");
    for (const auto& [role, id] : defaults->items()) {
      if (!id.is_string()) throw DataError("defaults." + role, "expected a string");
      if (!ids.count(id.get<std::string>())) throw DataError("defaults." + role, "unknown config id");
      reg.defaults_[role] = id.get<std::string>();
    }
  }
  r.finish();
  return reg;
}

const ModelRegistry& ModelRegistry::builtin() {
  static const ModelRegistry reg = from_json(Json::parse(assets::get("models.json")));
  return reg;
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("", path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const ModelConfig& ModelRegistry::find(std::string_view config_id) const {
  for (const auto* list : {&configs_, &profiles_})
    for (const auto& c : *list)
      if (c.config_id == config_id) return c;
  throw ValidationError("unknown model configuration: " + std::string(config_id));
}

bool ModelRegistry::contains(std::string_view config_id) const {
  for (const auto* list : {&configs_, &profiles_})
    for (const auto& c : *list)
      if (c.config_id == config_id) return true;
  return false;
}

const ModelConfig& ModelRegistry::default_for(std::string_view role) const {
  auto it = defaults_.find(role);
  if (it == defaults_.end()) throw Error("no default configuration for role " + std::string(role));
  return find(it->second);
}

// Hashing

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string request_hash(const GenerationRequest& request) {
  std::string material = request.config_id;
  material.push_back('\n');
  if (request.system) {
    material += "system:";
    material += *request.system;
    material.push_back('\n');
  }
  material += request.prompt;
  return sha256_hex(material);
}

// Cassettes

Json to_json(const CassetteEntry& e) {
  Json response;
  response["text"] = e.text;
  if (e.reasoning) response["reasoning"] = *e.reasoning;
  response["usage"] = {{"input_tokens", e.usage.input_tokens},
                       {"output_tokens", e.usage.output_tokens},
                       {"reasoning_tokens", e.usage.reasoning_tokens}};
  Json j;
  j["request_hash"] = e.request_hash;
  j["config_id"] = e.config_id;
  j["tag"] = e.tag;
  j["response"] = std::move(response);
  return j;
}

CassetteEntry cassette_entry_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  CassetteEntry e;
  e.request_hash = r.str("request_hash");
  if (e.request_hash.size() != 64 ||
      e.request_hash.find_first_not_of("0123456789abcdef") != std::string::npos)
    throw DataError("request_hash", "expected 64 lowercase hex digits");
  e.config_id = r.str("config_id");
  e.tag = r.opt_str("tag").value_or("");
  jsonl::ObjectReader resp(r.any("response"), "response");
  e.text = resp.str("text");
  e.reasoning = resp.opt_str("reasoning");
  if (const Json* usage = resp.opt_any("usage")) {
    jsonl::ObjectReader u(*usage, "response.usage");
    e.usage.input_tokens = u.opt_integer("input_tokens").value_or(0);
    e.usage.output_tokens = u.opt_integer("output_tokens").value_or(0);
    e.usage.reasoning_tokens = u.opt_integer("reasoning_tokens").value_or(0);
    u.finish();
  }
  resp.finish();
  r.finish();
  return e;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& cassette)
    : ReplayTransport(jsonl::read_as<CassetteEntry>(cassette, cassette_entry_from_json)) {}

ReplayTransport::ReplayTransport(std::vector<CassetteEntry> entries) {
  for (auto& e : entries) {
    auto [it, inserted] = entries_.emplace(e.request_hash, e);
    if (!inserted && (it->second.text != e.text || it->second.reasoning != e.reasoning))
      throw DataError("request_hash", "conflicting responses for " + e.request_hash);
  }
}

GenerationResponse ReplayTransport::send(const GenerationRequest& request, const ModelConfig&) {
  const std::string hash = request_hash(request);
  auto it = entries_.find(hash);
  if (it == entries_.end())
    throw ProviderError(ErrorKind::replay_miss, "no recorded response for " + request.config_id + " request " +
                                                    (request.tag.empty() ? hash : request.tag + " (" + hash + ")"));
  GenerationResponse out;
  out.tag = request.tag;
  out.config_id = request.config_id;
  out.text = it->second.text;
  out.reasoning = it->second.reasoning;
  out.usage = it->second.usage;
  return out;
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

GenerationResponse RecordingTransport::send(const GenerationRequest& request, const ModelConfig& config) {
  GenerationResponse response = inner_->send(request, config);
  CassetteEntry e{request_hash(request), request.config_id, request.tag, response.text, response.reasoning,
                  response.usage};
  std::lock_guard lock(mu_);
  std::ofstream out(cassette_, std::ios::app);
  if (!out) throw Error("cannot append to " + cassette_.string());
  out << to_json(e).dump() << '\n';
  return response;
}

// Mock

MockTransport::MockTransport(Script script, std::chrono::milliseconds delay)
    : script_(std::move(script)), delay_(delay) {}

GenerationResponse MockTransport::send(const GenerationRequest& request, const ModelConfig&) {
  int attempt = 0;
  {
    std::lock_guard lock(mu_);
    attempt = attempts_[request.tag]++;
  }
  ++calls_;
  const int now = ++in_flight_;
  int peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

  GenerationResponse out;
  out.tag = request.tag;
  out.config_id = request.config_id;
  out.text = script_(request, attempt);
  auto words = [](std::string_view s) {
    long n = 0;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) ++n;
    return n;
  };
  out.usage.input_tokens = words(request.prompt);
  out.usage.output_tokens = words(out.text);
  return out;
}

// Gateway

Gateway::Gateway(std::shared_ptr<Transport> transport, const ModelRegistry& registry, RetryPolicy retry,
                 int max_in_flight)
    : transport_(std::move(transport)),
      registry_(registry),
      retry_(std::move(retry)),
      rng_(retry_.seed),
      slots_(max_in_flight) {
  if (!transport_) throw PreconditionError("gateway needs a transport");
  if (max_in_flight < 1) throw PreconditionError("max_in_flight must be at least 1");
  if (retry_.max_attempts < 1) throw PreconditionError("max_attempts must be at least 1");
  if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds Gateway::backoff(int attempt, std::optional<std::chrono::milliseconds> hint) {
  double jitter;
  {
    std::lock_guard lock(rng_mu_);
    jitter = std::uniform_real_distribution<double>(0.5, 1.0)(rng_);
  }
  const double raw = static_cast<double>(retry_.base_delay.count()) * std::pow(retry_.factor, attempt);
  const double capped = std::min(raw, static_cast<double>(retry_.max_delay.count()));
  auto delay = std::chrono::milliseconds(static_cast<long>(capped * jitter));
  if (hint && *hint > delay) delay = std::min(*hint, retry_.max_delay);
  return delay;
}

GenerationResponse Gateway::generate(const GenerationRequest& request) {
  if (is_blank(request.prompt)) throw ValidationError("empty prompt" + (request.tag.empty() ? "" : " for " + request.tag));
  if (!registry_.contains(request.config_id))
    throw ValidationError("unknown model configuration: " + request.config_id);
  const ModelConfig& config = registry_.find(request.config_id);

  auto record = [&](const GenerationResponse* ok, int retries) {
    std::lock_guard lock(usage_mu_);
    UsageTotals& t = usage_[request.config_id];
    ++t.requests;
    t.retries += retries;
    if (!ok) {
      ++t.failures;
      return;
    }
    t.tokens.input_tokens += ok->usage.input_tokens;
    t.tokens.output_tokens += ok->usage.output_tokens;
    t.tokens.reasoning_tokens += ok->usage.reasoning_tokens;
  };

  for (int attempt = 0;; ++attempt) {
    {
      std::unique_lock lock(slots_mu_);
      slots_cv_.wait(lock, [&] { return slots_ > 0; });
      --slots_;
    }
    struct Release {
      Gateway& g;
      ~Release() {
        {
          std::lock_guard lock(g.slots_mu_);
          ++g.slots_;
        }
        g.slots_cv_.notify_one();
      }
    };
    std::optional<std::chrono::milliseconds> wait;
    try {
      Release release{*this};
      GenerationResponse response = transport_->send(request, config);
      if (is_blank(response.text)) throw ProviderError(ErrorKind::empty_content, "response contained no text");
      response.tag = request.tag;
      response.config_id = request.config_id;
      response.retry_count = attempt;
      record(&response, attempt);
      return response;
    } catch (ProviderError& e) {
      if (!e.retryable() || attempt + 1 >= retry_.max_attempts) {
        e.attempts = attempt + 1;
        record(nullptr, attempt);
        throw;
      }
      wait = backoff(attempt, e.retry_after());
    }
    retry_.sleep(*wait);
  }
}

std::vector<BatchItem> Gateway::generate_batch(std::span<const GenerationRequest> requests, int max_in_flight) {
  if (max_in_flight < 1) throw PreconditionError("max_in_flight must be at least 1");
  std::vector<BatchItem> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < requests.size();) {
      try {
        out[i].response = generate(requests[i]);
      } catch (const ProviderError& e) {
        out[i].error = e.what();
        out[i].error_kind = e.kind();
      } catch (const ValidationError& e) {
        out[i].error = e.what();
        out[i].error_kind = ErrorKind::invalid_request;
      } catch (const std::exception& e) {
        out[i].error = e.what();
        out[i].error_kind = ErrorKind::transient;
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

std::map<std::string, UsageTotals> Gateway::usage() const {
  std::lock_guard lock(usage_mu_);
  return usage_;
}

}  // namespace socdbg
