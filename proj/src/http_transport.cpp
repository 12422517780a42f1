#include <httplib.h>

#include <cstdlib>

#include "socdbg/gateway.hpp"

namespace socdbg {

namespace {

Json user_text(const std::string& prompt) { return Json{{"role", "user"}, {"content", prompt}}; }

long as_long(const Json& j, std::string_view key) {
  auto it = j.find(key);
  return it != j.end() && it->is_number_integer() ? it->get<long>() : 0;
}

[[noreturn]] void shape_error(std::string_view what) {
  throw ProviderError(ErrorKind::transient, "unexpected response shape: " + std::string(what));
}

std::optional<std::chrono::milliseconds> retry_after(const httplib::Result& res) {
  if (!res->has_header("retry-after")) return std::nullopt;
  char* end = nullptr;
  const std::string value = res->get_header_value("retry-after");
  const double seconds = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || seconds < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<long>(seconds * 1000));
}

}  // namespace

Json provider_request_body(const ModelConfig& c, const GenerationRequest& request) {
  Json body;
  switch (c.provider) {
    case Provider::openai:
      body["model"] = c.model_name;
      if (request.system) body["instructions"] = *request.system;
      body["input"] = request.prompt;
      body["max_output_tokens"] = c.max_output_tokens;
      if (c.reasoning_level) body["reasoning"] = {{"effort", *c.reasoning_level}};
      if (c.verbosity) body["text"] = {{"verbosity", *c.verbosity}};
      break;
    case Provider::anthropic:
      body["model"] = c.model_name;
      body["max_tokens"] = c.max_output_tokens;
      if (c.temperature) body["temperature"] = *c.temperature;
      if (request.system) body["system"] = *request.system;
      body["messages"] = Json::array({user_text(request.prompt)});
      if (c.reasoning_enabled && c.thinking_budget_tokens)
        body["thinking"] = {{"type", "enabled"}, {"budget_tokens", *c.thinking_budget_tokens}};
      break;
    case Provider::google: {
      if (request.system) body["systemInstruction"] = {{"parts", Json::array({{{"text", *request.system}}})}};
      body["contents"] = Json::array({{{"role", "user"}, {"parts", Json::array({{{"text", request.prompt}}})}}});
      Json gen;
      if (c.temperature) gen["temperature"] = *c.temperature;
      gen["maxOutputTokens"] = c.max_output_tokens;
      if (c.reasoning_enabled && c.thinking_budget_tokens)
        gen["thinkingConfig"] = {{"thinkingBudget", *c.thinking_budget_tokens}, {"includeThoughts", c.include_thoughts}};
      body["generationConfig"] = std::move(gen);
      break;
    }
  }
  return body;
}

GenerationResponse parse_provider_response(Provider provider, const Json& body) {
  if (!body.is_object()) shape_error("not an object");
  GenerationResponse out;
  std::string reasoning;
  auto add = [](std::string& into, const Json& piece) {
    if (!piece.is_string()) return;
    if (!into.empty()) into += "\n";
    into += piece.get<std::string>();
  };

  switch (provider) {
    case Provider::openai: {
      auto output = body.find("output");
      if (output == body.end() || !output->is_array()) shape_error("missing output");
      for (const auto& item : *output) {
        const std::string type = item.value("type", "");
        if (type == "message" && item.contains("content") && item["content"].is_array()) {
          for (const auto& part : item["content"])
            if (part.value("type", "") == "output_text") out.text += part.value("text", "");
        } else if (type == "reasoning" && item.contains("summary") && item["summary"].is_array()) {
          for (const auto& s : item["summary"]) add(reasoning, s.contains("text") ? s["text"] : Json());
        }
      }
      if (body.contains("usage") && body["usage"].is_object()) {
        const Json& u = body["usage"];
        out.usage.input_tokens = as_long(u, "input_tokens");
        out.usage.output_tokens = as_long(u, "output_tokens");
        if (u.contains("output_tokens_details") && u["output_tokens_details"].is_object())
          out.usage.reasoning_tokens = as_long(u["output_tokens_details"], "reasoning_tokens");
      }
      break;
    }
    case Provider::anthropic: {
      auto content = body.find("content");
      if (content == body.end() || !content->is_array()) shape_error("missing content");
      for (const auto& block : *content) {
        const std::string type = block.value("type", "");
        if (type == "text") out.text += block.value("text", "");
        else if (type == "thinking") add(reasoning, block.contains("thinking") ? block["thinking"] : Json());
      }
      if (body.contains("usage") && body["usage"].is_object()) {
        out.usage.input_tokens = as_long(body["usage"], "input_tokens");
        out.usage.output_tokens = as_long(body["usage"], "output_tokens");
      }
      break;
    }
    case Provider::google: {
      auto candidates = body.find("candidates");
      if (candidates == body.end() || !candidates->is_array() || candidates->empty())
        throw ProviderError(ErrorKind::empty_content, "no candidates returned");
      const Json& first = (*candidates)[0];
      if (first.contains("content") && first["content"].contains("parts") && first["content"]["parts"].is_array()) {
        for (const auto& part : first["content"]["parts"]) {
          if (part.value("thought", false)) add(reasoning, part.contains("text") ? part["text"] : Json());
          else out.text += part.value("text", "");
        }
      }
      if (body.contains("usageMetadata") && body["usageMetadata"].is_object()) {
        const Json& u = body["usageMetadata"];
        out.usage.input_tokens = as_long(u, "promptTokenCount");
        out.usage.output_tokens = as_long(u, "candidatesTokenCount");
        out.usage.reasoning_tokens = as_long(u, "thoughtsTokenCount");
      }
      break;
    }
  }
  if (!reasoning.empty()) out.reasoning = std::move(reasoning);
  if (out.text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ProviderError(ErrorKind::empty_content, "response contained no text");
  return out;
}

ErrorKind classify_http_status(int status) {
  if (status == 401 || status == 403) return ErrorKind::auth;
  if (status == 429) return ErrorKind::rate_limit;
  if (status == 408) return ErrorKind::timeout;
  if (status >= 500) return ErrorKind::transient;
  return ErrorKind::invalid_request;
}

HttpTransport::HttpTransport(Endpoints endpoints, KeyLookup keys, std::chrono::seconds timeout)
    : endpoints_(std::move(endpoints)), keys_(std::move(keys)), timeout_(timeout) {}

std::string_view HttpTransport::key_variable(Provider p) {
  switch (p) {
    case Provider::openai: return "OPENAI_API_KEY";
    case Provider::anthropic: return "ANTHROPIC_API_KEY";
    case Provider::google: return "GEMINI_API_KEY";
  }
  return "";
}

HttpTransport::KeyLookup HttpTransport::env_keys() {
  return [](Provider p) -> std::optional<std::string> {
    const char* v = std::getenv(std::string(key_variable(p)).c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

GenerationResponse HttpTransport::send(const GenerationRequest& request, const ModelConfig& config) {
  auto key = keys_(config.provider);
  if (!key) throw ProviderError(ErrorKind::auth, std::string(key_variable(config.provider)) + " is not set");

  std::string base, path;
  httplib::Headers headers;
  switch (config.provider) {
    case Provider::openai:
      base = endpoints_.openai;
      path = "/v1/responses";
      headers.emplace("Authorization", "Bearer " + *key);
      break;
    case Provider::anthropic:
      base = endpoints_.anthropic;
      path = "/v1/messages";
      headers.emplace("x-api-key", *key);
      headers.emplace("anthropic-version", "2023-06-01");
      break;
    case Provider::google:
      base = endpoints_.google;
      path = "/v1beta/models/" + config.model_name + ":generateContent";
      headers.emplace("x-goog-api-key", *key);
      break;
  }

  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(timeout_);
  client.set_write_timeout(std::chrono::seconds(60));

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, headers, provider_request_body(config, request).dump(), "application/json");
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

  if (!res) {
    const auto err = res.error();
    const ErrorKind kind = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                               ? ErrorKind::timeout
                               : ErrorKind::transient;
    throw ProviderError(kind, base + path + ": " + httplib::to_string(err));
  }
  if (res->status != 200) {
    std::string detail = res->body.substr(0, 500);
    throw ProviderError(classify_http_status(res->status), "HTTP " + std::to_string(res->status) + ": " + detail,
                        retry_after(res));
  }
  Json body;
  try {
    body = Json::parse(res->body);
  } catch (const Json::parse_error&) {
    shape_error("body is not JSON");
  }
  GenerationResponse out = parse_provider_response(config.provider, body);
  out.tag = request.tag;
  out.config_id = request.config_id;
  out.latency_ms = elapsed.count();
  return out;
}

}  // namespace socdbg
