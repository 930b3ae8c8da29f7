#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rmnav/feedback.hpp"

namespace rmnav {

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint splitUrl(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Transport("invalid endpoint URL: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

}  // namespace

HttpChatClient::HttpChatClient(LlmConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw Transport("language-model endpoint is not configured");
  if (!(config_.timeoutSeconds > 0.0)) throw BadParam("timeout must be positive");
  splitUrl(config_.endpoint);
}

std::string HttpChatClient::complete(const std::string& prompt) {
  const Endpoint ep = splitUrl(config_.endpoint);
  httplib::Client client(ep.base);
  const auto seconds = static_cast<time_t>(config_.timeoutSeconds);
  const auto micros = static_cast<time_t>((config_.timeoutSeconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers headers;
  if (!config_.tokenEnv.empty()) {
    if (const char* token = std::getenv(config_.tokenEnv.c_str()); token != nullptr && *token != '\0')
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const nlohmann::json request = {
      {"model", config_.model},
      {"temperature", 0},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  auto res = client.Post(ep.path, headers, request.dump(), "application/json");
  if (!res) throw Transport("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Transport("endpoint returned HTTP " + std::to_string(res->status));

  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw MalformedResponse("response body is not JSON");
  const auto* content = [&]() -> const nlohmann::json* {
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) return nullptr;
    const auto& choice = body["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) return nullptr;
    return &choice["message"]["content"];
  }();
  if (content == nullptr || !content->is_string()) throw MalformedResponse("response has no choices[0].message.content");
  return content->get<std::string>();
}

}  // namespace rmnav
