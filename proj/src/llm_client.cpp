#include "navprune/llm_client.hpp"

#include <cstdlib>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace navprune {

HttpCompletionClient::HttpCompletionClient(std::string url, std::string model, std::string key)
    : model_(std::move(model)), key_(std::move(key)) {
    const auto scheme = url.find("://");
    const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', host_start);
    host_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
    if (url.rfind("https://", 0) == 0)
        throw std::invalid_argument("https endpoints are not supported by this build; use http");
}

std::string HttpCompletionClient::complete(const std::string& prompt) {
    httplib::Client client(host_);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
    const nlohmann::json body = {{"model", model_}, {"prompt", prompt}, {"temperature", 0}, {"max_tokens", 2048}};
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw std::runtime_error("completion request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("completion service returned HTTP " + std::to_string(res->status));
    const auto reply = nlohmann::json::parse(res->body);
    const auto& choice = reply.at("choices").at(0);
    if (choice.contains("text")) return choice.at("text").get<std::string>();
    return choice.at("message").at("content").get<std::string>();
}

std::unique_ptr<HttpCompletionClient> HttpCompletionClient::from_env() {
    const char* url = std::getenv("NAVPRUNE_LLM_URL");
    if (!url || !*url) return nullptr;
    const char* model = std::getenv("NAVPRUNE_LLM_MODEL");
    const char* key = std::getenv("NAVPRUNE_LLM_KEY");
    return std::make_unique<HttpCompletionClient>(url, model ? model : "default", key ? key : "");
}

}  // namespace navprune
