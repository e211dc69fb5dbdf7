#include "medqa/chat_provider.hpp"

#include "medqa/error.hpp"

#include <nlohmann/json.hpp>

namespace medqa {

OpenAiChatProvider::OpenAiChatProvider(std::shared_ptr<ResilientClient> client, std::string url,
                                       std::string model, std::string api_key, ChatTimeouts timeouts)
    : client_(std::move(client)),
      url_(std::move(url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeouts_(timeouts) {
    require(client_ != nullptr, "chat provider needs a transport");
}

std::string OpenAiChatProvider::complete(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});

    HttpRequest http;
    http.method = "POST";
    http.url = url_;
    http.timeout = request.purpose == ChatPurpose::Summary ? timeouts_.synthesis : timeouts_.per_study;
    http.body = nlohmann::json{{"model", model_}, {"temperature", 0}, {"messages", messages}}.dump();
    if (!api_key_.empty()) http.headers.emplace_back("Authorization", "Bearer " + api_key_);

    HttpResponse response;
    try {
        response = client_->send(http);
    } catch (const Error& e) {
        fail(ErrorCode::ProviderUnavailable, e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        fail(ErrorCode::ProviderUnavailable,
             "chat provider returned HTTP " + std::to_string(response.status));
    }
    try {
        auto body = nlohmann::json::parse(response.body);
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ProviderUnavailable, std::string("malformed chat response: ") + e.what());
    }
}

}  // namespace medqa
