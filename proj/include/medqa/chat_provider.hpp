#pragma once

#include "medqa/http.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace medqa {

enum class ChatPurpose { Stance, Summary };

struct ChatRequest {
    ChatPurpose purpose = ChatPurpose::Summary;
    std::string system;
    std::string user;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string id() const = 0;
    // Throws ProviderUnavailable when no completion could be obtained.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct ChatTimeouts {
    std::chrono::milliseconds per_study{20000};
    std::chrono::milliseconds synthesis{60000};
};

/// OpenAI-compatible /chat/completions client, temperature 0.
class OpenAiChatProvider final : public ChatProvider {
public:
    OpenAiChatProvider(std::shared_ptr<ResilientClient> client, std::string url, std::string model,
                       std::string api_key = {}, ChatTimeouts timeouts = {});

    std::string id() const override { return "openai-compatible:" + model_; }
    std::string complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ResilientClient> client_;
    std::string url_;
    std::string model_;
    std::string api_key_;
    ChatTimeouts timeouts_;
};

// Prompt texts compiled in from prompts/.
std::string_view stance_prompt_asset();
std::string_view summary_prompt_asset();

}  // namespace medqa
