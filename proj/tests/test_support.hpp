#pragma once

#include "medqa/chat_provider.hpp"
#include "medqa/config.hpp"
#include "medqa/http.hpp"
#include "medqa/pubmed_client.hpp"

#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace medqa::testing {

inline std::string fixtures_dir() { return MEDQA_TEST_FIXTURES_DIR; }
inline std::string data_dir() { return MEDQA_TEST_DATA_DIR; }
inline std::string golden_dir() { return MEDQA_TEST_GOLDEN_DIR; }

// Transport answering from a handler and keeping every request it saw.
class ScriptedTransport final : public HttpTransport {
public:
    using Handler = std::function<HttpResponse(const HttpRequest&)>;

    explicit ScriptedTransport(Handler handler) : handler_(std::move(handler)) {}

    // Replays the given responses in order, then repeats the last one.
    static std::shared_ptr<ScriptedTransport> sequence(std::vector<HttpResponse> responses) {
        auto queue = std::make_shared<std::deque<HttpResponse>>(responses.begin(), responses.end());
        return std::make_shared<ScriptedTransport>([queue](const HttpRequest&) {
            HttpResponse r = queue->front();
            if (queue->size() > 1) queue->pop_front();
            return r;
        });
    }

    HttpResponse send(const HttpRequest& request) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        return handler_(request);
    }

    std::vector<HttpRequest> requests() {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    Handler handler_;
    std::mutex mutex_;
    std::vector<HttpRequest> requests_;
};

inline std::shared_ptr<ResilientClient> fast_client(std::shared_ptr<HttpTransport> transport,
                                                    std::string name = "test") {
    return std::make_shared<ResilientClient>(std::move(transport), nullptr,
                                             RetryPolicy{3, std::chrono::milliseconds(1)}, std::move(name));
}

// Chat provider returning queued replies (the last one repeats).
class ScriptedChat final : public ChatProvider {
public:
    explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    std::string id() const override { return "scripted"; }
    std::string complete(const ChatRequest& request) override {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        std::size_t i = std::min(calls_++, replies_.size() - 1);
        return replies_[i];
    }

    std::size_t calls() {
        std::lock_guard lock(mutex_);
        return calls_;
    }
    std::vector<ChatRequest> requests() {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    std::vector<std::string> replies_;
    std::mutex mutex_;
    std::size_t calls_ = 0;
    std::vector<ChatRequest> requests_;
};

class DownChat final : public ChatProvider {
public:
    std::string id() const override { return "down"; }
    std::string complete(const ChatRequest&) override;
};

inline StudyRecord make_record(std::string pmid, std::string title, std::string abstract,
                               std::optional<int> year = std::nullopt) {
    StudyRecord r;
    r.pmid = std::move(pmid);
    r.title = std::move(title);
    r.abstract = std::move(abstract);
    r.abstract_missing = r.abstract.empty();
    r.year = year;
    return r;
}

inline PipelineConfig offline_config() {
    PipelineConfig c;
    c.offline = true;
    c.fixtures_dir = fixtures_dir();
    return c;
}

}  // namespace medqa::testing
