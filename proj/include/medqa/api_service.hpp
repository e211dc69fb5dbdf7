#pragma once

#include "medqa/error.hpp"
#include "medqa/persistence_store.hpp"
#include "medqa/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>

namespace medqa {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::optional<std::string> bearer;  // Authorization: Bearer <token>
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

// Error body codes and their HTTP statuses.
struct ApiErrorCode {
    const char* name;
    int status;
};
ApiErrorCode api_error_for(ErrorCode code);

struct ApiOptions {
    std::size_t max_concurrent_searches = 4;
    std::size_t recent_document_capacity = 2000;
    HashCost hash_cost = HashCost::interactive();
};

/// Transport-independent request handler. Search endpoints accept anonymous
/// callers; history, folders, notes and topics need a bearer token.
class ApiService {
public:
    ApiService(std::shared_ptr<Pipeline> pipeline, std::shared_ptr<Store> store,
               ApiOptions options = {});

    ApiResponse handle(const ApiRequest& request);

    Store& store() { return *store_; }

private:
    ApiResponse route(const ApiRequest& request);
    std::optional<std::string> optional_user(const ApiRequest& request);
    std::string required_user(const ApiRequest& request);

    ApiResponse health();
    ApiResponse registration(const nlohmann::json& body);
    ApiResponse login(const nlohmann::json& body);
    ApiResponse search(const ApiRequest& request, const nlohmann::json& body);
    ApiResponse document(const ApiRequest& request, const std::string& pmid);
    ApiResponse put_note(const ApiRequest& request, const std::string& pmid, const nlohmann::json& body);

    void remember_documents(const SearchSession& session);
    std::optional<nlohmann::json> recent_document(const std::string& pmid);

    std::shared_ptr<Pipeline> pipeline_;
    std::shared_ptr<Store> store_;
    ApiOptions options_;
    std::counting_semaphore<> search_slots_;

    // In-process cache of recently served study details, newest at the front.
    std::mutex recent_mutex_;
    std::list<std::pair<std::string, nlohmann::json>> recent_;
    std::unordered_map<std::string, std::list<std::pair<std::string, nlohmann::json>>::iterator>
        recent_index_;
};

nlohmann::json api_error_body(const std::string& code, const std::string& message,
                              const std::vector<std::string>& diagnostics = {});

struct ServerOptions {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 picks a free port
    std::string cors_origin = "*";
};

// Blocks serving HTTP until the process is stopped. `on_listen` receives the
// bound port before the first request is accepted.
void serve_http(ApiService& service, const ServerOptions& options,
                const std::function<void(int)>& on_listen = {});

}  // namespace medqa
