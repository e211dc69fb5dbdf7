#include "medqa/api_service.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"

#include <httplib.h>

#include <regex>

namespace medqa {

namespace {

constexpr std::size_t kDefaultTopicLimit = 10;
constexpr std::size_t kMaxNoteLength = 20000;

ApiResponse error_response(ErrorCode code, const std::string& message,
                           const std::vector<std::string>& diagnostics = {}) {
    auto e = api_error_for(code);
    return {e.status, api_error_body(e.name, message, diagnostics)};
}

ApiResponse not_found(const std::string& what) {
    return {404, api_error_body("not_found", what)};
}

nlohmann::json parse_body(const std::string& body) {
    if (trim(body).empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(body, nullptr, false);
    require(!j.is_discarded() && j.is_object(), "request body must be a JSON object");
    return j;
}

std::string string_field(const nlohmann::json& body, const char* key) {
    require(body.contains(key) && body.at(key).is_string(),
            std::string("field '") + key + "' must be a string");
    return body.at(key).get<std::string>();
}

int positive_int(const std::map<std::string, std::string>& query, const char* key, int fallback) {
    auto it = query.find(key);
    if (it == query.end()) return fallback;
    try {
        std::size_t used = 0;
        int v = std::stoi(it->second, &used);
        if (used == it->second.size() && v >= 1) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::InvalidArgument, std::string("query parameter '") + key + "' must be a positive integer");
}

nlohmann::json account_body(const UserAccount& user, const std::string& token) {
    return {{"user_id", user.user_id}, {"display_name", user.display_name}, {"token", token}};
}

}  // namespace

ApiErrorCode api_error_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::EmptyQuestion:
        case ErrorCode::QuestionTooLong:
        case ErrorCode::QueryParse:
        case ErrorCode::Conflict:
            return {"bad_request", 400};
        case ErrorCode::NotFound:
            return {"not_found", 404};
        case ErrorCode::Unauthorized:
            return {"unauthorized", 401};
        case ErrorCode::SynthesisFailed:
        case ErrorCode::MalformedAnswer:
            return {"synthesis_failed", 502};
        case ErrorCode::NoEvidenceFound:
            return {"no_evidence", 200};
        case ErrorCode::ExpansionUnavailable:
        case ErrorCode::UpstreamUnavailable:
        case ErrorCode::UpstreamRejected:
        case ErrorCode::ParseFailure:
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::ZeroVector:
        case ErrorCode::UnparseableResponse:
        case ErrorCode::StorageUnavailable:
            return {"upstream_unavailable", 502};
    }
    return {"upstream_unavailable", 502};
}

nlohmann::json api_error_body(const std::string& code, const std::string& message,
                              const std::vector<std::string>& diagnostics) {
    return {{"error", {{"code", code}, {"message", message}, {"diagnostics", diagnostics}}}};
}

ApiService::ApiService(std::shared_ptr<Pipeline> pipeline, std::shared_ptr<Store> store,
                       ApiOptions options)
    : pipeline_(std::move(pipeline)),
      store_(std::move(store)),
      options_(options),
      search_slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options.max_concurrent_searches))) {
    require(pipeline_ != nullptr && store_ != nullptr, "api service needs a pipeline and a store");
}

ApiResponse ApiService::handle(const ApiRequest& request) {
    try {
        return route(request);
    } catch (const Error& e) {
        return error_response(e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return {400, api_error_body("bad_request", e.what())};
    } catch (const std::exception& e) {
        return {500, api_error_body("internal_error", e.what())};
    }
}

std::optional<std::string> ApiService::optional_user(const ApiRequest& request) {
    if (!request.bearer) return std::nullopt;
    auto user = store_->user_for_token(*request.bearer);
    if (!user) fail(ErrorCode::Unauthorized, "invalid or expired token");
    return user;
}

std::string ApiService::required_user(const ApiRequest& request) {
    if (!request.bearer) fail(ErrorCode::Unauthorized, "this endpoint needs a bearer token");
    return *optional_user(request);
}

ApiResponse ApiService::route(const ApiRequest& request) {
    static const std::regex document_re(R"(^/api/documents/([^/]+)$)");
    static const std::regex notes_re(R"(^/api/documents/([^/]+)/notes$)");
    static const std::regex history_item_re(R"(^/api/history/([^/]+)$)");
    static const std::regex assign_re(R"(^/api/folders/([^/]+)/sessions/([^/]+)$)");

    const std::string& m = request.method;
    const std::string& p = request.path;
    std::smatch match;

    if (p == "/api/health" && m == "GET") return health();
    if (p == "/api/auth/register" && m == "POST") return registration(parse_body(request.body));
    if (p == "/api/auth/login" && m == "POST") return login(parse_body(request.body));
    if (p == "/api/searches" && m == "POST") return search(request, parse_body(request.body));
    if (std::regex_match(p, match, document_re) && m == "GET") return document(request, match[1]);
    if (std::regex_match(p, match, notes_re)) {
        std::string pmid = match[1];
        if (m == "PUT") return put_note(request, pmid, parse_body(request.body));
        if (m == "GET") {
            auto user = required_user(request);
            auto note = store_->get_note(user, pmid);
            if (!note) return not_found("no note for this document");
            return {200, {{"pmid", pmid}, {"text", *note}}};
        }
    }
    if (p == "/api/history") {
        if (m == "GET") {
            auto user = required_user(request);
            return {200, store_->list_history(user, positive_int(request.query, "page", 1))};
        }
        if (m == "DELETE") {
            auto user = required_user(request);
            return {200, {{"deleted", store_->delete_history(user)}}};
        }
    }
    if (std::regex_match(p, match, history_item_re) && m == "GET") {
        auto user = required_user(request);
        auto payload = store_->get_session(user, match[1]);
        if (!payload) return not_found("no such session in your history");
        return {200, nlohmann::json::parse(*payload)};
    }
    if (p == "/api/folders") {
        if (m == "POST") {
            auto user = required_user(request);
            auto body = parse_body(request.body);
            return {201, store_->create_folder(user, string_field(body, "name"))};
        }
        if (m == "GET") {
            auto user = required_user(request);
            return {200, {{"folders", store_->list_folders(user)}}};
        }
    }
    if (std::regex_match(p, match, assign_re) && m == "PUT") {
        auto user = required_user(request);
        std::string folder_id = match[1];
        store_->assign_folder(user, folder_id, match[2]);
        for (const auto& f : store_->list_folders(user)) {
            if (f.folder_id == folder_id) return {200, f};
        }
        return not_found("no such folder");
    }
    if (p == "/api/topics" && m == "GET") {
        auto user = required_user(request);
        auto limit = static_cast<std::size_t>(
            positive_int(request.query, "limit", static_cast<int>(kDefaultTopicLimit)));
        return {200, {{"topics", store_->topic_frequencies(user, limit)}}};
    }
    return not_found("no route for " + m + " " + p);
}

ApiResponse ApiService::health() {
    return {200, {{"status", "ok"}, {"config", pipeline_->config()}}};
}

ApiResponse ApiService::registration(const nlohmann::json& body) {
    auto user = store_->create_user(string_field(body, "display_name"), string_field(body, "password"));
    return {201, account_body(user, store_->issue_token(user.user_id))};
}

ApiResponse ApiService::login(const nlohmann::json& body) {
    auto user = store_->verify_credentials(string_field(body, "display_name"),
                                           string_field(body, "password"));
    if (!user) return {401, api_error_body("unauthorized", "unknown name or wrong password")};
    return {200, account_body(*user, store_->issue_token(user->user_id))};
}

ApiResponse ApiService::search(const ApiRequest& request, const nlohmann::json& body) {
    auto user = optional_user(request);
    auto question = HealthQuestion::make(string_field(body, "question"), std::chrono::system_clock::now());

    search_slots_.acquire();
    SearchSession session;
    try {
        session = pipeline_->run_or_empty(question);
    } catch (...) {
        search_slots_.release();
        throw;
    }
    search_slots_.release();

    bool persisted = false;
    if (!session.no_evidence) {
        remember_documents(session);
        try {
            persisted = store_->save_session(user, session);
        } catch (const Error& e) {
            session.diagnostics.push_back(std::string("history not saved: ") + e.what());
        }
    }
    auto out = session_to_json(session);
    out["persisted"] = persisted;
    return {200, out};
}

ApiResponse ApiService::document(const ApiRequest& request, const std::string& pmid) {
    require(is_valid_pmid(pmid), "'" + pmid + "' is not a PubMed identifier");
    auto user = optional_user(request);
    std::optional<nlohmann::json> detail;
    if (user) {
        if (auto stored = store_->find_document(*user, pmid)) detail = nlohmann::json::parse(*stored);
    }
    if (!detail) detail = recent_document(pmid);
    if (!detail) return not_found("document " + pmid + " has not appeared in a search");
    nlohmann::json out = *detail;
    out["note"] = nullptr;
    if (user) {
        if (auto note = store_->get_note(*user, pmid)) out["note"] = *note;
    }
    return {200, out};
}

ApiResponse ApiService::put_note(const ApiRequest& request, const std::string& pmid,
                                 const nlohmann::json& body) {
    auto user = required_user(request);
    require(is_valid_pmid(pmid), "'" + pmid + "' is not a PubMed identifier");
    std::string text = string_field(body, "text");
    require(text.size() <= kMaxNoteLength, "note is too long");
    store_->put_note(user, pmid, text);
    return {200, {{"pmid", pmid}, {"text", text}}};
}

void ApiService::remember_documents(const SearchSession& session) {
    std::lock_guard lock(recent_mutex_);
    for (std::size_t i = 0; i < session.selected.size(); ++i) {
        const auto& pmid = session.selected[i].pmid;
        if (auto it = recent_index_.find(pmid); it != recent_index_.end()) {
            recent_.erase(it->second);
            recent_index_.erase(it);
        }
        recent_.emplace_front(pmid, document_detail(session, i));
        recent_index_[pmid] = recent_.begin();
        while (recent_.size() > options_.recent_document_capacity) {
            recent_index_.erase(recent_.back().first);
            recent_.pop_back();
        }
    }
}

std::optional<nlohmann::json> ApiService::recent_document(const std::string& pmid) {
    std::lock_guard lock(recent_mutex_);
    auto it = recent_index_.find(pmid);
    if (it == recent_index_.end()) return std::nullopt;
    return it->second->second;
}

void serve_http(ApiService& service, const ServerOptions& options,
                const std::function<void(int)>& on_listen) {
    httplib::Server server;
    auto cors = [&options](httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", options.cors_origin);
        res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
    };
    auto dispatch = [&service, cors](const httplib::Request& req, httplib::Response& res) {
        ApiRequest request;
        request.method = req.method;
        request.path = req.path;
        request.body = req.body;
        for (const auto& [k, v] : req.params) request.query[k] = v;
        std::string auth = req.get_header_value("Authorization");
        if (starts_with_ci(auth, "Bearer ")) request.bearer = std::string(trim(auth.substr(7)));
        ApiResponse response = service.handle(request);
        cors(res);
        res.status = response.status;
        res.set_content(response.body.dump(), "application/json");
    };
    server.Get(".*", dispatch);
    server.Post(".*", dispatch);
    server.Put(".*", dispatch);
    server.Delete(".*", dispatch);
    server.Options(".*", [cors](const httplib::Request&, httplib::Response& res) {
        cors(res);
        res.status = 204;
    });

    int port = options.port;
    if (port == 0) {
        port = server.bind_to_any_port(options.host);
    } else if (!server.bind_to_port(options.host, port)) {
        port = -1;
    }
    if (port <= 0) fail(ErrorCode::InvalidArgument, "cannot bind " + options.host + ":" +
                                                         std::to_string(options.port));
    if (on_listen) on_listen(port);
    server.listen_after_bind();
}

}  // namespace medqa
