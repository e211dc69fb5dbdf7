#pragma once

#include "medqa/pipeline.hpp"

#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace medqa {

inline constexpr int kHistoryPageSize = 20;

struct UserAccount {
    std::string user_id;
    std::string display_name;
    std::string credential_hash;  // libsodium crypto_pwhash_str output
    std::string created_at;
};

struct SessionSummary {
    std::string session_id;
    std::string question;
    std::string created_at;
    std::size_t study_count = 0;
};

struct HistoryPage {
    int page = 1;
    int page_size = kHistoryPageSize;
    std::int64_t total = 0;
    std::vector<SessionSummary> sessions;  // newest first
};

struct Folder {
    std::string folder_id;
    std::string owner;
    std::string name;
    std::vector<std::string> session_ids;  // in assignment order
};

struct TopicCount {
    std::string tag;
    std::int64_t count = 0;
};

void to_json(nlohmann::json& j, const SessionSummary& s);
void to_json(nlohmann::json& j, const HistoryPage& p);
void to_json(nlohmann::json& j, const Folder& f);
void to_json(nlohmann::json& j, const TopicCount& t);

// Password hashing cost. Tests use the minimum to stay fast.
struct HashCost {
    unsigned long long ops;
    std::size_t mem;

    static HashCost interactive();
    static HashCost minimum();
};

// What a stored session consists of, derived from a finished SearchSession.
struct SessionRecord {
    struct Document {
        std::string pmid;
        int rank = 0;
        std::string detail;  // JSON
    };

    std::string session_id;
    std::string question;
    std::string created_at;
    std::string payload;  // session JSON
    std::vector<Document> documents;
    std::map<std::string, std::int64_t> tags;  // study tag -> occurrences

    static SessionRecord from(const SearchSession& session);
};

/// Accounts, history, folders and notes. Anonymous sessions are never
/// written. Every row-level write bumps write_count().
class Store {
public:
    explicit Store(HashCost cost) : cost_(cost) {}
    virtual ~Store() = default;

    // Conflict when the display name is taken.
    UserAccount create_user(const std::string& display_name, const std::string& password);
    std::optional<UserAccount> verify_credentials(const std::string& display_name,
                                                  const std::string& password);
    // Opaque bearer token; only its hash is kept.
    std::string issue_token(const std::string& user_id);
    std::optional<std::string> user_for_token(const std::string& token);

    // Persisted iff a user is given; returns whether anything was written.
    bool save_session(const std::optional<std::string>& user_id, const SearchSession& session);

    virtual HistoryPage list_history(const std::string& user_id, int page) = 0;
    virtual std::optional<std::string> get_session(const std::string& user_id,
                                                   const std::string& session_id) = 0;
    // Removes the user's sessions with their documents, tags and folder
    // memberships. Unauthorized for an unknown user.
    virtual std::int64_t delete_history(const std::string& user_id) = 0;

    // Conflict on a duplicate name for the same owner.
    virtual Folder create_folder(const std::string& user_id, const std::string& name) = 0;
    virtual std::vector<Folder> list_folders(const std::string& user_id) = 0;
    // Idempotent. NotFound for a missing folder or session, Unauthorized when
    // either belongs to someone else.
    virtual void assign_folder(const std::string& user_id, const std::string& folder_id,
                               const std::string& session_id) = 0;

    virtual void put_note(const std::string& user_id, const std::string& pmid,
                          const std::string& text) = 0;
    virtual std::optional<std::string> get_note(const std::string& user_id,
                                                const std::string& pmid) = 0;

    // Most recent stored detail for the pmid within the user's sessions.
    virtual std::optional<std::string> find_document(const std::string& user_id,
                                                     const std::string& pmid) = 0;

    // Study-tag frequencies over the user's stored sessions, most frequent first.
    virtual std::vector<TopicCount> topic_frequencies(const std::string& user_id,
                                                      std::size_t limit) = 0;

    std::size_t write_count() const { return writes_.load(); }

protected:
    virtual void insert_user(const UserAccount& account) = 0;
    virtual std::optional<UserAccount> user_by_name(const std::string& display_name) = 0;
    virtual void insert_token(const std::string& token_hash, const std::string& user_id) = 0;
    virtual std::optional<std::string> token_owner(const std::string& token_hash) = 0;
    virtual bool user_exists(const std::string& user_id) = 0;
    virtual void insert_session(const std::string& user_id, const SessionRecord& record) = 0;

    void count_writes(std::size_t n = 1) { writes_ += n; }

private:
    HashCost cost_;
    std::atomic<std::size_t> writes_{0};
};

class MemoryStore final : public Store {
public:
    explicit MemoryStore(HashCost cost = HashCost::interactive()) : Store(cost) {}

    HistoryPage list_history(const std::string& user_id, int page) override;
    std::optional<std::string> get_session(const std::string& user_id,
                                           const std::string& session_id) override;
    std::int64_t delete_history(const std::string& user_id) override;
    Folder create_folder(const std::string& user_id, const std::string& name) override;
    std::vector<Folder> list_folders(const std::string& user_id) override;
    void assign_folder(const std::string& user_id, const std::string& folder_id,
                       const std::string& session_id) override;
    void put_note(const std::string& user_id, const std::string& pmid, const std::string& text) override;
    std::optional<std::string> get_note(const std::string& user_id, const std::string& pmid) override;
    std::optional<std::string> find_document(const std::string& user_id,
                                             const std::string& pmid) override;
    std::vector<TopicCount> topic_frequencies(const std::string& user_id, std::size_t limit) override;

    // Rows (of any kind) that mention the user or one of their sessions.
    std::size_t rows_referencing(const std::string& user_id);

protected:
    void insert_user(const UserAccount& account) override;
    std::optional<UserAccount> user_by_name(const std::string& display_name) override;
    void insert_token(const std::string& token_hash, const std::string& user_id) override;
    std::optional<std::string> token_owner(const std::string& token_hash) override;
    bool user_exists(const std::string& user_id) override;
    void insert_session(const std::string& user_id, const SessionRecord& record) override;

private:
    struct StoredSession {
        std::string user_id;
        std::int64_t seq = 0;
        SessionRecord record;
    };

    std::shared_mutex mutex_;
    std::map<std::string, UserAccount> users_;  // by user_id
    std::map<std::string, std::string> tokens_;  // hash -> user_id
    std::map<std::string, StoredSession> sessions_;
    std::map<std::string, Folder> folders_;
    std::vector<std::string> folder_order_;
    std::map<std::pair<std::string, std::string>, std::string> notes_;
    std::int64_t next_seq_ = 1;
};

namespace sqlite {
class Database;
}

class SqliteStore final : public Store {
public:
    // Applies the bundled migrations. ":memory:" is accepted.
    explicit SqliteStore(const std::string& path, HashCost cost = HashCost::interactive());
    ~SqliteStore() override;

    HistoryPage list_history(const std::string& user_id, int page) override;
    std::optional<std::string> get_session(const std::string& user_id,
                                           const std::string& session_id) override;
    std::int64_t delete_history(const std::string& user_id) override;
    Folder create_folder(const std::string& user_id, const std::string& name) override;
    std::vector<Folder> list_folders(const std::string& user_id) override;
    void assign_folder(const std::string& user_id, const std::string& folder_id,
                       const std::string& session_id) override;
    void put_note(const std::string& user_id, const std::string& pmid, const std::string& text) override;
    std::optional<std::string> get_note(const std::string& user_id, const std::string& pmid) override;
    std::optional<std::string> find_document(const std::string& user_id,
                                             const std::string& pmid) override;
    std::vector<TopicCount> topic_frequencies(const std::string& user_id, std::size_t limit) override;

    int schema_version();

protected:
    void insert_user(const UserAccount& account) override;
    std::optional<UserAccount> user_by_name(const std::string& display_name) override;
    void insert_token(const std::string& token_hash, const std::string& user_id) override;
    std::optional<std::string> token_owner(const std::string& token_hash) override;
    bool user_exists(const std::string& user_id) override;
    void insert_session(const std::string& user_id, const SessionRecord& record) override;

private:
    std::unique_ptr<sqlite::Database> db_;
};

// Compiled-in schema from migrations/.
std::string_view initial_migration_sql();

// Empty URL: in-memory store. "sqlite://<path>" or a bare path: SQLite.
std::unique_ptr<Store> open_store(const std::string& database_url,
                                  HashCost cost = HashCost::interactive());

}  // namespace medqa
