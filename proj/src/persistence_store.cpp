#include "medqa/persistence_store.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"
#include "sqlite_util.hpp"

#include <nlohmann/json.hpp>
#include <sodium.h>

#include <algorithm>

namespace medqa {

namespace {

constexpr std::size_t kMaxNameLength = 64;
constexpr std::size_t kMinPasswordLength = 8;
constexpr std::size_t kMaxFolderName = 100;

std::string now_utc() { return format_utc(std::chrono::system_clock::now()); }

std::string checked_name(const std::string& raw, std::size_t max, const std::string& what) {
    std::string name = collapse_whitespace(raw);
    require(!name.empty(), what + " must not be blank");
    require(name.size() <= max, what + " is longer than " + std::to_string(max) + " characters");
    return name;
}

std::string random_token() {
    unsigned char bytes[32];
    randombytes_buf(bytes, sizeof bytes);
    char hex[sizeof bytes * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, bytes, sizeof bytes);
    return hex;
}

void require_page(int page) { require(page >= 1, "page numbers start at 1"); }

bool topic_order(const TopicCount& a, const TopicCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.tag < b.tag;
}

}  // namespace

void to_json(nlohmann::json& j, const SessionSummary& s) {
    j = nlohmann::json{{"session_id", s.session_id},
                       {"question", s.question},
                       {"created_at", s.created_at},
                       {"study_count", s.study_count}};
}

void to_json(nlohmann::json& j, const HistoryPage& p) {
    j = nlohmann::json{
        {"page", p.page}, {"page_size", p.page_size}, {"total", p.total}, {"sessions", p.sessions}};
}

void to_json(nlohmann::json& j, const Folder& f) {
    j = nlohmann::json{{"folder_id", f.folder_id}, {"name", f.name}, {"session_ids", f.session_ids}};
}

void to_json(nlohmann::json& j, const TopicCount& t) {
    j = nlohmann::json{{"tag", t.tag}, {"count", t.count}};
}

HashCost HashCost::interactive() {
    return {crypto_pwhash_OPSLIMIT_INTERACTIVE, crypto_pwhash_MEMLIMIT_INTERACTIVE};
}

HashCost HashCost::minimum() { return {crypto_pwhash_OPSLIMIT_MIN, crypto_pwhash_MEMLIMIT_MIN}; }

SessionRecord SessionRecord::from(const SearchSession& session) {
    SessionRecord r;
    r.session_id = session.session_id;
    r.question = session.question;
    r.created_at = format_utc(session.created_at);
    r.payload = session_to_json(session).dump();
    for (std::size_t i = 0; i < session.selected.size(); ++i) {
        const auto& study = session.selected[i];
        r.documents.push_back({study.pmid, static_cast<int>(i + 1), document_detail(session, i).dump()});
        for (const auto& tag : study.tags) ++r.tags[tag];
    }
    return r;
}

// ---- Store --------------------------------------------------------------

UserAccount Store::create_user(const std::string& display_name, const std::string& password) {
    if (sodium_init() < 0) fail(ErrorCode::StorageUnavailable, "libsodium failed to initialize");
    UserAccount account;
    account.display_name = checked_name(display_name, kMaxNameLength, "display name");
    require(password.size() >= kMinPasswordLength,
            "password must have at least " + std::to_string(kMinPasswordLength) + " characters");
    if (user_by_name(account.display_name)) {
        fail(ErrorCode::Conflict, "display name already registered");
    }
    char hash[crypto_pwhash_STRBYTES];
    if (crypto_pwhash_str(hash, password.data(), password.size(), cost_.ops, cost_.mem) != 0) {
        fail(ErrorCode::StorageUnavailable, "password hashing ran out of memory");
    }
    account.user_id = random_id();
    account.credential_hash = hash;
    account.created_at = now_utc();
    insert_user(account);
    return account;
}

std::optional<UserAccount> Store::verify_credentials(const std::string& display_name,
                                                     const std::string& password) {
    if (sodium_init() < 0) fail(ErrorCode::StorageUnavailable, "libsodium failed to initialize");
    auto account = user_by_name(collapse_whitespace(display_name));
    if (!account) return std::nullopt;
    if (crypto_pwhash_str_verify(account->credential_hash.c_str(), password.data(), password.size()) !=
        0) {
        return std::nullopt;
    }
    return account;
}

std::string Store::issue_token(const std::string& user_id) {
    if (sodium_init() < 0) fail(ErrorCode::StorageUnavailable, "libsodium failed to initialize");
    if (!user_exists(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    std::string token = random_token();
    insert_token(sha256_hex(token), user_id);
    return token;
}

std::optional<std::string> Store::user_for_token(const std::string& token) {
    if (token.empty()) return std::nullopt;
    return token_owner(sha256_hex(token));
}

bool Store::save_session(const std::optional<std::string>& user_id, const SearchSession& session) {
    if (!user_id) return false;
    if (!user_exists(*user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    insert_session(*user_id, SessionRecord::from(session));
    return true;
}

// ---- MemoryStore --------------------------------------------------------

void MemoryStore::insert_user(const UserAccount& account) {
    std::unique_lock lock(mutex_);
    for (const auto& [_, u] : users_) {
        if (u.display_name == account.display_name) {
            fail(ErrorCode::Conflict, "display name already registered");
        }
    }
    users_[account.user_id] = account;
    count_writes();
}

std::optional<UserAccount> MemoryStore::user_by_name(const std::string& display_name) {
    std::shared_lock lock(mutex_);
    for (const auto& [_, u] : users_) {
        if (u.display_name == display_name) return u;
    }
    return std::nullopt;
}

void MemoryStore::insert_token(const std::string& token_hash, const std::string& user_id) {
    std::unique_lock lock(mutex_);
    tokens_[token_hash] = user_id;
    count_writes();
}

std::optional<std::string> MemoryStore::token_owner(const std::string& token_hash) {
    std::shared_lock lock(mutex_);
    auto it = tokens_.find(token_hash);
    if (it == tokens_.end()) return std::nullopt;
    return it->second;
}

bool MemoryStore::user_exists(const std::string& user_id) {
    std::shared_lock lock(mutex_);
    return users_.count(user_id) > 0;
}

void MemoryStore::insert_session(const std::string& user_id, const SessionRecord& record) {
    std::unique_lock lock(mutex_);
    if (sessions_.count(record.session_id)) fail(ErrorCode::Conflict, "session already stored");
    sessions_[record.session_id] = StoredSession{user_id, next_seq_++, record};
    count_writes(1 + record.documents.size() + record.tags.size());
}

HistoryPage MemoryStore::list_history(const std::string& user_id, int page) {
    require_page(page);
    std::shared_lock lock(mutex_);
    std::vector<const StoredSession*> mine;
    for (const auto& [_, s] : sessions_) {
        if (s.user_id == user_id) mine.push_back(&s);
    }
    std::sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->seq > b->seq; });
    HistoryPage out;
    out.page = page;
    out.total = static_cast<std::int64_t>(mine.size());
    std::size_t begin = static_cast<std::size_t>(page - 1) * kHistoryPageSize;
    for (std::size_t i = begin; i < mine.size() && i < begin + kHistoryPageSize; ++i) {
        const auto& r = mine[i]->record;
        out.sessions.push_back({r.session_id, r.question, r.created_at, r.documents.size()});
    }
    return out;
}

std::optional<std::string> MemoryStore::get_session(const std::string& user_id,
                                                    const std::string& session_id) {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end() || it->second.user_id != user_id) return std::nullopt;
    return it->second.record.payload;
}

std::int64_t MemoryStore::delete_history(const std::string& user_id) {
    std::unique_lock lock(mutex_);
    if (!users_.count(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    std::int64_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (it->second.user_id != user_id) {
            ++it;
            continue;
        }
        for (auto& [_, f] : folders_) {
            auto& ids = f.session_ids;
            ids.erase(std::remove(ids.begin(), ids.end(), it->first), ids.end());
        }
        it = sessions_.erase(it);
        ++removed;
    }
    if (removed) count_writes(static_cast<std::size_t>(removed));
    return removed;
}

Folder MemoryStore::create_folder(const std::string& user_id, const std::string& raw_name) {
    std::string name = checked_name(raw_name, kMaxFolderName, "folder name");
    std::unique_lock lock(mutex_);
    if (!users_.count(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    for (const auto& [_, f] : folders_) {
        if (f.owner == user_id && f.name == name) fail(ErrorCode::Conflict, "folder name already used");
    }
    Folder folder{random_id(), user_id, name, {}};
    folders_[folder.folder_id] = folder;
    folder_order_.push_back(folder.folder_id);
    count_writes();
    return folder;
}

std::vector<Folder> MemoryStore::list_folders(const std::string& user_id) {
    std::shared_lock lock(mutex_);
    std::vector<Folder> out;
    for (const auto& id : folder_order_) {
        const auto& f = folders_.at(id);
        if (f.owner == user_id) out.push_back(f);
    }
    return out;
}

void MemoryStore::assign_folder(const std::string& user_id, const std::string& folder_id,
                                const std::string& session_id) {
    std::unique_lock lock(mutex_);
    auto f = folders_.find(folder_id);
    if (f == folders_.end()) fail(ErrorCode::NotFound, "no such folder");
    if (f->second.owner != user_id) fail(ErrorCode::Unauthorized, "folder belongs to another user");
    auto s = sessions_.find(session_id);
    if (s == sessions_.end()) fail(ErrorCode::NotFound, "no such session");
    if (s->second.user_id != user_id) fail(ErrorCode::Unauthorized, "session belongs to another user");
    auto& ids = f->second.session_ids;
    if (std::find(ids.begin(), ids.end(), session_id) != ids.end()) return;
    ids.push_back(session_id);
    count_writes();
}

void MemoryStore::put_note(const std::string& user_id, const std::string& pmid,
                           const std::string& text) {
    std::unique_lock lock(mutex_);
    if (!users_.count(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    notes_[{user_id, pmid}] = text;
    count_writes();
}

std::optional<std::string> MemoryStore::get_note(const std::string& user_id, const std::string& pmid) {
    std::shared_lock lock(mutex_);
    auto it = notes_.find({user_id, pmid});
    if (it == notes_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> MemoryStore::find_document(const std::string& user_id,
                                                      const std::string& pmid) {
    std::shared_lock lock(mutex_);
    const StoredSession* newest = nullptr;
    const SessionRecord::Document* doc = nullptr;
    for (const auto& [_, s] : sessions_) {
        if (s.user_id != user_id || (newest && newest->seq > s.seq)) continue;
        for (const auto& d : s.record.documents) {
            if (d.pmid == pmid) {
                newest = &s;
                doc = &d;
            }
        }
    }
    if (!doc) return std::nullopt;
    return doc->detail;
}

std::vector<TopicCount> MemoryStore::topic_frequencies(const std::string& user_id, std::size_t limit) {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::int64_t> totals;
    for (const auto& [_, s] : sessions_) {
        if (s.user_id != user_id) continue;
        for (const auto& [tag, n] : s.record.tags) totals[tag] += n;
    }
    std::vector<TopicCount> out;
    for (const auto& [tag, n] : totals) out.push_back({tag, n});
    std::sort(out.begin(), out.end(), topic_order);
    if (out.size() > limit) out.resize(limit);
    return out;
}

std::size_t MemoryStore::rows_referencing(const std::string& user_id) {
    std::shared_lock lock(mutex_);
    std::size_t rows = 0;
    for (const auto& [_, s] : sessions_) {
        if (s.user_id == user_id) rows += 1 + s.record.documents.size() + s.record.tags.size();
    }
    for (const auto& [_, f] : folders_) {
        for (const auto& sid : f.session_ids) {
            auto it = sessions_.find(sid);
            if (it == sessions_.end() || it->second.user_id == user_id) ++rows;
        }
    }
    return rows;
}

// ---- SqliteStore --------------------------------------------------------

namespace {

class Transaction {
public:
    explicit Transaction(sqlite::Database& db) : db_(db), lock_(db.write_mutex()) {
        db_.exec("BEGIN IMMEDIATE");
    }
    ~Transaction() {
        if (done_) return;
        try {
            db_.exec("ROLLBACK");
        } catch (const Error&) {
        }
    }
    void commit() {
        db_.exec("COMMIT");
        done_ = true;
    }

private:
    sqlite::Database& db_;
    std::lock_guard<std::mutex> lock_;
    bool done_ = false;
};

std::size_t run(sqlite::Database& db, sqlite::Statement& stmt) {
    stmt.step();
    return static_cast<std::size_t>(sqlite3_changes(db.handle()));
}

std::optional<std::string> owner_of(sqlite::Database& db, std::string_view table,
                                    std::string_view key_column, const std::string& key) {
    auto stmt = db.prepare("SELECT user_id FROM " + std::string(table) + " WHERE " +
                           std::string(key_column) + " = ?1");
    stmt.bind(1, key);
    if (!stmt.step()) return std::nullopt;
    return stmt.text(0);
}

}  // namespace

SqliteStore::SqliteStore(const std::string& path, HashCost cost)
    : Store(cost), db_(std::make_unique<sqlite::Database>(path)) {
    if (schema_version() < 1) {
        std::lock_guard lock(db_->write_mutex());
        db_->exec("BEGIN IMMEDIATE");
        try {
            db_->exec(initial_migration_sql());
            db_->exec("PRAGMA user_version = 1");
            db_->exec("COMMIT");
        } catch (const Error&) {
            db_->exec("ROLLBACK");
            throw;
        }
    }
}

SqliteStore::~SqliteStore() = default;

int SqliteStore::schema_version() {
    auto stmt = db_->prepare("PRAGMA user_version");
    stmt.step();
    return static_cast<int>(stmt.int64(0));
}

void SqliteStore::insert_user(const UserAccount& a) {
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare(
        "INSERT INTO users (user_id, display_name, credential_hash, created_at) VALUES (?1, ?2, ?3, ?4)");
    stmt.bind(1, a.user_id).bind(2, a.display_name).bind(3, a.credential_hash).bind(4, a.created_at);
    count_writes(run(*db_, stmt));
}

std::optional<UserAccount> SqliteStore::user_by_name(const std::string& display_name) {
    auto stmt = db_->prepare(
        "SELECT user_id, display_name, credential_hash, created_at FROM users WHERE display_name = ?1");
    stmt.bind(1, display_name);
    if (!stmt.step()) return std::nullopt;
    return UserAccount{stmt.text(0), stmt.text(1), stmt.text(2), stmt.text(3)};
}

void SqliteStore::insert_token(const std::string& token_hash, const std::string& user_id) {
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare(
        "INSERT INTO auth_tokens (token_hash, user_id, created_at) VALUES (?1, ?2, ?3)");
    stmt.bind(1, token_hash).bind(2, user_id).bind(3, now_utc());
    count_writes(run(*db_, stmt));
}

std::optional<std::string> SqliteStore::token_owner(const std::string& token_hash) {
    return owner_of(*db_, "auth_tokens", "token_hash", token_hash);
}

bool SqliteStore::user_exists(const std::string& user_id) {
    return owner_of(*db_, "users", "user_id", user_id).has_value();
}

void SqliteStore::insert_session(const std::string& user_id, const SessionRecord& r) {
    Transaction tx(*db_);
    std::size_t writes = 0;
    auto seq = db_->prepare("SELECT COALESCE(MAX(seq), 0) + 1 FROM sessions");
    seq.step();
    auto session = db_->prepare(
        "INSERT INTO sessions (session_id, user_id, question, created_at, seq, payload) "
        "VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
    session.bind(1, r.session_id).bind(2, user_id).bind(3, r.question).bind(4, r.created_at);
    session.bind(5, seq.int64(0)).bind(6, r.payload);
    writes += run(*db_, session);
    for (const auto& d : r.documents) {
        auto doc = db_->prepare(
            "INSERT OR REPLACE INTO session_documents (session_id, pmid, rank, detail) "
            "VALUES (?1, ?2, ?3, ?4)");
        doc.bind(1, r.session_id).bind(2, d.pmid).bind(3, static_cast<std::int64_t>(d.rank));
        doc.bind(4, d.detail);
        writes += run(*db_, doc);
    }
    for (const auto& [tag, n] : r.tags) {
        auto t = db_->prepare(
            "INSERT INTO session_tags (session_id, tag, occurrences) VALUES (?1, ?2, ?3)");
        t.bind(1, r.session_id).bind(2, tag).bind(3, n);
        writes += run(*db_, t);
    }
    tx.commit();
    count_writes(writes);
}

HistoryPage SqliteStore::list_history(const std::string& user_id, int page) {
    require_page(page);
    HistoryPage out;
    out.page = page;
    auto total = db_->prepare("SELECT COUNT(*) FROM sessions WHERE user_id = ?1");
    total.bind(1, user_id);
    total.step();
    out.total = total.int64(0);
    auto rows = db_->prepare(
        "SELECT s.session_id, s.question, s.created_at, "
        "(SELECT COUNT(*) FROM session_documents d WHERE d.session_id = s.session_id) "
        "FROM sessions s WHERE s.user_id = ?1 ORDER BY s.seq DESC LIMIT ?2 OFFSET ?3");
    rows.bind(1, user_id)
        .bind(2, static_cast<std::int64_t>(kHistoryPageSize))
        .bind(3, static_cast<std::int64_t>(page - 1) * kHistoryPageSize);
    while (rows.step()) {
        out.sessions.push_back(
            {rows.text(0), rows.text(1), rows.text(2), static_cast<std::size_t>(rows.int64(3))});
    }
    return out;
}

std::optional<std::string> SqliteStore::get_session(const std::string& user_id,
                                                    const std::string& session_id) {
    auto stmt = db_->prepare("SELECT payload FROM sessions WHERE session_id = ?1 AND user_id = ?2");
    stmt.bind(1, session_id).bind(2, user_id);
    if (!stmt.step()) return std::nullopt;
    return stmt.text(0);
}

std::int64_t SqliteStore::delete_history(const std::string& user_id) {
    if (!user_exists(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    Transaction tx(*db_);
    std::size_t writes = 0;
    constexpr const char* kMine = "(SELECT session_id FROM sessions WHERE user_id = ?1)";
    for (const char* table : {"folder_sessions", "session_documents", "session_tags"}) {
        auto stmt = db_->prepare(std::string("DELETE FROM ") + table + " WHERE session_id IN " + kMine);
        stmt.bind(1, user_id);
        writes += run(*db_, stmt);
    }
    auto sessions = db_->prepare("DELETE FROM sessions WHERE user_id = ?1");
    sessions.bind(1, user_id);
    std::size_t removed = run(*db_, sessions);
    tx.commit();
    count_writes(writes + removed);
    return static_cast<std::int64_t>(removed);
}

Folder SqliteStore::create_folder(const std::string& user_id, const std::string& raw_name) {
    std::string name = checked_name(raw_name, kMaxFolderName, "folder name");
    if (!user_exists(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    Folder folder{random_id(), user_id, name, {}};
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare(
        "INSERT INTO folders (folder_id, user_id, name, created_at) VALUES (?1, ?2, ?3, ?4)");
    stmt.bind(1, folder.folder_id).bind(2, user_id).bind(3, name).bind(4, now_utc());
    try {
        count_writes(run(*db_, stmt));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Conflict) fail(ErrorCode::Conflict, "folder name already used");
        throw;
    }
    return folder;
}

std::vector<Folder> SqliteStore::list_folders(const std::string& user_id) {
    std::vector<Folder> out;
    auto folders = db_->prepare("SELECT folder_id, name FROM folders WHERE user_id = ?1 ORDER BY rowid");
    folders.bind(1, user_id);
    while (folders.step()) out.push_back({folders.text(0), user_id, folders.text(1), {}});
    for (auto& f : out) {
        auto members = db_->prepare(
            "SELECT session_id FROM folder_sessions WHERE folder_id = ?1 ORDER BY rowid");
        members.bind(1, f.folder_id);
        while (members.step()) f.session_ids.push_back(members.text(0));
    }
    return out;
}

void SqliteStore::assign_folder(const std::string& user_id, const std::string& folder_id,
                                const std::string& session_id) {
    auto folder_owner = owner_of(*db_, "folders", "folder_id", folder_id);
    if (!folder_owner) fail(ErrorCode::NotFound, "no such folder");
    if (*folder_owner != user_id) fail(ErrorCode::Unauthorized, "folder belongs to another user");
    auto session_owner = owner_of(*db_, "sessions", "session_id", session_id);
    if (!session_owner) fail(ErrorCode::NotFound, "no such session");
    if (*session_owner != user_id) fail(ErrorCode::Unauthorized, "session belongs to another user");
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare(
        "INSERT OR IGNORE INTO folder_sessions (folder_id, session_id) VALUES (?1, ?2)");
    stmt.bind(1, folder_id).bind(2, session_id);
    count_writes(run(*db_, stmt));
}

void SqliteStore::put_note(const std::string& user_id, const std::string& pmid,
                           const std::string& text) {
    if (!user_exists(user_id)) fail(ErrorCode::Unauthorized, "unknown user");
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare(
        "INSERT INTO notes (user_id, pmid, body, updated_at) VALUES (?1, ?2, ?3, ?4) "
        "ON CONFLICT (user_id, pmid) DO UPDATE SET body = excluded.body, updated_at = excluded.updated_at");
    stmt.bind(1, user_id).bind(2, pmid).bind(3, text).bind(4, now_utc());
    count_writes(run(*db_, stmt));
}

std::optional<std::string> SqliteStore::get_note(const std::string& user_id, const std::string& pmid) {
    auto stmt = db_->prepare("SELECT body FROM notes WHERE user_id = ?1 AND pmid = ?2");
    stmt.bind(1, user_id).bind(2, pmid);
    if (!stmt.step()) return std::nullopt;
    return stmt.text(0);
}

std::optional<std::string> SqliteStore::find_document(const std::string& user_id,
                                                      const std::string& pmid) {
    auto stmt = db_->prepare(
        "SELECT d.detail FROM session_documents d JOIN sessions s ON s.session_id = d.session_id "
        "WHERE s.user_id = ?1 AND d.pmid = ?2 ORDER BY s.seq DESC LIMIT 1");
    stmt.bind(1, user_id).bind(2, pmid);
    if (!stmt.step()) return std::nullopt;
    return stmt.text(0);
}

std::vector<TopicCount> SqliteStore::topic_frequencies(const std::string& user_id, std::size_t limit) {
    auto stmt = db_->prepare(
        "SELECT t.tag, SUM(t.occurrences) AS n FROM session_tags t "
        "JOIN sessions s ON s.session_id = t.session_id WHERE s.user_id = ?1 "
        "GROUP BY t.tag ORDER BY n DESC, t.tag ASC LIMIT ?2");
    stmt.bind(1, user_id).bind(2, static_cast<std::int64_t>(limit));
    std::vector<TopicCount> out;
    while (stmt.step()) out.push_back({stmt.text(0), stmt.int64(1)});
    return out;
}

std::unique_ptr<Store> open_store(const std::string& database_url, HashCost cost) {
    if (database_url.empty()) return std::make_unique<MemoryStore>(cost);
    constexpr std::string_view kScheme = "sqlite://";
    std::string path = database_url;
    if (starts_with_ci(path, kScheme)) path = path.substr(kScheme.size());
    require(!path.empty(), "DATABASE_URL has no path");
    return std::make_unique<SqliteStore>(path, cost);
}

}  // namespace medqa
