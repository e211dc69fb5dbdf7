#include "medqa/kv_store.hpp"

#include "sqlite_util.hpp"

#include <mutex>

namespace medqa {

std::optional<std::string> MemoryKvStore::get(const std::string& key) {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void MemoryKvStore::put(const std::string& key, const std::string& value) {
    std::unique_lock lock(mutex_);
    entries_[key] = value;
}

std::size_t MemoryKvStore::size() {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

SqliteKvStore::SqliteKvStore(const std::string& path)
    : db_(std::make_unique<sqlite::Database>(path)) {
    db_->exec("CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value BLOB NOT NULL)");
}

SqliteKvStore::~SqliteKvStore() = default;

std::optional<std::string> SqliteKvStore::get(const std::string& key) {
    auto stmt = db_->prepare("SELECT value FROM kv WHERE key = ?1");
    stmt.bind(1, key);
    if (!stmt.step()) return std::nullopt;
    return stmt.text(0);
}

void SqliteKvStore::put(const std::string& key, const std::string& value) {
    std::lock_guard lock(db_->write_mutex());
    auto stmt = db_->prepare("INSERT OR REPLACE INTO kv (key, value) VALUES (?1, ?2)");
    stmt.bind(1, key).bind(2, value);
    stmt.step();
}

std::size_t SqliteKvStore::size() {
    auto stmt = db_->prepare("SELECT COUNT(*) FROM kv");
    stmt.step();
    return static_cast<std::size_t>(stmt.int64(0));
}

}  // namespace medqa
