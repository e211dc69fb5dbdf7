#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

namespace medqa {

namespace sqlite {
class Database;
}

// Byte-string cache store. Reads may run concurrently; writes are serialized.
class KvStore {
public:
    virtual ~KvStore() = default;
    virtual std::optional<std::string> get(const std::string& key) = 0;
    virtual void put(const std::string& key, const std::string& value) = 0;
    virtual std::size_t size() = 0;
};

class MemoryKvStore final : public KvStore {
public:
    std::optional<std::string> get(const std::string& key) override;
    void put(const std::string& key, const std::string& value) override;
    std::size_t size() override;

private:
    std::shared_mutex mutex_;
    std::map<std::string, std::string> entries_;
};

class SqliteKvStore final : public KvStore {
public:
    // ":memory:" is accepted.
    explicit SqliteKvStore(const std::string& path);
    ~SqliteKvStore() override;

    std::optional<std::string> get(const std::string& key) override;
    void put(const std::string& key, const std::string& value) override;
    std::size_t size() override;

private:
    std::unique_ptr<sqlite::Database> db_;
};

}  // namespace medqa
