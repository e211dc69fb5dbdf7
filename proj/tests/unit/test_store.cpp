#include "medqa/error.hpp"
#include "medqa/persistence_store.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sqlite3.h>

#include <algorithm>
#include <filesystem>
#include <thread>

using namespace medqa;
using namespace medqa::testing;

namespace {

SearchSession fake_session(const std::string& id, const std::string& question, int docs,
                           const std::vector<std::string>& tags = {"Ascorbic Acid", "Common Cold"}) {
    SearchSession s;
    s.session_id = id;
    s.question = question;
    s.created_at = std::chrono::sys_days{std::chrono::year{2024} / 6 / 11};
    s.query = BooleanQuery::build({QueryNode::leaf("zinc"), QueryNode::leaf("colds")});
    for (int i = 0; i < docs; ++i) {
        auto r = make_record(std::to_string(1000 + i), "Title " + std::to_string(i), "Abstract.", 2000 + i);
        r.tags = tags;
        if (i == 0) r.tags.push_back("Zinc");
        s.selected.push_back(r);
        s.similarities.push_back(1.0 - i * 0.01);
        s.assessments.push_back(unclassifiable_assessment(r.pmid));
        s.highlights.push_back(std::nullopt);
    }
    return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidArgument;
}

std::int64_t sqlite_count(const std::string& path, const std::string& sql,
                          const std::vector<std::string>& args = {}) {
    sqlite3* db = nullptr;
    EXPECT_EQ(sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr), SQLITE_OK);
    sqlite3_stmt* stmt = nullptr;
    EXPECT_EQ(sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr), SQLITE_OK) << sqlite3_errmsg(db);
    for (std::size_t i = 0; i < args.size(); ++i) {
        sqlite3_bind_text(stmt, static_cast<int>(i + 1), args[i].c_str(), -1, SQLITE_TRANSIENT);
    }
    std::int64_t n = -1;
    if (sqlite3_step(stmt) == SQLITE_ROW) n = sqlite3_column_int64(stmt, 0);
    sqlite3_finalize(stmt);
    sqlite3_close(db);
    return n;
}

enum class Backend { Memory, Sqlite };

class StoreTest : public ::testing::TestWithParam<Backend> {
protected:
    void SetUp() override {
        if (GetParam() == Backend::Memory) {
            store_ = std::make_unique<MemoryStore>(HashCost::minimum());
        } else {
            std::string name = ::testing::UnitTest::GetInstance()->current_test_info()->name();
            std::replace(name.begin(), name.end(), '/', '_');
            path_ = ::testing::TempDir() + "medqa_store_" + name + ".db";
            std::filesystem::remove(path_);
            store_ = std::make_unique<SqliteStore>(path_, HashCost::minimum());
        }
    }
    void TearDown() override {
        store_.reset();
        if (!path_.empty()) std::filesystem::remove(path_);
    }

    // Rows mentioning the user's history, counted outside the store's own API.
    std::int64_t history_rows(const std::string& user_id, const std::vector<std::string>& session_ids) {
        if (GetParam() == Backend::Memory) {
            return static_cast<std::int64_t>(static_cast<MemoryStore&>(*store_).rows_referencing(user_id));
        }
        std::int64_t rows = sqlite_count(path_, "SELECT COUNT(*) FROM sessions WHERE user_id = ?1", {user_id});
        for (const auto& sid : session_ids) {
            for (auto table : {"session_documents", "session_tags", "folder_sessions"}) {
                rows += sqlite_count(path_, std::string("SELECT COUNT(*) FROM ") + table + " WHERE session_id = ?1",
                                     {sid});
            }
        }
        return rows;
    }

    std::unique_ptr<Store> store_;
    std::string path_;
};

}  // namespace

TEST_P(StoreTest, AccountsAndTokens) {
    auto alice = store_->create_user("alice", "correct horse");
    EXPECT_EQ(alice.user_id.size(), 32u);
    EXPECT_EQ(alice.credential_hash.rfind("$argon2id$", 0), 0u);
    EXPECT_EQ(code_of([&] { store_->create_user("alice", "other pass"); }), ErrorCode::Conflict);
    EXPECT_EQ(code_of([&] { store_->create_user("", "password1"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { store_->create_user("bob", "short"); }), ErrorCode::InvalidArgument);

    EXPECT_EQ(store_->verify_credentials("alice", "correct horse")->user_id, alice.user_id);
    EXPECT_FALSE(store_->verify_credentials("alice", "wrong horse"));
    EXPECT_FALSE(store_->verify_credentials("nobody", "correct horse"));

    auto token = store_->issue_token(alice.user_id);
    EXPECT_GE(token.size(), 32u);
    EXPECT_EQ(store_->user_for_token(token), alice.user_id);
    EXPECT_FALSE(store_->user_for_token(token + "x"));
    if (GetParam() == Backend::Sqlite) {
        EXPECT_EQ(sqlite_count(path_, "SELECT COUNT(*) FROM auth_tokens WHERE token_hash = ?1", {token}), 0);
        EXPECT_EQ(sqlite_count(path_, "SELECT COUNT(*) FROM auth_tokens WHERE token_hash = ?1", {sha256_hex(token)}),
                  1);
    }
}

TEST_P(StoreTest, AnonymousSessionsAreNeverWritten) {
    auto before = store_->write_count();
    EXPECT_FALSE(store_->save_session(std::nullopt, fake_session("s1", "q", 3)));
    EXPECT_EQ(store_->write_count(), before);
    EXPECT_EQ(code_of([&] { store_->save_session(std::string("ghost"), fake_session("s2", "q", 1)); }),
              ErrorCode::Unauthorized);
}

TEST_P(StoreTest, HistoryPagination) {
    auto u = store_->create_user("carol", "password1");
    for (int i = 1; i <= 45; ++i) {
        EXPECT_TRUE(store_->save_session(u.user_id, fake_session("s" + std::to_string(i), "question " + std::to_string(i), 2)));
    }
    auto p1 = store_->list_history(u.user_id, 1);
    auto p2 = store_->list_history(u.user_id, 2);
    auto p3 = store_->list_history(u.user_id, 3);
    EXPECT_EQ(p1.total, 45);
    ASSERT_EQ(p1.sessions.size(), 20u);
    ASSERT_EQ(p2.sessions.size(), 20u);
    ASSERT_EQ(p3.sessions.size(), 5u);
    EXPECT_EQ(p1.sessions.front().session_id, "s45");
    // Page 2 holds the 21st to 40th most recent.
    EXPECT_EQ(p2.sessions.front().session_id, "s25");
    EXPECT_EQ(p2.sessions.back().session_id, "s6");
    EXPECT_EQ(p3.sessions.back().session_id, "s1");
    EXPECT_EQ(p1.sessions[0].study_count, 2u);
    EXPECT_TRUE(store_->list_history(u.user_id, 4).sessions.empty());
    EXPECT_EQ(code_of([&] { store_->list_history(u.user_id, 0); }), ErrorCode::InvalidArgument);
}

TEST_P(StoreTest, SessionsAreScopedToOwner) {
    auto a = store_->create_user("dave", "password1");
    auto b = store_->create_user("erin", "password1");
    store_->save_session(a.user_id, fake_session("sa", "Does zinc help?", 3));
    auto payload = store_->get_session(a.user_id, "sa");
    ASSERT_TRUE(payload);
    EXPECT_EQ(nlohmann::json::parse(*payload)["question"], "Does zinc help?");
    EXPECT_FALSE(store_->get_session(b.user_id, "sa"));
    EXPECT_TRUE(store_->find_document(a.user_id, "1001"));
    EXPECT_EQ(nlohmann::json::parse(*store_->find_document(a.user_id, "1001"))["rank"], 2);
    EXPECT_FALSE(store_->find_document(b.user_id, "1001"));
    EXPECT_EQ(code_of([&] { store_->save_session(a.user_id, fake_session("sa", "again", 1)); }), ErrorCode::Conflict);
}

TEST_P(StoreTest, FoldersAreIdempotentAndOwned) {
    auto a = store_->create_user("fay", "password1");
    auto b = store_->create_user("gus", "password1");
    store_->save_session(a.user_id, fake_session("s1", "q1", 1));
    store_->save_session(a.user_id, fake_session("s2", "q2", 1));
    store_->save_session(b.user_id, fake_session("t1", "q3", 1));
    auto f = store_->create_folder(a.user_id, "Colds");
    EXPECT_EQ(code_of([&] { store_->create_folder(a.user_id, "Colds"); }), ErrorCode::Conflict);
    EXPECT_NO_THROW(store_->create_folder(b.user_id, "Colds"));
    EXPECT_EQ(code_of([&] { store_->create_folder(a.user_id, "  "); }), ErrorCode::InvalidArgument);

    store_->assign_folder(a.user_id, f.folder_id, "s2");
    store_->assign_folder(a.user_id, f.folder_id, "s1");
    store_->assign_folder(a.user_id, f.folder_id, "s2");
    auto folders = store_->list_folders(a.user_id);
    ASSERT_EQ(folders.size(), 1u);
    EXPECT_EQ(folders[0].session_ids, (std::vector<std::string>{"s2", "s1"}));

    EXPECT_EQ(code_of([&] { store_->assign_folder(a.user_id, f.folder_id, "t1"); }), ErrorCode::Unauthorized);
    EXPECT_EQ(code_of([&] { store_->assign_folder(b.user_id, f.folder_id, "t1"); }), ErrorCode::Unauthorized);
    EXPECT_EQ(code_of([&] { store_->assign_folder(a.user_id, "missing", "s1"); }), ErrorCode::NotFound);
    EXPECT_EQ(code_of([&] { store_->assign_folder(a.user_id, f.folder_id, "missing"); }), ErrorCode::NotFound);
}

TEST_P(StoreTest, NotesUpsert) {
    auto a = store_->create_user("hal", "password1");
    EXPECT_FALSE(store_->get_note(a.user_id, "123"));
    store_->put_note(a.user_id, "123", "first");
    store_->put_note(a.user_id, "123", "second");
    EXPECT_EQ(store_->get_note(a.user_id, "123"), "second");
    EXPECT_EQ(code_of([&] { store_->put_note("ghost", "123", "x"); }), ErrorCode::Unauthorized);
}

TEST_P(StoreTest, TopicFrequencies) {
    auto a = store_->create_user("ivy", "password1");
    store_->save_session(a.user_id, fake_session("s1", "q1", 3));
    store_->save_session(a.user_id, fake_session("s2", "q2", 2, {"Common Cold"}));
    auto topics = store_->topic_frequencies(a.user_id, 10);
    ASSERT_EQ(topics.size(), 3u);
    EXPECT_EQ(topics[0].tag, "Common Cold");
    EXPECT_EQ(topics[0].count, 5);
    EXPECT_EQ(topics[1].tag, "Ascorbic Acid");
    EXPECT_EQ(topics[1].count, 3);
    EXPECT_EQ(topics[2].tag, "Zinc");
    EXPECT_EQ(topics[2].count, 2);
    EXPECT_EQ(store_->topic_frequencies(a.user_id, 1).size(), 1u);
}

TEST_P(StoreTest, DeleteHistoryRemovesEveryHistoryRow) {
    auto a = store_->create_user("jan", "password1");
    auto b = store_->create_user("kim", "password1");
    std::vector<std::string> ids{"s1", "s2", "s3"};
    for (const auto& id : ids) store_->save_session(a.user_id, fake_session(id, "q", 4));
    store_->save_session(b.user_id, fake_session("other", "q", 4));
    auto f = store_->create_folder(a.user_id, "F");
    store_->assign_folder(a.user_id, f.folder_id, "s1");
    store_->put_note(a.user_id, "1000", "keep me");
    ASSERT_GT(history_rows(a.user_id, ids), 0);

    EXPECT_EQ(store_->delete_history(a.user_id), 3);
    EXPECT_EQ(history_rows(a.user_id, ids), 0);
    EXPECT_EQ(store_->list_history(a.user_id, 1).total, 0);
    EXPECT_TRUE(store_->topic_frequencies(a.user_id, 5).empty());
    EXPECT_TRUE(store_->list_folders(a.user_id).at(0).session_ids.empty());
    EXPECT_EQ(store_->get_note(a.user_id, "1000"), "keep me");
    EXPECT_EQ(store_->list_history(b.user_id, 1).total, 1);
    EXPECT_EQ(store_->delete_history(a.user_id), 0);
    EXPECT_EQ(code_of([&] { store_->delete_history("ghost"); }), ErrorCode::Unauthorized);
}

TEST_P(StoreTest, ConcurrentSavesKeepEveryRow) {
    auto a = store_->create_user("lou", "password1");
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 10; ++i) {
                store_->save_session(a.user_id, fake_session("c" + std::to_string(t * 10 + i), "q", 2));
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(store_->list_history(a.user_id, 1).total, 40);
}

INSTANTIATE_TEST_SUITE_P(Backends, StoreTest, ::testing::Values(Backend::Memory, Backend::Sqlite),
                         [](const auto& info) { return info.param == Backend::Memory ? "Memory" : "Sqlite"; });

TEST(SqliteStore, MigrationsRunOnceAndPersist) {
    auto path = ::testing::TempDir() + "medqa_migrate.db";
    std::filesystem::remove(path);
    std::string user_id;
    {
        SqliteStore s(path, HashCost::minimum());
        EXPECT_EQ(s.schema_version(), 1);
        user_id = s.create_user("max", "password1").user_id;
        s.save_session(user_id, fake_session("p1", "q", 2));
    }
    {
        SqliteStore s(path, HashCost::minimum());
        EXPECT_EQ(s.schema_version(), 1);
        EXPECT_EQ(s.list_history(user_id, 1).total, 1);
        EXPECT_TRUE(s.verify_credentials("max", "password1"));
    }
    std::filesystem::remove(path);
}

TEST(OpenStore, SelectsBackendFromUrl) {
    EXPECT_TRUE(dynamic_cast<MemoryStore*>(open_store("", HashCost::minimum()).get()));
    EXPECT_TRUE(dynamic_cast<SqliteStore*>(open_store("sqlite://:memory:", HashCost::minimum()).get()));
    EXPECT_THROW(open_store("sqlite:///nonexistent-dir/x/y.db", HashCost::minimum()), Error);
}
