#include "medqa/config.hpp"
#include "medqa/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <map>

using namespace medqa;

TEST(Config, DefaultsAndJsonOverrides) {
    auto c = PipelineConfig::from_json(nlohmann::json::object());
    EXPECT_EQ(c.pool_size, 50);
    EXPECT_EQ(c.select_k, 20u);
    EXPECT_EQ(c.retrieval_timeout, std::chrono::milliseconds(15000));
    EXPECT_EQ(c.per_study_timeout, std::chrono::milliseconds(20000));
    EXPECT_EQ(c.synthesis_timeout, std::chrono::milliseconds(60000));

    auto o = PipelineConfig::from_json({{"pool_size", 80}, {"select_k", 10}, {"synthesis_timeout_ms", 5000},
                                        {"offline", true}, {"stage_trace", true}});
    EXPECT_EQ(o.pool_size, 80);
    EXPECT_EQ(o.select_k, 10u);
    EXPECT_EQ(o.synthesis_timeout, std::chrono::milliseconds(5000));
    EXPECT_TRUE(o.offline);
    EXPECT_TRUE(o.stage_trace);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    for (nlohmann::json j : {nlohmann::json{{"pool_sise", 10}}, nlohmann::json{{"select_k", 21}},
                             nlohmann::json{{"select_k", 0}}, nlohmann::json{{"pool_size", 201}},
                             nlohmann::json{{"port", 70000}}, nlohmann::json{{"retrieval_timeout_ms", 0}},
                             nlohmann::json{{"offline", "maybe"}}, nlohmann::json::array()}) {
        EXPECT_THROW(PipelineConfig::from_json(j), Error) << j.dump();
    }
}

TEST(Config, EnvironmentOverrides) {
    std::map<std::string, std::string> env{{"LLM_URL", "http://llm.test/v1/chat/completions"},
                                           {"OFFLINE", "yes"},
                                           {"EMBEDDER_DIM", "384"},
                                           {"PORT", "9090"},
                                           {"PUBMED_API_KEY", "abc"}};
    PipelineConfig c;
    c.apply_env([&](const std::string& k) -> std::optional<std::string> {
        auto it = env.find(k);
        return it == env.end() ? std::nullopt : std::optional(it->second);
    });
    EXPECT_EQ(c.llm_url, env["LLM_URL"]);
    EXPECT_TRUE(c.offline);
    EXPECT_EQ(c.embedder_dim, 384u);
    EXPECT_EQ(c.port, 9090);
    EXPECT_EQ(c.pubmed_api_key, "abc");

    PipelineConfig bad;
    EXPECT_THROW(bad.apply_env([](const std::string& k) -> std::optional<std::string> {
        return k == "PORT" ? std::optional<std::string>("http") : std::nullopt;
    }),
                 Error);
}

TEST(Config, JsonHidesSecrets) {
    PipelineConfig c;
    c.llm_api_key = "sk-secret";
    c.pubmed_api_key = "pm-secret";
    auto dumped = nlohmann::json(c).dump();
    EXPECT_EQ(dumped.find("secret"), std::string::npos);
    EXPECT_TRUE(nlohmann::json(c)["pubmed_api_key"].get<bool>());
}

TEST(Config, ServiceConstruction) {
    PipelineConfig online;
    EXPECT_THROW(PipelineServices::build(online), Error);
    online.llm_url = "http://llm.test/v1/chat/completions";
    auto s = PipelineServices::build(online);
    EXPECT_EQ(s.llm->id(), "openai-compatible:gpt-4o-mini");
    EXPECT_FALSE(s.fixtures);
    EXPECT_FALSE(s.expander);

    auto offline = medqa::testing::offline_config();
    offline.expander_url = "http://expander.test";
    auto o = PipelineServices::build(offline);
    EXPECT_TRUE(o.fixtures);
    EXPECT_EQ(o.llm->id(), "stub-chat-v1");
    EXPECT_FALSE(o.expander);
    EXPECT_EQ(o.embedder->provider().id(), "hashing-v1-256");
}

TEST(Config, ShippedExampleLoads) {
    auto c = PipelineConfig::load(medqa::testing::fixtures_dir() + "/../config/medqa.example.json");
    EXPECT_FALSE(c.offline);
    EXPECT_EQ(c.select_k, 20u);
    EXPECT_EQ(c.database_url, "medqa.db");
    EXPECT_TRUE(c.llm_api_key.empty());
}
