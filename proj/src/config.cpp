#include "medqa/config.hpp"

#include "medqa/error.hpp"
#include "medqa/stub_providers.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <set>

#ifndef MEDQA_FIXTURES_DIR
#define MEDQA_FIXTURES_DIR "fixtures"
#endif

namespace medqa {

namespace {

std::chrono::milliseconds millis(const nlohmann::json& j, const char* key,
                                 std::chrono::milliseconds fallback) {
    if (!j.contains(key)) return fallback;
    auto v = j.at(key).get<std::int64_t>();
    require(v > 0, std::string(key) + " must be positive");
    return std::chrono::milliseconds(v);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

bool truthy(const std::string& v) {
    std::string s = to_lower(trim(v));
    return s == "1" || s == "true" || s == "yes" || s == "on";
}

std::size_t parse_size(const std::string& name, const std::string& v) {
    try {
        std::size_t used = 0;
        long long n = std::stoll(v, &used);
        if (used == v.size() && n >= 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    fail(ErrorCode::InvalidArgument, name + " must be a non-negative integer");
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "pool_size", "select_k", "concurrency", "retrieval_timeout_ms", "per_study_timeout_ms",
        "synthesis_timeout_ms", "offline", "fixtures_dir", "expander_url", "embedder_url",
        "embedder_model", "embedder_dim", "llm_url", "llm_model", "llm_api_key", "eutils_base",
        "oa_service", "pubmed_api_key", "icite_base", "s2_base", "s2_api_key", "database_url",
        "record_cache_path", "port", "max_concurrent_searches", "stage_trace"};
    require(j.is_object(), "configuration must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        require(known.count(key) > 0, "unknown configuration key '" + key + "'");
    }
    PipelineConfig c;
    try {
        read(j, "pool_size", c.pool_size);
        read(j, "select_k", c.select_k);
        read(j, "concurrency", c.concurrency);
        c.retrieval_timeout = millis(j, "retrieval_timeout_ms", c.retrieval_timeout);
        c.per_study_timeout = millis(j, "per_study_timeout_ms", c.per_study_timeout);
        c.synthesis_timeout = millis(j, "synthesis_timeout_ms", c.synthesis_timeout);
        read(j, "offline", c.offline);
        read(j, "fixtures_dir", c.fixtures_dir);
        read(j, "expander_url", c.expander_url);
        read(j, "embedder_url", c.embedder_url);
        read(j, "embedder_model", c.embedder_model);
        read(j, "embedder_dim", c.embedder_dim);
        read(j, "llm_url", c.llm_url);
        read(j, "llm_model", c.llm_model);
        read(j, "llm_api_key", c.llm_api_key);
        read(j, "eutils_base", c.eutils_base);
        read(j, "oa_service", c.oa_service);
        read(j, "pubmed_api_key", c.pubmed_api_key);
        read(j, "icite_base", c.icite_base);
        read(j, "s2_base", c.s2_base);
        read(j, "s2_api_key", c.s2_api_key);
        read(j, "database_url", c.database_url);
        read(j, "record_cache_path", c.record_cache_path);
        read(j, "port", c.port);
        read(j, "max_concurrent_searches", c.max_concurrent_searches);
        read(j, "stage_trace", c.stage_trace);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("bad configuration value: ") + e.what());
    }
    require(c.pool_size >= 1 && c.pool_size <= kMaxSearchLimit, "pool_size must be in [1, 200]");
    require(c.select_k >= 1 && c.select_k <= 20, "select_k must be in [1, 20]");
    require(c.concurrency >= 1, "concurrency must be at least 1");
    require(c.max_concurrent_searches >= 1, "max_concurrent_searches must be at least 1");
    require(c.port > 0 && c.port < 65536, "port out of range");
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    require(!j.is_discarded(), "configuration file " + path + " is not valid JSON");
    return from_json(j);
}

void PipelineConfig::apply_env(const EnvLookup& lookup) {
    auto str = [&](const char* name, std::string& out) {
        if (auto v = lookup(name)) out = *v;
    };
    str("EXPANDER_URL", expander_url);
    str("EMBEDDER_URL", embedder_url);
    str("LLM_URL", llm_url);
    str("LLM_MODEL", llm_model);
    str("LLM_API_KEY", llm_api_key);
    str("PUBMED_API_KEY", pubmed_api_key);
    str("S2_API_KEY", s2_api_key);
    str("FIXTURES_DIR", fixtures_dir);
    str("DATABASE_URL", database_url);
    if (auto v = lookup("EMBEDDER_DIM")) embedder_dim = parse_size("EMBEDDER_DIM", *v);
    if (auto v = lookup("OFFLINE")) offline = truthy(*v);
    if (auto v = lookup("PORT")) {
        auto p = parse_size("PORT", *v);
        require(p > 0 && p < 65536, "PORT out of range");
        port = static_cast<int>(p);
    }
}

void PipelineConfig::apply_process_env() {
    apply_env([](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    });
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
    // Secrets are reported as present/absent only.
    j = nlohmann::json{{"pool_size", c.pool_size},
                       {"select_k", c.select_k},
                       {"concurrency", c.concurrency},
                       {"retrieval_timeout_ms", c.retrieval_timeout.count()},
                       {"per_study_timeout_ms", c.per_study_timeout.count()},
                       {"synthesis_timeout_ms", c.synthesis_timeout.count()},
                       {"offline", c.offline},
                       {"expander", c.expander_url.empty() ? "fallback" : c.expander_url},
                       {"embedder", c.embedder_url.empty() ? "hashing" : c.embedder_url},
                       {"llm", c.offline ? "stub" : c.llm_url},
                       {"pubmed_api_key", !c.pubmed_api_key.empty()},
                       {"s2_api_key", !c.s2_api_key.empty()},
                       {"max_concurrent_searches", c.max_concurrent_searches}};
}

std::string default_fixtures_dir() { return MEDQA_FIXTURES_DIR; }

std::unique_ptr<ConceptExpander> make_expander(const PipelineConfig& config) {
    if (config.offline || config.expander_url.empty()) return nullptr;
    return std::make_unique<RemoteExpander>(
        std::make_shared<ResilientClient>(std::make_shared<HttplibTransport>(), nullptr, RetryPolicy{},
                                          "expander"),
        config.expander_url);
}

PipelineServices PipelineServices::build(const PipelineConfig& config) {
    PipelineServices s;
    RetryPolicy retry;

    std::shared_ptr<HttpTransport> pubmed_transport;
    std::shared_ptr<HttpTransport> other_transport;
    std::shared_ptr<RateGate> pubmed_gate;
    if (config.offline) {
        s.fixtures = std::make_shared<FixtureTransport>(
            config.fixtures_dir.empty() ? default_fixtures_dir() : config.fixtures_dir);
        pubmed_transport = s.fixtures;
        other_transport = s.fixtures;
    } else {
        pubmed_transport = std::make_shared<HttplibTransport>();
        other_transport = pubmed_transport;
        pubmed_gate = make_pubmed_gate(!config.pubmed_api_key.empty());
    }

    PubMedConfig pm;
    pm.eutils_base = config.eutils_base;
    pm.oa_service = config.oa_service;
    pm.api_key = config.pubmed_api_key;
    pm.timeout = config.retrieval_timeout;
    std::shared_ptr<KvStore> record_store;
    if (config.record_cache_path.empty()) {
        record_store = std::make_shared<MemoryKvStore>();
    } else {
        record_store = std::make_shared<SqliteKvStore>(config.record_cache_path);
    }
    s.pubmed = std::make_shared<PubMedClient>(
        std::make_shared<ResilientClient>(pubmed_transport, pubmed_gate, retry, "pubmed"), pm,
        std::make_shared<RecordCache>(record_store));

    EnrichmentConfig ec;
    ec.icite_base = config.icite_base;
    ec.s2_base = config.s2_base;
    ec.s2_api_key = config.s2_api_key;
    ec.timeout = config.per_study_timeout;
    s.enrichment = std::make_shared<EnrichmentClient>(
        std::make_shared<ResilientClient>(other_transport, nullptr, retry, "icite"),
        std::make_shared<ResilientClient>(other_transport, nullptr, retry, "semantic-scholar"), ec);

    // Embeddings stay in process memory: a persistent cache would keep a
    // record of every question asked, including anonymous ones.
    std::shared_ptr<EmbeddingProvider> embedding;
    if (config.offline || config.embedder_url.empty()) {
        embedding = std::make_shared<HashingEmbedder>();
    } else {
        embedding = std::make_shared<RemoteEmbedder>(
            std::make_shared<ResilientClient>(other_transport, nullptr, retry, "embedder"),
            config.embedder_url, config.embedder_model, config.embedder_dim, config.per_study_timeout);
    }
    s.embedder = std::make_shared<Embedder>(embedding, std::make_shared<MemoryKvStore>());

    s.expander = make_expander(config);

    if (config.offline) {
        s.llm = std::make_shared<StubChatProvider>();
    } else {
        require(!config.llm_url.empty(), "LLM_URL is required unless running offline");
        s.llm = std::make_shared<OpenAiChatProvider>(
            std::make_shared<ResilientClient>(other_transport, nullptr, retry, "llm"), config.llm_url,
            config.llm_model, config.llm_api_key,
            ChatTimeouts{config.per_study_timeout, config.synthesis_timeout});
    }
    return s;
}

}  // namespace medqa
