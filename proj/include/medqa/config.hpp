#pragma once

#include "medqa/chat_provider.hpp"
#include "medqa/enrichment_client.hpp"
#include "medqa/fixture_transport.hpp"
#include "medqa/pubmed_client.hpp"
#include "medqa/query_builder.hpp"
#include "medqa/semantic_ranker.hpp"

#include <nlohmann/json_fwd.hpp>

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace medqa {

struct PipelineConfig {
    int pool_size = kDefaultPoolSize;
    std::size_t select_k = kDefaultSelectK;
    std::size_t concurrency = 4;
    std::chrono::milliseconds retrieval_timeout{15000};
    std::chrono::milliseconds per_study_timeout{20000};
    std::chrono::milliseconds synthesis_timeout{60000};

    bool offline = false;
    std::string fixtures_dir;

    std::string expander_url;  // empty: offline fallback expander
    std::string embedder_url;  // empty: hashing embedder
    std::string embedder_model = "text-embedding-3-small";
    std::size_t embedder_dim = 0;  // 0: accept whatever the provider returns
    std::string llm_url;
    std::string llm_model = "gpt-4o-mini";
    std::string llm_api_key;

    std::string eutils_base = PubMedConfig{}.eutils_base;
    std::string oa_service = PubMedConfig{}.oa_service;
    std::string pubmed_api_key;
    std::string icite_base = EnrichmentConfig{}.icite_base;
    std::string s2_base = EnrichmentConfig{}.s2_base;
    std::string s2_api_key;

    std::string database_url;       // SQLite path; empty: in-memory store
    std::string record_cache_path;  // SQLite path for PubMed records; empty: in-memory
    int port = 8080;
    std::size_t max_concurrent_searches = 4;
    bool stage_trace = false;

    // Unknown keys are rejected so typos do not silently fall back to defaults.
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);

    using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
    // EXPANDER_URL, EMBEDDER_URL, EMBEDDER_DIM, LLM_URL, LLM_MODEL, LLM_API_KEY,
    // PUBMED_API_KEY, S2_API_KEY, OFFLINE, FIXTURES_DIR, DATABASE_URL, PORT.
    void apply_env(const EnvLookup& lookup);
    void apply_process_env();
};

void to_json(nlohmann::json& j, const PipelineConfig& c);

// Fixture tree shipped with the sources (compiled-in absolute path).
std::string default_fixtures_dir();

// Remote expander when configured and online; null selects the fallback.
std::unique_ptr<ConceptExpander> make_expander(const PipelineConfig& config);

/// Concrete providers built from a configuration. Offline mode swaps every
/// upstream for the fixture transport, the hashing embedder and the stub chat
/// provider, and disables rate gating.
struct PipelineServices {
    std::unique_ptr<ConceptExpander> expander;  // null: fallback expander
    std::shared_ptr<PubMedClient> pubmed;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<EnrichmentClient> enrichment;
    std::shared_ptr<ChatProvider> llm;
    std::shared_ptr<FixtureTransport> fixtures;  // set in offline mode

    static PipelineServices build(const PipelineConfig& config);
};

}  // namespace medqa
