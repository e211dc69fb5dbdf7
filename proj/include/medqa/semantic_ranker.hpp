#pragma once

#include "medqa/http.hpp"
#include "medqa/kv_store.hpp"
#include "medqa/pubmed_client.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace medqa {

inline constexpr std::size_t kDefaultSelectK = 20;
inline constexpr std::size_t kHashingDimension = 256;

class EmbeddingVector {
public:
    EmbeddingVector() = default;
    // Rejects empty or non-finite input with InvalidArgument.
    EmbeddingVector(std::vector<double> values, std::string provider_id);

    const std::vector<double>& values() const { return values_; }
    std::size_t dimension() const { return values_.size(); }
    const std::string& provider_id() const { return provider_id_; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
    std::string provider_id_;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    // One vector per input text, same order.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

/// Offline embedder: lowercase ASCII, tokens are maximal runs of [a-z0-9],
/// each token adds 1 to bucket FNV-1a-64(token) mod dimension, and the count
/// vector is L2-normalized. A text without tokens maps to the zero vector.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = kHashingDimension);

    std::string id() const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

    static std::uint64_t fnv1a(std::string_view bytes);

private:
    std::size_t dimension_;
};

/// OpenAI-compatible embeddings endpoint: POST {"model", "input": [...]}
/// answered by {"data": [{"index", "embedding": [...]}]}.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(std::shared_ptr<ResilientClient> client, std::string url, std::string model,
                   std::size_t expected_dimension = 0,
                   std::chrono::milliseconds timeout = std::chrono::seconds(20));

    std::string id() const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    std::shared_ptr<ResilientClient> client_;
    std::string url_;
    std::string model_;
    std::size_t expected_dimension_;
    std::chrono::milliseconds timeout_;
};

/// Provider front with a content-addressed cache keyed by
/// (provider id, SHA-256 of the text).
class Embedder {
public:
    Embedder(std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<KvStore> cache);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    const EmbeddingProvider& provider() const { return *provider_; }

private:
    std::string cache_key(const std::string& text) const;

    std::shared_ptr<EmbeddingProvider> provider_;
    std::shared_ptr<KvStore> cache_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ScoredDocument {
    std::string pmid;
    double similarity = 0.0;

    bool operator==(const ScoredDocument&) const = default;
};

struct RankedSelection {
    EmbeddingVector query_embedding;
    std::vector<ScoredDocument> scored;  // similarity desc (to 1e-9), pmid asc on ties
    std::vector<std::string> selected;   // k-prefix of scored
};

// Numeric order for pmid strings.
bool pmid_less(const std::string& a, const std::string& b);

std::string document_text(const StudyRecord& record);

// Cosine that scores a zero-norm candidate as 0 instead of failing.
double candidate_similarity(const EmbeddingVector& query, const EmbeddingVector& candidate);

RankedSelection rank_top_k(const std::string& query, const std::vector<StudyRecord>& docs,
                           Embedder& embedder, std::size_t k = kDefaultSelectK);

}  // namespace medqa
