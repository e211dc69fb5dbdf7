#include "medqa/semantic_ranker.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace medqa {

namespace {
constexpr double kTieResolution = 1e9;
}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values, std::string provider_id)
    : values_(std::move(values)), provider_id_(std::move(provider_id)) {
    require(!values_.empty(), "embedding must have positive dimension");
    for (double v : values_) require(std::isfinite(v), "embedding contains a non-finite value");
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    require(dimension_ > 0, "hashing dimension must be positive");
}

std::string HashingEmbedder::id() const { return "hashing-v1-" + std::to_string(dimension_); }

std::uint64_t HashingEmbedder::fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<EmbeddingVector> HashingEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> counts(dimension_, 0.0);
        std::string token;
        auto flush = [&] {
            if (!token.empty()) counts[fnv1a(token) % dimension_] += 1.0;
            token.clear();
        };
        for (unsigned char c : text) {
            char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
            if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) {
                token.push_back(lower);
            } else {
                flush();
            }
        }
        flush();
        double norm = std::sqrt(std::inner_product(counts.begin(), counts.end(), counts.begin(), 0.0));
        if (norm > 0.0) {
            for (double& v : counts) v /= norm;
        }
        out.emplace_back(std::move(counts), id());
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<ResilientClient> client, std::string url,
                               std::string model, std::size_t expected_dimension,
                               std::chrono::milliseconds timeout)
    : client_(std::move(client)),
      url_(std::move(url)),
      model_(std::move(model)),
      expected_dimension_(expected_dimension),
      timeout_(timeout) {}

std::string RemoteEmbedder::id() const { return "remote:" + model_ + "@" + url_; }

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    HttpRequest request;
    request.method = "POST";
    request.url = url_;
    request.timeout = timeout_;
    request.body = nlohmann::json{{"model", model_}, {"input", texts}}.dump();
    HttpResponse response;
    try {
        response = client_->send(request);
    } catch (const Error& e) {
        fail(ErrorCode::ProviderUnavailable, e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        fail(ErrorCode::ProviderUnavailable,
             "embedding provider returned HTTP " + std::to_string(response.status));
    }
    std::vector<std::vector<double>> rows(texts.size());
    try {
        auto body = nlohmann::json::parse(response.body);
        const auto& data = body.at("data");
        if (data.size() != texts.size()) {
            fail(ErrorCode::ProviderUnavailable, "embedding provider returned wrong vector count");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::size_t index = data[i].value("index", i);
            if (index >= rows.size()) fail(ErrorCode::ProviderUnavailable, "embedding index out of range");
            rows[index] = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ProviderUnavailable, std::string("malformed embedding response: ") + e.what());
    }
    std::size_t dim = expected_dimension_ ? expected_dimension_ : rows.front().size();
    std::vector<EmbeddingVector> out;
    for (auto& row : rows) {
        if (row.size() != dim) {
            fail(ErrorCode::DimensionMismatch, "embedding provider returned dimension " +
                                                   std::to_string(row.size()) + ", expected " +
                                                   std::to_string(dim));
        }
        out.emplace_back(std::move(row), id());
    }
    return out;
}

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<KvStore> cache)
    : provider_(std::move(provider)), cache_(std::move(cache)) {
    require(provider_ != nullptr, "embedder needs a provider");
    if (!cache_) cache_ = std::make_shared<MemoryKvStore>();
}

std::string Embedder::cache_key(const std::string& text) const {
    return "emb:" + provider_->id() + ":" + sha256_hex(text);
}

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) {
    for (const auto& t : texts) require(!t.empty(), "cannot embed empty text");

    std::vector<std::optional<EmbeddingVector>> result(texts.size());
    std::vector<std::string> pending;
    std::map<std::string, std::vector<std::size_t>> pending_slots;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (auto hit = cache_->get(cache_key(texts[i]))) {
            auto values = nlohmann::json::parse(*hit).get<std::vector<double>>();
            result[i] = EmbeddingVector(std::move(values), provider_->id());
            continue;
        }
        auto& slots = pending_slots[texts[i]];
        if (slots.empty()) pending.push_back(texts[i]);
        slots.push_back(i);
    }

    if (!pending.empty()) {
        auto fresh = provider_->embed_batch(pending);
        if (fresh.size() != pending.size()) {
            fail(ErrorCode::ProviderUnavailable, "embedding provider returned wrong vector count");
        }
        for (std::size_t j = 0; j < pending.size(); ++j) {
            cache_->put(cache_key(pending[j]), nlohmann::json(fresh[j].values()).dump());
            for (std::size_t slot : pending_slots[pending[j]]) result[slot] = fresh[j];
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(result.size());
    for (auto& r : result) out.push_back(std::move(*r));
    for (const auto& v : out) {
        if (v.dimension() != out.front().dimension()) {
            fail(ErrorCode::DimensionMismatch, "embeddings of inconsistent dimension");
        }
    }
    return out;
}

EmbeddingVector Embedder::embed_one(const std::string& text) { return embed({text}).front(); }

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        fail(ErrorCode::DimensionMismatch, "cosine of vectors with dimensions " +
                                               std::to_string(a.dimension()) + " and " +
                                               std::to_string(b.dimension()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        na += x[i] * x[i];
        nb += y[i] * y[i];
    }
    if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine of a zero vector");
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

double candidate_similarity(const EmbeddingVector& query, const EmbeddingVector& candidate) {
    bool zero = std::all_of(candidate.values().begin(), candidate.values().end(),
                            [](double v) { return v == 0.0; });
    return zero ? 0.0 : cosine(query, candidate);
}

bool pmid_less(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

std::string document_text(const StudyRecord& record) {
    return record.title + " " + record.abstract;
}

RankedSelection rank_top_k(const std::string& query, const std::vector<StudyRecord>& docs,
                           Embedder& embedder, std::size_t k) {
    require(!docs.empty(), "rank_top_k needs at least one document");
    require(k >= 1, "k must be at least 1");

    std::vector<std::string> texts;
    texts.reserve(docs.size() + 1);
    texts.push_back(query);
    for (const auto& d : docs) texts.push_back(document_text(d));
    auto vectors = embedder.embed(texts);

    RankedSelection selection;
    selection.query_embedding = vectors.front();
    bool query_zero = std::all_of(vectors.front().values().begin(), vectors.front().values().end(),
                                  [](double v) { return v == 0.0; });
    if (query_zero) fail(ErrorCode::ZeroVector, "query embedding is the zero vector");

    for (std::size_t i = 0; i < docs.size(); ++i) {
        selection.scored.push_back({docs[i].pmid, candidate_similarity(vectors.front(), vectors[i + 1])});
    }
    std::sort(selection.scored.begin(), selection.scored.end(),
              [](const ScoredDocument& a, const ScoredDocument& b) {
                  // Quantized so rounding noise cannot override the pmid tie-break.
                  auto qa = std::llround(a.similarity * kTieResolution);
                  auto qb = std::llround(b.similarity * kTieResolution);
                  if (qa != qb) return qa > qb;
                  return pmid_less(a.pmid, b.pmid);
              });
    std::size_t take = std::min(k, selection.scored.size());
    for (std::size_t i = 0; i < take; ++i) selection.selected.push_back(selection.scored[i].pmid);
    return selection;
}

}  // namespace medqa
