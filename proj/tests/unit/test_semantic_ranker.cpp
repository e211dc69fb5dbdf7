#include "medqa/error.hpp"
#include "medqa/semantic_ranker.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace medqa;
using namespace medqa::testing;

namespace {

// Independent reference: token counts hashed into buckets, cosine on the
// raw count vectors (normalization cancels out).
std::vector<double> oracle_counts(const std::string& text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : tok) h = (h ^ c) * 0x100000001b3ULL;
        v[h % dim] += 1;
        tok.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return v;
}

double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return nb == 0 ? 0.0 : dot / std::sqrt(na * nb);
}

class CountingProvider final : public EmbeddingProvider {
public:
    std::string id() const override { return inner.id(); }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        batches.push_back(texts);
        return inner.embed_batch(texts);
    }
    HashingEmbedder inner;
    std::vector<std::vector<std::string>> batches;
};

Embedder hashing_embedder() {
    return Embedder(std::make_shared<HashingEmbedder>(), std::make_shared<MemoryKvStore>());
}

}  // namespace

TEST(HashingEmbedder, FnvReferenceValues) {
    EXPECT_EQ(HashingEmbedder::fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(HashingEmbedder::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(HashingEmbedder::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(HashingEmbedder, UnitNormOrZero) {
    HashingEmbedder e(64);
    auto v = e.embed_batch({"Vitamin C, vitamin c!", "--- ..."});
    double n = 0;
    for (double x : v[0].values()) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(v[0].dimension(), 64u);
    for (double x : v[1].values()) EXPECT_EQ(x, 0.0);
}

TEST(Cosine, EdgeCases) {
    EmbeddingVector a({1, 0}, "t"), b({0, 2}, "t"), z({0, 0}, "t"), c({1, 0, 0}, "t");
    EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
    EXPECT_THROW(cosine(a, c), Error);
    EXPECT_THROW(cosine(a, z), Error);
    EXPECT_DOUBLE_EQ(candidate_similarity(a, z), 0.0);
    EXPECT_THROW(EmbeddingVector({}, "t"), Error);
    EXPECT_THROW(EmbeddingVector({NAN}, "t"), Error);
}

TEST(RankTopK, MatchesBruteForceOracle) {
    std::mt19937 rng(7);
    const std::vector<std::string> vocab{"vitamin", "c", "cold", "zinc", "trial", "placebo", "sleep",
                                         "fever", "children", "adults", "dose", "symptom", "cough"};
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    auto sentence = [&](int n) {
        std::string s;
        for (int i = 0; i < n; ++i) s += vocab[word(rng)] + (i % 4 == 3 ? ". " : " ");
        return s;
    };
    for (int round = 0; round < 5; ++round) {
        std::vector<StudyRecord> docs;
        for (int i = 0; i < 50; ++i) {
            docs.push_back(make_record(std::to_string(1000 + (i * 37) % 500), sentence(4), sentence(20)));
        }
        std::string q = "Does vitamin C help a cold?";
        auto embedder = hashing_embedder();
        auto got = rank_top_k(q, docs, embedder, 20);

        auto qv = oracle_counts(q, kHashingDimension);
        std::vector<std::pair<double, std::string>> expected;
        for (const auto& d : docs) {
            expected.push_back({oracle_cosine(qv, oracle_counts(d.title + " " + d.abstract, kHashingDimension)),
                                d.pmid});
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            auto qa = std::llround(a.first * 1e9), qb = std::llround(b.first * 1e9);
            if (qa != qb) return qa > qb;
            return std::stoll(a.second) < std::stoll(b.second);
        });
        ASSERT_EQ(got.selected.size(), 20u);
        ASSERT_EQ(got.scored.size(), 50u);
        for (std::size_t i = 0; i < 20; ++i) {
            EXPECT_EQ(got.selected[i], expected[i].second) << "round " << round << " rank " << i;
            EXPECT_NEAR(got.scored[i].similarity, expected[i].first, 1e-9);
        }
    }
}

TEST(RankTopK, TiesBreakOnNumericPmid) {
    std::vector<StudyRecord> docs{make_record("10", "zinc", "zinc"), make_record("9", "zinc", "zinc"),
                                  make_record("100", "zinc", "zinc")};
    auto embedder = hashing_embedder();
    auto r = rank_top_k("zinc", docs, embedder, 2);
    EXPECT_EQ(r.selected, (std::vector<std::string>{"9", "10"}));
    EXPECT_TRUE(pmid_less("9", "10"));
}

TEST(RankTopK, ZeroVectors) {
    std::vector<StudyRecord> docs{make_record("1", "...", "!!!"), make_record("2", "zinc", "zinc cold")};
    auto embedder = hashing_embedder();
    auto r = rank_top_k("zinc", docs, embedder);
    EXPECT_EQ(r.selected, (std::vector<std::string>{"2", "1"}));
    EXPECT_EQ(r.scored[1].similarity, 0.0);
    try {
        rank_top_k("???", docs, embedder);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    }
}

TEST(Embedder, CachesByProviderAndText) {
    auto provider = std::make_shared<CountingProvider>();
    auto cache = std::make_shared<MemoryKvStore>();
    Embedder e(provider, cache);
    auto first = e.embed({"a b", "c", "a b"});
    ASSERT_EQ(provider->batches.size(), 1u);
    EXPECT_EQ(provider->batches[0], (std::vector<std::string>{"a b", "c"}));
    EXPECT_EQ(first[0], first[2]);
    auto second = e.embed({"c", "d"});
    ASSERT_EQ(provider->batches.size(), 2u);
    EXPECT_EQ(provider->batches[1], (std::vector<std::string>{"d"}));
    EXPECT_EQ(second[0], first[1]);
    EXPECT_EQ(cache->size(), 3u);
    EXPECT_THROW(e.embed({""}), Error);
}

TEST(RemoteEmbedder, ParsesIndexedRowsAndChecksDimension) {
    auto transport = std::make_shared<ScriptedTransport>([](const HttpRequest& r) {
        auto body = nlohmann::json::parse(r.body);
        EXPECT_EQ(body["model"], "m");
        return HttpResponse{200, R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})"};
    });
    RemoteEmbedder e(fast_client(transport), "http://emb.test/v1/embeddings", "m", 2);
    auto v = e.embed_batch({"x", "y"});
    EXPECT_EQ(v[0].values(), (std::vector<double>{1, 0}));
    EXPECT_EQ(v[1].values(), (std::vector<double>{0, 1}));

    RemoteEmbedder wrong_dim(fast_client(transport), "http://emb.test/v1/embeddings", "m", 3);
    try {
        wrong_dim.embed_batch({"x", "y"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
}

TEST(RemoteEmbedder, FailuresAreProviderUnavailable) {
    for (HttpResponse r : {HttpResponse{500, ""}, HttpResponse{401, "no"}, HttpResponse{200, "{}"},
                           HttpResponse{200, R"({"data":[]})"}}) {
        RemoteEmbedder e(fast_client(ScriptedTransport::sequence({r})), "http://emb.test/e", "m");
        try {
            e.embed_batch({"x"});
            FAIL() << r.status << r.body;
        } catch (const Error& err) {
            EXPECT_EQ(err.code(), ErrorCode::ProviderUnavailable) << r.body;
        }
    }
}
