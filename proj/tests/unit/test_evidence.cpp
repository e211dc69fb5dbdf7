#include "medqa/error.hpp"
#include "medqa/evidence_extractor.hpp"
#include "medqa/fixture_transport.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace medqa;
using namespace medqa::testing;

namespace {

const HealthQuestion kQuestion = HealthQuestion::make("Does vitamin C alleviate colds?", {});

Embedder hashing_embedder() {
    return Embedder(std::make_shared<HashingEmbedder>(), std::make_shared<MemoryKvStore>());
}

}  // namespace

TEST(SplitSentences, BasicBoundaries) {
    EXPECT_EQ(split_sentences("One here. Two there! Three? 4 is a number."),
              (std::vector<std::string>{"One here.", "Two there!", "Three?", "4 is a number."}));
    EXPECT_EQ(split_sentences("He said \"stop.\" Then left. (See above.) Next."),
              (std::vector<std::string>{"He said \"stop.\"", "Then left.", "(See above.)", "Next."}));
    EXPECT_TRUE(split_sentences("   ").empty());
    EXPECT_EQ(split_sentences("no terminal punctuation"), (std::vector<std::string>{"no terminal punctuation"}));
}

TEST(SplitSentences, AbbreviationsAndDecimalsDoNotSplit) {
    EXPECT_EQ(split_sentences("As shown by Smith et al. 2013 the effect held. Compared vs. Placebo it did. "
                              "Values were 2.5 mg, e.g. Zinc. Done."),
              (std::vector<std::string>{"As shown by Smith et al. 2013 the effect held.",
                                        "Compared vs. Placebo it did.", "Values were 2.5 mg, e.g. Zinc.",
                                        "Done."}));
    EXPECT_EQ(split_sentences("The trial.lower case continues. Ends here."),
              (std::vector<std::string>{"The trial.lower case continues.", "Ends here."}));
    // A word merely ending in an abbreviation still splits.
    EXPECT_EQ(split_sentences("We tuned the piano. It worked. Total."),
              (std::vector<std::string>{"We tuned the piano.", "It worked.", "Total."}));
}

TEST(SplitSentences, SpansAreVerbatimSubstrings) {
    std::string text = "  First part.  Second part (n = 12).\n\nThird, final! ";
    auto spans = sentence_spans(text);
    auto sentences = split_sentences(text);
    ASSERT_EQ(spans.size(), sentences.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        EXPECT_EQ(text.substr(spans[i].first, spans[i].second - spans[i].first), sentences[i]);
    }
}

TEST(SplitSentences, FixtureAbstractsReassemble) {
    PubMedClient client(fast_client(std::make_shared<FixtureTransport>(fixtures_dir())), {});
    std::vector<std::string> pmids;
    for (int i = 0; i < 52; ++i) pmids.push_back(std::to_string(99100001 + i));
    for (const auto& r : client.fetch_records(pmids).records) {
        auto sentences = split_sentences(r.abstract);
        if (r.abstract.empty()) {
            EXPECT_TRUE(sentences.empty());
            continue;
        }
        EXPECT_GE(sentences.size(), 4u) << r.pmid;
        EXPECT_EQ(collapse_whitespace(join(sentences, " ")), collapse_whitespace(r.abstract)) << r.pmid;
        for (const auto& s : sentences) {
            EXPECT_NE(r.abstract.find(s), std::string::npos);
            EXPECT_NE(s.rfind("2013)", 0), 0u) << "split inside citation in " << r.pmid;
        }
    }
}

TEST(BestSentence, PicksArgmaxAgainstQuestion) {
    auto doc = make_record("42", "t",
                           "Participants were enrolled in winter. Vitamin C did alleviate colds in this trial. "
                           "Follow-up lasted a year.");
    auto embedder = hashing_embedder();
    auto h = best_sentence(kQuestion, doc, embedder);
    EXPECT_EQ(h.pmid, "42");
    EXPECT_EQ(h.sentence_index, 1u);
    EXPECT_EQ(h.sentence, "Vitamin C did alleviate colds in this trial.");

    // Oracle: argmax over independently embedded sentences, first index on ties.
    auto sentences = split_sentences(doc.abstract);
    auto q = embedder.embed_one(kQuestion.text());
    double best = -2;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        double c = candidate_similarity(q, embedder.embed_one(sentences[i]));
        if (c > best) best = c, best_i = i;
    }
    EXPECT_EQ(h.sentence_index, best_i);
    EXPECT_NEAR(h.similarity, best, 1e-12);
}

TEST(BestSentence, TiesGoToFirstAndJsonShape) {
    auto doc = make_record("1", "t", "Nothing relevant here. Also nothing here.");
    auto embedder = hashing_embedder();
    auto h = best_sentence(kQuestion, doc, embedder);
    EXPECT_EQ(h.sentence_index, 0u);
    nlohmann::json j = h;
    EXPECT_EQ(j["sentence_index"], 0);
    EXPECT_EQ(j["pmid"], "1");
    EXPECT_THROW(best_sentence(kQuestion, make_record("2", "t", ""), embedder), Error);
}
