#include "medqa/evidence_extractor.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cctype>

namespace medqa {

namespace {

// Compared case-insensitively against the text ending at the period.
constexpr std::array<std::string_view, 22> kAbbreviations{
    "et al.", "e.g.", "i.e.", "vs.", "etc.", "cf.", "approx.", "fig.", "figs.", "ref.", "refs.",
    "dr.", "prof.", "no.", "vol.", "ca.", "resp.", "mr.", "mrs.", "ms.", "st.", "jr."};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool ends_with_abbreviation(std::string_view text, std::size_t period) {
    std::string_view head = text.substr(0, period + 1);
    for (std::string_view abbr : kAbbreviations) {
        if (head.size() < abbr.size()) continue;
        std::size_t start = head.size() - abbr.size();
        if (!starts_with_ci(head.substr(start), abbr)) continue;
        // The abbreviation must begin a word.
        if (start == 0 || !std::isalnum(static_cast<unsigned char>(head[start - 1]))) return true;
    }
    return false;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

}  // namespace

void to_json(nlohmann::json& j, const EvidenceHighlight& h) {
    j = nlohmann::json{{"pmid", h.pmid},
                       {"sentence_index", h.sentence_index},
                       {"sentence", h.sentence},
                       {"similarity", h.similarity}};
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    auto push = [&](std::size_t begin, std::size_t end) {
        while (begin < end && is_space(text[begin])) ++begin;
        while (end > begin && is_space(text[end - 1])) --end;
        if (begin < end) spans.emplace_back(begin, end);
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i + 1;
        while (end < text.size() && is_closer(text[end])) ++end;
        std::size_t next = end;
        if (next >= text.size() || !is_space(text[next])) continue;
        while (next < text.size() && is_space(text[next])) ++next;
        if (next >= text.size()) break;
        std::size_t first = next;
        while (first < text.size() && is_opener(text[first])) ++first;
        if (first >= text.size()) break;
        unsigned char lead = static_cast<unsigned char>(text[first]);
        if (!std::isupper(lead) && !std::isdigit(lead)) continue;
        if (c == '.' && ends_with_abbreviation(text, i)) continue;
        push(start, end);
        start = next;
        i = next - 1;
    }
    push(start, text.size());
    return spans;
}

std::vector<std::string> split_sentences(std::string_view abstract) {
    std::vector<std::string> sentences;
    for (auto [b, e] : sentence_spans(abstract)) sentences.emplace_back(abstract.substr(b, e - b));
    return sentences;
}

EvidenceHighlight best_sentence(const HealthQuestion& question, const StudyRecord& doc,
                                Embedder& embedder) {
    auto sentences = split_sentences(doc.abstract);
    require(!sentences.empty(), "study " + doc.pmid + " has no abstract sentences");

    std::vector<std::string> texts;
    texts.reserve(sentences.size() + 1);
    texts.push_back(question.text());
    texts.insert(texts.end(), sentences.begin(), sentences.end());
    auto vectors = embedder.embed(texts);

    EvidenceHighlight best;
    best.pmid = doc.pmid;
    bool have = false;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        double s = candidate_similarity(vectors[0], vectors[i + 1]);
        if (!have || s > best.similarity) {
            best.sentence_index = i;
            best.sentence = sentences[i];
            best.similarity = s;
            have = true;
        }
    }
    return best;
}

}  // namespace medqa
