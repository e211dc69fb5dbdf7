#pragma once

#include "medqa/pubmed_client.hpp"
#include "medqa/query_builder.hpp"
#include "medqa/semantic_ranker.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace medqa {

struct EvidenceHighlight {
    std::string pmid;
    std::size_t sentence_index = 0;
    std::string sentence;
    double similarity = 0.0;

    bool operator==(const EvidenceHighlight&) const = default;
};

void to_json(nlohmann::json& j, const EvidenceHighlight& h);

/// Rule-based splitter. A boundary is '.', '!' or '?' (optionally followed
/// by closing quotes/brackets) then whitespace then an uppercase letter or a
/// digit, possibly behind opening quotes/brackets. Boundaries after a fixed
/// list of abbreviations are suppressed.
/// Sentences are trimmed substrings of the input; none is empty.
std::vector<std::string> split_sentences(std::string_view abstract);

// Byte offsets [begin, end) of each sentence in the input.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view abstract);

// Argmax cosine between question and each sentence; ties go to the lower index.
EvidenceHighlight best_sentence(const HealthQuestion& question, const StudyRecord& doc,
                                Embedder& embedder);

}  // namespace medqa
