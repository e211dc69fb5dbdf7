#pragma once

#include "medqa/chat_provider.hpp"

#include <string>
#include <string_view>

namespace medqa {

struct CueScores {
    int support = 0;
    int refute = 0;
};

// Counts fixed support/refute cue phrases (case-insensitive). Refute cues are
// matched first and masked so "did not reduce" does not also count "reduce".
CueScores score_cues(std::string_view text);

/// Deterministic offline chat provider.
///
/// Stance requests get an unnormalized reply
/// {"support": s, "refute": r, "neutral": 1} from the abstract's cue counts.
/// Summary requests get a markdown answer that groups the numbered documents
/// by their cue-derived leaning, one referenced bullet per document.
class StubChatProvider final : public ChatProvider {
public:
    std::string id() const override { return "stub-chat-v1"; }
    std::string complete(const ChatRequest& request) override;
};

}  // namespace medqa
