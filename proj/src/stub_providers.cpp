#include "medqa/stub_providers.hpp"

#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <sstream>
#include <vector>

namespace medqa {

namespace {

constexpr std::array<std::string_view, 14> kRefuteCues{
    "did not reduce", "did not improve", "did not shorten", "did not prevent", "no significant",
    "not significantly", "no effect", "no benefit", "no difference", "failed to", "was not associated",
    "were not associated", "ineffective", "no evidence"};

constexpr std::array<std::string_view, 14> kSupportCues{
    "reduced", "reduces", "reduction", "shortened", "shorter", "improved", "improves", "effective",
    "benefit", "lower incidence", "significantly lower", "predictor", "associated with increased",
    "protective"};

int count_and_mask(std::string& haystack, std::string_view needle) {
    int n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        haystack.replace(pos, needle.size(), std::string(needle.size(), ' '));
        ++n;
    }
    return n;
}

struct StubDocument {
    int index = 0;
    std::string title;
    std::string abstract;
};

std::string after_label(std::string_view text, std::string_view label) {
    auto pos = text.find(label);
    if (pos == std::string_view::npos) return {};
    auto rest = text.substr(pos + label.size());
    return std::string(trim(rest.substr(0, rest.find("\n\n"))));
}

// "[i] Title\nAbstract" blocks following the "Documents:" line.
std::vector<StubDocument> parse_documents(std::string_view user) {
    std::vector<StubDocument> docs;
    auto start = user.find("Documents:");
    if (start == std::string_view::npos) return docs;
    std::istringstream in{std::string(user.substr(start))};
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() > 3 && line[0] == '[') {
            auto close = line.find("] ");
            if (close == std::string::npos) continue;
            StubDocument d;
            try {
                d.index = std::stoi(line.substr(1, close - 1));
            } catch (const std::exception&) {
                continue;
            }
            d.title = line.substr(close + 2);
            docs.push_back(std::move(d));
        } else if (!docs.empty() && !trim(line).empty()) {
            if (!docs.back().abstract.empty()) docs.back().abstract += " ";
            docs.back().abstract += std::string(trim(line));
        }
    }
    return docs;
}

std::string stance_reply(const ChatRequest& request) {
    auto scores = score_cues(after_label(request.user, "Abstract:"));
    nlohmann::json reply{{"support", scores.support},
                         {"refute", scores.refute},
                         {"neutral", 1},
                         {"rationale", "cue count: " + std::to_string(scores.support) +
                                           " supporting, " + std::to_string(scores.refute) +
                                           " contrary"}};
    return reply.dump();
}

std::string bullet_text(const StubDocument& d) {
    std::string title = collapse_whitespace(d.title);
    while (!title.empty() && (title.back() == '.' || title.back() == '?' || title.back() == '!')) {
        title.pop_back();
    }
    return "- " + title + " ([" + std::to_string(d.index) + "]).";
}

std::string summary_reply(const ChatRequest& request) {
    auto docs = parse_documents(request.user);
    std::vector<const StubDocument*> support, refute, neutral;
    for (const auto& d : docs) {
        auto s = score_cues(d.abstract);
        if (s.support > s.refute) {
            support.push_back(&d);
        } else if (s.refute > s.support) {
            refute.push_back(&d);
        } else {
            neutral.push_back(&d);
        }
    }
    std::ostringstream out;
    out << support.size() << " of " << docs.size()
        << " studies report findings in favour of the claim, while " << refute.size()
        << " report contrary findings.\n";
    auto section = [&](const char* heading, const std::vector<const StubDocument*>& group) {
        if (group.empty()) return;
        out << "\n### " << heading << "\n\n";
        for (const auto* d : group) out << bullet_text(*d) << "\n";
    };
    section("Supporting Evidence", support);
    section("Contrary Evidence", refute);
    section("Inconclusive Evidence", neutral);
    return out.str();
}

}  // namespace

CueScores score_cues(std::string_view text) {
    std::string lowered = to_lower(text);
    CueScores scores;
    for (auto cue : kRefuteCues) scores.refute += count_and_mask(lowered, cue);
    for (auto cue : kSupportCues) scores.support += count_and_mask(lowered, cue);
    return scores;
}

std::string StubChatProvider::complete(const ChatRequest& request) {
    return request.purpose == ChatPurpose::Stance ? stance_reply(request) : summary_reply(request);
}

}  // namespace medqa
