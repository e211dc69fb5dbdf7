#pragma once

#include "medqa/http.hpp"
#include "medqa/text.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace medqa {

inline constexpr std::size_t kMaxQuestionLength = 500;

class HealthQuestion {
public:
    // Trims, then rejects blank (EmptyQuestion) or over-long (QuestionTooLong) text.
    static HealthQuestion make(std::string_view text, Timestamp asked_at);

    const std::string& text() const { return text_; }
    Timestamp asked_at() const { return asked_at_; }

private:
    HealthQuestion(std::string text, Timestamp asked_at)
        : text_(std::move(text)), asked_at_(asked_at) {}

    std::string text_;
    Timestamp asked_at_;
};

/// Boolean expression over PubMed search terms. A leaf optionally carries a
/// field tag, e.g. `"review"[Publication Type]`.
struct QueryNode {
    enum class Kind { Term, And, Or };

    Kind kind = Kind::Term;
    std::string term;
    std::string field;
    std::vector<QueryNode> children;

    static QueryNode leaf(std::string term, std::string field = {});
    // Collapse to the single child when given one node.
    static QueryNode all_of(std::vector<QueryNode> children);
    static QueryNode any_of(std::vector<QueryNode> children);

    bool operator==(const QueryNode&) const = default;
};

// Throws InvalidArgument when a leaf is blank or an operator has < 2 children.
void validate(const QueryNode& node);

std::string render_query(const QueryNode& node);
QueryNode parse_query(std::string_view rendered);

inline const std::vector<std::string>& default_publication_filters() {
    static const std::vector<std::string> filters{"journal article", "review"};
    return filters;
}

struct BooleanQuery {
    QueryNode root;                    // full tree, filter group included
    std::vector<std::string> filters;  // publication types
    std::string rendered;

    static BooleanQuery build(std::vector<QueryNode> concepts,
                              std::vector<std::string> filters = default_publication_filters());
};

struct ConceptExpansion {
    enum class Origin { Provider, Fallback };

    std::string source_term;
    std::vector<std::string> alternatives;
    Origin origin = Origin::Fallback;
};

class ConceptExpander {
public:
    virtual ~ConceptExpander() = default;
    // Content concepts of the question, in question order.
    virtual std::vector<ConceptExpansion> expand(const HealthQuestion& question) = 0;
};

/// Offline expander: lowercases, splits on non-alphanumerics, drops stopwords
/// and groups tokens into phrases. Never proposes synonyms.
///
/// Grouping: a kept token joins the phrase of the kept token immediately
/// before it in the source when it is a modifier (one character or all
/// digits, as in "vitamin C" or "type 2") or when both are capitalized in
/// the source (sentence-initial capitals excluded). All-uppercase tokens keep
/// their case; everything else is lowercased.
class FallbackExpander final : public ConceptExpander {
public:
    std::vector<ConceptExpansion> expand(const HealthQuestion& question) override;
};

/// Remote expander. POSTs `{"text": question}` and expects a JSON array of
/// `{"term": ..., "alternatives": [...]}` in question order.
class RemoteExpander final : public ConceptExpander {
public:
    RemoteExpander(std::shared_ptr<ResilientClient> client, std::string url,
                   std::size_t max_alternatives = 0);
    std::vector<ConceptExpansion> expand(const HealthQuestion& question) override;

private:
    std::shared_ptr<ResilientClient> client_;
    std::string url_;
    std::size_t max_alternatives_;
};

bool is_stopword(std::string_view lowercase_token);

// Normalizes an expansion: drops blank/duplicate alternatives and any repeat
// of the source term (case-insensitive), keeping provider order.
ConceptExpansion normalize_expansion(ConceptExpansion expansion);

/// Builds the boolean query. `expander` may be null, in which case the
/// fallback is used. When the expander fails with ExpansionUnavailable (and
/// `allow_fallback` is set) or returns no concepts, the fallback expander is
/// used. `used_fallback` (when given) reports whether the fallback supplied
/// the concepts.
BooleanQuery expand_question(const HealthQuestion& question,
                             ConceptExpander* expander,
                             bool allow_fallback = true,
                             bool* used_fallback = nullptr);

}  // namespace medqa
