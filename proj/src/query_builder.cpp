#include "medqa/query_builder.hpp"

#include "medqa/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

namespace medqa {

namespace {

constexpr std::string_view kPublicationTypeField = "Publication Type";

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_safe_bare_term(std::string_view term) {
    for (unsigned char c : term) {
        if (!(is_word_byte(c) || c == ' ' || c == '-' || c == '\'')) return false;
    }
    for (const auto& word : split(term, ' ')) {
        if (word == "AND" || word == "OR" || word == "NOT") return false;
    }
    return !term.empty();
}

std::string strip_quotes(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c != '"') out.push_back(c);
    }
    return out;
}

std::string render_leaf(const QueryNode& node) {
    if (!node.field.empty()) {
        return "\"" + node.term + "\"[" + node.field + "]";
    }
    if (is_safe_bare_term(node.term)) return node.term;
    return "\"" + node.term + "\"";
}

std::string render_inner(const QueryNode& node);

std::string render_operand(const QueryNode& node) {
    if (node.kind == QueryNode::Kind::Term) return render_leaf(node);
    return "(" + render_inner(node) + ")";
}

std::string render_inner(const QueryNode& node) {
    if (node.kind == QueryNode::Kind::Term) return render_leaf(node);
    const char* op = node.kind == QueryNode::Kind::And ? " AND " : " OR ";
    std::string out;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += op;
        out += render_operand(node.children[i]);
    }
    return out;
}

class QueryParser {
public:
    explicit QueryParser(std::string_view input) : in_(input) {}

    QueryNode parse() {
        QueryNode node = parse_expression();
        skip_space();
        if (pos_ != in_.size()) error("unexpected trailing input");
        return node;
    }

private:
    [[noreturn]] void error(const std::string& what) const {
        fail(ErrorCode::QueryParse, what + " at offset " + std::to_string(pos_));
    }

    void skip_space() {
        while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) ++pos_;
    }

    // Returns "AND"/"OR" if the next word is an operator, without consuming.
    std::string_view peek_operator() {
        skip_space();
        for (std::string_view op : {"AND", "OR", "NOT"}) {
            if (in_.substr(pos_, op.size()) == op) {
                std::size_t end = pos_ + op.size();
                if (end == in_.size() || std::isspace(static_cast<unsigned char>(in_[end])) ||
                    in_[end] == '(') {
                    return op;
                }
            }
        }
        return {};
    }

    QueryNode parse_expression() {
        std::vector<QueryNode> operands;
        operands.push_back(parse_operand());
        std::string_view op_seen;
        while (true) {
            auto op = peek_operator();
            if (op.empty()) break;
            if (op == "NOT") error("NOT is not supported");
            if (!op_seen.empty() && op != op_seen) error("mixed AND/OR without parentheses");
            op_seen = op;
            pos_ += op.size();
            operands.push_back(parse_operand());
        }
        if (operands.size() == 1) return std::move(operands.front());
        QueryNode node;
        node.kind = op_seen == "AND" ? QueryNode::Kind::And : QueryNode::Kind::Or;
        node.children = std::move(operands);
        return node;
    }

    std::string parse_field() {
        // Caller is positioned on '['.
        auto close = in_.find(']', pos_);
        if (close == std::string_view::npos) error("unterminated field tag");
        std::string field(trim(in_.substr(pos_ + 1, close - pos_ - 1)));
        if (field.empty()) error("empty field tag");
        pos_ = close + 1;
        return field;
    }

    QueryNode parse_operand() {
        skip_space();
        if (pos_ >= in_.size()) error("expected term");
        if (!peek_operator().empty()) error("operator where a term was expected");
        char c = in_[pos_];
        if (c == '(') {
            ++pos_;
            QueryNode inner = parse_expression();
            skip_space();
            if (pos_ >= in_.size() || in_[pos_] != ')') error("expected ')'");
            ++pos_;
            return inner;
        }
        if (c == ')') error("unexpected ')'");
        if (c == '"') {
            auto close = in_.find('"', pos_ + 1);
            if (close == std::string_view::npos) error("unterminated quote");
            std::string term(in_.substr(pos_ + 1, close - pos_ - 1));
            pos_ = close + 1;
            std::string field;
            if (pos_ < in_.size() && in_[pos_] == '[') field = parse_field();
            if (collapse_whitespace(term).empty()) error("empty quoted term");
            return QueryNode::leaf(std::move(term), std::move(field));
        }
        std::vector<std::string> words;
        std::string field;
        while (true) {
            skip_space();
            if (pos_ >= in_.size()) break;
            char d = in_[pos_];
            if (d == '(' || d == ')' || d == '"') break;
            if (!peek_operator().empty()) break;
            std::size_t start = pos_;
            while (pos_ < in_.size() && !std::isspace(static_cast<unsigned char>(in_[pos_])) &&
                   in_[pos_] != '(' && in_[pos_] != ')' && in_[pos_] != '"' && in_[pos_] != '[') {
                ++pos_;
            }
            if (pos_ > start) words.emplace_back(in_.substr(start, pos_ - start));
            if (pos_ < in_.size() && in_[pos_] == '[') {
                field = parse_field();
                break;
            }
        }
        if (words.empty()) error("expected term");
        return QueryNode::leaf(join(words, " "), std::move(field));
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words{
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
        "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
        "each", "few", "for", "from", "further", "had", "has", "have",
        "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into",
        "is", "it", "its", "itself", "just", "me", "more", "most", "my", "no", "nor", "not",
        "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over", "own",
        "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
        "theirs", "them", "then", "there", "these", "they", "this", "those", "through", "to",
        "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
        "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
        "yours", "really", "may", "might", "must", "shall"};
    return words;
}

struct SourceToken {
    std::string text;
    bool sentence_initial = false;
    bool capitalized = false;
    bool all_upper = false;
    bool modifier = false;
    bool follows_break = false;  // punctuation between this and the previous token
};

std::vector<SourceToken> tokenize_question(std::string_view text) {
    std::vector<SourceToken> tokens;
    bool at_sentence_start = true;
    bool saw_break = false;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (!is_word_byte(c)) {
            if (c == '.' || c == '?' || c == '!') at_sentence_start = true;
            if (c == ',' || c == ';' || c == ':' || c == '(' || c == ')' || c == '.' ||
                c == '?' || c == '!' || c == '/') {
                saw_break = true;
            }
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        SourceToken tok;
        tok.text = std::string(text.substr(start, i - start));
        tok.sentence_initial = at_sentence_start;
        tok.follows_break = saw_break;
        bool has_alpha = false;
        bool has_lower = false;
        bool all_digits = true;
        for (unsigned char ch : tok.text) {
            if (std::isalpha(ch)) has_alpha = true;
            if (std::islower(ch)) has_lower = true;
            if (!std::isdigit(ch)) all_digits = false;
        }
        tok.all_upper = has_alpha && !has_lower;
        tok.capitalized = !tok.sentence_initial && std::isupper(static_cast<unsigned char>(tok.text[0]));
        tok.modifier = tok.text.size() == 1 || all_digits;
        tokens.push_back(std::move(tok));
        at_sentence_start = false;
        saw_break = false;
    }
    return tokens;
}

bool drop_token(const SourceToken& tok) {
    if (!tok.sentence_initial && tok.all_upper && tok.text.size() == 1 && tok.text != "I") {
        return false;
    }
    return is_stopword(to_lower(tok.text));
}

std::string leaf_form(const SourceToken& tok) {
    if (tok.all_upper && (tok.text.size() > 1 || !tok.sentence_initial)) return tok.text;
    return to_lower(tok.text);
}

}  // namespace

HealthQuestion HealthQuestion::make(std::string_view text, Timestamp asked_at) {
    auto trimmed = trim(text);
    if (trimmed.empty()) fail(ErrorCode::EmptyQuestion, "question is blank");
    if (trimmed.size() > kMaxQuestionLength) {
        fail(ErrorCode::QuestionTooLong,
             "question exceeds " + std::to_string(kMaxQuestionLength) + " characters");
    }
    return HealthQuestion(std::string(trimmed), asked_at);
}

QueryNode QueryNode::leaf(std::string term, std::string field) {
    QueryNode node;
    node.term = collapse_whitespace(strip_quotes(term));
    node.field = collapse_whitespace(field);
    return node;
}

QueryNode QueryNode::all_of(std::vector<QueryNode> children) {
    require(!children.empty(), "AND needs at least one operand");
    if (children.size() == 1) return std::move(children.front());
    QueryNode node;
    node.kind = Kind::And;
    node.children = std::move(children);
    return node;
}

QueryNode QueryNode::any_of(std::vector<QueryNode> children) {
    require(!children.empty(), "OR needs at least one operand");
    if (children.size() == 1) return std::move(children.front());
    QueryNode node;
    node.kind = Kind::Or;
    node.children = std::move(children);
    return node;
}

void validate(const QueryNode& node) {
    if (node.kind == QueryNode::Kind::Term) {
        require(!node.term.empty(), "query leaf is empty");
        return;
    }
    require(node.children.size() >= 2, "boolean operator with fewer than two operands");
    for (const auto& child : node.children) validate(child);
}

std::string render_query(const QueryNode& node) {
    validate(node);
    if (node.kind == QueryNode::Kind::Or) return "(" + render_inner(node) + ")";
    return render_inner(node);
}

QueryNode parse_query(std::string_view rendered) {
    QueryNode node = QueryParser(rendered).parse();
    validate(node);
    return node;
}

BooleanQuery BooleanQuery::build(std::vector<QueryNode> concepts, std::vector<std::string> filters) {
    require(!concepts.empty(), "query needs at least one concept");
    std::vector<QueryNode> parts = std::move(concepts);
    if (!filters.empty()) {
        std::vector<QueryNode> filter_leaves;
        for (const auto& f : filters) {
            filter_leaves.push_back(QueryNode::leaf(f, std::string(kPublicationTypeField)));
        }
        parts.push_back(QueryNode::any_of(std::move(filter_leaves)));
    }
    BooleanQuery query;
    query.root = QueryNode::all_of(std::move(parts));
    query.filters = std::move(filters);
    query.rendered = render_query(query.root);
    return query;
}

bool is_stopword(std::string_view lowercase_token) {
    return stopwords().count(std::string(lowercase_token)) > 0;
}

ConceptExpansion normalize_expansion(ConceptExpansion expansion) {
    expansion.source_term = collapse_whitespace(strip_quotes(expansion.source_term));
    std::set<std::string> seen{to_lower(expansion.source_term)};
    std::vector<std::string> kept;
    for (auto& alt : expansion.alternatives) {
        std::string clean = collapse_whitespace(strip_quotes(alt));
        if (clean.empty()) continue;
        if (!seen.insert(to_lower(clean)).second) continue;
        kept.push_back(std::move(clean));
    }
    expansion.alternatives = std::move(kept);
    return expansion;
}

std::vector<ConceptExpansion> FallbackExpander::expand(const HealthQuestion& question) {
    auto tokens = tokenize_question(question.text());

    struct Phrase {
        std::vector<std::string> words;
        bool capitalized = false;
    };
    std::vector<Phrase> phrases;
    bool previous_kept = false;
    for (const auto& tok : tokens) {
        if (drop_token(tok)) {
            previous_kept = false;
            continue;
        }
        bool attach = previous_kept && !tok.follows_break && !phrases.empty() &&
                      (tok.modifier || (tok.capitalized && phrases.back().capitalized));
        if (attach) {
            phrases.back().words.push_back(leaf_form(tok));
        } else {
            phrases.push_back(Phrase{{leaf_form(tok)}, tok.capitalized});
        }
        previous_kept = true;
    }

    std::vector<ConceptExpansion> out;
    std::set<std::string> seen;
    for (const auto& phrase : phrases) {
        std::string term = join(phrase.words, " ");
        if (!seen.insert(to_lower(term)).second) continue;
        out.push_back(ConceptExpansion{term, {}, ConceptExpansion::Origin::Fallback});
    }
    return out;
}

RemoteExpander::RemoteExpander(std::shared_ptr<ResilientClient> client, std::string url,
                               std::size_t max_alternatives)
    : client_(std::move(client)), url_(std::move(url)), max_alternatives_(max_alternatives) {}

std::vector<ConceptExpansion> RemoteExpander::expand(const HealthQuestion& question) {
    HttpRequest request;
    request.method = "POST";
    request.url = url_;
    request.body = nlohmann::json{{"text", question.text()}}.dump();
    HttpResponse response;
    try {
        response = client_->send(request);
    } catch (const Error& e) {
        fail(ErrorCode::ExpansionUnavailable, e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        fail(ErrorCode::ExpansionUnavailable,
             "concept expander returned HTTP " + std::to_string(response.status));
    }
    std::vector<ConceptExpansion> out;
    try {
        auto body = nlohmann::json::parse(response.body);
        for (const auto& item : body) {
            ConceptExpansion exp;
            exp.origin = ConceptExpansion::Origin::Provider;
            exp.source_term = item.at("term").get<std::string>();
            if (item.contains("alternatives")) {
                exp.alternatives = item.at("alternatives").get<std::vector<std::string>>();
            }
            exp = normalize_expansion(std::move(exp));
            if (exp.source_term.empty()) continue;
            if (max_alternatives_ > 0 && exp.alternatives.size() > max_alternatives_) {
                exp.alternatives.resize(max_alternatives_);
            }
            out.push_back(std::move(exp));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ExpansionUnavailable, std::string("malformed expander response: ") + e.what());
    }
    return out;
}

BooleanQuery expand_question(const HealthQuestion& question, ConceptExpander* expander,
                             bool allow_fallback, bool* used_fallback) {
    FallbackExpander fallback;
    std::vector<ConceptExpansion> concepts;
    bool fell_back = false;
    if (expander == nullptr) {
        concepts = fallback.expand(question);
        fell_back = true;
    } else {
        try {
            concepts = expander->expand(question);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ExpansionUnavailable || !allow_fallback) throw;
            fell_back = true;
        }
        if (concepts.empty()) {
            concepts = fallback.expand(question);
            fell_back = true;
        }
    }
    if (used_fallback) *used_fallback = fell_back;
    if (concepts.empty()) fail(ErrorCode::EmptyQuestion, "question has no searchable terms");

    std::vector<QueryNode> nodes;
    for (const auto& expansion : concepts) {
        std::vector<QueryNode> options{QueryNode::leaf(expansion.source_term)};
        for (const auto& alt : expansion.alternatives) options.push_back(QueryNode::leaf(alt));
        nodes.push_back(QueryNode::any_of(std::move(options)));
    }
    return BooleanQuery::build(std::move(nodes));
}

}  // namespace medqa
