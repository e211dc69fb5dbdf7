#include "medqa/answer_synthesizer.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <regex>
#include <sstream>

namespace medqa {

namespace {

constexpr int kMaxRangeSpan = 50;

constexpr std::string_view kFormatReminder =
    "\n\nReminder: start with a one-sentence answer, then one or more \"### \" headings, each "
    "followed by \"- \" bullets that end with references such as ([1], [4]).";

const std::regex& bracket_group() {
    static const std::regex re(R"(\[\s*(\d+(?:\s*(?:,|-|–)\s*\d+)*)\s*\])");
    return re;
}

const std::regex& parenthesized_refs() {
    static const std::regex re(
        R"(\s*\(\s*\[\s*\d[\d\s,\-–]*\](?:\s*[,;]?\s*\[\s*\d[\d\s,\-–]*\])*\s*\))");
    return re;
}

const std::regex& bare_refs() {
    static const std::regex re(R"(\s*\[\s*\d+(?:\s*(?:,|-|–)\s*\d+)*\s*\])");
    return re;
}

bool is_bullet(std::string_view line) {
    return line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ';
}

std::string heading_text(std::string_view line) {
    while (!line.empty() && line.front() == '#') line.remove_prefix(1);
    std::string text = collapse_whitespace(line);
    if (text.size() >= 4 && text.rfind("**", 0) == 0 && text.substr(text.size() - 2) == "**") {
        text = text.substr(2, text.size() - 4);
    }
    return text;
}

std::string render_refs(const std::vector<int>& refs) {
    std::string out = "(";
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (i) out += ", ";
        out += "[" + std::to_string(refs[i]) + "]";
    }
    return out + ")";
}

}  // namespace

void to_json(nlohmann::json& j, const SynthesizedAnswer& a) {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& s : a.sections) {
        nlohmann::json bullets = nlohmann::json::array();
        for (const auto& b : s.bullets) bullets.push_back({{"text", b.text}, {"refs", b.refs}});
        sections.push_back({{"heading", s.heading}, {"bullets", bullets}});
    }
    j = nlohmann::json{{"lead", a.lead},
                       {"sections", sections},
                       {"cited_indices", std::vector<int>(a.cited_indices.begin(), a.cited_indices.end())},
                       {"violations", a.violations},
                       {"study_count", a.study_count},
                       {"coverage", a.coverage},
                       {"warnings", a.warnings}};
}

void to_json(nlohmann::json& j, const CompletenessReport& r) {
    j = nlohmann::json{{"coverage", r.coverage}, {"uncited", r.uncited}, {"violations", r.violations}};
}

PromptParts build_prompt_parts(const HealthQuestion& question, const std::vector<StudyRecord>& docs) {
    require(!docs.empty() && docs.size() <= kMaxPromptDocuments,
            "synthesis prompt needs between 1 and 20 documents");
    PromptParts parts;
    parts.system = std::string(trim(summary_prompt_asset()));
    std::ostringstream user;
    user << "Question: " << question.text() << "\n\nDocuments:";
    for (std::size_t i = 0; i < docs.size(); ++i) {
        require(!docs[i].abstract.empty(), "document " + docs[i].pmid + " has no abstract");
        user << "\n\n[" << (i + 1) << "] " << docs[i].title << "\n" << docs[i].abstract;
    }
    user << "\n";
    parts.user = user.str();
    return parts;
}

std::string build_prompt(const HealthQuestion& question, const std::vector<StudyRecord>& docs) {
    auto parts = build_prompt_parts(question, docs);
    return parts.system + "\n\n" + parts.user;
}

std::vector<int> extract_references(std::string_view text) {
    std::vector<int> refs;
    std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), bracket_group()); it != std::sregex_iterator();
         ++it) {
        std::string body = (*it)[1].str();
        // Tokenize numbers and separators; "a-b" expands to the closed range.
        std::vector<int> numbers;
        std::vector<char> seps;
        std::size_t i = 0;
        while (i < body.size()) {
            unsigned char c = static_cast<unsigned char>(body[i]);
            if (std::isdigit(c)) {
                std::size_t j = i;
                while (j < body.size() && std::isdigit(static_cast<unsigned char>(body[j]))) ++j;
                numbers.push_back(std::stoi(body.substr(i, std::min<std::size_t>(j - i, 9))));
                i = j;
            } else if (c == ',') {
                seps.push_back(',');
                ++i;
            } else if (c == '-' || c == 0xE2) {
                seps.push_back('-');
                i += (c == 0xE2) ? 3 : 1;  // en dash is 3 bytes in UTF-8
            } else {
                ++i;
            }
        }
        for (std::size_t k = 0; k < numbers.size(); ++k) {
            bool range_start = k < seps.size() && seps[k] == '-' && k + 1 < numbers.size();
            if (range_start && numbers[k + 1] >= numbers[k] &&
                numbers[k + 1] - numbers[k] <= kMaxRangeSpan) {
                for (int v = numbers[k]; v <= numbers[k + 1]; ++v) refs.push_back(v);
                ++k;
            } else {
                refs.push_back(numbers[k]);
            }
        }
    }
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    return refs;
}

std::string strip_references(std::string_view text) {
    std::string s = std::regex_replace(std::string(text), parenthesized_refs(), "");
    s = std::regex_replace(s, bare_refs(), "");
    s = collapse_whitespace(s);
    static const std::regex space_before_punct(R"(\s+([.,;:!?]))");
    return std::regex_replace(s, space_before_punct, "$1");
}

SynthesizedAnswer parse_answer(std::string_view raw, int n) {
    require(n >= 1, "answer parsing needs n >= 1");
    SynthesizedAnswer answer;
    answer.study_count = n;

    std::vector<std::string> bullet_raw;  // parallel to bullets, text with refs
    struct Pending {
        std::size_t section;
        std::string raw;
    };
    std::vector<Pending> pending;

    std::istringstream in{std::string(raw)};
    std::string line;
    while (std::getline(in, line)) {
        std::string_view t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            answer.sections.push_back(AnswerSection{heading_text(t), {}});
            continue;
        }
        if (is_bullet(t)) {
            if (answer.sections.empty()) answer.sections.push_back(AnswerSection{});
            pending.push_back({answer.sections.size() - 1, std::string(trim(t.substr(2)))});
            continue;
        }
        if (answer.lead.empty() && answer.sections.empty()) {
            answer.lead = collapse_whitespace(t);
        } else if (!pending.empty() && pending.back().section + 1 == answer.sections.size()) {
            pending.back().raw += " " + std::string(t);
        } else if (answer.sections.empty()) {
            answer.warnings.push_back("ignored extra text after lead: " + std::string(t));
        } else {
            answer.warnings.push_back("ignored text outside bullets: " + std::string(t));
        }
    }

    std::set<int> violations;
    for (const auto& p : pending) {
        CitedBullet bullet;
        bullet.refs = extract_references(p.raw);
        bullet.text = strip_references(p.raw);
        if (bullet.refs.empty()) {
            answer.warnings.push_back("bullet without references: " + bullet.text);
            continue;
        }
        for (int r : bullet.refs) {
            if (r >= 1 && r <= n) {
                answer.cited_indices.insert(r);
            } else {
                violations.insert(r);
            }
        }
        answer.sections[p.section].bullets.push_back(std::move(bullet));
    }
    answer.violations.assign(violations.begin(), violations.end());

    std::size_t bullet_count = 0;
    for (const auto& s : answer.sections) bullet_count += s.bullets.size();
    if (answer.lead.empty()) fail(ErrorCode::MalformedAnswer, "answer has no lead sentence");
    if (answer.sections.empty()) fail(ErrorCode::MalformedAnswer, "answer has no sections");
    if (bullet_count == 0) fail(ErrorCode::MalformedAnswer, "answer has no referenced bullets");

    answer.coverage = static_cast<double>(answer.cited_indices.size()) / n;
    return answer;
}

std::string render_answer(const SynthesizedAnswer& answer) {
    std::string out = answer.lead + "\n";
    for (const auto& section : answer.sections) {
        if (!section.heading.empty()) out += "\n### " + section.heading + "\n";
        for (const auto& b : section.bullets) {
            std::string text = b.text;
            std::string tail;
            if (!text.empty() && (text.back() == '.' || text.back() == '!' || text.back() == '?')) {
                tail = text.back();
                text.pop_back();
            }
            out += "\n- " + text + " " + render_refs(b.refs) + tail + "\n";
        }
    }
    return out;
}

CompletenessReport validate_and_report(const SynthesizedAnswer& answer, int n) {
    require(n >= 1, "completeness needs n >= 1");
    CompletenessReport report;
    for (int i = 1; i <= n; ++i) {
        if (!answer.cited_indices.count(i)) report.uncited.push_back(i);
    }
    report.coverage = static_cast<double>(n - static_cast<int>(report.uncited.size())) / n;
    report.violations = answer.violations;
    return report;
}

SynthesizedAnswer synthesize_answer(const HealthQuestion& question,
                                    const std::vector<StudyRecord>& docs, ChatProvider& llm,
                                    int* attempts) {
    auto parts = build_prompt_parts(question, docs);
    ChatRequest request{ChatPurpose::Summary, parts.system, parts.user};
    std::string last_error;
    for (int attempt = 0; attempt <= kSynthesisRetries; ++attempt) {
        if (attempts) *attempts = attempt + 1;
        std::string reply = llm.complete(request);
        try {
            return parse_answer(reply, static_cast<int>(docs.size()));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedAnswer) throw;
            last_error = e.what();
        }
        if (attempt == 0) request.user += kFormatReminder;
    }
    fail(ErrorCode::SynthesisFailed,
         "summary still malformed after " + std::to_string(kSynthesisRetries) +
             " regenerations: " + last_error);
}

}  // namespace medqa
