#include "medqa/pipeline.hpp"

#include "medqa/error.hpp"
#include "medqa/parallel.hpp"
#include "medqa/text.hpp"

#include <sodium.h>

#include <future>
#include <unordered_map>

namespace medqa {

namespace {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

    template <class Fn>
    auto time(const std::string& stage, Fn&& fn) {
        auto start = std::chrono::steady_clock::now();
        struct Record {
            StageClock* self;
            std::string stage;
            std::chrono::steady_clock::time_point start;
            ~Record() {
                std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
                self->out_.push_back({stage, d.count()});
            }
        } record{this, stage, start};
        return fn();
    }

private:
    std::vector<StageTiming>& out_;
};

nlohmann::json optional_json(const auto& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Provider failures on the critical path surface as upstream failures.
[[noreturn]] void rethrow_upstream(const Error& e, const std::string& stage) {
    if (e.code() == ErrorCode::ProviderUnavailable || e.code() == ErrorCode::UpstreamRejected ||
        e.code() == ErrorCode::DimensionMismatch || e.code() == ErrorCode::ParseFailure) {
        fail(ErrorCode::UpstreamUnavailable, stage + ": " + e.what());
    }
    throw e;
}

std::vector<std::string> pmids_of(const std::vector<StudyRecord>& records) {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.pmid);
    return out;
}

}  // namespace

std::string random_id() {
    static const bool ready = sodium_init() >= 0;
    if (!ready) fail(ErrorCode::StorageUnavailable, "libsodium failed to initialize");
    unsigned char bytes[16];
    randombytes_buf(bytes, sizeof bytes);
    char hex[sizeof bytes * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, bytes, sizeof bytes);
    return hex;
}

nlohmann::json session_to_json(const SearchSession& s) {
    nlohmann::json selected = nlohmann::json::array();
    for (std::size_t i = 0; i < s.selected.size(); ++i) {
        nlohmann::json r = s.selected[i];
        r["rank"] = i + 1;
        r["similarity"] = i < s.similarities.size() ? s.similarities[i] : 0.0;
        selected.push_back(std::move(r));
    }
    nlohmann::json highlights = nlohmann::json::array();
    for (std::size_t i = 0; i < s.highlights.size(); ++i) {
        highlights.push_back({{"pmid", s.selected[i].pmid}, {"highlight", optional_json(s.highlights[i])}});
    }
    nlohmann::json timings = nlohmann::json::object();
    for (const auto& t : s.timings) timings[t.stage] = t.millis;

    nlohmann::json j{{"session_id", s.session_id},
                     {"question", s.question},
                     {"created_at", format_utc(s.created_at)},
                     {"no_evidence", s.no_evidence},
                     {"query",
                      {{"rendered", s.query.rendered},
                       {"filters", s.query.filters},
                       {"used_fallback", s.used_fallback_expansion}}},
                     {"candidate_count", s.candidate_count},
                     {"selected", selected},
                     {"assessments", s.assessments},
                     {"highlights", highlights},
                     {"answer", optional_json(s.answer)},
                     {"completeness", optional_json(s.completeness)},
                     {"report", s.report},
                     {"diagnostics", s.diagnostics},
                     {"timings", timings}};
    if (s.stage_trace) j["stage_trace"] = *s.stage_trace;
    return j;
}

nlohmann::json document_detail(const SearchSession& s, std::size_t i) {
    require(i < s.selected.size(), "rank index out of range");
    nlohmann::json d = s.selected[i];
    d["rank"] = i + 1;
    d["session_id"] = s.session_id;
    d["question"] = s.question;
    d["stance"] = i < s.assessments.size() ? nlohmann::json(s.assessments[i]) : nlohmann::json(nullptr);
    d["highlight"] = i < s.highlights.size() ? optional_json(s.highlights[i]) : nlohmann::json(nullptr);
    return d;
}

Pipeline::Pipeline(PipelineConfig config, PipelineServices services, Clock clock, IdSource ids)
    : config_(std::move(config)),
      services_(std::move(services)),
      clock_(clock ? std::move(clock) : [] { return std::chrono::system_clock::now(); }),
      ids_(ids ? std::move(ids) : random_id) {
    require(services_.pubmed && services_.embedder && services_.enrichment && services_.llm,
            "pipeline services are incomplete");
}

SearchSession Pipeline::run_or_empty(const HealthQuestion& question) {
    try {
        return run(question);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoEvidenceFound) throw;
        SearchSession s;
        s.session_id = ids_();
        s.question = question.text();
        s.created_at = clock_();
        s.no_evidence = true;
        bool fallback = false;
        s.query = expand_question(question, services_.expander.get(), true, &fallback);
        s.used_fallback_expansion = fallback;
        s.diagnostics.push_back(e.what());
        return s;
    }
}

SearchSession Pipeline::run(const HealthQuestion& question) {
    SearchSession s;
    s.session_id = ids_();
    s.question = question.text();
    s.created_at = clock_();
    StageClock clock(s.timings);
    nlohmann::json trace = nlohmann::json::object();

    // Expansion. A failing provider degrades to the offline expander.
    bool fallback = false;
    s.query = clock.time("expand", [&] {
        return expand_question(question, services_.expander.get(), true, &fallback);
    });
    s.used_fallback_expansion = fallback;
    if (fallback && services_.expander) {
        s.diagnostics.push_back("concept expansion unavailable; used fallback expander");
    }

    // Retrieval: candidate pool, then records.
    std::vector<StudyRecord> candidates;
    clock.time("retrieve", [&] {
        std::vector<std::string> pmids;
        try {
            pmids = services_.pubmed->search_candidates(s.query, config_.pool_size);
        } catch (const Error& e) {
            rethrow_upstream(e, "search");
        }
        s.candidate_count = pmids.size();
        if (pmids.empty()) return;
        FetchResult fetched;
        try {
            fetched = services_.pubmed->fetch_records(pmids);
        } catch (const Error& e) {
            rethrow_upstream(e, "fetch");
        }
        for (auto& d : fetched.diagnostics) s.diagnostics.push_back(std::move(d));
        trace["retrieved"] = pmids_of(fetched.records);
        std::size_t missing = 0;
        for (auto& r : fetched.records) {
            if (r.abstract_missing || r.abstract.empty()) {
                ++missing;
                continue;
            }
            candidates.push_back(std::move(r));
        }
        if (missing) {
            s.diagnostics.push_back(std::to_string(missing) + " candidate(s) without abstract excluded");
        }
    });
    if (candidates.empty()) {
        fail(ErrorCode::NoEvidenceFound, "no candidate studies with abstracts for this question");
    }

    // Rerank.
    trace["rerank_input"] = pmids_of(candidates);
    RankedSelection ranking = clock.time("rerank", [&] {
        try {
            return rank_top_k(question.text(), candidates, *services_.embedder, config_.select_k);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ZeroVector) {
                fail(ErrorCode::NoEvidenceFound, "question has no terms the embedder can represent");
            }
            rethrow_upstream(e, "rerank");
        }
    });
    {
        std::unordered_map<std::string, std::size_t> position;
        for (std::size_t i = 0; i < candidates.size(); ++i) position.emplace(candidates[i].pmid, i);
        std::unordered_map<std::string, double> similarity;
        for (const auto& sd : ranking.scored) similarity.emplace(sd.pmid, sd.similarity);
        for (const auto& pmid : ranking.selected) {
            s.selected.push_back(candidates[position.at(pmid)]);
            s.similarities.push_back(similarity.at(pmid));
        }
    }
    trace["rerank_output"] = ranking.selected;

    // Enrichment: citation batch and venue lookups.
    clock.time("enrich", [&] {
        auto outcome = enrich_best_effort(*services_.enrichment, ranking.selected, config_.concurrency);
        for (auto& r : s.selected) apply_enrichment(r, outcome.data.at(r.pmid));
        for (auto& d : outcome.diagnostics) s.diagnostics.push_back(std::move(d));
    });

    // Synthesis runs alongside the per-study fan-out; both read `selected` only.
    const std::vector<StudyRecord> synthesis_input = s.selected;
    trace["synthesis_input"] = pmids_of(synthesis_input);
    auto synthesis_start = std::chrono::steady_clock::now();
    auto synthesis = std::async(std::launch::async, [&] {
        SynthesizedAnswer a = synthesize_answer(question, synthesis_input, *services_.llm);
        std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - synthesis_start;
        return std::make_pair(std::move(a), d.count());
    });

    const std::size_t n = s.selected.size();
    s.assessments.resize(n);
    s.highlights.resize(n);
    std::vector<std::vector<std::string>> notes(n);
    std::vector<FulltextLink> links(n);
    clock.time("per_study", [&] {
        parallel_for(n, config_.concurrency, [&](std::size_t i) {
            const StudyRecord& doc = synthesis_input[i];
            try {
                links[i] = services_.pubmed->resolve_fulltext(doc.pmid);
            } catch (const Error& e) {
                notes[i].push_back("full-text lookup failed for " + doc.pmid + ": " + e.what());
            }
            try {
                s.assessments[i] = classify_stance(question, doc, *services_.llm);
                if (s.assessments[i].unclassifiable) {
                    notes[i].push_back("stance for " + doc.pmid + " unclassifiable after re-prompts");
                }
            } catch (const Error& e) {
                s.assessments[i] = unclassifiable_assessment(doc.pmid);
                notes[i].push_back("stance failed for " + doc.pmid + ": " + e.what());
            }
            try {
                s.highlights[i] = best_sentence(question, doc, *services_.embedder);
            } catch (const Error& e) {
                notes[i].push_back("no highlight for " + doc.pmid + ": " + e.what());
            }
        });
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (links[i].available) {
            s.selected[i].fulltext_available = true;
            s.selected[i].fulltext_locator = links[i].locator;
        }
        for (auto& note : notes[i]) s.diagnostics.push_back(std::move(note));
    }

    try {
        auto [answer, millis] = synthesis.get();
        s.timings.push_back({"synthesize", millis});
        s.answer = std::move(answer);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SynthesisFailed) throw;
        rethrow_upstream(e, "synthesis");
    }
    s.completeness = validate_and_report(*s.answer, static_cast<int>(n));
    for (const auto& w : s.answer->warnings) s.diagnostics.push_back("answer: " + w);
    if (!s.completeness->violations.empty()) {
        s.diagnostics.push_back("answer cites " + std::to_string(s.completeness->violations.size()) +
                                " reference(s) outside the selection");
    }

    s.report = clock.time("analyze", [&] { return analyze(s.selected, s.assessments); });
    for (const auto& d : s.report.diagnostics) s.diagnostics.push_back("analytics: " + d);

    if (config_.stage_trace) s.stage_trace = std::move(trace);
    return s;
}

}  // namespace medqa
