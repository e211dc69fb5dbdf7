#include "medqa/api_service.hpp"
#include "medqa/error.hpp"
#include "medqa/persistence_store.hpp"
#include "medqa/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct CommonFlags {
    std::string config_path;
    bool offline = false;
    std::string fixtures_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_flag("--offline", flags.offline, "Use recorded fixtures and stub providers");
    cmd->add_option("--fixtures", flags.fixtures_dir, "Fixture tree for offline mode");
}

medqa::PipelineConfig resolve_config(const CommonFlags& flags) {
    auto config = flags.config_path.empty() ? medqa::PipelineConfig{}
                                            : medqa::PipelineConfig::load(flags.config_path);
    config.apply_process_env();
    if (flags.offline) config.offline = true;
    if (!flags.fixtures_dir.empty()) config.fixtures_dir = flags.fixtures_dir;
    return config;
}

void print_session(const medqa::SearchSession& s) {
    std::cout << "Query: " << s.query.rendered << "\n\n";
    if (s.no_evidence) {
        std::cout << "No studies with abstracts matched this question.\n";
        return;
    }
    std::cout << medqa::render_answer(*s.answer) << "\n";
    for (std::size_t i = 0; i < s.selected.size(); ++i) {
        const auto& r = s.selected[i];
        std::cout << "[" << (i + 1) << "] " << r.title << " (PMID " << r.pmid;
        if (r.year) std::cout << ", " << *r.year;
        std::cout << ") " << medqa::to_string(s.assessments[i].dominant) << "\n";
    }
    const auto& c = s.report.label_counts;
    std::cout << "\nStance: " << c.supported << " supported, " << c.refuted << " refuted, "
              << c.neutral << " neutral; coverage " << s.completeness->coverage << "\n";
    for (const auto& d : s.diagnostics) std::cout << "note: " << d << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evidence-based medical question answering over PubMed"};
    app.require_subcommand(1);

    CommonFlags query_flags;
    std::string query_question;
    auto* query = app.add_subcommand("query", "Print the boolean PubMed query for a question");
    query->add_option("question", query_question, "Health question")->required();
    add_common(query, query_flags);

    CommonFlags search_flags;
    std::string search_question;
    bool as_json = false;
    bool trace = false;
    auto* search = app.add_subcommand("search", "Answer a question from retrieved studies");
    search->add_option("question", search_question, "Health question")->required();
    search->add_flag("--json", as_json, "Print the session as JSON");
    search->add_flag("--trace", trace, "Record stage inputs in the session");
    add_common(search, search_flags);

    CommonFlags serve_flags;
    medqa::ServerOptions server;
    std::string db_url;
    bool port_set = false;
    auto* serve = app.add_subcommand("serve", "Run the JSON HTTP API");
    serve->add_option("--host", server.host, "Bind address");
    auto* port_opt = serve->add_option("--port", server.port, "Port (0 picks a free one)");
    serve->add_option("--db", db_url, "SQLite path for accounts and history (default: in memory)");
    serve->add_option("--cors-origin", server.cors_origin, "Allowed browser origin");
    add_common(serve, serve_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*query) {
            auto config = resolve_config(query_flags);
            auto expander = medqa::make_expander(config);
            auto q = medqa::HealthQuestion::make(query_question, std::chrono::system_clock::now());
            bool fallback = false;
            auto built = medqa::expand_question(q, expander.get(), true, &fallback);
            std::cout << built.rendered << "\n";
            if (fallback && expander) std::cerr << "note: used fallback expander\n";
            return 0;
        }
        if (*search) {
            auto config = resolve_config(search_flags);
            config.stage_trace = config.stage_trace || trace;
            medqa::Pipeline pipeline(config, medqa::PipelineServices::build(config));
            auto q = medqa::HealthQuestion::make(search_question, std::chrono::system_clock::now());
            auto session = pipeline.run_or_empty(q);
            if (as_json) {
                std::cout << medqa::session_to_json(session).dump(2) << "\n";
            } else {
                print_session(session);
            }
            return 0;
        }
        if (*serve) {
            auto config = resolve_config(serve_flags);
            port_set = port_opt->count() > 0;
            if (!port_set) server.port = config.port;
            if (!db_url.empty()) config.database_url = db_url;
            auto pipeline = std::make_shared<medqa::Pipeline>(config, medqa::PipelineServices::build(config));
            std::shared_ptr<medqa::Store> store = medqa::open_store(config.database_url);
            medqa::ApiOptions options;
            options.max_concurrent_searches = config.max_concurrent_searches;
            medqa::ApiService service(pipeline, store, options);
            medqa::serve_http(service, server, [](int port) {
                std::printf("listening on port %d\n", port);
                std::fflush(stdout);
            });
            return 0;
        }
    } catch (const medqa::Error& e) {
        std::cerr << "error (" << medqa::to_string(e.code()) << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
