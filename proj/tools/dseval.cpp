// Operator entry points: ingest, build, serve, eval, score, report, sweep.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dseval/agents.hpp"
#include "dseval/chain.hpp"
#include "dseval/corpus.hpp"
#include "dseval/error.hpp"
#include "dseval/evidence_loop.hpp"
#include "dseval/http_chat.hpp"
#include "dseval/metrics.hpp"
#include "dseval/report.hpp"
#include "dseval/sandbox.hpp"
#include "dseval/server.hpp"

namespace fs = std::filesystem;
using dseval::Error;
using dseval::chain::QuestionRecord;
using dseval::corpus::CorpusStore;
using dseval::corpus::IngestReport;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitEndpoint = 4;

[[noreturn]] void fail(int code, const std::string& error_code, const std::string& message) {
    std::cerr << "error: " << json{{"code", error_code}, {"message", message}}.dump() << "\n";
    std::exit(code);
}

CorpusStore load_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(kExitInput, "missing_file", "cannot open corpus store: " + path);
    IngestReport report;
    return CorpusStore::ingest(in, report);
}

std::map<std::string, QuestionRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(kExitInput, "missing_file", "cannot open records: " + path);
    std::map<std::string, QuestionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) fail(kExitInput, "malformed_record", "bad record line in " + path);
        QuestionRecord r = QuestionRecord::from_json(j);
        records.emplace(r.id, std::move(r));
    }
    return records;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

std::unique_ptr<dseval::chat::Endpoint> make_endpoint(const std::string& url,
                                                      const std::string& model) {
    if (url.empty()) return nullptr;
    dseval::chat::EndpointConfig cfg;
    cfg.base_url = url;
    cfg.model = model;
    return dseval::chat::make_http_endpoint(cfg);
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(kExitRuntime, "write_failure", "cannot write " + path.string());
    out << content;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& corpus_path, const std::string& out_path) {
    std::ifstream in(corpus_path);
    if (!in) fail(kExitInput, "missing_file", "cannot open corpus: " + corpus_path);
    IngestReport report;
    CorpusStore store = CorpusStore::ingest(in, report);
    std::ostringstream serialized;
    store.save(serialized);
    write_file(out_path, serialized.str());
    std::string report_text = report.summary() + "\n";
    for (const auto& w : report.warnings) report_text += "warning: " + w + "\n";
    write_file(out_path + ".report.txt", report_text);
    write_file(out_path + ".report.json", report.to_json().dump(2) + "\n");
    std::cout << report.summary() << "\n";
    for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BuildStats {
    std::map<std::size_t, std::size_t> hop_histogram;
    std::size_t accepted = 0, rejected = 0;
    double question_chars = 0, answer_chars = 0;
    std::set<std::string> entities;

    json to_json() const {
        json hops = json::object();
        for (auto& [h, c] : hop_histogram) hops[std::to_string(h)] = c;
        double n = accepted ? static_cast<double>(accepted) : 1.0;
        double mean_hops = 0;
        std::size_t total = 0;
        for (auto& [h, c] : hop_histogram) {
            mean_hops += static_cast<double>(h * c);
            total += c;
        }
        if (total) mean_hops /= static_cast<double>(total);
        return json{{"format_version", 1},
                    {"accepted", accepted},
                    {"rejected", rejected},
                    {"hop_histogram", hops},
                    {"mean_hops", mean_hops},
                    {"entity_count", entities.size()},
                    {"mean_question_chars", question_chars / n},
                    {"mean_answer_chars", answer_chars / n}};
    }
};

int cmd_build(const std::string& store_path, const std::string& seeds_path,
              const std::string& oracle_url, const std::string& oracle_model,
              std::size_t max_hops, bool skip_verify, const std::string& out_dir) {
    CorpusStore store = load_store(store_path);
    std::ifstream seeds(seeds_path);
    if (!seeds) fail(kExitInput, "missing_file", "cannot open seed pairs: " + seeds_path);
    auto oracle = make_endpoint(env_or("DS_ORACLE_ENDPOINT", oracle_url), oracle_model);
    if (!skip_verify && !oracle)
        fail(kExitInput, "missing_endpoint",
             "verification requires --oracle-endpoint or DS_ORACLE_ENDPOINT (or --skip-verify)");

    fs::create_directories(out_dir);
    std::ofstream records_out(fs::path(out_dir) / "records.ndjson");
    std::ofstream status_out(fs::path(out_dir) / "build_status.ndjson");
    BuildStats stats;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(seeds, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("v0") || !j.contains("question") || !j.contains("vn")) {
            status_out << json{{"line", lineno}, {"status", "rejected"},
                               {"reason", "malformed seed"}}.dump() << "\n";
            ++stats.rejected;
            continue;
        }
        std::string question = j["question"].get<std::string>();
        auto reject = [&](const std::string& reason) {
            status_out << json{{"line", lineno}, {"question", question},
                               {"status", "rejected"}, {"reason", reason}}.dump() << "\n";
            ++stats.rejected;
        };
        auto v0 = store.resolve(j["v0"].get<std::string>());
        auto vn = store.resolve(j["vn"].get<std::string>());
        if (!v0 || !vn) { reject("unknown entity"); continue; }
        try {
            auto chain = dseval::chain::find_alternative_chain(store, *v0, *vn);
            if (!chain) { reject("disconnected"); continue; }
            if (max_hops && chain->hop_count() > max_hops) { reject("exceeds max hops"); continue; }
            auto evidence = dseval::chain::build_evidence_chain(store, *chain);
            std::vector<dseval::chain::ProbeQuery> probes;
            for (std::size_t i = 0; i < evidence.size(); ++i)
                probes.push_back(dseval::chain::make_probe(
                    evidence[i], chain->entities[i + 1],
                    store.surface_forms(chain->entities[i + 1])));
            QuestionRecord record = dseval::chain::assemble_record(
                question, *v0, *vn, *chain, std::move(evidence), std::move(probes),
                store.surface_forms(*vn));
            if (!skip_verify) {
                dseval::chain::VerificationReport vr;
                try {
                    vr = dseval::chain::verify_question(*oracle, record);
                } catch (const Error& e) {
                    status_out << json{{"line", lineno}, {"question", question},
                                       {"status", "incomplete"}, {"reason", e.what()}}.dump()
                               << "\n";
                    status_out.flush();
                    records_out.flush();
                    fail(kExitEndpoint, "oracle_unreachable",
                         "build halted; per-record status preserved in build_status.ndjson");
                }
                write_file(fs::path(out_dir) / (record.id + ".verification.json"),
                           vr.to_json().dump(2) + "\n");
                if (!vr.accepted) { reject("verification rejected"); continue; }
            }
            records_out << record.to_json().dump() << "\n";
            status_out << json{{"line", lineno}, {"id", record.id},
                               {"status", "accepted"}}.dump() << "\n";
            ++stats.accepted;
            ++stats.hop_histogram[record.hop_count()];
            stats.question_chars += static_cast<double>(record.question.size());
            stats.answer_chars += static_cast<double>(record.answer_aliases.front().size());
            for (const auto& e : record.chain.entities) stats.entities.insert(e);
        } catch (const Error& e) {
            reject(e.what());
        }
    }
    write_file(fs::path(out_dir) / "build_stats.json", stats.to_json().dump(2) + "\n");
    std::cout << stats.accepted << " records accepted, " << stats.rejected << " rejected\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

int cmd_serve(const std::string& store_path, const std::string& records_path,
              const std::string& bind, bool allow_unverified, const std::string& trace_out) {
    CorpusStore store = load_store(store_path);
    auto records = load_records(records_path);
    std::set<std::string> verified;
    // verification sidecars, when present next to the records file, gate episodes
    fs::path rec_dir = fs::path(records_path).parent_path();
    for (auto& [id, rec] : records) {
        fs::path sidecar = rec_dir / (id + ".verification.json");
        if (fs::exists(sidecar)) {
            std::ifstream in(sidecar);
            json vj = json::parse(in, nullptr, false);
            if (!vj.is_discarded() && vj.value("accepted", false)) verified.insert(id);
        }
    }
    if (verified.empty()) allow_unverified = true;  // nothing gated; records stand alone

    std::string host = "127.0.0.1";
    int port = 8080;
    auto colon = bind.rfind(':');
    if (colon != std::string::npos) {
        host = bind.substr(0, colon);
        port = std::stoi(bind.substr(colon + 1));
    }
    dseval::server::Service service(store, records, allow_unverified, verified);
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        auto flushed = service.shutdown();
        if (!trace_out.empty()) {
            fs::create_directories(trace_out);
            for (const auto& t : flushed)
                write_file(fs::path(trace_out) / (t.episode_id + ".trace.ndjson"), t.to_ndjson());
        }
    });
    std::cout << "serving " << store.page_count() << " pages, " << records.size()
              << " records on " << host << ":" << port << "\n";
    bool ok = service.listen(host, port);
    g_stop = true;
    watcher.join();
    if (!ok) fail(kExitRuntime, "bind_failure", "cannot bind " + bind);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string agent = "scripted";
    std::string serve_addr;  // empty: in-process
    std::string store_path;
    std::string records_path;
    std::string endpoint_url;
    std::string endpoint_model = "default";
    std::size_t n = 0;  // 0: all
    int budget = dseval::sandbox::kDefaultToolBudget;
    std::size_t context_tokens = 32000;
    int breadth = 3;
    int iteration = 3;
    int parallel = 1;
    std::uint64_t seed = 0;
    std::string out_dir = "eval_out";
};

dseval::sandbox::Trace eval_one(const EvalOptions& opt, const CorpusStore* store,
                                const QuestionRecord& record,
                                dseval::chat::Endpoint* endpoint) {
    std::unique_ptr<dseval::sandbox::Episode> episode;
    std::unique_ptr<dseval::sandbox::Session> session;
    if (opt.serve_addr.empty()) {
        episode = std::make_unique<dseval::sandbox::Episode>(*store, record, opt.budget,
                                                             "ep-" + record.id);
        session = std::make_unique<dseval::sandbox::InProcessSession>(*episode);
    } else {
        session = std::make_unique<dseval::server::HttpSession>(opt.serve_addr, record.id,
                                                                opt.budget);
    }
    if (opt.agent == "scripted") {
        const std::string& title = record.answer_aliases.front();
        return dseval::agents::run_ground_truth(*session, record, title);
    }
    if (opt.agent == "react") {
        dseval::agents::ReactConfig cfg;
        cfg.max_calls = opt.budget;
        cfg.context_token_budget = opt.context_tokens;
        return dseval::agents::run_react(*endpoint, *session, record.question, cfg);
    }
    // evidenceloop
    dseval::evloop::LoopConfig cfg;
    cfg.n_solvers = opt.breadth;
    cfg.max_rounds = opt.iteration;
    cfg.context_token_budget = opt.context_tokens;
    return dseval::evloop::run_evidenceloop(*endpoint, *session, record.question, cfg);
}

int cmd_eval(const EvalOptions& opt) {
    if (opt.agent != "scripted" && opt.agent != "react" && opt.agent != "evidenceloop")
        fail(kExitInput, "bad_agent", "agent must be react|evidenceloop|scripted");
    std::optional<CorpusStore> store;
    if (opt.serve_addr.empty()) {
        if (opt.store_path.empty())
            fail(kExitInput, "missing_store", "--in-process eval needs --store");
        store = load_store(opt.store_path);
    }
    auto records = load_records(opt.records_path);
    std::string url = env_or("DS_AGENT_ENDPOINT", opt.endpoint_url);
    auto endpoint = make_endpoint(url, opt.endpoint_model);
    if (opt.agent != "scripted" && !endpoint)
        fail(kExitInput, "missing_endpoint",
             "agent '" + opt.agent + "' needs --endpoint or DS_AGENT_ENDPOINT");

    std::vector<const QuestionRecord*> selected;
    for (auto& [id, r] : records) {
        selected.push_back(&r);
        if (opt.n && selected.size() >= opt.n) break;
    }

    fs::create_directories(opt.out_dir);
    std::mutex io_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> endpoint_failed{false};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= selected.size()) return;
            const QuestionRecord& rec = *selected[i];
            try {
                auto trace = eval_one(opt, store ? &*store : nullptr, rec, endpoint.get());
                std::lock_guard<std::mutex> lock(io_mutex);
                write_file(fs::path(opt.out_dir) / (rec.id + ".trace.ndjson"), trace.to_ndjson());
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "warning: " << rec.id << ": " << e.what() << "\n";
                if (std::string(e.code()) == "endpoint_failure") endpoint_failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    int threads = std::max(1, opt.parallel);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    json manifest = {{"format_version", 1},
                     {"agent", opt.agent},
                     {"mode", opt.serve_addr.empty() ? "in-process" : "wire"},
                     {"endpoint", url},
                     {"model", opt.endpoint_model},
                     {"budget", opt.budget},
                     {"context_tokens", opt.context_tokens},
                     {"breadth", opt.breadth},
                     {"iteration", opt.iteration},
                     {"seed", opt.seed},
                     {"questions", selected.size()}};
    write_file(fs::path(opt.out_dir) / "run_manifest.json", manifest.dump(2) + "\n");
    if (endpoint_failed) fail(kExitEndpoint, "endpoint_failure", "agent endpoint failed");
    std::cout << selected.size() << " traces written to " << opt.out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_score(const std::string& traces_dir, const std::string& records_path,
              const std::string& prober_url, const std::string& prober_model,
              const std::string& degradation_url, const std::string& degradation_model,
              const std::string& out_prefix) {
    auto records = load_records(records_path);
    std::vector<dseval::sandbox::Trace> traces;
    if (fs::is_directory(traces_dir)) {
        std::vector<fs::path> paths;
        for (const auto& entry : fs::directory_iterator(traces_dir))
            if (entry.path().string().ends_with(".trace.ndjson")) paths.push_back(entry.path());
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            std::ifstream in(p, std::ios::binary);
            std::stringstream buf;
            buf << in.rdbuf();
            traces.push_back(dseval::sandbox::Trace::from_ndjson(buf.str()));
        }
    }
    if (traces.empty()) fail(kExitInput, "no_traces", "no traces found in " + traces_dir);

    auto prober = make_endpoint(env_or("DS_PROBER_ENDPOINT", prober_url), prober_model);
    auto degrader =
        make_endpoint(env_or("DS_DEGRADATION_ENDPOINT", degradation_url), degradation_model);

    std::vector<dseval::metrics::InstanceOutcome> outcomes;
    json per_instance = json::array();
    std::size_t incomplete = 0;
    for (const auto& trace : traces) {
        auto it = records.find(trace.question_id);
        if (it == records.end())
            fail(kExitInput, "unknown_question", "trace references unknown question " +
                                                     trace.question_id);
        auto outcome = dseval::metrics::make_outcome(trace, it->second, prober.get());
        json row = {{"question_id", outcome.question_id},
                    {"ks", outcome.ks},
                    {"searched", outcome.searched},
                    {"hops_used", outcome.hops_used},
                    {"hops_gt", outcome.hops_gt},
                    {"response", dseval::metrics::to_string(outcome.response)},
                    {"k", outcome.assessment.k},
                    {"search_only_sufficiency", outcome.assessment.search_only},
                    {"incomplete", outcome.assessment.incomplete}};
        per_instance.push_back(row);
        if (outcome.assessment.incomplete) {
            ++incomplete;
            continue;  // excluded from aggregates, reported above
        }
        outcomes.push_back(std::move(outcome));
    }
    if (outcomes.empty()) fail(kExitInput, "no_instances", "every instance was incomplete");

    auto score = dseval::metrics::aggregate_scores(outcomes);
    if (degrader)
        score.degradation = dseval::metrics::degradation_analysis(outcomes, records, *degrader);

    json out = score.to_json();
    out["incomplete_instances"] = incomplete;
    out["search_only_sufficiency"] = prober == nullptr;
    write_file(out_prefix + ".json", out.dump(2) + "\n");
    write_file(out_prefix + ".instances.ndjson", [&] {
        std::string s;
        for (const auto& row : per_instance) s += row.dump() + "\n";
        return s;
    }());
    std::string table =
        dseval::report::render_table({{fs::path(out_prefix).filename().string(), score}});
    write_file(out_prefix + ".txt", table);
    std::cout << table;
    if (prober == nullptr) std::cout << "note: search-only sufficiency (no prober endpoint)\n";
    std::cout << "profile: " << dseval::metrics::classify_profile(score) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& score_paths, const std::string& format,
               const std::string& out_path) {
    std::vector<std::pair<std::string, dseval::metrics::ScoreReport>> rows;
    for (const auto& p : score_paths) {
        std::ifstream in(p);
        if (!in) fail(kExitInput, "missing_file", "cannot open score file: " + p);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) fail(kExitInput, "malformed_score", "bad score file: " + p);
        rows.emplace_back(fs::path(p).stem().string(),
                          dseval::metrics::ScoreReport::from_json(j));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.second.pass_at_1 > b.second.pass_at_1;
    });
    std::string rendered = format == "plotdata"
                               ? dseval::report::plot_data(rows).dump(2) + "\n"
                               : dseval::report::render_table(rows);
    if (out_path.empty()) std::cout << rendered;
    else write_file(out_path, rendered);
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const std::string& axis, const std::vector<std::string>& values, EvalOptions opt,
              const std::string& prober_url, const std::string& prober_model,
              const std::string& out_dir) {
    if (axis != "context" && axis != "breadth" && axis != "iteration")
        fail(kExitInput, "bad_axis", "axis must be context|breadth|iteration");
    fs::create_directories(out_dir);
    json series = json::array();
    std::string base_out = opt.out_dir;
    for (const auto& value : values) {
        EvalOptions point = opt;
        if (axis == "context") point.context_tokens = std::stoul(value);
        else if (axis == "breadth") point.breadth = std::stoi(value);
        else point.iteration = std::stoi(value);
        point.out_dir = (fs::path(out_dir) / (axis + "-" + value)).string();
        int rc = cmd_eval(point);
        if (rc != kExitOk) return rc;
        std::string score_prefix = (fs::path(point.out_dir) / "score").string();
        rc = cmd_score(point.out_dir, point.records_path, prober_url, prober_model, "", "",
                       score_prefix);
        if (rc != kExitOk) return rc;
        std::ifstream in(score_prefix + ".json");
        json sj = json::parse(in);
        series.push_back({{"x", value}, {"axis", axis}, {"scores", sj}});
    }
    write_file(fs::path(out_dir) / "sweep_series.json",
               json{{"format_version", 1}, {"axis", axis}, {"series", series}}.dump(2) + "\n");
    std::cout << values.size() << " sweep points written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hint-free multi-hop deep-search evaluation toolkit"};
    app.require_subcommand(1);

    // ingest
    std::string corpus_path, ingest_out;
    auto* ingest = app.add_subcommand("ingest", "ingest a page corpus into a store artifact");
    ingest->add_option("--corpus", corpus_path, "page records, NDJSON")->required();
    ingest->add_option("--out", ingest_out, "store artifact path")->required();

    // build
    std::string store_path, seeds_path, oracle_url, oracle_model = "oracle", build_out = "build_out";
    std::size_t max_hops = 0;
    bool skip_verify = false;
    auto* build = app.add_subcommand("build", "construct verified question records");
    build->add_option("--store", store_path, "store artifact")->required();
    build->add_option("--seed-pairs", seeds_path, "NDJSON seeds {v0, question, vn}")->required();
    build->add_option("--oracle-endpoint", oracle_url, "verification oracle base URL");
    build->add_option("--oracle-model", oracle_model, "oracle model name");
    build->add_option("--max-hops", max_hops, "reject chains longer than this (0 = no limit)");
    build->add_flag("--skip-verify", skip_verify, "emit records without oracle verification");
    build->add_option("--out", build_out, "output directory")->required();

    // serve
    std::string serve_store, serve_records, bind = "127.0.0.1:8080", trace_out;
    bool allow_unverified = false;
    auto* serve = app.add_subcommand("serve", "run the sandbox HTTP service");
    serve->add_option("--store", serve_store)->required();
    serve->add_option("--records", serve_records)->required();
    serve->add_option("--bind", bind, "host:port");
    serve->add_flag("--allow-unverified", allow_unverified);
    serve->add_option("--trace-out", trace_out, "directory for shutdown-flushed traces");

    // eval
    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "run an agent over the question set");
    eval->add_option("--agent", ev.agent, "react|evidenceloop|scripted");
    eval->add_option("--serve-addr", ev.serve_addr, "sandbox service URL (omit for in-process)");
    eval->add_option("--store", ev.store_path, "store artifact (in-process mode)");
    eval->add_option("--records", ev.records_path)->required();
    eval->add_option("--endpoint", ev.endpoint_url, "agent chat endpoint base URL");
    eval->add_option("--model", ev.endpoint_model);
    eval->add_option("--n", ev.n, "limit to first n questions");
    eval->add_option("--budget", ev.budget, "tool-call budget per episode");
    eval->add_option("--context-tokens", ev.context_tokens, "agent context ceiling");
    eval->add_option("--breadth", ev.breadth, "evidenceloop solver count");
    eval->add_option("--iteration", ev.iteration, "evidenceloop rounds");
    eval->add_option("--parallel", ev.parallel, "concurrent questions");
    eval->add_option("--seed", ev.seed, "run seed (recorded in the manifest)");
    eval->add_option("--out", ev.out_dir, "trace output directory");

    // score
    std::string traces_dir, score_records, prober_url, prober_model = "prober";
    std::string degradation_url, degradation_model = "degradation", score_out = "score";
    auto* score = app.add_subcommand("score", "compute the metric suite from traces");
    score->add_option("--traces", traces_dir)->required();
    score->add_option("--records", score_records)->required();
    score->add_option("--prober-endpoint", prober_url);
    score->add_option("--prober-model", prober_model);
    score->add_option("--degradation-endpoint", degradation_url);
    score->add_option("--degradation-model", degradation_model);
    score->add_option("--out", score_out, "output prefix");

    // report
    std::vector<std::string> score_paths;
    std::string report_format = "table", report_out;
    auto* report = app.add_subcommand("report", "merge score files into a comparison");
    report->add_option("--scores", score_paths)->required()->expected(-1);
    report->add_option("--format", report_format)->check(CLI::IsMember({"table", "plotdata"}));
    report->add_option("--out", report_out);

    // sweep
    std::string axis;
    std::vector<std::string> sweep_values;
    std::string sweep_out = "sweep_out";
    EvalOptions sw;
    auto* sweep = app.add_subcommand("sweep", "eval+score across one config axis");
    sweep->add_option("--axis", axis, "context|breadth|iteration")->required();
    sweep->add_option("--values", sweep_values)->required()->expected(-1);
    sweep->add_option("--agent", sw.agent);
    sweep->add_option("--serve-addr", sw.serve_addr);
    sweep->add_option("--store", sw.store_path);
    sweep->add_option("--records", sw.records_path)->required();
    sweep->add_option("--endpoint", sw.endpoint_url);
    sweep->add_option("--model", sw.endpoint_model);
    sweep->add_option("--n", sw.n);
    sweep->add_option("--budget", sw.budget);
    sweep->add_option("--seed", sw.seed);
    std::string sweep_prober_url, sweep_prober_model = "prober";
    sweep->add_option("--prober-endpoint", sweep_prober_url);
    sweep->add_option("--prober-model", sweep_prober_model);
    sweep->add_option("--out", sweep_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (*ingest) return cmd_ingest(corpus_path, ingest_out);
        if (*build)
            return cmd_build(store_path, seeds_path, oracle_url, oracle_model, max_hops,
                             skip_verify, build_out);
        if (*serve) return cmd_serve(serve_store, serve_records, bind, allow_unverified, trace_out);
        if (*eval) return cmd_eval(ev);
        if (*score)
            return cmd_score(traces_dir, score_records, prober_url, prober_model, degradation_url,
                             degradation_model, score_out);
        if (*report) return cmd_report(score_paths, report_format, report_out);
        if (*sweep)
            return cmd_sweep(axis, sweep_values, sw, sweep_prober_url, sweep_prober_model,
                             sweep_out);
    } catch (const Error& e) {
        fail(kExitRuntime, e.code(), e.what());
    } catch (const std::exception& e) {
        fail(kExitRuntime, "unexpected", e.what());
    }
    return kExitInput;
}
