#pragma once
// Episode lifecycle and the agent-facing tool surface: masked search and
// fetch under a tool-call budget, final submission, and bit-exact traces.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/chain.hpp"
#include "dseval/corpus.hpp"
#include "dseval/error.hpp"
#include "dseval/masking.hpp"
#include "dseval/sha256.hpp"

namespace dseval::sandbox {

using chain::QuestionRecord;
using corpus::CorpusStore;
using corpus::EntityId;
using json = nlohmann::json;

inline constexpr int kDefaultToolBudget = 40;

enum class ActionKind { search, fetch, submit, retrieve };

inline const char* to_string(ActionKind k) {
    switch (k) {
        case ActionKind::search: return "search";
        case ActionKind::fetch: return "fetch";
        case ActionKind::submit: return "submit";
        case ActionKind::retrieve: return "retrieve";
    }
    return "?";
}

inline std::optional<ActionKind> action_kind_from(const std::string& s) {
    if (s == "search") return ActionKind::search;
    if (s == "fetch") return ActionKind::fetch;
    if (s == "submit") return ActionKind::submit;
    if (s == "retrieve") return ActionKind::retrieve;
    return std::nullopt;
}

struct ActionEvent {
    ActionKind kind;
    json payload;
    std::string response_digest;
    std::uint64_t seq = 0;  // logical monotonic timestamp
};

struct FinalResponse {
    enum class Kind { attempt, refuse };
    Kind kind = Kind::refuse;
    std::string answer_text;
    std::vector<std::pair<std::string, std::string>> claims;  // (claim, EID)
};

enum class Status { open, answered, refused, exhausted };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::open: return "open";
        case Status::answered: return "answered";
        case Status::refused: return "refused";
        case Status::exhausted: return "exhausted";
    }
    return "?";
}

struct SearchItem {
    std::string display;  // masked title or placeholder
    std::string snippet;
    std::string handle;   // pass to fetch
};

struct SearchResult {
    bool ok = false;
    std::string error_code;
    std::vector<SearchItem> items;
    std::string rendered;  // exact served byte stream (digested)
};

struct FetchResult {
    bool ok = false;
    std::string error_code;
    std::string content;  // masked page view; error text when !ok
};

struct Trace {
    std::string question_id;
    std::string episode_id;
    int budget_initial = kDefaultToolBudget;
    int budget_remaining = kDefaultToolBudget;
    Status final_status = Status::open;
    bool has_final = false;
    FinalResponse final_response;
    bool flushed_on_shutdown = false;
    std::set<EntityId> visited;
    std::vector<ActionEvent> events;

    std::size_t tool_call_count() const {
        std::size_t n = 0;
        for (const auto& e : events)
            if ((e.kind == ActionKind::search || e.kind == ActionKind::fetch) &&
                !e.payload.value("rejected", false))
                ++n;
        return n;
    }

    std::string to_ndjson() const {
        std::string out;
        json meta = {{"kind", "meta"},
                     {"format_version", 1},
                     {"question_id", question_id},
                     {"episode_id", episode_id},
                     {"budget_initial", budget_initial}};
        out += meta.dump() + "\n";
        for (const auto& e : events) {
            json j = {{"kind", "event"},
                      {"action", to_string(e.kind)},
                      {"payload", e.payload},
                      {"digest", e.response_digest},
                      {"seq", e.seq}};
            out += j.dump() + "\n";
        }
        json fin = {{"kind", "final"},
                    {"status", to_string(final_status)},
                    {"budget_remaining", budget_remaining},
                    {"visited", visited},
                    {"flushed_on_shutdown", flushed_on_shutdown}};
        if (has_final) {
            fin["response"] = {{"kind", final_response.kind == FinalResponse::Kind::attempt
                                            ? "attempt" : "refuse"},
                               {"answer_text", final_response.answer_text}};
            json claims = json::array();
            for (const auto& [c, eid] : final_response.claims)
                claims.push_back({{"claim", c}, {"eid", eid}});
            fin["response"]["claims"] = claims;
        }
        out += fin.dump() + "\n";
        return out;
    }

    static Trace from_ndjson(const std::string& body) {
        Trace t;
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t nl = body.find('\n', pos);
            if (nl == std::string::npos) nl = body.size();
            std::string line = body.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            json j = json::parse(line);
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "meta") {
                t.question_id = j.value("question_id", "");
                t.episode_id = j.value("episode_id", "");
                t.budget_initial = j.value("budget_initial", kDefaultToolBudget);
            } else if (kind == "event") {
                ActionEvent e;
                auto ak = action_kind_from(j.at("action").get<std::string>());
                if (!ak) throw Error("bad_trace", "unknown action kind in trace");
                e.kind = *ak;
                e.payload = j.at("payload");
                e.response_digest = j.at("digest").get<std::string>();
                e.seq = j.at("seq").get<std::uint64_t>();
                t.events.push_back(std::move(e));
            } else if (kind == "final") {
                std::string st = j.at("status").get<std::string>();
                if (st == "answered") t.final_status = Status::answered;
                else if (st == "refused") t.final_status = Status::refused;
                else if (st == "exhausted") t.final_status = Status::exhausted;
                else t.final_status = Status::open;
                t.budget_remaining = j.value("budget_remaining", 0);
                t.flushed_on_shutdown = j.value("flushed_on_shutdown", false);
                if (j.contains("visited"))
                    for (const auto& v : j["visited"]) t.visited.insert(v.get<std::string>());
                if (j.contains("response")) {
                    t.has_final = true;
                    const auto& r = j["response"];
                    t.final_response.kind = r.at("kind").get<std::string>() == "attempt"
                                                ? FinalResponse::Kind::attempt
                                                : FinalResponse::Kind::refuse;
                    t.final_response.answer_text = r.value("answer_text", "");
                    if (r.contains("claims"))
                        for (const auto& c : r["claims"])
                            t.final_response.claims.emplace_back(
                                c.at("claim").get<std::string>(), c.at("eid").get<std::string>());
                }
            }
        }
        return t;
    }
};

// One agent's sandboxed attempt at one question.
class Episode {
public:
    Episode(const CorpusStore& store, const QuestionRecord& record,
            int budget = kDefaultToolBudget, std::string episode_id = "ep-0")
        : store_(store),
          record_(record),
          policy_(masking::MaskPolicy::for_record(store, record)),
          budget_remaining_(budget),
          budget_initial_(budget),
          episode_id_(std::move(episode_id)) {
        unlocked_ = masking::unlocked_entities(policy_, visited_);
    }

    const std::string& id() const { return episode_id_; }
    Status status() const { return status_; }
    int budget_remaining() const { return budget_remaining_; }
    const std::set<EntityId>& visited() const { return visited_; }
    const std::set<EntityId>& unlocked() const { return unlocked_; }
    const masking::MaskPolicy& policy() const { return policy_; }
    const QuestionRecord& record() const { return record_; }

    SearchResult search(const std::string& query, std::size_t k) {
        SearchResult res;
        json payload = {{"query", query}, {"k", k}};
        if (status_ != Status::open) {
            res.error_code = status_ == Status::exhausted ? "budget_exhausted" : "closed";
            log_error(ActionKind::search, payload, res.error_code);
            return res;
        }
        if (budget_remaining_ <= 0) {
            status_ = Status::exhausted;
            res.error_code = "budget_exhausted";
            log_error(ActionKind::search, payload, res.error_code);
            return res;
        }
        --budget_remaining_;
        res = run_search(query, k);
        log(ActionKind::search, payload, res.rendered);
        return res;
    }

    FetchResult fetch(const std::string& target) {
        FetchResult res;
        json payload = {{"target", target}};
        if (status_ != Status::open) {
            res.error_code = status_ == Status::exhausted ? "budget_exhausted" : "closed";
            log_error(ActionKind::fetch, payload, res.error_code);
            return res;
        }
        if (budget_remaining_ <= 0) {
            status_ = Status::exhausted;
            res.error_code = "budget_exhausted";
            log_error(ActionKind::fetch, payload, res.error_code);
            return res;
        }
        --budget_remaining_;

        std::optional<EntityId> id;
        if (store_.page(target)) id = target;
        else id = store_.resolve(target);
        // A locked page is indistinguishable from a nonexistent one.
        if (!id || !masking::is_fetchable(*id, policy_, unlocked_)) {
            res.ok = false;
            res.error_code = "not_found";
            res.content = "not found";
            log(ActionKind::fetch, payload, res.content);
            return res;
        }
        visited_.insert(*id);
        unlocked_ = masking::unlocked_entities(policy_, visited_);
        const corpus::PageRecord* page = store_.page(*id);
        std::string view = page->title + "\n\n" + page->body;
        res.ok = true;
        res.content = masking::mask_text(std::move(view), policy_, unlocked_, *id);
        log(ActionKind::fetch, payload, res.content);
        return res;
    }

    // Submission never consumes tool budget and is honored after exhaustion.
    void submit(const FinalResponse& response) {
        if (status_ == Status::answered || status_ == Status::refused)
            throw Error("closed", "episode already closed");
        if (response.kind == FinalResponse::Kind::attempt && response.answer_text.empty())
            throw Error("invalid_response", "attempt with empty answer text");
        final_response_ = response;
        has_final_ = true;
        status_ = response.kind == FinalResponse::Kind::attempt ? Status::answered
                                                                : Status::refused;
        json payload = {{"kind", response.kind == FinalResponse::Kind::attempt ? "attempt"
                                                                               : "refuse"},
                        {"answer_text", response.answer_text}};
        log(ActionKind::submit, payload, response.answer_text);
    }

    // EvidenceLoop memory retrievals are logged for auditability but do not
    // consume budget.
    void log_retrieve(const std::string& eid, const std::string& content) {
        log(ActionKind::retrieve, json{{"eid", eid}}, content);
    }

    // Terminal flush for episodes still open at service shutdown.
    void flush_as_refuse() {
        if (status_ == Status::answered || status_ == Status::refused) return;
        submit(FinalResponse{FinalResponse::Kind::refuse, "", {}});
        flushed_ = true;
    }

    Trace export_trace() const {
        if (status_ == Status::open)
            throw Error("open_episode", "cannot export trace of an open episode");
        Trace t;
        t.question_id = record_.id;
        t.episode_id = episode_id_;
        t.budget_initial = budget_initial_;
        t.budget_remaining = budget_remaining_;
        t.final_status = status_;
        t.has_final = has_final_;
        t.final_response = final_response_;
        t.flushed_on_shutdown = flushed_;
        t.visited = visited_;
        t.events = events_;
        return t;
    }

private:
    SearchResult run_search(const std::string& query, std::size_t k) {
        SearchResult res;
        res.ok = true;
        auto query_tokens = text::tokenize(query);
        // Overfetch, then apply mask-aware filtering down to k.
        auto hits = store_.search(query, k + policy_.masked.size() + 8);
        for (const auto& hit : hits) {
            if (res.items.size() >= k) break;
            // Locked entities never appear as result documents.
            if (!masking::is_fetchable(hit.id, policy_, unlocked_)) continue;
            const corpus::PageRecord* page = store_.page(hit.id);
            std::string masked_title = masking::mask_text(page->title, policy_, unlocked_, "");
            std::string masked_body = masking::mask_text(page->body, policy_, unlocked_, "");
            // Drop documents whose only query-term matches were masked away.
            bool any_match = false;
            auto title_toks = text::tokenize(masked_title);
            auto body_toks = text::tokenize(masked_body);
            for (const auto& qt : query_tokens) {
                if (std::find(title_toks.begin(), title_toks.end(), qt) != title_toks.end() ||
                    std::find(body_toks.begin(), body_toks.end(), qt) != body_toks.end()) {
                    any_match = true;
                    break;
                }
            }
            if (!any_match) continue;
            res.items.push_back({masked_title, make_snippet(masked_body, query_tokens), hit.id});
        }
        json rendered = json::array();
        for (const auto& item : res.items)
            rendered.push_back({{"title", item.display},
                                {"snippet", item.snippet},
                                {"handle", item.handle}});
        res.rendered = rendered.dump();
        return res;
    }

    static std::string make_snippet(const std::string& masked_body,
                                    const std::vector<std::string>& query_tokens) {
        auto sentences = text::split_sentences(masked_body, {});
        for (const auto& s : sentences) {
            std::string sent = masked_body.substr(s.begin, s.end - s.begin);
            auto toks = text::tokenize(sent);
            for (const auto& qt : query_tokens)
                if (std::find(toks.begin(), toks.end(), qt) != toks.end())
                    return sent.size() > 240 ? sent.substr(0, 240) : sent;
        }
        return masked_body.size() > 240 ? masked_body.substr(0, 240) : masked_body;
    }

    void log(ActionKind kind, json payload, const std::string& response_content) {
        events_.push_back({kind, std::move(payload), sha256_hex(response_content), next_seq_++});
    }

    void log_error(ActionKind kind, json payload, const std::string& code) {
        payload["rejected"] = true;
        payload["error_code"] = code;
        events_.push_back({kind, std::move(payload), sha256_hex(code), next_seq_++});
    }

    const CorpusStore& store_;
    QuestionRecord record_;
    masking::MaskPolicy policy_;
    std::set<EntityId> visited_;
    std::set<EntityId> unlocked_;
    std::vector<ActionEvent> events_;
    int budget_remaining_;
    int budget_initial_;
    Status status_ = Status::open;
    bool has_final_ = false;
    bool flushed_ = false;
    FinalResponse final_response_;
    std::string episode_id_;
    std::uint64_t next_seq_ = 0;
};

// Re-execute a trace's actions against the same corpus and record, checking
// that every served content digest reproduces exactly. Retrieve events hit
// agent-side memory and are carried over verbatim.
inline bool replay_matches(const CorpusStore& store, const QuestionRecord& record,
                           const Trace& trace) {
    Episode ep(store, record, trace.budget_initial, trace.episode_id);
    for (const auto& e : trace.events) {
        switch (e.kind) {
            case ActionKind::search:
                ep.search(e.payload.at("query").get<std::string>(),
                          e.payload.at("k").get<std::size_t>());
                break;
            case ActionKind::fetch:
                ep.fetch(e.payload.at("target").get<std::string>());
                break;
            case ActionKind::submit: {
                FinalResponse fr;
                fr.kind = e.payload.at("kind").get<std::string>() == "attempt"
                              ? FinalResponse::Kind::attempt
                              : FinalResponse::Kind::refuse;
                fr.answer_text = e.payload.value("answer_text", "");
                ep.submit(fr);
                break;
            }
            case ActionKind::retrieve:
                ep.log_retrieve(e.payload.at("eid").get<std::string>(), "");
                break;
        }
    }
    Trace replayed = ep.export_trace();
    if (replayed.events.size() != trace.events.size()) return false;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        if (trace.events[i].kind == ActionKind::retrieve) continue;
        if (replayed.events[i].response_digest != trace.events[i].response_digest) return false;
    }
    return replayed.visited == trace.visited;
}

// Minimal session surface agents program against; implemented in-process by
// Episode and over the wire by the HTTP client.
class Session {
public:
    virtual ~Session() = default;
    virtual SearchResult search(const std::string& query, std::size_t k) = 0;
    virtual FetchResult fetch(const std::string& target) = 0;
    virtual void submit(const FinalResponse& response) = 0;
    virtual void log_retrieve(const std::string& eid, const std::string& content) = 0;
    virtual int budget_remaining() const = 0;
    virtual Trace trace() const = 0;
};

class InProcessSession : public Session {
public:
    explicit InProcessSession(Episode& episode) : episode_(episode) {}

    SearchResult search(const std::string& query, std::size_t k) override {
        return episode_.search(query, k);
    }
    FetchResult fetch(const std::string& target) override { return episode_.fetch(target); }
    void submit(const FinalResponse& response) override { episode_.submit(response); }
    void log_retrieve(const std::string& eid, const std::string& content) override {
        episode_.log_retrieve(eid, content);
    }
    int budget_remaining() const override { return episode_.budget_remaining(); }
    Trace trace() const override { return episode_.export_trace(); }

private:
    Episode& episode_;
};

}  // namespace dseval::sandbox
