#pragma once
// Sandbox HTTP service and the matching wire client. One JSON schema for
// all bodies; errors carry machine-readable codes (budget_exhausted,
// not_found, closed).

#include <httplib.h>

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include "dseval/chain.hpp"
#include "dseval/corpus.hpp"
#include "dseval/error.hpp"
#include "dseval/sandbox.hpp"

namespace dseval::server {

using chain::QuestionRecord;
using corpus::CorpusStore;
using sandbox::Episode;
using sandbox::FinalResponse;
using sandbox::Trace;
using json = nlohmann::json;

class Service {
public:
    Service(const CorpusStore& store, std::map<std::string, QuestionRecord> records,
            bool allow_unverified = false, std::set<std::string> verified_ids = {})
        : store_(store),
          records_(std::move(records)),
          allow_unverified_(allow_unverified),
          verified_ids_(std::move(verified_ids)) {
        register_routes();
    }

    bool listen(const std::string& host, int port) { return http_.listen(host, port); }

    bool bind_any_port(const std::string& host, int* port_out) {
        int port = http_.bind_to_any_port(host);
        if (port <= 0) return false;
        *port_out = port;
        return true;
    }

    bool listen_after_bind() { return http_.listen_after_bind(); }

    // Flush every still-open episode as a shutdown refuse and stop serving.
    std::vector<Trace> shutdown() {
        http_.stop();
        std::vector<Trace> flushed;
        std::lock_guard<std::mutex> lock(mutex_);
        for (auto& [id, slot] : episodes_) {
            std::lock_guard<std::mutex> ep_lock(slot->mutex);
            if (slot->episode.status() == sandbox::Status::open ||
                slot->episode.status() == sandbox::Status::exhausted) {
                slot->episode.flush_as_refuse();
                flushed.push_back(slot->episode.export_trace());
            }
        }
        return flushed;
    }

    std::size_t episode_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return episodes_.size();
    }

private:
    struct EpisodeSlot {
        EpisodeSlot(const CorpusStore& store, const QuestionRecord& record, int budget,
                    std::string id)
            : episode(store, record, budget, std::move(id)) {}
        Episode episode;
        std::mutex mutex;  // the service serializes actions per episode
    };

    static void reply_error(httplib::Response& res, int status, const std::string& code,
                            const std::string& message) {
        res.status = status;
        res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(),
                        "application/json");
    }

    std::shared_ptr<EpisodeSlot> find_episode(const std::string& id) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = episodes_.find(id);
        return it == episodes_.end() ? nullptr : it->second;
    }

    void register_routes() {
        http_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"format_version", 1},
                                 {"pages", store_.page_count()},
                                 {"records", records_.size()},
                                 {"episodes", episode_count()}}
                                .dump(),
                            "application/json");
        });

        http_.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("question_id"))
                return reply_error(res, 400, "bad_request", "expected {question_id}");
            std::string qid = body["question_id"].get<std::string>();
            auto it = records_.find(qid);
            if (it == records_.end())
                return reply_error(res, 404, "not_found", "unknown question id");
            if (!allow_unverified_ && !verified_ids_.count(qid))
                return reply_error(res, 409, "unverified_record",
                                   "record not verified; start service with --allow-unverified");
            int budget = body.value("budget", sandbox::kDefaultToolBudget);
            std::string eid;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                eid = "ep-" + std::to_string(next_episode_++);
                episodes_.emplace(eid,
                                  std::make_shared<EpisodeSlot>(store_, it->second, budget, eid));
            }
            res.set_content(json{{"episode_id", eid}}.dump(), "application/json");
        });

        http_.Post(R"(/episodes/([^/]+)/search)",
                   [this](const httplib::Request& req, httplib::Response& res) {
            auto slot = find_episode(req.matches[1]);
            if (!slot) return reply_error(res, 404, "not_found", "unknown episode");
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("query"))
                return reply_error(res, 400, "bad_request", "expected {query, k}");
            std::lock_guard<std::mutex> lock(slot->mutex);
            auto r = slot->episode.search(body["query"].get<std::string>(),
                                          body.value("k", std::size_t{5}));
            if (!r.ok) return reply_error(res, 409, r.error_code, r.error_code);
            json items = json::array();
            for (const auto& item : r.items)
                items.push_back({{"title", item.display},
                                 {"snippet", item.snippet},
                                 {"handle", item.handle}});
            res.set_content(json{{"items", items},
                                 {"budget_remaining", slot->episode.budget_remaining()}}
                                .dump(),
                            "application/json");
        });

        http_.Post(R"(/episodes/([^/]+)/fetch)",
                   [this](const httplib::Request& req, httplib::Response& res) {
            auto slot = find_episode(req.matches[1]);
            if (!slot) return reply_error(res, 404, "not_found", "unknown episode");
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("target"))
                return reply_error(res, 400, "bad_request", "expected {target}");
            std::lock_guard<std::mutex> lock(slot->mutex);
            auto r = slot->episode.fetch(body["target"].get<std::string>());
            if (!r.ok) {
                int status = r.error_code == "not_found" ? 404 : 409;
                return reply_error(res, status, r.error_code, r.error_code);
            }
            res.set_content(json{{"content", r.content},
                                 {"budget_remaining", slot->episode.budget_remaining()}}
                                .dump(),
                            "application/json");
        });

        http_.Post(R"(/episodes/([^/]+)/submit)",
                   [this](const httplib::Request& req, httplib::Response& res) {
            auto slot = find_episode(req.matches[1]);
            if (!slot) return reply_error(res, 404, "not_found", "unknown episode");
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("kind"))
                return reply_error(res, 400, "bad_request", "expected {kind, answer_text?}");
            FinalResponse fr;
            fr.kind = body["kind"].get<std::string>() == "attempt" ? FinalResponse::Kind::attempt
                                                                   : FinalResponse::Kind::refuse;
            fr.answer_text = body.value("answer_text", "");
            if (body.contains("claims"))
                for (const auto& c : body["claims"])
                    fr.claims.emplace_back(c.at("claim").get<std::string>(),
                                           c.at("eid").get<std::string>());
            std::lock_guard<std::mutex> lock(slot->mutex);
            try {
                slot->episode.submit(fr);
            } catch (const Error& e) {
                return reply_error(res, 409, e.code(), e.what());
            }
            res.set_content(json{{"status", sandbox::to_string(slot->episode.status())}}.dump(),
                            "application/json");
        });

        http_.Post(R"(/episodes/([^/]+)/retrieve)",
                   [this](const httplib::Request& req, httplib::Response& res) {
            auto slot = find_episode(req.matches[1]);
            if (!slot) return reply_error(res, 404, "not_found", "unknown episode");
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("eid"))
                return reply_error(res, 400, "bad_request", "expected {eid}");
            std::lock_guard<std::mutex> lock(slot->mutex);
            slot->episode.log_retrieve(body["eid"].get<std::string>(),
                                       body.value("content", ""));
            res.set_content(json{{"ok", true}}.dump(), "application/json");
        });

        http_.Get(R"(/episodes/([^/]+)/trace)",
                  [this](const httplib::Request& req, httplib::Response& res) {
            auto slot = find_episode(req.matches[1]);
            if (!slot) return reply_error(res, 404, "not_found", "unknown episode");
            std::lock_guard<std::mutex> lock(slot->mutex);
            try {
                res.set_content(slot->episode.export_trace().to_ndjson(), "application/x-ndjson");
            } catch (const Error& e) {
                reply_error(res, 409, e.code(), e.what());
            }
        });
    }

    const CorpusStore& store_;
    std::map<std::string, QuestionRecord> records_;
    bool allow_unverified_;
    std::set<std::string> verified_ids_;
    httplib::Server http_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<EpisodeSlot>> episodes_;
    std::uint64_t next_episode_ = 0;
};

// sandbox::Session implementation over the wire.
class HttpSession : public sandbox::Session {
public:
    HttpSession(std::string base_url, std::string question_id,
                int budget = sandbox::kDefaultToolBudget)
        : base_url_(std::move(base_url)) {
        httplib::Client client(base_url_);
        auto res = client.Post("/episodes",
                               json{{"question_id", question_id}, {"budget", budget}}.dump(),
                               "application/json");
        if (!res || res->status != 200)
            throw Error("endpoint_failure", "failed to open episode" +
                                                (res ? ": " + res->body : std::string{}));
        episode_id_ = json::parse(res->body).at("episode_id").get<std::string>();
        budget_remaining_ = budget;
    }

    const std::string& episode_id() const { return episode_id_; }

    sandbox::SearchResult search(const std::string& query, std::size_t k) override {
        sandbox::SearchResult out;
        auto res = post("/episodes/" + episode_id_ + "/search",
                        json{{"query", query}, {"k", k}});
        if (!res.first) {
            out.error_code = res.second;
            return out;
        }
        out.ok = true;
        json rendered = json::array();
        for (const auto& item : res.first->at("items")) {
            out.items.push_back({item.at("title").get<std::string>(),
                                 item.at("snippet").get<std::string>(),
                                 item.at("handle").get<std::string>()});
            rendered.push_back(item);
        }
        out.rendered = rendered.dump();
        budget_remaining_ = res.first->value("budget_remaining", budget_remaining_ - 1);
        return out;
    }

    sandbox::FetchResult fetch(const std::string& target) override {
        sandbox::FetchResult out;
        auto res = post("/episodes/" + episode_id_ + "/fetch", json{{"target", target}});
        if (!res.first) {
            out.error_code = res.second;
            if (res.second == "not_found") {
                out.content = "not found";
                --budget_remaining_;
            }
            return out;
        }
        out.ok = true;
        out.content = res.first->at("content").get<std::string>();
        budget_remaining_ = res.first->value("budget_remaining", budget_remaining_ - 1);
        return out;
    }

    void submit(const FinalResponse& response) override {
        json claims = json::array();
        for (const auto& [c, eid] : response.claims)
            claims.push_back({{"claim", c}, {"eid", eid}});
        auto res = post("/episodes/" + episode_id_ + "/submit",
                        json{{"kind", response.kind == FinalResponse::Kind::attempt ? "attempt"
                                                                                    : "refuse"},
                             {"answer_text", response.answer_text},
                             {"claims", claims}});
        if (!res.first) throw Error(res.second, "submit failed: " + res.second);
    }

    void log_retrieve(const std::string& eid, const std::string& content) override {
        post("/episodes/" + episode_id_ + "/retrieve", json{{"eid", eid}, {"content", content}});
    }

    int budget_remaining() const override { return budget_remaining_; }

    Trace trace() const override {
        httplib::Client client(base_url_);
        auto res = client.Get("/episodes/" + episode_id_ + "/trace");
        if (!res || res->status != 200)
            throw Error("endpoint_failure", "failed to fetch trace");
        return Trace::from_ndjson(res->body);
    }

private:
    // returns (body, "") on 200, (nullopt, error_code) otherwise
    std::pair<std::optional<json>, std::string> post(const std::string& path, const json& body) {
        httplib::Client client(base_url_);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) return {std::nullopt, "transport_failure"};
        json j = json::parse(res->body, nullptr, false);
        if (res->status != 200) {
            std::string code = "http_" + std::to_string(res->status);
            if (!j.is_discarded() && j.contains("error"))
                code = j["error"].value("code", code);
            return {std::nullopt, code};
        }
        return {j, ""};
    }

    std::string base_url_;
    std::string episode_id_;
    int budget_remaining_ = sandbox::kDefaultToolBudget;
};

}  // namespace dseval::server
