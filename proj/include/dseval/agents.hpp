#pragma once
// Reference agents over the sandbox session: the fenced line-oriented
// action grammar, a ReAct baseline, and the scripted agents used for
// ground-truth and refuse-all runs.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dseval/chain.hpp"
#include "dseval/chat.hpp"
#include "dseval/sandbox.hpp"
#include "dseval/text.hpp"

namespace dseval::agents {

using chain::QuestionRecord;
using sandbox::FinalResponse;
using sandbox::Session;
using sandbox::Trace;

// ---------------------------------------------------------------------------
// Action grammar
//
//   ACTION search        ACTION fetch      ACTION retrieve
//   QUERY <text>         TARGET <text>     EID <eid>
//   K <count, optional>
//
//   ACTION answer                          ACTION refuse
//   ANSWER <text>
//   CLAIM <text> [EID-xxx]   (zero or more)
// ---------------------------------------------------------------------------

struct ParsedAction {
    enum class Kind { search, fetch, retrieve, answer, refuse };
    Kind kind = Kind::refuse;
    std::string query;
    std::size_t k = 5;
    std::string target;
    std::string eid;
    std::string answer;
    std::vector<std::pair<std::string, std::string>> claims;  // (text, eid)
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && text::is_ascii_space(s[b])) ++b;
    while (e > b && text::is_ascii_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// "CLAIM Kane has brother Chad [EID-042]" -> ("Kane has brother Chad", "EID-042")
inline std::optional<std::pair<std::string, std::string>> parse_claim(const std::string& rest) {
    std::size_t open = rest.rfind('[');
    std::size_t close = rest.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    std::string eid = trim(rest.substr(open + 1, close - open - 1));
    std::string claim = trim(rest.substr(0, open));
    if (eid.rfind("EID-", 0) != 0 || claim.empty()) return std::nullopt;
    return std::make_pair(claim, eid);
}

}  // namespace detail

// Strict parse of the first ACTION block in a model completion. Fence lines
// are skipped; anything before the ACTION line is treated as reasoning.
inline std::optional<ParsedAction> parse_action(const std::string& completion) {
    std::istringstream in(completion);
    std::string line;
    std::optional<ParsedAction> action;
    while (std::getline(in, line)) {
        std::string t = detail::trim(line);
        if (t.rfind("```", 0) == 0) continue;
        if (!action) {
            if (t.rfind("ACTION", 0) != 0) continue;
            std::string verb = detail::trim(t.substr(6));
            ParsedAction a;
            if (verb == "search") a.kind = ParsedAction::Kind::search;
            else if (verb == "fetch") a.kind = ParsedAction::Kind::fetch;
            else if (verb == "retrieve") a.kind = ParsedAction::Kind::retrieve;
            else if (verb == "answer") a.kind = ParsedAction::Kind::answer;
            else if (verb == "refuse") a.kind = ParsedAction::Kind::refuse;
            else return std::nullopt;
            action = a;
            continue;
        }
        if (t.empty()) break;
        if (t.rfind("QUERY ", 0) == 0) action->query = detail::trim(t.substr(6));
        else if (t.rfind("K ", 0) == 0) {
            try { action->k = std::stoul(detail::trim(t.substr(2))); } catch (...) { return std::nullopt; }
        } else if (t.rfind("TARGET ", 0) == 0) action->target = detail::trim(t.substr(7));
        else if (t.rfind("EID ", 0) == 0) action->eid = detail::trim(t.substr(4));
        else if (t.rfind("ANSWER ", 0) == 0) action->answer = detail::trim(t.substr(7));
        else if (t.rfind("CLAIM ", 0) == 0) {
            auto claim = detail::parse_claim(detail::trim(t.substr(6)));
            if (!claim) return std::nullopt;
            action->claims.push_back(*claim);
        } else if (t.rfind("ACTION", 0) == 0) {
            break;  // only the first block counts
        }
        // other lines inside the block are ignored reasoning
    }
    if (!action) return std::nullopt;
    switch (action->kind) {
        case ParsedAction::Kind::search: if (action->query.empty()) return std::nullopt; break;
        case ParsedAction::Kind::fetch: if (action->target.empty()) return std::nullopt; break;
        case ParsedAction::Kind::retrieve: if (action->eid.empty()) return std::nullopt; break;
        case ParsedAction::Kind::answer: if (action->answer.empty()) return std::nullopt; break;
        case ParsedAction::Kind::refuse: break;
    }
    return action;
}

// Rough token estimate used for the agent-side context ceiling.
inline std::size_t estimate_tokens(const std::vector<chat::Message>& messages) {
    std::size_t chars = 0;
    for (const auto& m : messages) chars += m.content.size() + m.role.size();
    return chars / 4 + messages.size();
}

// Drop the oldest observation turns (everything after the system prompt and
// the original question) until the transcript fits the token budget.
inline void enforce_context_ceiling(std::vector<chat::Message>& messages,
                                    std::size_t token_budget) {
    while (estimate_tokens(messages) > token_budget && messages.size() > 2)
        messages.erase(messages.begin() + 2);
}

struct ReactConfig {
    int max_calls = sandbox::kDefaultToolBudget;
    std::size_t context_token_budget = 32000;
    std::size_t default_k = 5;
};

inline const char* kReactSystemPrompt =
    "You answer questions by searching a page corpus.\n"
    "Respond with exactly one action per turn using this grammar:\n"
    "ACTION search\nQUERY <keywords>\nK <result count, optional>\n\n"
    "ACTION fetch\nTARGET <page title or handle>\n\n"
    "ACTION answer\nANSWER <entity name>\n\n"
    "ACTION refuse\n\n"
    "Search and fetch consume your tool budget. When you know the answer, "
    "use ACTION answer. If you cannot find it, use ACTION refuse.";

// ReAct loop: model turn -> parsed tool call or final submit. Ends with a
// submit in every case (forced refuse after repeated parse failures or when
// the budget is gone and the model still will not answer).
inline Trace run_react(chat::Endpoint& endpoint, Session& session,
                       const std::string& question, const ReactConfig& config = {}) {
    std::vector<chat::Message> messages = {{"system", kReactSystemPrompt},
                                           {"user", "Question: " + question}};
    int consecutive_parse_failures = 0;
    // generous turn cap so that a misbehaving endpoint cannot spin forever
    int max_turns = config.max_calls * 2 + 8;
    for (int turn = 0; turn < max_turns; ++turn) {
        std::string completion;
        try {
            completion = endpoint.chat(messages).content;
        } catch (const Error&) {
            session.submit({FinalResponse::Kind::refuse, "", {}});
            return session.trace();
        }
        messages.push_back({"assistant", completion});
        auto action = parse_action(completion);
        if (!action) {
            if (++consecutive_parse_failures >= 3) {
                session.submit({FinalResponse::Kind::refuse, "", {}});
                return session.trace();
            }
            messages.push_back({"user",
                                "ERROR unparseable action. Reply with exactly one ACTION block."});
            continue;
        }
        consecutive_parse_failures = 0;
        switch (action->kind) {
            case ParsedAction::Kind::search: {
                auto r = session.search(action->query,
                                        action->k ? action->k : config.default_k);
                messages.push_back({"user", r.ok ? "OBSERVATION:\n" + r.rendered
                                                 : "ERROR " + r.error_code});
                break;
            }
            case ParsedAction::Kind::fetch: {
                auto r = session.fetch(action->target);
                messages.push_back({"user", r.ok ? "OBSERVATION:\n" + r.content
                                                 : "ERROR " + r.error_code});
                break;
            }
            case ParsedAction::Kind::retrieve:
                messages.push_back({"user", "ERROR retrieve is not available to this agent"});
                break;
            case ParsedAction::Kind::answer:
                session.submit({FinalResponse::Kind::attempt, action->answer, action->claims});
                return session.trace();
            case ParsedAction::Kind::refuse:
                session.submit({FinalResponse::Kind::refuse, "", {}});
                return session.trace();
        }
        enforce_context_ceiling(messages, config.context_token_budget);
    }
    session.submit({FinalResponse::Kind::refuse, "", {}});
    return session.trace();
}

// Ground-truth scripted agent: walks the chain pages v0..v_{n-1} in order,
// then answers with the answer entity's canonical title.
inline Trace run_ground_truth(Session& session, const QuestionRecord& record,
                              const std::string& answer_title) {
    for (std::size_t i = 0; i + 1 < record.chain.entities.size(); ++i)
        session.fetch(record.chain.entities[i]);
    session.submit({FinalResponse::Kind::attempt, answer_title, {}});
    return session.trace();
}

inline Trace run_refuse_all(Session& session) {
    session.submit({FinalResponse::Kind::refuse, "", {}});
    return session.trace();
}

}  // namespace dseval::agents
