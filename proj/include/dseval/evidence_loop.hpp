#pragma once
// Iterative refinement controller: parallel-breadth solvers with an
// append-only evidence memory, claim-level verification, extraction and
// aggregation between rounds, and a synthesis-only fallback.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/agents.hpp"
#include "dseval/chat.hpp"
#include "dseval/error.hpp"
#include "dseval/sandbox.hpp"
#include "dseval/sha256.hpp"

namespace dseval::evloop {

using agents::ParsedAction;
using sandbox::FinalResponse;
using sandbox::Session;
using sandbox::Trace;
using json = nlohmann::json;

// Append-only store of full retrieved content keyed by EID.
class EvidenceMemory {
public:
    std::string store(std::string content, json source) {
        std::lock_guard<std::mutex> lock(mutex_);
        std::string eid = format_eid(++counter_);
        entries_.emplace(eid, Entry{std::move(content), std::move(source)});
        return eid;
    }

    bool contains(const std::string& eid) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.count(eid) > 0;
    }

    const std::string& retrieve(const std::string& eid) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(eid);
        if (it == entries_.end()) throw Error("unknown_eid", "unknown EID: " + eid);
        return it->second.content;
    }

    std::string digest(const std::string& eid) const { return sha256_hex(retrieve(eid)); }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    static std::string format_eid(std::size_t n) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "EID-%03zu", n);  // widens past 999
        return buf;
    }

private:
    struct Entry {
        std::string content;
        json source;
    };
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
    std::size_t counter_ = 0;
};

struct LoopConfig {
    int n_solvers = 3;       // breadth
    int max_rounds = 3;      // iteration
    int action_budget = 0;   // per solver; 0 derives floor(budget / (N * R_max))
    std::size_t context_token_budget = 32000;
    std::size_t default_k = 5;
};

struct Context {
    int round = 0;
    std::string findings;  // empty at round 0
};

struct VerifyResult {
    bool accepted = false;
    std::string feedback;
};

struct SolverResult {
    bool proposed = false;  // accepted proposal
    std::string answer;
    std::vector<std::pair<std::string, std::string>> claims;
    std::string findings;   // transcript-derived findings (always set)
};

namespace detail {

inline std::string yes_no(chat::Endpoint& endpoint, const std::string& prompt) {
    std::vector<chat::Message> msgs = {
        {"system", "Answer YES or NO only."}, {"user", prompt}};
    return endpoint.chat(msgs).content;
}

inline bool says_yes(const std::string& reply) {
    std::string n = text::normalize(reply);
    return n.rfind("yes", 0) == 0;
}

}  // namespace detail

// Claim-level verification: per-claim entailment against the EID's stored
// content, collective derivation of the answer, and question fit. Any
// transport failure rejects; verification never silently accepts.
inline VerifyResult verify_proposal(chat::Endpoint& verifier, const EvidenceMemory& memory,
                                    const std::string& question, const std::string& answer,
                                    const std::vector<std::pair<std::string, std::string>>& claims) {
    if (claims.empty()) return {false, "no claims: every answer must cite evidence by EID"};
    try {
        for (std::size_t i = 0; i < claims.size(); ++i) {
            const auto& [claim, eid] = claims[i];
            if (!memory.contains(eid))
                return {false, "claim " + std::to_string(i) + " cites unknown " + eid};
            std::string reply = detail::yes_no(
                verifier, "Source content:\n" + memory.retrieve(eid) +
                              "\n\nDoes the source genuinely entail this claim?\nClaim: " + claim);
            if (!detail::says_yes(reply))
                return {false, "claim " + std::to_string(i) + " is not entailed by " + eid};
        }
        std::string all_claims;
        for (const auto& [claim, eid] : claims) all_claims += "- " + claim + " [" + eid + "]\n";
        std::string reply = detail::yes_no(
            verifier, "Claims:\n" + all_claims + "\nDo these claims collectively derive the answer \"" +
                          answer + "\"?");
        if (!detail::says_yes(reply)) return {false, "claims do not collectively derive the answer"};
        reply = detail::yes_no(verifier, "Question: " + question + "\nProposed answer: " + answer +
                                             "\nDoes the answer directly address the question?");
        if (!detail::says_yes(reply)) return {false, "answer does not address the question"};
        return {true, ""};
    } catch (const Error&) {
        return {false, "verification unavailable"};
    }
}

inline const char* kSolverSystemPrompt =
    "You are a search solver. Explore the corpus and gather evidence.\n"
    "Every search/fetch observation is stored in memory under an EID shown "
    "in brackets; cite EIDs when you answer.\n"
    "Respond with exactly one action per turn:\n"
    "ACTION search\nQUERY <keywords>\nK <count, optional>\n\n"
    "ACTION fetch\nTARGET <page title or handle>\n\n"
    "ACTION retrieve\nEID <EID-xxx>\n\n"
    "ACTION answer\nANSWER <entity name>\nCLAIM <fact> [EID-xxx]  (one line per claim)\n\n"
    "ACTION refuse\n";

inline const char* kSynthesisSystemPrompt =
    "You are a synthesis solver. You may NOT search or fetch; reason only "
    "over the provided context and memory.\n"
    "Respond with exactly one action per turn:\n"
    "ACTION retrieve\nEID <EID-xxx>\n\n"
    "ACTION answer\nANSWER <entity name>\nCLAIM <fact> [EID-xxx]\n\n"
    "ACTION refuse\n";

using VerifyFn = std::function<VerifyResult(
    const std::string& answer, const std::vector<std::pair<std::string, std::string>>& claims)>;

// One solver: up to `budget` tool actions; observations auto-stored with
// their EIDs surfaced to the model; a proposal triggers verification and,
// on rejection, the feedback re-enters the transcript.
inline SolverResult run_solver(chat::Endpoint& endpoint, Session& session,
                               const Context& context, EvidenceMemory& memory,
                               int budget, const std::string& question,
                               const VerifyFn& verify, const LoopConfig& config,
                               bool allow_tools = true) {
    std::vector<chat::Message> messages;
    messages.push_back({"system", allow_tools ? kSolverSystemPrompt : kSynthesisSystemPrompt});
    std::string user = "Question: " + question;
    if (!context.findings.empty())
        user += "\n\nContext from previous rounds:\n" + context.findings;
    messages.push_back({"user", user});

    SolverResult result;
    auto snapshot_findings = [&]() {
        std::string f;
        for (const auto& m : messages)
            if (m.role == "assistant") f += m.content + "\n";
        result.findings = f;
    };

    int actions_used = 0;
    int parse_failures = 0;
    int max_turns = budget * 2 + 8;
    for (int turn = 0; turn < max_turns; ++turn) {
        std::string completion;
        try {
            completion = endpoint.chat(messages).content;
        } catch (const Error&) {
            snapshot_findings();
            return result;
        }
        messages.push_back({"assistant", completion});
        auto action = agents::parse_action(completion);
        if (!action) {
            if (++parse_failures >= 2) break;  // one reprompt, then give up
            messages.push_back({"user", "ERROR unparseable action. Reply with one ACTION block."});
            continue;
        }
        parse_failures = 0;
        switch (action->kind) {
            case ParsedAction::Kind::search: {
                if (!allow_tools || actions_used >= budget) { snapshot_findings(); return result; }
                ++actions_used;
                auto r = session.search(action->query, action->k ? action->k : config.default_k);
                if (r.ok) {
                    std::string eid = memory.store(r.rendered,
                                                   json{{"kind", "search"}, {"query", action->query}});
                    messages.push_back({"user", "[" + eid + "] OBSERVATION:\n" + r.rendered});
                } else {
                    messages.push_back({"user", "ERROR " + r.error_code});
                }
                break;
            }
            case ParsedAction::Kind::fetch: {
                if (!allow_tools || actions_used >= budget) { snapshot_findings(); return result; }
                ++actions_used;
                auto r = session.fetch(action->target);
                if (r.ok) {
                    std::string eid = memory.store(r.content,
                                                   json{{"kind", "fetch"}, {"target", action->target}});
                    messages.push_back({"user", "[" + eid + "] OBSERVATION:\n" + r.content});
                } else {
                    messages.push_back({"user", "ERROR " + r.error_code});
                }
                break;
            }
            case ParsedAction::Kind::retrieve: {
                try {
                    const std::string& content = memory.retrieve(action->eid);
                    session.log_retrieve(action->eid, content);
                    messages.push_back({"user", "[" + action->eid + "] FULL CONTENT:\n" + content});
                } catch (const Error&) {
                    messages.push_back({"user", "ERROR unknown EID"});
                }
                break;
            }
            case ParsedAction::Kind::answer: {
                VerifyResult v = verify(action->answer, action->claims);
                if (v.accepted) {
                    result.proposed = true;
                    result.answer = action->answer;
                    result.claims = action->claims;
                    snapshot_findings();
                    return result;
                }
                messages.push_back({"user", "VERIFICATION REJECTED: " + v.feedback});
                break;
            }
            case ParsedAction::Kind::refuse:
                snapshot_findings();
                return result;
        }
        agents::enforce_context_ceiling(messages, config.context_token_budget);
    }
    snapshot_findings();
    return result;
}

struct Findings {
    std::string text;
    bool fallback = false;  // endpoint failed; passthrough concatenation
};

// Distill one round's solver outputs into a single findings text, keeping
// EID markers verbatim.
inline Findings extract_findings(chat::Endpoint& endpoint,
                                 const std::vector<std::string>& solver_outputs) {
    std::string joined;
    for (std::size_t i = 0; i < solver_outputs.size(); ++i)
        joined += "--- solver " + std::to_string(i) + " ---\n" + solver_outputs[i] + "\n";
    if (joined.empty()) return {"", true};
    std::vector<chat::Message> msgs = {
        {"system",
         "Extract the key findings, entity references, and promising paths from these solver "
         "transcripts. Keep every EID marker (e.g. [EID-042]) verbatim next to its fact. "
         "Deduplicate repeated discoveries."},
        {"user", joined}};
    try {
        return {endpoint.chat(msgs).content, false};
    } catch (const Error&) {
        return {joined, true};
    }
}

// Strip EID markers that do not resolve in memory (models occasionally
// invent them), so aggregated contexts stay fully resolvable.
inline std::string sanitize_eids(std::string text_in, const EvidenceMemory& memory) {
    std::size_t pos = 0;
    while ((pos = text_in.find("EID-", pos)) != std::string::npos) {
        std::size_t end = pos + 4;
        while (end < text_in.size() && std::isdigit(static_cast<unsigned char>(text_in[end]))) ++end;
        std::string eid = text_in.substr(pos, end - pos);
        if (end == pos + 4 || !memory.contains(eid)) {
            // drop the token (and its brackets when present)
            std::size_t from = pos, to = end;
            if (from > 0 && text_in[from - 1] == '[' && to < text_in.size() && text_in[to] == ']') {
                --from;
                ++to;
            }
            text_in.erase(from, to - from);
            pos = from;
        } else {
            pos = end;
        }
    }
    return text_in;
}

inline Context aggregate_context(chat::Endpoint& endpoint, const Findings& findings,
                                 const Context& previous, const EvidenceMemory& memory) {
    Context next;
    next.round = previous.round + 1;
    std::vector<chat::Message> msgs = {
        {"system",
         "Synthesize the previous context and the new findings into one refined context for the "
         "next search round. Keep EID markers verbatim. Retain valuable evidence, discard noise."},
        {"user", "Previous context:\n" + previous.findings + "\n\nNew findings:\n" + findings.text}};
    try {
        next.findings = sanitize_eids(endpoint.chat(msgs).content, memory);
    } catch (const Error&) {
        next.findings = sanitize_eids(previous.findings + "\n" + findings.text, memory);
    }
    return next;
}

struct LoopRunInfo {
    int rounds_run = 0;
    bool fallback_used = false;
    bool accepted = false;
    std::vector<std::string> round_contexts;
};

// Full controller. Solvers within a round share the episode and the memory;
// the first accepted verification terminates everything and submits.
inline Trace run_evidenceloop(chat::Endpoint& endpoint, Session& session,
                              const std::string& question, LoopConfig config,
                              chat::Endpoint* verifier = nullptr,
                              EvidenceMemory* memory_out = nullptr,
                              LoopRunInfo* info_out = nullptr) {
    chat::Endpoint& v = verifier ? *verifier : endpoint;
    EvidenceMemory local_memory;
    EvidenceMemory& memory = memory_out ? *memory_out : local_memory;
    LoopRunInfo info;

    int episode_budget = session.budget_remaining();
    int per_solver = config.action_budget > 0
                         ? config.action_budget
                         : std::max(1, episode_budget / (config.n_solvers * config.max_rounds));

    VerifyFn verify = [&](const std::string& answer,
                          const std::vector<std::pair<std::string, std::string>>& claims) {
        return verify_proposal(v, memory, question, answer, claims);
    };

    Context context;  // C^0 is empty
    std::vector<std::string> all_findings;
    for (int r = 0; r < config.max_rounds; ++r) {
        info.rounds_run = r + 1;
        session.log_retrieve("round-" + std::to_string(r), "");
        std::vector<std::string> outputs;
        for (int s = 0; s < config.n_solvers; ++s) {
            SolverResult result = run_solver(endpoint, session, context, memory, per_solver,
                                             question, verify, config, /*allow_tools=*/true);
            if (result.proposed) {
                info.accepted = true;
                session.submit({FinalResponse::Kind::attempt, result.answer, result.claims});
                if (info_out) *info_out = info;
                return session.trace();
            }
            outputs.push_back(result.findings);
        }
        Findings findings = extract_findings(endpoint, outputs);
        all_findings.push_back(findings.text);
        context = aggregate_context(endpoint, findings, context, memory);
        info.round_contexts.push_back(context.findings);
    }

    // fallback: consolidate everything and run a synthesis-only solver
    info.fallback_used = true;
    Context final_context;
    final_context.round = config.max_rounds;
    for (const auto& f : all_findings) final_context.findings += f + "\n";
    final_context.findings = sanitize_eids(final_context.findings, memory);
    SolverResult synth = run_solver(endpoint, session, final_context, memory, 0, question,
                                    verify, config, /*allow_tools=*/false);
    if (synth.proposed) {
        info.accepted = true;
        session.submit({FinalResponse::Kind::attempt, synth.answer, synth.claims});
    } else {
        session.submit({FinalResponse::Kind::refuse, "", {}});
    }
    if (info_out) *info_out = info;
    return session.trace();
}

}  // namespace dseval::evloop
