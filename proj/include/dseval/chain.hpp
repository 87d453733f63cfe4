#pragma once
// Question construction: blocked-edge BFS path discovery, evidence chain
// extraction, cloze probe generation, and the three oracle verification
// checks that gate record acceptance.

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/chat.hpp"
#include "dseval/corpus.hpp"
#include "dseval/error.hpp"
#include "dseval/sha256.hpp"
#include "dseval/text.hpp"

namespace dseval::chain {

using corpus::CorpusStore;
using corpus::EntityId;
using corpus::EvidenceSentence;
using json = nlohmann::json;

struct Chain {
    std::vector<EntityId> entities;  // v0..vn

    std::size_t hop_count() const {
        return entities.empty() ? 0 : entities.size() - 1;
    }
};

struct ProbeQuery {
    std::string prompt;
    EntityId expected_entity;
    std::vector<std::string> expected_aliases;
};

struct QuestionRecord {
    std::string id;
    std::string question;
    EntityId start_entity;
    EntityId answer_entity;
    std::vector<std::string> answer_aliases;
    Chain chain;
    std::vector<EvidenceSentence> evidence;
    std::vector<ProbeQuery> probes;

    std::size_t hop_count() const { return chain.hop_count(); }

    json to_json() const {
        json ev = json::array();
        for (const auto& e : evidence)
            ev.push_back({{"source", e.source}, {"target", e.target}, {"text", e.text},
                          {"start", e.byte_start}, {"end", e.byte_end}});
        json pr = json::array();
        for (const auto& p : probes)
            pr.push_back({{"prompt", p.prompt},
                          {"expected_entity", p.expected_entity},
                          {"expected_aliases", p.expected_aliases}});
        return json{{"format_version", 1},
                    {"id", id},
                    {"question", question},
                    {"start_entity", start_entity},
                    {"answer_entity", answer_entity},
                    {"answer_aliases", answer_aliases},
                    {"chain", chain.entities},
                    {"evidence", ev},
                    {"probes", pr},
                    {"hop_count", hop_count()}};
    }

    static QuestionRecord from_json(const json& j) {
        QuestionRecord r;
        r.id = j.at("id").get<std::string>();
        r.question = j.at("question").get<std::string>();
        r.start_entity = j.at("start_entity").get<std::string>();
        r.answer_entity = j.at("answer_entity").get<std::string>();
        r.answer_aliases = j.at("answer_aliases").get<std::vector<std::string>>();
        r.chain.entities = j.at("chain").get<std::vector<EntityId>>();
        for (const auto& ej : j.at("evidence")) {
            EvidenceSentence e;
            e.source = ej.at("source").get<std::string>();
            e.target = ej.at("target").get<std::string>();
            e.text = ej.at("text").get<std::string>();
            e.byte_start = ej.value("start", std::size_t{0});
            e.byte_end = ej.value("end", std::size_t{0});
            r.evidence.push_back(std::move(e));
        }
        for (const auto& pj : j.at("probes")) {
            ProbeQuery p;
            p.prompt = pj.at("prompt").get<std::string>();
            p.expected_entity = pj.at("expected_entity").get<std::string>();
            p.expected_aliases = pj.at("expected_aliases").get<std::vector<std::string>>();
            r.probes.push_back(std::move(p));
        }
        return r;
    }
};

struct VerificationReport {
    bool parametric_inaccessible = false;
    bool evidence_sufficient = false;
    std::vector<bool> necessity;
    bool accepted = false;
    std::vector<chat::Exchange> transcripts;

    json to_json() const {
        json tr = json::array();
        for (const auto& t : transcripts) {
            json msgs = json::array();
            for (const auto& m : t.request) msgs.push_back({{"role", m.role}, {"content", m.content}});
            tr.push_back({{"request", msgs}, {"response", t.response}});
        }
        return json{{"format_version", 1},
                    {"parametric_inaccessible", parametric_inaccessible},
                    {"evidence_sufficient", evidence_sufficient},
                    {"necessity", necessity},
                    {"accepted", accepted},
                    {"transcripts", tr}};
    }
};

// BFS shortest path from v0 to vn with the direct edge (v0,vn) removed.
// Neighbors are expanded in lexicographic entity-id order, which makes the
// returned path deterministic at equal depth.
inline std::optional<Chain> find_alternative_chain(const CorpusStore& store,
                                                   const EntityId& v0, const EntityId& vn) {
    if (v0 == vn) throw Error("degenerate_query", "degenerate query: v0 = vn");
    if (!store.page(v0)) throw Error("unknown_entity", "unknown entity: " + v0);
    if (!store.page(vn)) throw Error("unknown_entity", "unknown entity: " + vn);

    std::unordered_map<EntityId, EntityId> parent;
    std::deque<EntityId> frontier{v0};
    std::unordered_set<EntityId> seen{v0};
    while (!frontier.empty()) {
        EntityId u = frontier.front();
        frontier.pop_front();
        std::vector<EntityId> next = store.neighbors(u);
        std::sort(next.begin(), next.end());
        for (const auto& w : next) {
            if (u == v0 && w == vn) continue;  // blocked direct edge
            if (seen.count(w)) continue;
            seen.insert(w);
            parent[w] = u;
            if (w == vn) {
                std::vector<EntityId> path{vn};
                EntityId cur = vn;
                while (cur != v0) {
                    cur = parent.at(cur);
                    path.push_back(cur);
                }
                std::reverse(path.begin(), path.end());
                return Chain{std::move(path)};
            }
            frontier.push_back(w);
        }
    }
    return std::nullopt;
}

inline std::vector<EvidenceSentence> build_evidence_chain(const CorpusStore& store,
                                                          const Chain& chain) {
    std::vector<EvidenceSentence> out;
    for (std::size_t i = 0; i + 1 < chain.entities.size(); ++i) {
        try {
            out.push_back(store.evidence_sentence(chain.entities[i], chain.entities[i + 1]));
        } catch (const Error&) {
            throw Error("missing_edge", "no linking sentence at hop index " + std::to_string(i));
        }
    }
    return out;
}

inline constexpr const char* kBlankMarker = "____";

// Cloze probe: every target-alias occurrence in the evidence sentence is
// replaced with the blank marker, longest alias first.
inline ProbeQuery make_probe(const EvidenceSentence& evidence,
                             const EntityId& target,
                             std::vector<std::string> target_aliases) {
    std::sort(target_aliases.begin(), target_aliases.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    std::string prompt = evidence.text;
    for (const auto& alias : target_aliases) {
        if (alias.empty()) continue;
        std::size_t pos = 0;
        while ((pos = text::ifind(prompt, alias, pos)) != std::string::npos) {
            prompt.replace(pos, alias.size(), kBlankMarker);
            pos += std::char_traits<char>::length(kBlankMarker);
        }
    }
    std::string content_check = prompt;
    std::size_t bpos;
    while ((bpos = content_check.find(kBlankMarker)) != std::string::npos)
        content_check.erase(bpos, std::char_traits<char>::length(kBlankMarker));
    if (text::tokenize(content_check).empty())
        throw Error("degenerate_probe", "degenerate probe: blanking removed all content words");
    return ProbeQuery{std::move(prompt), target, std::move(target_aliases)};
}

inline std::string fresh_record_id(const std::string& question, const EntityId& v0,
                                   const EntityId& vn, const Chain& chain) {
    std::string material = question + "\x1f" + v0 + "\x1f" + vn;
    for (const auto& e : chain.entities) material += "\x1f" + e;
    return "q-" + sha256_hex(material).substr(0, 12);
}

inline QuestionRecord assemble_record(std::string question, const EntityId& v0,
                                      const EntityId& vn, Chain chain,
                                      std::vector<EvidenceSentence> evidence,
                                      std::vector<ProbeQuery> probes,
                                      std::vector<std::string> answer_aliases) {
    if (chain.entities.size() < 3)
        throw Error("invalid_record", "chain: fewer than 2 hops");
    if (chain.entities.front() != v0)
        throw Error("invalid_record", "chain: does not start at v0");
    if (chain.entities.back() != vn)
        throw Error("invalid_record", "chain: does not end at vn");
    std::set<EntityId> uniq(chain.entities.begin(), chain.entities.end());
    if (uniq.size() != chain.entities.size())
        throw Error("invalid_record", "chain: repeated entity");
    if (evidence.size() != chain.hop_count())
        throw Error("invalid_record", "evidence: length != hop_count");
    if (probes.size() != chain.hop_count())
        throw Error("invalid_record", "probes: length != hop_count");
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (evidence[i].source != chain.entities[i] || evidence[i].target != chain.entities[i + 1])
            throw Error("invalid_record", "evidence: hop " + std::to_string(i) +
                                              " does not link chain[i] -> chain[i+1]");
        if (probes[i].expected_entity != evidence[i].target)
            throw Error("invalid_record",
                        "probes: index " + std::to_string(i) + " does not match evidence target");
    }
    if (answer_aliases.empty())
        throw Error("invalid_record", "answer_aliases: empty");

    QuestionRecord r;
    r.id = fresh_record_id(question, v0, vn, chain);
    r.question = std::move(question);
    r.start_entity = v0;
    r.answer_entity = vn;
    r.answer_aliases = std::move(answer_aliases);
    r.chain = std::move(chain);
    r.evidence = std::move(evidence);
    r.probes = std::move(probes);
    return r;
}

namespace detail {

inline std::string evidence_block(const std::vector<EvidenceSentence>& evidence,
                                  std::optional<std::size_t> omit = std::nullopt) {
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (omit && *omit == i) continue;
        out += "- " + evidence[i].text + "\n";
    }
    return out;
}

inline std::string ask(chat::Endpoint& oracle, const std::string& question,
                       const std::string& evidence_block,
                       std::vector<chat::Exchange>& transcripts) {
    std::vector<chat::Message> msgs;
    msgs.push_back({"system",
                    "Answer the question with the name of the entity only. "
                    "If you do not know, answer UNKNOWN."});
    std::string user = question;
    if (!evidence_block.empty()) user += "\n\nEvidence:\n" + evidence_block;
    msgs.push_back({"user", user});
    try {
        std::string reply = oracle.chat(msgs).content;
        transcripts.push_back({msgs, reply});
        return reply;
    } catch (const Error& e) {
        throw Error("verification_incomplete",
                    std::string("verification incomplete: ") + e.what());
    }
}

}  // namespace detail

// Three-check acceptance gate. The record is accepted only when the oracle
// cannot answer from memory, can answer with the full evidence chain, and
// fails whenever any single evidence sentence is withheld.
inline VerificationReport verify_question(chat::Endpoint& oracle, const QuestionRecord& record) {
    VerificationReport report;
    auto is_answer = [&](const std::string& reply) {
        return text::matches_any_alias(reply, record.answer_aliases);
    };

    std::string bare = detail::ask(oracle, record.question, "", report.transcripts);
    report.parametric_inaccessible = !is_answer(bare);

    std::string full = detail::ask(oracle, record.question,
                                   detail::evidence_block(record.evidence), report.transcripts);
    report.evidence_sufficient = is_answer(full);

    report.necessity.resize(record.evidence.size(), false);
    for (std::size_t i = 0; i < record.evidence.size(); ++i) {
        std::string ablated = detail::ask(oracle, record.question,
                                          detail::evidence_block(record.evidence, i),
                                          report.transcripts);
        report.necessity[i] = !is_answer(ablated);
    }
    report.accepted = report.parametric_inaccessible && report.evidence_sufficient &&
                      std::all_of(report.necessity.begin(), report.necessity.end(),
                                  [](bool b) { return b; });
    return report;
}

}  // namespace dseval::chain
