#pragma once
// Shared test fixtures: the 4-page family mini-corpus, synthetic corpora,
// and deterministic stub endpoints.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/chain.hpp"
#include "dseval/chat.hpp"
#include "dseval/corpus.hpp"

namespace fixtures {

using dseval::chain::QuestionRecord;
using dseval::corpus::CorpusStore;
using dseval::corpus::IngestReport;
using json = nlohmann::json;

struct PageSpec {
    std::string id;
    std::string title;
    std::vector<std::string> aliases;
    std::string body;
    // (target id, anchor substring of body); offsets computed from the first
    // occurrence so fixtures never hand-count characters
    std::vector<std::pair<std::string, std::string>> links;
};

inline std::string page_line(const PageSpec& p) {
    json links = json::array();
    for (const auto& [target, anchor] : p.links) {
        std::size_t pos = p.body.find(anchor);
        if (pos == std::string::npos) throw std::runtime_error("fixture anchor not in body");
        // bodies are ASCII, so byte offsets equal codepoint offsets
        links.push_back({{"target", target},
                         {"anchor", anchor},
                         {"start", pos},
                         {"end", pos + anchor.size()}});
    }
    return json{{"id", p.id}, {"title", p.title}, {"aliases", p.aliases},
                {"text", p.body}, {"links", links}}
        .dump();
}

inline std::string ndjson(const std::vector<PageSpec>& pages) {
    std::string out;
    for (const auto& p : pages) out += page_line(p) + "\n";
    return out;
}

inline CorpusStore ingest(const std::string& body, IngestReport* report_out = nullptr) {
    std::istringstream in(body);
    IngestReport report;
    CorpusStore store = CorpusStore::ingest(in, report);
    if (report_out) *report_out = report;
    return store;
}

// The family mini-corpus: kane -> chad -> nicole -> graham, no direct edge
// kane -> graham. Each intermediate entity's name appears only on the page
// preceding it in the chain.
inline std::vector<PageSpec> family_pages() {
    return {
        {"kane", "Kane Cornes", {"Kane Cornes", "Kane"},
         "Kane Cornes is a footballer. Kane Cornes has brother Chad Cornes. "
         "He played many seasons.",
         {{"chad", "Chad Cornes"}}},
        {"chad", "Chad Cornes", {"Chad Cornes", "Chad"},
         "Chad Cornes is a footballer. Chad Cornes married Nicole Cornes in 2004. "
         "He later retired.",
         {{"nicole", "Nicole Cornes"}}},
        {"nicole", "Nicole Cornes", {"Nicole Cornes", "Nicole"},
         "Nicole Cornes is a columnist. Nicole Cornes has father-in-law Graham Cornes. "
         "She writes weekly.",
         {{"graham", "Graham Cornes"}}},
        {"graham", "Graham Cornes", {"Graham Cornes", "Graham"},
         "Graham Cornes is a coach. He coached for decades.",
         {}},
    };
}

inline std::string family_ndjson() { return ndjson(family_pages()); }

inline CorpusStore family_store() { return ingest(family_ndjson()); }

inline const char* kFamilyQuestion =
    "Who is the father-in-law of the wife of the brother of Kane Cornes?";

inline QuestionRecord family_record(const CorpusStore& store) {
    auto chain = dseval::chain::find_alternative_chain(store, "kane", "graham");
    auto evidence = dseval::chain::build_evidence_chain(store, *chain);
    std::vector<dseval::chain::ProbeQuery> probes;
    for (std::size_t i = 0; i < evidence.size(); ++i)
        probes.push_back(dseval::chain::make_probe(evidence[i], chain->entities[i + 1],
                                                   store.surface_forms(chain->entities[i + 1])));
    return dseval::chain::assemble_record(kFamilyQuestion, "kane", "graham", *chain,
                                          std::move(evidence), std::move(probes),
                                          store.surface_forms("graham"));
}

// Synthetic corpus of `n_chains` disjoint 4-entity chains. Entity ids are
// c<chain>n<pos>; names are "Node<chain><pos> Page". Every page also mentions
// (without linking) one entity from another chain, so masking has cross-page
// work to do.
inline std::vector<PageSpec> synthetic_chain_pages(std::size_t n_chains) {
    auto name = [](std::size_t c, std::size_t p) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "Node%02zu%zu", c, p);
        return std::string(buf);
    };
    std::vector<PageSpec> pages;
    for (std::size_t c = 0; c < n_chains; ++c) {
        for (std::size_t p = 0; p < 4; ++p) {
            std::string nm = name(c, p);
            std::string title = nm + " Page";
            std::string body = title + " is entity number " + std::to_string(c * 4 + p) + ". ";
            std::vector<std::pair<std::string, std::string>> links;
            if (p < 3) {
                std::string next_title = name(c, p + 1) + " Page";
                body += title + " connects onward to " + next_title + ". ";
                links.emplace_back("c" + std::to_string(c) + "n" + std::to_string(p + 1),
                                   next_title);
            }
            // stray mention of an entity from the next chain over
            std::size_t other = (c + 1) % n_chains;
            body += "Unrelated trivia mentions " + name(other, 3) + " in passing.";
            pages.push_back({"c" + std::to_string(c) + "n" + std::to_string(p), title,
                             {title, nm}, body, links});
        }
    }
    return pages;
}

inline std::vector<QuestionRecord> synthetic_chain_records(const CorpusStore& store,
                                                           std::size_t n_chains) {
    std::vector<QuestionRecord> records;
    for (std::size_t c = 0; c < n_chains; ++c) {
        std::string v0 = "c" + std::to_string(c) + "n0";
        std::string vn = "c" + std::to_string(c) + "n3";
        auto chain = dseval::chain::find_alternative_chain(store, v0, vn);
        auto evidence = dseval::chain::build_evidence_chain(store, *chain);
        std::vector<dseval::chain::ProbeQuery> probes;
        for (std::size_t i = 0; i < evidence.size(); ++i)
            probes.push_back(dseval::chain::make_probe(
                evidence[i], chain->entities[i + 1],
                store.surface_forms(chain->entities[i + 1])));
        records.push_back(dseval::chain::assemble_record(
            "What lies three steps from chain " + std::to_string(c) + "?", v0, vn, *chain,
            std::move(evidence), std::move(probes), store.surface_forms(vn)));
    }
    return records;
}

// Stub oracle: answers with `answer` iff every string in `required` appears
// in the user message, otherwise "UNKNOWN". Models the verification contract
// "answers correctly iff all required evidence present".
inline dseval::chat::FnEndpoint evidence_gated_oracle(std::vector<std::string> required,
                                                      std::string answer) {
    return dseval::chat::FnEndpoint(
        [required = std::move(required), answer = std::move(answer)](
            const std::vector<dseval::chat::Message>& msgs) -> std::string {
            const std::string& user = msgs.back().content;
            for (const auto& r : required)
                if (user.find(r) == std::string::npos) return "UNKNOWN";
            return answer;
        });
}

inline dseval::chat::FnEndpoint always(std::string reply) {
    return dseval::chat::FnEndpoint(
        [reply = std::move(reply)](const std::vector<dseval::chat::Message>&) { return reply; });
}

inline dseval::chat::FnEndpoint failing_endpoint() {
    return dseval::chat::FnEndpoint([](const std::vector<dseval::chat::Message>&) -> std::string {
        throw dseval::Error("endpoint_failure", "stub transport failure");
    });
}

}  // namespace fixtures
