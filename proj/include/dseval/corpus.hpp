#pragma once
// Wiki-style corpus: page records with hyperlink spans, alias resolution,
// the hyperlink graph, evidence sentences, and a BM25 inverted index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/error.hpp"
#include "dseval/text.hpp"

namespace dseval::corpus {

using EntityId = std::string;
using json = nlohmann::json;

struct LinkSpan {
    EntityId target;
    std::string anchor;
    std::size_t char_start = 0;  // Unicode scalar offsets, as in the input
    std::size_t char_end = 0;
    std::size_t byte_start = 0;  // derived byte offsets into body
    std::size_t byte_end = 0;
    bool dangling = false;
};

struct PageRecord {
    EntityId id;
    std::string title;
    std::vector<std::string> aliases;
    std::string body;
    std::vector<LinkSpan> links;
    std::vector<text::SentenceSpan> sentences;  // byte ranges
};

struct EvidenceSentence {
    EntityId source;
    EntityId target;
    std::string text;
    std::size_t byte_start = 0;
    std::size_t byte_end = 0;
};

struct IngestReport {
    std::size_t ingested = 0;
    std::size_t skipped = 0;
    std::size_t dangling_links = 0;
    std::vector<std::string> warnings;

    std::string summary() const {
        std::string s = std::to_string(ingested) + " pages ingested, " +
                        std::to_string(skipped) + " skipped, " +
                        std::to_string(dangling_links) + " dangling links";
        return s;
    }

    json to_json() const {
        return json{{"format_version", 1},
                    {"ingested", ingested},
                    {"skipped", skipped},
                    {"dangling_links", dangling_links},
                    {"warnings", warnings}};
    }
};

struct SearchHit {
    EntityId id;
    double score = 0.0;
};

// BM25 constants, fixed for reproducibility.
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

class CorpusStore {
public:
    CorpusStore() = default;

    // Newline-delimited JSON page records, one per line. Malformed records
    // are skipped, duplicates rejected; both are listed in the report.
    static CorpusStore ingest(std::istream& in, IngestReport& report) {
        CorpusStore store;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                ++report.skipped;
                report.warnings.push_back("line " + std::to_string(lineno) + ": malformed record");
                continue;
            }
            PageRecord page;
            if (!parse_page(j, page)) {
                ++report.skipped;
                report.warnings.push_back("line " + std::to_string(lineno) + ": missing required fields");
                continue;
            }
            if (store.pages_.count(page.id)) {
                ++report.skipped;
                report.warnings.push_back("duplicate entity_id '" + page.id + "' rejected");
                continue;
            }
            store.order_.push_back(page.id);
            store.pages_.emplace(page.id, std::move(page));
            ++report.ingested;
        }
        store.finalize(report);
        return store;
    }

    const PageRecord* page(const EntityId& id) const {
        auto it = pages_.find(id);
        return it == pages_.end() ? nullptr : &it->second;
    }

    std::size_t page_count() const { return pages_.size(); }

    const std::vector<EntityId>& page_ids() const { return order_; }

    std::optional<EntityId> resolve(std::string_view name) const {
        auto it = alias_index_.find(text::normalize(name));
        if (it == alias_index_.end()) return std::nullopt;
        return it->second;
    }

    // Out-edges ordered by first anchor position in the source body.
    const std::vector<EntityId>& neighbors(const EntityId& id) const {
        auto it = adjacency_.find(id);
        if (it == adjacency_.end()) throw Error("unknown_entity", "unknown entity: " + id);
        return it->second;
    }

    bool has_edge(const EntityId& src, const EntityId& dst) const {
        auto it = adjacency_.find(src);
        if (it == adjacency_.end()) return false;
        return std::find(it->second.begin(), it->second.end(), dst) != it->second.end();
    }

    std::set<std::pair<EntityId, EntityId>> edge_set() const {
        std::set<std::pair<EntityId, EntityId>> edges;
        for (auto& [src, dsts] : adjacency_)
            for (auto& dst : dsts) edges.emplace(src, dst);
        return edges;
    }

    // The sentence of src's body containing the first LinkSpan targeting dst.
    EvidenceSentence evidence_sentence(const EntityId& src, const EntityId& dst) const {
        const PageRecord* p = page(src);
        if (!p) throw Error("unknown_entity", "unknown entity: " + src);
        const LinkSpan* first = nullptr;
        for (const auto& l : p->links) {
            if (l.dangling || l.target != dst) continue;
            if (!first || l.byte_start < first->byte_start) first = &l;
        }
        if (!first)
            throw Error("no_linking_sentence", "no linking sentence " + src + " -> " + dst);
        for (const auto& s : p->sentences) {
            if (first->byte_start >= s.begin && first->byte_start < s.end) {
                return EvidenceSentence{src, dst,
                                        std::string(p->body.substr(s.begin, s.end - s.begin)),
                                        s.begin, s.end};
            }
        }
        throw Error("no_linking_sentence", "anchor outside sentence bounds");
    }

    // All declared surface forms of an entity: aliases plus anchor texts
    // used anywhere in the corpus to link to it.
    std::vector<std::string> surface_forms(const EntityId& id) const {
        std::vector<std::string> out;
        if (const PageRecord* p = page(id)) out = p->aliases;
        auto it = anchor_forms_.find(id);
        if (it != anchor_forms_.end())
            for (const auto& a : it->second)
                if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
        return out;
    }

    // BM25 top-k over unmasked body text. Ties broken by entity id.
    std::vector<SearchHit> search(std::string_view query, std::size_t k) const {
        std::unordered_map<EntityId, double> scores;
        double n_docs = static_cast<double>(pages_.size());
        for (const auto& term : text::tokenize(query)) {
            auto it = inverted_index_.find(term);
            if (it == inverted_index_.end()) continue;
            double df = static_cast<double>(it->second.size());
            double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            for (const auto& [doc, tf] : it->second) {
                double dl = static_cast<double>(doc_lengths_.at(doc));
                double denom = tf + kBm25K1 * (1.0 - kBm25B + kBm25B * dl / avg_doc_length_);
                scores[doc] += idf * (tf * (kBm25K1 + 1.0)) / denom;
            }
        }
        std::vector<SearchHit> hits;
        hits.reserve(scores.size());
        for (auto& [doc, score] : scores) hits.push_back({doc, score});
        std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        if (hits.size() > k) hits.resize(k);
        return hits;
    }

    // Serialize pages in the ingest schema; re-ingesting the output yields
    // an equivalent store.
    void save(std::ostream& out) const {
        for (const auto& id : order_) {
            const PageRecord& p = pages_.at(id);
            json links = json::array();
            for (const auto& l : p.links) {
                links.push_back({{"target", l.target},
                                 {"anchor", l.anchor},
                                 {"start", l.char_start},
                                 {"end", l.char_end}});
            }
            json j = {{"id", p.id},
                      {"title", p.title},
                      {"aliases", p.aliases},
                      {"text", p.body},
                      {"links", links}};
            out << j.dump() << "\n";
        }
    }

private:
    static bool parse_page(const json& j, PageRecord& page) {
        if (!j.contains("id") || !j.contains("title") || !j.contains("text")) return false;
        if (!j["id"].is_string() || !j["title"].is_string() || !j["text"].is_string()) return false;
        page.id = j["id"].get<std::string>();
        page.title = j["title"].get<std::string>();
        page.body = j["text"].get<std::string>();
        if (page.id.empty()) return false;
        if (j.contains("aliases") && j["aliases"].is_array())
            for (const auto& a : j["aliases"])
                if (a.is_string()) page.aliases.push_back(a.get<std::string>());
        // title is the canonical alias
        if (std::find(page.aliases.begin(), page.aliases.end(), page.title) == page.aliases.end())
            page.aliases.insert(page.aliases.begin(), page.title);
        if (j.contains("links") && j["links"].is_array()) {
            for (const auto& lj : j["links"]) {
                if (!lj.is_object() || !lj.contains("target") || !lj.contains("anchor") ||
                    !lj.contains("start") || !lj.contains("end"))
                    return false;
                LinkSpan l;
                l.target = lj["target"].get<std::string>();
                l.anchor = lj["anchor"].get<std::string>();
                l.char_start = lj["start"].get<std::size_t>();
                l.char_end = lj["end"].get<std::size_t>();
                auto bytes = text::codepoint_range_to_bytes(page.body, l.char_start, l.char_end);
                if (!bytes) return false;
                l.byte_start = bytes->first;
                l.byte_end = bytes->second;
                if (page.body.substr(l.byte_start, l.byte_end - l.byte_start) != l.anchor)
                    return false;
                page.links.push_back(std::move(l));
            }
        }
        return true;
    }

    void finalize(IngestReport& report) {
        // alias index: first-ingested page wins on collision
        for (const auto& id : order_) {
            const PageRecord& p = pages_.at(id);
            for (const auto& alias : p.aliases) {
                std::string norm = text::normalize(alias);
                if (norm.empty()) continue;
                auto [it, inserted] = alias_index_.emplace(norm, id);
                if (!inserted && it->second != id)
                    report.warnings.push_back("alias collision '" + alias + "': " + it->second +
                                              " keeps it, " + id + " loses");
            }
        }
        // link graph + dangling flags + anchor surface forms
        for (const auto& id : order_) {
            PageRecord& p = pages_.at(id);
            std::vector<std::pair<std::size_t, EntityId>> first_pos;
            for (auto& l : p.links) {
                if (!pages_.count(l.target)) {
                    l.dangling = true;
                    ++report.dangling_links;
                    continue;
                }
                anchor_forms_[l.target].insert(l.anchor);
                bool seen = false;
                for (auto& [pos, tgt] : first_pos)
                    if (tgt == l.target) { seen = true; break; }
                if (!seen) first_pos.emplace_back(l.byte_start, l.target);
            }
            std::sort(first_pos.begin(), first_pos.end());
            auto& adj = adjacency_[id];
            for (auto& [pos, tgt] : first_pos) adj.push_back(tgt);
            // sentence boundaries, protecting anchors from splitting
            std::vector<std::pair<std::size_t, std::size_t>> anchors;
            for (const auto& l : p.links) anchors.emplace_back(l.byte_start, l.byte_end);
            p.sentences = text::split_sentences(p.body, anchors);
        }
        // inverted index over unmasked body text
        double total_len = 0.0;
        for (const auto& id : order_) {
            const PageRecord& p = pages_.at(id);
            auto toks = text::tokenize(p.body);
            doc_lengths_[id] = toks.size();
            total_len += static_cast<double>(toks.size());
            std::unordered_map<std::string, std::size_t> tf;
            for (auto& t : toks) ++tf[t];
            for (auto& [term, count] : tf)
                inverted_index_[term].emplace_back(id, static_cast<double>(count));
        }
        avg_doc_length_ = pages_.empty() ? 1.0 : total_len / static_cast<double>(pages_.size());
        for (auto& [term, postings] : inverted_index_)
            std::sort(postings.begin(), postings.end());
    }

    std::unordered_map<EntityId, PageRecord> pages_;
    std::vector<EntityId> order_;  // ingest order
    std::unordered_map<std::string, EntityId> alias_index_;
    std::unordered_map<EntityId, std::vector<EntityId>> adjacency_;
    std::unordered_map<EntityId, std::set<std::string>> anchor_forms_;
    std::unordered_map<std::string, std::vector<std::pair<EntityId, double>>> inverted_index_;
    std::unordered_map<EntityId, std::size_t> doc_lengths_;
    double avg_doc_length_ = 1.0;
};

}  // namespace dseval::corpus
