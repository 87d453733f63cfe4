#pragma once
// Selective entity masking: chain entity v_i is visible and fetchable in an
// episode iff the agent has visited page(v_{i-1}).

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dseval/chain.hpp"
#include "dseval/corpus.hpp"
#include "dseval/error.hpp"
#include "dseval/text.hpp"

namespace dseval::masking {

using chain::QuestionRecord;
using corpus::CorpusStore;
using corpus::EntityId;

inline constexpr const char* kPlaceholder = "[UNKNOWN]";

struct MaskPolicy {
    std::vector<EntityId> chain_entities;                       // v0..vn
    std::set<EntityId> masked;                                  // v1..vn
    std::unordered_map<EntityId, EntityId> reveal_page;         // v_i -> v_{i-1}
    std::unordered_map<EntityId, std::vector<std::string>> surfaces;

    static MaskPolicy for_record(const CorpusStore& store, const QuestionRecord& record) {
        MaskPolicy p;
        p.chain_entities = record.chain.entities;
        for (std::size_t i = 1; i < p.chain_entities.size(); ++i) {
            const EntityId& vi = p.chain_entities[i];
            p.masked.insert(vi);
            p.reveal_page[vi] = p.chain_entities[i - 1];
            auto forms = store.surface_forms(vi);
            std::sort(forms.begin(), forms.end(),
                      [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
            p.surfaces[vi] = std::move(forms);
        }
        return p;
    }
};

// Exactly {v0} plus every v_i whose reveal page has been visited.
inline std::set<EntityId> unlocked_entities(const MaskPolicy& policy,
                                            const std::set<EntityId>& visited) {
    std::set<EntityId> unlocked;
    if (!policy.chain_entities.empty()) unlocked.insert(policy.chain_entities.front());
    for (const auto& [vi, reveal] : policy.reveal_page)
        if (visited.count(reveal)) unlocked.insert(vi);
    return unlocked;
}

inline bool is_fetchable(const EntityId& entity, const MaskPolicy& policy,
                         const std::set<EntityId>& unlocked) {
    return !policy.masked.count(entity) || unlocked.count(entity) > 0;
}

// Replace every surface-form occurrence of each still-locked masked entity
// with the placeholder, longest surface form first, case-insensitively.
// Mentions on an entity's reveal page render verbatim.
inline std::string mask_text(std::string text_in, const MaskPolicy& policy,
                             const std::set<EntityId>& unlocked,
                             const EntityId& context_page) {
    std::vector<const std::string*> forms;
    for (const auto& e : policy.masked) {
        if (unlocked.count(e)) continue;
        auto reveal = policy.reveal_page.find(e);
        if (reveal != policy.reveal_page.end() && reveal->second == context_page) continue;
        for (const auto& f : policy.surfaces.at(e))
            if (!f.empty()) forms.push_back(&f);
    }
    std::sort(forms.begin(), forms.end(),
              [](const std::string* a, const std::string* b) { return a->size() > b->size(); });
    for (const std::string* f : forms) {
        std::size_t pos = 0;
        while ((pos = text::ifind(text_in, *f, pos)) != std::string::npos) {
            text_in.replace(pos, f->size(), kPlaceholder);
            pos += std::char_traits<char>::length(kPlaceholder);
        }
    }
    return text_in;
}

// True when any surface form of a locked entity survives in `rendered`.
// Test hook for the soundness property.
inline bool leaks_locked_alias(const std::string& rendered, const MaskPolicy& policy,
                               const std::set<EntityId>& unlocked,
                               const EntityId& context_page) {
    for (const auto& e : policy.masked) {
        if (unlocked.count(e)) continue;
        auto reveal = policy.reveal_page.find(e);
        if (reveal != policy.reveal_page.end() && reveal->second == context_page) continue;
        for (const auto& f : policy.surfaces.at(e))
            if (!f.empty() && text::ifind(rendered, f) != std::string::npos) return true;
    }
    return false;
}

}  // namespace dseval::masking
