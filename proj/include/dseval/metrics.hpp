#pragma once
// Diagnostic metric suite over closed traces: sufficiency probing, headline
// score aggregation, degradation analysis, and the behavioral profile
// taxonomy.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dseval/chain.hpp"
#include "dseval/chat.hpp"
#include "dseval/error.hpp"
#include "dseval/sandbox.hpp"
#include "dseval/text.hpp"

namespace dseval::metrics {

using chain::QuestionRecord;
using corpus::EntityId;
using sandbox::Trace;
using json = nlohmann::json;

struct SufficiencyAssessment {
    std::vector<int> k;                      // per-evidence bit
    int ks = 0;                              // product of k
    std::vector<int> evidence_found_via_search;
    std::vector<chat::Exchange> probe_transcripts;
    bool incomplete = false;                 // prober unreachable
    bool search_only = false;                // prober-off mode
};

enum class ResponseClass { attempt_correct, attempt_wrong, refuse };

inline const char* to_string(ResponseClass r) {
    switch (r) {
        case ResponseClass::attempt_correct: return "attempt_correct";
        case ResponseClass::attempt_wrong: return "attempt_wrong";
        case ResponseClass::refuse: return "refuse";
    }
    return "?";
}

struct InstanceOutcome {
    std::string question_id;
    int ks = 0;
    int searched = 0;            // at least one search/fetch tool event
    std::size_t hops_used = 0;   // distinct pages fetched
    std::size_t hops_gt = 0;     // chain length n
    ResponseClass response = ResponseClass::refuse;
    std::set<EntityId> visited;
    SufficiencyAssessment assessment;
};

struct SetCounts {
    std::size_t n = 0;        // N instances
    std::size_t s = 0;        // knowledge sufficient
    std::size_t i = 0;        // insufficient
    std::size_t a = 0;        // attempts
    std::size_t refusals = 0;
    std::size_t a_correct = 0;
    std::size_t a_wrong = 0;
    std::size_t search_credit = 0;  // the appendix's extra SearchScore set
    std::size_t s_star = 0;         // sufficient but not attempt_correct
};

struct DegradationReport {
    bool defined = false;  // undefined when |S*| = 0
    double forget_rate = 0.0;
    double lead_astray_rate = 0.0;
    std::size_t s_star = 0;
    std::size_t forget_count = 0;
    std::size_t lead_astray_count = 0;
};

struct ScoreReport {
    double knowledge_score = 0.0;
    double search_score = 0.0;
    double gr_precision = 0.0, gr_recall = 0.0, gr_f1 = 0.0;
    double ku_precision = 0.0, ku_recall = 0.0, ku_f1 = 0.0;
    double gen_score = 0.0;
    double pass_at_1 = 0.0;
    SetCounts counts;
    std::optional<DegradationReport> degradation;

    json to_json() const {
        json j = {{"format_version", 1},
                  {"knowledge_score", knowledge_score},
                  {"search_score", search_score},
                  {"gr_precision", gr_precision},
                  {"gr_recall", gr_recall},
                  {"gr_f1", gr_f1},
                  {"ku_precision", ku_precision},
                  {"ku_recall", ku_recall},
                  {"ku_f1", ku_f1},
                  {"gen_score", gen_score},
                  {"pass_at_1", pass_at_1},
                  {"counts",
                   {{"N", counts.n},
                    {"S", counts.s},
                    {"I", counts.i},
                    {"A", counts.a},
                    {"refusals", counts.refusals},
                    {"A_c", counts.a_correct},
                    {"A_w", counts.a_wrong},
                    {"search_credit", counts.search_credit},
                    {"S_star", counts.s_star}}}};
        if (degradation) {
            j["degradation"] = {{"defined", degradation->defined},
                                {"forget_rate", degradation->forget_rate},
                                {"lead_astray_rate", degradation->lead_astray_rate},
                                {"s_star", degradation->s_star},
                                {"forget_count", degradation->forget_count},
                                {"lead_astray_count", degradation->lead_astray_count}};
        }
        return j;
    }

    static ScoreReport from_json(const json& j) {
        ScoreReport r;
        r.knowledge_score = j.at("knowledge_score").get<double>();
        r.search_score = j.at("search_score").get<double>();
        r.gr_precision = j.at("gr_precision").get<double>();
        r.gr_recall = j.at("gr_recall").get<double>();
        r.gr_f1 = j.at("gr_f1").get<double>();
        r.ku_precision = j.at("ku_precision").get<double>();
        r.ku_recall = j.at("ku_recall").get<double>();
        r.ku_f1 = j.at("ku_f1").get<double>();
        r.gen_score = j.at("gen_score").get<double>();
        r.pass_at_1 = j.at("pass_at_1").get<double>();
        const auto& c = j.at("counts");
        r.counts.n = c.at("N").get<std::size_t>();
        r.counts.s = c.at("S").get<std::size_t>();
        r.counts.i = c.at("I").get<std::size_t>();
        r.counts.a = c.at("A").get<std::size_t>();
        r.counts.refusals = c.at("refusals").get<std::size_t>();
        r.counts.a_correct = c.at("A_c").get<std::size_t>();
        r.counts.a_wrong = c.at("A_w").get<std::size_t>();
        r.counts.search_credit = c.at("search_credit").get<std::size_t>();
        r.counts.s_star = c.at("S_star").get<std::size_t>();
        if (j.contains("degradation")) {
            DegradationReport d;
            const auto& dj = j["degradation"];
            d.defined = dj.at("defined").get<bool>();
            d.forget_rate = dj.at("forget_rate").get<double>();
            d.lead_astray_rate = dj.at("lead_astray_rate").get<double>();
            d.s_star = dj.at("s_star").get<std::size_t>();
            d.forget_count = dj.at("forget_count").get<std::size_t>();
            d.lead_astray_count = dj.at("lead_astray_count").get<std::size_t>();
            r.degradation = d;
        }
        return r;
    }
};

// Evidence e_i counts as found via search when the page housing it
// (chain[i], its source page) was visited. Missing pieces fall back to a
// parametric probe against the prober endpoint; a null prober means
// search-only sufficiency.
inline SufficiencyAssessment assess_sufficiency(const Trace& trace,
                                                const QuestionRecord& record,
                                                chat::Endpoint* prober) {
    SufficiencyAssessment out;
    std::size_t n = record.hop_count();
    out.k.assign(n, 0);
    out.evidence_found_via_search.assign(n, 0);
    out.search_only = prober == nullptr;
    for (std::size_t i = 0; i < n; ++i) {
        const EntityId& source_page = record.chain.entities[i];
        if (trace.visited.count(source_page)) {
            out.evidence_found_via_search[i] = 1;
            out.k[i] = 1;
            continue;
        }
        if (!prober) continue;
        std::vector<chat::Message> msgs = {
            {"system", "Fill in the blank with the missing entity name only."},
            {"user", record.probes[i].prompt}};
        try {
            std::string reply = prober->chat(msgs).content;
            out.probe_transcripts.push_back({msgs, reply});
            if (text::matches_any_alias(reply, record.probes[i].expected_aliases)) out.k[i] = 1;
        } catch (const Error&) {
            out.incomplete = true;
            return out;
        }
    }
    out.ks = 1;
    for (int bit : out.k) out.ks &= bit;
    if (n == 0) out.ks = 0;
    return out;
}

inline ResponseClass classify_response(const Trace& trace, const QuestionRecord& record) {
    if (!trace.has_final || trace.final_response.kind == sandbox::FinalResponse::Kind::refuse)
        return ResponseClass::refuse;
    return text::matches_any_alias(trace.final_response.answer_text, record.answer_aliases)
               ? ResponseClass::attempt_correct
               : ResponseClass::attempt_wrong;
}

inline InstanceOutcome make_outcome(const Trace& trace, const QuestionRecord& record,
                                    chat::Endpoint* prober) {
    InstanceOutcome o;
    o.question_id = record.id;
    o.assessment = assess_sufficiency(trace, record, prober);
    o.ks = o.assessment.incomplete ? 0 : o.assessment.ks;
    o.searched = trace.tool_call_count() > 0 ? 1 : 0;
    o.hops_used = trace.visited.size();
    o.hops_gt = record.hop_count();
    o.response = classify_response(trace, record);
    o.visited = trace.visited;
    return o;
}

inline double f1(double precision, double recall) {
    double denom = precision + recall;
    return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

inline ScoreReport aggregate_scores(const std::vector<InstanceOutcome>& outcomes) {
    if (outcomes.empty()) throw Error("no_instances", "no instances to aggregate");
    ScoreReport r;
    SetCounts& c = r.counts;
    c.n = outcomes.size();
    std::size_t gr_hits = 0;  // refused while insufficient
    std::size_t ku_hits = 0;  // correct while sufficient
    for (const auto& o : outcomes) {
        bool sufficient = o.ks == 1;
        bool correct = o.response == ResponseClass::attempt_correct;
        bool refused = o.response == ResponseClass::refuse;
        if (sufficient) ++c.s; else ++c.i;
        if (refused) ++c.refusals; else ++c.a;
        if (correct) ++c.a_correct;
        if (o.response == ResponseClass::attempt_wrong) ++c.a_wrong;
        if (correct && o.searched == 1 && o.hops_used <= o.hops_gt && !sufficient)
            ++c.search_credit;
        if (sufficient && !correct) ++c.s_star;
        if (refused && !sufficient) ++gr_hits;
        if (correct && sufficient) ++ku_hits;
    }
    double n = static_cast<double>(c.n);
    r.knowledge_score = static_cast<double>(c.s) / n;
    r.search_score = r.knowledge_score + static_cast<double>(c.search_credit) / n;
    r.gr_recall = c.i == 0 ? 0.0 : static_cast<double>(gr_hits) / static_cast<double>(c.i);
    r.gr_precision =
        c.refusals == 0 ? 0.0 : static_cast<double>(gr_hits) / static_cast<double>(c.refusals);
    r.gr_f1 = f1(r.gr_precision, r.gr_recall);
    r.ku_recall = c.s == 0 ? 0.0 : static_cast<double>(ku_hits) / static_cast<double>(c.s);
    r.ku_precision = c.a == 0 ? 0.0 : static_cast<double>(ku_hits) / static_cast<double>(c.a);
    r.ku_f1 = f1(r.ku_precision, r.ku_recall);
    r.gen_score = (r.gr_f1 + r.ku_f1) / 2.0 * r.knowledge_score;
    r.pass_at_1 = static_cast<double>(c.a_correct) / n;
    return r;
}

// Clean-evidence resynthesis over S* = {sufficient but not correct}:
// the LM gets the question plus exactly the evidence sentences whose source
// pages the episode actually visited. Failure counts as forget; success
// (while the episode's own output was wrong) as lead-astray.
inline DegradationReport degradation_analysis(
    const std::vector<InstanceOutcome>& outcomes,
    const std::map<std::string, QuestionRecord>& records,
    chat::Endpoint& lm) {
    DegradationReport d;
    for (const auto& o : outcomes) {
        if (!(o.ks == 1 && o.response != ResponseClass::attempt_correct)) continue;
        ++d.s_star;
        const QuestionRecord& rec = records.at(o.question_id);
        std::string evidence_block;
        for (std::size_t i = 0; i < rec.evidence.size(); ++i)
            if (o.visited.count(rec.chain.entities[i]))
                evidence_block += "- " + rec.evidence[i].text + "\n";
        std::vector<chat::Message> msgs = {
            {"system",
             "Answer the question with the name of the entity only. "
             "If you do not know, answer UNKNOWN."},
            {"user", rec.question + (evidence_block.empty()
                                         ? std::string{}
                                         : "\n\nEvidence:\n" + evidence_block)}};
        std::string reply = lm.chat(msgs).content;
        if (text::matches_any_alias(reply, rec.answer_aliases))
            ++d.lead_astray_count;
        else
            ++d.forget_count;
    }
    if (d.s_star == 0) return d;  // rates undefined
    d.defined = true;
    d.forget_rate = static_cast<double>(d.forget_count) / static_cast<double>(d.s_star);
    d.lead_astray_rate = static_cast<double>(d.lead_astray_count) / static_cast<double>(d.s_star);
    return d;
}

// Profile taxonomy over (KnowledgeScore, GR F1, KU F1), all as percentages.
inline std::string classify_profile(const ScoreReport& report) {
    double k = report.knowledge_score * 100.0;
    double gr = report.gr_f1 * 100.0;
    double ku = report.ku_f1 * 100.0;
    auto bucket3 = [](double v, double hi, double lo) {
        return v > hi ? 2 : (v >= lo ? 1 : 0);  // 2 high, 1 med, 0 low
    };
    int bk = bucket3(k, 70.0, 60.0);
    int bgr = bucket3(gr, 40.0, 25.0);
    int bku = bucket3(ku, 45.0, 25.0);
    if (bk == 2 && bgr == 0 && bku == 2) return "Powerful but Overconfident";
    if (bk == 2 && bgr == 1 && bku == 2) return "Well-Calibrated Elite";
    if (bk == 2 && bgr == 0 && bku == 0) return "Synthesis Bottleneck";
    if (bk == 1 && bgr == 1 && bku == 1) return "Conservative Middle";
    if (bk == 1 && bgr == 0 && bku == 0) return "Weak and Confused";
    if (bk == 0 && bgr == 2 && bku == 0) return "Self-Aware of Weakness";
    return "unclassified";
}

}  // namespace dseval::metrics
