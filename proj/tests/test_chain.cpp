#include <doctest.h>

#include "dseval/chain.hpp"
#include "fixtures.hpp"

using namespace dseval;
using fixtures::family_store;

TEST_CASE("find_alternative_chain: kane -> chad -> nicole -> graham, n=3") {
    auto store = family_store();
    auto chain = chain::find_alternative_chain(store, "kane", "graham");
    REQUIRE(chain.has_value());
    CHECK(chain->entities == std::vector<std::string>{"kane", "chad", "nicole", "graham"});
    CHECK(chain->hop_count() == 3);
}

TEST_CASE("find_alternative_chain: blocked-only-edge case is not-found") {
    std::vector<fixtures::PageSpec> pages = {
        {"a", "A", {"A"}, "A links straight to B End here.", {{"b", "B End"}}},
        {"b", "B End", {"B End"}, "B body.", {}}};
    auto store = fixtures::ingest(fixtures::ndjson(pages));
    CHECK_FALSE(chain::find_alternative_chain(store, "a", "b").has_value());
}

TEST_CASE("find_alternative_chain: degenerate and unknown inputs throw") {
    auto store = family_store();
    CHECK_THROWS_WITH_AS(static_cast<void>(chain::find_alternative_chain(store, "kane", "kane")),
                         doctest::Contains("degenerate"), Error);
    CHECK_THROWS_AS(static_cast<void>(chain::find_alternative_chain(store, "kane", "ghost")),
                    Error);
}

TEST_CASE("find_alternative_chain: lexicographic tie-break at equal depth") {
    // a -> {zz, bb} -> end; both paths length 2, bb < zz
    std::vector<fixtures::PageSpec> pages = {
        {"a", "A", {"A"}, "A goes to Zz Mid and also Bb Mid onward.",
         {{"zz", "Zz Mid"}, {"bb", "Bb Mid"}}},
        {"zz", "Zz Mid", {"Zz Mid"}, "Zz reaches The End now.", {{"end", "The End"}}},
        {"bb", "Bb Mid", {"Bb Mid"}, "Bb reaches The End now.", {{"end", "The End"}}},
        {"end", "The End", {"The End"}, "End body.", {}}};
    auto store = fixtures::ingest(fixtures::ndjson(pages));
    auto chain = chain::find_alternative_chain(store, "a", "end");
    REQUIRE(chain.has_value());
    CHECK(chain->entities == std::vector<std::string>{"a", "bb", "end"});
}

TEST_CASE("find_alternative_chain never uses the blocked edge") {
    // direct edge kane -> graham exists alongside the long path; must be avoided
    auto pages = fixtures::family_pages();
    pages[0].body += " Kane once interviewed Graham Cornes on air.";
    pages[0].links.emplace_back("graham", "Graham Cornes");
    auto store = fixtures::ingest(fixtures::ndjson(pages));
    REQUIRE(store.has_edge("kane", "graham"));
    auto chain = chain::find_alternative_chain(store, "kane", "graham");
    REQUIRE(chain.has_value());
    CHECK(chain->entities.size() == 4);  // forced around the blocked edge
    for (std::size_t i = 0; i + 1 < chain->entities.size(); ++i)
        CHECK_FALSE((chain->entities[i] == "kane" && chain->entities[i + 1] == "graham"));
}

TEST_CASE("build_evidence_chain: family chain evidence, first hop is the brother sentence") {
    auto store = family_store();
    auto chain = chain::find_alternative_chain(store, "kane", "graham");
    auto evidence = chain::build_evidence_chain(store, *chain);
    REQUIRE(evidence.size() == 3);
    CHECK(evidence[0].text == "Kane Cornes has brother Chad Cornes.");
    CHECK(evidence[1].source == "chad");
    CHECK(evidence[2].target == "graham");
}

TEST_CASE("build_evidence_chain: 2-entity chain yields single element") {
    auto store = family_store();
    auto evidence = chain::build_evidence_chain(store, chain::Chain{{"kane", "chad"}});
    REQUIRE(evidence.size() == 1);
    CHECK(evidence[0].source == "kane");
}

TEST_CASE("build_evidence_chain: stale edge errors naming the hop index") {
    auto store = family_store();
    chain::Chain stale{{"kane", "chad", "graham"}};  // chad -> graham never existed
    CHECK_THROWS_WITH_AS(chain::build_evidence_chain(store, stale),
                         doctest::Contains("hop index 1"), Error);
}

TEST_CASE("make_probe: brother sentence blanks the target") {
    auto store = family_store();
    auto e = store.evidence_sentence("kane", "chad");
    auto probe = chain::make_probe(e, "chad", store.surface_forms("chad"));
    CHECK(probe.prompt == "Kane Cornes has brother ____.");
    CHECK(probe.expected_entity == "chad");
}

TEST_CASE("make_probe: multiple mentions all blanked; no alias residue with overlapping aliases") {
    corpus::EvidenceSentence e{"x", "chad",
                               "Chad Cornes met Chad at the oval, and Chad Cornes smiled.", 0, 0};
    auto probe = chain::make_probe(e, "chad", {"Chad", "Chad Cornes"});
    CHECK(probe.prompt.find("Chad") == std::string::npos);
    CHECK(probe.prompt == "____ met ____ at the oval, and ____ smiled.");
}

TEST_CASE("make_probe: degenerate when blanking removes all content words") {
    corpus::EvidenceSentence e{"x", "chad", "Chad Cornes", 0, 0};
    CHECK_THROWS_WITH_AS(chain::make_probe(e, "chad", {"Chad Cornes", "Chad"}),
                         doctest::Contains("degenerate probe"), Error);
}

TEST_CASE("assemble_record: family inputs give hop_count 3 and stable id") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    CHECK(record.hop_count() == 3);
    CHECK(record.start_entity == "kane");
    CHECK(record.answer_entity == "graham");
    CHECK(record.id.rfind("q-", 0) == 0);
    CHECK(record.id == fixtures::family_record(store).id);  // deterministic
}

TEST_CASE("assemble_record: invariant violations name the field") {
    auto store = family_store();
    auto chain = *chain::find_alternative_chain(store, "kane", "graham");
    auto evidence = chain::build_evidence_chain(store, chain);
    std::vector<chain::ProbeQuery> probes;
    for (std::size_t i = 0; i < evidence.size(); ++i)
        probes.push_back(chain::make_probe(evidence[i], chain.entities[i + 1],
                                           store.surface_forms(chain.entities[i + 1])));

    auto short_evidence = evidence;
    short_evidence.pop_back();
    CHECK_THROWS_WITH_AS(chain::assemble_record("q", "kane", "graham", chain, short_evidence,
                                                probes, {"Graham Cornes"}),
                         doctest::Contains("evidence"), Error);

    auto swapped = probes;
    std::swap(swapped[0], swapped[1]);
    CHECK_THROWS_WITH_AS(chain::assemble_record("q", "kane", "graham", chain, evidence, swapped,
                                                {"Graham Cornes"}),
                         doctest::Contains("index 0"), Error);

    CHECK_THROWS_AS(chain::assemble_record("q", "kane", "graham", chain::Chain{{"kane", "graham"}},
                                           {evidence[0]}, {probes[0]}, {"Graham Cornes"}),
                    Error);
}

TEST_CASE("probe prompts never contain an expected alias") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    for (const auto& p : record.probes)
        for (const auto& a : p.expected_aliases)
            CHECK_FALSE(text::contains_alias(p.prompt, a));
}

TEST_CASE("record json round-trip") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    auto again = chain::QuestionRecord::from_json(record.to_json());
    CHECK(again.id == record.id);
    CHECK(again.chain.entities == record.chain.entities);
    CHECK(again.evidence.size() == record.evidence.size());
    CHECK(again.probes[2].prompt == record.probes[2].prompt);
    CHECK(again.answer_aliases == record.answer_aliases);
}

TEST_CASE("verify_question: evidence-gated stub oracle accepts the family record") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    std::vector<std::string> required;
    for (const auto& e : record.evidence) required.push_back(e.text);
    auto oracle = fixtures::evidence_gated_oracle(required, "Graham Cornes");
    auto report = chain::verify_question(oracle, record);
    CHECK(report.parametric_inaccessible);
    CHECK(report.evidence_sufficient);
    for (bool n : report.necessity) CHECK(n);
    CHECK(report.accepted);
    CHECK(report.transcripts.size() == 2 + record.evidence.size());
}

TEST_CASE("verify_question: oracle knowing the answer parametrically fails check 1") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    auto oracle = fixtures::always("Graham Cornes");
    auto report = chain::verify_question(oracle, record);
    CHECK_FALSE(report.parametric_inaccessible);
    CHECK_FALSE(report.accepted);
}

TEST_CASE("verify_question: redundant evidence fails necessity at its index") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    std::vector<std::string> required;
    for (const auto& e : record.evidence) required.push_back(e.text);
    // stub needs only e1..e3; ablating e2 still leaves it answerable? no —
    // drop e2 from the required set so its ablation no longer matters
    required.erase(required.begin() + 1);
    auto oracle = fixtures::evidence_gated_oracle(required, "Graham Cornes");
    auto report = chain::verify_question(oracle, record);
    CHECK(report.evidence_sufficient);
    CHECK_FALSE(report.necessity[1]);
    CHECK(report.necessity[0]);
    CHECK(report.necessity[2]);
    CHECK_FALSE(report.accepted);
}

TEST_CASE("verify_question: transport failure yields verification_incomplete") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    auto oracle = fixtures::failing_endpoint();
    CHECK_THROWS_WITH_AS(chain::verify_question(oracle, record),
                         doctest::Contains("verification incomplete"), Error);
}
