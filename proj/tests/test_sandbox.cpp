#include <doctest.h>

#include "dseval/sandbox.hpp"
#include "dseval/sha256.hpp"
#include "fixtures.hpp"

using namespace dseval;
using fixtures::family_store;
using sandbox::Episode;
using sandbox::FinalResponse;
using sandbox::Status;

TEST_CASE("episode starts with the default 40-call budget and {v0} unlocked") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    CHECK(ep.budget_remaining() == 40);
    CHECK(ep.unlocked() == std::set<std::string>{"kane"});
    CHECK(ep.status() == Status::open);
}

TEST_CASE("budget override is honored") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record, 10);
    CHECK(ep.budget_remaining() == 10);
}

TEST_CASE("search for a locked entity returns no results for its page") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    auto r = ep.search("Chad Cornes", 5);
    CHECK(r.ok);
    for (const auto& item : r.items) CHECK(item.handle != "chad");
    // and no served byte leaks any locked alias
    CHECK_FALSE(masking::leaks_locked_alias(r.rendered, ep.policy(), ep.unlocked(), ""));
}

TEST_CASE("search for v0 ranks kane's page first") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    auto r = ep.search("Kane Cornes footballer", 5);
    REQUIRE_FALSE(r.items.empty());
    CHECK(r.items[0].handle == "kane");
}

TEST_CASE("fetch walks the chain: visiting chad unlocks nicole") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    CHECK(ep.fetch("kane").ok);
    CHECK(ep.fetch("chad").ok);
    CHECK(ep.unlocked().count("nicole") == 1);
    CHECK(ep.visited() == std::set<std::string>{"kane", "chad"});
}

TEST_CASE("fetching a locked page reads as not found") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    auto r = ep.fetch("Graham Cornes");
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == "not_found");
    CHECK(r.content == "not found");
    // indistinguishable from a page that does not exist
    auto ghost = ep.fetch("Zzyzx");
    CHECK(ghost.error_code == r.error_code);
    CHECK(ghost.content == r.content);
    CHECK(ep.budget_remaining() == 38);  // both consumed budget
}

TEST_CASE("fetching the same page twice costs budget twice, visited unchanged") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    CHECK(ep.fetch("kane").ok);
    CHECK(ep.fetch("kane").ok);
    CHECK(ep.visited().size() == 1);
    CHECK(ep.budget_remaining() == 38);
}

TEST_CASE("fetched views are masked: kane's view shows chad, chad's view shows nicole only") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    auto kane_view = ep.fetch("kane");
    CHECK(kane_view.content.find("Chad Cornes") != std::string::npos);  // reveal page
    auto chad_view = ep.fetch("chad");
    CHECK(chad_view.content.find("Nicole Cornes") != std::string::npos);
    CHECK_FALSE(masking::leaks_locked_alias(chad_view.content, ep.policy(), ep.unlocked(),
                                            "chad"));
}

TEST_CASE("41st tool call rejected with budget_exhausted; submit still honored") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    for (int i = 0; i < 40; ++i) CHECK(ep.search("cornes", 2).ok);
    auto r = ep.search("cornes", 2);
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == "budget_exhausted");
    CHECK(ep.status() == Status::exhausted);
    ep.submit({FinalResponse::Kind::attempt, "Graham Cornes", {}});
    CHECK(ep.status() == Status::answered);
    auto trace = ep.export_trace();
    CHECK(trace.tool_call_count() == 40);  // the rejected call does not count
    CHECK(trace.events.size() == 42);      // 40 + rejected + submit
}

TEST_CASE("submit semantics: attempt, refuse, empty attempt, double submit") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    CHECK_THROWS_AS(ep.submit({FinalResponse::Kind::attempt, "", {}}), Error);
    ep.submit({FinalResponse::Kind::refuse, "", {}});
    CHECK(ep.status() == Status::refused);
    CHECK_THROWS_AS(ep.submit({FinalResponse::Kind::refuse, "", {}}), Error);

    Episode ep2(store, record);
    ep2.submit({FinalResponse::Kind::attempt, "Graham Cornes", {}});
    CHECK(ep2.status() == Status::answered);
}

TEST_CASE("tool calls after close are rejected without consuming budget") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    ep.submit({FinalResponse::Kind::refuse, "", {}});
    auto r = ep.fetch("kane");
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == "closed");
    CHECK(ep.budget_remaining() == 40);
}

TEST_CASE("export_trace: open episode errors; closed episode carries everything") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    CHECK_THROWS_AS(ep.export_trace(), Error);
    ep.fetch("kane");
    ep.submit({FinalResponse::Kind::refuse, "", {}});
    auto trace = ep.export_trace();
    CHECK(trace.question_id == record.id);
    CHECK(trace.visited == std::set<std::string>{"kane"});
    CHECK(trace.budget_remaining == 39);
    CHECK(trace.final_status == Status::refused);
}

TEST_CASE("refused-immediately episode has zero tool events") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    ep.submit({FinalResponse::Kind::refuse, "", {}});
    CHECK(ep.export_trace().tool_call_count() == 0);
}

TEST_CASE("trace ndjson round-trip preserves digests and final response") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    ep.search("cornes", 3);
    ep.fetch("kane");
    ep.submit({FinalResponse::Kind::attempt, "Graham Cornes", {{"claim a", "EID-001"}}});
    auto trace = ep.export_trace();
    auto again = sandbox::Trace::from_ndjson(trace.to_ndjson());
    REQUIRE(again.events.size() == trace.events.size());
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        CHECK(again.events[i].response_digest == trace.events[i].response_digest);
        CHECK(again.events[i].seq == trace.events[i].seq);
    }
    CHECK(again.visited == trace.visited);
    CHECK(again.final_response.answer_text == "Graham Cornes");
    CHECK(again.final_response.claims == trace.final_response.claims);
    CHECK(again.to_ndjson() == trace.to_ndjson());
}

TEST_CASE("replay determinism: digests reproduce against the same corpus") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    ep.search("cornes footballer", 4);
    ep.fetch("kane");
    ep.fetch("chad");
    ep.fetch("Graham Cornes");  // still locked -> not found, part of the log
    ep.fetch("nicole");
    ep.submit({FinalResponse::Kind::attempt, "Graham Cornes", {}});
    auto trace = ep.export_trace();
    CHECK(sandbox::replay_matches(store, record, trace));

    // tampering with a digest must be detected
    auto tampered = trace;
    tampered.events[1].response_digest[0] = tampered.events[1].response_digest[0] == 'a' ? 'b' : 'a';
    CHECK_FALSE(sandbox::replay_matches(store, record, tampered));
}

TEST_CASE("isolation: two episodes on one record have independent unlock state") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode a(store, record), b(store, record);
    CHECK(a.fetch("kane").ok);
    CHECK(a.fetch("chad").ok);
    CHECK(b.unlocked() == std::set<std::string>{"kane"});
    CHECK_FALSE(b.fetch("chad").ok);
}

TEST_CASE("flush_as_refuse closes an open episode and flags the trace") {
    auto store = family_store();
    auto record = fixtures::family_record(store);
    Episode ep(store, record);
    ep.fetch("kane");
    ep.flush_as_refuse();
    auto trace = ep.export_trace();
    CHECK(trace.final_status == Status::refused);
    CHECK(trace.flushed_on_shutdown);
}
