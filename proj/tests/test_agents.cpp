#include <doctest.h>

#include "dseval/agents.hpp"
#include "dseval/metrics.hpp"
#include "fixtures.hpp"

using namespace dseval;
using agents::ParsedAction;

TEST_CASE("parse_action: the full grammar") {
    auto s = agents::parse_action("thinking first...\nACTION search\nQUERY kane cornes\nK 3\n");
    REQUIRE(s.has_value());
    CHECK(s->kind == ParsedAction::Kind::search);
    CHECK(s->query == "kane cornes");
    CHECK(s->k == 3);

    auto f = agents::parse_action("```\nACTION fetch\nTARGET Kane Cornes\n```");
    REQUIRE(f.has_value());
    CHECK(f->kind == ParsedAction::Kind::fetch);
    CHECK(f->target == "Kane Cornes");

    auto r = agents::parse_action("ACTION retrieve\nEID EID-007");
    REQUIRE(r.has_value());
    CHECK(r->eid == "EID-007");

    auto a = agents::parse_action(
        "ACTION answer\nANSWER Graham Cornes\n"
        "CLAIM Kane has brother Chad [EID-001]\nCLAIM Chad married Nicole [EID-002]");
    REQUIRE(a.has_value());
    CHECK(a->answer == "Graham Cornes");
    REQUIRE(a->claims.size() == 2);
    CHECK(a->claims[0] == std::pair<std::string, std::string>{"Kane has brother Chad", "EID-001"});

    CHECK(agents::parse_action("ACTION refuse")->kind == ParsedAction::Kind::refuse);
}

TEST_CASE("parse_action: rejects malformed output") {
    CHECK_FALSE(agents::parse_action("no action here").has_value());
    CHECK_FALSE(agents::parse_action("ACTION teleport\nQUERY x").has_value());
    CHECK_FALSE(agents::parse_action("ACTION search\n\n").has_value());       // missing QUERY
    CHECK_FALSE(agents::parse_action("ACTION fetch").has_value());            // missing TARGET
    CHECK_FALSE(agents::parse_action("ACTION answer\nANSWER ").has_value());  // empty answer
    CHECK_FALSE(agents::parse_action("ACTION answer\nANSWER x\nCLAIM no eid here").has_value());
    CHECK_FALSE(agents::parse_action("ACTION search\nQUERY x\nK twelve").has_value());
}

TEST_CASE("parse_action: only the first ACTION block counts") {
    auto a = agents::parse_action("ACTION search\nQUERY alpha\nACTION fetch\nTARGET beta");
    REQUIRE(a.has_value());
    CHECK(a->kind == ParsedAction::Kind::search);
    CHECK(a->query == "alpha");
    CHECK(a->target.empty());
}

TEST_CASE("context ceiling drops oldest observations, keeps system and question") {
    std::vector<chat::Message> messages = {{"system", "sys"}, {"user", "question"}};
    for (int i = 0; i < 50; ++i)
        messages.push_back({"user", std::string(400, 'x') + std::to_string(i)});
    agents::enforce_context_ceiling(messages, 1000);
    CHECK(agents::estimate_tokens(messages) <= 1000);
    CHECK(messages[0].content == "sys");
    CHECK(messages[1].content == "question");
    // the survivors are the newest observations
    CHECK(messages.back().content.find("49") != std::string::npos);
}

TEST_CASE("run_react: scripted mock walks the chain and answers") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    int step = 0;
    chat::FnEndpoint endpoint([&](const std::vector<chat::Message>&) -> std::string {
        switch (step++) {
            case 0: return "ACTION fetch\nTARGET kane";
            case 1: return "ACTION fetch\nTARGET chad";
            case 2: return "ACTION fetch\nTARGET nicole";
            default: return "ACTION answer\nANSWER Graham Cornes";
        }
    });
    auto trace = agents::run_react(endpoint, session, record.question);
    CHECK(metrics::classify_response(trace, record) == metrics::ResponseClass::attempt_correct);
    CHECK(trace.visited.size() == record.hop_count());  // hops_used = n
    CHECK(trace.tool_call_count() == 3);
}

TEST_CASE("run_react: immediate refuse leaves zero tool calls") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    auto endpoint = fixtures::always("ACTION refuse");
    auto trace = agents::run_react(endpoint, session, record.question);
    CHECK(trace.final_status == sandbox::Status::refused);
    CHECK(trace.tool_call_count() == 0);
}

TEST_CASE("run_react: mock spamming tool calls hits the budget wall, still submits") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    int calls = 0;
    chat::FnEndpoint endpoint([&](const std::vector<chat::Message>& msgs) -> std::string {
        // answer once the sandbox starts refusing tool calls
        if (!msgs.empty() && msgs.back().content.find("budget_exhausted") != std::string::npos)
            return "ACTION answer\nANSWER Graham Cornes";
        ++calls;
        return "ACTION search\nQUERY cornes " + std::to_string(calls);
    });
    auto trace = agents::run_react(endpoint, session, record.question);
    CHECK(trace.tool_call_count() == 40);
    CHECK(trace.final_status == sandbox::Status::answered);
    CHECK(trace.has_final);
}

TEST_CASE("run_react: three consecutive parse failures force a refuse") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    auto endpoint = fixtures::always("I would rather chat about the weather.");
    auto trace = agents::run_react(endpoint, session, record.question);
    CHECK(trace.final_status == sandbox::Status::refused);
    CHECK(endpoint.transcript().size() == 3);
}

TEST_CASE("run_react: endpoint failure ends in a refuse submit") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    auto endpoint = fixtures::failing_endpoint();
    auto trace = agents::run_react(endpoint, session, record.question);
    CHECK(trace.final_status == sandbox::Status::refused);
}

TEST_CASE("scripted agents: ground truth and refuse-all") {
    auto store = fixtures::family_store();
    auto record = fixtures::family_record(store);
    sandbox::Episode ep(store, record);
    sandbox::InProcessSession session(ep);
    auto trace = agents::run_ground_truth(session, record, "Graham Cornes");
    CHECK(metrics::classify_response(trace, record) == metrics::ResponseClass::attempt_correct);
    CHECK(trace.visited == std::set<std::string>{"kane", "chad", "nicole"});

    sandbox::Episode ep2(store, record);
    sandbox::InProcessSession session2(ep2);
    auto refuse = agents::run_refuse_all(session2);
    CHECK(refuse.final_status == sandbox::Status::refused);
    CHECK(refuse.tool_call_count() == 0);
}
