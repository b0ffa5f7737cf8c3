#include <catch2/catch_amalgamated.hpp>

#include "smg/llm_client.hpp"

using namespace smg;

namespace {

ChatRequest simple_request(const std::string& text = "hello") {
    return {"test-model", {{"user", text}}, 0.0, 64};
}

}  // namespace

TEST_CASE("chat request validation") {
    ChatRequest empty{"m", {}, 0.0, 16};
    CHECK_THROWS_AS(empty.validate(), Error);
    ChatRequest hot = simple_request();
    hot.temperature = 2.5;
    CHECK_THROWS_AS(hot.validate(), Error);
    ChatRequest weird = simple_request();
    weird.messages[0].role = "oracle";
    CHECK_THROWS_AS(weird.validate(), Error);
    CHECK_NOTHROW(simple_request().validate());
}

TEST_CASE("retry: first success needs no backoff") {
    MockLlmClient mock;
    mock.reply("pong");
    std::vector<double> sleeps;
    const std::string out = complete_with_retry(mock, simple_request(), 3,
                                                [&](double s) { sleeps.push_back(s); });
    CHECK(out == "pong");
    CHECK(mock.call_count() == 1);
    CHECK(sleeps.empty());
}

TEST_CASE("retry: two failures then success, exponential backoff") {
    MockLlmClient mock;
    mock.fail("down").fail("still down").reply("recovered");
    std::vector<double> sleeps;
    const std::string out = complete_with_retry(mock, simple_request(), 2,
                                                [&](double s) { sleeps.push_back(s); });
    CHECK(out == "recovered");
    CHECK(mock.call_count() == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0] == 1.0);
    CHECK(sleeps[1] == 2.0);
}

TEST_CASE("retry: exhausted attempts raise LlmFailure") {
    MockLlmClient mock;
    mock.fail("t1").fail("t2").fail("t3");
    std::vector<double> sleeps;
    CHECK_THROWS_AS(complete_with_retry(mock, simple_request(), 2, [&](double s) { sleeps.push_back(s); }),
                    LlmFailure);
    CHECK(mock.call_count() == 3);
}

TEST_CASE("extract_json_block: fenced block wins") {
    const auto parsed = extract_json_block("Sure!\n```json\n{\"a\": 1, \"b\": [2, 3]}\n```\nbye");
    CHECK(parsed["a"] == 1);
    CHECK(parsed["b"][1] == 3);
}

TEST_CASE("extract_json_block: second block used when the first is invalid") {
    const std::string reply =
        "```json\n{not valid json\n```\nLet me fix that:\n```json\n{\"ok\": true}\n```";
    const auto parsed = extract_json_block(reply);
    CHECK(parsed["ok"] == true);
}

TEST_CASE("extract_json_block: bare braces fall back, prose fails") {
    const auto parsed = extract_json_block("the answer is {\"x\": 42} I think");
    CHECK(parsed["x"] == 42);
    // Longest balanced span is preferred, so nested objects survive strings
    // containing braces.
    const auto nested = extract_json_block(R"(noise {"s": "keep } this", "y": {"z": 1}} tail)");
    CHECK(nested["y"]["z"] == 1);
    CHECK_THROWS_AS(extract_json_block("no structured content here"), ParseFailure);
}

TEST_CASE("transcripts: record then replay byte-identically, mismatches fail") {
    MockLlmClient inner;
    inner.reply("first").reply("second");
    TranscriptRecorder recorder(inner);
    const ChatRequest a = simple_request("one");
    const ChatRequest b = simple_request("two");
    CHECK(recorder.complete(a) == "first");
    CHECK(recorder.complete(b) == "second");

    const nlohmann::json transcript = recorder.transcript();
    TranscriptReplayClient replay(transcript);
    CHECK(replay.complete(a) == "first");
    CHECK(replay.complete(b) == "second");
    CHECK_THROWS_AS(replay.complete(a), LlmFailure);  // transcript exhausted

    TranscriptReplayClient strict(transcript);
    CHECK_THROWS_AS(strict.complete(simple_request("unexpected")), LlmFailure);
}

TEST_CASE("mock: scripted failures and exhaustion") {
    MockLlmClient mock;
    mock.reply("only one");
    CHECK(mock.complete(simple_request()) == "only one");
    CHECK_THROWS_AS(mock.complete(simple_request()), LlmFailure);
}
