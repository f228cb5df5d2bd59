#include "kagent/model_client.hpp"
#include "kagent/text.hpp"

#include "support/testing.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace kagent;
using nlohmann::json;

namespace {

ModelRequest request(PromptKind kind, std::string prompt = "p")
{
    ModelRequest r;
    r.kind = kind;
    r.prompt = std::move(prompt);
    r.request_id = "s-r0001";
    return r;
}

// Local chat-completions endpoint; fails the first `failures` requests.
struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    int failures = 0;
    json last_body;
    std::string last_auth;

    FakeEndpoint()
    {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            int n = ++hits;
            last_body = json::parse(req.body);
            last_auth = req.get_header_value("Authorization");
            if (n <= failures) {
                res.status = 503;
                res.set_content("busy", "text/plain");
                return;
            }
            json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " +
                                                     last_body["messages"][0]["content"].get<std::string>()}}}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint()
    {
        server.stop();
        thread.join();
    }

    RemoteModelConfig config() const
    {
        RemoteModelConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        c.model = "test-model";
        c.api_key = "secret";
        c.initial_backoff = std::chrono::milliseconds(1);
        return c;
    }
};

} // namespace

TEST_CASE("scripted model serves responses by kind and occurrence")
{
    ScriptedModel m({{{PromptKind::Optimization, 1}, "o1"},
                     {{PromptKind::Optimization, 2}, "o2"},
                     {{PromptKind::Repair, 1}, "r1"}});
    CHECK(m.complete(request(PromptKind::Optimization)) == "o1");
    CHECK(m.complete(request(PromptKind::Repair)) == "r1");
    CHECK(m.complete(request(PromptKind::Optimization)) == "o2");
    CHECK(m.occurrences(PromptKind::Optimization) == 2);
    CHECK_THROWS_AS(m.complete(request(PromptKind::Optimization)), ScriptExhausted);
    CHECK_THROWS_AS(m.complete(request(PromptKind::InitialSynthesis)), ScriptExhausted);

    ScriptedModel big({{{PromptKind::Diagnosis, 1}, std::string(50, 'x')}});
    auto r = request(PromptKind::Diagnosis);
    r.max_output_chars = 10;
    CHECK_THROWS_AS(big.complete(r), ResponseTooLarge);
}

TEST_CASE("load_script reads the bundled session script")
{
    auto set = load_script(kagent::testing::fixture("sessions/matmul_square/script.json"));
    CHECK(set.size() == 15);
    CHECK(set.count({PromptKind::Optimization, 12}) == 1);
    CHECK(set.at({PromptKind::Repair, 1}).find("REPLACE") != std::string::npos);

    kagent::testing::TempDir dir;
    write_file_atomic(dir / "dup.json", R"({"responses": [{"kind": "repair", "text": "a"},
        {"kind": "repair", "text": "b", "occurrence": 1}]})");
    CHECK_THROWS_AS(load_script(dir / "dup.json"), ConfigError);
    write_file_atomic(dir / "kind.json", R"({"responses": [{"kind": "poem", "text": "a"}]})");
    CHECK_THROWS_AS(load_script(dir / "kind.json"), ConfigError);
    write_file_atomic(dir / "body.json", R"({"responses": [{"kind": "repair"}]})");
    CHECK_THROWS_AS(load_script(dir / "body.json"), ConfigError);
    CHECK_THROWS_AS(load_script(dir / "absent.json"), ConfigError);
}

TEST_CASE("remote model speaks chat completions")
{
    FakeEndpoint ep;
    RemoteModel m(ep.config());
    auto r = request(PromptKind::Diagnosis, "why does it fail?");
    r.temperature = 1.0;
    CHECK(m.complete(r) == "echo: why does it fail?");
    CHECK(ep.last_auth == "Bearer secret");
    CHECK(ep.last_body == m.request_body(r));
    CHECK(ep.last_body["model"] == "test-model");
    CHECK(ep.last_body["messages"].size() == 1);
    CHECK(ep.last_body["messages"][0]["role"] == "user");
    CHECK(ep.last_body["temperature"] == 1.0);
    CHECK(m.attempts_made() == 1);
}

TEST_CASE("remote model retries transient failures")
{
    FakeEndpoint ep;
    ep.failures = 2;
    RemoteModel m(ep.config());
    CHECK(m.complete(request(PromptKind::Repair, "x")) == "echo: x");
    CHECK(m.attempts_made() == 3);

    FakeEndpoint down;
    down.failures = 100;
    RemoteModel n(down.config());
    CHECK_THROWS_AS(n.complete(request(PromptKind::Repair)), ModelUnavailable);
    CHECK(n.attempts_made() == 3);
    CHECK(down.hits == 3);
}

TEST_CASE("unreachable endpoint raises ModelUnavailable after three attempts")
{
    RemoteModelConfig c;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.model = "m";
    c.initial_backoff = std::chrono::milliseconds(1);
    RemoteModel m(c);
    CHECK_THROWS_AS(m.complete(request(PromptKind::InitialSynthesis)), ModelUnavailable);
    CHECK(m.attempts_made() == 3);

    c.endpoint = "";
    CHECK_THROWS_AS(RemoteModel{c}, ConfigError);
}

TEST_CASE("journaling model writes request before and response after")
{
    kagent::testing::TempDir dir;
    ScriptedModel inner({{{PromptKind::Repair, 1}, "patch"}});
    std::vector<JournalingModel::CallRecord> seen;
    JournalingModel j(inner, dir / "calls", [&](const auto& c) { seen.push_back(c); });
    CHECK(j.complete(request(PromptKind::Repair, "fix it")) == "patch");
    CHECK(read_file(dir / "calls/0001.request.txt") == "fix it");
    CHECK(read_file(dir / "calls/0001.response.txt") == "patch");
    REQUIRE(seen.size() == 1);
    CHECK(seen[0].seq == 1);
    CHECK(seen[0].occurrence == 1);
    CHECK(seen[0].request_id == "s-r0001");
    CHECK(seen[0].prompt_sha256 == sha256_hex("fix it"));
    CHECK(seen[0].response_sha256 == sha256_hex("patch"));

    CHECK_THROWS_AS(j.complete(request(PromptKind::Repair, "again")), ScriptExhausted);
    CHECK(read_file(dir / "calls/0002.request.txt") == "again");
    CHECK_FALSE(std::filesystem::exists(dir / "calls/0002.response.txt"));
    CHECK(seen.size() == 1);
}

TEST_CASE("extract_code_block")
{
    CHECK(extract_code_block("text\n```cuda\nint a;\nint b;\n```\nmore") == "int a;\nint b;\n");
    CHECK(extract_code_block("```\nfirst\n```\n```python\nsecond\n```\n") == "second\n");
    CHECK(extract_code_block("```\nkeep\n```\n```\n   \n```\n") == "keep\n");
    CHECK(extract_code_block("```\n\n  indented\n\n```") == "\n  indented\n\n");
    CHECK_THROWS_AS(extract_code_block("no fences"), NoCodeBlock);
    CHECK_THROWS_AS(extract_code_block("```\nunterminated\n"), NoCodeBlock);
    CHECK_THROWS_AS(extract_code_block("```\n```"), NoCodeBlock);
}
