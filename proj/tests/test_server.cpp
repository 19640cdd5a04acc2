#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "catbn/data.hpp"
#include "catbn/server.hpp"

using namespace catbn;
using nlohmann::json;

namespace {

TestBlueprint blueprint() {
    TestBlueprint bp;
    bp.questions = {{"Q1", 1}, {"Q2", 2}, {"Q3", 1}, {"Q4", 3}, {"Q5", 1}};
    bp.info_vars = {{"math", 5}, {"gender", 2}};
    bp.total_points = 8;
    return bp;
}

std::shared_ptr<const JunctionTree> model() {
    static const auto tree = std::make_shared<const JunctionTree>(
        make_ground_truth(blueprint(), {.skill_states = 3, .scale = Scale::points, .with_info = true, .seed = 4}));
    return tree;
}

std::map<std::string, std::shared_ptr<const JunctionTree>> models() { return {{"n3+", model()}}; }

ServerConfig config() {
    ServerConfig cfg;
    cfg.port = 0;
    return cfg;
}

json call(ApiServer& s, const std::string& method, const std::string& path, const json& body, int want) {
    const ApiResponse r = s.handle(method, path, body.is_null() ? "" : body.dump());
    EXPECT_EQ(r.status, want) << method << ' ' << path << ": " << r.body;
    return json::parse(r.body);
}

std::string create(ApiServer& s, const json& info = json::object()) {
    return call(s, "POST", "/sessions", {{"model", "n3+"}, {"info_evidence", info}}, 201)["session_id"];
}

// Deterministic answer (1-based) for a question in a given session.
int answer_for(int session, const std::string& qid) {
    const VarIndex q = model()->network().index_of(qid);
    return 1 + static_cast<int>((session * 7 + q * 3) % model()->network().cardinality(q));
}

}  // namespace

TEST(Server, FullSessionMatchesLibraryBitForBit) {
    ApiServer server(models(), config());
    const json created = call(server, "POST", "/sessions", {{"model", "n3+"}, {"info_evidence", {{"math", 2}}}}, 201);
    const std::string id = created["session_id"];

    const Network& net = model()->network();
    Session lib(model(), Evidence{}.with(net.index_of("math"), 1));
    const auto first = lib.select_next();
    EXPECT_EQ(created["first_question"], net.variable(first->question).id);
    EXPECT_EQ(created["ig"].get<double>(), first->information_gain);

    for (int step = 1;; ++step) {
        const json next = call(server, "GET", "/sessions/" + id + "/next", nullptr, 200);
        const auto want = lib.select_next();
        if (!want) {
            EXPECT_EQ(next["done"], true);
            break;
        }
        const std::string qid = next["question"];
        EXPECT_EQ(qid, net.variable(want->question).id);
        EXPECT_EQ(next["ig"].get<double>(), want->information_gain);
        const int wire = answer_for(0, qid);
        const json posted = call(server, "POST", "/sessions/" + id + "/answers", {{"question", qid}, {"state", wire}}, 200);
        lib.submit_answer(want->question, wire - 1);
        EXPECT_EQ(posted["step"], step);
        EXPECT_EQ(posted["entropy"].get<double>(), lib.entropy_trace().back());
        EXPECT_EQ(posted["skill_posteriors"]["S1"].get<std::vector<double>>(), lib.skill_estimates()[0].p);
    }

    const json est = call(server, "GET", "/sessions/" + id + "/estimates", nullptr, 200);
    EXPECT_EQ(est["entropy_trace"].get<std::vector<double>>(), lib.entropy_trace());
    EXPECT_TRUE(est["predicted"].empty());
    const json tr = call(server, "GET", "/sessions/" + id + "/transcript", nullptr, 200);
    ASSERT_EQ(tr["transcript"].size(), lib.transcript().size());
    for (std::size_t k = 0; k < lib.transcript().size(); ++k)
        EXPECT_EQ(tr["transcript"][k], json::parse(transcript_step_to_json(net, lib.transcript()[k]).dump()));

    call(server, "DELETE", "/sessions/" + id, nullptr, 200);
    EXPECT_EQ(call(server, "GET", "/sessions/" + id + "/next", nullptr, 404)["code"], "unknown_session");
}

TEST(Server, EstimatesIncludePredictions) {
    ApiServer server(models(), config());
    const std::string id = create(server);
    const json est = call(server, "GET", "/sessions/" + id + "/estimates", nullptr, 200);
    EXPECT_EQ(est["step"], 0);
    EXPECT_EQ(est["predicted"].size(), 5u);
    Session lib(model());
    const auto pred = lib.predict_answers();
    for (const auto& [q, p] : pred) {
        const auto& j = est["predicted"][model()->network().variable(q).id];
        EXPECT_EQ(j["state"], p.state + 1);
        EXPECT_EQ(j["p"].get<std::vector<double>>(), p.distribution.p);
    }
    EXPECT_EQ(est["skill_posteriors"]["S1"].get<std::vector<double>>(), lib.skill_estimates()[0].p);
}

TEST(Server, ErrorStatuses) {
    ApiServer server(models(), config());
    const std::string id = create(server);
    const std::string base = "/sessions/" + id;
    call(server, "POST", base + "/answers", {{"question", "Q1"}, {"state", 1}}, 200);
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"question", "Q1"}, {"state", 2}}, 409)["code"], "duplicate_answer");
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"question", "Q2"}, {"state", 0}}, 422)["code"], "invalid_state");
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"question", "Q2"}, {"state", 4}}, 422)["code"], "invalid_state");
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"question", "nope"}, {"state", 1}}, 422)["code"],
              "unknown_question");
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"question", "S1"}, {"state", 1}}, 422)["code"],
              "unknown_question");
    EXPECT_EQ(server.handle("POST", base + "/answers", "{not json").status, 422);
    EXPECT_EQ(call(server, "POST", base + "/answers", {{"state", 1}}, 422)["code"], "invalid_json");
    EXPECT_EQ(call(server, "GET", "/sessions/zzz/next", nullptr, 404)["code"], "unknown_session");
    EXPECT_EQ(call(server, "GET", base + "/bogus", nullptr, 404)["code"], "not_found");
    EXPECT_EQ(call(server, "GET", "/elsewhere", nullptr, 404)["code"], "not_found");
    EXPECT_EQ(call(server, "POST", "/sessions", {{"model", "b9"}}, 422)["code"], "unknown_model");
    EXPECT_EQ(call(server, "POST", "/sessions", {{"model", "n3+"}, {"info_evidence", {{"math", 6}}}}, 422)["code"],
              "invalid_state");
    EXPECT_EQ(call(server, "POST", "/sessions", {{"model", "n3+"}, {"info_evidence", {{"Q1", 1}}}}, 422)["code"],
              "invalid_evidence");
    EXPECT_EQ(call(server, "POST", "/sessions", {{"model", "n3+"}, {"info_evidence", {{"zz", 1}}}}, 422)["code"],
              "unknown_variable");
    const json err = call(server, "GET", "/sessions/zzz/next", nullptr, 404);
    EXPECT_TRUE(err.contains("message"));
}

TEST(Server, ImpossibleAnswerIsRejectedAndSessionKept) {
    Network net;
    const VarIndex s = net.add_variable({"S1", "", 2, Role::skill, {}, {}});
    for (const char* id : {"A", "B"}) {
        const VarIndex x = net.add_variable({id, "", 2, Role::question, {}, {}});
        net.set_parents(x, {s});
        net.set_table(x, {1.0, 0.0, 0.0, 1.0});
    }
    ApiServer server({{"copy", std::make_shared<const JunctionTree>(net)}}, config());
    const std::string id = call(server, "POST", "/sessions", {{"model", "copy"}}, 201)["session_id"];
    call(server, "POST", "/sessions/" + id + "/answers", {{"question", "A"}, {"state", 1}}, 200);
    EXPECT_EQ(call(server, "POST", "/sessions/" + id + "/answers", {{"question", "B"}, {"state", 2}}, 422)["code"],
              "impossible_evidence");
    call(server, "POST", "/sessions/" + id + "/answers", {{"question", "B"}, {"state", 1}}, 200);
    EXPECT_EQ(call(server, "GET", "/sessions/" + id + "/next", nullptr, 200)["done"], true);
}

TEST(Server, SessionsExpire) {
    ApiServer server(models(), config());
    auto now = ApiServer::Clock::now();
    server.set_clock([&] { return now; });
    const std::string a = create(server);
    now += std::chrono::seconds(3000);
    call(server, "GET", "/sessions/" + a + "/next", nullptr, 200);  // refreshes the idle timer
    now += std::chrono::seconds(3000);
    call(server, "GET", "/sessions/" + a + "/next", nullptr, 200);
    now += std::chrono::seconds(3601);
    EXPECT_EQ(call(server, "GET", "/sessions/" + a + "/next", nullptr, 410)["code"], "session_expired");
    EXPECT_EQ(server.session_count(), 0u);

    const std::string b = create(server);
    now += std::chrono::seconds(4000);
    create(server);  // evicts b
    EXPECT_EQ(server.session_count(), 1u);
    call(server, "GET", "/sessions/" + b + "/next", nullptr, 404);
}

TEST(Server, HundredInterleavedSessionsStayIndependent) {
    ApiServer server(models(), config());
    constexpr int kSessions = 100;
    std::vector<std::string> ids(kSessions);
    for (int i = 0; i < kSessions; ++i) ids[i] = create(server, {{"gender", 1 + i % 2}});
    ASSERT_EQ(server.session_count(), 100u);

    // Four workers each advance every session they own by one answer per round.
    std::vector<std::vector<json>> last(kSessions);
    auto worker = [&](int w) {
        for (int round = 0; round < 5; ++round)
            for (int i = w; i < kSessions; i += 4) {
                const json next = json::parse(server.handle("GET", "/sessions/" + ids[i] + "/next", "").body);
                if (next["done"]) continue;
                const std::string qid = next["question"];
                const json body = {{"question", qid}, {"state", answer_for(i, qid)}};
                last[i].push_back(json::parse(server.handle("POST", "/sessions/" + ids[i] + "/answers", body.dump()).body));
            }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();

    const Network& net = model()->network();
    for (int i = 0; i < kSessions; ++i) {
        Session lib(model(), Evidence{}.with(net.index_of("gender"), i % 2));
        ASSERT_EQ(last[i].size(), 5u);
        for (const json& posted : last[i]) {
            const auto next = lib.select_next();
            const std::string qid = net.variable(next->question).id;
            lib.submit_answer(next->question, answer_for(i, qid) - 1);
            EXPECT_EQ(posted["skill_posteriors"]["S1"].get<std::vector<double>>(), lib.skill_estimates()[0].p);
            EXPECT_EQ(posted["entropy"].get<double>(), lib.current_entropy());
        }
    }
}

TEST(Server, SessionLogReplay) {
    const auto log = std::filesystem::temp_directory_path() / "catbn_test_sessions.jsonl";
    std::filesystem::remove(log);
    ServerConfig cfg = config();
    cfg.session_log = log;
    std::string kept, dropped;
    json before;
    {
        ApiServer server(models(), cfg);
        kept = create(server, {{"math", 3}});
        dropped = create(server);
        call(server, "POST", "/sessions/" + kept + "/answers", {{"question", "Q2"}, {"state", 3}}, 200);
        call(server, "POST", "/sessions/" + kept + "/answers", {{"question", "Q1"}, {"state", 3}}, 422);  // not logged
        call(server, "POST", "/sessions/" + kept + "/answers", {{"question", "Q4"}, {"state", 1}}, 200);
        call(server, "DELETE", "/sessions/" + dropped, nullptr, 200);
        before = call(server, "GET", "/sessions/" + kept + "/estimates", nullptr, 200);
    }
    {
        std::ofstream torn(log, std::ios::app);
        torn << "{\"event\": \"answer\", \"id\"";  // crash mid-write
    }
    ApiServer restarted(models(), cfg);
    EXPECT_EQ(restarted.session_count(), 1u);
    EXPECT_EQ(call(restarted, "GET", "/sessions/" + kept + "/estimates", nullptr, 200), before);
    call(restarted, "GET", "/sessions/" + dropped + "/next", nullptr, 404);
    std::filesystem::remove(log);
}

TEST(Server, RealHttpRoundTrip) {
    ApiServer server(models(), config());
    const int port = server.bind();
    ASSERT_GT(port, 0);
    std::thread serving([&] { server.listen_after_bind(); });

    httplib::Client client("127.0.0.1", port);
    auto models_res = client.Get("/models");
    ASSERT_TRUE(models_res);
    EXPECT_EQ(models_res->status, 200);
    EXPECT_EQ(models_res->get_header_value("Access-Control-Allow-Origin"), "*");
    const json listed = json::parse(models_res->body);
    EXPECT_EQ(listed["models"][0]["id"], "n3+");
    EXPECT_EQ(listed["models"][0]["questions"].size(), 5u);

    auto created = client.Post("/sessions", json{{"model", "n3+"}}.dump(), "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const std::string id = json::parse(created->body)["session_id"];
    auto posted = client.Post("/sessions/" + id + "/answers", json{{"question", "Q3"}, {"state", 2}}.dump(),
                              "application/json");
    ASSERT_TRUE(posted);
    EXPECT_EQ(posted->status, 200);
    auto dup = client.Post("/sessions/" + id + "/answers", json{{"question", "Q3"}, {"state", 1}}.dump(),
                           "application/json");
    ASSERT_TRUE(dup);
    EXPECT_EQ(dup->status, 409);
    auto options = client.Options("/sessions");
    ASSERT_TRUE(options);
    EXPECT_EQ(options->status, 204);
    auto deleted = client.Delete("/sessions/" + id);
    ASSERT_TRUE(deleted);
    EXPECT_EQ(deleted->status, 200);

    server.stop();
    serving.join();
}
