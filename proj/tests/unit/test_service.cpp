#include <set>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "plancad/synthgen.hpp"
#include "service.hpp"

using namespace plancad;
using Json = nlohmann::json;

namespace {

// A workspace with one generated drawing served on an ephemeral port.
struct Server {
    std::filesystem::path root = oracle::temp_dir("svc");
    workspace::Workspace ws{root};
    httplib::Server http;
    std::thread thread;
    int port = 0;

    explicit Server(std::string token = "") {
        synthgen::GenSpec spec;
        spec.seed = 2;
        spec.unmatched_layers = 1;
        ws.add_drawing("plan", ingest::serialize_document(synthgen::generate_drawing(spec).document));
        // a temporary: handlers must not keep a reference to it
        service::install_routes(http, ws, service::ServiceOptions{std::move(token)});
        port = http.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
    }
    ~Server() {
        http.stop();
        thread.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

Json get_json(httplib::Client& c, const std::string& path, int expect = 200) {
    auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return Json::parse(r->body);
}

Json event(const std::string& id, Json fields) {
    fields["eventId"] = id;
    fields["author"] = "tester";
    fields["timestamp"] = "2026-01-01T00:00:00Z";
    return fields;
}

}  // namespace

TEST_CASE("read endpoints") {
    Server s;
    auto c = s.client();
    const auto list = get_json(c, "/v1/drawings");
    REQUIRE(list["drawings"].size() == 1);
    CHECK(list["drawings"][0]["id"] == "plan");
    CHECK(list["drawings"][0]["events"] == 0);

    const auto one = get_json(c, "/v1/drawings/plan");
    CHECK(one.is_object());

    const auto chunks = get_json(c, "/v1/drawings/plan/chunks");
    REQUIRE(chunks["chunks"].size() == 4);
    const std::string cid = chunks["chunks"][0]["id"];
    auto svg = c.Get("/v1/drawings/plan/chunks/" + cid);
    REQUIRE(svg);
    CHECK(svg->status == 200);
    CHECK(svg->get_header_value("Content-Type") == "image/svg+xml");
    CHECK(svg->body.find("plancad-chunk/1") != std::string::npos);

    const auto labels = get_json(c, "/v1/drawings/plan/labels");
    CHECK(labels["labels"].size() > 0);
    CHECK(labels["instances"].get<int>() > 0);

    const auto exp = get_json(c, "/v1/drawings/plan/export");
    CHECK(exp["chunks"].size() == 4);
    CHECK(exp["instances"] == labels["instances"]);

    get_json(c, "/v1/drawings/nope", 404);
    get_json(c, "/v1/drawings/nope/flags", 404);
    get_json(c, "/v1/drawings/plan/chunks/zz", 404);
}

TEST_CASE("corrections over http") {
    Server s("sekret");
    auto c = s.client();
    const httplib::Headers auth = {{"Authorization", "Bearer sekret"}};

    const auto flags = get_json(c, "/v1/drawings/plan/flags")["flags"];
    std::string layer;
    for (const auto& f : flags)
        if (f["kind"] == "UnmatchedLayer") layer = f["subject"];
    REQUIRE_FALSE(layer.empty());

    const std::string body = event("e1", {{"kind", "SemanticOverride"}, {"layer", layer}, {"class", "wall"}}).dump();
    SUBCASE("token required") {
        auto r = c.Post("/v1/drawings/plan/corrections", body, "application/json");
        REQUIRE(r);
        CHECK(r->status == 401);
        auto wrong = c.Post("/v1/drawings/plan/corrections", {{"Authorization", "Bearer nope"}}, body,
                            "application/json");
        CHECK(wrong->status == 401);
        CHECK(s.ws.read_log("plan").empty());
    }
    SUBCASE("override clears the flag, duplicates and conflicts") {
        auto r = c.Post("/v1/drawings/plan/corrections", auth, body, "application/json");
        REQUIRE(r);
        CHECK(r->status == 201);
        const auto ack = Json::parse(r->body);
        CHECK(ack["logLength"] == 1);
        CHECK(ack["duplicate"] == false);
        CHECK(ack["event"]["seq"] == 1);
        for (const auto& f : get_json(c, "/v1/drawings/plan/flags")["flags"]) CHECK(f["subject"] != layer);

        auto again = c.Post("/v1/drawings/plan/corrections", auth, body, "application/json");
        CHECK(again->status == 200);
        CHECK(Json::parse(again->body)["duplicate"] == true);

        auto stale = event("e2", {{"kind", "SemanticOverride"}, {"layer", layer}, {"class", "beam"}, {"seq", 1}});
        CHECK(c.Post("/v1/drawings/plan/corrections", auth, stale.dump(), "application/json")->status == 409);

        auto bad = event("e3", {{"kind", "SemanticOverride"}, {"layer", layer}, {"class", "Fnord"}});
        auto br = c.Post("/v1/drawings/plan/corrections", auth, bad.dump(), "application/json");
        CHECK(br->status == 400);
        CHECK(Json::parse(br->body)["error"] == "BadEvent");

        CHECK(c.Post("/v1/drawings/plan/corrections", auth, "{oops", "application/json")->status == 400);
        CHECK(c.Post("/v1/drawings/nope/corrections", auth, body, "application/json")->status == 404);
        CHECK(get_json(c, "/v1/drawings")["drawings"][0]["events"] == 1);
    }
    SUBCASE("merge reduces the exported instance count") {
        const auto labels = get_json(c, "/v1/drawings/plan/labels");
        std::set<int> doors;
        for (const auto& l : labels["labels"])
            if (l["class"] == "door") doors.insert(l["instance"].get<int>());
        REQUIRE(doors.size() >= 2);
        const std::vector<int> pick(doors.begin(), std::next(doors.begin(), 2));
        const auto merge = event("m1", {{"kind", "MergeInstances"}, {"instances", pick}});
        CHECK(c.Post("/v1/drawings/plan/corrections", auth, merge.dump(), "application/json")->status == 201);
        const auto exp = get_json(c, "/v1/drawings/plan/export");
        CHECK(exp["instances"].get<int>() == labels["instances"].get<int>() - 1);
    }
}
