#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "selfdoubt/service.hpp"

using namespace selfdoubt;

namespace {

ModelAssets make_assets(const std::string& model) {
  ModelAssets assets;
  assets.dictionary.model = model;
  assets.dictionary.hedge = {"maybe", "not sure"};
  assets.dictionary.verify = {"check", "verify"};
  assets.dictionary.tau_verify = 0.1;
  assets.dictionary.tau_hedge = 0.1;
  assets.matcher = CompiledMatcher(assets.dictionary);
  std::vector<CalibrationSample> samples = {{0.0, 0.95}, {0.0, 0.9}, {0.0, 0.92}, {0.0, 0.85},
                                            {1.0, 0.7},  {2.0, 0.6}, {0.5, 0.8},  {3.0, 0.4}};
  assets.profile = calibrate(samples, model);
  return assets;
}

struct LiveService {
  ScoringService service;
  httplib::Server server;
  std::thread listener;
  int port = 0;

  explicit LiveService(double tau = 0.0) {
    std::map<std::string, ModelAssets> models;
    models["m1"] = make_assets("m1");
    service.load(std::move(models), tau);
    port = service.bind(server, "127.0.0.1", 0);
    listener = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LiveService() {
    server.stop();
    listener.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port); }
};

}  // namespace

TEST_CASE("health endpoint lists the loaded models") {
  LiveService live;
  auto client = live.client();
  auto res = client.Get("/v1/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const json body = json::parse(res->body);
  CHECK(body.at("status") == "ok");
  CHECK(body.at("models") == json::array({"m1"}));
  CHECK(live.service.request_count() >= 1);
}

TEST_CASE("request counters and latency accumulate") {
  LiveService live;
  auto client = live.client();
  json req;
  req["model"] = "m1";
  req["trace_text"] = "maybe check";
  for (int i = 0; i < 3; ++i) client.Post("/v1/score", req.dump(), "application/json");
  CHECK(live.service.request_count() == 3);
  CHECK(live.service.total_latency_us() > 0);
}

TEST_CASE("score endpoint computes counts and the fused score") {
  LiveService live;
  auto client = live.client();
  json req;
  req["model"] = "m1";
  req["trace_text"] = "maybe this works; let me check and verify.";
  req["response_text"] = "final</think>answer (C)\nConfidence: 80%";
  auto res = client.Post("/v1/score", req.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const json body = json::parse(res->body);
  CHECK(body.at("h") == 1);
  CHECK(body.at("v") == 2);
  CHECK_THAT(body.at("hvr").get<double>(), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  CHECK_THAT(body.at("verb_conf").get<double>(), Catch::Matchers::WithinAbs(0.80, 1e-12));
  REQUIRE_FALSE(body.at("selfdoubt").is_null());

  // zero-hedge trace reports hvr exactly 0
  json zero;
  zero["model"] = "m1";
  zero["trace_text"] = "a clean derivation with no doubt words";
  auto res2 = client.Post("/v1/score", zero.dump(), "application/json");
  REQUIRE(res2);
  const json body2 = json::parse(res2->body);
  CHECK(body2.at("h") == 0);
  CHECK(body2.at("hvr") == 0.0);
  CHECK(body2.at("verb_conf").is_null());
  CHECK(body2.at("selfdoubt").is_null());
}

TEST_CASE("explicit confidence wins over response parsing") {
  LiveService live;
  auto client = live.client();
  json req;
  req["model"] = "m1";
  req["trace_text"] = "maybe";
  req["response_text"] = "</think>Confidence: 10%";
  req["verbalized_confidence"] = 0.9;
  auto res = client.Post("/v1/score", req.dump(), "application/json");
  REQUIRE(res);
  const json body = json::parse(res->body);
  CHECK_THAT(body.at("verb_conf").get<double>(), Catch::Matchers::WithinAbs(0.9, 1e-12));
}

TEST_CASE("decide endpoint runs the cascade") {
  LiveService live(0.0);
  auto client = live.client();

  json gate;
  gate["model"] = "m1";
  gate["trace_text"] = "all steps are solid";
  gate["verbalized_confidence"] = 0.05;  // ignored at tier 1
  auto res = client.Post("/v1/decide", gate.dump(), "application/json");
  REQUIRE(res);
  const json body = json::parse(res->body);
  CHECK(body.at("decision") == "accept");
  CHECK(body.at("tier") == "tier1_gate");
  CHECK(body.at("score").is_null());
  CHECK(body.at("tau") == 0.0);

  json scored;
  scored["model"] = "m1";
  scored["trace_text"] = "maybe maybe maybe not sure";
  scored["verbalized_confidence"] = 0.1;
  scored["tau"] = 3.5;
  auto res2 = client.Post("/v1/decide", scored.dump(), "application/json");
  REQUIRE(res2);
  const json body2 = json::parse(res2->body);
  CHECK(body2.at("decision") == "defer");
  CHECK(body2.at("tier") == "tier2_score");
  CHECK(body2.at("tau") == 3.5);
  REQUIRE_FALSE(body2.at("score").is_null());

  json missing;
  missing["model"] = "m1";
  missing["trace_text"] = "maybe";
  auto res3 = client.Post("/v1/decide", missing.dump(), "application/json");
  REQUIRE(res3);
  const json body3 = json::parse(res3->body);
  CHECK(body3.at("decision") == "defer");
  CHECK(body3.at("tier") == "tier2_missing_signal");
}

TEST_CASE("unknown models and malformed bodies get proper statuses") {
  LiveService live;
  auto client = live.client();
  json req;
  req["model"] = "nope";
  req["trace_text"] = "x";
  auto res = client.Post("/v1/score", req.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 404);

  auto res2 = client.Post("/v1/score", "{not json", "application/json");
  REQUIRE(res2);
  CHECK(res2->status == 400);

  auto res3 = client.Post("/v1/score", "{\"model\":\"m1\"}", "application/json");
  REQUIRE(res3);
  CHECK(res3->status == 400);

  json bad_conf;
  bad_conf["model"] = "m1";
  bad_conf["trace_text"] = "x";
  bad_conf["verbalized_confidence"] = 3.7;
  auto res4 = client.Post("/v1/score", bad_conf.dump(), "application/json");
  REQUIRE(res4);
  CHECK(res4->status == 400);

  // unknown request fields are ignored
  json extra;
  extra["model"] = "m1";
  extra["trace_text"] = "fine";
  extra["mystery"] = {{"nested", true}};
  auto res5 = client.Post("/v1/score", extra.dump(), "application/json");
  REQUIRE(res5);
  CHECK(res5->status == 200);
}

TEST_CASE("service numbers equal the library computation") {
  LiveService live;
  auto client = live.client();
  const ModelAssets assets = make_assets("m1");
  const std::vector<std::string> traces = {
      "maybe check", "not sure at all", "verify verify verify", "nothing special here",
      "maybe maybe not sure check verify"};
  for (const auto& trace : traces) {
    json req;
    req["model"] = "m1";
    req["trace_text"] = trace;
    req["verbalized_confidence"] = 0.75;
    auto res = client.Post("/v1/score", req.dump(), "application/json");
    REQUIRE(res);
    const json body = json::parse(res->body);
    const MatchResult expected = assets.matcher.count_markers(trace);
    CHECK(body.at("h").get<long>() == expected.h);
    CHECK(body.at("v").get<long>() == expected.v);
    CHECK(body.at("hvr").get<double>() == expected.hvr);
    CHECK(body.at("selfdoubt").get<double>() ==
          selfdoubt_score(expected.hvr, 0.75, assets.profile));
  }
}

TEST_CASE("reload swaps state atomically") {
  ScoringService service;
  std::map<std::string, ModelAssets> first;
  first["m1"] = make_assets("m1");
  service.load(std::move(first), 0.0);
  const auto v1 = service.state()->version;

  std::atomic<bool> stop{false};
  std::atomic<int> inconsistencies{0};
  std::thread reader([&] {
    while (!stop) {
      auto state = service.state();
      // a state always exposes a complete model set with matching profiles
      for (const auto& [name, assets] : state->models)
        if (assets.profile.model != name) ++inconsistencies;
    }
  });
  for (int i = 0; i < 50; ++i) {
    std::map<std::string, ModelAssets> next;
    next["m1"] = make_assets("m1");
    next["m2"] = make_assets("m2");
    service.load(std::move(next), 0.5);
  }
  stop = true;
  reader.join();
  CHECK(inconsistencies.load() == 0);
  CHECK(service.state()->version != v1);
  CHECK(service.state()->models.size() == 2);
  CHECK(service.state()->default_tau == 0.5);
}
