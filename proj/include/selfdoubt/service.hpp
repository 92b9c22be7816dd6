#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "selfdoubt/cascade.hpp"
#include "selfdoubt/errors.hpp"
#include "selfdoubt/matcher.hpp"
#include "selfdoubt/scoring.hpp"
#include "selfdoubt/trace_store.hpp"

namespace selfdoubt {

struct ModelAssets {
  MarkerDictionary dictionary;
  CompiledMatcher matcher;
  CalibrationProfile profile;
};

struct ScoreResponse {
  long h = 0;
  long v = 0;
  double hvr = 0.0;
  std::optional<double> verb_conf;
  std::optional<double> selfdoubt;
};

/// Scoring service over immutable shared state. A reload builds a complete
/// new state and swaps it in atomically, so requests observe either the old
/// or the new version, never a mix.
class ScoringService {
 public:
  struct State {
    std::map<std::string, ModelAssets> models;
    double default_tau = 0.0;
    std::string version;  // combined content hash of the loaded dictionaries
  };

  ScoringService() : state_(std::make_shared<const State>()) {}

  void load(std::map<std::string, ModelAssets> models, double default_tau) {
    auto next = std::make_shared<State>();
    next->models = std::move(models);
    next->default_tau = default_tau;
    std::string combined;
    for (const auto& [name, assets] : next->models) {
      combined += name + ":" + assets.matcher.source_hash() + ":";
      combined += profile_to_json(assets.profile).dump() + ";";
    }
    next->version = hex64(fnv1a64(combined));
    std::atomic_store_explicit(&state_, std::shared_ptr<const State>(std::move(next)),
                               std::memory_order_release);
  }

  std::shared_ptr<const State> state() const {
    return std::atomic_load_explicit(&state_, std::memory_order_acquire);
  }

  std::uint64_t request_count() const { return requests_.load(); }
  std::uint64_t total_latency_us() const { return latency_us_.load(); }

  ScoreResponse score(const State& state, const std::string& model, const std::string& trace_text,
                      const std::optional<std::string>& response_text,
                      std::optional<double> verb_conf) const {
    auto it = state.models.find(model);
    if (it == state.models.end()) throw validation_error("unknown model: " + model);
    ScoreResponse out;
    const MatchResult match = it->second.matcher.count_markers(trace_text);
    out.h = match.h;
    out.v = match.v;
    out.hvr = match.hvr;
    out.verb_conf = verb_conf;
    if (!out.verb_conf && response_text)
      out.verb_conf = parse_confidence(extract_answer_region(*response_text));
    if (out.verb_conf)
      out.selfdoubt = selfdoubt_score(out.hvr, *out.verb_conf, it->second.profile);
    return out;
  }

  Decision decide_request(const State& state, const std::string& model,
                          const std::string& trace_text,
                          const std::optional<std::string>& response_text,
                          std::optional<double> verb_conf, std::optional<double> tau) const {
    auto it = state.models.find(model);
    if (it == state.models.end()) throw validation_error("unknown model: " + model);
    const ScoreResponse s = score(state, model, trace_text, response_text, verb_conf);
    return decide(s.h, s.hvr, s.verb_conf, it->second.profile,
                  tau.value_or(state.default_tau));
  }

  void attach(httplib::Server& server) {
    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, /*want_decision=*/false);
    });
    server.Post("/v1/decide", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, /*want_decision=*/true);
    });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      ++requests_;
      auto state = this->state();
      json body;
      body["status"] = "ok";
      json models = json::array();
      for (const auto& [name, assets] : state->models) models.push_back(name);
      body["models"] = models;
      res.set_content(body.dump(), "application/json");
    });
  }

  /// Attaches the endpoints and binds; port 0 picks an ephemeral port. The
  /// caller runs server.listen_after_bind() (blocking) when ready.
  int bind(httplib::Server& server, const std::string& host, int port) {
    attach(server);
    if (port == 0) {
      int bound = server.bind_to_any_port(host);
      if (bound <= 0) throw io_error("cannot bind service port on " + host);
      port_ = bound;
      return bound;
    }
    if (!server.bind_to_port(host, port))
      throw io_error("cannot bind port " + std::to_string(port));
    port_ = port;
    return port;
  }

  int port() const { return port_; }

 private:
  static json error_body(const std::string& message) { return json{{"error", message}}; }

  void handle(const httplib::Request& req, httplib::Response& res, bool want_decision) {
    ++requests_;
    const auto started = std::chrono::steady_clock::now();
    struct LatencyGuard {
      std::chrono::steady_clock::time_point start;
      std::atomic<std::uint64_t>& sink;
      ~LatencyGuard() {
        sink += static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                               std::chrono::steady_clock::now() - start)
                                               .count());
      }
    } latency_guard{started, latency_us_};
    auto state = this->state();
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      res.status = 400;
      res.set_content(error_body("malformed JSON body").dump(), "application/json");
      return;
    }
    if (!body.contains("model") || !body["model"].is_string() || !body.contains("trace_text") ||
        !body["trace_text"].is_string()) {
      res.status = 400;
      res.set_content(error_body("body requires string fields: model, trace_text").dump(),
                      "application/json");
      return;
    }
    const std::string model = body["model"].get<std::string>();
    const std::string trace_text = body["trace_text"].get<std::string>();
    std::optional<std::string> response_text;
    if (body.contains("response_text") && body["response_text"].is_string())
      response_text = body["response_text"].get<std::string>();
    std::optional<double> verb_conf;
    if (body.contains("verbalized_confidence") && body["verbalized_confidence"].is_number()) {
      double v = body["verbalized_confidence"].get<double>();
      if (v < 0.0 || v > 1.0) {
        res.status = 400;
        res.set_content(error_body("verbalized_confidence outside [0,1]").dump(),
                        "application/json");
        return;
      }
      verb_conf = v;
    }
    if (!state->models.count(model)) {
      res.status = 404;
      res.set_content(error_body("unknown model: " + model).dump(), "application/json");
      return;
    }
    if (want_decision) {
      std::optional<double> tau;
      if (body.contains("tau") && body["tau"].is_number()) tau = body["tau"].get<double>();
      const Decision d = decide_request(*state, model, trace_text, response_text, verb_conf, tau);
      json out;
      out["decision"] = to_string(d.outcome);
      out["tier"] = to_string(d.tier);
      out["score"] = d.score ? json(*d.score) : json(nullptr);
      out["tau"] = d.tau;
      res.set_content(out.dump(), "application/json");
    } else {
      const ScoreResponse s = score(*state, model, trace_text, response_text, verb_conf);
      json out;
      out["h"] = s.h;
      out["v"] = s.v;
      out["hvr"] = s.hvr;
      out["verb_conf"] = s.verb_conf ? json(*s.verb_conf) : json(nullptr);
      out["selfdoubt"] = s.selfdoubt ? json(*s.selfdoubt) : json(nullptr);
      res.set_content(out.dump(), "application/json");
    }
  }

  std::shared_ptr<const State> state_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> latency_us_{0};
  int port_ = 0;
};

}  // namespace selfdoubt
