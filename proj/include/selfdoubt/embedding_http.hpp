#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "selfdoubt/embedding.hpp"
#include "selfdoubt/errors.hpp"

namespace selfdoubt {

struct ProviderConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:9100/embed
  std::string model_name = "bge-m3";
  std::size_t batch_size = 64;
  std::chrono::milliseconds timeout{10000};
  std::size_t retry_limit = 2;
  std::optional<std::string> cache_path;
};

namespace detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path or /
};

inline ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw validation_error("invalid endpoint URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  if (path_start == std::string::npos) {
    p.base = url;
    p.path = "/";
  } else {
    p.base = url.substr(0, path_start);
    p.path = url.substr(path_start);
  }
  return p;
}

}  // namespace detail

/// Wire client for a minimal embedding service:
///   POST endpoint  {"model": <string>, "input": [<string>...]}
///   response       {"embeddings": [[<float>...], ...]} in input order
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.batch_size == 0) throw validation_error("batch_size must be >= 1");
    url_ = detail::parse_url(cfg_.endpoint);
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    detail::validate_texts(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t off = 0; off < texts.size(); off += cfg_.batch_size) {
      std::size_t count = std::min(cfg_.batch_size, texts.size() - off);
      std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(off),
                                     texts.begin() + static_cast<std::ptrdiff_t>(off + count));
      auto vectors = post_chunk(chunk);
      for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
  }

  std::string name() const override { return cfg_.model_name; }
  const ProviderConfig& config() const { return cfg_; }

 private:
  std::vector<EmbeddingVector> post_chunk(const std::vector<std::string>& chunk) {
    json body;
    body["model"] = cfg_.model_name;
    body["input"] = chunk;
    const std::string payload = body.dump();

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= cfg_.retry_limit; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(25 * attempt));
      httplib::Client client(url_.base);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout));
      auto res = client.Post(url_.path, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("embeddings") ||
          !parsed["embeddings"].is_array()) {
        last_error = "malformed response body";
        continue;
      }
      const auto& embs = parsed["embeddings"];
      if (embs.size() != chunk.size()) {
        last_error = "response count mismatch";
        continue;
      }
      std::vector<EmbeddingVector> out;
      out.reserve(embs.size());
      for (const auto& e : embs) {
        EmbeddingVector v;
        v.values = e.get<std::vector<double>>();
        out.push_back(std::move(v));
      }
      return out;
    }
    throw io_error("embedding request failed after " + std::to_string(cfg_.retry_limit + 1) +
                   " attempts: " + last_error);
  }

  ProviderConfig cfg_;
  detail::ParsedUrl url_;
};

}  // namespace selfdoubt
