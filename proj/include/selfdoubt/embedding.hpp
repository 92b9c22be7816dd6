#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "selfdoubt/errors.hpp"
#include "selfdoubt/jsonl.hpp"

namespace selfdoubt {

struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  std::size_t dim() const { return values.size(); }
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

inline double l2_norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v.values) s += x * x;
  return std::sqrt(s);
}

inline EmbeddingVector l2_normalize(EmbeddingVector v) {
  double n = l2_norm(v);
  if (n <= 0.0 || !std::isfinite(n))
    throw validation_error("cannot normalize a zero or non-finite vector");
  for (double& x : v.values) x /= n;
  v.normalized = true;
  return v;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw validation_error("cosine: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                           std::to_string(b.dim()) + ")");
  if (a.dim() == 0) throw validation_error("cosine: empty vectors");
  double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw validation_error("cosine: zero vector");
  double c = dot(a, b) / (na * nb);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

/// Component-wise mean of the inputs, re-normalized to unit length.
inline EmbeddingVector centroid(const std::vector<EmbeddingVector>& vectors) {
  if (vectors.empty()) throw validation_error("centroid: empty input");
  const std::size_t d = vectors.front().dim();
  EmbeddingVector mean;
  mean.values.assign(d, 0.0);
  for (const auto& v : vectors) {
    if (v.dim() != d) throw validation_error("centroid: dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) mean.values[i] += v.values[i];
  }
  for (double& x : mean.values) x /= static_cast<double>(vectors.size());
  if (l2_norm(mean) < 1e-12) throw validation_error("centroid: degenerate zero-mean input");
  return l2_normalize(std::move(mean));
}

/// Text embedding source. Implementations must preserve input order and may
/// assume the inputs are already validated (nonempty, non-blank).
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual std::string name() const = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline void validate_texts(const std::vector<std::string>& texts) {
  if (texts.empty()) throw validation_error("embed_batch: empty input list");
  for (const auto& t : texts)
    if (is_blank(t)) throw validation_error("embed_batch: empty text");
}

}  // namespace detail

/// Deterministic offline embedder: each text hashes to a pseudo-random unit
/// vector, a pure function of the text bytes, the dimension, and the seed.
/// Tests and fixture pipelines run against this provider so the suite needs
/// no network and no model weights.
class StubEmbedder : public Embedder {
 public:
  explicit StubEmbedder(std::size_t dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    detail::validate_texts(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::string name() const override {
    return "stub-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
  }

  EmbeddingVector embed_one(std::string_view text) const {
    std::uint64_t state = fnv1a64(text) ^ (seed_ * 0x9e3779b97f4a7c15ull + 0x6a09e667f3bcc909ull);
    EmbeddingVector v;
    v.values.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      // uniform in [-1, 1); avoids libm so outputs are bit-stable across platforms
      std::uint64_t bits = detail::splitmix64(state);
      v.values[i] = static_cast<double>(bits >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    }
    return l2_normalize(std::move(v));
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Fixed word -> vector lookup for tests.
class MapEmbedder : public Embedder {
 public:
  explicit MapEmbedder(std::unordered_map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    detail::validate_texts(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = table_.find(t);
      if (it == table_.end()) throw validation_error("MapEmbedder: no vector for: " + t);
      out.push_back(l2_normalize(EmbeddingVector{it->second, false}));
    }
    return out;
  }

  std::string name() const override { return "map"; }

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Caching front end over any provider. Consults the cache before the
/// provider, appends new vectors to the cache file, deduplicates concurrent
/// in-flight requests for the same key, and enforces one embedding dimension
/// per session. All returned vectors are L2-normalized.
class CachingEmbedder : public Embedder {
 public:
  CachingEmbedder(std::shared_ptr<Embedder> provider, std::string model_name,
                  std::optional<std::string> cache_path = std::nullopt,
                  std::size_t batch_size = 64)
      : provider_(std::move(provider)),
        model_name_(std::move(model_name)),
        cache_path_(std::move(cache_path)),
        batch_size_(batch_size == 0 ? 1 : batch_size) {
    if (cache_path_) load_cache_file();
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    detail::validate_texts(texts);
    const std::size_t n = texts.size();
    std::vector<EmbeddingVector> out(n);
    std::vector<char> done(n, 0);

    struct Pending {
      std::promise<EmbeddingVector> promise;
      std::shared_future<EmbeddingVector> future;
    };

    std::vector<std::size_t> mine;            // indices this call will fetch
    std::vector<std::pair<std::size_t, std::shared_future<EmbeddingVector>>> waits;
    std::vector<std::shared_ptr<Pending>> owned;

    {
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string key = cache_key(texts[i]);
        auto hit = cache_.find(key);
        if (hit != cache_.end()) {
          out[i] = hit->second;
          done[i] = 1;
          ++cache_hits_;
          continue;
        }
        auto fly = inflight_.find(key);
        if (fly != inflight_.end()) {
          waits.emplace_back(i, fly->second);
          continue;
        }
        auto pending = std::make_shared<Pending>();
        pending->future = pending->promise.get_future().share();
        inflight_.emplace(key, pending->future);
        owned.push_back(pending);
        mine.push_back(i);
      }
    }

    if (!mine.empty()) {
      try {
        std::size_t owned_idx = 0;
        for (std::size_t off = 0; off < mine.size(); off += batch_size_) {
          std::size_t count = std::min(batch_size_, mine.size() - off);
          std::vector<std::string> chunk;
          chunk.reserve(count);
          for (std::size_t k = 0; k < count; ++k) chunk.push_back(texts[mine[off + k]]);
          ++provider_calls_;
          provider_texts_ += count;
          auto vectors = provider_->embed_batch(chunk);
          if (vectors.size() != chunk.size())
            throw io_error("provider returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(chunk.size()) + " texts");
          std::lock_guard<std::mutex> lock(mu_);
          for (std::size_t k = 0; k < count; ++k) {
            EmbeddingVector v = l2_normalize(std::move(vectors[k]));
            check_dim_locked(v);
            const std::size_t i = mine[off + k];
            const std::string key = cache_key(texts[i]);
            cache_[key] = v;
            append_cache_line_locked(key, texts[i], v);
            out[i] = v;
            done[i] = 1;
            owned[owned_idx]->promise.set_value(std::move(v));
            inflight_.erase(key);
            ++owned_idx;
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        auto eptr = std::current_exception();
        for (std::size_t k = 0; k < owned.size(); ++k) {
          const std::size_t i = mine[k];
          if (done[i]) continue;
          const std::string key = cache_key(texts[i]);
          inflight_.erase(key);
          try {
            owned[k]->promise.set_exception(eptr);
          } catch (const std::future_error&) {
          }
        }
        throw;
      }
    }

    for (auto& [i, fut] : waits) {
      out[i] = fut.get();
      done[i] = 1;
    }
    return out;
  }

  std::string name() const override { return provider_->name(); }
  const std::string& model_name() const { return model_name_; }

  std::uint64_t provider_calls() const { return provider_calls_.load(); }
  std::uint64_t provider_texts() const { return provider_texts_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }

 private:
  std::string cache_key(std::string_view text) const {
    std::string joined = model_name_;
    joined.push_back('\0');
    joined.append(text);
    return hex64(fnv1a64(joined));
  }

  void check_dim_locked(const EmbeddingVector& v) {
    if (!session_dim_) {
      session_dim_ = v.dim();
      return;
    }
    if (v.dim() != *session_dim_)
      throw io_error("embedding dimension changed within session: expected " +
                     std::to_string(*session_dim_) + ", got " + std::to_string(v.dim()));
  }

  void load_cache_file() {
    std::ifstream in(*cache_path_, std::ios::binary);
    if (!in) return;  // cache starts empty
    std::string line;
    while (std::getline(in, line)) {
      if (is_blank(line)) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      if (!j.contains("key") || !j.contains("vector") || !j.contains("model")) continue;
      if (j["model"].get<std::string>() != model_name_) continue;
      EmbeddingVector v;
      v.values = j["vector"].get<std::vector<double>>();
      v.normalized = true;
      std::lock_guard<std::mutex> lock(mu_);
      check_dim_locked(v);
      cache_[j["key"].get<std::string>()] = std::move(v);
    }
  }

  void append_cache_line_locked(const std::string& key, const std::string& text,
                                const EmbeddingVector& v) {
    if (!cache_path_) return;
    if (!cache_out_.is_open()) {
      cache_out_.open(*cache_path_, std::ios::binary | std::ios::app);
      if (!cache_out_) throw io_error("cannot open cache file for append: " + *cache_path_);
    }
    json j;
    j["key"] = key;
    j["model"] = model_name_;
    j["text"] = text;
    j["vector"] = v.values;
    cache_out_ << j.dump() << "\n";
    cache_out_.flush();
  }

  std::shared_ptr<Embedder> provider_;
  std::string model_name_;
  std::optional<std::string> cache_path_;
  std::size_t batch_size_;

  std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::unordered_map<std::string, std::shared_future<EmbeddingVector>> inflight_;
  std::optional<std::size_t> session_dim_;
  std::ofstream cache_out_;

  std::atomic<std::uint64_t> provider_calls_{0};
  std::atomic<std::uint64_t> provider_texts_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace selfdoubt
