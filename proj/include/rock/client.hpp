#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "rock/cache.hpp"
#include "rock/errors.hpp"
#include "rock/protocol.hpp"

namespace rock {

struct ClientOptions {
  std::string base_url = "http://127.0.0.1:8750";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{50};
  std::chrono::milliseconds timeout{30000};
  std::size_t max_concurrency = 8;
};

/// Talks to a protocol backend. Every POST goes through the cache when one
/// is attached; /v1/info never does.
class BackendClient {
 public:
  explicit BackendClient(ClientOptions options, ResponseCache* cache = nullptr)
      : options_(std::move(options)), cache_(cache) {
    if (options_.max_concurrency == 0) options_.max_concurrency = 1;
  }

  GenerateResponse generate(const GenerateRequest& req) {
    auto body = fetch(endpoint::kGenerate, {to_json(req)}, [&](const std::string& b, std::size_t) {
      auto resp = generate_response_from_json(parse_json_body(b, "generate response"));
      if (resp.completions.size() > static_cast<std::size_t>(req.n))
        throw MalformedResponse("generate response has more completions than requested");
    });
    return generate_response_from_json(parse_json_body(body.front(), "generate response"));
  }

  MaskFillResponse mask_fill(const MaskFillRequest& req) { return mask_fill_batch({req}).front(); }

  /// Issues the requests with up to max_concurrency in flight. Responses are
  /// committed to the cache only when the whole batch succeeded.
  std::vector<MaskFillResponse> mask_fill_batch(const std::vector<MaskFillRequest>& reqs) {
    std::vector<json> bodies;
    bodies.reserve(reqs.size());
    for (const auto& r : reqs) bodies.push_back(to_json(r));
    auto raw = fetch(endpoint::kMaskFill, bodies, [&](const std::string& b, std::size_t i) {
      check_mask_fill(reqs[i], mask_fill_response_from_json(parse_json_body(b, "mask_fill response")));
    });
    std::vector<MaskFillResponse> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto resp = mask_fill_response_from_json(parse_json_body(raw[i], "mask_fill response"));
      for (const auto& cand : reqs[i].candidates) {
        if (!resp.covered.at(cand)) {
          resp.scores[cand] = 0.0;
          uncovered_.fetch_add(1, std::memory_order_relaxed);
        }
      }
      out.push_back(std::move(resp));
    }
    return out;
  }

  PerturbResponse perturb(const PerturbRequest& req) {
    auto body = fetch(endpoint::kPerturb, {to_json(req)}, [&](const std::string& b, std::size_t) {
      auto resp = perturb_response_from_json(parse_json_body(b, "perturb response"));
      for (const auto& p : resp.perturbations)
        if (std::find(req.control_codes.begin(), req.control_codes.end(), p.code) == req.control_codes.end())
          throw MalformedResponse(std::string("perturb response used unrequested code '") + to_string(p.code) + "'");
    });
    return perturb_response_from_json(parse_json_body(body.front(), "perturb response"));
  }

  BackendInfo info() {
    httplib::Client http = make_http();
    return backend_info_from_json(parse_json_body(get_with_retry(http, endpoint::kInfo), "info response"));
  }

  std::size_t network_requests() const noexcept { return network_requests_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  std::size_t uncovered_candidates() const noexcept { return uncovered_.load(); }
  const ClientOptions& options() const noexcept { return options_; }
  ResponseCache* cache() const noexcept { return cache_; }
  std::string backend_id() const { return cache_ ? cache_->backend_id() : options_.base_url; }

 private:
  using Validator = std::function<void(const std::string&, std::size_t)>;

  static void check_mask_fill(const MaskFillRequest& req, const MaskFillResponse& resp) {
    for (const auto& cand : req.candidates)
      if (!resp.scores.count(cand) || !resp.covered.count(cand))
        throw MalformedResponse("mask_fill response is missing candidate '" + cand + "'");
  }

  httplib::Client make_http() const {
    httplib::Client http(options_.base_url);
    http.set_keep_alive(true);
    http.set_tcp_nodelay(true);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    http.set_connection_timeout(secs.count(), usecs.count());
    http.set_read_timeout(secs.count(), usecs.count());
    http.set_write_timeout(secs.count(), usecs.count());
    return http;
  }

  template <class Send>
  std::string with_retry(std::string_view ep, Send&& send) {
    std::string last_error = "no attempt made";
    const int attempts = 1 + std::max(0, options_.max_retries);
    auto backoff = options_.initial_backoff;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      network_requests_.fetch_add(1, std::memory_order_relaxed);
      auto res = send();
      if (res) {
        if (res->status >= 200 && res->status < 300) return res->body;
        if (res->status >= 400 && res->status < 500) throw RequestRejected(res->status, std::string(ep) + ": " + res->body);
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        last_error = httplib::to_string(res.error());
      }
      if (attempt < attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    throw BackendUnavailable(options_.base_url + std::string(ep), attempts, last_error);
  }

  std::string post_with_retry(httplib::Client& http, std::string_view ep, const std::string& body) {
    return with_retry(ep, [&] { return http.Post(std::string(ep), body, "application/json"); });
  }

  std::string get_with_retry(httplib::Client& http, std::string_view ep) {
    return with_retry(ep, [&] { return http.Get(std::string(ep)); });
  }

  std::vector<std::string> fetch(std::string_view ep, const std::vector<json>& requests, const Validator& validate) {
    const std::size_t n = requests.size();
    std::vector<std::string> canon(n), out(n);
    std::vector<std::uint64_t> keys(n);
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < n; ++i) {
      canon[i] = canonical(requests[i]);
      if (cache_) {
        keys[i] = cache_->key_for(ep, canon[i]);
        if (auto hit = cache_->load(keys[i])) {
          out[i] = std::move(*hit);
          cache_hits_.fetch_add(1, std::memory_order_relaxed);
          continue;
        }
      }
      misses.push_back(i);
    }
    if (misses.empty()) return out;

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      httplib::Client http = make_http();
      for (;;) {
        const std::size_t slot = next.fetch_add(1);
        if (slot >= misses.size()) return;
        {
          std::lock_guard lock(failure_mutex);
          if (failure) return;
        }
        const std::size_t i = misses[slot];
        try {
          out[i] = post_with_retry(http, ep, canon[i]);
          validate(out[i], i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    const std::size_t workers = std::min(options_.max_concurrency, misses.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    if (cache_) {
      std::vector<std::pair<std::uint64_t, std::string>> batch;
      batch.reserve(misses.size());
      for (auto i : misses) batch.emplace_back(keys[i], out[i]);
      cache_->store_batch(std::move(batch));
    }
    return out;
  }

  ClientOptions options_;
  ResponseCache* cache_;
  std::atomic<std::size_t> network_requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> uncovered_{0};
};

}  // namespace rock
