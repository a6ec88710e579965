#pragma once

// Append-only response cache, one file per backend id.
//
// File layout (little endian):
//   header:  8 bytes magic "ROCKCACH", u32 format version
//   record:  u32 payload length, then payload =
//              u64 key, i64 created_at (unix ms), response bytes
// A truncated trailing record (interrupted append) is dropped on open.

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rock/errors.hpp"
#include "rock/hash.hpp"

namespace rock {

struct CacheEntry {
  std::uint64_t key = 0;
  std::string response;
  std::int64_t created_at = 0;
};

struct CacheStats {
  std::size_t entries = 0;  // unique keys
  std::size_t records = 0;  // records in the file, duplicates included
  std::uintmax_t file_bytes = 0;
};

class ResponseCache {
 public:
  static constexpr char kMagic[8] = {'R', 'O', 'C', 'K', 'C', 'A', 'C', 'H'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderSize = 12;

  /// In-memory only; nothing persists.
  explicit ResponseCache(std::string backend_id) : backend_id_(std::move(backend_id)) {}

  /// Persistent cache under `dir`, created if needed.
  ResponseCache(const std::filesystem::path& dir, std::string backend_id)
      : backend_id_(std::move(backend_id)), path_(dir / file_name(backend_id_)) {
    std::filesystem::create_directories(dir);
    load_file();
  }

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  static std::string file_name(std::string_view backend_id) {
    std::string name;
    for (char c : backend_id) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
      name.push_back(ok ? c : '_');
    }
    if (name.empty()) name = "default";
    return name + ".rkc";
  }

  static std::uint64_t make_key(std::string_view backend_id, std::string_view endpoint,
                                std::string_view canonical_request) {
    std::uint64_t h = fnv1a64(backend_id);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(endpoint, h);
    h = fnv1a64(std::string_view("\0", 1), h);
    return fnv1a64(canonical_request, h);
  }

  std::uint64_t key_for(std::string_view endpoint, std::string_view canonical_request) const {
    return make_key(backend_id_, endpoint, canonical_request);
  }

  std::optional<std::string> load(std::uint64_t key) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second.response;
  }

  std::optional<CacheEntry> entry(std::uint64_t key) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void store(std::uint64_t key, std::string response) {
    std::vector<std::pair<std::uint64_t, std::string>> one;
    one.emplace_back(key, std::move(response));
    store_batch(std::move(one));
  }

  /// All records land in one write; either the whole batch is indexed or
  /// (on I/O failure) none of it.
  void store_batch(std::vector<std::pair<std::uint64_t, std::string>> batch) {
    if (batch.empty()) return;
    const std::int64_t now = now_ms();
    std::unique_lock lock(mutex_);
    if (path_) {
      std::string buf;
      for (const auto& [key, resp] : batch) append_record(buf, key, now, resp);
      std::ofstream out(*path_, std::ios::binary | std::ios::app);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      out.flush();
      if (!out) throw DataError("failed to append to cache file " + path_->string());
    }
    for (auto& [key, resp] : batch) {
      index_[key] = CacheEntry{key, std::move(resp), now};
      ++records_;
    }
  }

  CacheStats stats() const {
    std::shared_lock lock(mutex_);
    CacheStats s{index_.size(), records_, 0};
    if (path_ && std::filesystem::exists(*path_)) s.file_bytes = std::filesystem::file_size(*path_);
    return s;
  }

  /// Rewrite the file with one record per key, ordered by key.
  void compact() {
    std::unique_lock lock(mutex_);
    if (!path_) {
      records_ = index_.size();
      return;
    }
    std::map<std::uint64_t, const CacheEntry*> ordered;
    for (const auto& [k, e] : index_) ordered.emplace(k, &e);
    std::string buf = header();
    for (const auto& [k, e] : ordered) append_record(buf, k, e->created_at, e->response);
    const auto tmp = std::filesystem::path(path_->string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!out) throw DataError("failed to write " + tmp.string());
    }
    std::filesystem::rename(tmp, *path_);
    records_ = index_.size();
  }

  const std::string& backend_id() const noexcept { return backend_id_; }
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  static std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }

  template <class T>
  static void put(std::string& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }

  template <class T>
  static T get(const char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return static_cast<T>(v);
  }

  static std::string header() {
    std::string h(kMagic, sizeof(kMagic));
    put<std::uint32_t>(h, kVersion);
    return h;
  }

  static void append_record(std::string& buf, std::uint64_t key, std::int64_t created, std::string_view resp) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(16 + resp.size()));
    put<std::uint64_t>(buf, key);
    put<std::int64_t>(buf, created);
    buf.append(resp);
  }

  void load_file() {
    const auto& p = *path_;
    if (!std::filesystem::exists(p)) {
      std::ofstream out(p, std::ios::binary);
      const auto h = header();
      out.write(h.data(), static_cast<std::streamsize>(h.size()));
      if (!out) throw DataError("cannot create cache file " + p.string());
      return;
    }
    std::ifstream in(p, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < kHeaderSize || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
      throw DataError("not a cache file (bad magic): " + p.string());
    if (const auto v = get<std::uint32_t>(data.data() + 8); v != kVersion)
      throw DataError("unsupported cache format version " + std::to_string(v) + " in " + p.string());

    std::size_t off = kHeaderSize;
    while (off + 4 <= data.size()) {
      const auto len = get<std::uint32_t>(data.data() + off);
      if (len < 16 || off + 4 + len > data.size()) break;
      const char* rec = data.data() + off + 4;
      CacheEntry e{get<std::uint64_t>(rec), std::string(rec + 16, len - 16), get<std::int64_t>(rec + 8)};
      index_[e.key] = std::move(e);
      ++records_;
      off += 4 + len;
    }
    if (off != data.size()) std::filesystem::resize_file(p, off);
  }

  std::string backend_id_;
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, CacheEntry> index_;
  std::size_t records_ = 0;
};

}  // namespace rock
