#include <gtest/gtest.h>

#include <fstream>

#include "rock/cache.hpp"
#include "support/tempdir.hpp"

using namespace rock;

TEST(Cache, KeyIsDeterministicAndScoped) {
  const auto k = ResponseCache::make_key("b1", "/v1/mask_fill", R"({"a":1})");
  EXPECT_EQ(k, ResponseCache::make_key("b1", "/v1/mask_fill", R"({"a":1})"));
  EXPECT_NE(k, ResponseCache::make_key("b2", "/v1/mask_fill", R"({"a":1})"));
  EXPECT_NE(k, ResponseCache::make_key("b1", "/v1/generate", R"({"a":1})"));
  // The separators keep ("ab", "c") and ("a", "bc") apart.
  EXPECT_NE(ResponseCache::make_key("ab", "c", "x"), ResponseCache::make_key("a", "bc", "x"));
}

TEST(Cache, RoundTripIsByteIdentical) {
  TempDir dir;
  std::string payload = "{\"scores\":{}}";
  payload.push_back('\0');
  payload += "\xff\x01 tail";
  {
    ResponseCache c(dir.path(), "backend/one");
    c.store(17, payload);
    EXPECT_EQ(*c.load(17), payload);
    EXPECT_FALSE(c.load(18).has_value());
  }
  ResponseCache reopened(dir.path(), "backend/one");
  EXPECT_EQ(*reopened.load(17), payload);
  EXPECT_TRUE(std::filesystem::exists(dir / "backend_one.rkc"));
}

TEST(Cache, TruncatedTailIsDropped) {
  TempDir dir;
  {
    ResponseCache c(dir.path(), "b");
    c.store(1, "first");
    c.store(2, "second");
  }
  const auto file = dir / "b.rkc";
  const auto full = std::filesystem::file_size(file);
  std::filesystem::resize_file(file, full - 3);
  ResponseCache c(dir.path(), "b");
  EXPECT_EQ(*c.load(1), "first");
  EXPECT_FALSE(c.load(2).has_value());
  EXPECT_EQ(c.stats().records, 1u);
  c.store(3, "third");
  ResponseCache again(dir.path(), "b");
  EXPECT_EQ(*again.load(3), "third");
}

TEST(Cache, RejectsForeignFiles) {
  TempDir dir;
  std::ofstream(dir / "b.rkc") << "not a cache";
  EXPECT_THROW(ResponseCache(dir.path(), "b"), DataError);
}

TEST(Cache, CompactionKeepsLatestValuePerKey) {
  TempDir dir;
  ResponseCache c(dir.path(), "b");
  c.store(5, "old");
  c.store(5, "new");
  c.store(9, "nine");
  EXPECT_EQ(c.stats().records, 3u);
  EXPECT_EQ(c.stats().entries, 2u);
  const auto before = c.stats().file_bytes;
  c.compact();
  EXPECT_EQ(c.stats().records, 2u);
  EXPECT_LT(c.stats().file_bytes, before);
  ResponseCache reopened(dir.path(), "b");
  EXPECT_EQ(*reopened.load(5), "new");
  EXPECT_EQ(*reopened.load(9), "nine");
  EXPECT_EQ(reopened.stats().records, 2u);
}

TEST(Cache, BatchStoreIndexesEverything) {
  ResponseCache mem("in-memory");
  mem.store_batch({{1, "a"}, {2, "b"}, {3, "c"}});
  EXPECT_EQ(mem.stats().entries, 3u);
  EXPECT_EQ(mem.stats().file_bytes, 0u);
  EXPECT_EQ(*mem.load(2), "b");
}
