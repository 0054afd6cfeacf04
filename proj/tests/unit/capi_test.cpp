#include "ltkv/ltkv.h"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <map>
#include <string>

namespace {

ltkv_config config() {
    ltkv_config c;
    ltkv_config_default(&c);
    c.branching_factor = 64;
    c.region_size_bits = 20;
    c.durability = LTKV_DURABILITY_PROCESS;
    return c;
}

} // namespace

TEST(CApi, Defaults) {
    ltkv_config c;
    ltkv_config_default(&c);
    EXPECT_EQ(c.branching_factor, 256u);
    EXPECT_EQ(c.sluggishness, 16u);
    EXPECT_EQ(c.region_size_bits, 24u);
    EXPECT_EQ(c.hash_kind, uint32_t(LTKV_HASH_KEYED_BLAKE2B));
    EXPECT_EQ(c.scan_limit, 100u);
}

TEST(CApi, RoundTrip) {
    testutil::TempDir d;
    const auto cfg = config();
    ltkv_store* s = nullptr;
    ASSERT_EQ(ltkv_create(d.sub("s").c_str(), &cfg, &s), LTKV_OK);
    int updated = -1;
    ASSERT_EQ(ltkv_put(s, "k", 1, "value", 5, &updated), LTKV_OK);
    EXPECT_EQ(updated, 0);
    ASSERT_EQ(ltkv_put(s, "k", 1, "v2", 2, &updated), LTKV_OK);
    EXPECT_EQ(updated, 1);
    char* v = nullptr;
    size_t n = 0;
    ASSERT_EQ(ltkv_get(s, "k", 1, &v, &n), LTKV_OK);
    EXPECT_EQ(std::string(v, n), "v2");
    ltkv_free(v);
    EXPECT_EQ(ltkv_get(s, "x", 1, &v, &n), LTKV_NOT_FOUND);
    EXPECT_EQ(ltkv_delete(s, "k", 1), LTKV_OK);
    EXPECT_EQ(ltkv_delete(s, "k", 1), LTKV_NOT_FOUND);
    EXPECT_EQ(ltkv_close(s), LTKV_OK);
}

TEST(CApi, ErrorsCarryMessages) {
    testutil::TempDir d;
    auto cfg = config();
    cfg.branching_factor = 100;
    ltkv_store* s = nullptr;
    EXPECT_EQ(ltkv_create(d.sub("s").c_str(), &cfg, &s), LTKV_INVALID_CONFIG);
    EXPECT_EQ(s, nullptr);
    EXPECT_STRNE(ltkv_last_error(), "");
    EXPECT_EQ(ltkv_open(d.sub("none").c_str(), nullptr, &s), LTKV_NOT_FOUND);
    EXPECT_STREQ(ltkv_status_string(LTKV_LOCKED), "locked");
    EXPECT_EQ(ltkv_put(nullptr, "k", 1, "v", 1, nullptr), LTKV_INVALID_ARGUMENT);
}

TEST(CApi, BatchAndScan) {
    testutil::TempDir d;
    const auto cfg = config();
    ltkv_store* s = nullptr;
    ASSERT_EQ(ltkv_create(d.sub("s").c_str(), &cfg, &s), LTKV_OK);
    ltkv_batch* b = ltkv_batch_new();
    ltkv_batch_put(b, "a", 1, "1", 1);
    ltkv_batch_put(b, "b", 1, "2", 1);
    ltkv_batch_delete(b, "c", 1);
    EXPECT_EQ(ltkv_batch_size(b), 3u);
    uint8_t existed[3] = {9, 9, 9};
    ASSERT_EQ(ltkv_write(s, b, existed), LTKV_OK);
    EXPECT_EQ(existed[0] + existed[1] + existed[2], 0);
    ltkv_batch_free(b);

    std::map<std::string, std::string> seen;
    auto fn = [](void* ctx, const char* k, size_t kl, const char* v, size_t vl) {
        static_cast<std::map<std::string, std::string>*>(ctx)->emplace(std::string(k, kl), std::string(v, vl));
        return 0;
    };
    ASSERT_EQ(ltkv_scan(s, fn, &seen), LTKV_OK);
    EXPECT_EQ(seen, (std::map<std::string, std::string>{{"a", "1"}, {"b", "2"}}));

    ltkv_stats st;
    ASSERT_EQ(ltkv_stats_get(s, &st), LTKV_OK);
    EXPECT_EQ(st.records, 2u);
    EXPECT_EQ(st.conserved, 1);
    EXPECT_EQ(st.violations, 0u);
    ltkv_counters c;
    ASSERT_EQ(ltkv_counters_get(s, &c), LTKV_OK);
    EXPECT_EQ(c.batch_writes, 1u);
    EXPECT_GT(c.wal_bytes, 0u);
    ltkv_close(s);
}

TEST(CApi, CrashThenOpenReplays) {
    testutil::TempDir d;
    auto cfg = config();
    cfg.checkpoint_wal_bytes = LTKV_UNLIMITED;
    ltkv_store* s = nullptr;
    ASSERT_EQ(ltkv_create(d.sub("s").c_str(), &cfg, &s), LTKV_OK);
    for (int i = 0; i < 100; ++i) {
        const auto k = std::to_string(i);
        ltkv_put(s, k.data(), k.size(), "v", 1, nullptr);
    }
    ASSERT_EQ(ltkv_debug_crash(s), LTKV_OK);
    ASSERT_EQ(ltkv_open(d.sub("s").c_str(), nullptr, &s), LTKV_OK);
    ltkv_counters c;
    ltkv_counters_get(s, &c);
    EXPECT_EQ(c.recovered_records, 100u);
    ltkv_stats st;
    ltkv_stats_get(s, &st);
    EXPECT_EQ(st.records, 100u);
    ltkv_close(s);
}
