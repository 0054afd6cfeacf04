#include "ltkv/store.hpp"

#include "ltkv/error.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

using namespace ltkv;

namespace {

StoreConfig config() {
    StoreConfig c;
    c.branching_factor = 128;
    c.sluggishness = 4;
    c.region_size_bits = 20;
    c.durability = Durability::process;
    return c;
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ok;
}

} // namespace

TEST(Store, RejectsBadConfig) {
    testutil::TempDir d;
    for (auto mut : std::vector<void (*)(StoreConfig&)>{
             [](StoreConfig& c) { c.branching_factor = 100; },
             [](StoreConfig& c) { c.branching_factor = 512; },
             [](StoreConfig& c) { c.sluggishness = 0; },
             [](StoreConfig& c) { c.region_size_bits = 11; },
             [](StoreConfig& c) { c.scan_limit = 0; },
         }) {
        auto c = config();
        mut(c);
        EXPECT_EQ(code_of([&] { Store::create(d.sub("bad"), c); }), ErrorCode::invalid_config);
    }
    EXPECT_FALSE(std::filesystem::exists(d.sub("bad") + "/trie-0.seg"));
}

TEST(Store, CreateTwiceFails) {
    testutil::TempDir d;
    Store::create(d.sub("s"), config())->close();
    EXPECT_EQ(code_of([&] { Store::create(d.sub("s"), config()); }), ErrorCode::already_exists);
}

TEST(Store, OpenMissingFails) {
    testutil::TempDir d;
    EXPECT_EQ(code_of([&] { Store::open(d.sub("nothing")); }), ErrorCode::not_found);
}

TEST(Store, SecondOpenIsLocked) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), config());
    EXPECT_EQ(code_of([&] { Store::open(d.sub("s")); }), ErrorCode::locked);
    st->close();
    EXPECT_NO_THROW(Store::open(d.sub("s")));
}

TEST(Store, ReopenKeepsPersistedParameters) {
    testutil::TempDir d;
    {
        auto c = config();
        c.branching_factor = 64;
        c.sluggishness = 7;
        auto st = Store::create(d.sub("s"), c);
        st->put("k", "v");
    }
    auto st = Store::open(d.sub("s"));
    EXPECT_EQ(st->config().branching_factor, 64u);
    EXPECT_EQ(st->config().sluggishness, 7u);
    EXPECT_EQ(st->config().region_size_bits, 20u);
    EXPECT_EQ(st->get("k").value(), "v");
}

TEST(Store, DamagedHeaderIsCorruption) {
    testutil::TempDir d;
    Store::create(d.sub("s"), config())->close();
    {
        FILE* f = std::fopen((d.sub("s") + "/trie-0.seg").c_str(), "r+b");
        ASSERT_TRUE(f);
        std::fseek(f, 13, SEEK_SET);
        std::fputc(0x5a, f);
        std::fclose(f);
    }
    EXPECT_EQ(code_of([&] { Store::open(d.sub("s")); }), ErrorCode::corruption);
}

TEST(Store, CrashedStoreRecovers) {
    testutil::TempDir d;
    {
        auto c = config();
        c.checkpoint_wal_bytes = kUnlimited;
        auto st = Store::create(d.sub("s"), c);
        for (int i = 0; i < 2000; ++i)
            st->put("k" + std::to_string(i), std::to_string(i));
        st->remove("k7");
        st->simulate_crash();
    }
    auto st = Store::open(d.sub("s"));
    EXPECT_GT(st->recovery().records, 0u);
    EXPECT_FALSE(st->get("k7"));
    EXPECT_EQ(st->get("k1999").value(), "1999");
    const auto s = st->stats();
    EXPECT_EQ(s.tree.records, 1999u);
    EXPECT_TRUE(s.conserved());
}

TEST(Store, PutThenDeleteInOneBatch) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), config());
    const auto r = st->write({{BatchOp::put, "a", "1"}, {BatchOp::del, "a", ""}});
    EXPECT_EQ(r, (std::vector<bool>{false, true}));
    EXPECT_FALSE(st->get("a"));
}

TEST(Store, RejectsEmptyKeyAndOversizedValue) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), config());
    EXPECT_EQ(code_of([&] { st->put("", "v"); }), ErrorCode::invalid_argument);
    const auto max = st->engine().max_value_size(1);
    EXPECT_EQ(code_of([&] { st->put("k", std::string(max + 1, 'x')); }), ErrorCode::invalid_argument);
    EXPECT_NO_THROW(st->put("k", std::string(max, 'x')));
    EXPECT_EQ(st->get("k")->size(), max);
}

TEST(Store, UseAfterCloseIsRejected) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), config());
    st->close();
    EXPECT_EQ(code_of([&] { st->get("k"); }), ErrorCode::rejected);
}

TEST(Store, ReopenAfterManyOpsMatchesModel) {
    testutil::TempDir d;
    std::map<std::string, std::string> model;
    std::mt19937_64 rng(5);
    {
        auto c = config();
        c.region_size_bits = 16;
        c.memory_budget = 16; // well under the ~5 MiB working set
        c.checkpoint_wal_bytes = 1 << 20;
        auto st = Store::create(d.sub("s"), c);
        for (int i = 0; i < 30000; ++i) {
            const auto k = "key" + std::to_string(rng() % 8000);
            if (rng() % 4) {
                const auto v = std::string(1 + rng() % 300, char('a' + i % 26));
                st->put(k, v);
                model[k] = v;
            } else {
                st->remove(k);
                model.erase(k);
            }
        }
        EXPECT_GT(st->spaces().evictions(), 0u);
    }
    auto st = Store::open(d.sub("s"));
    std::map<std::string, std::string> got;
    st->scan([&](std::string_view k, std::string_view v) { got.emplace(k, v); });
    EXPECT_EQ(got, model);
    EXPECT_TRUE(st->stats().conserved());
}
