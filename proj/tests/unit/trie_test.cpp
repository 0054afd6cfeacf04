#include "ltkv/store.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace ltkv;
using testutil::bytes;

namespace {

StoreConfig raw_config(unsigned b, unsigned s) {
    StoreConfig c;
    c.branching_factor = b;
    c.sluggishness = s;
    c.region_size_bits = 20;
    c.hash = HashKind::raw_prefix;
    c.durability = Durability::process;
    return c;
}

StoreConfig hashed_config(unsigned b, unsigned s) {
    StoreConfig c = raw_config(b, s);
    c.hash = HashKind::keyed_blake2b;
    return c;
}

std::uint64_t nodes(Store& st) { return st.stats().tree.nodes; }

} // namespace

TEST(Trie, LookupOnEmptyStore) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 16));
    EXPECT_FALSE(st->get("anything"));
    EXPECT_EQ(nodes(*st), 1u);
}

TEST(Trie, ReadYourWrite) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), hashed_config(256, 4));
    EXPECT_FALSE(st->put("k", "v"));
    EXPECT_EQ(st->get("k").value(), "v");
}

TEST(Trie, SharedPrefixStaysInOneChain) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 2));
    st->put(bytes(0x42, 0xa1, 0x02, 1), "one");
    st->put(bytes(0x42, 0xa1, 0x02, 2), "two");
    const auto s = st->stats().tree;
    EXPECT_EQ(s.nodes, 1u);
    EXPECT_EQ(s.chains, 1u);
    EXPECT_EQ(s.max_chain_distinct, 2u);
    EXPECT_EQ(st->get(bytes(0x42, 0xa1, 0x02, 2)).value(), "two");
}

TEST(Trie, MinimalSplitCreatesOneNode) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 1));
    st->put(bytes(0x10, 0x01), "a");
    st->put(bytes(0x10, 0x02), "b");
    EXPECT_EQ(nodes(*st), 2u);
    EXPECT_EQ(st->engine().counters().splits, 1u);
}

TEST(Trie, SplitBuildsChainAndMergeCollapsesIt) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 1));
    const auto a_key = bytes(0x42, 0x8f, 0xc7, 0x0d);
    const auto b_key = bytes(0x42, 0x8f, 0xc7, 0xf1);
    st->put(a_key, "a");
    EXPECT_EQ(nodes(*st), 1u);
    // shared characters 0x8f 0xc7 below the root slot: three new nodes
    st->put(b_key, "b");
    auto s = st->stats().tree;
    EXPECT_EQ(s.nodes, 4u);
    EXPECT_EQ(s.chains, 2u);
    EXPECT_EQ(s.max_path_length, 4u);
    EXPECT_EQ(s.violations, 0u) << s.first_violation;

    // deleting the second key leaves the deepest node one child: the chain collapses
    EXPECT_TRUE(st->remove(b_key));
    s = st->stats().tree;
    EXPECT_EQ(s.nodes, 1u);
    EXPECT_EQ(s.max_path_length, 1u);
    EXPECT_EQ(st->get(a_key).value(), "a");
    EXPECT_EQ(st->stats().free_nodes, 3u);
    EXPECT_TRUE(st->stats().conserved());
}

TEST(Trie, SplitNodeCountMatchesPrefixOracle) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 1));
    std::mt19937_64 rng(17);
    for (unsigned first = 0; first < 256; ++first) {
        const unsigned common = rng() % 6;
        std::string x(1, static_cast<char>(first)), y;
        for (unsigned i = 0; i < common; ++i)
            x.push_back(static_cast<char>(rng()));
        y = x;
        const auto cx = static_cast<unsigned char>(rng());
        auto cy = static_cast<unsigned char>(rng());
        if (cy == cx)
            cy ^= 1;
        x.push_back(static_cast<char>(cx));
        y.push_back(static_cast<char>(cy));
        st->put(x, "x");
        const auto before = nodes(*st);
        st->put(y, "y");
        ASSERT_EQ(nodes(*st) - before, common + 1) << "slot " << first;
    }
    EXPECT_EQ(st->stats().tree.violations, 0u);
}

TEST(Trie, OverflowRegroupsBySharedCharacter) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 3));
    const auto d3 = bytes(0x77, 0x10, 3), d4 = bytes(0x77, 0x20, 4), d5 = bytes(0x77, 0x20, 5),
               d6 = bytes(0x77, 0x10, 6);
    st->put(d3, "3");
    st->put(d4, "4");
    st->put(d5, "5");
    auto s = st->stats().tree;
    EXPECT_EQ(s.nodes, 1u);
    EXPECT_EQ(s.max_chain_distinct, 3u);
    st->put(d6, "6"); // a fourth distinct hash overflows s = 3
    s = st->stats().tree;
    EXPECT_EQ(s.nodes, 2u);
    EXPECT_EQ(s.chains, 2u); // {d3, d6} and {d4, d5}
    EXPECT_EQ(s.max_chain_distinct, 2u);
    for (const auto& k : {d3, d4, d5, d6})
        EXPECT_TRUE(st->get(k));
}

TEST(Trie, RedistributionRecursesUntilBounded) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 3));
    // four digests agreeing on two characters: the first regrouping is not enough
    for (int i = 0; i < 4; ++i)
        st->put(bytes(0x55, 0x66, 0x70 + i), "v");
    const auto s = st->stats().tree;
    EXPECT_EQ(s.nodes, 3u);
    EXPECT_EQ(s.chains, 4u);
    EXPECT_LE(s.max_chain_distinct, 3u);
}

TEST(Trie, SingletonRedistribution) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 3));
    for (int i = 0; i < 4; ++i)
        st->put(bytes(0x01, 0x10 * (i + 1)), "v");
    const auto s = st->stats().tree;
    EXPECT_EQ(s.nodes, 2u);
    EXPECT_EQ(s.chains, 4u);
    EXPECT_EQ(s.max_chain_distinct, 1u);
}

TEST(Trie, EqualDigestsMayExceedSluggishness) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(64, 1));
    const std::string prefix(32, 'p'); // identical digests, distinct keys
    for (int i = 0; i < 3; ++i)
        st->put(prefix + char('a' + i), std::to_string(i));
    for (int i = 0; i < 3; ++i)
        EXPECT_EQ(st->get(prefix + char('a' + i)).value(), std::to_string(i));
    const auto s = st->stats().tree;
    EXPECT_EQ(s.max_chain_distinct, 1u);
    EXPECT_EQ(s.records, 3u);
    EXPECT_EQ(s.violations, 0u) << s.first_violation;
    EXPECT_TRUE(st->remove(prefix + 'b'));
    EXPECT_FALSE(st->get(prefix + 'b'));
    EXPECT_EQ(st->get(prefix + 'c').value(), "2");
}

TEST(Trie, SluggishnessBoundUnderRandomInserts) {
    for (unsigned s : {1u, 4u, 16u}) {
        testutil::TempDir d;
        auto st = Store::create(d.sub("s"), hashed_config(64, s));
        std::vector<BatchOp> ops;
        for (int i = 0; i < 10000; ++i) {
            ops.push_back({BatchOp::put, "key-" + std::to_string(i), "v"});
            if (ops.size() == 100) {
                st->write(ops);
                ops.clear();
            }
        }
        const auto t = st->stats().tree;
        EXPECT_EQ(t.records, 10000u);
        EXPECT_LE(t.max_chain_distinct, s);
        EXPECT_EQ(t.violations, 0u) << t.first_violation;
    }
}

TEST(Trie, InPlaceUpdateKeepsRecord) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), hashed_config(256, 16));
    st->put("k", std::string(100, 'a'));
    const auto allocs = st->engine().data_alloc().allocations();
    EXPECT_TRUE(st->put("k", std::string(100, 'b')));
    EXPECT_TRUE(st->put("k", std::string(40, 'c'))); // shrink: still in place
    EXPECT_EQ(st->engine().data_alloc().allocations(), allocs);
    EXPECT_EQ(st->get("k").value(), std::string(40, 'c'));
    EXPECT_TRUE(st->put("k", std::string(500, 'd'))); // outgrows the footprint
    EXPECT_EQ(st->engine().data_alloc().allocations(), allocs + 1);
    EXPECT_EQ(st->get("k").value(), std::string(500, 'd'));
    EXPECT_TRUE(st->stats().conserved());
}

TEST(Trie, RelocatedUpdateKeepsChainOrder) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 8));
    for (int i = 0; i < 5; ++i)
        st->put(bytes(0x33, i), "small");
    st->put(bytes(0x33, 2), std::string(300, 'L'));
    for (int i = 0; i < 5; ++i)
        EXPECT_EQ(st->get(bytes(0x33, i)).value(), i == 2 ? std::string(300, 'L') : "small");
    EXPECT_EQ(st->stats().tree.records, 5u);
    EXPECT_TRUE(st->stats().conserved());
}

TEST(Trie, DeleteOnlyKeyLeavesEmptyRoot) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), hashed_config(256, 16));
    st->put("only", "x");
    EXPECT_TRUE(st->remove("only"));
    EXPECT_FALSE(st->remove("only"));
    const auto s = st->stats();
    EXPECT_EQ(s.tree.nodes, 1u);
    EXPECT_EQ(s.tree.used_slots, 0u);
    EXPECT_EQ(s.tree.records, 0u);
    EXPECT_EQ(s.avg_path_length(), 0.0);
    EXPECT_TRUE(s.conserved());
}

TEST(Trie, MergeDoesNotTouchForkingAncestors) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), raw_config(256, 1));
    st->put(bytes(0x01, 0x02, 0x03), "a");
    st->put(bytes(0x01, 0x02, 0x04), "b");
    st->put(bytes(0x01, 0x05), "c"); // the depth-1 node now forks
    EXPECT_EQ(nodes(*st), 3u);
    st->remove(bytes(0x01, 0x02, 0x04));
    // depth-2 node collapses into depth-1, which still has two children
    EXPECT_EQ(nodes(*st), 2u);
    EXPECT_EQ(st->get(bytes(0x01, 0x02, 0x03)).value(), "a");
    EXPECT_EQ(st->get(bytes(0x01, 0x05)).value(), "c");
    EXPECT_EQ(st->stats().tree.violations, 0u);
}

TEST(Trie, RandomChurnMatchesModel) {
    testutil::TempDir d;
    auto st = Store::create(d.sub("s"), hashed_config(64, 4));
    std::mt19937_64 rng(23);
    std::map<std::string, std::string> model;
    std::vector<BatchOp> pre;
    for (int i = 0; i < 10000; ++i) {
        const auto k = "k" + std::to_string(i);
        model[k] = "v" + std::to_string(i);
        pre.push_back({BatchOp::put, k, model[k]});
    }
    st->write(pre);
    std::vector<std::uint64_t> samples;
    for (int i = 0; i < 100000; ++i) {
        const auto k = "k" + std::to_string(rng() % 20000);
        if (rng() % 2) {
            const auto v = "w" + std::to_string(i);
            ASSERT_EQ(st->put(k, v), model.count(k) == 1);
            model[k] = v;
        } else {
            ASSERT_EQ(st->remove(k), model.erase(k) == 1);
        }
        if (i % 2500 == 2499)
            samples.push_back(st->engine().trie_alloc().in_use());
    }
    std::map<std::string, std::string> got;
    st->scan([&](std::string_view k, std::string_view v) { got.emplace(k, v); });
    EXPECT_EQ(got, model);
    bool ever_fell = false;
    for (std::size_t i = 1; i < samples.size(); ++i)
        ever_fell = ever_fell || samples[i] < samples[i - 1];
    EXPECT_TRUE(ever_fell) << "node count grew monotonically";
    const auto s = st->stats();
    EXPECT_EQ(s.tree.violations, 0u) << s.tree.first_violation;
    EXPECT_TRUE(s.conserved());
}
