#include "ltkv/alloc.hpp"
#include "ltkv/error.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace ltkv;

namespace {

struct Fixture {
    testutil::TempDir dir;
    SegmentSet files{dir.path()};
    SpaceManager sm;
    NodeLayout layout = NodeLayout::for_branching(64);
    TrieAllocator trie{sm, layout};
    DataAllocator data;

    explicit Fixture(std::uint64_t scan_limit = 100, unsigned region_bits = 16)
        : sm(files, options(region_bits), {header::kSize, 0, 0, 0}), data(sm, 0, scan_limit) {}

    static SpaceManager::Options options(unsigned bits) {
        SpaceManager::Options o;
        o.region_bits = bits;
        return o;
    }
};

} // namespace

TEST(TrieAlloc, FirstNodeFollowsHeaderPage) {
    Fixture f;
    WriteSet ws;
    EXPECT_EQ(f.trie.alloc(ws, kNullAddress), header::kSize);
    EXPECT_EQ(f.trie.alloc(ws, kNullAddress), header::kSize + f.layout.size);
}

TEST(TrieAlloc, FreeThenAllocIsLifo) {
    Fixture f;
    WriteSet ws;
    const auto a = f.trie.alloc(ws, kNullAddress);
    const auto b = f.trie.alloc(ws, a);
    const auto c = f.trie.alloc(ws, a);
    f.trie.free(ws, b);
    f.trie.free(ws, c);
    EXPECT_EQ(f.trie.free_depth(), 2u);
    EXPECT_EQ(f.trie.alloc(ws, a), c);
    EXPECT_EQ(f.trie.alloc(ws, a), b);
    EXPECT_EQ(f.trie.recycled(), 2u);
}

TEST(TrieAlloc, RecycledNodeIsCleared) {
    Fixture f;
    WriteSet ws;
    const auto a = f.trie.alloc(ws, kNullAddress);
    const std::uint64_t ones = ~std::uint64_t{0};
    f.sm.write_u64(ws, SpaceId::trie, a + NodeLayout::kChdOff, ones);
    f.trie.free(ws, a);
    EXPECT_EQ(f.trie.alloc(ws, 1234), a);
    EXPECT_EQ(f.sm.read_u64(SpaceId::trie, a + NodeLayout::kChdOff), 0u);
    EXPECT_EQ(f.sm.read_u64(SpaceId::trie, a + NodeLayout::kParentOff), 1234u);
}

TEST(TrieAlloc, ShadowSetOracle) {
    Fixture f;
    std::mt19937_64 rng(8);
    std::set<std::uint64_t> live;
    const std::uint64_t r = f.sm.region_size();
    for (int i = 0; i < 10000; ++i) {
        WriteSet ws;
        if (live.empty() || rng() % 3 != 0) {
            const auto a = f.trie.alloc(ws, kNullAddress);
            ASSERT_TRUE(live.insert(a).second) << "address handed out twice";
            ASSERT_EQ(a / r, (a + f.layout.size - 1) / r) << "node straddles a region";
            const std::uint64_t first = (a / r == 0) ? header::kSize : 0;
            ASSERT_EQ((a % r - first) % f.layout.size, 0u);
        } else {
            auto it = live.begin();
            std::advance(it, rng() % live.size());
            f.trie.free(ws, *it);
            live.erase(it);
        }
        ASSERT_EQ(f.trie.in_use(), live.size());
    }
}

TEST(DataAlloc, EmptyFreeListExtendsTail) {
    Fixture f;
    WriteSet ws;
    const auto a = f.data.alloc(ws, 100);
    EXPECT_EQ(a, 0u);
    EXPECT_EQ(f.data.envelope_size(a), envelope::round_up(100 + envelope::kOverhead));
    EXPECT_EQ(f.sm.tail(SpaceId::data), f.data.envelope_size(a));
    EXPECT_EQ(f.data.descriptor_count(), 0u);
}

TEST(DataAlloc, HoleSplit256For128) {
    Fixture f;
    WriteSet ws;
    const auto a = f.data.alloc(ws, 256);
    const auto guard = f.data.alloc(ws, 64);
    f.data.free(ws, a);
    ASSERT_EQ(f.data.descriptor_count(), 1u);
    const auto b = f.data.alloc(ws, 128);
    EXPECT_EQ(b, a);
    EXPECT_EQ(f.data.body_capacity(b), 128u);
    // residual hole body = 256 - 128 - overhead
    const auto hole = b + f.data.envelope_size(b);
    const std::uint64_t h = f.sm.read_u64(SpaceId::data, hole);
    EXPECT_TRUE(envelope::is_free(h));
    EXPECT_EQ(envelope::size_of(h) - envelope::kOverhead, 256u - 128u - envelope::kOverhead);
    EXPECT_EQ(envelope::desc_of(h), 0u);
    EXPECT_EQ(hole + envelope::size_of(h), guard);
    const auto rep = f.data.walk();
    EXPECT_TRUE(rep.ok) << rep.problem;
    EXPECT_EQ(rep.holes, 1u);
}

TEST(DataAlloc, TinyRemainderNotSplit) {
    Fixture f;
    WriteSet ws;
    const auto a = f.data.alloc(ws, 128);
    f.data.alloc(ws, 64);
    f.data.free(ws, a);
    const auto b = f.data.alloc(ws, 112); // remainder of 16 bytes is below the split minimum
    EXPECT_EQ(b, a);
    EXPECT_EQ(f.data.body_capacity(b), 128u);
    EXPECT_EQ(f.data.descriptor_count(), 0u);
}

TEST(DataAlloc, FreeBetweenHolesCoalesces) {
    Fixture f;
    WriteSet ws;
    const auto a = f.data.alloc(ws, 100);
    const auto b = f.data.alloc(ws, 100);
    const auto c = f.data.alloc(ws, 100);
    f.data.alloc(ws, 100);
    f.data.free(ws, a);
    f.data.free(ws, c);
    EXPECT_EQ(f.data.descriptor_count(), 2u);
    f.data.free(ws, b);
    EXPECT_EQ(f.data.descriptor_count(), 1u);
    const std::uint64_t h = f.sm.read_u64(SpaceId::data, a);
    EXPECT_TRUE(envelope::is_free(h));
    EXPECT_EQ(envelope::size_of(h), 3 * f.data.envelope_size(b));
    const auto rep = f.data.walk();
    EXPECT_TRUE(rep.ok) << rep.problem;
    EXPECT_EQ(rep.adjacent_holes, 0u);
    EXPECT_EQ(rep.holes, 1u);
}

TEST(DataAlloc, FreeWithLiveNeighboursAddsOneDescriptor) {
    Fixture f;
    WriteSet ws;
    f.data.alloc(ws, 50);
    const auto b = f.data.alloc(ws, 50);
    f.data.alloc(ws, 50);
    f.data.free(ws, b);
    EXPECT_EQ(f.data.descriptor_count(), 1u);
}

TEST(DataAlloc, DoubleFreeIsCorruption) {
    Fixture f;
    WriteSet ws;
    const auto a = f.data.alloc(ws, 50);
    f.data.alloc(ws, 50);
    f.data.free(ws, a);
    try {
        f.data.free(ws, a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::corruption);
    }
}

TEST(DataAlloc, EnvelopesNeverCrossRegions) {
    Fixture f(100, 16);
    WriteSet ws;
    const std::uint64_t r = f.sm.region_size();
    for (int i = 0; i < 200; ++i) {
        const auto a = f.data.alloc(ws, 1000);
        ASSERT_EQ(a / r, (a + f.data.envelope_size(a) - 1) / r);
        ws.clear();
    }
    EXPECT_TRUE(f.data.walk().ok);
    EXPECT_THROW(f.data.alloc(ws, r), Error);
    EXPECT_NO_THROW(f.data.alloc(ws, DataAllocator::max_body(r)));
}

TEST(DataAlloc, RandomStressWalkOracle) {
    // 10^5 alloc/free ops over 128/256/1024-byte bodies; a shadow map of
    // live envelopes has to agree with the full-space envelope walk.
    Fixture f(100, 18);
    std::mt19937_64 rng(21);
    const std::uint64_t sizes[] = {128, 256, 1024};
    std::map<std::uint64_t, std::uint64_t> live; // addr -> envelope size
    std::vector<std::uint64_t> order;
    for (int i = 0; i < 100000; ++i) {
        WriteSet ws;
        if (order.empty() || rng() % 100 < 55) {
            const auto a = f.data.alloc(ws, sizes[rng() % 3]);
            const auto sz = f.data.envelope_size(a);
            auto next = live.lower_bound(a);
            ASSERT_TRUE(next == live.end() || a + sz <= next->first) << "overlap with successor";
            if (next != live.begin()) {
                auto prev = std::prev(next);
                ASSERT_LE(prev->first + prev->second, a) << "overlap with predecessor";
            }
            live[a] = sz;
            order.push_back(a);
        } else {
            const std::size_t j = rng() % order.size();
            const auto a = order[j];
            order[j] = order.back();
            order.pop_back();
            f.data.free(ws, a);
            live.erase(a);
        }
    }
    const auto rep = f.data.walk();
    ASSERT_TRUE(rep.ok) << rep.problem;
    EXPECT_EQ(rep.adjacent_holes, 0u);
    EXPECT_EQ(rep.in_use, live.size());
    std::uint64_t live_bytes = 0;
    for (auto& kv : live)
        live_bytes += kv.second;
    EXPECT_EQ(rep.in_use_bytes, live_bytes);
    EXPECT_EQ(rep.in_use_bytes + rep.hole_bytes, f.sm.tail(SpaceId::data));
    EXPECT_EQ(rep.descriptors, rep.holes);
    EXPECT_GT(f.data.recycled(), 0u);
}

TEST(DataAlloc, ScanLimitBoundsNextFit) {
    // Many small holes and one big one at the far end: a scan limit of one
    // step cannot reach it and extends the tail instead.
    Fixture f(1);
    WriteSet ws;
    std::vector<std::uint64_t> small;
    for (int i = 0; i < 20; ++i) {
        small.push_back(f.data.alloc(ws, 32));
        f.data.alloc(ws, 32);
    }
    const auto big = f.data.alloc(ws, 1024);
    f.data.alloc(ws, 32);
    for (auto a : small)
        f.data.free(ws, a);
    f.data.free(ws, big);
    const auto tail = f.sm.tail(SpaceId::data);
    const auto got = f.data.alloc(ws, 1000);
    EXPECT_EQ(got, tail);

    f.data.set_scan_limit(kUnlimited);
    EXPECT_EQ(f.data.alloc(ws, 1000), big);
}

TEST(DataAlloc, FailedScanAdvancesCursor) {
    // With one step per scan, repeated requests must walk past small holes
    // and eventually reach the one that fits.
    Fixture f(1);
    WriteSet ws;
    std::vector<std::uint64_t> small;
    for (int i = 0; i < 5; ++i) {
        small.push_back(f.data.alloc(ws, 32));
        f.data.alloc(ws, 32);
    }
    const auto big = f.data.alloc(ws, 1024);
    f.data.alloc(ws, 32);
    for (auto a : small)
        f.data.free(ws, a);
    f.data.free(ws, big);
    std::uint64_t got = 0;
    for (int i = 0; i < 6 && got != big; ++i) {
        EXPECT_EQ(f.data.cursor(), std::uint64_t(i) % 6);
        got = f.data.alloc(ws, 1000);
    }
    EXPECT_EQ(got, big);
}
