#include "ltkv/node_lock.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>
#include <vector>

using namespace ltkv;

TEST(NodeLock, SharedLocksCoexist) {
    UpgradableLock l;
    l.lock_shared();
    EXPECT_TRUE(l.try_lock_shared());
    EXPECT_FALSE(l.try_lock());
    l.unlock_shared();
    l.unlock_shared();
    EXPECT_TRUE(l.try_lock());
    l.unlock();
}

TEST(NodeLock, WriterBlocksReaders) {
    UpgradableLock l;
    l.lock();
    std::atomic<bool> got{false};
    std::thread t([&] {
        l.lock_shared();
        got = true;
        l.unlock_shared();
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_FALSE(got.load());
    l.unlock();
    t.join();
    EXPECT_TRUE(got.load());
}

TEST(NodeLock, UpgradableWithReadersThenUpgrade) {
    UpgradableLock l;
    l.lock_upgradable();
    EXPECT_TRUE(l.try_lock_shared()); // readers still admitted
    std::atomic<bool> upgraded{false};
    std::thread t([&] {
        l.upgrade();
        upgraded = true;
        l.unlock();
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_FALSE(upgraded.load()); // waits for the reader to drain
    l.unlock_shared();
    t.join();
    EXPECT_TRUE(upgraded.load());
    EXPECT_EQ(l.raw_state(), 0u);
}

TEST(NodeLock, SecondUpgradableWaits) {
    UpgradableLock l;
    l.lock_upgradable();
    std::atomic<bool> second{false};
    std::thread t([&] {
        l.lock_upgradable();
        second = true;
        l.unlock_upgradable();
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_FALSE(second.load());
    l.downgrade_to_shared();
    t.join();
    EXPECT_TRUE(second.load());
    l.unlock_shared();
    EXPECT_EQ(l.raw_state(), 0u);
}

TEST(NodeLock, DowngradeWriteToShared) {
    UpgradableLock l;
    l.lock();
    l.downgrade_write_to_shared();
    EXPECT_TRUE(l.try_lock_shared());
    EXPECT_FALSE(l.try_lock());
    l.unlock_shared();
    l.unlock_shared();
    EXPECT_EQ(l.raw_state(), 0u);
}

TEST(NodeLock, FirstAcquisitionRaceInitializesOnce) {
    // 16 threads race on one node; exactly one initializes its lock.
    alignas(8) unsigned char slot[8];
    std::memset(slot, 0xAB, sizeof slot); // stale on-disk bytes
    NodeLockTable table(1);
    const auto before = NodeLockTable::total_initializations();
    std::atomic<int> acquired{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> ts;
    for (int i = 0; i < 16; ++i)
        ts.emplace_back([&] {
            while (!go)
                std::this_thread::yield();
            UpgradableLock& l = table.get(0, slot);
            l.lock();
            ++acquired;
            l.unlock();
        });
    go = true;
    for (auto& t : ts)
        t.join();
    EXPECT_EQ(acquired.load(), 16);
    EXPECT_EQ(NodeLockTable::total_initializations() - before, 1u);
    EXPECT_TRUE(table.initialized(0));
}

TEST(NodeLock, BitmapFootprintPerRegion) {
    // 16 MiB region of 256-child nodes (2128 bytes each).
    NodeLockTable table((16u << 20) / 2128);
    EXPECT_LT(table.bitmap_bytes(), 2048u);
}
