#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>

namespace ltkv {

// Reader-writer lock with one upgradable-read holder, sized to live inside the
// 8-byte lock slot of a mapped tree node. Modes: many readers, or readers plus
// one upgradable holder, or exactly one writer.
class UpgradableLock {
public:
    UpgradableLock() = default;
    UpgradableLock(const UpgradableLock&) = delete;
    UpgradableLock& operator=(const UpgradableLock&) = delete;

    void lock_shared();
    bool try_lock_shared();
    void unlock_shared();

    void lock_upgradable();
    void unlock_upgradable();
    // upgradable -> write; waits for readers to drain.
    void upgrade();
    // upgradable -> shared, without ever releasing the node.
    void downgrade_to_shared();

    void lock();
    bool try_lock();
    void unlock();
    // write -> shared.
    void downgrade_write_to_shared();

    std::uint32_t raw_state() const { return state_.load(std::memory_order_relaxed); }

    // Volatile (never persisted) counter bumped each time the node is freed;
    // used to detect a node recycled between an unlocked read and a later lock.
    std::uint32_t generation() const { return generation_.load(std::memory_order_acquire); }
    void bump_generation() { generation_.fetch_add(1, std::memory_order_acq_rel); }

    static constexpr std::uint32_t kWriter = 1u << 31;
    static constexpr std::uint32_t kUpgradable = 1u << 30;
    static constexpr std::uint32_t kReaderMask = kUpgradable - 1;

private:
    void wait_for_change(std::uint32_t seen, unsigned& spins);

    std::atomic<std::uint32_t> state_{0};
    std::atomic<std::uint32_t> generation_{0};
};

static_assert(sizeof(UpgradableLock) == 8, "lock must fit the node lock slot");

// Lazily-initialized lock slots for the tree nodes of one mapped region. The
// lock objects themselves live in the nodes' lock slots; this table only owns
// the two bitmaps: `init` claims a slot for initialization, `init_fin`
// publishes it.
class NodeLockTable {
public:
    explicit NodeLockTable(std::size_t slot_count);
    NodeLockTable(const NodeLockTable&) = delete;
    NodeLockTable& operator=(const NodeLockTable&) = delete;

    // Returns the lock stored at `slot_memory`, constructing it on first use.
    UpgradableLock& get(std::size_t slot, void* slot_memory);

    bool initialized(std::size_t slot) const;
    std::size_t slot_count() const { return slots_; }
    std::size_t bitmap_bytes() const { return 2 * words_ * sizeof(std::uint64_t); }

    // Process-wide count of lock initializations, for tests.
    static std::uint64_t total_initializations();

private:
    std::size_t slots_;
    std::size_t words_;
    std::unique_ptr<std::atomic<std::uint64_t>[]> init_;
    std::unique_ptr<std::atomic<std::uint64_t>[]> init_fin_;
};

} // namespace ltkv
