#include "ltkv/node_lock.hpp"

#include <new>
#include <thread>

namespace ltkv {

namespace {

std::atomic<std::uint64_t> g_lock_inits{0};

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#endif
}

} // namespace

void UpgradableLock::wait_for_change(std::uint32_t seen, unsigned& spins) {
    if (spins < 32) {
        ++spins;
        cpu_relax();
        return;
    }
    if (spins < 40) {
        ++spins;
        std::this_thread::yield();
        return;
    }
    state_.wait(seen, std::memory_order_relaxed);
}

void UpgradableLock::lock_shared() {
    unsigned spins = 0;
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    for (;;) {
        if (!(s & kWriter)) {
            if (state_.compare_exchange_weak(s, s + 1, std::memory_order_acquire, std::memory_order_relaxed))
                return;
            continue;
        }
        wait_for_change(s, spins);
        s = state_.load(std::memory_order_relaxed);
    }
}

bool UpgradableLock::try_lock_shared() {
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    while (!(s & kWriter)) {
        if (state_.compare_exchange_weak(s, s + 1, std::memory_order_acquire, std::memory_order_relaxed))
            return true;
    }
    return false;
}

void UpgradableLock::unlock_shared() {
    state_.fetch_sub(1, std::memory_order_release);
    state_.notify_all();
}

void UpgradableLock::lock_upgradable() {
    unsigned spins = 0;
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    for (;;) {
        if (!(s & (kWriter | kUpgradable))) {
            if (state_.compare_exchange_weak(s, s | kUpgradable, std::memory_order_acquire,
                                             std::memory_order_relaxed))
                return;
            continue;
        }
        wait_for_change(s, spins);
        s = state_.load(std::memory_order_relaxed);
    }
}

void UpgradableLock::unlock_upgradable() {
    state_.fetch_and(~kUpgradable, std::memory_order_release);
    state_.notify_all();
}

void UpgradableLock::upgrade() {
    unsigned spins = 0;
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    for (;;) {
        if ((s & kReaderMask) == 0) {
            if (state_.compare_exchange_weak(s, (s & ~kUpgradable) | kWriter, std::memory_order_acquire,
                                             std::memory_order_relaxed))
                return;
            continue;
        }
        wait_for_change(s, spins);
        s = state_.load(std::memory_order_relaxed);
    }
}

void UpgradableLock::downgrade_to_shared() {
    // Add ourselves as a reader and drop the upgradable bit in one step.
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    while (!state_.compare_exchange_weak(s, (s & ~kUpgradable) + 1, std::memory_order_acq_rel,
                                         std::memory_order_relaxed)) {
    }
    state_.notify_all();
}

void UpgradableLock::lock() {
    unsigned spins = 0;
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    for (;;) {
        if (s == 0) {
            if (state_.compare_exchange_weak(s, kWriter, std::memory_order_acquire, std::memory_order_relaxed))
                return;
            continue;
        }
        wait_for_change(s, spins);
        s = state_.load(std::memory_order_relaxed);
    }
}

bool UpgradableLock::try_lock() {
    std::uint32_t expected = 0;
    return state_.compare_exchange_strong(expected, kWriter, std::memory_order_acquire, std::memory_order_relaxed);
}

void UpgradableLock::unlock() {
    state_.fetch_and(~kWriter, std::memory_order_release);
    state_.notify_all();
}

void UpgradableLock::downgrade_write_to_shared() {
    std::uint32_t s = state_.load(std::memory_order_relaxed);
    while (!state_.compare_exchange_weak(s, (s & ~kWriter) + 1, std::memory_order_acq_rel,
                                         std::memory_order_relaxed)) {
    }
    state_.notify_all();
}

NodeLockTable::NodeLockTable(std::size_t slot_count)
    : slots_(slot_count),
      words_((slot_count + 63) / 64),
      init_(new std::atomic<std::uint64_t>[words_]),
      init_fin_(new std::atomic<std::uint64_t>[words_]) {
    for (std::size_t i = 0; i < words_; ++i) {
        init_[i].store(0, std::memory_order_relaxed);
        init_fin_[i].store(0, std::memory_order_relaxed);
    }
}

UpgradableLock& NodeLockTable::get(std::size_t slot, void* slot_memory) {
    const std::size_t word = slot / 64;
    const std::uint64_t bit = std::uint64_t{1} << (slot % 64);
    auto* lock = static_cast<UpgradableLock*>(slot_memory);
    if (init_fin_[word].load(std::memory_order_acquire) & bit)
        return *std::launder(lock);
    if (!(init_[word].fetch_or(bit, std::memory_order_acq_rel) & bit)) {
        // Whatever bytes the slot held on disk are meaningless; start fresh.
        lock = new (slot_memory) UpgradableLock();
        g_lock_inits.fetch_add(1, std::memory_order_relaxed);
        init_fin_[word].fetch_or(bit, std::memory_order_release);
        return *lock;
    }
    unsigned spins = 0;
    while (!(init_fin_[word].load(std::memory_order_acquire) & bit)) {
        if (++spins < 64)
            cpu_relax();
        else
            std::this_thread::yield();
    }
    return *std::launder(lock);
}

bool NodeLockTable::initialized(std::size_t slot) const {
    return init_fin_[slot / 64].load(std::memory_order_acquire) & (std::uint64_t{1} << (slot % 64));
}

std::uint64_t NodeLockTable::total_initializations() { return g_lock_inits.load(std::memory_order_relaxed); }

} // namespace ltkv
