#pragma once

#include "ltkv/alloc.hpp"
#include "ltkv/disk.hpp"
#include "ltkv/keyhash.hpp"
#include "ltkv/layout.hpp"
#include "ltkv/node_lock.hpp"
#include "ltkv/spaces.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltkv {

struct BatchOp {
    enum Kind { put, del };
    Kind kind = put;
    std::string key;
    std::string value;
};

struct TreeStats {
    std::uint64_t nodes = 0;
    std::uint64_t used_slots = 0; // valid children summed over nodes
    std::uint64_t chains = 0;
    std::uint64_t records = 0;
    std::uint64_t path_length_sum = 0; // tree nodes on each record's path
    std::uint64_t max_path_length = 0;
    std::uint64_t max_chain_distinct = 0;
    std::uint64_t user_bytes = 0;   // key + value bytes
    std::uint64_t record_bytes = 0; // envelope sizes of live records
    std::uint64_t violations = 0;
    std::string first_violation;

    double avg_path_length() const { return records ? double(path_length_sum) / double(records) : 0.0; }
    double utilization(unsigned b) const { return nodes ? double(used_slots) / (double(nodes) * b) : 0.0; }
};

struct EngineCounters {
    std::uint64_t single_writes = 0;
    std::uint64_t batch_writes = 0;
    std::uint64_t batch_retries = 0;
    std::uint64_t batch_locks = 0;   // write locks taken by batches, after dedup
    std::uint64_t splits = 0;       // chains turned into subtrees
    std::uint64_t merges = 0;       // nodes freed by deletes
};

// The lazy-trie over the spaces, with the node locking protocols. All
// durable effects leave through the disk worker.
class Engine {
public:
    struct Params {
        NodeLayout layout;
        unsigned sluggishness = 16;
        HashSeed seed;
        HashKind hash = HashKind::keyed_blake2b;
        std::uint64_t root = kNullAddress;
        std::uint64_t cursor = 0;
        std::uint64_t scan_limit = 100;
    };

    Engine(SpaceManager& spaces, DiskWorker& worker, const Params& params);

    std::optional<std::string> get(std::string_view key);
    // Returns true when the key existed (update).
    bool put(std::string_view key, std::string_view value);
    // Returns true when the key existed.
    bool remove(std::string_view key);
    // Atomic, serializable batch. Result i tells whether op i's key existed.
    std::vector<bool> write(const std::vector<BatchOp>& ops);

    void scan(const std::function<void(std::string_view, std::string_view)>& fn);
    TreeStats tree_stats();

    KeyHash hash(std::string_view key) const { return hash_key(key, p_.seed, p_.hash); }
    std::uint64_t max_value_size(std::size_t key_size) const;

    const NodeLayout& layout() const { return p_.layout; }
    unsigned sluggishness() const { return p_.sluggishness; }
    std::uint64_t root() const { return p_.root; }
    TrieAllocator& trie_alloc() { return ta_; }
    DataAllocator& data_alloc() { return da_; }
    EngineCounters counters() const;

    // Space locks: trie space + trie free list, then data space + data free list.
    std::mutex& trie_space_lock() { return trie_mu_; }
    std::mutex& data_space_lock() { return data_mu_; }

    // Creates the root node in a fresh store.
    static std::uint64_t create_root(SpaceManager& spaces, TrieAllocator& ta, WriteSet& ws);

private:
    enum class Mode { none, shared, upgradable, write };
    struct Held {
        NodeRef node;
        UpgradableLock* lock = nullptr;
        Mode mode = Mode::none;
        unsigned depth = 0;
    };
    struct Target {
        std::uint64_t addr;
        unsigned depth;
        std::uint32_t generation;
        NodeRef node;
    };
    struct RecordView;

    NodeRef node(std::uint64_t addr);
    UpgradableLock& lock_of(const NodeRef& n);
    Held acquire(std::uint64_t addr, unsigned depth, Mode mode);
    static void release(Held& h);

    unsigned char_of(const KeyHash& h, unsigned depth) const { return char_at_unchecked(h, depth, p_.layout.bits); }
    RecordView record(std::uint64_t addr);
    std::uint64_t new_record(WriteSet& ws, const KeyHash& h, std::string_view key, std::string_view value,
                             std::uint64_t next);
    void set_next(WriteSet& ws, std::uint64_t rec, std::uint64_t next);
    void set_slot(WriteSet& ws, const NodeRef& n, unsigned c, std::uint64_t child, bool data);
    void clear_slot(WriteSet& ws, const NodeRef& n, unsigned c);
    void free_node(WriteSet& ws, const NodeRef& n);

    bool insert_at(WriteSet& ws, const NodeRef& n, unsigned depth, const KeyHash& h, std::string_view key,
                   std::string_view value);
    std::uint64_t build_subtree(WriteSet& ws, std::vector<std::pair<std::uint64_t, KeyHash>>& recs, unsigned depth,
                                std::uint64_t parent);
    bool delete_at(WriteSet& ws, const std::vector<NodeRef*>& path, const KeyHash& h, std::string_view key);
    void merge_up(WriteSet& ws, const std::vector<NodeRef*>& path, const KeyHash& h);
    bool chain_contains(const NodeRef& n, unsigned c, const KeyHash& h, std::string_view key);

    // Descends from the root reading slots without locks; valid only while the
    // caller holds the locks that pin the path in place.
    void walk_unlocked(const KeyHash& h, std::vector<NodeRef>& path);

    void check_sizes(std::string_view key, std::string_view value) const;
    void check_healthy() const;
    void poison(const char* what);

    void stats_walk(Held& h, TreeStats& st, std::vector<unsigned>& prefix);
    void scan_walk(Held& h, const std::function<void(std::string_view, std::string_view)>& fn);

    SpaceManager& sm_;
    DiskWorker& worker_;
    Params p_;
    TrieAllocator ta_;
    DataAllocator da_;

    std::mutex trie_mu_;
    std::mutex data_mu_;
    std::mutex batch_mu_;

    std::atomic<bool> poisoned_{false};
    std::atomic<std::uint64_t> single_writes_{0};
    std::atomic<std::uint64_t> batch_writes_{0};
    std::atomic<std::uint64_t> batch_retries_{0};
    std::atomic<std::uint64_t> batch_locks_{0};
    std::atomic<std::uint64_t> splits_{0};
    std::atomic<std::uint64_t> merges_{0};
};

} // namespace ltkv
