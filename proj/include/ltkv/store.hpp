#pragma once

#include "ltkv/alloc.hpp"
#include "ltkv/config.hpp"
#include "ltkv/disk.hpp"
#include "ltkv/engine.hpp"
#include "ltkv/keyhash.hpp"
#include "ltkv/spaces.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltkv {

struct StoreStats {
    TreeStats tree;
    DataWalkReport data;
    std::array<std::uint64_t, kSpaceCount> tails{};
    unsigned branching_factor = 0;
    unsigned sluggishness = 0;
    std::uint64_t node_size = 0;
    std::uint64_t nodes_in_use = 0; // allocator's view
    std::uint64_t free_nodes = 0;
    std::uint64_t allocations = 0;
    std::uint64_t recycled = 0;

    double avg_path_length() const { return tree.avg_path_length(); }
    double utilization() const { return tree.utilization(branching_factor); }
    std::uint64_t tree_node_bytes() const { return tree.nodes * node_size; }
    std::uint64_t metadata_bytes() const {
        return tails[index_of(SpaceId::trie)] + tails[index_of(SpaceId::trie_free)] +
               tails[index_of(SpaceId::data_free)];
    }
    std::uint64_t overhead_bytes() const { return data.in_use_bytes - tree.user_bytes; }
    std::uint64_t disk_usage() const {
        std::uint64_t s = 0;
        for (auto t : tails)
            s += t;
        return s;
    }
    double recycled_ratio() const { return allocations ? double(recycled) / double(allocations) : 0.0; }
    // metadata + user + overhead + holes == sum of tails, with every live
    // envelope reachable from the trie and every allocated node in the trie.
    bool conserved() const {
        return data.ok && tree.record_bytes == data.in_use_bytes && tree.nodes == nodes_in_use &&
               metadata_bytes() + tree.user_bytes + overhead_bytes() + data.hole_bytes == disk_usage();
    }
};

class Store {
public:
    // Creates a store in an absent or empty directory and opens it.
    static std::unique_ptr<Store> create(const std::string& dir, const StoreConfig& config);
    // Opens an existing store, replaying its log. Only the runtime knobs of
    // `runtime` are used.
    static std::unique_ptr<Store> open(const std::string& dir, const StoreConfig& runtime = StoreConfig{});

    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    std::optional<std::string> get(std::string_view key);
    bool put(std::string_view key, std::string_view value);
    bool remove(std::string_view key);
    std::vector<bool> write(const std::vector<BatchOp>& ops);
    void scan(const std::function<void(std::string_view, std::string_view)>& fn);

    StoreStats stats();
    void checkpoint();
    void close();
    // Stops without checkpointing: the log keeps everything since the last
    // checkpoint and the segment files lag behind, as after a process crash.
    void simulate_crash();

    const StoreConfig& config() const { return cfg_; }
    const RecoveryReport& recovery() const { return recovery_; }
    const std::string& dir() const { return dir_; }
    Engine& engine() { return *engine_; }
    SpaceManager& spaces() { return *spaces_; }
    DiskWorker& worker() { return *worker_; }
    SegmentSet& files() { return *files_; }

private:
    Store() = default;
    void check_open() const;

    std::string dir_;
    StoreConfig cfg_;
    HashSeed seed_;
    int lock_fd_ = -1;
    bool closed_ = false;
    RecoveryReport recovery_;
    std::unique_ptr<SegmentSet> files_;
    std::unique_ptr<SpaceManager> spaces_;
    std::unique_ptr<DiskWorker> worker_;
    std::unique_ptr<Engine> engine_;
};

} // namespace ltkv
