/* C interface to the ltkv embedded key-value store. */
#ifndef LTKV_LTKV_H
#define LTKV_LTKV_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define LTKV_API __attribute__((visibility("default")))
#else
#define LTKV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ltkv_status {
    LTKV_OK = 0,
    LTKV_NOT_FOUND = 1,
    LTKV_INVALID_ARGUMENT = 2,
    LTKV_INVALID_CONFIG = 3,
    LTKV_ALREADY_EXISTS = 4,
    LTKV_LOCKED = 5,
    LTKV_CORRUPTION = 6,
    LTKV_IO_ERROR = 7,
    LTKV_BUDGET_EXHAUSTED = 8,
    LTKV_OUT_OF_RANGE = 9,
    LTKV_REJECTED = 10,
    LTKV_NO_SPACE = 11,
    LTKV_INTERNAL = 99
} ltkv_status;

#define LTKV_UNLIMITED UINT64_MAX

enum { LTKV_HASH_KEYED_BLAKE2B = 1, LTKV_HASH_RAW_PREFIX = 2 };
enum { LTKV_DURABILITY_FSYNC = 0, LTKV_DURABILITY_PROCESS = 1 };

typedef struct ltkv_config {
    /* fixed at creation */
    uint32_t branching_factor;
    uint32_t sluggishness;
    uint32_t region_size_bits;
    uint32_t wal_chunk_size;
    uint32_t hash_kind;
    /* runtime */
    uint32_t durability;
    uint64_t memory_budget;
    uint64_t scan_limit;
    uint64_t checkpoint_wal_bytes;
    uint64_t block_cache_bytes;
    uint64_t crash_at_wal_byte;
} ltkv_config;

typedef struct ltkv_stats {
    uint32_t branching_factor;
    uint32_t sluggishness;
    uint64_t node_size;
    uint64_t nodes;
    uint64_t nodes_in_use;
    uint64_t free_nodes;
    uint64_t used_slots;
    uint64_t chains;
    uint64_t records;
    double avg_path_length;
    uint64_t max_path_length;
    double utilization;
    uint64_t max_chain_distinct;
    uint64_t tree_node_bytes;
    uint64_t metadata_bytes;
    uint64_t user_bytes;
    uint64_t overhead_bytes;
    uint64_t hole_bytes;
    uint64_t holes;
    uint64_t adjacent_holes;
    uint64_t tails[4]; /* trie, trie_free, data, data_free */
    uint64_t disk_usage;
    uint64_t allocations;
    uint64_t recycled;
    double recycled_ratio;
    int32_t conserved;        /* 1 when the space accounting balances */
    uint64_t violations;      /* structural invariant violations found */
} ltkv_stats;

typedef struct ltkv_counters {
    uint64_t single_writes;
    uint64_t batch_writes;
    uint64_t batch_retries;
    uint64_t batch_locks;
    uint64_t splits;
    uint64_t merges;
    uint64_t wal_records;
    uint64_t wal_bytes;
    uint64_t checkpoints;
    uint64_t block_reads;
    uint64_t block_writes;
    uint64_t evictions;
    uint64_t resident_regions;
    uint64_t recovered_records;
    uint64_t recovered_log_bytes;
} ltkv_counters;

typedef struct ltkv_store ltkv_store;
typedef struct ltkv_batch ltkv_batch;

typedef int (*ltkv_scan_fn)(void* ctx, const char* key, size_t key_len, const char* value, size_t value_len);

LTKV_API void ltkv_config_default(ltkv_config* cfg);

LTKV_API ltkv_status ltkv_create(const char* dir, const ltkv_config* cfg, ltkv_store** out);
/* cfg may be NULL; only its runtime fields are used. */
LTKV_API ltkv_status ltkv_open(const char* dir, const ltkv_config* cfg, ltkv_store** out);
LTKV_API ltkv_status ltkv_close(ltkv_store* store);
/* Stops without a checkpoint, leaving the log to be replayed by the next open. */
LTKV_API ltkv_status ltkv_debug_crash(ltkv_store* store);

/* On LTKV_OK *value is allocated by the library; release it with ltkv_free. */
LTKV_API ltkv_status ltkv_get(ltkv_store* store, const char* key, size_t key_len, char** value, size_t* value_len);
/* *updated (optional) is set to 1 when the key already existed. */
LTKV_API ltkv_status ltkv_put(ltkv_store* store, const char* key, size_t key_len, const char* value, size_t value_len,
                     int* updated);
/* LTKV_NOT_FOUND when the key is absent. */
LTKV_API ltkv_status ltkv_delete(ltkv_store* store, const char* key, size_t key_len);
LTKV_API void ltkv_free(void* p);

LTKV_API ltkv_batch* ltkv_batch_new(void);
LTKV_API ltkv_status ltkv_batch_put(ltkv_batch* batch, const char* key, size_t key_len, const char* value,
                           size_t value_len);
LTKV_API ltkv_status ltkv_batch_delete(ltkv_batch* batch, const char* key, size_t key_len);
LTKV_API size_t ltkv_batch_size(const ltkv_batch* batch);
LTKV_API void ltkv_batch_clear(ltkv_batch* batch);
LTKV_API void ltkv_batch_free(ltkv_batch* batch);
/* Applies the batch atomically. existed (optional) receives one flag per op. */
LTKV_API ltkv_status ltkv_write(ltkv_store* store, const ltkv_batch* batch, uint8_t* existed);

/* Visits every pair; the callback returns nonzero to stop early. */
LTKV_API ltkv_status ltkv_scan(ltkv_store* store, ltkv_scan_fn fn, void* ctx);
LTKV_API ltkv_status ltkv_stats_get(ltkv_store* store, ltkv_stats* out);
LTKV_API ltkv_status ltkv_counters_get(ltkv_store* store, ltkv_counters* out);
LTKV_API ltkv_status ltkv_checkpoint(ltkv_store* store);
LTKV_API size_t ltkv_max_value_size(const ltkv_store* store, size_t key_len);

/* Message for the last failure on the calling thread. */
LTKV_API const char* ltkv_last_error(void);
LTKV_API const char* ltkv_status_string(ltkv_status status);

#ifdef __cplusplus
}
#endif

#endif
