#include "ltkv/ltkv.h"

#include "ltkv/error.hpp"
#include "ltkv/store.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

using ltkv::ErrorCode;

struct ltkv_store {
    std::unique_ptr<ltkv::Store> store;
};

struct ltkv_batch {
    std::vector<ltkv::BatchOp> ops;
};

namespace {

thread_local std::string g_last_error;

ltkv_status fail(ltkv_status s, const char* msg) {
    g_last_error = msg;
    return s;
}

template <class Fn>
ltkv_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const ltkv::Error& e) {
        return fail(static_cast<ltkv_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(LTKV_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(LTKV_INTERNAL, e.what());
    }
}

ltkv::StoreConfig to_config(const ltkv_config* c) {
    ltkv::StoreConfig cfg;
    if (!c)
        return cfg;
    cfg.branching_factor = c->branching_factor;
    cfg.sluggishness = c->sluggishness;
    cfg.region_size_bits = c->region_size_bits;
    cfg.wal_chunk_size = c->wal_chunk_size;
    cfg.hash = static_cast<ltkv::HashKind>(c->hash_kind);
    cfg.durability = static_cast<ltkv::Durability>(c->durability);
    cfg.memory_budget = c->memory_budget;
    cfg.scan_limit = c->scan_limit;
    cfg.checkpoint_wal_bytes = c->checkpoint_wal_bytes;
    cfg.block_cache_bytes = c->block_cache_bytes;
    cfg.crash_at_wal_byte = c->crash_at_wal_byte;
    return cfg;
}

std::string_view sv(const char* p, size_t n) { return {p ? p : "", p ? n : 0}; }

} // namespace

extern "C" {

void ltkv_config_default(ltkv_config* c) {
    const ltkv::StoreConfig d;
    c->branching_factor = d.branching_factor;
    c->sluggishness = d.sluggishness;
    c->region_size_bits = d.region_size_bits;
    c->wal_chunk_size = d.wal_chunk_size;
    c->hash_kind = static_cast<uint32_t>(d.hash);
    c->durability = static_cast<uint32_t>(d.durability);
    c->memory_budget = d.memory_budget;
    c->scan_limit = d.scan_limit;
    c->checkpoint_wal_bytes = d.checkpoint_wal_bytes;
    c->block_cache_bytes = d.block_cache_bytes;
    c->crash_at_wal_byte = d.crash_at_wal_byte;
}

ltkv_status ltkv_create(const char* dir, const ltkv_config* cfg, ltkv_store** out) {
    if (!dir || !out)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<ltkv_store>();
        h->store = ltkv::Store::create(dir, to_config(cfg));
        *out = h.release();
        return LTKV_OK;
    });
}

ltkv_status ltkv_open(const char* dir, const ltkv_config* cfg, ltkv_store** out) {
    if (!dir || !out)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<ltkv_store>();
        h->store = ltkv::Store::open(dir, to_config(cfg));
        *out = h.release();
        return LTKV_OK;
    });
}

ltkv_status ltkv_close(ltkv_store* s) {
    if (!s)
        return LTKV_OK;
    const ltkv_status st = guarded([&] {
        s->store->close();
        return LTKV_OK;
    });
    delete s;
    return st;
}

ltkv_status ltkv_debug_crash(ltkv_store* s) {
    if (!s)
        return LTKV_OK;
    const ltkv_status st = guarded([&] {
        s->store->simulate_crash();
        return LTKV_OK;
    });
    delete s;
    return st;
}

ltkv_status ltkv_get(ltkv_store* s, const char* key, size_t key_len, char** value, size_t* value_len) {
    if (!s || !value || !value_len)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    *value = nullptr;
    *value_len = 0;
    return guarded([&] {
        auto v = s->store->get(sv(key, key_len));
        if (!v)
            return LTKV_NOT_FOUND;
        char* buf = static_cast<char*>(std::malloc(v->size() ? v->size() : 1));
        if (!buf)
            throw std::bad_alloc();
        std::memcpy(buf, v->data(), v->size());
        *value = buf;
        *value_len = v->size();
        return LTKV_OK;
    });
}

ltkv_status ltkv_put(ltkv_store* s, const char* key, size_t key_len, const char* value, size_t value_len,
                     int* updated) {
    if (!s)
        return fail(LTKV_INVALID_ARGUMENT, "null store");
    return guarded([&] {
        const bool existed = s->store->put(sv(key, key_len), sv(value, value_len));
        if (updated)
            *updated = existed ? 1 : 0;
        return LTKV_OK;
    });
}

ltkv_status ltkv_delete(ltkv_store* s, const char* key, size_t key_len) {
    if (!s)
        return fail(LTKV_INVALID_ARGUMENT, "null store");
    return guarded([&] { return s->store->remove(sv(key, key_len)) ? LTKV_OK : LTKV_NOT_FOUND; });
}

void ltkv_free(void* p) { std::free(p); }

ltkv_batch* ltkv_batch_new(void) { return new (std::nothrow) ltkv_batch(); }

ltkv_status ltkv_batch_put(ltkv_batch* b, const char* key, size_t key_len, const char* value, size_t value_len) {
    if (!b)
        return fail(LTKV_INVALID_ARGUMENT, "null batch");
    return guarded([&] {
        b->ops.push_back(ltkv::BatchOp{ltkv::BatchOp::put, std::string(sv(key, key_len)),
                                       std::string(sv(value, value_len))});
        return LTKV_OK;
    });
}

ltkv_status ltkv_batch_delete(ltkv_batch* b, const char* key, size_t key_len) {
    if (!b)
        return fail(LTKV_INVALID_ARGUMENT, "null batch");
    return guarded([&] {
        b->ops.push_back(ltkv::BatchOp{ltkv::BatchOp::del, std::string(sv(key, key_len)), {}});
        return LTKV_OK;
    });
}

size_t ltkv_batch_size(const ltkv_batch* b) { return b ? b->ops.size() : 0; }
void ltkv_batch_clear(ltkv_batch* b) {
    if (b)
        b->ops.clear();
}
void ltkv_batch_free(ltkv_batch* b) { delete b; }

ltkv_status ltkv_write(ltkv_store* s, const ltkv_batch* b, uint8_t* existed) {
    if (!s || !b)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const auto r = s->store->write(b->ops);
        if (existed)
            for (size_t i = 0; i < r.size(); ++i)
                existed[i] = r[i] ? 1 : 0;
        return LTKV_OK;
    });
}

ltkv_status ltkv_scan(ltkv_store* s, ltkv_scan_fn fn, void* ctx) {
    if (!s || !fn)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    struct Stop {};
    return guarded([&] {
        try {
            s->store->scan([&](std::string_view k, std::string_view v) {
                if (fn(ctx, k.data(), k.size(), v.data(), v.size()) != 0)
                    throw Stop{};
            });
        } catch (const Stop&) {
        }
        return LTKV_OK;
    });
}

ltkv_status ltkv_stats_get(ltkv_store* s, ltkv_stats* o) {
    if (!s || !o)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const ltkv::StoreStats st = s->store->stats();
        std::memset(o, 0, sizeof *o);
        o->branching_factor = st.branching_factor;
        o->sluggishness = st.sluggishness;
        o->node_size = st.node_size;
        o->nodes = st.tree.nodes;
        o->nodes_in_use = st.nodes_in_use;
        o->free_nodes = st.free_nodes;
        o->used_slots = st.tree.used_slots;
        o->chains = st.tree.chains;
        o->records = st.tree.records;
        o->avg_path_length = st.avg_path_length();
        o->max_path_length = st.tree.max_path_length;
        o->utilization = st.utilization();
        o->max_chain_distinct = st.tree.max_chain_distinct;
        o->tree_node_bytes = st.tree_node_bytes();
        o->metadata_bytes = st.metadata_bytes();
        o->user_bytes = st.tree.user_bytes;
        o->overhead_bytes = st.overhead_bytes();
        o->hole_bytes = st.data.hole_bytes;
        o->holes = st.data.holes;
        o->adjacent_holes = st.data.adjacent_holes;
        for (int i = 0; i < 4; ++i)
            o->tails[i] = st.tails[i];
        o->disk_usage = st.disk_usage();
        o->allocations = st.allocations;
        o->recycled = st.recycled;
        o->recycled_ratio = st.recycled_ratio();
        o->conserved = st.conserved() ? 1 : 0;
        o->violations = st.tree.violations + (st.data.ok ? 0 : 1);
        if (!st.tree.first_violation.empty())
            g_last_error = st.tree.first_violation;
        else if (!st.data.ok)
            g_last_error = st.data.problem;
        return LTKV_OK;
    });
}

ltkv_status ltkv_counters_get(ltkv_store* s, ltkv_counters* o) {
    if (!s || !o)
        return fail(LTKV_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        std::memset(o, 0, sizeof *o);
        const auto e = s->store->engine().counters();
        const auto d = s->store->worker().counters();
        o->single_writes = e.single_writes;
        o->batch_writes = e.batch_writes;
        o->batch_retries = e.batch_retries;
        o->batch_locks = e.batch_locks;
        o->splits = e.splits;
        o->merges = e.merges;
        o->wal_records = d.records;
        o->wal_bytes = d.wal_bytes;
        o->checkpoints = d.checkpoints;
        o->block_reads = d.block_reads;
        o->block_writes = d.block_writes;
        o->evictions = s->store->spaces().evictions();
        o->resident_regions = s->store->spaces().resident_regions();
        o->recovered_records = s->store->recovery().records;
        o->recovered_log_bytes = s->store->recovery().log_bytes;
        return LTKV_OK;
    });
}

ltkv_status ltkv_checkpoint(ltkv_store* s) {
    if (!s)
        return fail(LTKV_INVALID_ARGUMENT, "null store");
    return guarded([&] {
        s->store->checkpoint();
        return LTKV_OK;
    });
}

size_t ltkv_max_value_size(const ltkv_store* s, size_t key_len) {
    if (!s)
        return 0;
    return static_cast<size_t>(const_cast<ltkv_store*>(s)->store->engine().max_value_size(key_len));
}

const char* ltkv_last_error(void) { return g_last_error.c_str(); }

const char* ltkv_status_string(ltkv_status s) {
    if (s == LTKV_INTERNAL)
        return "internal";
    return ltkv::to_string(static_cast<ErrorCode>(s));
}

} // extern "C"
