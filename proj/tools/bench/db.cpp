#include "db.hpp"

namespace ltkv::bench {

void check(ltkv_status status, const char* op) {
    if (status == LTKV_OK)
        return;
    std::string msg = std::string(op) + ": " + ltkv_status_string(status);
    const char* detail = ltkv_last_error();
    if (detail && *detail)
        msg += std::string(" (") + detail + ")";
    throw StoreError(status, msg);
}

Batch::Batch() : b_(ltkv_batch_new()) {
    if (!b_)
        throw std::bad_alloc();
}
Batch::~Batch() { ltkv_batch_free(b_); }

void Batch::put(std::string_view key, std::string_view value) {
    check(ltkv_batch_put(b_, key.data(), key.size(), value.data(), value.size()), "batch put");
}
void Batch::del(std::string_view key) { check(ltkv_batch_delete(b_, key.data(), key.size()), "batch delete"); }
std::size_t Batch::size() const { return ltkv_batch_size(b_); }
void Batch::clear() { ltkv_batch_clear(b_); }

Db Db::create(const std::string& dir, const ltkv_config& cfg) {
    ltkv_store* s = nullptr;
    check(ltkv_create(dir.c_str(), &cfg, &s), "create");
    return Db(s);
}

Db Db::open(const std::string& dir, const ltkv_config* runtime) {
    ltkv_store* s = nullptr;
    check(ltkv_open(dir.c_str(), runtime, &s), "open");
    return Db(s);
}

Db Db::open_or_create(const std::string& dir, const ltkv_config& cfg) {
    ltkv_store* s = nullptr;
    const ltkv_status st = ltkv_open(dir.c_str(), &cfg, &s);
    if (st == LTKV_NOT_FOUND)
        return create(dir, cfg);
    check(st, "open");
    return Db(s);
}

Db& Db::operator=(Db&& o) noexcept {
    if (this != &o) {
        if (s_)
            ltkv_close(s_);
        s_ = o.s_;
        o.s_ = nullptr;
    }
    return *this;
}

Db::~Db() {
    if (s_)
        ltkv_close(s_);
}

std::optional<std::string> Db::get(std::string_view key) {
    char* v = nullptr;
    size_t n = 0;
    const ltkv_status st = ltkv_get(s_, key.data(), key.size(), &v, &n);
    if (st == LTKV_NOT_FOUND)
        return std::nullopt;
    check(st, "get");
    std::string out(v, n);
    ltkv_free(v);
    return out;
}

bool Db::put(std::string_view key, std::string_view value) {
    int updated = 0;
    check(ltkv_put(s_, key.data(), key.size(), value.data(), value.size(), &updated), "put");
    return updated != 0;
}

bool Db::del(std::string_view key) {
    const ltkv_status st = ltkv_delete(s_, key.data(), key.size());
    if (st == LTKV_NOT_FOUND)
        return false;
    check(st, "delete");
    return true;
}

std::vector<std::uint8_t> Db::write(const Batch& batch) {
    std::vector<std::uint8_t> existed(batch.size());
    check(ltkv_write(s_, batch.raw(), existed.data()), "write");
    return existed;
}

void Db::scan(const std::function<void(std::string_view, std::string_view)>& fn) {
    struct Ctx {
        const std::function<void(std::string_view, std::string_view)>* fn;
    } ctx{&fn};
    auto cb = [](void* p, const char* k, size_t kn, const char* v, size_t vn) -> int {
        (*static_cast<Ctx*>(p)->fn)({k, kn}, {v, vn});
        return 0;
    };
    check(ltkv_scan(s_, cb, &ctx), "scan");
}

ltkv_stats Db::stats() {
    ltkv_stats st{};
    check(ltkv_stats_get(s_, &st), "stats");
    return st;
}

ltkv_counters Db::counters() {
    ltkv_counters c{};
    check(ltkv_counters_get(s_, &c), "counters");
    return c;
}

void Db::checkpoint() { check(ltkv_checkpoint(s_), "checkpoint"); }

void Db::close() {
    if (!s_)
        return;
    ltkv_store* s = s_;
    s_ = nullptr;
    check(ltkv_close(s), "close");
}

void Db::crash() {
    if (!s_)
        return;
    ltkv_store* s = s_;
    s_ = nullptr;
    check(ltkv_debug_crash(s), "crash");
}

} // namespace ltkv::bench
