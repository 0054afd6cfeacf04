#pragma once

#include "ltkv/ltkv.h"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ltkv::bench {

class StoreError : public std::runtime_error {
public:
    StoreError(ltkv_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
    ltkv_status status() const { return status_; }

private:
    ltkv_status status_;
};

void check(ltkv_status status, const char* op);

class Batch {
public:
    Batch();
    ~Batch();
    Batch(const Batch&) = delete;
    Batch& operator=(const Batch&) = delete;

    void put(std::string_view key, std::string_view value);
    void del(std::string_view key);
    std::size_t size() const;
    void clear();
    const ltkv_batch* raw() const { return b_; }

private:
    ltkv_batch* b_;
};

// Owning wrapper over the C handle.
class Db {
public:
    static Db create(const std::string& dir, const ltkv_config& cfg);
    static Db open(const std::string& dir, const ltkv_config* runtime = nullptr);
    // Opens dir, creating it with cfg when it holds no store.
    static Db open_or_create(const std::string& dir, const ltkv_config& cfg);

    Db() = default;
    Db(Db&& o) noexcept : s_(o.s_) { o.s_ = nullptr; }
    Db& operator=(Db&& o) noexcept;
    ~Db();

    std::optional<std::string> get(std::string_view key);
    bool put(std::string_view key, std::string_view value); // true if it replaced a value
    bool del(std::string_view key);                         // true if the key existed
    std::vector<std::uint8_t> write(const Batch& batch);
    void scan(const std::function<void(std::string_view, std::string_view)>& fn);

    ltkv_stats stats();
    ltkv_counters counters();
    void checkpoint();
    void close();
    void crash();

    explicit operator bool() const { return s_ != nullptr; }
    ltkv_store* raw() { return s_; }

private:
    explicit Db(ltkv_store* s) : s_(s) {}
    ltkv_store* s_ = nullptr;
};

} // namespace ltkv::bench
