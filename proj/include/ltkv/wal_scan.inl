#pragma once

#include "ltkv/crc32c.hpp"

#include <cstring>

namespace ltkv::wal {

namespace detail {

inline bool read_fragment(const std::vector<std::uint8_t>& log, std::uint64_t pos, std::size_t chunk,
                          std::uint8_t& flag, std::size_t& len) {
    const std::uint64_t left = chunk - pos % chunk;
    if (pos + kFragmentHeader > log.size() || left < kFragmentHeader + 1)
        return false;
    const std::uint8_t* p = log.data() + pos;
    std::uint32_t crc;
    std::uint16_t n;
    std::memcpy(&crc, p, 4);
    std::memcpy(&n, p + 4, 2);
    flag = p[6];
    len = n;
    if (len == 0 || len > left - kFragmentHeader || pos + kFragmentHeader + len > log.size() || flag > 3)
        return false;
    return crc32c(p + 6, 1 + len) == crc;
}

inline std::uint64_t next_fragment_pos(std::uint64_t pos, std::size_t chunk) {
    if (chunk - pos % chunk < kFragmentHeader + 1)
        return (pos / chunk + 1) * chunk;
    return pos;
}

} // namespace detail

template <class Fn>
ScanResult scan_log(const std::vector<std::uint8_t>& log, std::uint64_t head, std::uint64_t head_seq,
                    std::size_t chunk, Fn&& fn) {
    ScanResult res;
    res.next_seq = head_seq;
    res.valid_bytes = head;
    std::vector<std::uint8_t> assembled;
    std::uint64_t pos = head;
    bool in_record = false;
    std::uint64_t fail_pos = 0;
    for (;;) {
        pos = detail::next_fragment_pos(pos, chunk);
        if (pos >= log.size()) {
            res.end = in_record ? ScanEnd::torn : ScanEnd::clean;
            return res;
        }
        std::uint8_t flag;
        std::size_t len;
        if (!detail::read_fragment(log, pos, chunk, flag, len) || bool(flag & kContinue) != in_record) {
            res.end = ScanEnd::torn;
            res.detail = "invalid fragment at " + std::to_string(pos);
            fail_pos = pos;
            break;
        }
        const std::uint8_t* payload = log.data() + pos + kFragmentHeader;
        if (!in_record)
            assembled.clear();
        assembled.insert(assembled.end(), payload, payload + len);
        pos += kFragmentHeader + len;
        if (flag & kMore) {
            in_record = true;
            continue;
        }
        in_record = false;
        Record rec;
        if (!decode_record(assembled.data(), assembled.size(), rec)) {
            res.end = ScanEnd::torn;
            res.detail = "record checksum mismatch ending at " + std::to_string(pos);
            fail_pos = pos;
            break;
        }
        if (rec.seq != res.next_seq) {
            // Older sequence numbers are leftovers from before a reset.
            res.end = rec.seq < res.next_seq ? ScanEnd::stale : ScanEnd::corruption;
            res.detail = "sequence " + std::to_string(rec.seq) + " where " + std::to_string(res.next_seq) +
                         " was expected";
            if (res.end == ScanEnd::corruption)
                return res;
            fail_pos = pos;
            break;
        }
        fn(rec);
        ++res.records;
        ++res.next_seq;
        res.valid_bytes = pos;
    }
    // A well-formed record start after the failure point means the damage is
    // not a torn tail.
    for (std::uint64_t c = (fail_pos / chunk + 1) * chunk; c < log.size(); c += chunk) {
        std::uint64_t q = c;
        std::uint8_t flag;
        std::size_t len;
        while (q < c + chunk && detail::read_fragment(log, q, chunk, flag, len)) {
            if (!(flag & kContinue) && len >= 8) {
                std::uint64_t seq;
                std::memcpy(&seq, log.data() + q + kFragmentHeader, 8);
                if (seq >= res.next_seq) {
                    res.end = ScanEnd::corruption;
                    res.detail += "; valid record " + std::to_string(seq) + " follows at " + std::to_string(q);
                    return res;
                }
            }
            q = detail::next_fragment_pos(q + kFragmentHeader + len, chunk);
        }
    }
    return res;
}

} // namespace ltkv::wal
