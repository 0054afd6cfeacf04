#pragma once

#include "ltkv/config.hpp"
#include "ltkv/spaces.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ltkv::wal {

// Subrecord: [space u8][offset u64][len type u8][len u16 | u64]?[payload].
inline constexpr std::uint8_t kLen16 = 0xFF;
inline constexpr std::uint8_t kLen64 = 0x00;

std::size_t subrecord_size(std::size_t payload);
void append_subrecord(std::vector<std::uint8_t>& out, SpaceId space, std::uint64_t offset, const std::uint8_t* data,
                      std::size_t len);

// Record payload: [seq u64][count u32][subrecords][crc32c u32 over all before].
void encode_record(std::vector<std::uint8_t>& out, std::uint64_t seq, const std::vector<WriteSet::Entry>& entries,
                   const std::vector<std::uint8_t>& bytes);

struct Subrecord {
    SpaceId space;
    std::uint64_t offset;
    const std::uint8_t* data;
    std::size_t len;
};

struct Record {
    std::uint64_t seq = 0;
    std::vector<Subrecord> subs;
};

// Parses a record payload; false if the checksum or structure is invalid.
bool decode_record(const std::uint8_t* p, std::size_t len, Record& out);

// Fragment framing inside fixed-size chunks:
//   [crc32c(flag, payload) u32][len u16][flag u8][payload]
// A fragment never crosses a chunk; a chunk tail shorter than a header plus
// one byte is zero-filled.
inline constexpr std::size_t kFragmentHeader = 7;
inline constexpr std::uint8_t kMore = 1;     // the record continues in the next fragment
inline constexpr std::uint8_t kContinue = 2; // this fragment continues the previous one

class ChunkWriter {
public:
    ChunkWriter(std::size_t chunk_size, std::uint64_t position) : chunk_(chunk_size), pos_(position) {}
    // Frames one record payload and appends the bytes to `out`.
    void frame(const std::uint8_t* payload, std::size_t len, std::vector<std::uint8_t>& out);
    std::uint64_t position() const { return pos_; }

private:
    std::size_t chunk_;
    std::uint64_t pos_;
};

enum class ScanEnd { clean, torn, stale, corruption };

struct ScanResult {
    ScanEnd end = ScanEnd::clean;
    std::uint64_t records = 0;
    std::uint64_t valid_bytes = 0; // offset just past the last complete record
    std::uint64_t next_seq = 0;
    std::string detail;
};

// Walks the framed log in `log` starting at `head` (absolute offsets), calling
// `fn(record)` for each complete record whose sequence continues from
// `head_seq`. Stops at the first torn or invalid fragment; reports corruption
// when a valid record start with a later sequence number follows that point.
template <class Fn>
ScanResult scan_log(const std::vector<std::uint8_t>& log, std::uint64_t head, std::uint64_t head_seq,
                    std::size_t chunk_size, Fn&& fn);

// Side file with the live head of the log.
struct Meta {
    std::uint64_t head_offset = 0;
    std::uint64_t head_seq = 1;
};
inline constexpr std::uint64_t kMetaMagic = 0x314154454d4c4157ull; // "WALMETA1"

// Returns false if the file is absent; throws corruption if it is damaged.
bool read_meta(const std::string& dir, Meta& meta);
void write_meta(const std::string& dir, const Meta& meta, bool sync);

// Append-only log file with a crash-injection hook.
class LogFile {
public:
    LogFile(const std::string& dir, std::uint64_t crash_at_byte);
    ~LogFile();
    LogFile(const LogFile&) = delete;
    LogFile& operator=(const LogFile&) = delete;

    void append(const std::vector<std::uint8_t>& bytes);
    void sync();
    // Empties the log; the next record will carry `next_seq`.
    void reset(std::uint64_t next_seq, bool sync);
    std::uint64_t size() const { return size_; }
    std::uint64_t appended_since_open() const { return appended_; }

private:
    std::string dir_;
    int fd_ = -1;
    std::uint64_t size_ = 0;
    std::uint64_t appended_ = 0;
    std::uint64_t crash_at_;
};

std::string log_path(const std::string& dir);
std::vector<std::uint8_t> read_file(const std::string& path);

// Exit status used when the injected crash point fires.
inline constexpr int kCrashExitCode = 86;

} // namespace ltkv::wal

#include "ltkv/wal_scan.inl"
