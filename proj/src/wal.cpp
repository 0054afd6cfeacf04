#include "ltkv/wal.hpp"

#include "ltkv/crc32c.hpp"
#include "ltkv/error.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

namespace ltkv::wal {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void write_all(int fd, const std::uint8_t* p, std::size_t n, const char* what) {
    while (n > 0) {
        const ssize_t w = ::write(fd, p, n);
        if (w < 0) {
            if (errno == EINTR)
                continue;
            throw_errno(what);
        }
        p += w;
        n -= static_cast<std::size_t>(w);
    }
}

void sync_dir(const std::string& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0)
        throw_errno("open store directory");
    const int rc = ::fsync(fd);
    const int err = errno;
    ::close(fd);
    if (rc != 0)
        throw_errno("sync store directory", err);
}

} // namespace

std::size_t subrecord_size(std::size_t payload) {
    std::size_t n = 1 + 8 + 1 + payload;
    if (payload >= 0xFF)
        n += payload <= 0xFFFF ? 2 : 8;
    return n;
}

void append_subrecord(std::vector<std::uint8_t>& out, SpaceId space, std::uint64_t offset, const std::uint8_t* data,
                      std::size_t len) {
    out.push_back(static_cast<std::uint8_t>(space));
    put_u64(out, offset);
    if (len > 0 && len < 0xFF) {
        out.push_back(static_cast<std::uint8_t>(len));
    } else if (len <= 0xFFFF && len > 0) {
        out.push_back(kLen16);
        put_u16(out, static_cast<std::uint16_t>(len));
    } else {
        out.push_back(kLen64);
        put_u64(out, len);
    }
    out.insert(out.end(), data, data + len);
}

void encode_record(std::vector<std::uint8_t>& out, std::uint64_t seq, const std::vector<WriteSet::Entry>& entries,
                   const std::vector<std::uint8_t>& bytes) {
    const std::size_t start = out.size();
    put_u64(out, seq);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries)
        append_subrecord(out, e.space, e.offset, bytes.data() + e.data_offset, e.length);
    put_u32(out, crc32c(out.data() + start, out.size() - start));
}

bool decode_record(const std::uint8_t* p, std::size_t len, Record& out) {
    if (len < 16)
        return false;
    std::uint32_t crc;
    std::memcpy(&crc, p + len - 4, 4);
    if (crc32c(p, len - 4) != crc)
        return false;
    const std::uint8_t* end = p + len - 4;
    std::uint32_t count;
    std::memcpy(&out.seq, p, 8);
    std::memcpy(&count, p + 8, 4);
    p += 12;
    out.subs.clear();
    out.subs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (end - p < 10)
            return false;
        Subrecord s;
        if (p[0] > 3)
            return false;
        s.space = static_cast<SpaceId>(p[0]);
        std::memcpy(&s.offset, p + 1, 8);
        const std::uint8_t t = p[9];
        p += 10;
        if (t == kLen16) {
            if (end - p < 2)
                return false;
            std::uint16_t n;
            std::memcpy(&n, p, 2);
            s.len = n;
            p += 2;
        } else if (t == kLen64) {
            if (end - p < 8)
                return false;
            std::uint64_t n;
            std::memcpy(&n, p, 8);
            s.len = n;
            p += 8;
        } else {
            s.len = t;
        }
        if (static_cast<std::size_t>(end - p) < s.len)
            return false;
        s.data = p;
        p += s.len;
        out.subs.push_back(s);
    }
    return p == end;
}

void ChunkWriter::frame(const std::uint8_t* payload, std::size_t len, std::vector<std::uint8_t>& out) {
    bool first = true;
    while (first || len > 0) {
        std::size_t left = chunk_ - pos_ % chunk_;
        if (left < kFragmentHeader + 1) {
            out.insert(out.end(), left, 0);
            pos_ += left;
            left = chunk_;
        }
        const std::size_t n = std::min(len, left - kFragmentHeader);
        const std::uint8_t flag =
            static_cast<std::uint8_t>((n < len ? kMore : 0) | (first ? 0 : kContinue));
        const std::size_t at = out.size();
        out.resize(at + kFragmentHeader);
        out.insert(out.end(), payload, payload + n);
        out[at + 6] = flag;
        const std::uint16_t n16 = static_cast<std::uint16_t>(n);
        std::memcpy(&out[at + 4], &n16, 2);
        const std::uint32_t crc = crc32c(&out[at + 6], 1 + n);
        std::memcpy(&out[at], &crc, 4);
        payload += n;
        len -= n;
        pos_ += kFragmentHeader + n;
        first = false;
    }
}

std::string log_path(const std::string& dir) { return dir + "/wal.log"; }

static std::string meta_path(const std::string& dir) { return dir + "/wal.meta"; }

bool read_meta(const std::string& dir, Meta& meta) {
    const std::string path = meta_path(dir);
    struct stat st {};
    if (::stat(path.c_str(), &st) != 0)
        return false;
    const auto bytes = read_file(path);
    if (bytes.size() != 28)
        throw Error(ErrorCode::corruption, "wal.meta has the wrong size");
    std::uint64_t magic;
    std::uint32_t crc;
    std::memcpy(&magic, bytes.data(), 8);
    std::memcpy(&meta.head_offset, bytes.data() + 8, 8);
    std::memcpy(&meta.head_seq, bytes.data() + 16, 8);
    std::memcpy(&crc, bytes.data() + 24, 4);
    if (magic != kMetaMagic || crc32c(bytes.data(), 24) != crc)
        throw Error(ErrorCode::corruption, "wal.meta is damaged");
    return true;
}

void write_meta(const std::string& dir, const Meta& meta, bool sync) {
    std::vector<std::uint8_t> bytes;
    put_u64(bytes, kMetaMagic);
    put_u64(bytes, meta.head_offset);
    put_u64(bytes, meta.head_seq);
    put_u32(bytes, crc32c(bytes.data(), bytes.size()));
    const std::string tmp = meta_path(dir) + ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0)
        throw_errno("open " + tmp);
    try {
        write_all(fd, bytes.data(), bytes.size(), "write wal.meta");
        if (sync && ::fdatasync(fd) != 0)
            throw_errno("sync wal.meta");
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), meta_path(dir).c_str()) != 0)
        throw_errno("rename wal.meta");
    if (sync)
        sync_dir(dir);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::vector<std::uint8_t> out;
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
        if (errno == ENOENT)
            return out;
        throw_errno("open " + path);
    }
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        const int err = errno;
        ::close(fd);
        throw_errno("stat " + path, err);
    }
    out.resize(static_cast<std::size_t>(st.st_size));
    std::size_t got = 0;
    while (got < out.size()) {
        const ssize_t n = ::pread(fd, out.data() + got, out.size() - got, static_cast<off_t>(got));
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        got += static_cast<std::size_t>(n);
    }
    out.resize(got);
    ::close(fd);
    return out;
}

LogFile::LogFile(const std::string& dir, std::uint64_t crash_at_byte) : dir_(dir), crash_at_(crash_at_byte) {
    const std::string path = log_path(dir);
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw_errno("open " + path);
    struct stat st {};
    if (::fstat(fd_, &st) != 0)
        throw_errno("stat " + path);
    size_ = static_cast<std::uint64_t>(st.st_size);
}

LogFile::~LogFile() {
    if (fd_ >= 0)
        ::close(fd_);
}

void LogFile::append(const std::vector<std::uint8_t>& bytes) {
    std::size_t n = bytes.size();
    if (crash_at_ > 0 && appended_ + n >= crash_at_) {
        // Injected crash: persist only a prefix of this write, then die.
        const std::size_t keep = static_cast<std::size_t>(crash_at_ - appended_);
        if (::pwrite(fd_, bytes.data(), keep, static_cast<off_t>(size_)) < 0)
            ::_exit(kCrashExitCode + 1);
        ::_exit(kCrashExitCode);
    }
    const std::uint8_t* p = bytes.data();
    std::uint64_t off = size_;
    while (n > 0) {
        const ssize_t w = ::pwrite(fd_, p, n, static_cast<off_t>(off));
        if (w < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("write wal.log");
        }
        p += w;
        off += static_cast<std::uint64_t>(w);
        n -= static_cast<std::size_t>(w);
    }
    appended_ += bytes.size();
    size_ = off;
}

void LogFile::sync() {
    if (::fdatasync(fd_) != 0)
        throw_errno("sync wal.log");
}

void LogFile::reset(std::uint64_t next_seq, bool sync) {
    // Publish the new head first: until the truncate lands, recovery sees the
    // old records as stale.
    write_meta(dir_, Meta{0, next_seq}, sync);
    if (::ftruncate(fd_, 0) != 0)
        throw_errno("truncate wal.log");
    if (sync)
        this->sync();
    size_ = 0;
}

} // namespace ltkv::wal
