#pragma once

// Minimal ZIP (deflate, no zip64) writer and reader over zlib. Entries carry a
// fixed 1980-01-01 timestamp so identical inputs give identical archives.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "heartbeatcam/error.hpp"
#include "heartbeatcam/hash.hpp"

namespace heartbeatcam {

namespace zip_detail {

inline void put16(Bytes& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put32(Bytes& b, std::uint32_t v) {
    put16(b, v & 0xFFFF);
    put16(b, v >> 16);
}
inline std::uint32_t get16(const std::uint8_t* p) { return p[0] | (p[1] << 8); }
inline std::uint32_t get32(const std::uint8_t* p) { return get16(p) | (get16(p + 2) << 16); }

inline constexpr std::uint16_t dos_date_1980_01_01 = (0 << 9) | (1 << 5) | 1;

inline Bytes deflate_raw(ByteView in, int level) {
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("deflateInit2 failed");
    Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error("deflate failed");
    out.resize(zs.total_out);
    return out;
}

inline Bytes inflate_raw(ByteView in, std::size_t expected) {
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw Error("inflateInit2 failed");
    Bytes out(expected);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected) throw ParseError(0, "zip", "corrupt deflate stream");
    return out;
}

}  // namespace zip_detail

class ZipWriter {
public:
    explicit ZipWriter(int level = 6) : level_(level) {}

    void add(const std::string& name, ByteView data) {
        if (name.empty() || name.size() > 0xFFFF) throw ValidationError("name", "bad zip entry name");
        Entry e;
        e.name = name;
        e.crc = crc32(data);
        e.size = static_cast<std::uint32_t>(data.size());
        Bytes packed = zip_detail::deflate_raw(data, level_);
        e.method = 8;
        if (packed.size() >= data.size()) {
            packed.assign(data.begin(), data.end());
            e.method = 0;
        }
        e.packed_size = static_cast<std::uint32_t>(packed.size());
        e.offset = static_cast<std::uint32_t>(out_.size());

        using namespace zip_detail;
        put32(out_, 0x04034b50);
        put16(out_, 20);
        put16(out_, 0x0800);  // UTF-8 names
        put16(out_, e.method);
        put16(out_, 0);
        put16(out_, dos_date_1980_01_01);
        put32(out_, e.crc);
        put32(out_, e.packed_size);
        put32(out_, e.size);
        put16(out_, static_cast<std::uint32_t>(name.size()));
        put16(out_, 0);
        out_.insert(out_.end(), name.begin(), name.end());
        out_.insert(out_.end(), packed.begin(), packed.end());
        entries_.push_back(std::move(e));
    }

    void add(const std::string& name, std::string_view text) {
        add(name, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

    Bytes finish() {
        using namespace zip_detail;
        Bytes out = out_;
        const auto cd_offset = static_cast<std::uint32_t>(out.size());
        for (const auto& e : entries_) {
            put32(out, 0x02014b50);
            put16(out, 20);
            put16(out, 20);
            put16(out, 0x0800);
            put16(out, e.method);
            put16(out, 0);
            put16(out, dos_date_1980_01_01);
            put32(out, e.crc);
            put32(out, e.packed_size);
            put32(out, e.size);
            put16(out, static_cast<std::uint32_t>(e.name.size()));
            put16(out, 0);
            put16(out, 0);
            put16(out, 0);
            put16(out, 0);
            put32(out, 0);
            put32(out, e.offset);
            out.insert(out.end(), e.name.begin(), e.name.end());
        }
        const auto cd_size = static_cast<std::uint32_t>(out.size()) - cd_offset;
        put32(out, 0x06054b50);
        put16(out, 0);
        put16(out, 0);
        put16(out, static_cast<std::uint32_t>(entries_.size()));
        put16(out, static_cast<std::uint32_t>(entries_.size()));
        put32(out, cd_size);
        put32(out, cd_offset);
        put16(out, 0);
        return out;
    }

private:
    struct Entry {
        std::string name;
        std::uint32_t crc = 0, size = 0, packed_size = 0, offset = 0;
        std::uint16_t method = 8;
    };
    int level_;
    Bytes out_;
    std::vector<Entry> entries_;
};

/// Reads every entry of an archive written by ZipWriter (or any plain
/// stored/deflated zip without zip64), verifying CRCs. Keeps central
/// directory order.
inline std::vector<std::pair<std::string, Bytes>> read_zip(ByteView zip) {
    using namespace zip_detail;
    if (zip.size() < 22) throw ParseError(0, "zip", "archive too small");
    std::size_t eocd = zip.size() - 22;
    while (true) {
        if (get32(zip.data() + eocd) == 0x06054b50) break;
        if (eocd == 0 || zip.size() - eocd > 22 + 0xFFFF) throw ParseError(0, "zip", "no end of central directory");
        --eocd;
    }
    const std::uint32_t count = get16(zip.data() + eocd + 10);
    std::size_t pos = get32(zip.data() + eocd + 16);
    std::vector<std::pair<std::string, Bytes>> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (pos + 46 > zip.size() || get32(zip.data() + pos) != 0x02014b50)
            throw ParseError(0, "zip", "bad central directory entry");
        const auto* p = zip.data() + pos;
        const std::uint32_t method = get16(p + 10);
        const std::uint32_t crc = get32(p + 16);
        const std::uint32_t packed = get32(p + 20);
        const std::uint32_t size = get32(p + 24);
        const std::uint32_t name_len = get16(p + 28);
        const std::uint32_t extra_len = get16(p + 30);
        const std::uint32_t comment_len = get16(p + 32);
        const std::uint32_t local = get32(p + 42);
        std::string name(reinterpret_cast<const char*>(p + 46), name_len);
        pos += 46 + name_len + extra_len + comment_len;

        if (local + 30 > zip.size()) throw ParseError(0, "zip", "bad local header offset");
        const auto* l = zip.data() + local;
        const std::size_t data_at = local + 30 + get16(l + 26) + get16(l + 28);
        if (data_at + packed > zip.size()) throw ParseError(0, "zip", "truncated entry " + name);
        if (method != 0 && method != 8) throw ParseError(0, "zip", "unsupported method in " + name);
        ByteView raw = zip.subspan(data_at, packed);
        Bytes data = method == 0 ? Bytes(raw.begin(), raw.end()) : inflate_raw(raw, size);
        if (crc32(data) != crc) throw ParseError(0, "zip", "crc mismatch in " + name);
        out.emplace_back(std::move(name), std::move(data));
    }
    return out;
}

}  // namespace heartbeatcam
