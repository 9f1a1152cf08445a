#include "apkrisk/zip.hpp"

#include <cstring>

#include <zlib.h>

#include "apkrisk/errors.hpp"

namespace apkrisk::zip {

namespace {

constexpr std::uint32_t kEocdSignature = 0x06054b50;
constexpr std::uint32_t kCentralSignature = 0x02014b50;
constexpr std::uint32_t kLocalSignature = 0x04034b50;
constexpr std::size_t kEocdMinSize = 22;
constexpr std::size_t kMaxCommentLength = 65535;

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Raw deflate stream -> expected_size bytes; nullopt on any stream error or
// size mismatch.
std::optional<std::vector<std::uint8_t>> inflate_raw(const std::uint8_t* data, std::size_t size,
                                                     std::size_t expected_size) {
    std::vector<std::uint8_t> out(expected_size);
    z_stream strm{};
    if (inflateInit2(&strm, -MAX_WBITS) != Z_OK) return std::nullopt;
    strm.next_in = const_cast<Bytef*>(data);
    strm.avail_in = static_cast<uInt>(size);
    strm.next_out = out.data();
    strm.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&strm, Z_FINISH);
    const bool ok = rc == Z_STREAM_END && strm.total_out == expected_size;
    inflateEnd(&strm);
    if (!ok) return std::nullopt;
    return out;
}

} // namespace

Archive Archive::parse(std::vector<std::uint8_t> bytes) {
    Archive ar;
    ar.bytes_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    const auto& buf = *ar.bytes_;

    if (buf.size() < kEocdMinSize) throw NotAnArchiveError("file too small to be a ZIP archive");

    // End-of-central-directory record: scan backwards through the comment
    // space for the signature.
    const std::size_t scan_floor =
        buf.size() > kEocdMinSize + kMaxCommentLength ? buf.size() - kEocdMinSize - kMaxCommentLength : 0;
    std::size_t eocd = buf.size(); // sentinel: not found
    for (std::size_t pos = buf.size() - kEocdMinSize + 1; pos-- > scan_floor;) {
        if (read_u32(buf.data() + pos) == kEocdSignature) {
            eocd = pos;
            break;
        }
    }
    if (eocd == buf.size()) throw NotAnArchiveError("no end-of-central-directory record");

    const std::uint16_t total_entries = read_u16(buf.data() + eocd + 10);
    const std::uint32_t cd_size = read_u32(buf.data() + eocd + 12);
    const std::uint32_t cd_offset = read_u32(buf.data() + eocd + 16);
    if (static_cast<std::uint64_t>(cd_offset) + cd_size > buf.size())
        throw NotAnArchiveError("central directory extends past end of file");

    std::size_t pos = cd_offset;
    const std::size_t cd_end = cd_offset + cd_size;
    ar.entries_.reserve(total_entries);
    for (std::uint16_t i = 0; i < total_entries; ++i) {
        if (pos + 46 > cd_end || read_u32(buf.data() + pos) != kCentralSignature)
            throw NotAnArchiveError("damaged central directory header");
        EntryRecord e;
        e.method = read_u16(buf.data() + pos + 10);
        e.dos_time = read_u16(buf.data() + pos + 12);
        e.dos_date = read_u16(buf.data() + pos + 14);
        e.crc32 = read_u32(buf.data() + pos + 16);
        e.compressed_size = read_u32(buf.data() + pos + 20);
        e.uncompressed_size = read_u32(buf.data() + pos + 24);
        const std::uint16_t name_len = read_u16(buf.data() + pos + 28);
        const std::uint16_t extra_len = read_u16(buf.data() + pos + 30);
        const std::uint16_t comment_len = read_u16(buf.data() + pos + 32);
        e.local_header_offset = read_u32(buf.data() + pos + 42);
        if (pos + 46 + name_len > cd_end) throw NotAnArchiveError("entry name extends past directory");
        e.name.assign(reinterpret_cast<const char*>(buf.data() + pos + 46), name_len);
        pos += 46 + static_cast<std::size_t>(name_len) + extra_len + comment_len;
        ar.entries_.push_back(std::move(e));
    }
    return ar;
}

std::optional<std::vector<std::uint8_t>> Archive::read_entry(std::size_t index) const {
    if (index >= entries_.size()) return std::nullopt;
    const EntryRecord& e = entries_[index];
    const auto& buf = *bytes_;

    // The local header repeats the name/extra fields with its own lengths;
    // the data starts after them.
    const std::size_t lh = e.local_header_offset;
    if (lh + 30 > buf.size() || read_u32(buf.data() + lh) != kLocalSignature) return std::nullopt;
    const std::uint16_t name_len = read_u16(buf.data() + lh + 26);
    const std::uint16_t extra_len = read_u16(buf.data() + lh + 28);
    const std::size_t data_start = lh + 30 + name_len + extra_len;
    if (data_start + e.compressed_size > buf.size()) return std::nullopt;

    std::vector<std::uint8_t> out;
    if (e.method == 0) {
        if (e.compressed_size != e.uncompressed_size) return std::nullopt;
        out.assign(buf.begin() + static_cast<std::ptrdiff_t>(data_start),
                   buf.begin() + static_cast<std::ptrdiff_t>(data_start + e.compressed_size));
    } else if (e.method == 8) {
        auto inflated = inflate_raw(buf.data() + data_start, e.compressed_size, e.uncompressed_size);
        if (!inflated) return std::nullopt;
        out = std::move(*inflated);
    } else {
        return std::nullopt; // unsupported compression method
    }

    const auto crc =
        ::crc32(::crc32(0L, Z_NULL, 0), out.data(), static_cast<uInt>(out.size()));
    if (static_cast<std::uint32_t>(crc) != e.crc32) return std::nullopt;
    return out;
}

std::optional<Date> Archive::entry_date(const EntryRecord& e) {
    Date d{1980 + (e.dos_date >> 9), static_cast<unsigned>((e.dos_date >> 5) & 0x0F),
           static_cast<unsigned>(e.dos_date & 0x1F)};
    if (!is_valid_date(d)) return std::nullopt;
    return d;
}

} // namespace apkrisk::zip
