#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apkrisk/date.hpp"

namespace apkrisk::zip {

struct EntryRecord {
    std::string name;
    std::uint16_t method = 0; // 0 = stored, 8 = deflate
    std::uint32_t compressed_size = 0;
    std::uint32_t uncompressed_size = 0;
    std::uint32_t crc32 = 0;
    std::uint32_t local_header_offset = 0;
    std::uint16_t dos_time = 0;
    std::uint16_t dos_date = 0;
};

// Read-only ZIP archive backed by an in-memory copy of the file.
// Listing comes from the central directory; entry data is inflated on
// demand, never eagerly.
class Archive {
public:
    // Parses the central directory of `bytes`. Throws NotAnArchiveError
    // when there is no usable end-of-central-directory record or the
    // directory is inconsistent with the file.
    static Archive parse(std::vector<std::uint8_t> bytes);

    const std::vector<EntryRecord>& entries() const { return entries_; }
    const std::vector<std::uint8_t>& bytes() const { return *bytes_; }

    // Decompressed content of entries()[index]. Returns nullopt when the
    // entry is damaged (bad local header, truncated or invalid stream,
    // CRC mismatch) — callers record and move on.
    std::optional<std::vector<std::uint8_t>> read_entry(std::size_t index) const;

    // Entry modification timestamp (DOS time, local) as a calendar date.
    static std::optional<Date> entry_date(const EntryRecord& e);

private:
    std::shared_ptr<const std::vector<std::uint8_t>> bytes_;
    std::vector<EntryRecord> entries_;
};

} // namespace apkrisk::zip
