#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apkrisk/date.hpp"
#include "apkrisk/zip.hpp"

namespace apkrisk {

// Opened APK: archive listing plus the file digest that identifies the app.
struct ApkPackage {
    std::filesystem::path path;
    std::vector<std::pair<std::string, std::uint64_t>> entries; // (archive path, byte length)
    std::string sha256;                                         // 64 lowercase hex chars
    zip::Archive archive;                                       // backing archive, read-only
};

enum class ReleaseDateSource { none, sidecar, zip_mtime };

struct AppMetadata {
    std::string apk_id; // sha256 of the APK file
    std::optional<Date> release_date;
    std::optional<std::string> market;
    // zip_mtime dates come from the newest archive entry timestamp and are
    // low-confidence.
    ReleaseDateSource date_source = ReleaseDateSource::none;
};

struct NativeLibraryBlob {
    std::string archive_path; // lib/<abi>/<name>.so
    std::string abi;
    std::vector<std::uint8_t> bytes;

    std::string file_name() const {
        auto slash = archive_path.rfind('/');
        return slash == std::string::npos ? archive_path : archive_path.substr(slash + 1);
    }
};

struct CorruptEntry {
    std::string archive_path;
    std::string reason;
};

struct ExtractedLibraries {
    std::vector<NativeLibraryBlob> blobs; // archive order
    std::vector<CorruptEntry> corrupt;    // skipped, never fatal
};

// Opens the archive, lists entries and digests the file. Throws
// NotAnArchiveError / IoError. Entry data stays compressed until
// extract_native_libraries asks for it.
ApkPackage open_apk(const std::filesystem::path& path);

// ABI directory names present under lib/ in the archive.
std::set<std::string> available_abis(const ApkPackage& apk);

// First present ABI in the fixed preference order
// armeabi-v7a, arm64-v8a, x86_64; nullopt when none of the three is there.
std::optional<std::string> select_abi(const std::set<std::string>& available);

// Decompresses every lib/<abi>/*.so entry, archive order. Damaged entries
// are skipped and recorded.
ExtractedLibraries extract_native_libraries(const ApkPackage& apk, const std::string& abi);

// Sidecar metadata table: CSV `sha256,dex_date,market`, rows keyed by digest.
struct SidecarRow {
    std::optional<Date> release_date;
    std::optional<std::string> market;
};

struct SidecarTable {
    std::map<std::string, SidecarRow> rows;
    std::vector<std::string> malformed_rows; // recorded, skipped
};

SidecarTable load_sidecar(const std::filesystem::path& csv_path);

// Fills release date / market from the sidecar when it has the APK's digest.
// Without a sidecar hit the release date falls back to the newest archive
// entry timestamp (flagged zip_mtime). Dates in the future relative to
// `today` are rejected as malformed.
AppMetadata load_metadata(const ApkPackage& apk, const SidecarTable* sidecar, const Date& today);

} // namespace apkrisk
