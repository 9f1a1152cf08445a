#include "apkrisk/apk.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw Error("out of memory hashing APK");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest.data(), &digest_len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-256 computation failed");

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

// lib/<abi>/<file>.so -> abi; nullopt for anything else.
std::optional<std::string> abi_of_entry(const std::string& name) {
    if (name.rfind("lib/", 0) != 0) return std::nullopt;
    const auto second = name.find('/', 4);
    if (second == std::string::npos || second == 4) return std::nullopt;
    const auto rest = name.substr(second + 1);
    if (rest.empty() || rest.find('/') != std::string::npos) return std::nullopt;
    if (rest.size() < 3 || rest.compare(rest.size() - 3, 3, ".so") != 0) return std::nullopt;
    return name.substr(4, second - 4);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool is_hex_digest(const std::string& s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

} // namespace

ApkPackage open_apk(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read error on " + path.string());

    ApkPackage apk;
    apk.path = path;
    apk.sha256 = sha256_hex(bytes);
    apk.archive = zip::Archive::parse(std::move(bytes));
    apk.entries.reserve(apk.archive.entries().size());
    for (const auto& e : apk.archive.entries())
        apk.entries.emplace_back(e.name, e.uncompressed_size);
    return apk;
}

std::set<std::string> available_abis(const ApkPackage& apk) {
    std::set<std::string> abis;
    for (const auto& [name, size] : apk.entries)
        if (auto abi = abi_of_entry(name)) abis.insert(*abi);
    return abis;
}

std::optional<std::string> select_abi(const std::set<std::string>& available) {
    for (const char* abi : {"armeabi-v7a", "arm64-v8a", "x86_64"})
        if (available.count(abi)) return std::string(abi);
    return std::nullopt;
}

ExtractedLibraries extract_native_libraries(const ApkPackage& apk, const std::string& abi) {
    ExtractedLibraries out;
    const auto& entries = apk.archive.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto entry_abi = abi_of_entry(entries[i].name);
        if (!entry_abi || *entry_abi != abi) continue;
        auto data = apk.archive.read_entry(i);
        if (!data) {
            out.corrupt.push_back({entries[i].name, "damaged or unsupported archive entry"});
            continue;
        }
        out.blobs.push_back({entries[i].name, abi, std::move(*data)});
    }
    return out;
}

SidecarTable load_sidecar(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open sidecar " + csv_path.string());

    SidecarTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            // Header row is fixed; anything else means the wrong file.
            auto fields = split_csv_line(line);
            if (fields.size() != 3 || fields[0] != "sha256" || fields[1] != "dex_date" ||
                fields[2] != "market")
                throw IoError("sidecar " + csv_path.string() +
                              " missing `sha256,dex_date,market` header");
            continue;
        }
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3 || !is_hex_digest(fields[0])) {
            table.malformed_rows.push_back(line);
            continue;
        }
        SidecarRow row;
        if (!fields[1].empty()) {
            auto date = parse_iso_date(fields[1]);
            if (!date) {
                table.malformed_rows.push_back(line);
                continue;
            }
            row.release_date = date;
        }
        if (!fields[2].empty()) row.market = fields[2];
        table.rows[fields[0]] = std::move(row);
    }
    return table;
}

AppMetadata load_metadata(const ApkPackage& apk, const SidecarTable* sidecar, const Date& today) {
    AppMetadata meta;
    meta.apk_id = apk.sha256;

    if (sidecar != nullptr) {
        auto it = sidecar->rows.find(apk.sha256);
        if (it != sidecar->rows.end()) {
            if (it->second.release_date && !(*it->second.release_date > today)) {
                meta.release_date = it->second.release_date;
                meta.date_source = ReleaseDateSource::sidecar;
            }
            meta.market = it->second.market;
        }
    }
    if (meta.release_date) return meta;

    // Fallback: newest entry timestamp from the archive itself.
    std::optional<Date> newest;
    for (const auto& e : apk.archive.entries()) {
        auto d = zip::Archive::entry_date(e);
        if (!d || *d > today) continue;
        if (!newest || *d > *newest) newest = d;
    }
    if (newest) {
        meta.release_date = newest;
        meta.date_source = ReleaseDateSource::zip_mtime;
    }
    return meta;
}

} // namespace apkrisk
