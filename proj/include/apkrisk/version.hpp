#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apkrisk {

// Dotted library version: numeric segments plus an optional trailing
// alphanumeric suffix ("1.0.2k" -> segments {1,0,2}, suffix "k").
struct Version {
    std::vector<std::uint32_t> segments; // never empty for a parsed Version
    std::string suffix;                  // empty when absent

    bool operator==(const Version& other) const {
        return compare(*this, other) == std::strong_ordering::equal;
    }

    // Numeric segment-by-segment comparison, missing segments count as 0
    // (1.2 == 1.2.0). Equal segments fall through to the suffix: absent
    // orders lowest, otherwise plain lexicographic (1.0.2 < 1.0.2k < 1.0.2l).
    static std::strong_ordering compare(const Version& a, const Version& b);
};

inline std::strong_ordering compare_versions(const Version& a, const Version& b) {
    return Version::compare(a, b);
}

// Accepts "N", "N.M", "N.M.P...", an optional trailing suffix either glued
// ("1.0.2k") or dash-joined ("1.0.2-beta1"). Whole-string parse; anything
// else is nullopt.
std::optional<Version> parse_version(std::string_view text);

// Canonical text form; parse_version(render_version(v)) == v.
std::string render_version(const Version& v);

// Scans text starting at pos for a version token: digits with at least one
// dotted numeric segment ("1.6.37", "1.0.2k"), optionally suffixed. Single
// bare integers do not count — they are almost always years, CVE numbers or
// series placeholders, not library versions. Returns the token's [begin,end)
// range in text.
struct VersionTokenHit {
    std::size_t begin = 0;
    std::size_t end = 0;
    Version version;
};
std::optional<VersionTokenHit> find_version_token(std::string_view text, std::size_t pos = 0);

// Parses a version token starting exactly at `at` (same shape as
// find_version_token) without any boundary checks; for callers whose
// surrounding pattern already anchors the position ("Lavc{version}").
std::optional<VersionTokenHit> match_version_token_at(std::string_view text, std::size_t at);

} // namespace apkrisk
