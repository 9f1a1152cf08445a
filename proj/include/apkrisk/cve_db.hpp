#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apkrisk/date.hpp"
#include "apkrisk/fingerprint.hpp"
#include "apkrisk/version.hpp"

namespace apkrisk {

// Structured affected-version data some feeds carry next to the free-text
// description (NVD configurations). Preferred over description mining.
struct StructuredProduct {
    std::string name; // feed-side product token, matched against trackers/aliases
    std::vector<struct VersionConstraint> constraints;
};

enum class ConstraintRelation { at_most, exactly, at_least };

std::string_view to_string(ConstraintRelation r);
std::optional<ConstraintRelation> parse_relation(std::string_view s);

struct VersionConstraint {
    ConstraintRelation relation = ConstraintRelation::exactly;
    Version version;
    // True when the bound is known or suspected exclusive: inferred from a
    // before/after qualifier word, or structural *Excluding data. Strict
    // mode turns only these into exclusive bounds; the default reading is
    // inclusive throughout.
    bool from_qualifier = false;

    bool operator==(const VersionConstraint&) const = default;
};

// Membership of `v` under a single constraint; decided purely via version
// comparison. With strict=true, qualifier-derived at_most/at_least become
// exclusive.
bool constraint_admits(const VersionConstraint& c, const Version& v, bool strict = false);

// One raw feed record, before product fan-out.
struct CveRaw {
    std::string cve_id; // CVE-YYYY-NNNN+
    std::string description;
    Date published;
    std::optional<double> exploitability; // CVSS v3 subscore when present
    std::optional<double> impact;
    std::optional<double> v2_exploitability; // v2 fallbacks, used only on request
    std::optional<double> v2_impact;
    std::vector<StructuredProduct> listed_products;
    std::vector<std::string> curated_functions; // mirror-format override, reviewed by hand
    bool has_v3 = false;
};

bool is_valid_cve_id(std::string_view id);

struct FeedIngest {
    std::vector<CveRaw> records;
    std::vector<std::string> skipped; // per-record log entries for malformed items
};

// Reads an NVD JSON feed dump ("CVE_Items") or the simplified JSONL mirror
// (one object per line: cve_id, description, published, exploitability,
// impact, optional products[], optional functions[]). Gzipped feeds are
// transparently inflated. Throws UnrecognizedFeedFormatError / IoError.
FeedIngest ingest_feed(const std::filesystem::path& path);
FeedIngest ingest_feed_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin);

// Case-insensitive whole-word search of each tracked product name (plus
// aliases) in the description; hyphenated compounds count as single words,
// so "libpng-like" does not hit "libpng".
std::vector<std::string> detect_product(std::string_view description, const SignatureSet& sigs);

// Mines version constraints from a description: every version token gets a
// relation from the nearest qualifier word that binds it within a window of
// 5 words on each side (before, prior, earlier, through, until, below ->
// at_most; after, following, successive, since, above -> at_least; no
// qualifier -> exactly). Before-class words bind the next version token,
// after-class words the previous one, each falling back to the other
// direction when their side has none ("1.6.37 and earlier", "since 2.8").
// Series placeholders ("3.0.x") are skipped. Bounds read inclusively.
std::vector<VersionConstraint> extract_version_constraint(std::string_view description);

// Mines vulnerable function names: tokens carrying an underscore, "::" or a
// trailing "()", or camelCase words of >= 2 humps. Trailing "()" and
// punctuation are stripped; duplicates removed.
std::vector<std::string> extract_function_names(std::string_view description);

enum class ConstraintSource { none, feed, description };

struct CveEntry {
    std::string cve_id;
    std::string product; // canonical tracked name
    std::vector<VersionConstraint> constraints; // OR semantics; empty = whole product
    std::vector<std::string> functions;
    Date published;
    std::optional<double> exploitability;
    std::optional<double> impact;
    std::string cvss_source;         // "v3" or "v2"
    ConstraintSource constraint_source = ConstraintSource::none;
    bool needs_review = false; // opposite-direction bounds mined from one description

    bool operator==(const CveEntry&) const = default;
};

// True when the constraints admit `version` (an empty list always admits).
bool entry_admits(const CveEntry& entry, const Version& version, bool strict = false);

struct BuildOptions {
    bool include_v2 = false; // admit records carrying only CVSS v2 subscores
};

struct CveDatabase {
    std::vector<CveEntry> entries; // sorted by (cve_id, product)
    std::string built_at;          // UTC build time; honors SOURCE_DATE_EPOCH
    std::string feed_digest;       // content digest of the ingested feed data
    std::map<std::string, std::vector<std::size_t>> product_index;

    std::vector<std::string> products() const;
};

struct BuildResult {
    CveDatabase db;
    std::vector<std::string> log; // exclusions and provenance notes, never fatal
};

// Fans each raw record out to one entry per detected tracked product.
// Structured feed data wins over description mining when both exist (the
// log records which source won). Records with no usable subscore pair are
// excluded and logged.
BuildResult build_database(const std::vector<CveRaw>& raw, const SignatureSet& sigs,
                           const BuildOptions& opts = {});

// Entries whose constraints admit the version; with no version, every entry
// for the product (the caller could not pin a version, all candidates
// apply). Throws UnknownProductError for untracked products.
std::vector<CveEntry> query(const CveDatabase& db, const std::string& product,
                            const std::optional<Version>& version, bool strict = false);

// On-disk form: one JSON header line (schema, products, feed digest, build
// time), then one JSON object per entry. Identical input and build time give
// identical bytes; set SOURCE_DATE_EPOCH for fully reproducible files.
std::string serialize_database(const CveDatabase& db);
CveDatabase load_database(const std::filesystem::path& path);
CveDatabase parse_database(std::string_view text);
void save_database(const CveDatabase& db, const std::filesystem::path& path);

} // namespace apkrisk
