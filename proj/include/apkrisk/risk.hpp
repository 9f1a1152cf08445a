#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "apkrisk/apk.hpp"
#include "apkrisk/cve_db.hpp"
#include "apkrisk/version.hpp"

namespace apkrisk {

// Evidence strength for one CVE against one library. Totally ordered.
enum class VulnLevel { none = 0, low, medium, high, critical };

// Qualitative class of the threat*impact product. Totally ordered; produced
// only by the severity mapping.
enum class SeverityClass { low = 0, medium, high, critical };

// Final qualitative risk. none is reserved for ELFs matching no tracked
// product (and apps without native code); the matrix itself outputs
// low..critical.
enum class RiskLevel { none = 0, low, medium, high, critical };

std::string_view to_string(VulnLevel v);
std::string_view to_string(SeverityClass s);
std::string_view to_string(RiskLevel r);
std::optional<RiskLevel> parse_risk_level(std::string_view s);

// What matching and version extraction produced for one library/product pair.
struct LibraryEvidence {
    std::string product;
    bool version_found = false;
    std::optional<Version> version; // present iff version_found
    std::set<std::string> matched_functions; // the ELF's defined function names
    bool stripped = false;
};

// Outcome of the evidence classification. The medium rule needs the app's
// release date; when it is missing on that path the level is downgraded to
// low and the flag is set so callers can log it.
struct VulnClassification {
    VulnLevel level = VulnLevel::low;
    bool missing_release_date = false;
};

inline constexpr int kPatchLagWindowDays = 730; // two years

// Evidence rules, strongest first:
//  critical — version found, admitted by the entry, and one of the entry's
//             functions is present among the ELF's symbols;
//  high     — version found and admitted, but no function confirmation
//             (symbol absent, entry lists none, or binary stripped);
//  medium   — no version (stripped/sanitized binary) but a listed function
//             is present and |release - published| < two years;
//  low      — product matched but this entry is not implicated.
// none is never produced here; it is the scan-level outcome for unmatched
// ELFs.
VulnClassification classify_vulnerability_level(const LibraryEvidence& ev, const CveEntry& entry,
                                                const AppMetadata& meta, bool strict = false);

// threat * impact, both CVSS subscores in [0,10]; result in [0,100].
// Throws std::out_of_range outside the domain.
double threat_impact_product(double threat, double impact);

// [90,100] critical, [70,90) high, [40,70) medium, [0,40) low.
// Throws std::out_of_range outside [0,100].
SeverityClass qualitative_severity(double score);

// The 4x5 risk matrix, severity row by vulnerability column.
RiskLevel risk_matrix_lookup(SeverityClass sev, VulnLevel vuln);

struct CveFinding {
    std::string cve_id;
    std::string product;
    VulnLevel vuln_level = VulnLevel::low;
    std::optional<SeverityClass> severity; // absent on unscored findings
    std::optional<RiskLevel> risk;
    bool unscored = false; // entry lacked a CVSS subscore pair
    std::string rationale; // every intermediate, hand-checkable
};

// Full chain for one entry: classification, threat*impact, severity mapping,
// matrix lookup. Entries missing a subscore yield an unscored finding with
// the vulnerability level only.
CveFinding score_cve(const LibraryEvidence& ev, const CveEntry& entry, const AppMetadata& meta,
                     bool strict = false);

// Highest risk over the findings. With none scored: low when the library
// matched a tracked product (matched but unimplicated), none otherwise.
RiskLevel library_risk(const std::vector<CveFinding>& findings, bool product_matched);

// Highest risk over the libraries; empty means no native code -> none.
RiskLevel app_risk(const std::vector<RiskLevel>& library_risks);

} // namespace apkrisk
