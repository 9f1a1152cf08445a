#pragma once

#include <map>
#include <string>
#include <vector>

#include "apkrisk/apk.hpp"
#include "apkrisk/fingerprint.hpp"
#include "apkrisk/risk.hpp"

namespace apkrisk {

struct LibraryFinding {
    std::string library_name; // archive file name
    std::string archive_path;
    std::vector<ProductMatch> products;
    std::vector<CveFinding> findings;
    RiskLevel library_risk = RiskLevel::none;
    bool stripped = false;
};

struct AppReport {
    std::string apk_id;
    AppMetadata metadata;
    std::vector<LibraryFinding> libraries;
    RiskLevel app_risk = RiskLevel::none;
    std::string scan_timestamp; // ISO-8601; honors SOURCE_DATE_EPOCH
    std::vector<std::string> warnings; // corrupt entries, unreadable ELFs, downgrades
};

inline constexpr int kReportSchemaVersion = 1;

// Canonical JSON: alphabetically ordered keys, two-space indent, trailing
// newline. Identical reports serialize to identical bytes.
std::string emit_app_report(const AppReport& report);

// Inverse of emit_app_report for the fields the report format defines.
AppReport parse_app_report(std::string_view json_text);

// One tab-separated line per finding:
// apk_id  library  cve_id  vuln_level  risk
// sorted by apk_id, then library, then cve_id.
std::string emit_cve_log(const std::vector<AppReport>& reports);

enum class StatsKey { year, market };

// Counts apps (not libraries) per group per risk level. Apps missing the
// needed metadata land in "unknown".
struct StatsTable {
    StatsKey key = StatsKey::year;
    std::map<std::string, std::map<RiskLevel, int>> rows;
};

StatsTable aggregate_stats(const std::vector<AppReport>& reports, StatsKey key);

// CSV with header `key,none,low,medium,high,critical`, rows sorted by key.
std::string render_stats_csv(const StatsTable& table);

} // namespace apkrisk
