#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "apkrisk/apk.hpp"
#include "apkrisk/cve_db.hpp"
#include "apkrisk/elf.hpp"
#include "apkrisk/fingerprint.hpp"
#include "apkrisk/report.hpp"

namespace apkrisk {

struct ScanConfig {
    std::filesystem::path signature_path;
    std::filesystem::path database_path;
    std::optional<std::string> abi_override; // scan this lib/<abi> instead of the preference list
    int min_string_len = kDefaultMinStringLength;
    bool strict_before = false;
    std::filesystem::path output_dir;
};

// Shared immutable inputs for one or many scans.
struct ScanContext {
    SignatureSet signatures;
    CveDatabase database;
    const SidecarTable* sidecar = nullptr; // optional
    std::optional<std::string> abi_override;
    int min_string_len = kDefaultMinStringLength;
    bool strict_before = false;
    std::string scan_timestamp; // empty -> now (or SOURCE_DATE_EPOCH)
};

// Current time, unless SOURCE_DATE_EPOCH is set (reproducible runs).
std::string resolve_scan_timestamp();

// Full pipeline for one APK: open, pick ABI, extract, analyze each ELF,
// associate products, query the database and score. Pure with respect to
// the context; distinct APKs can run fully in parallel.
AppReport scan_apk(const std::filesystem::path& apk_path, const ScanContext& ctx);

struct BatchSummary {
    int total_apps = 0;
    int with_native_code = 0;
    int failed = 0;
    std::vector<std::string> errors; // per-APK failures, batch continues
};

// Scans every *.apk under `dir` (sorted path order), writing one
// <sha256>.json report per app into `output_dir` plus a combined
// cve_log.tsv. Work is spread over `jobs` threads; output is independent of
// the processing order.
BatchSummary batch_scan(const std::filesystem::path& dir, const ScanContext& ctx,
                        const std::filesystem::path& output_dir, int jobs);

// CI gating: none/low -> 0, medium -> 2, high -> 3, critical -> 4.
int exit_code_for_risk(RiskLevel risk);

} // namespace apkrisk
