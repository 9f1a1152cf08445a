// apkrisk: find known-vulnerable native libraries in Android APKs and rate
// the risk they carry. Subcommands: build-db, scan, batch, stats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "CLI11.hpp"

#include "apkrisk/errors.hpp"
#include "apkrisk/report.hpp"
#include "apkrisk/scanner.hpp"

namespace fs = std::filesystem;
using namespace apkrisk;

namespace {

int cmd_build_db(const std::vector<std::string>& feeds, const std::string& signature_path,
                 const std::string& out_path, bool include_v2) {
    const SignatureSet sigs = load_signatures(signature_path);

    std::vector<CveRaw> records;
    for (const auto& feed : feeds) {
        FeedIngest ingest = ingest_feed(feed);
        for (const auto& skipped : ingest.skipped)
            std::cerr << "skipped [" << feed << "] " << skipped << "\n";
        records.insert(records.end(), std::make_move_iterator(ingest.records.begin()),
                       std::make_move_iterator(ingest.records.end()));
    }

    BuildOptions opts;
    opts.include_v2 = include_v2;
    BuildResult result = build_database(records, sigs, opts);
    for (const auto& line : result.log) std::cerr << line << "\n";

    save_database(result.db, out_path);

    std::map<std::string, std::size_t> counts;
    for (const auto& product : result.db.products()) counts[product] = 0;
    for (const auto& entry : result.db.entries) counts[entry.product] += 1;
    std::cout << "database: " << out_path << " (" << result.db.entries.size() << " entries, "
              << records.size() << " records ingested)\n";
    for (const auto& [product, count] : counts)
        std::cout << "  " << product << ": " << count << "\n";
    return 0;
}

ScanContext make_context(const std::string& signature_path, const std::string& database_path,
                         const std::string& sidecar_path, const std::string& abi,
                         int min_string_len, bool strict_before, SidecarTable& sidecar_storage) {
    ScanContext ctx;
    ctx.signatures = load_signatures(signature_path);
    ctx.database = load_database(database_path);
    if (!sidecar_path.empty()) {
        sidecar_storage = load_sidecar(sidecar_path);
        for (const auto& row : sidecar_storage.malformed_rows)
            std::cerr << "sidecar: malformed row skipped: " << row << "\n";
        ctx.sidecar = &sidecar_storage;
    }
    if (!abi.empty()) ctx.abi_override = abi;
    ctx.min_string_len = min_string_len;
    ctx.strict_before = strict_before;
    ctx.scan_timestamp = resolve_scan_timestamp();
    return ctx;
}

int cmd_scan(const std::string& apk_path, const ScanContext& ctx, const std::string& out_path) {
    const AppReport report = scan_apk(apk_path, ctx);
    for (const auto& warning : report.warnings) std::cerr << "warning: " << warning << "\n";

    const fs::path out = out_path.empty() ? fs::path(report.apk_id + ".json") : fs::path(out_path);
    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write report " + out.string());
    file << emit_app_report(report);
    if (!file) throw IoError("write error on report " + out.string());

    std::cout << report.apk_id << " app_risk=" << to_string(report.app_risk) << " report=" << out.string()
              << "\n";
    return exit_code_for_risk(report.app_risk);
}

int cmd_batch(const std::string& dir, const ScanContext& ctx, const std::string& output_dir,
              int jobs) {
    const BatchSummary summary = batch_scan(dir, ctx, output_dir, jobs);
    for (const auto& error : summary.errors) std::cerr << "failed: " << error << "\n";
    std::cout << "scanned " << summary.total_apps << " apps (" << summary.with_native_code << "/"
              << summary.total_apps << " with native code, " << summary.failed << " failed) -> "
              << output_dir << "\n";
    return 0;
}

int cmd_stats(const std::string& report_dir, const std::string& key, const std::string& out_path) {
    std::vector<AppReport> reports;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(report_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            reports.push_back(parse_app_report(text));
        } catch (const Error& e) {
            std::cerr << "skipped " << file.string() << ": " << e.what() << "\n";
        }
    }
    if (reports.empty()) {
        std::cerr << "no reports under " << report_dir << "\n";
        return 1;
    }

    const StatsTable table =
        aggregate_stats(reports, key == "market" ? StatsKey::market : StatsKey::year);
    const std::string csv = render_stats_csv(table);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write stats " + out_path);
    out << csv;
    if (!out) throw IoError("write error on stats " + out_path);
    std::cout << "stats (" << reports.size() << " reports, by " << key << ") -> " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Native library vulnerability scanner for Android APKs"};
    app.require_subcommand(1);

    // build-db
    auto* build = app.add_subcommand("build-db", "Build the CVE database from feed files");
    std::vector<std::string> feed_paths;
    std::string bd_signatures, bd_out = "cve.db";
    bool bd_include_v2 = false;
    build->add_option("feeds", feed_paths, "NVD JSON feeds or JSONL mirror files")
        ->required()
        ->check(CLI::ExistingFile);
    build->add_option("--signatures", bd_signatures, "Product signature file")
        ->required()
        ->check(CLI::ExistingFile);
    build->add_option("--out", bd_out, "Database output path");
    build->add_flag("--include-v2", bd_include_v2, "Admit records carrying only CVSS v2 subscores");

    // shared scan/batch options
    std::string signatures, database, sidecar, abi, scan_out;
    int min_string_len = kDefaultMinStringLength;
    bool strict_before = false;

    auto add_scan_options = [&](CLI::App* cmd) {
        cmd->add_option("--signatures", signatures, "Product signature file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--db", database, "CVE database file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--sidecar", sidecar, "Metadata CSV (sha256,dex_date,market)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--abi", abi, "Scan this lib/<abi> instead of the preference order");
        cmd->add_option("--min-string-len", min_string_len, "Minimum printable string length")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--strict-before", strict_before,
                      "Read qualifier-derived version bounds exclusively");
    };

    auto* scan = app.add_subcommand("scan", "Scan one APK and write its report");
    std::string scan_apk_path;
    scan->add_option("apk", scan_apk_path, "APK file")->required()->check(CLI::ExistingFile);
    add_scan_options(scan);
    scan->add_option("--out", scan_out, "Report path (default <sha256>.json)");

    auto* batch = app.add_subcommand("batch", "Scan a directory of APKs");
    std::string batch_dir, batch_out = "reports";
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    batch->add_option("dir", batch_dir, "Directory containing *.apk")
        ->required()
        ->check(CLI::ExistingDirectory);
    add_scan_options(batch);
    batch->add_option("--output-dir", batch_out, "Directory for reports and the CVE log");
    batch->add_option("--jobs", jobs, "Worker threads (default: available cores)")
        ->check(CLI::PositiveNumber);

    auto* stats = app.add_subcommand("stats", "Aggregate risk statistics over report files");
    std::string stats_dir, stats_key = "year", stats_out = "stats.csv";
    stats->add_option("report_dir", stats_dir, "Directory of per-app report JSON files")
        ->required()
        ->check(CLI::ExistingDirectory);
    stats->add_option("--key", stats_key, "Grouping key")
        ->check(CLI::IsMember({"year", "market"}));
    stats->add_option("--out", stats_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build_db(feed_paths, bd_signatures, bd_out, bd_include_v2);
        if (scan->parsed()) {
            SidecarTable sidecar_storage;
            const ScanContext ctx = make_context(signatures, database, sidecar, abi,
                                                 min_string_len, strict_before, sidecar_storage);
            return cmd_scan(scan_apk_path, ctx, scan_out);
        }
        if (batch->parsed()) {
            SidecarTable sidecar_storage;
            const ScanContext ctx = make_context(signatures, database, sidecar, abi,
                                                 min_string_len, strict_before, sidecar_storage);
            return cmd_batch(batch_dir, ctx, batch_out, jobs);
        }
        if (stats->parsed()) return cmd_stats(stats_dir, stats_key, stats_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
