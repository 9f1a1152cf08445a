#include "apkrisk/scanner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "apkrisk/elf.hpp"
#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

std::string join(const std::set<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += ", ";
        out += item;
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write error on " + path.string());
}

} // namespace

std::string resolve_scan_timestamp() { return utc_timestamp_now(); }

AppReport scan_apk(const std::filesystem::path& apk_path, const ScanContext& ctx) {
    const ApkPackage apk = open_apk(apk_path);

    AppReport report;
    report.apk_id = apk.sha256;
    report.metadata = load_metadata(apk, ctx.sidecar, today_utc());
    report.scan_timestamp = ctx.scan_timestamp.empty() ? resolve_scan_timestamp() : ctx.scan_timestamp;

    const std::set<std::string> abis = available_abis(apk);
    std::optional<std::string> abi = ctx.abi_override ? ctx.abi_override : select_abi(abis);
    if (!abi) {
        if (!abis.empty())
            report.warnings.push_back("unsupported-abi-only: native code for " + join(abis));
        report.app_risk = RiskLevel::none;
        return report;
    }

    const ExtractedLibraries extracted = extract_native_libraries(apk, *abi);
    for (const auto& corrupt : extracted.corrupt)
        report.warnings.push_back("corrupt-entry: " + corrupt.archive_path + " (" + corrupt.reason +
                                  ")");

    bool downgraded_without_date = false;
    std::vector<RiskLevel> library_risks;
    for (const auto& blob : extracted.blobs) {
        ElfArtifact artifact;
        try {
            artifact = parse_elf(blob.bytes, ctx.min_string_len);
        } catch (const NotAnElfError& e) {
            report.warnings.push_back("unreadable-elf: " + blob.archive_path + " (" +
                                      e.what() + ")");
            continue;
        } catch (const MalformedElfError& e) {
            report.warnings.push_back("unreadable-elf: " + blob.archive_path + " (" +
                                      e.what() + ")");
            continue;
        }

        LibraryFinding lib;
        lib.library_name = blob.file_name();
        lib.archive_path = blob.archive_path;
        lib.stripped = artifact.stripped;
        lib.products = match_products(artifact.strings, artifact.functions, ctx.signatures);

        const std::set<std::string> function_set(artifact.functions.begin(),
                                                 artifact.functions.end());
        for (const auto& match : lib.products) {
            LibraryEvidence ev;
            ev.product = match.product;
            ev.version_found = match.version.has_value();
            ev.version = match.version;
            ev.matched_functions = function_set;
            ev.stripped = artifact.stripped;

            std::vector<CveEntry> entries;
            try {
                entries = query(ctx.database, match.product, std::nullopt);
            } catch (const UnknownProductError&) {
                report.warnings.push_back("product-not-in-database: " + match.product);
                continue;
            }
            for (const auto& entry : entries) {
                CveFinding finding = score_cve(ev, entry, report.metadata, ctx.strict_before);
                if (!report.metadata.release_date &&
                    finding.rationale.find("release_date=missing") != std::string::npos)
                    downgraded_without_date = true;
                lib.findings.push_back(std::move(finding));
            }
        }

        lib.library_risk = library_risk(lib.findings, !lib.products.empty());
        library_risks.push_back(lib.library_risk);
        report.libraries.push_back(std::move(lib));
    }

    if (downgraded_without_date)
        report.warnings.push_back(
            "missing-release-date: patch-lag checks fell back to the low level");
    report.app_risk = app_risk(library_risks);
    return report;
}

BatchSummary batch_scan(const std::filesystem::path& dir, const ScanContext& ctx,
                        const std::filesystem::path& output_dir, int jobs) {
    std::vector<std::filesystem::path> apks;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".apk")
            apks.push_back(entry.path());
    std::sort(apks.begin(), apks.end());

    std::filesystem::create_directories(output_dir);

    BatchSummary summary;
    summary.total_apps = static_cast<int>(apks.size());

    std::vector<std::optional<AppReport>> reports(apks.size());
    std::mutex error_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t index = next.fetch_add(1);
            if (index >= apks.size()) return;
            try {
                reports[index] = scan_apk(apks[index], ctx);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                summary.errors.push_back(apks[index].string() + ": " + e.what());
            }
        }
    };

    const int thread_count = std::max(1, jobs);
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(thread_count));
        for (int i = 0; i < thread_count; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<AppReport> succeeded;
    for (auto& r : reports) {
        if (!r) continue;
        const bool has_native =
            !r->libraries.empty() ||
            std::any_of(r->warnings.begin(), r->warnings.end(), [](const std::string& w) {
                return w.rfind("unsupported-abi-only:", 0) == 0 || w.rfind("corrupt-entry:", 0) == 0 ||
                       w.rfind("unreadable-elf:", 0) == 0;
            });
        if (has_native) ++summary.with_native_code;
        write_file(output_dir / (r->apk_id + ".json"), emit_app_report(*r));
        succeeded.push_back(std::move(*r));
    }
    summary.failed = static_cast<int>(summary.errors.size());

    write_file(output_dir / "cve_log.tsv", emit_cve_log(succeeded));
    return summary;
}

int exit_code_for_risk(RiskLevel risk) {
    switch (risk) {
    case RiskLevel::none:
    case RiskLevel::low: return 0;
    case RiskLevel::medium: return 2;
    case RiskLevel::high: return 3;
    case RiskLevel::critical: return 4;
    }
    return 0;
}

} // namespace apkrisk
