#include "apkrisk/report.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

using nlohmann::json;

json version_or_null(const std::optional<Version>& v) {
    if (!v) return nullptr;
    return render_version(*v);
}

std::string_view to_string(MatchStream via) {
    switch (via) {
    case MatchStream::strings: return "strings";
    case MatchStream::functions: return "functions";
    case MatchStream::both: return "both";
    }
    return "strings";
}

std::string_view to_string(ReleaseDateSource source) {
    switch (source) {
    case ReleaseDateSource::none: return "none";
    case ReleaseDateSource::sidecar: return "sidecar";
    case ReleaseDateSource::zip_mtime: return "zip_mtime";
    }
    return "none";
}

std::optional<SeverityClass> parse_severity(std::string_view s) {
    if (s == "LOW") return SeverityClass::low;
    if (s == "MEDIUM") return SeverityClass::medium;
    if (s == "HIGH") return SeverityClass::high;
    if (s == "CRITICAL") return SeverityClass::critical;
    return std::nullopt;
}

std::optional<VulnLevel> parse_vuln_level(std::string_view s) {
    if (s == "NONE") return VulnLevel::none;
    if (s == "LOW") return VulnLevel::low;
    if (s == "MEDIUM") return VulnLevel::medium;
    if (s == "HIGH") return VulnLevel::high;
    if (s == "CRITICAL") return VulnLevel::critical;
    return std::nullopt;
}

} // namespace

std::string emit_app_report(const AppReport& report) {
    json j;
    j["apk_id"] = report.apk_id;
    j["app_risk"] = std::string(to_string(report.app_risk));
    j["scan_timestamp"] = report.scan_timestamp;
    j["schema"] = kReportSchemaVersion;
    j["warnings"] = report.warnings;

    json metadata;
    metadata["date_source"] = std::string(to_string(report.metadata.date_source));
    metadata["market"] = report.metadata.market ? json(*report.metadata.market) : json(nullptr);
    metadata["release_date"] =
        report.metadata.release_date ? json(format_iso_date(*report.metadata.release_date)) : json(nullptr);
    j["metadata"] = std::move(metadata);

    json libraries = json::array();
    for (const auto& lib : report.libraries) {
        json jl;
        jl["archive_path"] = lib.archive_path;
        jl["library_name"] = lib.library_name;
        jl["library_risk"] = std::string(to_string(lib.library_risk));
        jl["stripped"] = lib.stripped;

        json products = json::array();
        for (const auto& p : lib.products) {
            json jp;
            jp["product"] = p.product;
            jp["version"] = version_or_null(p.version);
            jp["via"] = std::string(to_string(p.via));
            json evidence = json::array();
            for (const auto& hit : p.evidence) {
                json je;
                je["matched_text"] = hit.matched_text;
                je["pattern"] = hit.pattern;
                evidence.push_back(std::move(je));
            }
            jp["evidence"] = std::move(evidence);
            products.push_back(std::move(jp));
        }
        jl["products"] = std::move(products);

        json findings = json::array();
        for (const auto& f : lib.findings) {
            json jf;
            jf["cve_id"] = f.cve_id;
            jf["product"] = f.product;
            jf["rationale"] = f.rationale;
            jf["risk"] = f.risk ? json(std::string(to_string(*f.risk))) : json(nullptr);
            jf["severity"] = f.severity ? json(std::string(to_string(*f.severity))) : json(nullptr);
            jf["unscored"] = f.unscored;
            jf["vuln_level"] = std::string(to_string(f.vuln_level));
            findings.push_back(std::move(jf));
        }
        jl["findings"] = std::move(findings);
        libraries.push_back(std::move(jl));
    }
    j["libraries"] = std::move(libraries);

    return j.dump(2) + "\n";
}

AppReport parse_app_report(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("report is not valid JSON");
    if (j.value("schema", 0) != kReportSchemaVersion) throw Error("unsupported report schema");

    AppReport report;
    report.apk_id = j.value("apk_id", std::string());
    report.scan_timestamp = j.value("scan_timestamp", std::string());
    if (auto risk = parse_risk_level(j.value("app_risk", std::string())))
        report.app_risk = *risk;
    if (auto w = j.find("warnings"); w != j.end() && w->is_array())
        for (const auto& s : *w)
            if (s.is_string()) report.warnings.push_back(s.get<std::string>());

    report.metadata.apk_id = report.apk_id;
    if (auto meta = j.find("metadata"); meta != j.end() && meta->is_object()) {
        const std::string source = meta->value("date_source", "none");
        report.metadata.date_source = source == "sidecar"     ? ReleaseDateSource::sidecar
                                      : source == "zip_mtime" ? ReleaseDateSource::zip_mtime
                                                              : ReleaseDateSource::none;
        if (auto m = meta->find("market"); m != meta->end() && m->is_string())
            report.metadata.market = m->get<std::string>();
        if (auto d = meta->find("release_date"); d != meta->end() && d->is_string())
            report.metadata.release_date = parse_iso_date(d->get<std::string>());
    }

    if (auto libs = j.find("libraries"); libs != j.end() && libs->is_array()) {
        for (const auto& jl : *libs) {
            LibraryFinding lib;
            lib.archive_path = jl.value("archive_path", std::string());
            lib.library_name = jl.value("library_name", std::string());
            lib.stripped = jl.value("stripped", false);
            if (auto risk = parse_risk_level(jl.value("library_risk", std::string())))
                lib.library_risk = *risk;

            if (auto ps = jl.find("products"); ps != jl.end() && ps->is_array()) {
                for (const auto& jp : *ps) {
                    ProductMatch p;
                    p.product = jp.value("product", std::string());
                    if (auto v = jp.find("version"); v != jp.end() && v->is_string())
                        p.version = parse_version(v->get<std::string>());
                    const std::string via = jp.value("via", "strings");
                    p.via = via == "functions" ? MatchStream::functions
                            : via == "both"    ? MatchStream::both
                                               : MatchStream::strings;
                    if (auto ev = jp.find("evidence"); ev != jp.end() && ev->is_array())
                        for (const auto& je : *ev)
                            p.evidence.push_back({je.value("pattern", std::string()),
                                                  je.value("matched_text", std::string())});
                    lib.products.push_back(std::move(p));
                }
            }
            if (auto fs = jl.find("findings"); fs != jl.end() && fs->is_array()) {
                for (const auto& jf : *fs) {
                    CveFinding f;
                    f.cve_id = jf.value("cve_id", std::string());
                    f.product = jf.value("product", std::string());
                    f.rationale = jf.value("rationale", std::string());
                    f.unscored = jf.value("unscored", false);
                    if (auto v = parse_vuln_level(jf.value("vuln_level", std::string())))
                        f.vuln_level = *v;
                    if (auto s = jf.find("severity"); s != jf.end() && s->is_string())
                        f.severity = parse_severity(s->get<std::string>());
                    if (auto r = jf.find("risk"); r != jf.end() && r->is_string())
                        f.risk = parse_risk_level(r->get<std::string>());
                    lib.findings.push_back(std::move(f));
                }
            }
            report.libraries.push_back(std::move(lib));
        }
    }
    return report;
}

std::string emit_cve_log(const std::vector<AppReport>& reports) {
    struct Row {
        std::string apk_id, library, cve_id, vuln, risk;
    };
    std::vector<Row> rows;
    for (const auto& report : reports)
        for (const auto& lib : report.libraries)
            for (const auto& f : lib.findings)
                rows.push_back({report.apk_id, lib.library_name, f.cve_id,
                                std::string(to_string(f.vuln_level)),
                                f.risk ? std::string(to_string(*f.risk)) : "UNSCORED"});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.apk_id, a.library, a.cve_id) < std::tie(b.apk_id, b.library, b.cve_id);
    });
    std::string out;
    for (const auto& r : rows) {
        out += r.apk_id;
        out += '\t';
        out += r.library;
        out += '\t';
        out += r.cve_id;
        out += '\t';
        out += r.vuln;
        out += '\t';
        out += r.risk;
        out += '\n';
    }
    return out;
}

StatsTable aggregate_stats(const std::vector<AppReport>& reports, StatsKey key) {
    StatsTable table;
    table.key = key;
    for (const auto& report : reports) {
        std::string group = "unknown";
        if (key == StatsKey::year) {
            if (report.metadata.release_date)
                group = std::to_string(report.metadata.release_date->year);
        } else {
            if (report.metadata.market && !report.metadata.market->empty())
                group = *report.metadata.market;
        }
        table.rows[group][report.app_risk] += 1;
    }
    return table;
}

std::string render_stats_csv(const StatsTable& table) {
    std::string out = "key,none,low,medium,high,critical\n";
    for (const auto& [group, counts] : table.rows) {
        out += group;
        for (RiskLevel level : {RiskLevel::none, RiskLevel::low, RiskLevel::medium,
                                RiskLevel::high, RiskLevel::critical}) {
            auto it = counts.find(level);
            out += ',';
            out += std::to_string(it == counts.end() ? 0 : it->second);
        }
        out += '\n';
    }
    return out;
}

} // namespace apkrisk
