#include "apkrisk/risk.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace apkrisk {

namespace {

// Threat*impact score bands, inclusive edges as documented: the lower edge
// belongs to the band above it.
constexpr double kCriticalFloor = 90.0;
constexpr double kHighFloor = 70.0;
constexpr double kMediumFloor = 40.0;

// Risk matrix, severity row (low..critical) by vulnerability column
// (none..critical).
constexpr RiskLevel kRiskMatrix[4][5] = {
    // none             low               medium            high              critical
    {RiskLevel::low,    RiskLevel::low,    RiskLevel::medium, RiskLevel::medium, RiskLevel::high},
    {RiskLevel::low,    RiskLevel::medium, RiskLevel::medium, RiskLevel::high,   RiskLevel::high},
    {RiskLevel::medium, RiskLevel::medium, RiskLevel::high,   RiskLevel::high,   RiskLevel::critical},
    {RiskLevel::medium, RiskLevel::high,   RiskLevel::high,   RiskLevel::critical, RiskLevel::critical},
};

std::string format_score(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", value);
    return buf;
}

} // namespace

std::string_view to_string(VulnLevel v) {
    switch (v) {
    case VulnLevel::none: return "NONE";
    case VulnLevel::low: return "LOW";
    case VulnLevel::medium: return "MEDIUM";
    case VulnLevel::high: return "HIGH";
    case VulnLevel::critical: return "CRITICAL";
    }
    return "NONE";
}

std::string_view to_string(SeverityClass s) {
    switch (s) {
    case SeverityClass::low: return "LOW";
    case SeverityClass::medium: return "MEDIUM";
    case SeverityClass::high: return "HIGH";
    case SeverityClass::critical: return "CRITICAL";
    }
    return "LOW";
}

std::string_view to_string(RiskLevel r) {
    switch (r) {
    case RiskLevel::none: return "NONE";
    case RiskLevel::low: return "LOW";
    case RiskLevel::medium: return "MEDIUM";
    case RiskLevel::high: return "HIGH";
    case RiskLevel::critical: return "CRITICAL";
    }
    return "NONE";
}

std::optional<RiskLevel> parse_risk_level(std::string_view s) {
    if (s == "NONE") return RiskLevel::none;
    if (s == "LOW") return RiskLevel::low;
    if (s == "MEDIUM") return RiskLevel::medium;
    if (s == "HIGH") return RiskLevel::high;
    if (s == "CRITICAL") return RiskLevel::critical;
    return std::nullopt;
}

VulnClassification classify_vulnerability_level(const LibraryEvidence& ev, const CveEntry& entry,
                                                const AppMetadata& meta, bool strict) {
    const bool admitted = ev.version_found && ev.version && entry_admits(entry, *ev.version, strict);
    bool function_hit = false;
    for (const auto& fn : entry.functions)
        if (ev.matched_functions.count(fn)) {
            function_hit = true;
            break;
        }

    VulnClassification out;
    if (admitted && function_hit) {
        out.level = VulnLevel::critical;
    } else if (admitted) {
        out.level = VulnLevel::high;
    } else if (!ev.version_found && function_hit) {
        // Version unknown: the function is present, but only a recent enough
        // CVE makes a patched copy unlikely.
        if (!meta.release_date) {
            out.level = VulnLevel::low;
            out.missing_release_date = true;
        } else {
            const long lag = days_between(entry.published, *meta.release_date);
            const long window = lag < 0 ? -lag : lag;
            out.level = window < kPatchLagWindowDays ? VulnLevel::medium : VulnLevel::low;
        }
    } else {
        out.level = VulnLevel::low;
    }
    return out;
}

double threat_impact_product(double threat, double impact) {
    if (threat < 0.0 || threat > 10.0 || impact < 0.0 || impact > 10.0)
        throw std::out_of_range("CVSS subscores live in [0,10]");
    return threat * impact;
}

SeverityClass qualitative_severity(double score) {
    if (score < 0.0 || score > 100.0)
        throw std::out_of_range("threat*impact products live in [0,100]");
    if (score >= kCriticalFloor) return SeverityClass::critical;
    if (score >= kHighFloor) return SeverityClass::high;
    if (score >= kMediumFloor) return SeverityClass::medium;
    return SeverityClass::low;
}

RiskLevel risk_matrix_lookup(SeverityClass sev, VulnLevel vuln) {
    return kRiskMatrix[static_cast<int>(sev)][static_cast<int>(vuln)];
}

CveFinding score_cve(const LibraryEvidence& ev, const CveEntry& entry, const AppMetadata& meta,
                     bool strict) {
    CveFinding finding;
    finding.cve_id = entry.cve_id;
    finding.product = entry.product;

    const auto classification = classify_vulnerability_level(ev, entry, meta, strict);
    finding.vuln_level = classification.level;

    std::string rationale;
    if (ev.version_found && ev.version) {
        rationale += "version=" + render_version(*ev.version);
        bool admitted = entry_admits(entry, *ev.version, strict);
        rationale += admitted ? " admitted" : " not_admitted";
        if (!entry.constraints.empty()) {
            rationale += " by";
            for (const auto& c : entry.constraints) {
                rationale += ' ';
                rationale += to_string(c.relation);
                rationale += ':';
                rationale += render_version(c.version);
            }
        }
    } else {
        rationale += "version=unknown";
    }
    std::string hit_names;
    for (const auto& fn : entry.functions)
        if (ev.matched_functions.count(fn)) {
            if (!hit_names.empty()) hit_names += ',';
            hit_names += fn;
        }
    rationale += "; functions_hit=" + (hit_names.empty() ? "-" : hit_names);
    if (classification.missing_release_date) rationale += "; release_date=missing";
    rationale += "; vuln=" + std::string(to_string(finding.vuln_level));

    if (!entry.exploitability || !entry.impact) {
        finding.unscored = true;
        rationale += "; unscored (missing CVSS subscore)";
        finding.rationale = std::move(rationale);
        return finding;
    }

    const double product = threat_impact_product(*entry.exploitability, *entry.impact);
    const SeverityClass severity = qualitative_severity(product);
    const RiskLevel risk = risk_matrix_lookup(severity, finding.vuln_level);
    finding.severity = severity;
    finding.risk = risk;
    rationale += "; threat=" + format_score(*entry.exploitability) +
                 " impact=" + format_score(*entry.impact) + " product=" + format_score(product);
    rationale += "; severity=" + std::string(to_string(severity));
    rationale += "; risk=" + std::string(to_string(risk));
    finding.rationale = std::move(rationale);
    return finding;
}

RiskLevel library_risk(const std::vector<CveFinding>& findings, bool product_matched) {
    RiskLevel out = product_matched ? RiskLevel::low : RiskLevel::none;
    for (const auto& f : findings)
        if (f.risk && *f.risk > out) out = *f.risk;
    return out;
}

RiskLevel app_risk(const std::vector<RiskLevel>& library_risks) {
    RiskLevel out = RiskLevel::none;
    for (const auto& r : library_risks) out = std::max(out, r);
    return out;
}

} // namespace apkrisk
