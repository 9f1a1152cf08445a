#include "apkrisk/version.hpp"

#include <algorithm>
#include <cctype>

namespace apkrisk {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_alnum(char c) { return is_digit(c) || is_alpha(c); }

} // namespace

std::strong_ordering Version::compare(const Version& a, const Version& b) {
    const std::size_t n = std::max(a.segments.size(), b.segments.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t sa = i < a.segments.size() ? a.segments[i] : 0;
        const std::uint32_t sb = i < b.segments.size() ? b.segments[i] : 0;
        if (sa != sb) return sa < sb ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    // Absent suffix orders lowest (1.0.2 < 1.0.2k); otherwise lexicographic.
    if (a.suffix.empty() != b.suffix.empty())
        return a.suffix.empty() ? std::strong_ordering::less : std::strong_ordering::greater;
    const int c = a.suffix.compare(b.suffix);
    if (c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::optional<Version> parse_version(std::string_view text) {
    if (text.empty() || !is_digit(text[0])) return std::nullopt;
    Version v;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) return std::nullopt;
        std::uint64_t seg = 0;
        while (i < text.size() && is_digit(text[i])) {
            seg = seg * 10 + static_cast<std::uint64_t>(text[i] - '0');
            if (seg > 0xFFFFFFFFull) return std::nullopt;
            ++i;
        }
        v.segments.push_back(static_cast<std::uint32_t>(seg));
        if (i < text.size() && text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1])) {
            ++i;
            continue;
        }
        break;
    }
    if (i == text.size()) return v;
    // Trailing suffix: glued ("1.0.2k") or dash-joined ("1.0.2-beta1").
    std::size_t s = i;
    if (text[s] == '-') ++s;
    if (s >= text.size() || !is_alpha(text[s])) return std::nullopt;
    std::size_t e = s;
    while (e < text.size() && is_alnum(text[e])) ++e;
    if (e != text.size()) return std::nullopt;
    v.suffix = std::string(text.substr(s, e - s));
    return v;
}

std::string render_version(const Version& v) {
    std::string out;
    for (std::size_t i = 0; i < v.segments.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(v.segments[i]);
    }
    if (!v.suffix.empty()) {
        // A suffix starting with a digit would merge into the last segment;
        // parse_version only produces letter-initial suffixes, so gluing is safe.
        out += v.suffix;
    }
    return out;
}

std::optional<VersionTokenHit> match_version_token_at(std::string_view text, std::size_t at) {
    if (at >= text.size() || !is_digit(text[at])) return std::nullopt;
    std::size_t j = at;
    int segments = 1;
    while (j < text.size() && is_digit(text[j])) ++j;
    while (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
        ++j;
        while (j < text.size() && is_digit(text[j])) ++j;
        ++segments;
    }
    if (segments < 2) return std::nullopt;
    // Optional glued alphanumeric suffix ("1.0.2k", "1.0.2beta1").
    std::size_t e = j;
    while (e < text.size() && is_alnum(text[e])) ++e;
    auto parsed = parse_version(text.substr(at, e - at));
    if (!parsed) {
        // Retry without the suffix run (e.g. digit-initial oddities).
        parsed = parse_version(text.substr(at, j - at));
        e = j;
    }
    if (!parsed) return std::nullopt;
    return VersionTokenHit{at, e, std::move(*parsed)};
}

std::optional<VersionTokenHit> find_version_token(std::string_view text, std::size_t pos) {
    for (std::size_t i = pos; i < text.size(); ++i) {
        if (!is_digit(text[i])) continue;
        // Token must start at a word boundary: not preceded by alnum, '_', '.',
        // or '-' (so "v2.1" works but the "34" of "x34.1" and the tail of
        // "1.2.3.4" substrings do not re-match mid-token).
        if (i > 0) {
            const char p = text[i - 1];
            if (is_alnum(p) || p == '_' || p == '.' || p == '-') continue;
        }
        auto hit = match_version_token_at(text, i);
        if (!hit) continue;
        // The right side must not run into a larger identifier ("1.2.3_rc"
        // is identifier glue; a trailing '.' is ordinary punctuation).
        if (hit->end < text.size() && text[hit->end] == '_') continue;
        return hit;
    }
    return std::nullopt;
}

} // namespace apkrisk
