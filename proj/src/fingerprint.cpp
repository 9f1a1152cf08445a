#include "apkrisk/fingerprint.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

constexpr std::size_t kEvidenceCapPerStream = 4;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

// Strips a trailing unquoted comment. Only whole-line and whitespace-preceded
// `#` count, so patterns may contain `#` glued to text.
std::string strip_comment(const std::string& line) {
    if (!line.empty() && line[0] == '#') return {};
    for (std::size_t i = 1; i < line.size(); ++i)
        if (line[i] == '#' && (line[i - 1] == ' ' || line[i - 1] == '\t'))
            return line.substr(0, i);
    return line;
}

// Recursive-descent wildcard matcher over explicit indices; `*` is greedy
// with backtracking, which is ample for the short patterns signatures use.
bool wildcard_match_at(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, star_t = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            star_t = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++star_t;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

} // namespace

const ProductSignature* SignatureSet::find(std::string_view product) const {
    for (const auto& sig : products)
        if (sig.product == product) return &sig;
    return nullptr;
}

bool wildcard_match(std::string_view pattern, std::string_view text) {
    return wildcard_match_at(pattern, text);
}

std::optional<Version> capture_version(std::string_view pattern, std::string_view text) {
    const auto ph = pattern.find("{version}");
    if (ph == std::string_view::npos) return std::nullopt;
    const std::string_view head = pattern.substr(0, ph);
    const std::string_view tail = pattern.substr(ph + 9);

    // Try every position where a version token can start (no boundary
    // requirement: banners glue versions to text, "Lavc57.107.100"); the
    // head must match the prefix, the tail the remainder after the token.
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto hit = match_version_token_at(text, i);
        if (!hit) continue;
        if (wildcard_match_at(head, text.substr(0, hit->begin)) &&
            wildcard_match_at(tail, text.substr(hit->end)))
            return hit->version;
    }
    return std::nullopt;
}

SignatureSet load_signatures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open signature file " + path.string());
    return parse_signatures(in);
}

SignatureSet parse_signatures(std::istream& in) {
    SignatureSet set;
    ProductSignature* current = nullptr;
    std::vector<std::string>* target = nullptr;
    std::set<std::string> names;

    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.rfind("product ", 0) == 0) {
            // Close the previous block before opening the next.
            if (current != nullptr && current->string_patterns.empty() &&
                current->function_patterns.empty())
                throw EmptySignatureError("product " + current->product +
                                              " has no string or function patterns",
                                          line_no);
            std::string name = trim(line.substr(8));
            if (name.empty()) throw SignatureParseError("product line without a name", line_no);
            if (!names.insert(name).second)
                throw DuplicateProductError("product " + name + " declared twice", line_no);
            set.products.push_back({});
            current = &set.products.back();
            current->product = std::move(name);
            target = nullptr;
            continue;
        }
        if (current == nullptr)
            throw SignatureParseError("pattern before the first product block", line_no);

        if (line == "aliases:") {
            target = &current->aliases;
        } else if (line == "strings:") {
            target = &current->string_patterns;
        } else if (line == "functions:") {
            target = &current->function_patterns;
        } else if (line == "version:") {
            target = &current->version_patterns;
        } else if (line.back() == ':') {
            throw SignatureParseError("unknown section `" + line + "`", line_no);
        } else {
            if (target == nullptr)
                throw SignatureParseError("pattern outside any section", line_no);
            if (target == &current->version_patterns && line.find("{version}") == std::string::npos)
                throw SignatureParseError("version pattern without {version} placeholder", line_no);
            target->push_back(line);
        }
    }
    if (current != nullptr && current->string_patterns.empty() &&
        current->function_patterns.empty())
        throw EmptySignatureError("product " + current->product +
                                      " has no string or function patterns",
                                  line_no);
    return set;
}

std::vector<ProductMatch> match_products(const std::vector<std::string>& strings,
                                         const std::vector<std::string>& functions,
                                         const SignatureSet& sigs) {
    std::vector<ProductMatch> matches;
    for (const auto& sig : sigs.products) {
        ProductMatch m;
        m.product = sig.product;
        std::size_t string_hits = 0, function_hits = 0;

        for (const auto& pattern : sig.string_patterns) {
            if (string_hits >= kEvidenceCapPerStream) break;
            for (const auto& s : strings) {
                if (!wildcard_match(pattern, s)) continue;
                m.evidence.push_back({pattern, s});
                if (++string_hits >= kEvidenceCapPerStream) break;
            }
        }
        for (const auto& pattern : sig.function_patterns) {
            if (function_hits >= kEvidenceCapPerStream) break;
            for (const auto& f : functions) {
                if (!wildcard_match(pattern, f)) continue;
                m.evidence.push_back({pattern, f});
                if (++function_hits >= kEvidenceCapPerStream) break;
            }
        }
        if (m.evidence.empty()) continue;

        if (string_hits > 0 && function_hits > 0)
            m.via = MatchStream::both;
        else if (function_hits > 0)
            m.via = MatchStream::functions;
        else
            m.via = MatchStream::strings;
        m.version = extract_version(strings, sig);
        matches.push_back(std::move(m));
    }
    return matches;
}

std::optional<Version> extract_version(const std::vector<std::string>& strings,
                                       const ProductSignature& sig) {
    for (const auto& pattern : sig.version_patterns)
        for (const auto& s : strings)
            if (auto v = capture_version(pattern, s)) return v;
    return std::nullopt;
}

} // namespace apkrisk
