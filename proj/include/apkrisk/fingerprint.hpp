#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apkrisk/version.hpp"

namespace apkrisk {

// Whitelist signature for one product. Patterns are literal text with `*`
// wildcards, matched against the whole candidate string; version patterns
// additionally contain one `{version}` placeholder that captures a dotted
// version token.
struct ProductSignature {
    std::string product;
    std::vector<std::string> aliases; // extra names for description matching
    std::vector<std::string> string_patterns;
    std::vector<std::string> function_patterns;
    std::vector<std::string> version_patterns;
};

struct SignatureSet {
    std::vector<ProductSignature> products;

    const ProductSignature* find(std::string_view product) const;
    bool empty() const { return products.empty(); }
    std::size_t size() const { return products.size(); }
};

enum class MatchStream { strings, functions, both };

struct PatternHit {
    std::string pattern;
    std::string matched_text;
};

struct ProductMatch {
    std::string product;
    std::optional<Version> version;
    std::vector<PatternHit> evidence; // never empty
    MatchStream via = MatchStream::strings;
};

// Anchored wildcard match; `*` spans any run of characters (including none).
bool wildcard_match(std::string_view pattern, std::string_view text);

// Matches a version pattern (wildcards plus one `{version}` placeholder)
// and returns the captured version on success.
std::optional<Version> capture_version(std::string_view pattern, std::string_view text);

// Parses a signature file. Format: `product <Name>` opens a block; inside,
// `aliases:` / `strings:` / `functions:` / `version:` open pattern lists,
// one pattern per line; `#` starts a comment. Throws DuplicateProductError,
// EmptySignatureError or SignatureParseError (all carry the line number).
SignatureSet load_signatures(const std::filesystem::path& path);
SignatureSet parse_signatures(std::istream& in);

// One ProductMatch per product with at least one pattern hit over the
// artifact's strings or function names. Multiple products matching one
// binary is expected (imported libraries) and all are kept. Evidence is
// capped at a handful of hits per stream.
std::vector<ProductMatch> match_products(const std::vector<std::string>& strings,
                                         const std::vector<std::string>& functions,
                                         const SignatureSet& sigs);

// Applies the product's version patterns in order against the extracted
// strings; first capture wins. nullopt when nothing captures (stripped or
// sanitized binaries).
std::optional<Version> extract_version(const std::vector<std::string>& strings,
                                       const ProductSignature& sig);

} // namespace apkrisk
