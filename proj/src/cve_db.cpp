#include "apkrisk/cve_db.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <zlib.h>

#include "json.hpp"

#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw Error("out of memory computing feed digest");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest.data(), &digest_len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("feed digest computation failed");

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::string gunzip(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    z_stream strm{};
    if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
        throw Error("zlib initialization failed for " + origin);
    strm.next_in = const_cast<Bytef*>(bytes.data());
    strm.avail_in = static_cast<uInt>(bytes.size());

    std::string out;
    std::array<unsigned char, 1 << 16> chunk;
    int rc = Z_OK;
    do {
        strm.next_out = chunk.data();
        strm.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw UnrecognizedFeedFormatError("damaged gzip stream in " + origin);
        }
        out.append(reinterpret_cast<char*>(chunk.data()), chunk.size() - strm.avail_out);
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    return out;
}

// ---------------------------------------------------------------------------
// Feed parsing

std::optional<double> json_number(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) return std::nullopt;
    return it->get<double>();
}

std::optional<std::string> json_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

// One line of the simplified mirror. Returns nullopt with `why` set when the
// record is unusable.
std::optional<CveRaw> parse_mirror_record(const json& obj, std::string& why) {
    CveRaw raw;
    auto id = json_string(obj, "cve_id");
    if (!id || !is_valid_cve_id(*id)) {
        why = "missing or malformed cve_id";
        return std::nullopt;
    }
    raw.cve_id = *id;
    auto description = json_string(obj, "description");
    if (!description) {
        why = "missing description";
        return std::nullopt;
    }
    raw.description = *description;
    auto published = json_string(obj, "published");
    auto date = published ? parse_iso_date(*published) : std::nullopt;
    if (!date) {
        why = "missing or malformed published date";
        return std::nullopt;
    }
    raw.published = *date;
    raw.exploitability = json_number(obj, "exploitability");
    raw.impact = json_number(obj, "impact");
    raw.has_v3 = raw.exploitability.has_value() && raw.impact.has_value();

    if (auto it = obj.find("products"); it != obj.end() && it->is_array()) {
        for (const auto& p : *it) {
            if (!p.is_object()) continue;
            StructuredProduct sp;
            auto name = json_string(p, "name");
            if (!name) continue;
            sp.name = *name;
            if (auto cs = p.find("constraints"); cs != p.end() && cs->is_array()) {
                for (const auto& c : *cs) {
                    auto relation = json_string(c, "relation");
                    auto version = json_string(c, "version");
                    if (!relation || !version) continue;
                    auto rel = parse_relation(*relation);
                    auto ver = parse_version(*version);
                    if (!rel || !ver) continue;
                    VersionConstraint vc;
                    vc.relation = *rel;
                    vc.version = *ver;
                    if (auto fq = c.find("from_qualifier"); fq != c.end() && fq->is_boolean())
                        vc.from_qualifier = fq->get<bool>();
                    sp.constraints.push_back(std::move(vc));
                }
            }
            raw.listed_products.push_back(std::move(sp));
        }
    }
    if (auto it = obj.find("functions"); it != obj.end() && it->is_array())
        for (const auto& f : *it)
            if (f.is_string()) raw.curated_functions.push_back(f.get<std::string>());
    return raw;
}

// CPE 2.3 URI -> (product token, version field). Fields are colon-separated:
// cpe:2.3:a:vendor:product:version:update:...
std::optional<std::pair<std::string, std::string>> split_cpe23(const std::string& uri) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : uri) {
        if (c == ':') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    if (fields.size() < 6 || fields[0] != "cpe" || fields[1] != "2.3") return std::nullopt;
    return std::make_pair(fields[4], fields[5]);
}

void collect_cpe_matches(const json& node, std::map<std::string, std::vector<VersionConstraint>>& out) {
    if (auto matches = node.find("cpe_match"); matches != node.end() && matches->is_array()) {
        for (const auto& m : *matches) {
            if (!m.is_object()) continue;
            if (auto v = m.find("vulnerable"); v == m.end() || !v->is_boolean() || !v->get<bool>())
                continue;
            auto uri = json_string(m, "cpe23Uri");
            if (!uri) continue;
            auto split = split_cpe23(*uri);
            if (!split) continue;
            auto& constraints = out[split->first];

            // Range ends win over range starts: the model keeps one bound
            // per match, and over-approximating old versions as vulnerable
            // is the safe direction.
            if (auto end = json_string(m, "versionEndIncluding")) {
                if (auto ver = parse_version(*end))
                    constraints.push_back({ConstraintRelation::at_most, *ver, false});
            } else if (auto end_ex = json_string(m, "versionEndExcluding")) {
                if (auto ver = parse_version(*end_ex))
                    constraints.push_back({ConstraintRelation::at_most, *ver, true});
            } else if (auto start = json_string(m, "versionStartIncluding")) {
                if (auto ver = parse_version(*start))
                    constraints.push_back({ConstraintRelation::at_least, *ver, false});
            } else if (auto start_ex = json_string(m, "versionStartExcluding")) {
                if (auto ver = parse_version(*start_ex))
                    constraints.push_back({ConstraintRelation::at_least, *ver, true});
            } else if (split->second != "*" && split->second != "-") {
                if (auto ver = parse_version(split->second))
                    constraints.push_back({ConstraintRelation::exactly, *ver, false});
            }
        }
    }
    if (auto children = node.find("children"); children != node.end() && children->is_array())
        for (const auto& child : *children) collect_cpe_matches(child, out);
}

std::optional<CveRaw> parse_nvd_item(const json& item, std::string& why) {
    CveRaw raw;
    try {
        const json& cve = item.at("cve");
        raw.cve_id = cve.at("CVE_data_meta").at("ID").get<std::string>();
        if (!is_valid_cve_id(raw.cve_id)) {
            why = "malformed CVE id";
            return std::nullopt;
        }
        for (const auto& d : cve.at("description").at("description_data")) {
            if (raw.description.empty()) raw.description = d.at("value").get<std::string>();
            if (json_string(d, "lang") == std::optional<std::string>("en")) {
                raw.description = d.at("value").get<std::string>();
                break;
            }
        }
        auto published = json_string(item, "publishedDate");
        auto date = published ? parse_iso_date(*published) : std::nullopt;
        if (!date) {
            why = "missing or malformed publishedDate";
            return std::nullopt;
        }
        raw.published = *date;
    } catch (const json::exception&) {
        why = "missing mandatory CVE fields";
        return std::nullopt;
    }

    if (auto impact = item.find("impact"); impact != item.end() && impact->is_object()) {
        if (auto v3 = impact->find("baseMetricV3"); v3 != impact->end() && v3->is_object()) {
            raw.exploitability = json_number(*v3, "exploitabilityScore");
            raw.impact = json_number(*v3, "impactScore");
        }
        if (auto v2 = impact->find("baseMetricV2"); v2 != impact->end() && v2->is_object()) {
            raw.v2_exploitability = json_number(*v2, "exploitabilityScore");
            raw.v2_impact = json_number(*v2, "impactScore");
        }
    }
    raw.has_v3 = raw.exploitability.has_value() && raw.impact.has_value();

    std::map<std::string, std::vector<VersionConstraint>> by_product;
    if (auto cfg = item.find("configurations"); cfg != item.end() && cfg->is_object())
        if (auto nodes = cfg->find("nodes"); nodes != cfg->end() && nodes->is_array())
            for (const auto& node : *nodes) collect_cpe_matches(node, by_product);
    for (auto& [name, constraints] : by_product)
        raw.listed_products.push_back({name, std::move(constraints)});
    return raw;
}

FeedIngest ingest_mirror_lines(const std::string& text) {
    FeedIngest out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            out.skipped.push_back("line " + std::to_string(line_no) + ": not a JSON object");
            continue;
        }
        std::string why;
        auto raw = parse_mirror_record(obj, why);
        if (!raw) {
            out.skipped.push_back("line " + std::to_string(line_no) + ": " + why);
            continue;
        }
        out.records.push_back(std::move(*raw));
    }
    return out;
}

FeedIngest ingest_nvd_document(const json& doc) {
    FeedIngest out;
    const auto& items = doc.at("CVE_Items");
    std::size_t index = 0;
    for (const auto& item : items) {
        ++index;
        std::string why;
        auto raw = parse_nvd_item(item, why);
        if (!raw) {
            out.skipped.push_back("item " + std::to_string(index) + ": " + why);
            continue;
        }
        out.records.push_back(std::move(*raw));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Description mining

const std::set<std::string>& before_words() {
    static const std::set<std::string> words{"before", "prior", "earlier",
                                             "through", "until", "below"};
    return words;
}

const std::set<std::string>& after_words() {
    static const std::set<std::string> words{"after", "following", "successive", "since", "above"};
    return words;
}

struct Word {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string stripped; // lowercased, outer punctuation removed
};

std::vector<Word> split_words(std::string_view text) {
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        std::size_t begin = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        Word w;
        w.begin = begin;
        w.end = i;
        std::size_t s = begin, e = i;
        while (s < e && !std::isalnum(static_cast<unsigned char>(text[s]))) ++s;
        while (e > s && !std::isalnum(static_cast<unsigned char>(text[e - 1]))) --e;
        w.stripped = lower(text.substr(s, e - s));
        words.push_back(std::move(w));
    }
    return words;
}

constexpr int kQualifierWindow = 5;

} // namespace

std::string_view to_string(ConstraintRelation r) {
    switch (r) {
    case ConstraintRelation::at_most: return "at_most";
    case ConstraintRelation::exactly: return "exactly";
    case ConstraintRelation::at_least: return "at_least";
    }
    return "exactly";
}

std::optional<ConstraintRelation> parse_relation(std::string_view s) {
    if (s == "at_most") return ConstraintRelation::at_most;
    if (s == "exactly") return ConstraintRelation::exactly;
    if (s == "at_least") return ConstraintRelation::at_least;
    return std::nullopt;
}

bool constraint_admits(const VersionConstraint& c, const Version& v, bool strict) {
    const auto cmp = Version::compare(v, c.version);
    const bool exclusive = strict && c.from_qualifier;
    switch (c.relation) {
    case ConstraintRelation::at_most: return exclusive ? cmp < 0 : cmp <= 0;
    case ConstraintRelation::exactly: return cmp == 0;
    case ConstraintRelation::at_least: return exclusive ? cmp > 0 : cmp >= 0;
    }
    return false;
}

bool is_valid_cve_id(std::string_view id) {
    if (id.rfind("CVE-", 0) != 0) return false;
    if (id.size() < 13) return false; // CVE-YYYY-NNNN minimum
    for (std::size_t i = 4; i < 8; ++i)
        if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
    if (id[8] != '-') return false;
    if (id.size() - 9 < 4) return false;
    for (std::size_t i = 9; i < id.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
    return true;
}

FeedIngest ingest_feed(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feed " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read error on feed " + path.string());
    return ingest_feed_bytes(bytes, path.filename().string());
}

FeedIngest ingest_feed_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    std::string text = is_gzip(bytes) ? gunzip(bytes, origin)
                                      : std::string(bytes.begin(), bytes.end());

    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{')
        throw UnrecognizedFeedFormatError(origin + " is neither an NVD JSON feed nor a JSONL mirror");

    // A whole-document parse distinguishes the NVD dump (one big object with
    // CVE_Items) from the line-oriented mirror.
    json doc = json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) {
        if (doc.contains("CVE_Items") && doc["CVE_Items"].is_array()) return ingest_nvd_document(doc);
        if (doc.contains("cve_id")) return ingest_mirror_lines(text); // single-record mirror
        throw UnrecognizedFeedFormatError(origin + " has no CVE_Items and no cve_id records");
    }

    // Multi-line mirror: the first line must at least parse on its own.
    const auto line_end = text.find('\n', first);
    json head = json::parse(text.substr(first, line_end - first), nullptr, false);
    if (head.is_discarded() || !head.is_object() || !head.contains("cve_id"))
        throw UnrecognizedFeedFormatError(origin + " is neither an NVD JSON feed nor a JSONL mirror");
    return ingest_mirror_lines(text);
}

std::vector<std::string> detect_product(std::string_view description, const SignatureSet& sigs) {
    // Word tokens keep hyphenated compounds whole, so "libpng-like" is one
    // token and does not hit "libpng".
    const std::string text = lower(description);
    std::vector<std::string> tokens;
    std::string cur;
    auto is_word_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '+' || c == '-';
    };
    for (char c : text) {
        if (is_word_char(c)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));

    auto contains_sequence = [&tokens](const std::vector<std::string>& needle) {
        if (needle.empty() || needle.size() > tokens.size()) return false;
        for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
            bool all = true;
            for (std::size_t j = 0; j < needle.size(); ++j)
                if (tokens[i + j] != needle[j]) {
                    all = false;
                    break;
                }
            if (all) return true;
        }
        return false;
    };
    auto name_tokens = [](const std::string& name) {
        std::vector<std::string> parts;
        std::istringstream in(name);
        std::string part;
        while (in >> part) parts.push_back(part);
        return parts;
    };

    std::vector<std::string> found;
    for (const auto& sig : sigs.products) {
        std::vector<std::string> names{lower(sig.product)};
        for (const auto& alias : sig.aliases) names.push_back(lower(alias));
        for (const auto& name : names) {
            if (contains_sequence(name_tokens(name))) {
                found.push_back(sig.product);
                break;
            }
        }
    }
    return found;
}

std::vector<VersionConstraint> extract_version_constraint(std::string_view description) {
    const std::vector<Word> words = split_words(description);

    // Locate version tokens and the word each one starts in.
    struct TokenAt {
        VersionTokenHit hit;
        std::size_t word = 0;
    };
    std::vector<TokenAt> tokens;
    std::size_t from = 0;
    while (from < description.size()) {
        auto hit = find_version_token(description, from);
        if (!hit) break;
        from = hit->end;

        // "3.0.x" style series placeholders name a branch, not a version.
        if (hit->end + 1 < description.size() && description[hit->end] == '.' &&
            (description[hit->end + 1] == 'x' || description[hit->end + 1] == 'X' ||
             description[hit->end + 1] == '*') &&
            (hit->end + 2 >= description.size() ||
             !std::isalnum(static_cast<unsigned char>(description[hit->end + 2]))))
            continue;

        std::size_t word = 0;
        for (std::size_t w = 0; w < words.size(); ++w)
            if (words[w].begin <= hit->begin && hit->begin < words[w].end) {
                word = w;
                break;
            }
        tokens.push_back({*hit, word});
    }
    if (tokens.empty()) return {};

    auto token_between = [&tokens](std::size_t lo, std::size_t hi) {
        for (const auto& t : tokens)
            if (t.word > lo && t.word < hi) return true;
        return false;
    };
    auto has_token_in = [&tokens](std::size_t lo, std::size_t hi) { // inclusive word range
        for (const auto& t : tokens)
            if (t.word >= lo && t.word <= hi) return true;
        return false;
    };

    std::vector<VersionConstraint> out;
    auto push_unique = [&out](VersionConstraint c) {
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
    };

    for (const auto& t : tokens) {
        const std::size_t w = t.word;
        int best_distance = kQualifierWindow + 1;
        std::vector<ConstraintRelation> relations;

        for (std::size_t qi = w >= kQualifierWindow ? w - kQualifierWindow : 0;
             qi < words.size() && qi <= w + kQualifierWindow; ++qi) {
            if (qi == w) continue;
            const std::string& word = words[qi].stripped;
            const bool is_before = before_words().count(word) > 0;
            const bool is_after = after_words().count(word) > 0;
            if (!is_before && !is_after) continue;

            // Qualifiers bind directionally: before-class forward to the
            // next token, after-class backward to the previous one. Each
            // falls back to the other direction when its own side is empty
            // ("1.6.37 and earlier", "since 2.8").
            bool binds = false;
            if (is_before) {
                if (qi < w)
                    binds = !token_between(qi, w);
                else
                    binds = !token_between(w, qi) &&
                            !has_token_in(qi + 1, qi + kQualifierWindow);
            } else {
                if (qi > w) {
                    binds = !token_between(w, qi);
                } else {
                    const bool backward_empty =
                        qi == 0 ||
                        !has_token_in(qi >= kQualifierWindow ? qi - kQualifierWindow : 0, qi - 1);
                    binds = backward_empty && !token_between(qi, w);
                }
            }
            if (!binds) continue;

            const int distance = static_cast<int>(qi > w ? qi - w : w - qi);
            const auto relation = is_before ? ConstraintRelation::at_most : ConstraintRelation::at_least;
            if (distance < best_distance) {
                best_distance = distance;
                relations = {relation};
            } else if (distance == best_distance &&
                       std::find(relations.begin(), relations.end(), relation) == relations.end()) {
                relations.push_back(relation); // equal-distance conflict: keep both
            }
        }

        if (relations.empty()) {
            push_unique({ConstraintRelation::exactly, t.hit.version, false});
        } else {
            for (auto relation : relations) push_unique({relation, t.hit.version, true});
        }
    }
    return out;
}

std::vector<std::string> extract_function_names(std::string_view description) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& word : split_words(description)) {
        std::string_view token = description.substr(word.begin, word.end - word.begin);
        // Outer punctuation is sentence syntax, not part of the name.
        while (!token.empty() && (token.back() == '.' || token.back() == ',' ||
                                  token.back() == ';' || token.back() == ':' ||
                                  token.back() == '!' || token.back() == '?'))
            token.remove_suffix(1);
        bool had_parens = false;
        if (token.size() >= 2 && token.substr(token.size() - 2) == "()") {
            had_parens = true;
            token.remove_suffix(2);
        }
        while (!token.empty() && (token.front() == '(' || token.front() == '"' ||
                                  token.front() == '\'' || token.front() == '`'))
            token.remove_prefix(1);
        while (!token.empty() && (token.back() == ')' || token.back() == '"' ||
                                  token.back() == '\'' || token.back() == '`'))
            token.remove_suffix(1);
        if (token.empty()) continue;

        const bool has_underscore = token.find('_') != std::string_view::npos;
        const bool has_scope = token.find("::") != std::string_view::npos;

        // camelCase with at least two humps: starts lowercase, alphanumeric
        // throughout, and every capital opens a new lowercase run.
        bool camel = false;
        if (!has_underscore && std::islower(static_cast<unsigned char>(token.front()))) {
            bool all_alnum = true;
            int capitals = 0;
            bool capital_ok = true;
            for (std::size_t i = 0; i < token.size(); ++i) {
                const unsigned char c = static_cast<unsigned char>(token[i]);
                if (!std::isalnum(c)) {
                    all_alnum = false;
                    break;
                }
                if (std::isupper(c)) {
                    ++capitals;
                    if (i + 1 >= token.size() ||
                        !std::islower(static_cast<unsigned char>(token[i + 1])))
                        capital_ok = false;
                }
            }
            camel = all_alnum && capital_ok && capitals >= 1;
        }

        if (!has_underscore && !has_scope && !had_parens && !camel) continue;
        std::string name(token);
        if (seen.insert(name).second) out.push_back(std::move(name));
    }
    return out;
}

bool entry_admits(const CveEntry& entry, const Version& version, bool strict) {
    if (entry.constraints.empty()) return true;
    for (const auto& c : entry.constraints)
        if (constraint_admits(c, version, strict)) return true;
    return false;
}

std::vector<std::string> CveDatabase::products() const {
    std::vector<std::string> out;
    out.reserve(product_index.size());
    for (const auto& [name, indices] : product_index) out.push_back(name);
    return out;
}

BuildResult build_database(const std::vector<CveRaw>& raw, const SignatureSet& sigs,
                           const BuildOptions& opts) {
    BuildResult result;
    for (const auto& sig : sigs.products) result.db.product_index[sig.product] = {};

    auto normalize = [](std::string_view name) {
        std::string out;
        for (char c : name) {
            const unsigned char u = static_cast<unsigned char>(c);
            if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
        }
        return out;
    };

    for (const auto& record : raw) {
        // Subscore policy: prefer the v3 pair; fall back to v2 only when
        // asked; drop records with no subscores at all.
        std::optional<double> exploitability = record.exploitability;
        std::optional<double> impact = record.impact;
        std::string cvss_source = "v3";
        if (!exploitability && !impact) {
            if (opts.include_v2 && (record.v2_exploitability || record.v2_impact)) {
                exploitability = record.v2_exploitability;
                impact = record.v2_impact;
                cvss_source = "v2";
            } else {
                result.log.push_back(record.cve_id + ": excluded, no CVSS subscores" +
                                     (record.v2_exploitability || record.v2_impact
                                          ? " (v2 data present but not enabled)"
                                          : ""));
                continue;
            }
        }

        // Products: structured feed listing plus description detection.
        std::map<std::string, const StructuredProduct*> structured; // canonical -> feed data
        for (const auto& sp : record.listed_products) {
            const std::string feed_name = normalize(sp.name);
            for (const auto& sig : sigs.products) {
                bool matches = normalize(sig.product) == feed_name;
                for (const auto& alias : sig.aliases)
                    if (!matches && normalize(alias) == feed_name) matches = true;
                if (matches && structured.find(sig.product) == structured.end())
                    structured[sig.product] = &sp;
            }
        }
        std::vector<std::string> products;
        for (const auto& sig : sigs.products) {
            if (structured.count(sig.product)) products.push_back(sig.product);
        }
        for (const auto& name : detect_product(record.description, sigs))
            if (std::find(products.begin(), products.end(), name) == products.end())
                products.push_back(name);
        if (products.empty()) {
            result.log.push_back(record.cve_id + ": excluded, no tracked product");
            continue;
        }

        const auto mined = extract_version_constraint(record.description);
        // Opposite-direction bounds out of one sentence usually mean a
        // bounded range the three-relation model cannot express faithfully.
        std::set<ConstraintRelation> mined_directions;
        for (const auto& c : mined)
            if (c.relation != ConstraintRelation::exactly) mined_directions.insert(c.relation);

        std::vector<std::string> functions = record.curated_functions;
        if (functions.empty()) functions = extract_function_names(record.description);
        else result.log.push_back(record.cve_id + ": curated function list applied");

        for (const auto& product : products) {
            CveEntry entry;
            entry.cve_id = record.cve_id;
            entry.product = product;
            entry.published = record.published;
            entry.exploitability = exploitability;
            entry.impact = impact;
            entry.cvss_source = cvss_source;
            entry.functions = functions;

            auto it = structured.find(product);
            if (it != structured.end() && !it->second->constraints.empty()) {
                entry.constraints = it->second->constraints;
                entry.constraint_source = ConstraintSource::feed;
                result.log.push_back(record.cve_id + "/" + product + ": feed constraints used");
            } else if (!mined.empty()) {
                entry.constraints = mined;
                entry.constraint_source = ConstraintSource::description;
                entry.needs_review = mined_directions.size() > 1;
            } else {
                entry.constraint_source = ConstraintSource::none;
            }
            result.db.entries.push_back(std::move(entry));
        }
    }

    std::sort(result.db.entries.begin(), result.db.entries.end(),
              [](const CveEntry& a, const CveEntry& b) {
                  return std::tie(a.cve_id, a.product) < std::tie(b.cve_id, b.product);
              });
    for (std::size_t i = 0; i < result.db.entries.size(); ++i)
        result.db.product_index[result.db.entries[i].product].push_back(i);

    // Content digest over the sorted records makes identical input visible
    // as an identical database file.
    std::vector<const CveRaw*> sorted;
    sorted.reserve(raw.size());
    for (const auto& r : raw) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const CveRaw* a, const CveRaw* b) { return a->cve_id < b->cve_id; });
    std::string digest_input;
    for (const auto* r : sorted) {
        digest_input += r->cve_id;
        digest_input += '\n';
        digest_input += r->description;
        digest_input += '\n';
        digest_input += format_iso_date(r->published);
        digest_input += '\n';
    }
    result.db.feed_digest = sha256_hex(digest_input);
    result.db.built_at = utc_timestamp_now();
    return result;
}

std::vector<CveEntry> query(const CveDatabase& db, const std::string& product,
                            const std::optional<Version>& version, bool strict) {
    auto it = db.product_index.find(product);
    if (it == db.product_index.end())
        throw UnknownProductError("product " + product + " is not tracked by this database");
    std::vector<CveEntry> out;
    for (std::size_t index : it->second) {
        const CveEntry& entry = db.entries[index];
        if (!version || entry_admits(entry, *version, strict)) out.push_back(entry);
    }
    return out;
}

std::string serialize_database(const CveDatabase& db) {
    std::string out;
    json header;
    header["built_at"] = db.built_at;
    header["feed_digest"] = db.feed_digest;
    header["products"] = db.products();
    header["schema"] = 1;
    out += header.dump();
    out += '\n';

    for (const auto& entry : db.entries) {
        json j;
        j["cve_id"] = entry.cve_id;
        j["product"] = entry.product;
        j["published"] = format_iso_date(entry.published);
        if (entry.exploitability) j["exploitability"] = *entry.exploitability;
        if (entry.impact) j["impact"] = *entry.impact;
        j["cvss_source"] = entry.cvss_source;
        json constraints = json::array();
        for (const auto& c : entry.constraints) {
            json jc;
            jc["relation"] = std::string(to_string(c.relation));
            jc["version"] = render_version(c.version);
            jc["from_qualifier"] = c.from_qualifier;
            constraints.push_back(std::move(jc));
        }
        j["constraints"] = std::move(constraints);
        j["functions"] = entry.functions;
        switch (entry.constraint_source) {
        case ConstraintSource::none: j["constraint_source"] = "none"; break;
        case ConstraintSource::feed: j["constraint_source"] = "feed"; break;
        case ConstraintSource::description: j["constraint_source"] = "description"; break;
        }
        j["needs_review"] = entry.needs_review;
        out += j.dump();
        out += '\n';
    }
    return out;
}

CveDatabase parse_database(std::string_view text) {
    CveDatabase db;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw UnrecognizedFeedFormatError("empty database file");
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("schema") ||
        !header.contains("products"))
        throw UnrecognizedFeedFormatError("database header line is damaged");
    if (header["schema"].get<int>() != 1)
        throw UnrecognizedFeedFormatError("unsupported database schema");
    db.built_at = header.value("built_at", std::string());
    db.feed_digest = header.value("feed_digest", std::string());
    for (const auto& p : header["products"])
        if (p.is_string()) db.product_index[p.get<std::string>()] = {};

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw UnrecognizedFeedFormatError("damaged database entry at line " +
                                              std::to_string(line_no));
        CveEntry entry;
        auto id = json_string(j, "cve_id");
        auto product = json_string(j, "product");
        auto published = json_string(j, "published");
        auto date = published ? parse_iso_date(*published) : std::nullopt;
        if (!id || !product || !date)
            throw UnrecognizedFeedFormatError("database entry missing mandatory fields at line " +
                                              std::to_string(line_no));
        entry.cve_id = *id;
        entry.product = *product;
        entry.published = *date;
        entry.exploitability = json_number(j, "exploitability");
        entry.impact = json_number(j, "impact");
        entry.cvss_source = j.value("cvss_source", "v3");
        if (auto cs = j.find("constraints"); cs != j.end() && cs->is_array()) {
            for (const auto& c : *cs) {
                auto relation = json_string(c, "relation");
                auto version = json_string(c, "version");
                auto rel = relation ? parse_relation(*relation) : std::nullopt;
                auto ver = version ? parse_version(*version) : std::nullopt;
                if (!rel || !ver)
                    throw UnrecognizedFeedFormatError("damaged constraint at line " +
                                                      std::to_string(line_no));
                entry.constraints.push_back({*rel, *ver, c.value("from_qualifier", false)});
            }
        }
        if (auto fs = j.find("functions"); fs != j.end() && fs->is_array())
            for (const auto& f : *fs)
                if (f.is_string()) entry.functions.push_back(f.get<std::string>());
        const std::string source = j.value("constraint_source", "none");
        entry.constraint_source = source == "feed"          ? ConstraintSource::feed
                                  : source == "description" ? ConstraintSource::description
                                                            : ConstraintSource::none;
        entry.needs_review = j.value("needs_review", false);
        db.entries.push_back(std::move(entry));
    }

    std::sort(db.entries.begin(), db.entries.end(), [](const CveEntry& a, const CveEntry& b) {
        return std::tie(a.cve_id, a.product) < std::tie(b.cve_id, b.product);
    });
    for (std::size_t i = 0; i < db.entries.size(); ++i)
        db.product_index[db.entries[i].product].push_back(i);
    return db;
}

CveDatabase load_database(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open database " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_database(buffer.str());
}

void save_database(const CveDatabase& db, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write database " + path.string());
    out << serialize_database(db);
    if (!out) throw IoError("write error on database " + path.string());
}

} // namespace apkrisk
