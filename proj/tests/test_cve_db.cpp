#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "apkrisk/cve_db.hpp"
#include "apkrisk/errors.hpp"
#include "test_paths.hpp"

using namespace apkrisk;

namespace {

Version v(std::string_view text) {
    auto parsed = parse_version(text);
    REQUIRE(parsed.has_value());
    return *parsed;
}

SignatureSet shipped_signatures() { return load_signatures(APKRISK_SIGNATURES); }

std::string data_file(const std::string& name) {
    return std::string(APKRISK_TEST_DATA_DIR) + "/" + name;
}

std::vector<std::uint8_t> bytes_of(const std::string& text) {
    return {text.begin(), text.end()};
}

// Compact display for comparing mined constraints against expectations.
std::string render(const std::vector<VersionConstraint>& cs) {
    std::string out;
    for (const auto& c : cs) {
        if (!out.empty()) out += "; ";
        out += std::string(to_string(c.relation)) + " " + render_version(c.version);
    }
    return out.empty() ? "-" : out;
}

const CveEntry* find_entry(const CveDatabase& db, const std::string& cve,
                           const std::string& product) {
    for (const auto& e : db.entries)
        if (e.cve_id == cve && e.product == product) return &e;
    return nullptr;
}

CveRaw make_raw(const std::string& id, const std::string& description) {
    CveRaw raw;
    raw.cve_id = id;
    raw.description = description;
    raw.published = Date{2020, 1, 1};
    raw.exploitability = 2.0;
    raw.impact = 3.0;
    raw.has_v3 = true;
    return raw;
}

} // namespace

TEST_CASE("constraint_admits: inclusive by default, strict honors qualifiers") {
    const VersionConstraint at_most{ConstraintRelation::at_most, v("1.0.1g"), true};
    CHECK(constraint_admits(at_most, v("1.0.1f")));
    CHECK(constraint_admits(at_most, v("1.0.1g"))); // bound itself, inclusive reading
    CHECK_FALSE(constraint_admits(at_most, v("1.0.2")));
    CHECK(constraint_admits(at_most, v("1.0.1f"), /*strict=*/true));
    CHECK_FALSE(constraint_admits(at_most, v("1.0.1g"), /*strict=*/true)); // now exclusive

    // Bounds that did not come from a qualifier word stay inclusive even in
    // strict mode (structural data we have no reason to doubt).
    const VersionConstraint plain{ConstraintRelation::at_most, v("2.0"), false};
    CHECK(constraint_admits(plain, v("2.0"), /*strict=*/true));

    const VersionConstraint at_least{ConstraintRelation::at_least, v("2.8"), true};
    CHECK(constraint_admits(at_least, v("2.8")));
    CHECK(constraint_admits(at_least, v("3.0")));
    CHECK_FALSE(constraint_admits(at_least, v("2.7.9")));
    CHECK_FALSE(constraint_admits(at_least, v("2.8"), /*strict=*/true));

    const VersionConstraint exactly{ConstraintRelation::exactly, v("1.6.34"), false};
    CHECK(constraint_admits(exactly, v("1.6.34")));
    CHECK(constraint_admits(exactly, v("1.6.34.0"))); // numerically equal
    CHECK_FALSE(constraint_admits(exactly, v("1.6.35")));
}

TEST_CASE("CVE id validation") {
    CHECK(is_valid_cve_id("CVE-2014-0160"));
    CHECK(is_valid_cve_id("CVE-2023-41064")); // five-digit sequence numbers exist
    CHECK_FALSE(is_valid_cve_id("cve-2014-0160"));
    CHECK_FALSE(is_valid_cve_id("CVE-14-0160"));
    CHECK_FALSE(is_valid_cve_id("CVE-2014-160"));
    CHECK_FALSE(is_valid_cve_id("CVE-2014-0160x"));
    CHECK_FALSE(is_valid_cve_id(""));
}

TEST_CASE("ingest: JSONL mirror records") {
    auto ingest = ingest_feed(data_file("cve_2014_0160.jsonl"));
    CHECK(ingest.skipped.empty());
    REQUIRE(ingest.records.size() == 1);
    const auto& r = ingest.records[0];
    CHECK(r.cve_id == "CVE-2014-0160");
    CHECK(r.published == Date{2014, 4, 7});
    CHECK(r.exploitability == 3.9);
    CHECK(r.impact == 3.6);
    CHECK(r.has_v3);
    CHECK(r.curated_functions ==
          std::vector<std::string>{"dtls1_process_heartbeat", "tls1_process_heartbeat"});
}

TEST_CASE("ingest: gzipped feeds are transparently inflated") {
    auto plain = ingest_feed(data_file("cve_2014_0160.jsonl"));
    auto gz = ingest_feed(std::string(APKRISK_FIXTURE_DIR) + "/cve_2014_0160.jsonl.gz");
    REQUIRE(gz.records.size() == plain.records.size());
    CHECK(gz.records[0].cve_id == plain.records[0].cve_id);
    CHECK(gz.records[0].description == plain.records[0].description);
}

TEST_CASE("ingest: NVD feed dumps") {
    auto ingest = ingest_feed(data_file("nvd_sample.json"));
    CHECK(ingest.skipped.empty());
    REQUIRE(ingest.records.size() == 3);

    const auto& heartbleed = ingest.records[0];
    CHECK(heartbleed.cve_id == "CVE-2014-0160");
    CHECK(heartbleed.published == Date{2014, 4, 7});
    CHECK(heartbleed.exploitability == 3.9);
    CHECK(heartbleed.impact == 3.6);
    CHECK(heartbleed.has_v3);
    CHECK(heartbleed.v2_exploitability == 10.0);
    CHECK(heartbleed.v2_impact == 2.9);
    CHECK(heartbleed.curated_functions.empty()); // NVD has no curated lists
    // Explicit-version CPE matches become exact constraints.
    std::vector<std::string> openssl_constraints;
    for (const auto& p : heartbleed.listed_products)
        if (p.name == "openssl")
            for (const auto& c : p.constraints)
                openssl_constraints.push_back(std::string(to_string(c.relation)) + " " +
                                              render_version(c.version));
    std::sort(openssl_constraints.begin(), openssl_constraints.end());
    CHECK(openssl_constraints ==
          std::vector<std::string>{"exactly 1.0.1", "exactly 1.0.1f"});

    // Range match: the end bound wins and is marked exclusive (*Excluding).
    const auto& png = ingest.records[1];
    REQUIRE(png.listed_products.size() == 1);
    CHECK(png.listed_products[0].name == "libpng");
    REQUIRE(png.listed_products[0].constraints.size() == 1);
    CHECK(png.listed_products[0].constraints[0] ==
          VersionConstraint{ConstraintRelation::at_most, v("1.6.32"), true});

    // v2-only item, configurations nested one level down; non-vulnerable
    // CPEs are ignored.
    const auto& old_png = ingest.records[2];
    CHECK_FALSE(old_png.has_v3);
    CHECK_FALSE(old_png.exploitability.has_value());
    CHECK(old_png.v2_exploitability == 8.6);
    CHECK(old_png.v2_impact == 6.4);
    REQUIRE(old_png.listed_products.size() == 1);
    CHECK(old_png.listed_products[0].name == "libpng");
    REQUIRE(old_png.listed_products[0].constraints.size() == 1);
    CHECK(old_png.listed_products[0].constraints[0] ==
          VersionConstraint{ConstraintRelation::exactly, v("1.4.2"), false});
}

TEST_CASE("ingest: malformed mirror lines are skipped with line numbers") {
    const std::string feed =
        R"({"cve_id":"CVE-2020-1111","description":"OpenSSL x","published":"2020-01-01","exploitability":1.0,"impact":1.0})"
        "\n"
        R"({"cve_id":"not-a-cve","description":"y","published":"2020-01-01"})"
        "\n"
        "this line is not json\n"
        R"({"cve_id":"CVE-2020-2222","description":"z","published":"nonsense-date"})"
        "\n";
    auto ingest = ingest_feed_bytes(bytes_of(feed), "inline");
    CHECK(ingest.records.size() == 1);
    REQUIRE(ingest.skipped.size() == 3);
    CHECK(ingest.skipped[0].find("line 2") != std::string::npos);
    CHECK(ingest.skipped[1].find("line 3") != std::string::npos);
    CHECK(ingest.skipped[2].find("line 4") != std::string::npos);
}

TEST_CASE("ingest: unrecognizable bytes raise the format error") {
    CHECK_THROWS_AS(ingest_feed_bytes(bytes_of("<xml>nope</xml>"), "inline"),
                    UnrecognizedFeedFormatError);
    CHECK_THROWS_AS(ingest_feed_bytes(bytes_of(R"({"some":"json","without":"cve fields"})"),
                                      "inline"),
                    UnrecognizedFeedFormatError);
    CHECK_THROWS_AS(ingest_feed(data_file("labeled_constraints.tsv")),
                    UnrecognizedFeedFormatError);
}

TEST_CASE("detect_product: whole-word, case-insensitive, alias-aware") {
    auto sigs = shipped_signatures();
    auto hits = detect_product("The TLS implementation in OpenSSL 1.0.1 is affected", sigs);
    CHECK(hits == std::vector<std::string>{"OpenSSL"});

    hits = detect_product("libpng before 1.6.32 does not check lengths", sigs);
    CHECK(hits == std::vector<std::string>{"Libpng"});

    // Hyphenated compounds stay whole words: no substring hits.
    CHECK(detect_product("a libpng-like decoder of our own", sigs).empty());
    CHECK(detect_product("the monotonic clock wraps", sigs).empty());

    // Multi-word aliases must appear as a contiguous word sequence.
    hits = detect_product("An issue in Facebook React Native before 0.62", sigs);
    CHECK(hits == std::vector<std::string>{"React-Native"});

    hits = detect_product("SQLITE through 3.19.3 mishandles blobs", sigs);
    CHECK(hits == std::vector<std::string>{"Sqlite 3"});

    // Several tracked products in one description all count.
    hits = detect_product("Heap overflow in libwebp as shipped with ffmpeg builds", sigs);
    CHECK(hits.size() == 2);
}

TEST_CASE("constraint mining: qualifier words bind directionally") {
    CHECK(render(extract_version_constraint(
              "The TLS implementation in OpenSSL 1.0.1 before 1.0.1g is affected")) ==
          "exactly 1.0.1; at_most 1.0.1g");
    CHECK(render(extract_version_constraint("libpng 1.6.37 and earlier overflows")) ==
          "at_most 1.6.37");
    CHECK(render(extract_version_constraint("all releases since 2.8 are vulnerable")) ==
          "at_least 2.8");
    CHECK(render(extract_version_constraint("fixed after 1.2.3 was released")) ==
          "at_least 1.2.3");
    CHECK(render(extract_version_constraint("SQLite through 3.19.3 mishandles blobs")) ==
          "at_most 3.19.3");
    CHECK(render(extract_version_constraint("libjpeg-turbo 2.0.1 has an over-read")) ==
          "exactly 2.0.1");
    CHECK(render(extract_version_constraint("no versions are mentioned here")) == "-");
}

TEST_CASE("constraint mining: series placeholders are skipped") {
    CHECK(render(extract_version_constraint(
              "FFmpeg before 2.8.12, 3.0.x and 3.1.x before 3.1.9 are affected")) ==
          "at_most 2.8.12; at_most 3.1.9");
}

TEST_CASE("constraint mining: equal-distance conflicts keep both readings") {
    auto cs = extract_version_constraint("affected before 2.0 after the patch");
    REQUIRE(cs.size() == 2);
    CHECK(cs[0] == VersionConstraint{ConstraintRelation::at_most, v("2.0"), true});
    CHECK(cs[1] == VersionConstraint{ConstraintRelation::at_least, v("2.0"), true});
}

TEST_CASE("constraint mining: qualifiers only reach over their 5-word window") {
    CHECK(render(extract_version_constraint(
              "patched after the big rewrite of the parser shipped 9.9.9")) ==
          "exactly 9.9.9");
}

TEST_CASE("function mining: underscores, colons, parens, camelCase") {
    auto fns = extract_function_names(
        "a wrong calculation of row_factor in the png_check_chunk_length function");
    CHECK(fns == std::vector<std::string>{"row_factor", "png_check_chunk_length"});

    fns = extract_function_names("an out of bounds read in cv::predictOrdered, leading to DoS");
    REQUIRE(fns.size() == 1);
    CHECK(fns[0] == "cv::predictOrdered");

    fns = extract_function_names("a heap-based buffer overflow in GetLE16() and getNodeSize");
    CHECK(fns == std::vector<std::string>{"GetLE16", "getNodeSize"});

    // Sentence words, file names and ALL-CAPS acronyms are not functions.
    CHECK(extract_function_names("reading keys related to d1_both.c was demonstrated").empty() ==
          false); // d1_both.c carries an underscore: kept (curation can prune)
    CHECK(extract_function_names("the DTLS implementation allows remote attackers").empty());
    CHECK(extract_function_names("IPAddressFamily parsing has an overread").empty());
    CHECK(extract_function_names("plain words only, nothing named").empty());
}

TEST_CASE("build_database: fan-out, curated functions, exclusions") {
    auto ingest = ingest_feed(data_file("fixture_feed.jsonl"));
    REQUIRE(ingest.records.size() == 5);
    auto result = build_database(ingest.records, shipped_signatures());
    const CveDatabase& db = result.db;

    REQUIRE(db.entries.size() == 4);
    CHECK(db.entries[0].cve_id == "CVE-2014-0160"); // sorted by id
    CHECK(db.entries[0].product == "OpenSSL");
    CHECK(db.entries[1].cve_id == "CVE-2016-6309");
    CHECK(db.entries[1].product == "OpenSSL");
    CHECK(db.entries[2].cve_id == "CVE-2018-13785");
    CHECK(db.entries[2].product == "Libpng");
    CHECK(db.entries[3].cve_id == "CVE-2018-25009");
    CHECK(db.entries[3].product == "LibWebp");

    // Half a subscore pair is not grounds for exclusion: the record stays
    // and its findings surface as UNSCORED at scan time.
    const CveEntry& half = db.entries[1];
    CHECK(half.exploitability == 3.9);
    CHECK_FALSE(half.impact.has_value());
    CHECK(render(half.constraints) == "exactly 1.1.0a");

    const CveEntry& hb = db.entries[0];
    CHECK(hb.functions ==
          std::vector<std::string>{"dtls1_process_heartbeat", "tls1_process_heartbeat"});
    CHECK(hb.constraint_source == ConstraintSource::description);
    CHECK(render(hb.constraints) == "exactly 1.0.1; at_most 1.0.1g");
    CHECK(hb.cvss_source == "v3");
    CHECK_FALSE(hb.needs_review);

    const CveEntry& png = db.entries[2];
    CHECK(render(png.constraints) == "exactly 1.6.34");
    const auto& fns = png.functions; // mined, no curated override in the feed
    CHECK(std::find(fns.begin(), fns.end(), "png_check_chunk_length") != fns.end());

    const CveEntry& webp = db.entries[3];
    CHECK(render(webp.constraints) == "at_most 1.0.1");
    CHECK(webp.functions == std::vector<std::string>{"GetLE16"});

    // Untracked records are excluded with a note; curation is logged too.
    bool saw_no_product = false, saw_curated = false;
    for (const auto& line : result.log) {
        if (line.find("CVE-2018-1000001") != std::string::npos &&
            line.find("no tracked product") != std::string::npos)
            saw_no_product = true;
        if (line.find("CVE-2014-0160") != std::string::npos &&
            line.find("curated function list") != std::string::npos)
            saw_curated = true;
    }
    CHECK(saw_no_product);
    CHECK(saw_curated);

    // Every tracked product is present in the index, entries or not.
    CHECK(db.products().size() == 15);
}

TEST_CASE("build_database: structured feed constraints beat description mining") {
    auto ingest = ingest_feed(data_file("nvd_sample.json"));
    auto result = build_database(ingest.records, shipped_signatures());

    const CveEntry* hb = find_entry(result.db, "CVE-2014-0160", "OpenSSL");
    REQUIRE(hb != nullptr);
    CHECK(hb->constraint_source == ConstraintSource::feed);
    CHECK(render(hb->constraints) == "exactly 1.0.1; exactly 1.0.1f");

    const CveEntry* png = find_entry(result.db, "CVE-2017-12652", "Libpng");
    REQUIRE(png != nullptr);
    CHECK(png->constraint_source == ConstraintSource::feed);
    REQUIRE(png->constraints.size() == 1);
    CHECK(png->constraints[0] ==
          VersionConstraint{ConstraintRelation::at_most, v("1.6.32"), true});

    bool noted = false;
    for (const auto& line : result.log)
        if (line.find("CVE-2014-0160") != std::string::npos &&
            line.find("feed constraints") != std::string::npos)
            noted = true;
    CHECK(noted);
}

TEST_CASE("build_database: v2-only records need the opt-in") {
    auto ingest = ingest_feed(data_file("nvd_sample.json"));

    auto without = build_database(ingest.records, shipped_signatures());
    CHECK(find_entry(without.db, "CVE-2010-1205", "Libpng") == nullptr);
    bool logged = false;
    for (const auto& line : without.log)
        if (line.find("CVE-2010-1205") != std::string::npos &&
            line.find("no CVSS subscores") != std::string::npos &&
            line.find("v2 data present") != std::string::npos)
            logged = true;
    CHECK(logged);

    BuildOptions opts;
    opts.include_v2 = true;
    auto with = build_database(ingest.records, shipped_signatures(), opts);
    const CveEntry* old_png = find_entry(with.db, "CVE-2010-1205", "Libpng");
    REQUIRE(old_png != nullptr);
    CHECK(old_png->cvss_source == "v2");
    CHECK(old_png->exploitability == 8.6);
    CHECK(old_png->impact == 6.4);

    // v3 records are untouched by the option.
    const CveEntry* hb = find_entry(with.db, "CVE-2014-0160", "OpenSSL");
    REQUIRE(hb != nullptr);
    CHECK(hb->cvss_source == "v3");
}

TEST_CASE("build_database: opposite-direction bounds are flagged for review") {
    auto raw = make_raw("CVE-2020-9999", "OpenSSL after 1.0 and before 2.0 is affected");
    auto result = build_database({raw}, shipped_signatures());
    const CveEntry* e = find_entry(result.db, "CVE-2020-9999", "OpenSSL");
    REQUIRE(e != nullptr);
    CHECK(e->needs_review);
    CHECK(render(e->constraints) == "at_least 1.0; at_most 2.0");

    auto routine = make_raw("CVE-2020-8888", "OpenSSL 1.0.1 before 1.0.1g is affected");
    auto routine_result = build_database({routine}, shipped_signatures());
    const CveEntry* r = find_entry(routine_result.db, "CVE-2020-8888", "OpenSSL");
    REQUIRE(r != nullptr);
    CHECK_FALSE(r->needs_review); // exact + upper bound is the everyday shape
}

TEST_CASE("query: version filtering, unknown products, unpinned versions") {
    auto ingest = ingest_feed(data_file("fixture_feed.jsonl"));
    auto db = build_database(ingest.records, shipped_signatures()).db;

    auto hits = query(db, "OpenSSL", v("1.0.1f"));
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].cve_id == "CVE-2014-0160");

    CHECK(query(db, "OpenSSL", v("1.0.2")).empty());   // above the bound
    CHECK(query(db, "OpenSSL", v("0.9.8")).size() == 1); // below: at_most admits
    CHECK(query(db, "OpenSSL", v("1.0.1g")).size() == 1); // bound itself, inclusive
    CHECK(query(db, "OpenSSL", v("1.0.1g"), /*strict=*/true).empty());

    // No version pinned: every entry for the product applies.
    CHECK(query(db, "OpenSSL", std::nullopt).size() == 2); // heartbleed + the 1.1.0a record
    CHECK(query(db, "Libpng", v("1.6.34")).size() == 1);
    CHECK(query(db, "Libpng", v("1.6.35")).empty());

    // Tracked but entry-less products answer cleanly; unknown ones throw.
    CHECK(query(db, "Lua", std::nullopt).empty());
    CHECK_THROWS_AS(query(db, "NotAProduct", std::nullopt), UnknownProductError);
}

TEST_CASE("database files: round-trip and reproducible bytes") {
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    auto ingest = ingest_feed(data_file("fixture_feed.jsonl"));
    auto db = build_database(ingest.records, shipped_signatures()).db;
    CHECK(db.built_at == "2023-11-14T22:13:20Z");
    CHECK(db.feed_digest.size() == 64);

    const std::string serialized = serialize_database(db);
    auto reparsed = parse_database(serialized);
    CHECK(reparsed.entries == db.entries);
    CHECK(reparsed.built_at == db.built_at);
    CHECK(reparsed.feed_digest == db.feed_digest);
    CHECK(reparsed.products() == db.products());
    CHECK(serialize_database(reparsed) == serialized);

    // Same inputs, same epoch: byte-identical files.
    auto again = build_database(ingest.records, shipped_signatures()).db;
    CHECK(serialize_database(again) == serialized);

    const std::string path = std::string(APKRISK_TEST_TMP_DIR) + "/roundtrip.db";
    save_database(db, path);
    auto loaded = load_database(path);
    CHECK(loaded.entries == db.entries);
    unsetenv("SOURCE_DATE_EPOCH");

    CHECK_THROWS_AS(parse_database("definitely not a database"), Error);
    CHECK_THROWS_AS(load_database(std::string(APKRISK_TEST_TMP_DIR) + "/missing.db"), IoError);
}
