#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace apkrisk {

struct ElfSection {
    std::string name;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t type = 0;
    std::uint64_t flags = 0;
};

// Parsed shared object reduced to the two evidence streams matching works
// on: printable strings from read-only data and defined function symbols.
struct ElfArtifact {
    std::string machine; // "arm", "aarch64", "x86-64", or "machine-0xNN"
    bool is_64bit = false;
    std::vector<ElfSection> sections;
    std::vector<std::string> strings;   // printable runs, min length applied
    std::vector<std::string> functions; // defined function symbols, deduplicated
    bool stripped = false;              // no defined function symbols survived

    std::vector<std::uint8_t> bytes; // backing file content, immutable
};

inline constexpr int kDefaultMinStringLength = 4;

// Validates the ELF magic and the section header table, then populates
// sections, strings (extract_strings with min_len) and functions
// (extract_functions). Little-endian 32/64-bit only; big-endian data is
// rejected as malformed. Throws NotAnElfError / MalformedElfError.
ElfArtifact parse_elf(std::vector<std::uint8_t> bytes, int min_string_len = kDefaultMinStringLength);

// Maximal runs of printable ASCII (0x20..0x7E) of length >= min_len from
// the read-only data sections (.rodata and .rodata.*); falls back to a
// whole-file scan when no such section exists.
std::vector<std::string> extract_strings(const ElfArtifact& artifact, int min_len);

// Names of symbols typed as functions and defined in this object, in symbol
// table order with duplicates removed. Undefined imports and symbols living
// in linkage-stub sections (.plt*, .got*) are excluded. The dynamic symbol
// table is used when the full one was stripped away. Missing tables give an
// empty list.
std::vector<std::string> extract_functions(const ElfArtifact& artifact);

inline bool is_stripped(const ElfArtifact& artifact) { return artifact.functions.empty(); }

} // namespace apkrisk
