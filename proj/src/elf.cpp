#include "apkrisk/elf.hpp"

#include <cstdio>
#include <set>

#include "apkrisk/errors.hpp"

namespace apkrisk {

namespace {

constexpr std::uint32_t kShtNobits = 8;
constexpr std::uint16_t kShnLoReserve = 0xff00;

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64(const std::uint8_t* p) {
    return static_cast<std::uint64_t>(read_u32(p)) |
           (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
}

std::string machine_name(std::uint16_t machine) {
    switch (machine) {
    case 40: return "arm";
    case 183: return "aarch64";
    case 62: return "x86-64";
    default: {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "machine-0x%x", machine);
        return buf;
    }
    }
}

// NUL-terminated name out of a string table section; empty on any overrun.
std::string table_string(const std::vector<std::uint8_t>& bytes, std::uint64_t table_offset,
                         std::uint64_t table_size, std::uint64_t index) {
    if (index >= table_size) return {};
    const std::uint64_t start = table_offset + index;
    std::uint64_t end = start;
    const std::uint64_t limit = table_offset + table_size;
    while (end < limit && bytes[end] != 0) ++end;
    return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes.begin() + static_cast<std::ptrdiff_t>(end));
}

const ElfSection* find_section(const ElfArtifact& artifact, const std::string& name) {
    for (const auto& s : artifact.sections)
        if (s.name == name) return &s;
    return nullptr;
}

void scan_printable_runs(const std::uint8_t* data, std::size_t size, int min_len,
                         std::vector<std::string>& out) {
    std::size_t run_start = 0;
    std::size_t i = 0;
    auto flush = [&](std::size_t end) {
        if (end - run_start >= static_cast<std::size_t>(min_len))
            out.emplace_back(reinterpret_cast<const char*>(data + run_start), end - run_start);
    };
    for (; i < size; ++i) {
        if (data[i] >= 0x20 && data[i] <= 0x7E) continue;
        flush(i);
        run_start = i + 1;
    }
    flush(size);
}

// Pulls defined function names out of one symbol table section. Returns in
// table order, deduplicated.
std::vector<std::string> functions_from_table(const ElfArtifact& artifact, const ElfSection& symtab,
                                              const ElfSection& strtab) {
    const std::size_t entry_size = artifact.is_64bit ? 24 : 16;
    const std::uint64_t count = symtab.length / entry_size;
    const auto& bytes = artifact.bytes;

    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t* sym = bytes.data() + symtab.offset + i * entry_size;
        const std::uint32_t name_index = read_u32(sym);
        const std::uint8_t info = artifact.is_64bit ? sym[4] : sym[12];
        const std::uint16_t shndx = artifact.is_64bit ? read_u16(sym + 6) : read_u16(sym + 14);

        if ((info & 0x0F) != 2) continue;                  // STT_FUNC only
        if (shndx == 0 || shndx >= kShnLoReserve) continue; // undefined or special

        // Linkage stubs point at real code elsewhere; they are not evidence
        // that this library defines the function.
        if (shndx < artifact.sections.size()) {
            const std::string& home = artifact.sections[shndx].name;
            if (home.rfind(".plt", 0) == 0 || home.rfind(".got", 0) == 0) continue;
        }

        std::string name = table_string(bytes, strtab.offset, strtab.length, name_index);
        if (name.empty()) continue;
        if (seen.insert(name).second) out.push_back(std::move(name));
    }
    return out;
}

} // namespace

ElfArtifact parse_elf(std::vector<std::uint8_t> bytes, int min_string_len) {
    if (bytes.size() < 4 || bytes[0] != 0x7F || bytes[1] != 'E' || bytes[2] != 'L' ||
        bytes[3] != 'F')
        throw NotAnElfError("bad ELF magic");

    if (bytes.size() < 52) throw MalformedElfError("truncated ELF header");
    const std::uint8_t ei_class = bytes[4];
    const std::uint8_t ei_data = bytes[5];
    if (ei_class != 1 && ei_class != 2) throw MalformedElfError("unknown ELF class");
    if (ei_data == 2) throw MalformedElfError("big-endian objects are not supported");
    if (ei_data != 1) throw MalformedElfError("unknown ELF data encoding");

    ElfArtifact artifact;
    artifact.is_64bit = ei_class == 2;
    artifact.bytes = std::move(bytes);
    const auto& buf = artifact.bytes;

    if (artifact.is_64bit && buf.size() < 64) throw MalformedElfError("truncated ELF header");
    artifact.machine = machine_name(read_u16(buf.data() + 18));

    const std::uint64_t shoff = artifact.is_64bit ? read_u64(buf.data() + 40) : read_u32(buf.data() + 32);
    const std::uint16_t shentsize =
        read_u16(buf.data() + (artifact.is_64bit ? 58 : 46));
    const std::uint16_t shnum = read_u16(buf.data() + (artifact.is_64bit ? 60 : 48));
    const std::uint16_t shstrndx = read_u16(buf.data() + (artifact.is_64bit ? 62 : 50));

    if (shoff != 0 && shnum != 0) {
        const std::size_t min_entry = artifact.is_64bit ? 64 : 40;
        if (shentsize < min_entry) throw MalformedElfError("section header entries too small");
        if (shoff > buf.size() ||
            static_cast<std::uint64_t>(shentsize) * shnum > buf.size() - shoff)
            throw MalformedElfError("section header table extends past end of file");

        // First pass: raw geometry of every section.
        struct RawHeader {
            std::uint32_t name_index;
        };
        std::vector<RawHeader> raw(shnum);
        artifact.sections.resize(shnum);
        for (std::uint16_t i = 0; i < shnum; ++i) {
            const std::uint8_t* sh = buf.data() + shoff + static_cast<std::uint64_t>(i) * shentsize;
            ElfSection& sec = artifact.sections[i];
            raw[i].name_index = read_u32(sh);
            sec.type = read_u32(sh + 4);
            if (artifact.is_64bit) {
                sec.flags = read_u64(sh + 8);
                sec.offset = read_u64(sh + 24);
                sec.length = read_u64(sh + 32);
            } else {
                sec.flags = read_u32(sh + 8);
                sec.offset = read_u32(sh + 16);
                sec.length = read_u32(sh + 20);
            }
            if (sec.type != kShtNobits && sec.length != 0 &&
                (sec.offset > buf.size() || sec.length > buf.size() - sec.offset))
                throw MalformedElfError("section data extends past end of file");
        }

        // Second pass: names out of the section header string table.
        if (shstrndx < shnum) {
            const ElfSection& shstr = artifact.sections[shstrndx];
            for (std::uint16_t i = 0; i < shnum; ++i)
                artifact.sections[i].name =
                    table_string(buf, shstr.offset, shstr.length, raw[i].name_index);
        }
    }

    artifact.strings = extract_strings(artifact, min_string_len);
    artifact.functions = extract_functions(artifact);
    artifact.stripped = artifact.functions.empty();
    return artifact;
}

std::vector<std::string> extract_strings(const ElfArtifact& artifact, int min_len) {
    std::vector<std::string> out;
    bool found_rodata = false;
    for (const auto& s : artifact.sections) {
        if (s.type == kShtNobits || s.length == 0) continue;
        if (s.name != ".rodata" && s.name.rfind(".rodata.", 0) != 0) continue;
        found_rodata = true;
        scan_printable_runs(artifact.bytes.data() + s.offset, s.length, min_len, out);
    }
    if (!found_rodata)
        scan_printable_runs(artifact.bytes.data(), artifact.bytes.size(), min_len, out);
    return out;
}

std::vector<std::string> extract_functions(const ElfArtifact& artifact) {
    // Prefer the full symbol table; fall back to the dynamic one when the
    // object was stripped.
    const std::pair<const char*, const char*> tables[] = {{".symtab", ".strtab"},
                                                          {".dynsym", ".dynstr"}};
    for (const auto& [sym_name, str_name] : tables) {
        const ElfSection* symtab = find_section(artifact, sym_name);
        const ElfSection* strtab = find_section(artifact, str_name);
        if (symtab == nullptr || strtab == nullptr) continue;
        if (symtab->type == kShtNobits || strtab->type == kShtNobits) continue;
        auto functions = functions_from_table(artifact, *symtab, *strtab);
        if (!functions.empty()) return functions;
    }
    return {};
}

} // namespace apkrisk
