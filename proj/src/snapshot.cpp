#include "factorspace/snapshot.hpp"

#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "factorspace/error.hpp"

namespace factorspace {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void BinaryWriter::header(std::string_view magic, std::uint32_t version, std::uint64_t config_hash) {
    std::array<char, 8> m{};
    std::memcpy(m.data(), magic.data(), std::min<std::size_t>(magic.size(), m.size()));
    raw(m.data(), m.size());
    u32(version);
    u64(config_hash);
}

void BinaryWriter::str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
}

void BinaryWriter::raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("write failed");
}

SnapshotHeader BinaryReader::header(std::string_view magic, std::uint32_t version) {
    SnapshotHeader h;
    raw(h.magic.data(), h.magic.size());
    if (std::string_view(h.magic.data(), std::min<std::size_t>(magic.size(), 8)) != magic.substr(0, 8))
        throw DataError(fmt::format("snapshot magic mismatch: expected {}", magic));
    h.version = u32();
    if (h.version != version)
        throw DataError(fmt::format("unsupported snapshot version {} (expected {})", h.version, version));
    h.config_hash = u64();
    return h;
}

std::string BinaryReader::str() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw DataError("corrupt snapshot: string too long");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

void BinaryReader::raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("truncated snapshot");
}

bool peek_snapshot(const std::string& path, std::string_view magic, std::uint32_t version,
                   SnapshotHeader& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    try {
        BinaryReader r(in);
        out = r.header(magic, version);
        return true;
    } catch (const DataError&) {
        return false;
    }
}

std::string format_double(double v) { return fmt::format("{}", v); }

}  // namespace factorspace
