#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factorspace {

// 64-bit FNV-1a, used to fingerprint configurations embedded in snapshots.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Common header of every binary snapshot: 8-byte magic, format version and
// the hash of the configuration that produced it.
struct SnapshotHeader {
    std::array<char, 8> magic{};
    std::uint32_t version = 1;
    std::uint64_t config_hash = 0;
};

// Little-endian binary writer/reader. Host byte order is assumed to be
// little-endian; the reader rejects truncated streams with DataError.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void header(std::string_view magic, std::uint32_t version, std::uint64_t config_hash);
    void u8(std::uint8_t v) { raw(&v, sizeof v); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(std::string_view s);
    void f64s(std::span<const double> v) { raw(v.data(), v.size_bytes()); }
    void i64s(std::span<const std::int64_t> v) { raw(v.data(), v.size_bytes()); }
    void raw(const void* p, std::size_t n);

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    // Reads the header and checks magic and version.
    SnapshotHeader header(std::string_view magic, std::uint32_t version);
    std::uint8_t u8() { std::uint8_t v; raw(&v, sizeof v); return v; }
    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
    double f64() { double v; raw(&v, sizeof v); return v; }
    std::string str();
    void f64s(std::span<double> v) { raw(v.data(), v.size_bytes()); }
    void i64s(std::span<std::int64_t> v) { raw(v.data(), v.size_bytes()); }
    void raw(void* p, std::size_t n);

private:
    std::istream& in_;
};

// Reads only the header of a snapshot file; returns false if the file is
// missing or the magic/version do not match.
bool peek_snapshot(const std::string& path, std::string_view magic, std::uint32_t version,
                   SnapshotHeader& out);

// Shortest round-trippable decimal form of a double ("%.17g" trimmed).
std::string format_double(double v);

}  // namespace factorspace
