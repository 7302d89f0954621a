#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "lcl/core/matrix.hpp"

namespace lcl {

// Little-endian binary writer/reader for checkpoints. All multi-byte values
// are encoded explicitly so files are portable across hosts.
struct BinWriter {
    std::string buf;

    void put_u8(std::uint8_t v);
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_i64(std::int64_t v);
    void put_f64(double v);
    void put_str(std::string_view s);  // u32 length + bytes
    void put_vec(const Vector& v);     // u32 length + doubles
    void put_mat(const Matrix& m);     // u32 rows, u32 cols, doubles
};

// Throws ConfigError on truncated or malformed input.
struct BinReader {
    std::string_view buf;
    std::size_t pos = 0;

    explicit BinReader(std::string_view b) : buf(b) {}

    std::uint8_t get_u8();
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    std::int64_t get_i64();
    double get_f64();
    std::string get_str();
    Vector get_vec();
    Matrix get_mat();
    bool at_end() const { return pos == buf.size(); }
};

// Whole-file helpers; throw ConfigError on I/O failure.
void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace lcl
