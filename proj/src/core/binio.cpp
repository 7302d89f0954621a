#include "lcl/core/binio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include "lcl/core/errors.hpp"

namespace lcl {

void BinWriter::put_u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void BinWriter::put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinWriter::put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinWriter::put_i64(std::int64_t v) { put_u64(static_cast<std::uint64_t>(v)); }

void BinWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void BinWriter::put_str(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    buf.append(s);
}

void BinWriter::put_vec(const Vector& v) {
    put_u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) put_f64(x);
}

void BinWriter::put_mat(const Matrix& m) {
    put_u32(static_cast<std::uint32_t>(m.rows));
    put_u32(static_cast<std::uint32_t>(m.cols));
    for (double x : m.data) put_f64(x);
}

std::uint8_t BinReader::get_u8() {
    if (pos + 1 > buf.size()) throw ConfigError("truncated binary payload");
    return static_cast<std::uint8_t>(buf[pos++]);
}

std::uint32_t BinReader::get_u32() {
    if (pos + 4 > buf.size()) throw ConfigError("truncated binary payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
}

std::uint64_t BinReader::get_u64() {
    if (pos + 8 > buf.size()) throw ConfigError("truncated binary payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
}

std::int64_t BinReader::get_i64() { return static_cast<std::int64_t>(get_u64()); }

double BinReader::get_f64() { return std::bit_cast<double>(get_u64()); }

std::string BinReader::get_str() {
    const std::uint32_t n = get_u32();
    if (pos + n > buf.size()) throw ConfigError("truncated binary payload");
    std::string s(buf.substr(pos, n));
    pos += n;
    return s;
}

Vector BinReader::get_vec() {
    const std::uint32_t n = get_u32();
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = get_f64();
    return v;
}

Matrix BinReader::get_mat() {
    const std::uint32_t rows = get_u32();
    const std::uint32_t cols = get_u32();
    Matrix m(rows, cols);
    for (double& x : m.data) x = get_f64();
    return m;
}

void write_file(const std::string& path, std::string_view bytes) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot open for writing: " + path);
    const std::size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
    const bool ok = (n == bytes.size()) && std::fclose(f) == 0;
    if (!ok) throw ConfigError("short write: " + path);
}

std::string read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("cannot open: " + path);
    std::string out;
    char chunk[1 << 14];
    std::size_t n = 0;
    while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0) out.append(chunk, n);
    std::fclose(f);
    return out;
}

}  // namespace lcl
