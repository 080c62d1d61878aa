#include "clustergcf/serialize.hpp"

#include <bit>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

namespace cgcf {

BinaryWriter::BinaryWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
}

BinaryWriter::~BinaryWriter() = default;

void BinaryWriter::magic(const std::string& tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

void BinaryWriter::u8(std::uint8_t v) { out_.write(reinterpret_cast<const char*>(&v), 1); }

void BinaryWriter::u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }

void BinaryWriter::u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

void BinaryWriter::f32(float v) { out_.write(reinterpret_cast<const char*>(&v), 4); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::f64_array(const std::vector<double>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void BinaryWriter::close() {
    out_.close();
    if (!out_) throw IoError("write failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open for reading: " + path);
}

void BinaryReader::read_raw(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
        throw DataError("truncated file: " + path_);
}

void BinaryReader::expect_magic(const std::string& tag) {
    std::string got(tag.size(), '\0');
    read_raw(got.data(), got.size());
    if (got != tag) throw DataError("bad magic in " + path_);
}

std::uint8_t BinaryReader::u8() {
    std::uint8_t v;
    read_raw(&v, 1);
    return v;
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    read_raw(&v, 4);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    read_raw(&v, 8);
    return v;
}

double BinaryReader::f64() {
    double v;
    read_raw(&v, 8);
    return v;
}

float BinaryReader::f32() {
    float v;
    read_raw(&v, 4);
    return v;
}

std::string BinaryReader::str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n > 0) read_raw(s.data(), n);
    return s;
}

std::vector<double> BinaryReader::f64_array(std::size_t n) {
    std::vector<double> v(n);
    if (n > 0) read_raw(v.data(), n * sizeof(double));
    return v;
}

void write_matrix(BinaryWriter& w, const DenseMatrix& m) {
    w.u64(static_cast<std::uint64_t>(m.n_rows));
    w.u64(static_cast<std::uint64_t>(m.n_cols));
    w.f64_array(m.data);
}

DenseMatrix read_matrix(BinaryReader& r) {
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    DenseMatrix m(rows, cols);
    m.data = r.f64_array(static_cast<std::size_t>(rows * cols));
    return m;
}

}  // namespace cgcf
