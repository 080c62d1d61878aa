#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "clustergcf/dense.hpp"
#include "clustergcf/types.hpp"

namespace cgcf {

// Little-endian binary writer/reader for the cache, checkpoint and embedding
// file formats. Throws IoError on stream failure and DataError on a magic or
// structure mismatch.
class BinaryWriter {
  public:
    explicit BinaryWriter(const std::string& path);
    ~BinaryWriter();

    void magic(const std::string& tag);  // raw bytes, no terminator handling
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void f32(float v);
    void str(const std::string& s);  // u32 length + bytes
    void f64_array(const std::vector<double>& v);
    void close();

  private:
    std::ofstream out_;
    std::string path_;
};

class BinaryReader {
  public:
    explicit BinaryReader(const std::string& path);

    void expect_magic(const std::string& tag);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    float f32();
    std::string str();
    std::vector<double> f64_array(std::size_t n);

  private:
    std::ifstream in_;
    std::string path_;
    void read_raw(void* dst, std::size_t n);
};

void write_matrix(BinaryWriter& w, const DenseMatrix& m);
DenseMatrix read_matrix(BinaryReader& r);

}  // namespace cgcf
