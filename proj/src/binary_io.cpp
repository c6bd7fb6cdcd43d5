#include "clusterprobe/binary_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "clusterprobe/error.hpp"

namespace clusterprobe::io {

namespace {

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }

void encode_u32(std::uint32_t v, unsigned char* out) {
  out[0] = static_cast<unsigned char>(v & 0xffu);
  out[1] = static_cast<unsigned char>((v >> 8) & 0xffu);
  out[2] = static_cast<unsigned char>((v >> 16) & 0xffu);
  out[3] = static_cast<unsigned char>((v >> 24) & 0xffu);
}

std::uint32_t decode_u32(const unsigned char* in) {
  return static_cast<std::uint32_t>(in[0]) |
         (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) |
         (static_cast<std::uint32_t>(in[3]) << 24);
}

}  // namespace

void write_u32_le(std::ostream& out, std::uint32_t value) {
  std::array<unsigned char, 4> buf{};
  encode_u32(value, buf.data());
  out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
}

std::uint32_t read_u32_le(std::istream& in) {
  std::array<unsigned char, 4> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw Error("io", "unexpected end of file reading u32");
  return decode_u32(buf.data());
}

void write_f32_le(std::ostream& out, std::span<const float> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    encode_u32(float_bits(values[i]), buf.data() + 4 * i);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

void read_f32_le(std::istream& in, std::span<float> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!in) throw Error("io", "unexpected end of file reading f32 values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(decode_u32(buf.data() + 4 * i));
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("io", "write failed for " + path.string());
}

}  // namespace clusterprobe::io
