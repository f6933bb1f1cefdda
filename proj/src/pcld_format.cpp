#include <bit>
#include <fstream>
#include <sstream>

#include "ptl/dataset.hpp"
#include "ptl/error.hpp"
#include "byte_io.hpp"

namespace ptl {

namespace {

using detail::get_le;
using detail::put_f64;
using detail::put_u32;

constexpr std::string_view kMagic = "PCLD";
constexpr std::size_t kHeaderBytes = 16;

}  // namespace

std::string encode_pcld(const PointCloud& cloud) {
  if (cloud.positions.size() > UINT32_MAX) throw FormatError("pcld: too many points");
  std::string out;
  out.reserve(kHeaderBytes + cloud.positions.size() * 24);
  out += kMagic;
  put_u32(out, kPcldVersion);
  put_u32(out, cloud.label);
  put_u32(out, static_cast<std::uint32_t>(cloud.positions.size()));
  for (const auto& p : cloud.positions) {
    for (double c : p) put_f64(out, c);
  }
  return out;
}

PointCloud decode_pcld(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("pcld: bad magic (expected \"PCLD\")");
  }
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("pcld: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kPcldVersion) {
    throw FormatError("pcld: unsupported version " + std::to_string(version));
  }
  PointCloud cloud;
  cloud.label = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  const std::size_t count = get_le(bytes, 12, 4);
  const std::size_t need = kHeaderBytes + count * 24;
  if (bytes.size() < need) {
    throw FormatError("pcld: truncated payload: header declares " + std::to_string(count) +
                      " points (" + std::to_string(need) + " bytes), file has " +
                      std::to_string(bytes.size()) + " bytes");
  }
  if (bytes.size() > need) {
    throw FormatError("pcld: " + std::to_string(bytes.size() - need) + " trailing bytes");
  }
  cloud.positions.resize(count);
  std::size_t offset = kHeaderBytes;
  for (auto& p : cloud.positions) {
    for (double& c : p) {
      c = std::bit_cast<double>(get_le(bytes, offset, 8));
      offset += 8;
    }
  }
  return cloud;
}

void write_pcld(const std::filesystem::path& path, const PointCloud& cloud) {
  const std::string bytes = encode_pcld(cloud);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud read_pcld(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_pcld(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ptl
