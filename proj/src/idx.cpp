#include <zlib.h>

#include <fstream>

#include "tebkit/causal_mnist.hpp"
#include "tebkit/error.hpp"

namespace tebkit {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (!file) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  while (true) {
    const int got = gzread(file, buf, sizeof buf);
    if (got < 0) {
      int code = 0;
      const std::string msg = gzerror(file, &code);
      gzclose(file);
      throw ParseError("read error in " + path.string() + ": " + msg, bytes.size());
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), buf, buf + got);
  }
  gzclose(file);
  return bytes;
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("IDX header truncated", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("IDX magic must start with two zero bytes", 0);
  if (bytes[2] != kUnsignedByte) throw ParseError("unsupported IDX element type", 2);
  const std::size_t ndims = bytes[3];
  if (ndims == 0) throw ParseError("IDX file declares zero dimensions", 3);
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) throw ParseError("IDX dimension list truncated", bytes.size());
  IdxArray out;
  std::size_t payload = 1;
  for (std::size_t k = 0; k < ndims; ++k) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * k));
    payload *= out.dims.back();
  }
  if (bytes.size() < header + payload) {
    throw ParseError("IDX payload truncated: expected " + std::to_string(header + payload) +
                         " bytes, file has " + std::to_string(bytes.size()),
                     bytes.size());
  }
  if (bytes.size() > header + payload) {
    throw ParseError("trailing bytes after IDX payload", header + payload);
  }
  out.data.assign(bytes.begin() + header, bytes.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return parse_idx(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
  std::vector<std::uint8_t> out = {0, 0, kUnsignedByte, std::uint8_t(array.dims.size())};
  std::size_t payload = 1;
  for (auto d : array.dims) {
    put_be32(out, d);
    payload *= d;
  }
  if (payload != array.data.size()) throw ShapeError("IDX payload size does not match dims");
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

void write_idx(const IdxArray& array, const std::filesystem::path& path) {
  const auto bytes = encode_idx(array);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

MnistArchive load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  auto check_magic = [](const std::filesystem::path& p, std::uint8_t ndims, const char* what) {
    const auto bytes = slurp(p);
    if (bytes.size() < 4) throw ParseError(p.string() + ": header truncated", bytes.size());
    if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != kUnsignedByte || bytes[3] != ndims) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%08x", read_be32(bytes, 0));
      throw ParseError(p.string() + ": magic " + buf + " is not the " + what + " magic", 0);
    }
    try {
      return parse_idx(bytes);
    } catch (const ParseError& e) {
      throw ParseError(p.string() + ": " + e.what(), e.offset());
    }
  };
  auto images = check_magic(images_path, 3, "image (0x00000803)");
  auto labels = check_magic(labels_path, 1, "label (0x00000801)");
  if (images.dims[0] != labels.dims[0]) {
    throw ParseError("image count " + std::to_string(images.dims[0]) + " != label count " +
                         std::to_string(labels.dims[0]),
                     4);
  }
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (labels.data[i] > 9) throw ParseError("label outside 0..9", 8 + i);
  }
  MnistArchive a;
  a.count = images.dims[0];
  a.rows = images.dims[1];
  a.cols = images.dims[2];
  a.images = std::move(images.data);
  a.labels = std::move(labels.data);
  return a;
}

}  // namespace tebkit
