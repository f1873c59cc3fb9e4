#include "bytes.hpp"

#include <fstream>
#include <iterator>

#include "bpdq/error.hpp"

namespace bpdq::detail {

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(ErrorKind::kTruncated, context_ + ": unexpected end of data at byte " +
                                           std::to_string(pos_));
  }
}

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return s;
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  need(n);
  const auto* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint64_t ByteReader::get(int n) {
  need(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace bpdq::detail
