#include "gevnet/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gevnet/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container format is little-endian; big-endian hosts need byte swapping");

namespace gev {

namespace {

std::string pad_tag(const std::string& tag) {
  if (tag.size() > 8) throw ContractViolation("container: tag longer than 8 bytes");
  std::string t = tag;
  t.resize(8, ' ');
  return t;
}

}  // namespace

ContainerWriter::ContainerWriter(const std::string& path) : path_(path) {
  buffer_.insert(buffer_.end(), kContainerMagic, kContainerMagic + 8);
  const std::uint32_t ver = kContainerVersion;
  const auto* p = reinterpret_cast<const std::uint8_t*>(&ver);
  buffer_.insert(buffer_.end(), p, p + 4);
}

void ContainerWriter::add_bytes(const std::string& tag, const std::vector<std::uint8_t>& bytes) {
  const std::string t = pad_tag(tag);
  buffer_.insert(buffer_.end(), t.begin(), t.end());
  const std::uint64_t len = bytes.size();
  const auto* p = reinterpret_cast<const std::uint8_t*>(&len);
  buffer_.insert(buffer_.end(), p, p + 8);
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

void ContainerWriter::add_f64(const std::string& tag, const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 8);
  std::memcpy(bytes.data(), values.data(), bytes.size());
  add_bytes(tag, bytes);
}

void ContainerWriter::add_i32(const std::string& tag, const std::vector<std::int32_t>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  std::memcpy(bytes.data(), values.data(), bytes.size());
  add_bytes(tag, bytes);
}

void ContainerWriter::add_u32(const std::string& tag, const std::vector<std::uint32_t>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  std::memcpy(bytes.data(), values.data(), bytes.size());
  add_bytes(tag, bytes);
}

void ContainerWriter::add_text(const std::string& tag, const std::string& text) {
  add_bytes(tag, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void ContainerWriter::finish() {
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw FormatError("container: cannot open for writing: " + path_);
  out.write(reinterpret_cast<const char*>(buffer_.data()), buffer_.size());
  if (!out) throw FormatError("container: write failed: " + path_);
  finished_ = true;
}

ContainerReader::ContainerReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("container: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kContainerMagic, 8) != 0)
    throw FormatError("container: bad magic in " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != kContainerVersion)
    throw FormatError("container: unsupported format version in " + path);
  while (true) {
    char tag[8];
    in.read(tag, 8);
    if (in.eof()) break;
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (!in) throw FormatError("container: truncated section header in " + path);
    std::vector<std::uint8_t> payload(len);
    in.read(reinterpret_cast<char*>(payload.data()), len);
    if (!in) throw FormatError("container: truncated section payload in " + path);
    sections_[std::string(tag, 8)] = std::move(payload);
  }
}

bool ContainerReader::has(const std::string& tag) const {
  return sections_.count(pad_tag(tag)) > 0;
}

std::vector<std::uint8_t> ContainerReader::get_bytes(const std::string& tag) const {
  auto it = sections_.find(pad_tag(tag));
  if (it == sections_.end()) throw FormatError("container: missing section " + tag);
  return it->second;
}

std::vector<double> ContainerReader::get_f64(const std::string& tag) const {
  const auto bytes = get_bytes(tag);
  if (bytes.size() % 8) throw FormatError("container: misaligned f64 section " + tag);
  std::vector<double> out(bytes.size() / 8);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::vector<std::int32_t> ContainerReader::get_i32(const std::string& tag) const {
  const auto bytes = get_bytes(tag);
  if (bytes.size() % 4) throw FormatError("container: misaligned i32 section " + tag);
  std::vector<std::int32_t> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::vector<std::uint32_t> ContainerReader::get_u32(const std::string& tag) const {
  const auto bytes = get_bytes(tag);
  if (bytes.size() % 4) throw FormatError("container: misaligned u32 section " + tag);
  std::vector<std::uint32_t> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string ContainerReader::get_text(const std::string& tag) const {
  const auto bytes = get_bytes(tag);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace gev
