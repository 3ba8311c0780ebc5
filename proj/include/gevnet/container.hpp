#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Versioned little-endian binary container shared by the geometry cache,
// prepared datasets and checkpoints: magic, format version, then tagged
// sections (8-byte tag, u64 payload length, payload).
namespace gev {

constexpr char kContainerMagic[8] = {'G', 'E', 'V', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kContainerVersion = 1;

class ContainerWriter {
 public:
  explicit ContainerWriter(const std::string& path);
  void add_bytes(const std::string& tag, const std::vector<std::uint8_t>& bytes);
  void add_f64(const std::string& tag, const std::vector<double>& values);
  void add_i32(const std::string& tag, const std::vector<std::int32_t>& values);
  void add_u32(const std::string& tag, const std::vector<std::uint32_t>& values);
  void add_text(const std::string& tag, const std::string& text);
  void finish();

 private:
  std::string path_;
  std::vector<std::uint8_t> buffer_;
  bool finished_ = false;
};

class ContainerReader {
 public:
  explicit ContainerReader(const std::string& path);  // validates magic + version
  bool has(const std::string& tag) const;
  std::vector<std::uint8_t> get_bytes(const std::string& tag) const;
  std::vector<double> get_f64(const std::string& tag) const;
  std::vector<std::int32_t> get_i32(const std::string& tag) const;
  std::vector<std::uint32_t> get_u32(const std::string& tag) const;
  std::string get_text(const std::string& tag) const;

 private:
  std::map<std::string, std::vector<std::uint8_t>> sections_;
};

}  // namespace gev
