#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace distillnn {

/// Ordered flat `key = value` text document. Used for manifests and reports.
class KeyValues {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  bool contains(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  /// Throws ContractError when the key is missing.
  const std::string& at(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  void merge(const KeyValues& other, const std::string& prefix = "");

  std::string to_string() const;
  /// Groups `section.key` entries under `[section]` headers.
  std::string to_sectioned_string() const;
  /// Accepts `key = value` lines, `#`/`;` comments and `[section]` headers;
  /// keys inside a section are stored as `section.key`.
  static KeyValues parse(const std::string& text);

  void write(const std::filesystem::path& path) const;
  static KeyValues read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);
bool parse_bool(const std::string& text);

/// Writes via a temporary file and rename so readers never see partial content.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace distillnn
