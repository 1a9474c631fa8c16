#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rcbf {

/// Line-oriented experiment configuration.
///
///   # comment (also after values)
///   [section]
///   key = value
///   [variant NAME]
///   section.key = value     # overrides applied when the variant runs
///
/// Keys are addressed as "section.key". Lists are comma separated. Every
/// lookup error names the source, the line and the field.
class Config {
 public:
  struct Entry {
    std::string value;
    /// 0 for values set programmatically (command line overrides).
    int line = 0;
  };
  struct Variant {
    std::string name;
    int line = 0;
    std::map<std::string, Entry> overrides;
  };

  /// Throws ConfigurationError with "source:line: message" diagnostics.
  static Config parse(std::string_view text, std::string source = "<config>");
  /// Throws IoError when the file cannot be read.
  static Config load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::vector<Variant>& variants() const { return variants_; }

  /// Sets or replaces a dotted key.
  void set(const std::string& key, std::string value, int line = 0);
  /// Copy of the base entries with the named variant's overrides applied and
  /// no variants of its own. Throws ConfigurationError for unknown names.
  Config with_variant(const std::string& name) const;
  /// Copy of the base entries without any variants.
  Config without_variants() const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::optional<std::vector<double>> find_doubles(const std::string& key) const;

  /// One of `choices`, with the alternatives listed in the error message.
  std::string get_choice(const std::string& key, const std::vector<std::string>& choices,
                         const std::string& fallback) const;

  /// Throws ConfigurationError naming the first key (base or variant) that is
  /// not in `known`. A known entry ending in ".*" admits any key with that
  /// prefix.
  void require_known(const std::set<std::string>& known) const;

  /// "source:line: field 'key': " prefix for diagnostics about `key`.
  std::string where(const std::string& key) const;

 private:
  const Entry& entry(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  std::vector<Variant> variants_;
};

/// Parses a finite double, or throws ConfigurationError mentioning `what`.
double parse_double(std::string_view text, const std::string& what);

}  // namespace rcbf
