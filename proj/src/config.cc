#include "rcbf/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rcbf/errors.h"

namespace rcbf {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s, bool allow_dots) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [allow_dots](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
           (allow_dots && c == '.');
  });
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += items[i];
  }
  return out;
}

bool key_known(const std::set<std::string>& known, const std::string& key) {
  if (known.count(key)) return true;
  for (const std::string& k : known) {
    if (k.size() >= 2 && k.compare(k.size() - 2, 2, ".*") == 0 &&
        key.compare(0, k.size() - 1, k, 0, k.size() - 1) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

double parse_double(std::string_view text, const std::string& what) {
  text = trim(text);
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw ConfigurationError(what + "expected a finite number, got '" + std::string(text) +
                             "'");
  }
  return v;
}

Config Config::parse(std::string_view text, std::string source) {
  Config cfg;
  cfg.source_ = std::move(source);
  std::string section;
  Variant* variant = nullptr;
  int line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigurationError(cfg.source_ + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      std::string_view name = trim(line.substr(1, line.size() - 2));
      if (name.rfind("variant", 0) == 0 && name.size() > 7 &&
          std::isspace(static_cast<unsigned char>(name[7]))) {
        const std::string vname(trim(name.substr(7)));
        if (!is_identifier(vname, false)) fail("invalid variant name '" + vname + "'");
        for (const Variant& v : cfg.variants_) {
          if (v.name == vname) fail("duplicate variant '" + vname + "'");
        }
        cfg.variants_.push_back(Variant{vname, line_no, {}});
        variant = &cfg.variants_.back();
        section.clear();
      } else {
        if (!is_identifier(name, false)) fail("invalid section name '" + std::string(name) + "'");
        section = std::string(name);
        variant = nullptr;
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (value.empty()) fail("empty value for '" + key + "'");
    if (variant != nullptr) {
      if (!is_identifier(key, true) || key.find('.') == std::string::npos) {
        fail("variant keys must be dotted 'section.key', got '" + key + "'");
      }
      if (!variant->overrides.emplace(key, Entry{value, line_no}).second) {
        fail("duplicate key '" + key + "' in variant '" + variant->name + "'");
      }
      continue;
    }
    if (section.empty()) fail("key '" + key + "' appears before any section header");
    if (!is_identifier(key, false)) fail("invalid key '" + key + "'");
    const std::string dotted = section + "." + key;
    if (!cfg.entries_.emplace(dotted, Entry{value, line_no}).second) {
      fail("duplicate key '" + dotted + "'");
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::set(const std::string& key, std::string value, int line) {
  if (!is_identifier(key, true) || key.find('.') == std::string::npos) {
    throw ConfigurationError("override key must be dotted 'section.key', got '" + key + "'");
  }
  entries_[key] = Entry{std::move(value), line};
}

Config Config::with_variant(const std::string& name) const {
  Config out;
  out.source_ = source_;
  out.entries_ = entries_;
  const auto it = std::find_if(variants_.begin(), variants_.end(),
                               [&](const Variant& v) { return v.name == name; });
  if (it == variants_.end()) {
    throw ConfigurationError(source_ + ": unknown variant '" + name + "'");
  }
  for (const auto& [key, e] : it->overrides) out.entries_[key] = e;
  return out;
}

Config Config::without_variants() const {
  Config out;
  out.source_ = source_;
  out.entries_ = entries_;
  return out;
}

std::string Config::where(const std::string& key) const {
  std::string loc = source_;
  if (const auto it = entries_.find(key); it != entries_.end() && it->second.line > 0) {
    loc += ":" + std::to_string(it->second.line);
  }
  return loc + ": field '" + key + "': ";
}

const Config::Entry& Config::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ConfigurationError(source_ + ": missing required field '" + key + "'");
  }
  return it->second;
}

std::string Config::get_string(const std::string& key) const { return entry(key).value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? entry(key).value : fallback;
}

double Config::get_double(const std::string& key) const {
  return parse_double(entry(key).value, where(key));
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
  const std::string& text = entry(key).value;
  long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigurationError(where(key) + "expected an integer, got '" + text + "'");
  }
  return v;
}

long Config::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = entry(key).value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigurationError(where(key) + "expected true or false, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  const std::string& text = entry(key).value;
  std::vector<double> out;
  std::size_t start = 0;
  int index = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    const std::string_view item =
        std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos
                                                                        : comma - start);
    out.push_back(parse_double(item, where(key) + "item " + std::to_string(index) + ": "));
    ++index;
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::vector<double>> Config::find_doubles(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_doubles(key);
}

std::string Config::get_choice(const std::string& key, const std::vector<std::string>& choices,
                               const std::string& fallback) const {
  const std::string v = get_string(key, fallback);
  if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
    throw ConfigurationError(where(key) + "unknown value '" + v + "' (expected one of " +
                             join(choices) + ")");
  }
  return v;
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, e] : entries_) {
    if (!key_known(known, key)) {
      throw ConfigurationError(where(key) + "unknown field");
    }
  }
  for (const Variant& v : variants_) {
    for (const auto& [key, e] : v.overrides) {
      if (!key_known(known, key)) {
        throw ConfigurationError(source_ + ":" + std::to_string(e.line) + ": field '" + key +
                                 "' in variant '" + v.name + "': unknown field");
      }
    }
  }
}

}  // namespace rcbf
