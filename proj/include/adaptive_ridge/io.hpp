#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace ridge {

// Stored image: channel-major, then row-major per channel.
struct GridImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;
  std::vector<double> data;

  static GridImage from_image(const Image& im) {
    GridImage g;
    g.width = static_cast<std::uint32_t>(im.width);
    g.height = static_cast<std::uint32_t>(im.height);
    g.channels = 1;
    g.data = im.data;
    return g;
  }

  static GridImage from_stack(const ChannelStack& stack) {
    require(!stack.empty(), "GridImage: empty stack");
    GridImage g;
    g.width = static_cast<std::uint32_t>(stack[0].width);
    g.height = static_cast<std::uint32_t>(stack[0].height);
    g.channels = static_cast<std::uint32_t>(stack.size());
    for (const Image& im : stack) {
      require(same_shape(im, stack[0]), "GridImage: stack shape mismatch");
      g.data.insert(g.data.end(), im.data.begin(), im.data.end());
    }
    return g;
  }

  Image channel(int c = 0) const {
    Image im(static_cast<int>(height), static_cast<int>(width));
    size_t plane = static_cast<size_t>(width) * height;
    std::copy(data.begin() + c * plane, data.begin() + (c + 1) * plane, im.data.begin());
    return im;
  }

  ChannelStack to_stack() const {
    ChannelStack s;
    for (std::uint32_t c = 0; c < channels; ++c) s.push_back(channel(static_cast<int>(c)));
    return s;
  }
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline double get_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

// GRF1: magic "GRF1", u32le width/height/channels, f64le samples.
inline void write_grid(const std::string& path, const GridImage& g) {
  require_finite(g.data, "write_grid");
  require(g.data.size() == static_cast<size_t>(g.width) * g.height * g.channels,
          "write_grid: data length mismatch");
  std::string buf;
  buf.reserve(16 + 8 * g.data.size());
  buf += "GRF1";
  detail::put_u32le(buf, g.width);
  detail::put_u32le(buf, g.height);
  detail::put_u32le(buf, g.channels);
  for (double v : g.data) detail::put_f64le(buf, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("write_grid: cannot open '" + path + "'");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw ConfigError("write_grid: short write to '" + path + "'");
}

inline GridImage read_grid_bytes(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "GRF1") != 0)
    throw ConfigError("read_grid: bad magic in '" + origin + "'");
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  GridImage g;
  g.width = detail::get_u32le(p + 4);
  g.height = detail::get_u32le(p + 8);
  g.channels = detail::get_u32le(p + 12);
  size_t n = static_cast<size_t>(g.width) * g.height * g.channels;
  if (bytes.size() != 16 + 8 * n)
    throw ConfigError("read_grid: truncated payload in '" + origin + "'");
  g.data.resize(n);
  for (size_t i = 0; i < n; ++i) g.data[i] = detail::get_f64le(p + 16 + 8 * i);
  return g;
}

// GRF1 reader; 8-bit PGM (P5 or P2) is imported with values divided by 255.
inline GridImage read_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("read_grid: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string bytes = ss.str();
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    std::istringstream hs(bytes);
    std::string magic;
    hs >> magic;
    auto next_token = [&hs]() {
      std::string tok;
      while (hs >> tok) {
        if (tok[0] == '#') {
          std::string rest;
          std::getline(hs, rest);
          continue;
        }
        return tok;
      }
      throw ConfigError("read_grid: truncated PGM header");
    };
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    require(w > 0 && h > 0, "read_grid: bad PGM dimensions");
    if (maxval != 255) throw ConfigError("read_grid: only 8-bit PGM supported");
    GridImage g;
    g.width = static_cast<std::uint32_t>(w);
    g.height = static_cast<std::uint32_t>(h);
    g.channels = 1;
    g.data.resize(static_cast<size_t>(w) * h);
    if (magic == "P5") {
      size_t start = static_cast<size_t>(hs.tellg()) + 1;  // single whitespace after maxval
      if (bytes.size() < start + g.data.size())
        throw ConfigError("read_grid: truncated PGM payload in '" + path + "'");
      for (size_t i = 0; i < g.data.size(); ++i)
        g.data[i] = static_cast<unsigned char>(bytes[start + i]) / 255.0;
    } else {
      for (size_t i = 0; i < g.data.size(); ++i) {
        int v = std::stoi(next_token());
        g.data[i] = v / 255.0;
      }
    }
    return g;
  }
  return read_grid_bytes(bytes, path);
}

// ---------------------------------------------------------------------------
// ARRF 1: named double arrays in plain text, 17 significant digits.
// ---------------------------------------------------------------------------

struct NamedArray {
  std::string name;
  std::vector<int> dims;
  std::vector<double> values;

  int count() const {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
  }
};

inline void write_arrays(const std::string& path, const std::vector<NamedArray>& arrays) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_arrays: cannot open '" + path + "'");
  f << "ARRF 1\n";
  char buf[64];
  for (const NamedArray& a : arrays) {
    require(!a.name.empty(), "write_arrays: empty array name");
    require(static_cast<int>(a.values.size()) == a.count(), "write_arrays: dims mismatch");
    f << a.name << "\n" << a.dims.size();
    for (int d : a.dims) f << ' ' << d;
    f << "\n";
    for (size_t i = 0; i < a.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", a.values[i]);
      f << buf << ((i + 1) % 8 == 0 || i + 1 == a.values.size() ? '\n' : ' ');
    }
  }
  if (!f) throw ConfigError("write_arrays: short write to '" + path + "'");
}

inline std::vector<NamedArray> read_arrays(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("read_arrays: cannot open '" + path + "'");
  std::string header;
  std::getline(f, header);
  if (header != "ARRF 1") throw ConfigError("read_arrays: bad header in '" + path + "'");
  std::vector<NamedArray> out;
  std::string name;
  while (f >> name) {
    NamedArray a;
    a.name = name;
    int ndims = 0;
    if (!(f >> ndims) || ndims < 0 || ndims > 8)
      throw ConfigError("read_arrays: bad dimension count for '" + name + "'");
    a.dims.resize(ndims);
    for (int& d : a.dims) {
      if (!(f >> d) || d <= 0) throw ConfigError("read_arrays: bad dimension for '" + name + "'");
    }
    a.values.resize(a.count());
    for (double& v : a.values) {
      if (!(f >> v)) throw ConfigError("read_arrays: truncated values for '" + name + "'");
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const NamedArray& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Plain-text configuration: [section] headers, key = value lines, '#'
// comments. Unknown sections or keys are rejected against a schema.
// ---------------------------------------------------------------------------

struct Config {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string origin;

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end() || !s->second.count(key))
      throw ConfigError("missing key '" + key + "' in [" + section + "] (" + origin + ")");
    return s->second.at(key);
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
      size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' in [" + section + "] is not a number: '" + v + "' (" +
                        origin + ")");
    }
  }

  double get_double_or(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  int get_int(const std::string& section, const std::string& key) const {
    double d = get_double(section, key);
    int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
      throw ConfigError("key '" + key + "' in [" + section + "] is not an integer (" + origin + ")");
    return i;
  }

  int get_int_or(const std::string& section, const std::string& key, int fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }
};

using ConfigSchema = std::map<std::string, std::set<std::string>>;

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline Config parse_config(const std::string& path, const ConfigSchema& schema) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  Config cfg;
  cfg.origin = path;
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(path + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!schema.count(section))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown section [" + section + "]");
      cfg.sections[section];
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any [section]");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (!schema.at(section).count(key))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' in [" +
                        section + "]");
    if (cfg.sections[section].count(key))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.sections[section][key] = value;
  }
  return cfg;
}

// key: value report lines consumed by the analyze subcommands
inline void write_report(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("write_report: cannot open '" + path + "'");
  for (const auto& [k, v] : kv) f << k << ": " << v << "\n";
}

}  // namespace ridge
