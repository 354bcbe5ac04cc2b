#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "orbsus/models.hpp"

namespace orbsus {

// Minimal TOML subset: [table], [[array-of-tables]], key = number | "string"
// | [num, num], full-line or trailing # comments.
namespace toml {

struct Value {
  enum class Kind { number, string, array } kind = Kind::number;
  double num = 0.0;
  std::string str;
  std::vector<double> arr;
};

struct Table {
  std::map<std::string, Value> kv;

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  const Value& at(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end()) fail(errc::config_error, "missing key '" + k + "'");
    return it->second;
  }
  double number(const std::string& k) const {
    const Value& v = at(k);
    if (v.kind != Value::Kind::number) fail(errc::config_error, "'" + k + "' must be a number");
    return v.num;
  }
  std::string string(const std::string& k) const {
    const Value& v = at(k);
    if (v.kind != Value::Kind::string) fail(errc::config_error, "'" + k + "' must be a string");
    return v.str;
  }
  std::vector<double> array(const std::string& k, std::size_t len) const {
    const Value& v = at(k);
    if (v.kind != Value::Kind::array || v.arr.size() != len)
      fail(errc::config_error, "'" + k + "' must be an array of " + std::to_string(len));
    return v.arr;
  }
};

struct Document {
  Table root;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> arrays;
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline Value parse_value(const std::string& raw, int line_no) {
  std::string s = trim(raw);
  auto bad = [&] [[noreturn]] () {
    fail(errc::config_error, "cannot parse value '" + s + "' on line " + std::to_string(line_no));
  };
  Value v;
  if (s.empty()) bad();
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') bad();
    v.kind = Value::Kind::string;
    v.str = s.substr(1, s.size() - 2);
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']') bad();
    v.kind = Value::Kind::array;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) bad();
      char* end = nullptr;
      double d = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0') bad();
      v.arr.push_back(d);
    }
    return v;
  }
  char* end = nullptr;
  v.num = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *trim(end).c_str() != '\0') bad();
  return v;
}

inline Document parse(const std::string& text) {
  Document doc;
  Table* current = &doc.root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    std::size_t quote = line.find('"');
    if (hash != std::string::npos && (quote == std::string::npos || hash < quote))
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.starts_with("[[") && line.ends_with("]]")) {
      std::string name = trim(line.substr(2, line.size() - 4));
      doc.arrays[name].emplace_back();
      current = &doc.arrays[name].back();
      continue;
    }
    if (line.front() == '[' && line.back() == ']') {
      std::string name = trim(line.substr(1, line.size() - 2));
      current = &doc.tables[name];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(errc::config_error, "expected 'key = value' on line " + std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    if (key.empty())
      fail(errc::config_error, "empty key on line " + std::to_string(line_no));
    current->kv[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return doc;
}

}  // namespace toml

inline ZoneSpec zone_from_table(const toml::Table& t) {
  ZoneSpec z;
  std::string shape = t.string("shape");
  if (shape == "square")
    z.shape = ZoneSpec::Shape::square;
  else if (shape == "disk")
    z.shape = ZoneSpec::Shape::disk;
  else
    fail(errc::config_error, "zone shape must be \"square\" or \"disk\"");
  z.K = t.number("K");
  if (!(z.K > 0)) fail(errc::config_error, "zone K must be positive");
  return z;
}

// A model description: either a hopping table ([lattice] + [[site]] + [[hop]])
// or a registry model by name with its parameters and a [zone] section.
inline Model model_from_toml(const std::string& text) {
  toml::Document doc = toml::parse(text);

  if (doc.root.has("model")) {
    RegistryParams p;
    if (doc.root.has("delta")) p.delta = doc.root.number("delta");
    if (doc.root.has("t")) p.t = doc.root.number("t");
    if (doc.root.has("onsite_gap")) p.onsite_gap = doc.root.number("onsite_gap");
    if (doc.root.has("a")) p.a = doc.root.number("a");
    if (auto it = doc.tables.find("zone"); it != doc.tables.end())
      p.zone = zone_from_table(it->second);
    return model_from_registry(doc.root.string("model"), p);
  }

  auto lat_it = doc.tables.find("lattice");
  if (lat_it == doc.tables.end())
    fail(errc::config_error, "model file needs a [lattice] section or a 'model' key");
  const toml::Table& lat = lat_it->second;
  ModelInput in;
  auto a1 = lat.array("a1", 2), a2 = lat.array("a2", 2);
  in.a1 = {a1[0], a1[1]};
  in.a2 = {a2[0], a2[1]};
  in.cutoff = lat.number("cutoff");
  for (const auto& site : doc.arrays["site"]) {
    auto p = site.array("position", 2);
    in.basis.push_back({p[0], p[1]});
  }
  if (in.basis.empty()) fail(errc::config_error, "model file has no [[site]] entries");
  for (const auto& hop : doc.arrays["hop"]) {
    Hop h;
    h.i = static_cast<int>(std::lround(hop.number("i")));
    h.j = static_cast<int>(std::lround(hop.number("j")));
    auto cell = hop.array("cell", 2);
    h.cell = {static_cast<int>(std::lround(cell[0])), static_cast<int>(std::lround(cell[1]))};
    auto t = hop.array("t", 2);
    h.t = cd(t[0], t[1]);
    in.hops.push_back(h);
  }
  return Model(build_model(in));
}

inline Model model_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(errc::config_error, "cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return model_from_toml(ss.str());
}

// ---- Canonical description and hash -------------------------------------------

inline std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string canonical_description(const Model& m) {
  std::ostringstream os;
  if (m.is_lattice()) {
    const LatticeModel& lm = m.lattice();
    os << "lattice;a1=" << hex_double(lm.a1.x) << "," << hex_double(lm.a1.y)
       << ";a2=" << hex_double(lm.a2.x) << "," << hex_double(lm.a2.y)
       << ";cutoff=" << hex_double(lm.cutoff);
    for (const auto& s : lm.basis) os << ";s=" << hex_double(s.x) << "," << hex_double(s.y);
    for (const auto& h : lm.hops)
      os << ";h=" << h.i << "," << h.j << "," << h.cell[0] << "," << h.cell[1] << ","
         << hex_double(h.t.real()) << "," << hex_double(h.t.imag());
  } else {
    const AnalyticFiber& a = m.analytic();
    os << "analytic;" << a.name << ";delta=" << hex_double(a.gap_delta) << ";zone="
       << (a.zone.shape == ZoneSpec::Shape::disk ? "disk" : "square") << ","
       << hex_double(a.zone.K);
  }
  return os.str();
}

inline std::string model_hash(const Model& m) {
  std::string s = canonical_description(m);
  unsigned long long h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

}  // namespace orbsus
