// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "toml.hpp"

namespace clab::cli {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

json to_json(const toml::node& n, const std::string& path, Config& cfg) {
  cfg.lines[path] = static_cast<int>(n.source().begin.line);
  if (const auto* t = n.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = to_json(v, join(path, std::string(k.str())), cfg);
    return j;
  }
  if (const auto* a = n.as_array()) {
    json j = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) j.push_back(to_json(*a->get(i), path + "[" + std::to_string(i) + "]", cfg));
    return j;
  }
  if (const auto* v = n.as_integer()) return json(v->get());
  if (const auto* v = n.as_floating_point()) return json(v->get());
  if (const auto* v = n.as_boolean()) return json(v->get());
  if (const auto* v = n.as_string()) return json(v->get());
  throw ConfigError(cfg.file + ":" + std::to_string(n.source().begin.line) + ": " + path +
                    ": dates and times are not accepted");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Config parse_toml(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.file = name;
  try {
    const toml::table t = toml::parse(text, name);
    cfg.tree = to_json(t, "", cfg);
  } catch (const toml::parse_error& e) {
    throw ConfigError(name + ":" + std::to_string(e.source().begin.line) + ":" +
                      std::to_string(e.source().begin.column) + ": " + std::string(e.description()));
  }
  return cfg;
}

Config parse_json(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.file = name;
  try {
    cfg.tree = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ConfigError(name + ":" + std::to_string(line) + ": " + e.what());
  }
  if (!cfg.tree.is_object()) throw ConfigError(name + ": top level must be an object");
  return cfg;
}

Config load_config(const std::string& path) {
  const std::string text = read_file(path);
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".toml") return parse_toml(text, path);
  if (ext == ".json") return parse_json(text, path);
  throw ConfigError(path + ": config must end in .toml or .json");
}

std::uint64_t config_hash(const json& tree) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tree.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Section::Section(const Config& cfg, const json& node, std::string path)
    : cfg_(&cfg), node_(&node), path_(std::move(path)) {
  if (!node.is_object()) throw ConfigError(where("") + "expected a table");
}

bool Section::has(const std::string& key) const { return node_->contains(key); }

const json* Section::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = node_->find(key);
  return it == node_->end() ? nullptr : &*it;
}

std::string Section::where(const std::string& key) const {
  const std::string p = key.empty() ? path_ : join(path_, key);
  std::string loc = cfg_->file;
  const auto it = cfg_->lines.find(p);
  if (it != cfg_->lines.end()) loc += ":" + std::to_string(it->second);
  return loc + ": " + (p.empty() ? std::string("<root>") : p) + ": ";
}

void Section::fail(const std::string& key, const std::string& what) const { throw ConfigError(where(key) + what); }

double Section::number(const std::string& key, double fallback) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) fail(key, "expected a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

double Section::positive(const std::string& key, double fallback) {
  const double d = number(key, fallback);
  if (!(d > 0.0)) fail(key, "must be > 0");
  return d;
}

long Section::integer(const std::string& key, long fallback, long lo, long hi) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) fail(key, "expected an integer");
  const long i = v->get<long>();
  if (i < lo || i > hi) fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return i;
}

bool Section::boolean(const std::string& key, bool fallback) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) fail(key, "expected true or false");
  return v->get<bool>();
}

std::string Section::text(const std::string& key, const std::string& fallback) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) fail(key, "expected a string");
  return v->get<std::string>();
}

std::string Section::choice(const std::string& key, const std::string& fallback,
                            const std::vector<std::string>& options) {
  const std::string s = text(key, fallback);
  for (const auto& o : options)
    if (s == o) return s;
  std::string list;
  for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
  fail(key, "'" + s + "' is not one of {" + list + "}");
}

std::vector<double> Section::numbers(const std::string& key, const std::vector<double>& fallback) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_array() || v->empty()) fail(key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) fail(key, "expected a non-empty array of numbers");
    out.push_back(e.get<double>());
    if (!std::isfinite(out.back())) fail(key, "entries must be finite");
  }
  return out;
}

std::vector<long> Section::integers(const std::string& key, const std::vector<long>& fallback, long lo, long hi) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_array() || v->empty()) fail(key, "expected a non-empty array of integers");
  std::vector<long> out;
  for (const auto& e : *v) {
    if (!e.is_number_integer()) fail(key, "expected a non-empty array of integers");
    out.push_back(e.get<long>());
    if (out.back() < lo || out.back() > hi)
      fail(key, "entries must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return out;
}

std::vector<std::string> Section::choices(const std::string& key, const std::vector<std::string>& fallback,
                                          const std::vector<std::string>& options) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_array() || v->empty()) fail(key, "expected a non-empty array of strings");
  std::vector<std::string> out;
  for (const auto& e : *v) {
    if (!e.is_string()) fail(key, "expected a non-empty array of strings");
    const auto s = e.get<std::string>();
    bool ok = false;
    for (const auto& o : options) ok = ok || s == o;
    if (!ok) fail(key, "'" + s + "' is not a known option");
    out.push_back(s);
  }
  return out;
}

namespace {
bool complex_of(const json& v, std::complex<double>& out) {
  if (v.is_number()) {
    out = {v.get<double>(), 0.0};
    return std::isfinite(out.real());
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    out = {v[0].get<double>(), v[1].get<double>()};
    return std::isfinite(out.real()) && std::isfinite(out.imag());
  }
  return false;
}
}  // namespace

std::complex<double> Section::complex(const std::string& key, std::complex<double> fallback) {
  const json* v = lookup(key);
  if (v == nullptr) return fallback;
  std::complex<double> c;
  if (!complex_of(*v, c)) fail(key, "expected a finite number or [re, im]");
  return c;
}

std::vector<std::complex<double>> Section::complexes(const std::string& key) {
  const json* v = lookup(key);
  if (v == nullptr) return {};
  if (!v->is_array() || v->empty()) fail(key, "expected a non-empty array of numbers or [re, im] pairs");
  std::vector<std::complex<double>> out;
  for (const auto& e : *v) {
    std::complex<double> c;
    if (!complex_of(e, c)) fail(key, "expected a non-empty array of numbers or [re, im] pairs");
    out.push_back(c);
  }
  return out;
}

Section Section::table(const std::string& key) {
  static const json empty = json::object();
  const json* v = lookup(key);
  if (v == nullptr) return Section(*cfg_, empty, join(path_, key));
  if (!v->is_object()) fail(key, "expected a table");
  return Section(*cfg_, *v, join(path_, key));
}

void Section::finish() const {
  for (const auto& [k, v] : node_->items()) {
    if (used_.count(k) == 0) fail(k, "unknown key");
  }
}

}  // namespace clab::cli
