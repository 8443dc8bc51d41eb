#include "dscat/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

#include "dscat/scattering.hpp"
#include "json.hpp"

#ifndef DSCAT_VERSION
#define DSCAT_VERSION "unknown"
#endif

namespace dscat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v, int line) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ParseError("line " + std::to_string(line) + ": " + key + " expects a number, got '" + v + "'", line);
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v, int line) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ParseError("line " + std::to_string(line) + ": " + key + " expects an integer, got '" + v + "'", line);
  return out;
}

std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

struct KeySpec {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&, int)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DOUBLE_KEY(field, help)                                                                                  \
  KeySpec {                                                                                                      \
    #field, help, [](RunConfig& c, const std::string& v, int l) { c.system.field = parse_double(#field, v, l); }, \
        [](const RunConfig& c) { return shortest(c.system.field); }                                         \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"potential", "v1 (rigid spheres) or v2 (Lorentz)",
       [](RunConfig& c, const std::string& v, int l) {
         if (v == "v1") c.system.potential = PotentialKind::V1RigidSpheres;
         else if (v == "v2") c.system.potential = PotentialKind::V2Lorentz;
         else throw ParseError("line " + std::to_string(l) + ": potential must be v1 or v2", l);
       },
       [](const RunConfig& c) { return std::string(c.system.potential == PotentialKind::V2Lorentz ? "v2" : "v1"); }},
      {"driver", "f1 (finite pulse), f2 (periodic) or none",
       [](RunConfig& c, const std::string& v, int l) {
         if (v == "f1") c.system.driver = DriverKind::F1Finite;
         else if (v == "f2") c.system.driver = DriverKind::F2Periodic;
         else if (v == "none") c.system.driver = DriverKind::None;
         else throw ParseError("line " + std::to_string(l) + ": driver must be f1, f2 or none", l);
       },
       [](const RunConfig& c) {
         switch (c.system.driver) {
           case DriverKind::F1Finite: return std::string("f1");
           case DriverKind::None: return std::string("none");
           default: return std::string("f2");
         }
       }},
      DOUBLE_KEY(omega, "potential strength"),
      DOUBLE_KEY(e0, "driver amplitude"),
      DOUBLE_KEY(nu, "driver frequency"),
      {"envelope_n", "f1 pulse length in half periods of the envelope",
       [](RunConfig& c, const std::string& v, int l) { c.system.envelope_n = parse_int<int>("envelope_n", v, l); },
       [](const RunConfig& c) { return std::to_string(c.system.envelope_n); }},
      DOUBLE_KEY(dt, "RK4 step; 0 selects period/2000"),
      DOUBLE_KEY(escape_x, "distance beyond which the escape test applies"),
      DOUBLE_KEY(t_noreturn, "no-return horizon; 0 selects 200 driver periods"),
      DOUBLE_KEY(launch_phase, "driver phase nu*t at launch for f2 runs"),
      DOUBLE_KEY(escape_margin, "energy margin above h' for the escape test"),
      DOUBLE_KEY(parabolic_tol, "tolerance separating parabolic from hyperbolic exits"),
      {"max_steps", "integration step limit per orbit",
       [](RunConfig& c, const std::string& v, int l) {
         c.system.max_steps = parse_int<std::size_t>("max_steps", v, l);
       },
       [](const RunConfig& c) { return std::to_string(c.system.max_steps); }},
      {"workers", "worker threads; 0 selects DSCAT_WORKERS or the hardware concurrency",
       [](RunConfig& c, const std::string& v, int l) { c.run.workers = parse_int<std::size_t>("workers", v, l); },
       [](const RunConfig& c) { return std::to_string(c.run.workers); }},
      {"seed", "seed for random ensembles and area samples",
       [](RunConfig& c, const std::string& v, int l) { c.run.seed = parse_int<std::uint64_t>("seed", v, l); },
       [](const RunConfig& c) { return std::to_string(c.run.seed); }},
      {"k_max", "stroboscopic horizon in driver periods",
       [](RunConfig& c, const std::string& v, int l) { c.run.k_max = parse_int<int>("k_max", v, l); },
       [](const RunConfig& c) { return std::to_string(c.run.k_max); }},
      {"sample_phase", "stroboscopic phase; auto selects 0 (pi/2 for e0 scans)",
       [](RunConfig& c, const std::string& v, int l) {
         if (v == "auto") c.run.sample_phase.reset();
         else c.run.sample_phase = parse_double("sample_phase", v, l);
       },
       [](const RunConfig& c) {
         return c.run.sample_phase ? shortest(*c.run.sample_phase) : std::string("auto");
       }},
  };
  return specs;
}

#undef DOUBLE_KEY

void validate_run(const RunParameters& r) {
  if (r.k_max < 1) throw ValidationError("k_max must be >= 1");
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& assignment, int line) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParseError("line " + std::to_string(line) + ": expected key=value, got '" + assignment + "'", line);
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  for (const auto& spec : key_specs()) {
    if (key == spec.name) {
      spec.set(cfg, value, line);
      return;
    }
  }
  throw ParseError("line " + std::to_string(line) + ": unknown key '" + key + "'", line);
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    const std::string t = trim(text);
    if (t.empty() || t.front() == '#') continue;
    apply_setting(base, t, line);
  }
  base.system.validate();
  validate_run(base.run);
  return base;
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string(), 0);
  return parse_config(in, std::move(base));
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& spec : key_specs()) out += std::string(spec.name) + "=" + spec.get(cfg) + "\n";
  return out;
}

std::string config_reference() {
  const RunConfig defaults;
  std::string out;
  for (const auto& spec : key_specs()) {
    std::string entry = std::string(spec.name) + "=" + spec.get(defaults);
    entry.resize(std::max<std::size_t>(entry.size() + 1, 26), ' ');
    out += "  " + entry + spec.help + "\n";
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvTable& CsvTable::row() {
  cells_.emplace_back();
  cells_.back().reserve(columns_.size());
  return *this;
}

CsvTable& CsvTable::add(double v) { return add(format_double(v)); }
CsvTable& CsvTable::add(long long v) { return add(std::to_string(v)); }

CsvTable& CsvTable::add(const std::string& v) {
  if (cells_.empty()) row();
  if (cells_.back().size() >= columns_.size()) throw ValidationError("CSV row has more cells than columns");
  cells_.back().push_back(v);
  return *this;
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(columns_);
  for (const auto& r : cells_) {
    if (r.size() != columns_.size()) throw ValidationError("CSV row has fewer cells than columns");
    line(r);
  }
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
  if (!out) throw Error("write failed for " + path.string());
}

std::string CsvTable::str() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::size_t CsvData::index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw MissingColumn("CSV has no column '" + name + "'");
}

bool CsvData::has(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

std::vector<double> CsvData::column(const std::string& name) const {
  const std::size_t k = index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(k < r.size() ? r[k] : std::numeric_limits<double>::quiet_NaN());
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(trim(cell));
  return out;
}

double cell_value(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

}  // namespace

CsvData read_csv(std::istream& in) {
  CsvData out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (header) {
      out.columns = std::move(cells);
      header = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(cell_value(c));
    out.rows.push_back(std::move(row));
  }
  return out;
}

CsvData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs.push_back({path.string(), sha256_file(path), std::filesystem::file_size(path)});
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["arguments"] = arguments;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  std::istringstream lines(serialize_config(config));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    c[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = c;
  j["code_version"] = code_version;
  j["wall_seconds"] = wall_seconds;
  j["workers"] = workers;
  j["complete"] = complete;
  if (!error.empty()) j["error"] = error;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& o : outputs) j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json();
}

std::string code_version() { return DSCAT_VERSION; }

namespace {

std::string clean(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n') ch = ';';
  return s;
}

}  // namespace

CsvTable records_table(const std::vector<ScatterRecord>& records) {
  CsvTable t({"input", "n_c", "h0_out_final", "h0_comoving", "delay_time", "t_first", "t_last", "classification",
              "error"});
  for (const auto& r : records) {
    t.row().add(r.input).add(r.n_c).add(r.h0_out_final).add(r.h0_comoving).add(r.delay_time).add(r.t_first);
    t.add(r.t_last).add(r.ok() ? to_string(r.classification) : "failed").add(clean(r.error));
  }
  return t;
}

CsvTable strobe_table(const std::vector<ScatterRecord>& records) {
  CsvTable t({"input", "k", "h0"});
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.h0_out.size(); ++k) t.row().add(r.input).add(k).add(r.h0_out[k]);
  return t;
}

}  // namespace dscat
