#pragma once

// CSV/JSON emission and run-spec parsing shared by the command-line front end.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isq/core.hpp"
#include "isq/error.hpp"
#include "json.hpp"

#ifndef ISQ_VERSION
#define ISQ_VERSION "dev"
#endif

namespace isq {

using Json = nlohmann::ordered_json;

inline constexpr const char* kCodeVersion = ISQ_VERSION;

/// Malformed run spec or option: exit code 2.
class ValidationError : public DomainError {
 public:
  explicit ValidationError(const std::string& what) : DomainError(what) {}
};

/// Could not read or write an artifact: exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// 17 significant digits, enough to round-trip a double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Cell {
  std::string text;
  Cell(double v) : text(format_double(v)) {}
  Cell(int v) : text(std::to_string(v)) {}
  Cell(long v) : text(std::to_string(v)) {}
  Cell(long long v) : text(std::to_string(v)) {}
  Cell(unsigned long v) : text(std::to_string(v)) {}
  Cell(std::string s) : text(std::move(s)) {}
  Cell(const char* s) : text(s) {}
};

/// A CSV table with "# key: value" provenance lines above the column header.
struct CsvTable {
  std::string name;  // file stem
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::initializer_list<Cell> cells) {
    if (cells.size() != columns.size()) throw DomainError("csv " + name + ": row width does not match header");
    std::vector<std::string> r;
    r.reserve(cells.size());
    for (const auto& c : cells) r.push_back(c.text);
    rows.push_back(std::move(r));
  }

  void note(const std::string& key, const std::string& value) { provenance.emplace_back(key, value); }
  void note(const std::string& key, double value) { provenance.emplace_back(key, format_double(value)); }
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const CsvTable& t) {
  os << "# isqlab " << kCodeVersion << "\n";
  for (const auto& [k, v] : t.provenance) os << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_escape(t.columns[i]);
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_escape(r[i]);
    os << "\n";
  }
}

inline std::string to_csv_string(const CsvTable& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

/// Reads a table written by write_csv: provenance lines, header, then rows.
inline CsvTable read_csv(std::istream& is, std::string name = {}) {
  CsvTable t;
  t.name = std::move(name);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (quoted) {
        if (c == '"' && i + 1 < s.size() && s[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon != std::string::npos) t.provenance.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    if (line.empty()) continue;
    if (t.columns.empty()) {
      t.columns = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

inline std::string provenance_value(const CsvTable& t, const std::string& key) {
  for (const auto& [k, v] : t.provenance) {
    if (k == key) return v;
  }
  return {};
}

/// Writes via a temporary file and rename, so a failure leaves no partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp + " to " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON forms of the model types

inline void reject_unknown_fields(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError(where + ": unknown field '" + key + "'");
  }
}

inline double json_number(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(where + "." + key + ": not finite");
  return d;
}

inline Json to_json(const ModelParams& p) {
  Json j;
  j["alpha"] = p.alpha;
  j["omega"] = p.omega;
  j["nu_plus"] = p.nu_plus;
  j["nu_minus"] = p.nu_minus;
  j["x0"] = p.x0;
  j["mode"] = p.mode == Mode::kConformal ? "conformal" : "limit-cycle";
  return j;
}

/// alpha (and x0) determine the rest; derived fields, if present, must agree.
inline ModelParams params_from_json(const Json& j) {
  reject_unknown_fields(j, {"alpha", "omega", "nu_plus", "nu_minus", "x0", "mode"}, "params");
  const double alpha = json_number(j, "alpha", "params");
  const double x0 = j.contains("x0") ? json_number(j, "x0", "params") : 1.0;
  ModelParams p;
  try {
    p = derived_constants(alpha, x0);
  } catch (const DomainError& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
  for (const auto& [key, want] : {std::pair{"omega", p.omega}, {"nu_plus", p.nu_plus}, {"nu_minus", p.nu_minus}}) {
    if (j.contains(key) && std::abs(json_number(j, key, "params") - want) > 1e-12)
      throw ValidationError(std::string("params.") + key + ": inconsistent with alpha");
  }
  if (j.contains("mode")) {
    const auto m = j.at("mode");
    const std::string want = p.mode == Mode::kConformal ? "conformal" : "limit-cycle";
    if (!m.is_string() || m.get<std::string>() != want) throw ValidationError("params.mode: inconsistent with alpha");
  }
  return p;
}

inline Json to_json(const Regulator& r) {
  Json j;
  j["kind"] = to_string(r.kind);
  j["b"] = r.b;
  j["g"] = r.g;
  if (r.kind == RegulatorKind::kGeneric) j["profile"] = {{"s", r.table.nodes()}, {"f", r.table.values()}};
  return j;
}

inline Regulator regulator_from_json(const Json& j) {
  reject_unknown_fields(j, {"kind", "b", "g", "profile"}, "regulator");
  Regulator r;
  try {
    if (j.contains("kind")) {
      if (!j.at("kind").is_string()) throw ValidationError("regulator.kind: expected a string");
      r.kind = regulator_kind_from_string(j.at("kind").get<std::string>());
    }
    r.b = j.contains("b") ? json_number(j, "b", "regulator") : 1.0;
    r.g = j.contains("g") ? json_number(j, "g", "regulator") : 0.0;
    if (j.contains("profile")) {
      if (r.kind != RegulatorKind::kGeneric) throw ValidationError("regulator.profile: only for generic wells");
      const auto& pr = j.at("profile");
      reject_unknown_fields(pr, {"s", "f"}, "regulator.profile");
      if (!pr.contains("s") || !pr.contains("f")) throw ValidationError("regulator.profile: needs s and f arrays");
      r.table = TabulatedProfile(pr.at("s").get<std::vector<double>>(), pr.at("f").get<std::vector<double>>());
    }
    r.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const DomainError& e) {
    throw ValidationError(std::string("regulator: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("regulator: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Run specs

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "fixed-points", "flow",        "contours",     "bound-state", "exponent",
      "propagator",   "scaling-check", "collapse",   "phase-shift", "phase-curve",
      "feynman-kac",  "chain",       "limit-cycle"};
  return names;
}

/// One command with its model, regulator and command-specific options. The
/// options are checked against the command's option table at dispatch.
struct RunSpec {
  std::string command;
  ModelParams params;
  Regulator regulator;
  Json options = Json::object();
  std::string output;  // directory; empty means the default
};

inline RunSpec run_spec_from_json(const Json& j) {
  reject_unknown_fields(j, {"command", "params", "regulator", "options", "output"}, "run spec");
  RunSpec s;
  if (!j.contains("command") || !j.at("command").is_string()) throw ValidationError("run spec: missing command");
  s.command = j.at("command").get<std::string>();
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), s.command) == names.end())
    throw ValidationError("run spec: unknown command '" + s.command + "'");
  if (!j.contains("params")) throw ValidationError("run spec: missing params");
  s.params = params_from_json(j.at("params"));
  if (j.contains("regulator")) s.regulator = regulator_from_json(j.at("regulator"));
  if (j.contains("options")) {
    if (!j.at("options").is_object()) throw ValidationError("run spec: options must be an object");
    s.options = j.at("options");
  }
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ValidationError("run spec: output must be a string");
    s.output = j.at("output").get<std::string>();
  }
  return s;
}

inline RunSpec run_spec_from_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("run spec: ") + e.what());
  }
  return run_spec_from_json(j);
}

inline Json to_json(const RunSpec& s) {
  Json j;
  j["command"] = s.command;
  j["params"] = {{"alpha", s.params.alpha}, {"x0", s.params.x0}};
  j["regulator"] = to_json(s.regulator);
  j["options"] = s.options;
  if (!s.output.empty()) j["output"] = s.output;
  return j;
}

}  // namespace isq
