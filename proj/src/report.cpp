#include "mflab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mflab/types.hpp"

namespace mflab::report {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json CheckRecord::to_json() const {
  Json j;
  j["name"] = name;
  j["params"] = params;
  j["values"] = values;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  return j;
}

void CheckBundle::append(const CheckBundle& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

bool CheckBundle::all_pass() const {
  for (const auto& r : records_)
    if (!r.pass) return false;
  return true;
}

std::vector<std::string> CheckBundle::failures() const {
  std::vector<std::string> out;
  for (const auto& r : records_) {
    if (!r.pass) out.push_back(r.name + " (tolerance " + fmt(r.tolerance) + ")");
  }
  return out;
}

Json CheckBundle::to_json(const std::string& config_hash) const {
  Json j;
  j["config_hash"] = config_hash;
  Json checks = Json::array();
  for (const auto& r : records_) checks.push_back(r.to_json());
  j["checks"] = std::move(checks);
  j["pass"] = all_pass();
  return j;
}

CsvTable::Row& CsvTable::Row::operator<<(double v) {
  cells_.push_back(fmt(v));
  return *this;
}
CsvTable::Row& CsvTable::Row::operator<<(int v) {
  cells_.push_back(std::to_string(v));
  return *this;
}
CsvTable::Row& CsvTable::Row::operator<<(std::size_t v) {
  cells_.push_back(std::to_string(v));
  return *this;
}
CsvTable::Row& CsvTable::Row::operator<<(const std::string& v) {
  // Cells with separators get quoted.
  if (v.find_first_of(",\"\n") == std::string::npos) {
    cells_.push_back(v);
  } else {
    std::string q = "\"";
    for (char c : v) {
      if (c == '"') q += '"';
      q += c;
    }
    cells_.push_back(q + "\"");
  }
  return *this;
}

CsvTable::Row& CsvTable::row() {
  rows_.emplace_back();
  return rows_.back();
}

void CsvTable::write(std::ostream& os) const {
  for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
  os << '\n';
  for (const auto& r : rows_) {
    if (r.cells_.size() != header_.size()) throw Error("CSV row width does not match header");
    for (std::size_t i = 0; i < r.cells_.size(); ++i) os << (i ? "," : "") << r.cells_[i];
    os << '\n';
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_file(path, dump(j) + "\n"); }

void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ostringstream os;
  t.write(os);
  write_file(path, os.str());
}

namespace {

void dump_into(const Json& j, std::string& out, int indent) {
  const std::string pad(std::size_t(indent + 2), ' ');
  const std::string close(std::size_t(indent), ' ');
  switch (j.type()) {
    case Json::value_t::number_float:
      if (std::isfinite(j.get<double>())) {
        out += fmt(j.get<double>());
      } else {
        out += "null";
      }
      return;
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        dump_into(it.value(), out, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_into(j[i], out, indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_into(j[i], out, indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump(const Json& j) {
  std::string out;
  dump_into(j, out, 0);
  return out;
}

}  // namespace mflab::report
