#pragma once
// CSV and JSON report emission.  Numbers are written with 17 significant
// digits so files round-trip bit-exactly; nothing time-dependent goes into
// data rows.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace mflab::report {

using Json = nlohmann::ordered_json;

/// %.17g
std::string fmt(double v);

/// FNV-1a 64-bit hash, printed as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t h);

/// One check outcome: {name, params, values, tolerance, pass}.
struct CheckRecord {
  std::string name;
  Json params = Json::object();
  Json values = Json::object();
  double tolerance = 0.0;
  bool pass = false;

  Json to_json() const;
};

/// Ordered list of checks with an overall verdict.
class CheckBundle {
 public:
  void add(CheckRecord r) { records_.push_back(std::move(r)); }
  void append(const CheckBundle& other);
  const std::vector<CheckRecord>& records() const noexcept { return records_; }
  bool all_pass() const;
  std::vector<std::string> failures() const;
  /// {"config_hash": ..., "checks": [...], "pass": ...}
  Json to_json(const std::string& config_hash) const;

 private:
  std::vector<CheckRecord> records_;
};

/// Header plus rows of already formatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  class Row {
   public:
    Row& operator<<(double v);
    Row& operator<<(int v);
    Row& operator<<(std::size_t v);
    Row& operator<<(const std::string& v);
    Row& operator<<(const char* v) { return *this << std::string(v); }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };
  Row& row();
  std::size_t size() const noexcept { return rows_.size(); }
  void write(std::ostream& os) const;

 private:
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

/// Writes text to a file, creating parent directories; throws mflab::Error.
void write_file(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);
void write_csv(const std::filesystem::path& path, const CsvTable& t);

/// JSON with doubles at 17 significant digits (nlohmann's default is the
/// shortest round-trip form, which is also exact; this keeps one convention).
std::string dump(const Json& j);

}  // namespace mflab::report
