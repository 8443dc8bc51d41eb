#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dscat/config.hpp"

namespace dscat {

/// Settings that steer a run without changing the physics.
struct RunParameters {
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  int k_max = 500;
  /// Stroboscopic phase; unset selects the scan axis default.
  std::optional<double> sample_phase;

  bool operator==(const RunParameters&) const = default;
};

struct RunConfig {
  SystemConfig system;
  RunParameters run;

  bool operator==(const RunConfig&) const = default;
};

/// One `key=value` per line; blank lines and lines starting with '#' are
/// skipped. Applies on top of `base`.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {});
/// Applies a single `key=value` assignment.
void apply_setting(RunConfig& cfg, const std::string& assignment, int line = 0);
/// Every key in a fixed order; doubles in shortest round-trip form.
std::string serialize_config(const RunConfig& cfg);

/// Documentation of every key with its default, one per line.
std::string config_reference();

/// 17 significant digits, lossless for every finite double.
std::string format_double(double v);

/// Header plus rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& row();
  CsvTable& add(double v);
  CsvTable& add(long long v);
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(std::size_t v) { return add(static_cast<long long>(v)); }
  CsvTable& add(const std::string& v);
  CsvTable& add(const char* v) { return add(std::string(v)); }

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return cells_.size(); }

  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> cells_;
};

/// Numeric view of a CSV file; cells that are not numbers read as NaN.
struct CsvData {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws MissingColumn.
  std::size_t index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  bool has(const std::string& name) const;
};

CsvData read_csv(std::istream& in);
CsvData read_csv(const std::filesystem::path& path);

struct ScatterRecord;

/// One row per record: input, n_c, energies, times, classification, error.
CsvTable records_table(const std::vector<ScatterRecord>& records);
/// One row per stroboscopic energy sample: input, k, h0.
CsvTable strobe_table(const std::vector<ScatterRecord>& records);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct OutputDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  RunConfig config;
  std::string code_version;
  double wall_seconds = 0.0;
  std::size_t workers = 0;
  bool complete = true;
  std::string error;
  std::vector<OutputDigest> outputs;

  /// Hashes the file and lists it.
  void add_output(const std::filesystem::path& path);
  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

std::string code_version();

enum class PlotKind { ScatterXY, LogLog, GridHeatmap, ManifoldOverlay };

const char* to_string(PlotKind k);
PlotKind plot_kind_from_string(const std::string& s);

struct PowerLawLine {
  double z = 0.0;
  double amplitude = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Column bindings: scatter and loglog use x/y; the heatmap uses x/y/value;
/// the manifold overlay uses x/y plus `value` for the curve kind (0 stable,
/// 1 unstable, 2 region outline) and `group` to split polylines.
struct PlotSpec {
  PlotKind kind = PlotKind::ScatterXY;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string x_column;
  std::string y_column;
  std::string value_column;
  std::string group_column;
  std::vector<double> reference_y;
  std::optional<PowerLawLine> fit;
  double width = 640.0;
  double height = 480.0;
};

/// Self-contained SVG. Throws MissingColumn for unbound columns.
std::string render_svg(const PlotSpec& spec, const CsvData& data);
void emit_plot(const PlotSpec& spec, const CsvData& data, const std::filesystem::path& out);
/// Equivalent gnuplot script reading the CSV directly.
std::string gnuplot_script(const PlotSpec& spec, const std::filesystem::path& csv,
                           const std::filesystem::path& image);

}  // namespace dscat
