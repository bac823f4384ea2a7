#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace samif {

struct ReportRun {
  std::string experiment;
  std::string digest;  // hex config digest
  std::string metric;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> wall;  // seconds; informational, excluded from plot data

  friend bool operator==(const ReportRun&, const ReportRun&) = default;
};

struct Report {
  std::vector<ReportRun> runs;

  void add(ReportRun run);
  /// First run with the given metric name, or nullptr.
  const ReportRun* find(const std::string& metric) const;
  friend bool operator==(const Report&, const Report&) = default;
};

/// Writes, per experiment, `<experiment>_<digest16>.report` holding one
/// tab-separated `key=value` record per run, and for each run a plot-data file
/// `<experiment>_<digest16>_<metric>.tsv` with one `x<TAB>y` row per point.
/// Returns the written paths. Throws FormatError when the directory is not
/// writable.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir);

/// Reads the records of a `.report` file.
Report parse_report(const std::filesystem::path& path);

std::string report_file_stem(const ReportRun& run);

}  // namespace samif
