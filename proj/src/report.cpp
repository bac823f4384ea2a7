#include "samif/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "samif/errors.hpp"

namespace samif {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += fmt(xs[i]);
  }
  return s;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& where) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FormatError(where + ": bad number '" + item + "'");
    }
  }
  return out;
}

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of("\t\n=/") != std::string::npos) {
    throw InvalidInput(std::string("report ") + what + " '" + s + "' is empty or contains tab, newline, '=' or '/'");
  }
}

}  // namespace

void Report::add(ReportRun run) {
  check_token(run.experiment, "experiment id");
  check_token(run.metric, "metric name");
  if (run.x.size() != run.y.size()) throw InvalidInput("report run '" + run.metric + "' has unequal x/y lengths");
  for (double v : run.y) {
    if (!std::isfinite(v)) throw InvalidInput("report run '" + run.metric + "' has a non-finite value");
  }
  runs.push_back(std::move(run));
}

const ReportRun* Report::find(const std::string& metric) const {
  for (const auto& r : runs) {
    if (r.metric == metric) return &r;
  }
  return nullptr;
}

std::string report_file_stem(const ReportRun& run) {
  return run.experiment + "_" + run.digest.substr(0, 16);
}

std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  std::map<std::string, std::string> records;  // stem -> file text
  std::vector<std::string> order;
  for (const ReportRun& run : report.runs) {
    const std::string stem = report_file_stem(run);
    if (!records.count(stem)) order.push_back(stem);
    records[stem] += "experiment=" + run.experiment + "\tdigest=" + run.digest + "\tmetric=" + run.metric +
                     "\tx=" + join(run.x) + "\ty=" + join(run.y) + "\twall=" + join(run.wall) + "\n";

    const auto plot = dir / (stem + "_" + run.metric + ".tsv");
    std::ofstream out(plot, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + plot.string());
    for (std::size_t i = 0; i < run.x.size(); ++i) out << fmt(run.x[i]) << '\t' << fmt(run.y[i]) << '\n';
    if (!out) throw FormatError("failed writing " + plot.string());
    written.push_back(plot);
  }
  for (const std::string& stem : order) {
    const auto path = dir / (stem + ".report");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << records[stem];
    if (!out) throw FormatError("failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

Report parse_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Report report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::map<std::string, std::string> kv;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw FormatError(where + ": field without '='");
      kv[field.substr(0, eq)] = field.substr(eq + 1);
    }
    for (const char* key : {"experiment", "digest", "metric", "x", "y", "wall"}) {
      if (!kv.count(key)) throw FormatError(where + ": missing key '" + key + "'");
    }
    ReportRun run{kv["experiment"], kv["digest"], kv["metric"], parse_numbers(kv["x"], where),
                  parse_numbers(kv["y"], where), parse_numbers(kv["wall"], where)};
    if (run.x.size() != run.y.size()) throw FormatError(where + ": x and y lengths differ");
    report.runs.push_back(std::move(run));
  }
  return report;
}

}  // namespace samif
