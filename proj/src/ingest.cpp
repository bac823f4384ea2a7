#include "samif/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <vector>

#include "samif/errors.hpp"

namespace samif {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(what + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

BlobsSpec parse_blobs(const std::string& text) {
  static const std::regex re(
      R"(\s*blobs\s*\(\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*(?:,\s*([^,\s)]+)\s*)?\)\s*)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw InvalidConfig("synthetic source must look like blobs(n, d, C, sep, seed), got '" + text + "'");
  }
  try {
    BlobsSpec spec;
    spec.n = std::stoull(m[1]);
    spec.d = std::stoull(m[2]);
    spec.classes = std::stoull(m[3]);
    spec.sep = std::stod(m[4]);
    spec.seed = std::stoull(m[5]);
    if (m[6].matched) spec.stddev = std::stod(m[6]);
    return spec;
  } catch (const std::exception&) {
    throw InvalidConfig("malformed number in '" + text + "'");
  }
}

Dataset make_blobs(const BlobsSpec& spec, std::size_t val, std::size_t test) {
  if (spec.n == 0 || spec.d == 0) throw InvalidConfig("blobs needs n >= 1 and d >= 1");
  if (spec.classes < 2 || spec.classes > spec.d) throw InvalidConfig("blobs needs 2 <= C <= d");
  if (!(spec.sep >= 0.0) || !(spec.stddev > 0.0)) throw InvalidConfig("blobs needs sep >= 0 and stddev > 0");
  const std::size_t rows = spec.n + val + test;
  const double offset = spec.sep / std::sqrt(2.0);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.stddev);

  std::vector<double> feats(rows * spec.d);
  std::vector<int> labels(rows);
  std::vector<Split> split(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t c = i % spec.classes;
    labels[i] = static_cast<int>(c);
    split[i] = i < spec.n ? Split::train : (i < spec.n + val ? Split::val : Split::test);
    for (std::size_t j = 0; j < spec.d; ++j) {
      feats[i * spec.d + j] = (j == c ? offset : 0.0) + noise(rng);
    }
  }
  return Dataset(rows, spec.d, std::move(feats), std::move(labels), std::move(split));
}

Dataset read_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  const auto header = split_csv_line(line);
  std::ptrdiff_t label_col = -1, split_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw FormatError(path.string() + ": empty column name in header");
    if (header[c] == label_column) label_col = static_cast<std::ptrdiff_t>(c);
    if (header[c] == "split") split_col = static_cast<std::ptrdiff_t>(c);
  }
  if (label_col < 0) throw FormatError(path.string() + ": header has no '" + label_column + "' column");
  const std::size_t dim = header.size() - 1 - (split_col >= 0 ? 1 : 0);

  std::vector<double> feats;
  std::vector<int> labels;
  std::vector<Split> split;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
    }
    Split tag = Split::train;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto col = static_cast<std::ptrdiff_t>(c);
      if (col == split_col) {
        if (cells[c] == "train") tag = Split::train;
        else if (cells[c] == "val") tag = Split::val;
        else if (cells[c] == "test") tag = Split::test;
        else throw FormatError(path.string() + ": row " + std::to_string(row) + ", column 'split': unknown tag '" + cells[c] + "'");
        continue;
      }
      double v;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        throw FormatError(path.string() + ": row " + std::to_string(row) + ", column '" + header[c] +
                          "': non-numeric value '" + cells[c] + "'");
      }
      if (col == label_col) {
        if (v != std::floor(v) || v < 0) {
          throw FormatError(path.string() + ": row " + std::to_string(row) + ", column '" + header[c] +
                            "': label must be a non-negative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        feats.push_back(v);
      }
    }
    split.push_back(tag);
  }
  if (row == 0) throw FormatError(path.string() + ": no data rows");
  return Dataset(row, dim, std::move(feats), std::move(labels), std::move(split));
}

Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t limit) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images.string());
  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels.string());

  if (read_be32(img, images.string()) != 0x00000803u) throw FormatError(images.string() + ": not an IDX image file (magic mismatch)");
  const std::uint32_t count = read_be32(img, images.string());
  const std::uint32_t rows = read_be32(img, images.string());
  const std::uint32_t cols = read_be32(img, images.string());
  if (read_be32(lab, labels.string()) != 0x00000801u) throw FormatError(labels.string() + ": not an IDX label file (magic mismatch)");
  const std::uint32_t label_count = read_be32(lab, labels.string());
  if (label_count != count) {
    throw FormatError("IDX image count " + std::to_string(count) + " does not match label count " +
                      std::to_string(label_count));
  }
  const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, count) : count;
  if (n == 0) throw FormatError(images.string() + ": no images");
  const std::size_t dim = std::size_t{rows} * cols;

  std::vector<unsigned char> pixels(n * dim);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw FormatError(images.string() + ": truncated pixel data");
  }
  std::vector<unsigned char> raw(n);
  if (!lab.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n))) {
    throw FormatError(labels.string() + ": truncated label data");
  }
  std::vector<double> feats(pixels.size());
  std::transform(pixels.begin(), pixels.end(), feats.begin(), [](unsigned char p) { return p / 255.0; });
  std::vector<int> ys(raw.begin(), raw.end());
  return Dataset(n, dim, std::move(feats), std::move(ys), std::vector<Split>(n, Split::train));
}

void assign_splits(Dataset& data, double val_fraction, double test_fraction, std::uint64_t seed) {
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0) {
    throw InvalidConfig("split fractions must be non-negative and leave training rows");
  }
  const std::size_t n = data.size();
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    const Split s = i < n_val ? Split::val : (i < n_val + n_test ? Split::test : Split::train);
    data.set_split(perm[i], s);
  }
}

}  // namespace samif
