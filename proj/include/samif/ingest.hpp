#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "samif/model.hpp"

namespace samif {

/// Gaussian clusters: class c is centred on (sep / sqrt 2) e_c, so any two
/// centres are `sep` apart, with isotropic noise of standard deviation `stddev`.
/// Row i has label i mod C. Requires C <= d.
struct BlobsSpec {
  std::size_t n = 200;
  std::size_t d = 10;
  std::size_t classes = 2;
  double sep = 3.0;
  std::uint64_t seed = 1;
  double stddev = 0.5;
};

/// Parses "blobs(n, d, C, sep, seed)" with an optional sixth stddev argument.
BlobsSpec parse_blobs(const std::string& text);

/// n training rows followed by `val` validation and `test` test rows drawn
/// from the same clusters. The training rows do not depend on val/test.
Dataset make_blobs(const BlobsSpec& spec, std::size_t val = 0, std::size_t test = 0);

/// CSV with a header row. `label_column` holds integer labels; an optional
/// column named "split" holds train/val/test tags (rows default to train).
/// Every other column must be numeric.
Dataset read_csv(const std::filesystem::path& path, const std::string& label_column = "label");

/// IDX image file (magic 0x00000803) plus IDX label file (magic 0x00000801),
/// pixels scaled to [0, 1]. `limit` > 0 keeps only the first `limit` items.
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t limit = 0);

/// Re-tags rows: a seeded random val_fraction become val, test_fraction become
/// test, the rest train.
void assign_splits(Dataset& data, double val_fraction, double test_fraction, std::uint64_t seed);

}  // namespace samif
