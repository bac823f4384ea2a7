#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "samif/digest.hpp"
#include "samif/influence.hpp"
#include "samif/model.hpp"
#include "samif/samtrain.hpp"

namespace samif {

/// Parameters of one experiment run. Read from flat `key = value` text; see
/// README for the key list.
struct ExperimentConfig {
  // dataset: "blobs(n, d, C, sep, seed)", "csv" or "idx"
  std::string dataset = "blobs(200, 10, 2, 3.0, 1)";
  std::string csv_path;
  std::string label_column = "label";
  std::string idx_images;
  std::string idx_labels;
  std::size_t idx_limit = 2000;
  std::size_t val_size = 100;   // synthetic sources
  std::size_t test_size = 200;  // synthetic sources
  double val_fraction = 0.2;    // file sources without split tags
  double test_fraction = 0.2;

  ModelKind model = ModelKind::logistic;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::tanh;

  SAMConfig sam;
  Estimator estimator = Estimator::if_fast;
  GifMode gif_mode = GifMode::sgd;
  NeumannConfig neumann;
  RemovalMode removal_mode = RemovalMode::drop;

  std::vector<double> removal_fractions{0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  std::vector<double> inspect_fractions{0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  double flip_fraction = 0.1;
  std::size_t control_repeats = 20;  // shuffles averaged for the random recall control
  std::size_t top_m = 5;
  std::vector<std::uint32_t> remove;  // explicit rows for `edit`
  double edit_fraction = 0.1;         // otherwise the lowest-IS fraction
  std::size_t calibrate_sample = 0;   // 0 means every training row
  std::string trajectory;             // optional pre-recorded trajectory for `attribute`
  std::string out = "out";

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Applies one `key = value` assignment; throws InvalidConfig on unknown
  /// keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  /// Every key except `out`, sorted, one `key=value` per line.
  std::string canonical() const;
  Digest digest() const;
  std::string digest_hex() const { return to_hex(digest()); }
};

}  // namespace samif
