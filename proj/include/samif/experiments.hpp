#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "samif/config.hpp"
#include "samif/influence.hpp"
#include "samif/model.hpp"
#include "samif/report.hpp"

namespace samif {

/// Loads the configured source with its train/val/test tags.
Dataset ingest(const ExperimentConfig& cfg);

/// Model for the configured kind sized to the data (C = max label + 1, at least 2).
ModelSpec model_for(const ExperimentConfig& cfg, const Dataset& data);

/// Row order by score; ties break toward the smaller row index.
std::vector<std::uint32_t> rank_rows(std::span<const std::uint32_t> rows, std::span<const double> scores,
                                     bool descending);

/// Flips labels y -> (y + 1) mod C on a seeded round(fraction * n) subset of
/// training rows; returns the flipped rows ascending.
std::vector<std::uint32_t> flip_labels(Dataset& data, std::size_t classes, double fraction, std::uint64_t seed);

struct TraceEntry {
  std::uint32_t test_row = 0;
  int predicted = 0;
  std::vector<std::pair<std::uint32_t, double>> helpful;  // largest scores first
  std::vector<std::pair<std::uint32_t, double>> harmful;  // most negative first
};

/// For every misclassified test row, the top-m training rows by per-test-point
/// influence score in each direction.
std::vector<TraceEntry> trace_misclassified(const ModelSpec& spec, const Dataset& data,
                                            const ParamVector& params,
                                            std::span<const InfluenceRecord> records, std::size_t m);

Report cmd_train(const ExperimentConfig& cfg);
Report cmd_attribute(const ExperimentConfig& cfg);
Report cmd_valuate(const ExperimentConfig& cfg);
Report cmd_detect_noise(const ExperimentConfig& cfg);
Report cmd_trace(const ExperimentConfig& cfg);
Report cmd_edit(const ExperimentConfig& cfg);
Report cmd_calibrate(const ExperimentConfig& cfg);

}  // namespace samif
