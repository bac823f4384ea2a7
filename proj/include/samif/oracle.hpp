#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "samif/influence.hpp"
#include "samif/model.hpp"
#include "samif/samtrain.hpp"

namespace samif {

/// Ground truth for one removal: retrain on the original schedule without row k.
ParamVector loo_retrain(const ModelSpec& spec, const Dataset& data, std::uint32_t k,
                        const SAMConfig& config, RemovalMode mode = RemovalMode::drop);

/// Column i holds op(e_i).
Eigen::MatrixXd dense_matrix(const LinearOperator& op);

inline constexpr std::size_t kDenseHessianLimit = 2000;

/// Materialized Hessian of L_S (training rows, scale 1/n) at `params`, plus
/// lambda I. Refuses P above kDenseHessianLimit.
Eigen::MatrixXd dense_hessian(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                              double lambda);

/// Central differences of the loss only; independent of backpropagation.
ParamVector finite_difference_gradient(const ModelSpec& spec, const ParamVector& params,
                                       const Dataset& data, std::span<const std::uint32_t> indices,
                                       double scale, double h = 1e-5);

/// Second-order central differences of the loss.
Eigen::MatrixXd finite_difference_hessian(const ModelSpec& spec, const ParamVector& params,
                                          const Dataset& data, std::span<const std::uint32_t> indices,
                                          double scale, double h = 1e-4);

struct CalibrationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  double sign_agreement = 0.0;
  std::size_t n_points = 0;
  std::string estimator;
};

double pearson_correlation(std::span<const double> a, std::span<const double> b);
/// Pearson correlation of average ranks.
double spearman_correlation(std::span<const double> a, std::span<const double> b);
/// Fraction of matching signs; a zero on either side counts as half a match.
double sign_agreement(std::span<const double> predicted, std::span<const double> actual);

CalibrationReport calibration_report(std::span<const double> predicted, std::span<const double> actual,
                                     std::string estimator);

/// Summed validation loss after removing each row minus the loss at `params`:
///   sum_val l(w_{-k}) - sum_val l(w*).
std::vector<double> loo_validation_changes(const ModelSpec& spec, const Dataset& data,
                                           const SAMConfig& config, const ParamVector& params,
                                           std::span<const std::uint32_t> ks,
                                           RemovalMode mode = RemovalMode::drop);

struct CalibrationOptions {
  AttributionSetup attribution;
  RemovalMode removal = RemovalMode::drop;
  std::uint64_t sample_seed = 0;
};

/// Trains once, scores `sample_size` training rows with the estimator and
/// compares the scores against LOO retraining.
CalibrationReport calibrate_estimator(const ModelSpec& spec, const Dataset& data,
                                      const SAMConfig& config, Estimator estimator,
                                      std::size_t sample_size, const CalibrationOptions& options = {});

/// Training rows to calibrate on: all of them when sample_size equals the
/// training count, otherwise a seeded sample in ascending order. Larger sizes
/// throw InvalidConfig.
std::vector<std::uint32_t> calibration_sample(const Dataset& data, std::size_t sample_size,
                                              std::uint64_t seed);

}  // namespace samif
