#include "samif/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "samif/errors.hpp"

namespace samif {

ParamVector loo_retrain(const ModelSpec& spec, const Dataset& data, std::uint32_t k,
                        const SAMConfig& config, RemovalMode mode) {
  const std::uint32_t removed[1] = {k};
  return train_sam_without(spec, data, config, removed, mode).params;
}

Eigen::MatrixXd dense_matrix(const LinearOperator& op) {
  Eigen::MatrixXd m(op.dim, op.dim);
  ParamVector e(op.dim);
  for (std::size_t i = 0; i < op.dim; ++i) {
    e[i] = 1.0;
    const ParamVector col = op(e);
    for (std::size_t r = 0; r < op.dim; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = col[r];
    e[i] = 0.0;
  }
  return m;
}

Eigen::MatrixXd dense_hessian(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                              double lambda) {
  const std::size_t P = spec.param_count();
  if (P > kDenseHessianLimit) {
    throw InvalidInput("refusing to materialize a " + std::to_string(P) + "x" + std::to_string(P) + " Hessian");
  }
  const auto train = data.indices(Split::train);
  if (train.empty()) throw InvalidInput("dataset has no training rows");
  const double scale = 1.0 / static_cast<double>(train.size());
  const LinearOperator op{P, [&](const ParamVector& v) {
                            ParamVector out = hvp(spec, params, data, train, v, scale);
                            out.axpy(lambda, v);
                            return out;
                          }};
  return dense_matrix(op);
}

ParamVector finite_difference_gradient(const ModelSpec& spec, const ParamVector& params,
                                       const Dataset& data, std::span<const std::uint32_t> indices,
                                       double scale, double h) {
  ParamVector g(params.size());
  ParamVector w = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    w[i] = params[i] + h;
    const double up = subset_loss(spec, w, data, indices, scale);
    w[i] = params[i] - h;
    const double down = subset_loss(spec, w, data, indices, scale);
    w[i] = params[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd finite_difference_hessian(const ModelSpec& spec, const ParamVector& params,
                                          const Dataset& data, std::span<const std::uint32_t> indices,
                                          double scale, double h) {
  const auto P = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd H(P, P);
  ParamVector w = params;
  auto f = [&](std::size_t i, double di, std::size_t j, double dj) {
    w[i] += di;
    w[j] += dj;
    const double v = subset_loss(spec, w, data, indices, scale);
    w[i] = params[i];
    w[j] = params[j];
    return v;
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = i; j < params.size(); ++j) {
      double v;
      if (i == j) {
        const double f0 = subset_loss(spec, params, data, indices, scale);
        w[i] = params[i] + h;
        const double fp = subset_loss(spec, w, data, indices, scale);
        w[i] = params[i] - h;
        const double fm = subset_loss(spec, w, data, indices, scale);
        w[i] = params[i];
        v = (fp - 2.0 * f0 + fm) / (h * h);
      } else {
        v = (f(i, h, j, h) - f(i, h, j, -h) - f(i, -h, j, h) + f(i, -h, j, -h)) / (4.0 * h * h);
      }
      H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return H;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("correlation inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // constant input: no linear association
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_correlation(ra, rb);
}

double sign_agreement(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw InvalidInput("sign agreement inputs differ in length");
  if (predicted.empty()) return 0.0;
  double hits = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int sp = sign_of(predicted[i]);
    const int sa = sign_of(actual[i]);
    if (sp == 0 || sa == 0) {
      hits += 0.5;
    } else if (sp == sa) {
      hits += 1.0;
    }
  }
  return hits / static_cast<double>(predicted.size());
}

CalibrationReport calibration_report(std::span<const double> predicted, std::span<const double> actual,
                                     std::string estimator) {
  return {pearson_correlation(predicted, actual), spearman_correlation(predicted, actual),
          sign_agreement(predicted, actual), predicted.size(), std::move(estimator)};
}

std::vector<double> loo_validation_changes(const ModelSpec& spec, const Dataset& data,
                                           const SAMConfig& config, const ParamVector& params,
                                           std::span<const std::uint32_t> ks, RemovalMode mode) {
  const auto val = data.indices(Split::val);
  if (val.empty()) throw InvalidInput("dataset has no validation rows");
  const double base = subset_loss(spec, params, data, val, 1.0);
  std::vector<double> changes;
  changes.reserve(ks.size());
  for (std::uint32_t k : ks) {
    const ParamVector wk = loo_retrain(spec, data, k, config, mode);
    changes.push_back(subset_loss(spec, wk, data, val, 1.0) - base);
  }
  return changes;
}

std::vector<std::uint32_t> calibration_sample(const Dataset& data, std::size_t sample_size,
                                              std::uint64_t seed) {
  auto train = data.indices(Split::train);
  if (sample_size > train.size()) {
    throw InvalidConfig("calibration sample size exceeds the number of training rows");
  }
  if (sample_size == train.size()) return train;
  std::vector<std::uint32_t> picked;
  std::mt19937_64 rng(seed);
  std::sample(train.begin(), train.end(), std::back_inserter(picked), sample_size, rng);
  return picked;
}

CalibrationReport calibrate_estimator(const ModelSpec& spec, const Dataset& data,
                                      const SAMConfig& config, Estimator estimator,
                                      std::size_t sample_size, const CalibrationOptions& options) {
  const auto ks = calibration_sample(data, sample_size, options.sample_seed);
  const auto val = data.indices(Split::val);
  const TrainResult trained = train_sam(spec, data, config);
  const auto records = attribute(spec, data, config, trained.params, &trained.trajectory, estimator,
                                 ks, val, options.attribution);
  std::vector<double> predicted;
  for (const auto& r : records) predicted.push_back(r.score);
  const auto actual = loo_validation_changes(spec, data, config, trained.params, ks, options.removal);
  return calibration_report(predicted, actual, to_string(estimator));
}

}  // namespace samif
