#include "samif/samtrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "samif/errors.hpp"

namespace samif {

namespace {

constexpr double kDivergenceLoss = 1e6;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double SAMConfig::eta_at(std::size_t step) const {
  double e = eta;
  for (std::size_t m : lr_milestones) {
    if (step >= m) e *= lr_gamma;
  }
  return e;
}

void SAMConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidConfig("rho must be finite and >= 0");
  if (!(p > 1.0) || std::isinf(p)) throw InvalidConfig("p must lie in (1, inf)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidConfig("lambda must be finite and >= 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidConfig("eta must be positive");
  if (!lr_milestones.empty() && !(lr_gamma > 0.0)) throw InvalidConfig("lr_gamma must be positive");
  if (steps == 0) throw InvalidConfig("steps must be positive");
  if (record_stride == 0) throw InvalidConfig("record_stride must be positive");
}

std::string SAMConfig::canonical() const {
  std::ostringstream os;
  os << "rho=" << format_double(rho) << ";p=" << format_double(p)
     << ";lambda=" << format_double(lambda) << ";eta=" << format_double(eta) << ";milestones=";
  for (std::size_t i = 0; i < lr_milestones.size(); ++i) os << (i ? "," : "") << lr_milestones[i];
  os << ";gamma=" << format_double(lr_gamma) << ";batch=" << batch_size << ";steps=" << steps
     << ";seed=" << seed << ";stride=" << record_stride
     << ";sampling=" << (sampling == SamplingMode::per_step ? "per_step" : "epoch_shuffled");
  return os.str();
}

Digest SAMConfig::digest() const { return sha256(canonical()); }

ParamVector worst_perturbation(const ParamVector& grad, double rho, double p) {
  if (!(rho >= 0.0)) throw InvalidInput("rho must be >= 0");
  if (!(p > 1.0) || std::isinf(p)) throw DomainError("perturbation norm p must lie in (1, inf)");
  ParamVector eps(grad.size());
  if (rho == 0.0) return eps;
  double largest = 0.0;
  for (double g : grad) largest = std::max(largest, std::abs(g));
  if (largest == 0.0) return eps;

  if (p == 2.0) {
    const double n = p_norm(grad, 2.0);
    for (std::size_t i = 0; i < grad.size(); ++i) eps[i] = rho * grad[i] / n;
    return eps;
  }
  // The formula is invariant to positive rescaling of g; work with g / max|g|.
  const double q = dual_exponent(p);
  double sum_q = 0.0;
  for (double g : grad) sum_q += std::pow(std::abs(g) / largest, q);
  const double denom = std::pow(sum_q, 1.0 / p);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double a = std::abs(grad[i]) / largest;
    if (a == 0.0) continue;
    eps[i] = rho * std::copysign(std::pow(a, q - 1.0), grad[i]) / denom;
  }
  return eps;
}

namespace {

// Gradient at the perturbed point plus lambda * w, reusing the already computed
// gradient at w for the perturbation. Returns the batch loss at w through `loss`.
ParamVector sam_step_gradient(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                              std::span<const std::uint32_t> batch, double rho, double p,
                              double lambda, double scale, double* loss) {
  ParamVector g(params.size());
  if (batch.empty()) {
    if (loss) *loss = 0.0;
  } else {
    LossGrad lg = subset_loss_grad(spec, params, data, batch, scale);
    if (loss) *loss = lg.loss;
    if (rho == 0.0) {
      g = std::move(lg.grad);
    } else {
      const ParamVector eps = worst_perturbation(lg.grad, rho, p);
      g = subset_loss_grad(spec, params + eps, data, batch, scale).grad;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * params[i];
  return g;
}

TrainResult run_training(const ModelSpec& spec, const Dataset& data, const SAMConfig& config,
                         std::span<const std::uint32_t> removed, RemovalMode mode) {
  config.validate();
  spec.validate();
  const std::vector<std::uint32_t> train = data.indices(Split::train);
  if (train.empty()) throw InvalidInput("dataset has no training rows");
  if (data.max_label() >= static_cast<int>(spec.num_classes())) {
    throw InvalidInput("dataset labels exceed the model's class count");
  }
  const std::size_t n = train.size();
  const std::size_t b = config.batch_size == 0 ? n : config.batch_size;
  const BatchSchedule schedule = sample_batches(n, b, config.steps, config.seed + 1, config.sampling);
  const double scale = 1.0 / static_cast<double>(b);

  std::vector<char> is_removed(data.size(), 0);
  for (std::uint32_t r : removed) {
    if (r >= data.size() || data.split(r) != Split::train) {
      throw InvalidInput("removed row " + std::to_string(r) + " is not a training row");
    }
    is_removed[r] = 1;
  }
  std::vector<std::uint32_t> remaining;
  for (std::uint32_t r : train) {
    if (!is_removed[r]) remaining.push_back(r);
  }
  if (!removed.empty() && remaining.empty()) throw InvalidInput("cannot remove every training row");
  std::mt19937_64 refill_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, remaining.empty() ? 0 : remaining.size() - 1);

  TrainResult result;
  result.params = init_params(spec, config.seed);
  Trajectory& traj = result.trajectory;
  traj.header = {spec.param_count(), data.size(), config.steps, config.digest()};

  ParamVector& w = result.params;
  std::vector<std::uint32_t> batch;
  for (std::size_t t = 0; t < config.steps; ++t) {
    batch.clear();
    for (std::uint32_t pos : schedule.steps[t]) {
      const std::uint32_t row = train[pos];
      if (!is_removed[row]) {
        batch.push_back(row);
      } else if (mode == RemovalMode::resample) {
        batch.push_back(remaining[pick(refill_rng)]);
      }
    }
    std::sort(batch.begin(), batch.end());
    const double eta = config.eta_at(t);
    if (t % config.record_stride == 0) {
      traj.checkpoints.push_back({t, w, eta, eta * scale, batch});
    }

    double loss = 0.0;
    const ParamVector g =
        sam_step_gradient(spec, w, data, batch, config.rho, config.p, config.lambda, scale, &loss);
    if (!std::isfinite(loss) || loss > kDivergenceLoss) {
      throw DivergenceError("training diverged at step " + std::to_string(t) +
                            " (batch loss " + std::to_string(loss) + ")");
    }
    w.axpy(-eta, g);
    if (!w.all_finite()) {
      throw DivergenceError("training produced non-finite parameters at step " + std::to_string(t));
    }
  }
  const double eta_final = config.eta_at(config.steps);
  traj.checkpoints.push_back({config.steps, w, eta_final, eta_final * scale, {}});
  return result;
}

}  // namespace

ParamVector sam_gradient(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                         std::span<const std::uint32_t> indices, double rho, double p,
                         double lambda, std::optional<double> scale) {
  if (indices.empty()) throw InvalidInput("sam_gradient needs a nonempty batch");
  const double s = scale.value_or(1.0 / static_cast<double>(indices.size()));
  return sam_step_gradient(spec, params, data, indices, rho, p, lambda, s, nullptr);
}

TrainResult train_sam(const ModelSpec& spec, const Dataset& data, const SAMConfig& config) {
  return run_training(spec, data, config, {}, RemovalMode::drop);
}

TrainResult train_sam_without(const ModelSpec& spec, const Dataset& data, const SAMConfig& config,
                              std::span<const std::uint32_t> removed, RemovalMode mode) {
  return run_training(spec, data, config, removed, mode);
}

Stationarity stationarity(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                          const SAMConfig& config) {
  const std::vector<std::uint32_t> train = data.indices(Split::train);
  const double scale = 1.0 / static_cast<double>(train.size());
  const ParamVector g = sam_gradient(spec, params, data, train, config.rho, config.p, 0.0, scale);
  ParamVector reg = g;
  reg.axpy(config.lambda, params);
  return {norm2(g), norm2(reg)};
}

}  // namespace samif
