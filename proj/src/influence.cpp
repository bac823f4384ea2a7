#include "samif/influence.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <cmath>

#include "samif/errors.hpp"

namespace samif {

void NeumannConfig::validate() const {
  if (order == 0) throw InvalidConfig("Neumann order must be at least 1");
  if (!(zeta > 0.0)) throw InvalidConfig("Neumann threshold zeta must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidConfig("Neumann alpha must be finite and >= 0");
  if (!(damp >= 0.0) || !std::isfinite(damp)) throw InvalidConfig("Neumann damping must be finite and >= 0");
}

double estimate_spectral_radius(const LinearOperator& op, std::size_t iterations) {
  ParamVector v(op.dim);
  for (std::size_t i = 0; i < op.dim; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v *= 1.0 / norm2(v);
  double radius = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    ParamVector w = op(v);
    const double n = norm2(w);
    if (!std::isfinite(n)) throw DivergenceError("power iteration produced non-finite values");
    if (n == 0.0) return 0.0;
    radius = n;
    v = (1.0 / n) * std::move(w);
  }
  return radius;
}

NeumannResult neumann_solve(const LinearOperator& op, const ParamVector& g, const NeumannConfig& cfg) {
  cfg.validate();
  if (g.size() != op.dim) throw InvalidInput("Neumann right-hand side does not match operator dimension");
  double alpha = cfg.alpha;
  if (alpha == 0.0) {
    const LinearOperator damped{op.dim, [&](const ParamVector& v) {
                                  ParamVector out = op(v);
                                  out.axpy(cfg.damp, v);
                                  return out;
                                }};
    const double radius = estimate_spectral_radius(damped);
    alpha = radius > 0.0 ? 1.0 / radius : 1.0;
  }

  NeumannResult res;
  res.alpha = alpha;
  ParamVector v = alpha * g;
  for (std::size_t j = 0; j < cfg.order; ++j) {
    ParamVector next = op(v);
    next.axpy(cfg.damp, v);
    // next <- alpha g + v - alpha (A + damp) v
    double step = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double updated = alpha * g[i] + v[i] - alpha * next[i];
      step += std::abs(updated - v[i]);
      next[i] = updated;
    }
    if (!next.all_finite()) {
      throw DivergenceError("Neumann iteration diverged at order " + std::to_string(j + 1) +
                            "; use a smaller alpha or a larger damping");
    }
    v = std::move(next);
    res.iterations = j + 1;
    if (step <= cfg.zeta) {
      res.converged = true;
      break;
    }
  }
  res.solution = std::move(v);
  return res;
}

ParamVector neumann_ihvp(const LinearOperator& op, const ParamVector& g, const NeumannConfig& cfg) {
  return neumann_solve(op, g, cfg).solution;
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::if_fast: return "if-fast";
    case Estimator::hif: return "hif";
    case Estimator::gif: return "gif";
  }
  return "?";
}

Estimator parse_estimator(const std::string& text) {
  if (text == "if-fast" || text == "if_fast") return Estimator::if_fast;
  if (text == "hif") return Estimator::hif;
  if (text == "gif") return Estimator::gif;
  throw InvalidConfig("unknown estimator '" + text + "' (expected if-fast, hif or gif)");
}

namespace {

std::vector<std::uint32_t> training_rows(const Dataset& data) {
  auto rows = data.indices(Split::train);
  if (rows.empty()) throw InvalidInput("dataset has no training rows");
  return rows;
}

void check_train_row(const Dataset& data, std::uint32_t k) {
  if (k >= data.size() || data.split(k) != Split::train) {
    throw InvalidInput("row " + std::to_string(k) + " is not a training row");
  }
}

// Directional derivative of the perturbation map w -> eps(w), where eps is
// built from the full training gradient.
class PerturbationJacobian {
 public:
  PerturbationJacobian(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                       double rho, double p, JacobianMethod method)
      : spec_(spec), data_(data), params_(params), rho_(rho), p_(p),
        train_(training_rows(data)), scale_(1.0 / static_cast<double>(train_.size())) {
    if (rho_ == 0.0) return;
    grad_ = subset_loss_grad(spec, params, data, train_, scale_).grad;
    grad_norm_ = norm2(grad_);
    if (grad_norm_ == 0.0) {
      throw SingularPerturbation("training gradient vanishes; the perturbation is not differentiable here");
    }
    analytic_ = (method == JacobianMethod::automatic && p_ == 2.0);
  }

  ParamVector operator()(const ParamVector& v) const {
    if (v.size() != params_.size()) throw InvalidInput("Jacobian direction has the wrong length");
    if (rho_ == 0.0) return ParamVector(v.size());
    if (analytic_) {
      const ParamVector hv = hvp(spec_, params_, data_, train_, v, scale_);
      const double gh = dot(grad_, hv);
      ParamVector out = (rho_ / grad_norm_) * hv;
      out.axpy(-rho_ * gh / (grad_norm_ * grad_norm_ * grad_norm_), grad_);
      return out;
    }
    const double vn = norm2(v);
    if (vn == 0.0) return ParamVector(v.size());
    const double wn = norm2(params_);
    const double h = 1e-4 * (wn > 0.0 ? wn : 1.0) / vn;
    ParamVector plus = params_;
    plus.axpy(h, v);
    ParamVector minus = params_;
    minus.axpy(-h, v);
    const ParamVector ep = worst_perturbation(subset_loss_grad(spec_, plus, data_, train_, scale_).grad, rho_, p_);
    const ParamVector em = worst_perturbation(subset_loss_grad(spec_, minus, data_, train_, scale_).grad, rho_, p_);
    return (1.0 / (2.0 * h)) * (ep - em);
  }

 private:
  const ModelSpec& spec_;
  const Dataset& data_;
  ParamVector params_;
  double rho_, p_;
  std::vector<std::uint32_t> train_;
  double scale_;
  ParamVector grad_;
  double grad_norm_ = 0.0;
  bool analytic_ = false;
};

}  // namespace

ParamVector eps_jacobian_vec(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                             double rho, double p, const ParamVector& v, JacobianMethod method) {
  return PerturbationJacobian(spec, data, params, rho, p, method)(v);
}

HessianInfluence::HessianInfluence(const ModelSpec& spec, const Dataset& data, ParamVector params,
                                   double rho, double p, double lambda, NeumannConfig ncfg,
                                   bool total_hessian)
    : spec_(spec), data_(data), params_(std::move(params)), train_(training_rows(data)),
      scale_(1.0 / static_cast<double>(train_.size())), ncfg_(ncfg) {
  ncfg_.validate();
  const ParamVector g = subset_loss_grad(spec_, params_, data_, train_, scale_).grad;
  perturbed_ = params_ + worst_perturbation(g, rho, p);

  if (total_hessian) {
    auto jac = std::make_shared<PerturbationJacobian>(spec_, data_, params_, rho, p, JacobianMethod::automatic);
    op_ = {params_.size(), [this, jac, lambda](const ParamVector& v) {
             ParamVector out = hvp(spec_, perturbed_, data_, train_, v + (*jac)(v), scale_);
             out.axpy(lambda, v);
             return out;
           }};
  } else {
    op_ = {params_.size(), [this, lambda](const ParamVector& v) {
             ParamVector out = hvp(spec_, perturbed_, data_, train_, v, scale_);
             out.axpy(lambda, v);
             return out;
           }};
  }
  if (ncfg_.alpha == 0.0) {
    const LinearOperator damped{op_.dim, [this](const ParamVector& v) {
                                  ParamVector out = op_(v);
                                  out.axpy(ncfg_.damp, v);
                                  return out;
                                }};
    const double radius = estimate_spectral_radius(damped);
    ncfg_.alpha = radius > 0.0 ? 1.0 / radius : 1.0;
  }
}

ParamVector HessianInfluence::influence(std::uint32_t k) const {
  check_train_row(data_, k);
  const std::uint32_t row[1] = {k};
  const ParamVector gk = subset_loss_grad(spec_, perturbed_, data_, row, scale_).grad;
  ParamVector out = neumann_ihvp(op_, gk, ncfg_);
  out *= -1.0;
  return out;
}

ParamVector sam_if_fast(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                        double rho, double p, double lambda, std::uint32_t k,
                        const NeumannConfig& ncfg) {
  return HessianInfluence(spec, data, params, rho, p, lambda, ncfg, false).influence(k);
}

ParamVector sam_hif(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                    double rho, double p, double lambda, std::uint32_t k, const NeumannConfig& ncfg) {
  return HessianInfluence(spec, data, params, rho, p, lambda, ncfg, true).influence(k);
}

std::vector<ParamVector> sam_gif_many(const Trajectory& traj, const ModelSpec& spec,
                                      const Dataset& data, const SAMConfig& config,
                                      std::span<const std::uint32_t> ks, GifMode mode) {
  const std::size_t P = spec.param_count();
  if (traj.header.param_count != P) {
    throw InvalidInput("trajectory holds " + std::to_string(traj.header.param_count) +
                       " parameters, model expects " + std::to_string(P));
  }
  if (traj.header.rows != data.size()) throw InvalidInput("trajectory was recorded on a different dataset");
  if (traj.header.config_digest != config.digest()) {
    throw InvalidInput("trajectory was recorded with a different training configuration");
  }
  // Checkpoints must sit at 0, s, 2s, ... and at T.
  std::size_t expected = 0;
  for (std::size_t c = 0; c < traj.checkpoints.size(); ++c) {
    const std::uint64_t step = traj.checkpoints[c].step;
    if (step != std::min<std::uint64_t>(expected, traj.header.steps)) {
      throw InvalidInput("trajectory is missing the checkpoint for step " + std::to_string(expected));
    }
    if (traj.checkpoints[c].params.size() != P) throw InvalidInput("checkpoint parameter count mismatch");
    expected += config.record_stride;
  }
  if (traj.checkpoints.empty() || traj.checkpoints.back().step != traj.header.steps) {
    throw InvalidInput("trajectory is missing its final checkpoint");
  }
  for (std::uint32_t k : ks) check_train_row(data, k);

  const std::vector<std::uint32_t> train = training_rows(data);
  const double n = static_cast<double>(train.size());
  std::vector<ParamVector> out(ks.size(), ParamVector(P));
  std::vector<char> in_batch(data.size(), 0);

  for (const Checkpoint& c : traj.checkpoints) {
    if (c.step >= traj.header.steps) break;
    const bool gd = (mode == GifMode::gd);
    std::span<const std::uint32_t> eps_rows = gd ? std::span<const std::uint32_t>(train) : c.batch;
    if (eps_rows.empty()) continue;
    if (!gd) {
      for (std::uint32_t r : c.batch) in_batch[r] = 1;
    }
    const ParamVector g = subset_loss_grad(spec, c.params, data, eps_rows, 1.0 / static_cast<double>(eps_rows.size())).grad;
    const ParamVector at = c.params + worst_perturbation(g, config.rho, config.p);
    const double coeff = gd ? c.eta * (1.0 / n) : c.weight;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (!gd && !in_batch[ks[j]]) continue;
      const std::uint32_t row[1] = {ks[j]};
      out[j].axpy(-coeff, subset_loss_grad(spec, at, data, row, 1.0).grad);
    }
    if (!gd) {
      for (std::uint32_t r : c.batch) in_batch[r] = 0;
    }
  }
  return out;
}

ParamVector sam_gif(const Trajectory& traj, const ModelSpec& spec, const Dataset& data,
                    const SAMConfig& config, std::uint32_t k, GifMode mode) {
  const std::uint32_t ks[1] = {k};
  return std::move(sam_gif_many(traj, spec, data, config, ks, mode).front());
}

ParamVector validation_gradient(const ModelSpec& spec, const ParamVector& params,
                                const Dataset& data, std::span<const std::uint32_t> val_indices) {
  if (val_indices.empty()) throw InvalidInput("validation index set is empty");
  return subset_loss_grad(spec, params, data, val_indices, 1.0).grad;
}

double influence_score(const ParamVector& val_gradient, const ParamVector& ifvec) {
  return -dot(val_gradient, ifvec);
}

double influence_score(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                       std::span<const std::uint32_t> val_indices, const ParamVector& ifvec) {
  return influence_score(validation_gradient(spec, params, data, val_indices), ifvec);
}

ParamVector edit_model(const ParamVector& params, const ParamVector& ifvec) {
  if (params.size() != ifvec.size()) throw InvalidInput("influence vector length does not match the model");
  return params - ifvec;
}

}  // namespace samif

namespace samif {

std::vector<InfluenceRecord> attribute(const ModelSpec& spec, const Dataset& data,
                                       const SAMConfig& config, const ParamVector& params,
                                       const Trajectory* trajectory, Estimator estimator,
                                       std::span<const std::uint32_t> ks,
                                       std::span<const std::uint32_t> val,
                                       const AttributionSetup& setup) {
  using clock = std::chrono::steady_clock;
  const ParamVector val_grad = validation_gradient(spec, params, data, val);
  std::vector<InfluenceRecord> records;
  records.reserve(ks.size());

  if (estimator == Estimator::gif) {
    if (trajectory == nullptr) throw InvalidInput("the gif estimator needs a recorded trajectory");
    const auto start = clock::now();
    std::vector<ParamVector> ifs = sam_gif_many(*trajectory, spec, data, config, ks, setup.gif_mode);
    const double per_point =
        std::chrono::duration<double>(clock::now() - start).count() / static_cast<double>(std::max<std::size_t>(ks.size(), 1));
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const double score = influence_score(val_grad, ifs[j]);
      records.push_back({ks[j], estimator, std::move(ifs[j]), score, per_point});
    }
    return records;
  }

  const HessianInfluence solver(spec, data, params, config.rho, config.p, config.lambda,
                                setup.neumann, estimator == Estimator::hif);
  for (std::uint32_t k : ks) {
    const auto start = clock::now();
    ParamVector iv = solver.influence(k);
    const double score = influence_score(val_grad, iv);
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    records.push_back({k, estimator, std::move(iv), score, secs});
  }
  return records;
}

}  // namespace samif
