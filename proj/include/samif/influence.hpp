#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "samif/model.hpp"
#include "samif/numcore.hpp"
#include "samif/samtrain.hpp"

namespace samif {

/// Matrix-free linear map on parameter space.
struct LinearOperator {
  std::size_t dim = 0;
  std::function<ParamVector(const ParamVector&)> apply;

  ParamVector operator()(const ParamVector& v) const { return apply(v); }
};

struct NeumannConfig {
  std::size_t order = 2000;  // J, maximum number of iterations
  double alpha = 0.0;        // series scale; 0 picks 1 / (largest eigenvalue estimate)
  double damp = 0.01;        // added to the operator diagonal
  double zeta = 1e-10;       // stop once ||v_{j+1} - v_j||_1 <= zeta

  void validate() const;
};

struct NeumannResult {
  ParamVector solution;
  std::size_t iterations = 0;
  bool converged = false;
  double alpha = 0.0;
};

/// Largest-magnitude eigenvalue of `op` by power iteration from a fixed start.
double estimate_spectral_radius(const LinearOperator& op, std::size_t iterations = 60);

/// Truncated Neumann series for (A + damp I)^{-1} g:
///   v_0 = alpha g,  v_{j+1} = alpha g + v_j - alpha (A + damp I) v_j.
/// Converges when the spectral radius of I - alpha (A + damp I) is below one.
/// Throws DivergenceError when an iterate stops being finite.
NeumannResult neumann_solve(const LinearOperator& op, const ParamVector& g, const NeumannConfig& cfg);
ParamVector neumann_ihvp(const LinearOperator& op, const ParamVector& g, const NeumannConfig& cfg);

enum class Estimator { if_fast, hif, gif };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& text);

enum class GifMode { gd, sgd };

struct InfluenceRecord {
  std::uint32_t k = 0;
  Estimator estimator = Estimator::if_fast;
  // Influence vector IF with  w_{-k} ~= w* - IF.
  ParamVector influence;
  // Predicted change of the summed validation loss when k is removed.
  double score = 0.0;
  double wall_time = 0.0;  // seconds
};

enum class JacobianMethod {
  automatic,          // analytic for p = 2, finite differences otherwise
  finite_difference,  // central differences of the perturbation map
};

/// (d eps / d w) v for the perturbation built from the full training
/// gradient. Assumes the gradient's sign pattern is locally constant.
/// Throws SingularPerturbation when the training gradient vanishes.
ParamVector eps_jacobian_vec(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                             double rho, double p, const ParamVector& v,
                             JacobianMethod method = JacobianMethod::automatic);

/// Shared state for Hessian-based influence estimates at a trained point:
/// the perturbation eps(w*), the perturbed point and the operator scale.
class HessianInfluence {
 public:
  HessianInfluence(const ModelSpec& spec, const Dataset& data, ParamVector params, double rho,
                   double p, double lambda, NeumannConfig ncfg, bool total_hessian);
  HessianInfluence(const HessianInfluence&) = delete;
  HessianInfluence& operator=(const HessianInfluence&) = delete;

  /// IF(k) = -A^{-1} grad L_S^k(w* + eps), A the Hessian operator in use.
  ParamVector influence(std::uint32_t k) const;

  /// The operator being inverted (without the Neumann damping).
  const LinearOperator& op() const { return op_; }
  const ParamVector& perturbed_point() const { return perturbed_; }
  double alpha() const { return ncfg_.alpha; }

 private:
  const ModelSpec& spec_;
  const Dataset& data_;
  ParamVector params_;
  ParamVector perturbed_;
  std::vector<std::uint32_t> train_;
  double scale_ = 0.0;
  NeumannConfig ncfg_;
  LinearOperator op_;
};

/// Influence ignoring how the perturbation responds to the removal:
/// -(H + lambda I)^{-1} grad L_S^k at w* + eps(w*).
ParamVector sam_if_fast(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                        double rho, double p, double lambda, std::uint32_t k,
                        const NeumannConfig& ncfg);

/// Influence through the total Hessian operator H (I + d eps / d w) + lambda I.
ParamVector sam_hif(const ModelSpec& spec, const Dataset& data, const ParamVector& params,
                    double rho, double p, double lambda, std::uint32_t k, const NeumannConfig& ncfg);

/// Trajectory influence: -sum_t w_t [k in batch_t] grad l_k(w_t + eps(w_t)) over
/// the recorded checkpoints before the final one. In gd mode every step counts
/// with coefficient eta_t / n and eps comes from the full training gradient.
ParamVector sam_gif(const Trajectory& traj, const ModelSpec& spec, const Dataset& data,
                    const SAMConfig& config, std::uint32_t k, GifMode mode = GifMode::sgd);

/// Same as sam_gif for many rows in one sweep over the trajectory.
std::vector<ParamVector> sam_gif_many(const Trajectory& traj, const ModelSpec& spec,
                                      const Dataset& data, const SAMConfig& config,
                                      std::span<const std::uint32_t> ks, GifMode mode = GifMode::sgd);

/// Summed loss gradient over the given rows at `params` (per-example scale 1).
ParamVector validation_gradient(const ModelSpec& spec, const ParamVector& params,
                                const Dataset& data, std::span<const std::uint32_t> val_indices);

/// IS = -(sum_val grad l(w*)) . IF. Positive values predict that removing the
/// point raises the validation loss, i.e. the point is valuable.
double influence_score(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                       std::span<const std::uint32_t> val_indices, const ParamVector& ifvec);
double influence_score(const ParamVector& val_gradient, const ParamVector& ifvec);

/// w* - IF; pass a sum of influence vectors to remove a group.
ParamVector edit_model(const ParamVector& params, const ParamVector& ifvec);

}  // namespace samif

namespace samif {

struct AttributionSetup {
  NeumannConfig neumann;
  GifMode gif_mode = GifMode::sgd;
};

/// Influence vectors and scores for the training rows `ks` against the
/// validation rows `val`. `trajectory` is required for the gif estimator.
std::vector<InfluenceRecord> attribute(const ModelSpec& spec, const Dataset& data,
                                       const SAMConfig& config, const ParamVector& params,
                                       const Trajectory* trajectory, Estimator estimator,
                                       std::span<const std::uint32_t> ks,
                                       std::span<const std::uint32_t> val,
                                       const AttributionSetup& setup = {});

}  // namespace samif
