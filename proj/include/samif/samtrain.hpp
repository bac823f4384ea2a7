#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samif/digest.hpp"
#include "samif/model.hpp"
#include "samif/numcore.hpp"

namespace samif {

struct SAMConfig {
  double rho = 0.05;
  double p = 2.0;
  double lambda = 0.0;
  double eta = 0.1;
  // Step decay: the learning rate is multiplied by lr_gamma at every listed step.
  std::vector<std::size_t> lr_milestones;
  double lr_gamma = 0.1;
  std::size_t batch_size = 0;  // 0 selects full-batch training
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  SamplingMode sampling = SamplingMode::per_step;

  double eta_at(std::size_t step) const;
  /// Throws InvalidConfig on negative rho/lambda, p outside (1, inf), zero steps etc.
  void validate() const;
  /// Canonical single-line text used for digests.
  std::string canonical() const;
  Digest digest() const;
};

struct Checkpoint {
  std::uint64_t step = 0;
  ParamVector params;
  double eta = 0.0;
  // Coefficient multiplying each batch member's loss gradient in the update
  // taken from this checkpoint: eta * (1 / batch size).
  double weight = 0.0;
  std::vector<std::uint32_t> batch;  // empty for the final checkpoint

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TrajectoryHeader {
  std::uint64_t param_count = 0;
  std::uint64_t rows = 0;   // dataset rows; batch members index these
  std::uint64_t steps = 0;  // T
  Digest config_digest{};

  friend bool operator==(const TrajectoryHeader&, const TrajectoryHeader&) = default;
};

struct Trajectory {
  TrajectoryHeader header;
  std::vector<Checkpoint> checkpoints;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrainResult {
  ParamVector params;
  Trajectory trajectory;
};

/// Closed-form first-order maximizer of the loss over the p-norm ball of
/// radius rho:  rho * sign(g) |g|^(q-1) / (||g||_q^q)^(1/p).  Zero when g = 0
/// or rho = 0.
ParamVector worst_perturbation(const ParamVector& grad, double rho, double p);

/// Gradient of the batch loss at the perturbed point w + eps(w) plus lambda*w.
/// The perturbation comes from the batch gradient at w; its own dependence on
/// w is not differentiated. `scale` weights each batch member's loss and
/// defaults to 1/|indices|.
ParamVector sam_gradient(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                         std::span<const std::uint32_t> indices, double rho, double p,
                         double lambda, std::optional<double> scale = std::nullopt);

TrainResult train_sam(const ModelSpec& spec, const Dataset& data, const SAMConfig& config);

enum class RemovalMode {
  // Removed rows simply leave their batches; remaining members keep their weight.
  drop,
  // Each removed slot is refilled with a seeded draw from the remaining rows.
  resample,
};

/// Retrains with the original batch schedule and initialization, minus the
/// given training rows.
TrainResult train_sam_without(const ModelSpec& spec, const Dataset& data, const SAMConfig& config,
                              std::span<const std::uint32_t> removed,
                              RemovalMode mode = RemovalMode::drop);

/// Norms of grad L_S(w + eps(w)) with and without the lambda*w term, over the
/// training rows with per-example scale 1/n.
struct Stationarity {
  double loss_gradient_norm = 0.0;
  double regularized_gradient_norm = 0.0;
};
Stationarity stationarity(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                          const SAMConfig& config);

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

/// Exact on-disk size of a trajectory file.
std::uint64_t trajectory_file_size(const Trajectory& traj);

}  // namespace samif
