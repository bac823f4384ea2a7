#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

namespace samif {

/// Flat parameter-space vector. Model weights, perturbations, gradients and
/// influence vectors all share this representation.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t size, double fill = 0.0) : values_(size, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double c);

  /// this += c * x
  ParamVector& axpy(double c, const ParamVector& x);

  bool all_finite() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double c, ParamVector v);

double dot(const ParamVector& a, const ParamVector& b);
double norm2(const ParamVector& v);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// (sum |v_i|^p)^(1/p), or max |v_i| when p is infinite. Throws InvalidInput on
/// non-finite entries and DomainError when p < 1.
double p_norm(const ParamVector& v, double p);
double p_norm(std::span<const double> v, double p);

/// Hoelder conjugate q with 1/p + 1/q = 1, defined for p in (1, inf).
/// p = inf maps to 1; p <= 1 throws DomainError.
double dual_exponent(double p);

struct BatchSchedule {
  std::vector<std::vector<std::uint32_t>> steps;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const BatchSchedule&, const BatchSchedule&) = default;
};

enum class SamplingMode {
  // Without replacement inside a step, independent draws across steps.
  per_step,
  // Consecutive chunks of a fresh permutation each epoch; the tail that does
  // not fill a batch is dropped.
  epoch_shuffled,
};

/// T index sets of b distinct members drawn from 0..n-1. Members of each set
/// are sorted ascending. Deterministic in seed.
BatchSchedule sample_batches(std::size_t n, std::size_t b, std::size_t steps, std::uint64_t seed,
                             SamplingMode mode = SamplingMode::per_step);

}  // namespace samif
