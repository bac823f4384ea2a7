#include "samif/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "samif/errors.hpp"

namespace samif {

namespace {

void require_same_size(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("parameter vector size mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
}

}  // namespace

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_size(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_size(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

ParamVector& ParamVector::axpy(double c, const ParamVector& x) {
  require_same_size(*this, x);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += c * x.values_[i];
  return *this;
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double c, ParamVector v) { return v *= c; }

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const ParamVector& v) { return std::sqrt(dot(v, v)); }

double p_norm(std::span<const double> v, double p) {
  if (!(p >= 1.0)) throw DomainError("p_norm requires p >= 1, got " + std::to_string(p));
  double largest = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput("p_norm: non-finite entry");
    largest = std::max(largest, std::abs(x));
  }
  if (largest == 0.0 || std::isinf(p)) return largest;
  if (p == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (double x : v) s += (x / largest) * (x / largest);
    return largest * std::sqrt(s);
  }
  // Scaling by the largest magnitude keeps |x|^p in range for large p.
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x) / largest, p);
  return largest * std::pow(s, 1.0 / p);
}

double p_norm(const ParamVector& v, double p) { return p_norm(v.span(), p); }

double dual_exponent(double p) {
  if (std::isnan(p) || p <= 1.0) {
    throw DomainError("dual_exponent requires p > 1 (p = 1 pairs with q = inf), got " +
                      std::to_string(p));
  }
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

BatchSchedule sample_batches(std::size_t n, std::size_t b, std::size_t steps, std::uint64_t seed,
                             SamplingMode mode) {
  if (b == 0 || b > n) {
    throw InvalidConfig("batch size " + std::to_string(b) + " must lie in [1, " +
                        std::to_string(n) + "]");
  }
  if (steps == 0) throw InvalidConfig("step count must be positive");

  BatchSchedule schedule;
  schedule.batch_size = b;
  schedule.seed = seed;
  schedule.steps.reserve(steps);

  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);

  if (mode == SamplingMode::per_step) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<std::uint32_t> batch;
      batch.reserve(b);
      if (b == n) {
        batch = all;
      } else {
        std::sample(all.begin(), all.end(), std::back_inserter(batch), b, rng);
      }
      schedule.steps.push_back(std::move(batch));
    }
    return schedule;
  }

  std::vector<std::uint32_t> perm = all;
  std::size_t cursor = n;
  for (std::size_t t = 0; t < steps; ++t) {
    if (cursor + b > n) {
      std::shuffle(perm.begin(), perm.end(), rng);
      cursor = 0;
    }
    std::vector<std::uint32_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(cursor),
                                     perm.begin() + static_cast<std::ptrdiff_t>(cursor + b));
    std::sort(batch.begin(), batch.end());
    cursor += b;
    schedule.steps.push_back(std::move(batch));
  }
  return schedule;
}

}  // namespace samif
