#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "samif/errors.hpp"
#include "samif/numcore.hpp"

using namespace samif;

TEST_CASE("p_norm on hand-computed vectors") {
  ParamVector v{3.0, -4.0};
  CHECK(p_norm(v, 2.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(p_norm(v, 1.0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(p_norm(v, kInfinity) == 4.0);
  CHECK(p_norm(ParamVector{1.0, 1.0, 1.0, 1.0}, 4.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(p_norm(ParamVector(5), 3.0) == 0.0);
}

TEST_CASE("p_norm rejects bad input") {
  CHECK_THROWS_AS(p_norm(ParamVector{1.0, NAN}, 2.0), InvalidInput);
  CHECK_THROWS_AS(p_norm(ParamVector{1.0, INFINITY}, 2.0), InvalidInput);
  CHECK_THROWS_AS(p_norm(ParamVector{1.0}, 0.5), DomainError);
}

TEST_CASE("p_norm is absolutely homogeneous and survives extreme magnitudes") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0, kInfinity}) {
    ParamVector v(20);
    for (auto& x : v) x = nd(rng);
    double c = -3.7;
    CHECK(p_norm(c * v, p) == doctest::Approx(std::abs(c) * p_norm(v, p)).epsilon(1e-13));
    CHECK(p_norm(1e200 * v, p) == doctest::Approx(1e200 * p_norm(v, p)).epsilon(1e-12));
    CHECK(p_norm(1e-200 * v, p) == doctest::Approx(1e-200 * p_norm(v, p)).epsilon(1e-12));
  }
}

TEST_CASE("dual_exponent") {
  CHECK(dual_exponent(2.0) == 2.0);
  CHECK(dual_exponent(4.0) == doctest::Approx(4.0 / 3.0));
  CHECK(dual_exponent(1.5) == doctest::Approx(3.0));
  CHECK(dual_exponent(kInfinity) == 1.0);
  for (double p : {1.1, 1.5, 2.0, 3.0, 10.0})
    CHECK(dual_exponent(dual_exponent(p)) == doctest::Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(dual_exponent(1.0), DomainError);
  CHECK_THROWS_AS(dual_exponent(0.3), DomainError);
}

TEST_CASE("ParamVector arithmetic") {
  ParamVector a{1.0, 2.0}, b{0.5, -1.0};
  CHECK(a + b == ParamVector{1.5, 1.0});
  CHECK(a - b == ParamVector{0.5, 3.0});
  CHECK(2.0 * a == ParamVector{2.0, 4.0});
  CHECK(dot(a, b) == -1.5);
  CHECK(norm2(ParamVector{3.0, 4.0}) == 5.0);
  a.axpy(2.0, b);
  CHECK(a == ParamVector{2.0, 0.0});
  CHECK(a.all_finite());
  a[1] = NAN;
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("full batch covers every row each step") {
  auto s = sample_batches(7, 7, 4, 9);
  REQUIRE(s.steps.size() == 4);
  for (const auto& step : s.steps) CHECK(step == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("batches are sorted, distinct, in range and deterministic") {
  for (auto mode : {SamplingMode::per_step, SamplingMode::epoch_shuffled}) {
    auto a = sample_batches(50, 8, 30, 11, mode);
    auto b = sample_batches(50, 8, 30, 11, mode);
    auto c = sample_batches(50, 8, 30, 12, mode);
    CHECK(a == b);
    CHECK_FALSE(a.steps == c.steps);
    for (const auto& step : a.steps) {
      CHECK(step.size() == 8);
      CHECK(std::is_sorted(step.begin(), step.end()));
      CHECK(std::set<std::uint32_t>(step.begin(), step.end()).size() == 8);
      CHECK(step.back() < 50);
    }
  }
}

TEST_CASE("each row appears about T*b/n times") {
  auto s = sample_batches(100, 10, 1000, 5);
  std::vector<int> count(100, 0);
  for (const auto& step : s.steps)
    for (auto i : step) ++count[i];
  for (int c : count) {
    CHECK(c > 60);
    CHECK(c < 140);
  }
}

TEST_CASE("epoch shuffling visits every row once per epoch") {
  auto s = sample_batches(12, 4, 6, 3, SamplingMode::epoch_shuffled);
  for (std::size_t e = 0; e < 2; ++e) {
    std::set<std::uint32_t> seen;
    for (std::size_t j = 0; j < 3; ++j) seen.insert(s.steps[3 * e + j].begin(), s.steps[3 * e + j].end());
    CHECK(seen.size() == 12);
  }
}

TEST_CASE("invalid batch sizes") {
  CHECK_THROWS_AS(sample_batches(10, 0, 5, 1), InvalidConfig);
  CHECK_THROWS_AS(sample_batches(10, 11, 5, 1), InvalidConfig);
}
