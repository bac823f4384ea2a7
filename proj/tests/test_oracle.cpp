#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "samif/errors.hpp"
#include "samif/ingest.hpp"
#include "samif/oracle.hpp"

using namespace samif;
using fixtures::gaussian_rows;

TEST_CASE("dense Hessian of a quadratic") {
  // least squares with one feature: per-example Hessian is [x^2 x; x 1] per class
  Dataset data(2, 1, {1.0, 3.0}, {0, 1}, {Split::train, Split::train});
  ModelSpec spec = ModelSpec::least_squares(1, 2);
  Eigen::MatrixXd h = dense_hessian(spec, ParamVector(4), data, 0.5);
  Eigen::MatrixXd block(2, 2);
  block << 5.0, 2.0, 2.0, 1.0;  // mean of x^2 = 5, mean of x = 2
  // layout: class-0 weight, class-1 weight, class-0 bias, class-1 bias
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
  for (int c = 0; c < 2; ++c) {
    expected(c, c) = block(0, 0);
    expected(c, 2 + c) = expected(2 + c, c) = block(0, 1);
    expected(2 + c, 2 + c) = block(1, 1);
  }
  expected += 0.5 * Eigen::MatrixXd::Identity(4, 4);
  CHECK((h - expected).norm() < 1e-12);
}

TEST_CASE("dense Hessian agrees with second differences") {
  Dataset data = gaussian_rows(12, 2, 3, 3);
  ModelSpec spec = ModelSpec::mlp({2, 3, 3});
  ParamVector w = init_params(spec, 4);
  auto rows = data.indices(Split::train);
  Eigen::MatrixXd h = dense_hessian(spec, w, data, 0.0);
  Eigen::MatrixXd f = finite_difference_hessian(spec, w, data, rows, 1.0 / 12);
  CHECK((h - f).norm() / h.norm() < 1e-5);
  CHECK((h - h.transpose()).norm() < 1e-12);
}

TEST_CASE("dense Hessian refuses large models") {
  ModelSpec spec = ModelSpec::mlp({100, 30, 2});
  Dataset data = gaussian_rows(3, 100, 2, 1);
  CHECK_THROWS_AS(dense_hessian(spec, init_params(spec, 0), data, 0.0), InvalidInput);
}

TEST_CASE("correlation helpers") {
  std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, d{1, 4, 9, 16}, k{5, 5, 5, 5};
  CHECK(pearson_correlation(a, b) == doctest::Approx(1.0));
  CHECK(pearson_correlation(a, c) == doctest::Approx(-1.0));
  CHECK(pearson_correlation(a, k) == 0.0);
  CHECK(spearman_correlation(a, d) == doctest::Approx(1.0));
  CHECK(pearson_correlation(a, d) < 1.0);
  std::vector<double> ties{1, 1, 2, 3};
  CHECK(spearman_correlation(ties, a) == doctest::Approx(pearson_correlation(std::vector<double>{1.5, 1.5, 3, 4}, a)));
  std::vector<double> p{1, -1, 0, 2}, q{1, 1, 1, -2};
  CHECK(sign_agreement(p, q) == doctest::Approx((1 + 0 + 0.5 + 0) / 4.0));
  auto r = calibration_report(a, b, "x");
  CHECK(r.n_points == 4);
  CHECK(r.estimator == "x");
  CHECK(r.sign_agreement == 1.0);
}

TEST_CASE("retraining without a point is deterministic") {
  Dataset data = make_blobs({30, 3, 2, 2.0, 1}, 10, 0);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.batch_size = 5;
  cfg.steps = 60;
  CHECK(loo_retrain(spec, data, 4, cfg) == loo_retrain(spec, data, 4, cfg));
  CHECK_FALSE(loo_retrain(spec, data, 4, cfg) == train_sam(spec, data, cfg).params);
}

TEST_CASE("removing one of two identical points changes less than removing an outlier") {
  Dataset base = make_blobs({40, 3, 2, 2.0, 6}, 0, 0);
  std::vector<double> x = base.features();
  std::vector<int> y = base.labels();
  for (int j = 0; j < 3; ++j) x.push_back(x[j]);
  y.push_back(y[0]);
  // outlier: deep inside the class-0 side, labelled 1
  for (double v : {6.0, 0.0, 0.0}) x.push_back(v);
  y.push_back(1);
  std::vector<Split> s(42, Split::train);
  Dataset data(42, 3, x, y, s);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.lambda = 0.01;
  cfg.eta = 0.5;
  cfg.steps = 400;
  ParamVector w = train_sam(spec, data, cfg).params;
  const double dup_shift = norm2(loo_retrain(spec, data, 40, cfg) - w);
  const double outlier_shift = norm2(loo_retrain(spec, data, 41, cfg) - w);
  CHECK(dup_shift < outlier_shift);
}

TEST_CASE("two identical points: refilling the removed slot reproduces the full run") {
  Dataset data(2, 2, {1.0, -0.5, 1.0, -0.5}, {1, 1}, {Split::train, Split::train});
  ModelSpec spec = ModelSpec::logistic(2, 2);
  SAMConfig cfg;
  cfg.lambda = 0.1;
  cfg.steps = 50;
  ParamVector w = train_sam(spec, data, cfg).params;
  ParamVector refill = loo_retrain(spec, data, 0, cfg, RemovalMode::resample);
  CHECK(norm2(refill - w) < 1e-14);
}

TEST_CASE("LOO validation changes follow their definition") {
  Dataset data = make_blobs({25, 3, 2, 1.5, 2}, 10, 0);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.lambda = 0.05;
  cfg.steps = 80;
  ParamVector w = train_sam(spec, data, cfg).params;
  auto val = data.indices(Split::val);
  std::vector<std::uint32_t> ks{2, 9};
  auto changes = loo_validation_changes(spec, data, cfg, w, ks);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    ParamVector wk = loo_retrain(spec, data, ks[i], cfg);
    CHECK(changes[i] == doctest::Approx(subset_loss(spec, wk, data, val, 1.0) - subset_loss(spec, w, data, val, 1.0)));
  }
}

TEST_CASE("a constant estimator carries no rank information") {
  std::vector<double> actual{0.3, -0.1, 0.2, 0.05, -0.4};
  std::vector<double> zero(5, 0.0);
  auto r = calibration_report(zero, actual, "null");
  CHECK(r.pearson == 0.0);
  CHECK(r.spearman == 0.0);
  CHECK(r.sign_agreement == 0.5);
}

TEST_CASE("calibration sample") {
  Dataset data = make_blobs({30, 2, 2, 2.0, 1}, 5, 0);
  CHECK(calibration_sample(data, 30, 1).size() == 30);
  CHECK_THROWS_AS(calibration_sample(data, 31, 1), InvalidConfig);
  auto s = calibration_sample(data, 10, 1);
  CHECK(s.size() == 10);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(s == calibration_sample(data, 10, 1));
}

TEST_CASE("calibration on a small problem produces sane reports") {
  Dataset data = make_blobs({40, 3, 2, 2.0, 3}, 20, 0);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.lambda = 0.1;
  cfg.eta = 1.0;
  cfg.steps = 300;
  for (Estimator e : {Estimator::if_fast, Estimator::hif, Estimator::gif}) {
    CalibrationOptions opt;
    opt.attribution.neumann = fixtures::tight_neumann();
    auto r = calibrate_estimator(spec, data, cfg, e, 20, opt);
    CHECK(r.n_points == 20);
    CHECK(r.estimator == to_string(e));
    CHECK(r.pearson >= -1.0);
    CHECK(r.pearson <= 1.0);
    CHECK(r.spearman > 0.5);
    CHECK(r.sign_agreement >= 0.0);
    CHECK(r.sign_agreement <= 1.0);
  }
}
