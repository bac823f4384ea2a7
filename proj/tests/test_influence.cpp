#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "samif/errors.hpp"
#include "samif/influence.hpp"
#include "samif/ingest.hpp"
#include "samif/oracle.hpp"

using namespace samif;
using fixtures::gaussian_rows;
using fixtures::gaussian_vector;

namespace {

LinearOperator matrix_op(const Eigen::MatrixXd& m) {
  return {static_cast<std::size_t>(m.rows()), [m](const ParamVector& v) {
            Eigen::VectorXd r = m * Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
            return ParamVector(std::vector<double>(r.data(), r.data() + r.size()));
          }};
}

Eigen::VectorXd as_eigen(const ParamVector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

ParamVector as_param(const Eigen::VectorXd& v) {
  return ParamVector(std::vector<double>(v.data(), v.data() + v.size()));
}

struct Trained {
  Dataset data = fixtures::convex_data();
  ModelSpec spec = ModelSpec::logistic(10, 2);
  SAMConfig cfg = fixtures::convex_config();
  TrainResult tr = train_sam(spec, data, cfg);
};

const Trained& convex() {
  static const Trained t;
  return t;
}

}  // namespace

TEST_CASE("Neumann series on a diagonal system") {
  Eigen::MatrixXd a = Eigen::Vector2d(2.0, 4.0).asDiagonal();
  NeumannConfig cfg;
  cfg.damp = 0.0;
  cfg.zeta = 1e-14;
  auto r = neumann_solve(matrix_op(a), ParamVector{1.0, 1.0}, cfg);
  CHECK(r.converged);
  CHECK(r.solution[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.solution[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.alpha == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("Neumann damping shifts the spectrum") {
  Eigen::MatrixXd a = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  NeumannConfig cfg;
  cfg.damp = 1.0;
  cfg.zeta = 1e-14;
  auto v = neumann_ihvp(matrix_op(a), ParamVector{2.0, 4.0}, cfg);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Neumann series matches a dense solve on random SPD systems") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Eigen::MatrixXd b = Eigen::Map<const Eigen::MatrixXd>(gaussian_vector(400, seed).data(), 20, 20);
    Eigen::MatrixXd a = b * b.transpose() / 20.0;
    ParamVector g = gaussian_vector(20, seed + 50);
    NeumannConfig cfg;
    cfg.damp = 0.5;
    cfg.order = 500;
    cfg.zeta = 1e-10;
    auto r = neumann_solve(matrix_op(a), g, cfg);
    Eigen::MatrixXd damped = a + 0.5 * Eigen::MatrixXd::Identity(20, 20);
    Eigen::VectorXd exact = damped.ldlt().solve(as_eigen(g));
    CHECK((as_eigen(r.solution) - exact).norm() / exact.norm() < 1e-3);
    if (r.converged) {
      Eigen::VectorXd residual = damped * as_eigen(r.solution) - as_eigen(g);
      CHECK(residual.lpNorm<1>() < 10 * cfg.zeta);
    }
  }
}

TEST_CASE("Neumann series reports divergence for a too large scale") {
  Eigen::MatrixXd a = Eigen::Vector2d(10.0, 1.0).asDiagonal();
  NeumannConfig cfg;
  cfg.alpha = 1.0;
  cfg.damp = 0.0;
  cfg.order = 5000;
  CHECK_THROWS_AS(neumann_solve(matrix_op(a), ParamVector{1.0, 1.0}, cfg), DivergenceError);
  cfg.order = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("spectral radius estimate") {
  Eigen::MatrixXd a = Eigen::Vector3d(1.0, 5.0, 3.0).asDiagonal();
  CHECK(estimate_spectral_radius(matrix_op(a)) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("estimator names") {
  CHECK(parse_estimator("if-fast") == Estimator::if_fast);
  CHECK(parse_estimator("if_fast") == Estimator::if_fast);
  CHECK(parse_estimator("hif") == Estimator::hif);
  CHECK(to_string(Estimator::gif) == "gif");
  CHECK_THROWS_AS(parse_estimator("tracin"), InvalidConfig);
}

TEST_CASE("least-squares influence equals the closed-form ridge response") {
  Dataset data = gaussian_rows(30, 3, 2, 6);
  ModelSpec spec = ModelSpec::least_squares(3, 2);
  ParamVector w = init_params(spec, 3);
  const double lambda = 0.05;
  Eigen::MatrixXd a = dense_hessian(spec, w, data, lambda);
  NeumannConfig cfg;
  cfg.damp = 0.0;
  cfg.zeta = 1e-14;
  cfg.order = 100000;
  for (std::uint32_t k : {0u, 7u, 29u}) {
    const std::uint32_t row[1] = {k};
    ParamVector gk = subset_loss_grad(spec, w, data, row, 1.0 / 30).grad;
    Eigen::VectorXd exact = -a.ldlt().solve(as_eigen(gk));
    ParamVector got = sam_if_fast(spec, data, w, 0.0, 2.0, lambda, k, cfg);
    CHECK((as_eigen(got) - exact).norm() / exact.norm() < 1e-8);
  }
}

TEST_CASE("least-squares edit recovers the exact ridge leave-one-out optimum to first order") {
  Dataset data = gaussian_rows(40, 3, 2, 2);
  ModelSpec spec = ModelSpec::least_squares(3, 2);
  auto train = data.indices(Split::train);
  const double lambda = 0.1;
  // exact minimizers via the normal equations (the Hessian is constant)
  auto solve = [&](std::span<const std::uint32_t> rows) {
    ParamVector zero(spec.param_count());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(spec.param_count(), spec.param_count());
    for (std::size_t i = 0; i < spec.param_count(); ++i) {
      ParamVector e(spec.param_count());
      e[i] = 1.0;
      h.col(i) = as_eigen(hvp(spec, zero, data, rows, e, 1.0 / 40));
    }
    h += lambda * Eigen::MatrixXd::Identity(spec.param_count(), spec.param_count());
    Eigen::VectorXd g0 = as_eigen(subset_loss_grad(spec, zero, data, rows, 1.0 / 40).grad);
    return as_param(-h.ldlt().solve(g0));
  };
  ParamVector w = solve(train);
  std::vector<std::uint32_t> rest(train.begin() + 1, train.end());
  ParamVector loo = solve(rest);
  NeumannConfig cfg;
  cfg.damp = 0.0;
  cfg.zeta = 1e-14;
  cfg.order = 100000;
  ParamVector edited = edit_model(w, sam_if_fast(spec, data, w, 0.0, 2.0, lambda, 0, cfg));
  const double shift = norm2(loo - w);
  CHECK(norm2(edited - loo) < 0.1 * shift);
}

TEST_CASE("duplicated rows receive identical influence") {
  Dataset base = make_blobs({40, 3, 2, 2.0, 4}, 10, 0);
  std::vector<double> x = base.features();
  std::vector<int> y = base.labels();
  std::vector<Split> s = base.splits();
  for (std::size_t j = 0; j < 3; ++j) x.push_back(x[5 * 3 + j]);
  y.push_back(y[5]);
  s.push_back(Split::train);
  Dataset data(base.size() + 1, 3, x, y, s);
  const std::uint32_t dup = static_cast<std::uint32_t>(base.size());
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.lambda = 0.1;
  cfg.eta = 0.5;
  cfg.steps = 300;
  auto tr = train_sam(spec, data, cfg);
  for (Estimator e : {Estimator::if_fast, Estimator::hif, Estimator::gif}) {
    std::vector<std::uint32_t> ks{5, dup};
    auto rec = attribute(spec, data, cfg, tr.params, &tr.trajectory, e, ks, data.indices(Split::val));
    CHECK(norm2(rec[0].influence - rec[1].influence) < 1e-12 * (1 + norm2(rec[0].influence)));
    CHECK(rec[0].score == doctest::Approx(rec[1].score));
  }
}

TEST_CASE("perturbation Jacobian") {
  Dataset data = gaussian_rows(20, 3, 2, 3);
  ModelSpec spec = ModelSpec::mlp({3, 4, 2});
  ParamVector w = init_params(spec, 5);
  ParamVector v = gaussian_vector(spec.param_count(), 9);
  SUBCASE("zero radius gives zero") { CHECK(eps_jacobian_vec(spec, data, w, 0.0, 2.0, v) == ParamVector(v.size())); }
  SUBCASE("analytic form matches differences of the perturbation") {
    auto a = eps_jacobian_vec(spec, data, w, 0.1, 2.0, v, JacobianMethod::automatic);
    auto f = eps_jacobian_vec(spec, data, w, 0.1, 2.0, v, JacobianMethod::finite_difference);
    CHECK(norm2(a - f) / norm2(a) < 1e-5);
  }
  SUBCASE("Jacobian is orthogonal to the gradient direction for p = 2") {
    auto train = data.indices(Split::train);
    ParamVector g = subset_loss_grad(spec, w, data, train, 1.0 / 20).grad;
    auto a = eps_jacobian_vec(spec, data, w, 0.1, 2.0, v);
    CHECK(std::abs(dot(a, g)) < 1e-12 * norm2(a) * norm2(g) + 1e-15);
  }
  SUBCASE("general p uses differences") {
    auto f = eps_jacobian_vec(spec, data, w, 0.1, 4.0, v);
    CHECK(f.all_finite());
    CHECK(norm2(f) > 0.0);
  }
  SUBCASE("vanishing gradient is singular") {
    ModelSpec ls = ModelSpec::least_squares(1, 2);
    // a single row whose targets are already met exactly
    Dataset one(1, 1, {0.0}, {1}, {Split::train});
    ParamVector fit{0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(eps_jacobian_vec(ls, one, fit, 0.1, 2.0, ParamVector(4, 1.0)), SingularPerturbation);
  }
}

TEST_CASE("HIF equals IF when the radius is zero") {
  const auto& t = convex();
  NeumannConfig nc = fixtures::tight_neumann();
  for (std::uint32_t k : {0u, 17u, 123u}) {
    auto a = sam_if_fast(t.spec, t.data, t.tr.params, 0.0, 2.0, t.cfg.lambda, k, nc);
    auto b = sam_hif(t.spec, t.data, t.tr.params, 0.0, 2.0, t.cfg.lambda, k, nc);
    CHECK(norm2(a - b) < 1e-9);
  }
}

TEST_CASE("HIF agrees with a dense assembly of the total Hessian") {
  const auto& t = convex();
  const ParamVector& w = t.tr.params;
  const std::size_t P = t.spec.param_count();
  auto train = t.data.indices(Split::train);
  const double n = static_cast<double>(train.size());
  ParamVector g = subset_loss_grad(t.spec, w, t.data, train, 1.0 / n).grad;
  ParamVector pert = w + worst_perturbation(g, t.cfg.rho, 2.0);
  Eigen::MatrixXd h = dense_hessian(t.spec, pert, t.data, 0.0);
  Eigen::MatrixXd jac = dense_matrix({P, [&](const ParamVector& v) {
                                        return eps_jacobian_vec(t.spec, t.data, w, t.cfg.rho, 2.0, v,
                                                                JacobianMethod::finite_difference);
                                      }});
  Eigen::MatrixXd a = h * (Eigen::MatrixXd::Identity(P, P) + jac) + t.cfg.lambda * Eigen::MatrixXd::Identity(P, P);
  for (std::uint32_t k : {3u, 77u}) {
    const std::uint32_t row[1] = {k};
    Eigen::VectorXd gk = as_eigen(subset_loss_grad(t.spec, pert, t.data, row, 1.0 / n).grad);
    Eigen::VectorXd exact = -a.partialPivLu().solve(gk);
    auto got = sam_hif(t.spec, t.data, w, t.cfg.rho, 2.0, t.cfg.lambda, k, fixtures::tight_neumann());
    CHECK((as_eigen(got) - exact).norm() / exact.norm() < 1e-4);
  }
}

TEST_CASE("GIF of a row that is never sampled is zero") {
  Dataset data = make_blobs({50, 3, 2, 2.0, 1}, 0, 0);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.batch_size = 2;
  cfg.steps = 5;
  auto tr = train_sam(spec, data, cfg);
  std::vector<char> seen(50, 0);
  for (const auto& c : tr.trajectory.checkpoints)
    for (auto r : c.batch) seen[r] = 1;
  auto it = std::find(seen.begin(), seen.end(), 0);
  REQUIRE(it != seen.end());
  auto k = static_cast<std::uint32_t>(it - seen.begin());
  CHECK(sam_gif(tr.trajectory, spec, data, cfg, k) == ParamVector(spec.param_count()));
}

TEST_CASE("full-batch GIF is the same in sgd and gd modes") {
  Dataset data = make_blobs({30, 3, 2, 2.0, 1}, 0, 0);
  ModelSpec spec = ModelSpec::mlp({3, 3, 2});
  SAMConfig cfg;
  cfg.rho = 0.1;
  cfg.lambda = 0.01;
  cfg.steps = 40;
  auto tr = train_sam(spec, data, cfg);
  for (std::uint32_t k : {0u, 11u}) {
    CHECK(sam_gif(tr.trajectory, spec, data, cfg, k, GifMode::sgd) ==
          sam_gif(tr.trajectory, spec, data, cfg, k, GifMode::gd));
  }
}

TEST_CASE("GIF displacements add up to the training displacement") {
  Dataset data = make_blobs({40, 4, 3, 2.0, 2}, 0, 0);
  ModelSpec spec = ModelSpec::mlp({4, 5, 3});
  SAMConfig cfg;
  cfg.rho = 0.0;
  cfg.lambda = 0.0;
  cfg.eta = 0.3;
  cfg.steps = 200;
  auto tr = train_sam(spec, data, cfg);
  auto train = data.indices(Split::train);
  auto all = sam_gif_many(tr.trajectory, spec, data, cfg, train, GifMode::gd);
  ParamVector sum(spec.param_count());
  for (const auto& v : all) sum += v;
  const auto& cps = tr.trajectory.checkpoints;
  CHECK(norm2(sum - (cps.back().params - cps.front().params)) < 1e-8);
  CHECK(all[7] == sam_gif(tr.trajectory, spec, data, cfg, 7, GifMode::gd));
}

TEST_CASE("GIF refuses a trajectory from another configuration") {
  Dataset data = make_blobs({20, 3, 2, 2.0, 1}, 0, 0);
  ModelSpec spec = ModelSpec::logistic(3, 2);
  SAMConfig cfg;
  cfg.steps = 5;
  auto tr = train_sam(spec, data, cfg);
  SAMConfig other = cfg;
  other.rho = 0.2;
  CHECK_THROWS_AS(sam_gif(tr.trajectory, spec, data, other, 0), InvalidInput);
  CHECK_THROWS_AS(attribute(spec, data, cfg, tr.params, nullptr, Estimator::gif, std::vector<std::uint32_t>{0},
                            std::vector<std::uint32_t>{1}),
                  InvalidInput);
}

TEST_CASE("influence scores") {
  ParamVector vg{1.0, -2.0};
  CHECK(influence_score(vg, ParamVector(2)) == 0.0);
  CHECK(influence_score(vg, ParamVector{2.0, 1.0}) == 0.0);
  CHECK(influence_score(vg, ParamVector{1.0, 0.0}) == -1.0);
  Dataset data = gaussian_rows(8, 2, 2, 1);
  ModelSpec spec = ModelSpec::logistic(2, 2);
  ParamVector w = init_params(spec, 1);
  std::vector<std::uint32_t> val{1, 2, 3};
  ParamVector f = gaussian_vector(6, 4);
  CHECK(influence_score(spec, w, data, val, f) ==
        doctest::Approx(-dot(subset_loss_grad(spec, w, data, val, 1.0).grad, f)));
  CHECK(norm2(validation_gradient(spec, w, data, val) - subset_loss_grad(spec, w, data, val, 1.0).grad) < 1e-15);
}

TEST_CASE("model edits") {
  ParamVector w{1.0, 2.0, 3.0}, a{0.1, 0.0, -0.2}, b{0.0, 0.5, 0.5};
  CHECK(edit_model(w, ParamVector(3)) == w);
  CHECK(edit_model(edit_model(w, a), -1.0 * a) == w);
  CHECK(norm2(edit_model(edit_model(w, a), b) - edit_model(w, a + b)) < 1e-15);
  CHECK_THROWS_AS(edit_model(w, ParamVector(2)), InvalidInput);
}

TEST_CASE("a planted mislabeled point has the lowest score") {
  Dataset data = fixtures::convex_data();
  const std::uint32_t planted = 42;
  data.set_label(planted, 1 - data.label(planted));
  ModelSpec spec = ModelSpec::logistic(10, 2);
  SAMConfig cfg = fixtures::convex_config();
  auto tr = train_sam(spec, data, cfg);
  auto train = data.indices(Split::train);
  for (Estimator e : {Estimator::if_fast, Estimator::hif, Estimator::gif}) {
    auto rec = attribute(spec, data, cfg, tr.params, &tr.trajectory, e, train, data.indices(Split::val),
                         {fixtures::tight_neumann(), GifMode::sgd});
    auto lowest = std::min_element(rec.begin(), rec.end(), [](const auto& x, const auto& y) { return x.score < y.score; });
    CHECK(lowest->k == planted);
    CHECK(lowest->score < 0.0);
  }
}
