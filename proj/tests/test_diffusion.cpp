#include <doctest.h>

#include <random>

#include "persrep/diffusion.hpp"
#include "persrep/errors.hpp"
#include "oracles.hpp"

using namespace persrep;
using Eigen::VectorXd;

namespace {

NoiseSchedule flat_schedule(int steps = 4, double alpha = 1.0, double sigma = 1.0, double w = 1.0) {
  NoiseSchedule s;
  s.alphas = VectorXd::Constant(steps, alpha);
  s.sigmas = VectorXd::Constant(steps, sigma);
  s.weights = VectorXd::Constant(steps, w);
  return s;
}

// Returns the clean target selected by the conditioning vector: cond[0] > 0
// picks x, otherwise x_pr.
class PerfectReconstructor : public Denoiser {
 public:
  PerfectReconstructor(Grid x, Grid x_pr) : x_(std::move(x)), x_pr_(std::move(x_pr)) {}
  Grid predict(const Grid&, const VectorXd& cond) const override {
    return cond[0] > 0 ? x_ : x_pr_;
  }

 private:
  Grid x_, x_pr_;
};

class OffsetDenoiser : public Denoiser {
 public:
  explicit OffsetDenoiser(Grid target, Grid offset)
      : target_(std::move(target)), offset_(std::move(offset)) {}
  Grid predict(const Grid&, const VectorXd&) const override { return target_ + offset_; }

 private:
  Grid target_, offset_;
};

}  // namespace

TEST_CASE("default noise schedule is valid") {
  NoiseSchedule s = default_noise_schedule();
  CHECK(s.length() == 1000);
  CHECK(s.alphas.minCoeff() > 0);
  CHECK(s.sigmas.minCoeff() > 0);
  CHECK(s.weights.minCoeff() > 0);
  CHECK(s.alphas.maxCoeff() <= 1.0);
}

TEST_CASE("perfect reconstructor yields zero loss for any lambda") {
  Grid x = VectorXd::Random(6);
  Grid x_pr = VectorXd::Random(6);
  PerfectReconstructor denoiser(x, x_pr);
  VectorXd cond = VectorXd::Ones(1);
  VectorXd cond_pr = -VectorXd::Ones(1);
  Grid eps = VectorXd::Random(6), eps_pr = VectorXd::Random(6);
  NoiseSchedule s = flat_schedule();

  for (double lambda : {0.0, 0.5, 1.0, 7.0}) {
    double loss = dreambooth_loss(denoiser, x, x_pr, cond, cond_pr, 1, 2, eps, eps_pr, lambda, s);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("hand-computed squared residual") {
  // lambda = 0, w = 1, prediction - x = all-ones over 2 elements -> loss 2.
  Grid x = VectorXd::Zero(2);
  Grid x_pr = VectorXd::Zero(2);
  OffsetDenoiser denoiser(x, VectorXd::Ones(2));
  NoiseSchedule s = flat_schedule(3);
  double loss = dreambooth_loss(denoiser, x, x_pr, VectorXd::Zero(1), VectorXd::Zero(1), 0, 1,
                                VectorXd::Zero(2), VectorXd::Zero(2), 0.0, s);
  CHECK(loss == doctest::Approx(2.0));
}

TEST_CASE("loss is nonnegative and strictly monotone in lambda") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto rand_vec = [&](int n) {
    return VectorXd::NullaryExpr(n, [&] { return normal(rng); });
  };
  LinearDenoiser denoiser(5, 2, 3);
  NoiseSchedule s = flat_schedule(6, 0.9, 0.4, 1.3);
  Grid x = rand_vec(5), x_pr = rand_vec(5);
  VectorXd cond = rand_vec(2), cond_pr = rand_vec(2);
  Grid eps = rand_vec(5), eps_pr = rand_vec(5);

  double l0 = dreambooth_loss(denoiser, x, x_pr, cond, cond_pr, 1, 4, eps, eps_pr, 0.0, s);
  double l1 = dreambooth_loss(denoiser, x, x_pr, cond, cond_pr, 1, 4, eps, eps_pr, 1.0, s);
  double l2 = dreambooth_loss(denoiser, x, x_pr, cond, cond_pr, 1, 4, eps, eps_pr, 2.0, s);
  CHECK(l0 >= 0.0);
  CHECK(l1 > l0);  // prior residual is positive for a random affine denoiser
  CHECK(l2 > l1);
  CHECK(l2 - l1 == doctest::Approx(l1 - l0).epsilon(1e-9));  // linear in lambda
}

TEST_CASE("shape and timestep validation") {
  LinearDenoiser denoiser(4, 1, 0);
  NoiseSchedule s = flat_schedule(3);
  Grid x = VectorXd::Zero(4), x_pr = VectorXd::Zero(4);
  VectorXd cond = VectorXd::Zero(1);

  try {
    dreambooth_loss(denoiser, x, x_pr, cond, cond, 0, 0, VectorXd::Zero(3), VectorXd::Zero(4), 1.0, s);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  try {
    dreambooth_loss(denoiser, x, x_pr, cond, cond, 3, 0, VectorXd::Zero(4), VectorXd::Zero(4), 1.0, s);
    FAIL("expected InvalidTimestep");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidTimestep);
  }
}

TEST_CASE("masked reconstruction excludes background residual") {
  Grid x = VectorXd::Zero(4);
  OffsetDenoiser denoiser(x, VectorXd::Ones(4));
  NoiseSchedule s = flat_schedule(2);
  Grid mask(4);
  mask << 1, 1, 0, 0;
  double full = dreambooth_loss(denoiser, x, x, VectorXd::Zero(1), VectorXd::Zero(1), 0, 0,
                                VectorXd::Zero(4), VectorXd::Zero(4), 0.0, s);
  double masked = dreambooth_loss(denoiser, x, x, VectorXd::Zero(1), VectorXd::Zero(1), 0, 0,
                                  VectorXd::Zero(4), VectorXd::Zero(4), 0.0, s, mask);
  CHECK(full == doctest::Approx(4.0));
  CHECK(masked == doctest::Approx(2.0));
}

TEST_CASE("analytic denoiser-parameter gradient matches finite differences") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto rand_vec = [&](int n) {
    return VectorXd::NullaryExpr(n, [&] { return normal(rng); });
  };

  NoiseSchedule s = flat_schedule(5, 0.8, 0.6, 1.7);
  for (int trial = 0; trial < 50; ++trial) {
    LinearDenoiser denoiser(4, 2, static_cast<uint64_t>(trial));
    Grid x = rand_vec(4), x_pr = rand_vec(4);
    VectorXd cond = rand_vec(2), cond_pr = rand_vec(2);
    Grid eps = rand_vec(4), eps_pr = rand_vec(4);
    int t = trial % 5, t_prime = (trial * 3 + 1) % 5;
    double lambda = 0.3 + 0.1 * (trial % 7);

    VectorXd analytic;
    dreambooth_loss_grad(denoiser, x, x_pr, cond, cond_pr, t, t_prime, eps, eps_pr, lambda, s,
                         analytic);

    LinearDenoiser probe = denoiser;
    VectorXd theta0 = probe.params();
    auto f = [&](const VectorXd& theta) {
      probe.set_params(theta);
      return dreambooth_loss(probe, x, x_pr, cond, cond_pr, t, t_prime, eps, eps_pr, lambda, s);
    };
    VectorXd numeric = oracle::finite_difference(f, theta0, 1e-6);
    CHECK(oracle::rel_error(analytic, numeric) < 1e-4);
  }
}
