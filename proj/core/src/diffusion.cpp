#include "persrep/diffusion.hpp"

#include <cmath>
#include <random>

#include "persrep/errors.hpp"
#include "persrep/rng.hpp"

namespace persrep {

void NoiseSchedule::validate() const {
  if (alphas.size() < 1 || alphas.size() != sigmas.size() || alphas.size() != weights.size()) {
    raise(ErrorCode::InvalidTimestep, "schedule lists must share a length >= 1");
  }
  if ((alphas.array() <= 0).any() || (sigmas.array() <= 0).any() || (weights.array() <= 0).any()) {
    raise(ErrorCode::InvalidTimestep, "schedule values must be positive");
  }
}

NoiseSchedule default_noise_schedule(int steps) {
  NoiseSchedule s;
  s.alphas.resize(steps);
  s.sigmas.resize(steps);
  s.weights = Eigen::VectorXd::Ones(steps);
  double alpha_bar = 1.0;
  for (int t = 0; t < steps; ++t) {
    double beta = 1e-4 + (0.02 - 1e-4) * (steps > 1 ? static_cast<double>(t) / (steps - 1) : 0.0);
    alpha_bar *= 1.0 - beta;
    s.alphas[t] = std::sqrt(alpha_bar);
    s.sigmas[t] = std::sqrt(1.0 - alpha_bar);
  }
  s.validate();
  return s;
}

namespace {

void check_inputs(const Grid& x, const Grid& x_pr, int t, int t_prime, const Grid& eps,
                  const Grid& eps_prime, const NoiseSchedule& schedule,
                  const std::optional<Grid>& recon_mask) {
  schedule.validate();
  if (eps.size() != x.size()) {
    raise(ErrorCode::ShapeMismatch, "eps has " + std::to_string(eps.size()) + " elements, x has " +
                                        std::to_string(x.size()));
  }
  if (eps_prime.size() != x_pr.size()) {
    raise(ErrorCode::ShapeMismatch, "eps' does not match x_pr");
  }
  if (recon_mask && recon_mask->size() != x.size()) {
    raise(ErrorCode::ShapeMismatch, "recon_mask does not match x");
  }
  if (t < 0 || t >= schedule.length() || t_prime < 0 || t_prime >= schedule.length()) {
    raise(ErrorCode::InvalidTimestep,
          "t=" + std::to_string(t) + ", t'=" + std::to_string(t_prime) + " with T=" +
              std::to_string(schedule.length()));
  }
}

}  // namespace

double dreambooth_loss(const Denoiser& denoiser, const Grid& x, const Grid& x_pr,
                       const Eigen::VectorXd& cond, const Eigen::VectorXd& cond_pr, int t,
                       int t_prime, const Grid& eps, const Grid& eps_prime, double lambda,
                       const NoiseSchedule& schedule, const std::optional<Grid>& recon_mask) {
  check_inputs(x, x_pr, t, t_prime, eps, eps_prime, schedule, recon_mask);

  Grid noisy = schedule.alphas[t] * x + schedule.sigmas[t] * eps;
  Grid residual = denoiser.predict(noisy, cond) - x;
  if (recon_mask) residual = residual.cwiseProduct(*recon_mask);
  double loss = schedule.weights[t] * residual.squaredNorm();

  Grid noisy_pr = schedule.alphas[t_prime] * x_pr + schedule.sigmas[t_prime] * eps_prime;
  Grid residual_pr = denoiser.predict(noisy_pr, cond_pr) - x_pr;
  loss += lambda * schedule.weights[t_prime] * residual_pr.squaredNorm();
  return loss;
}

double dreambooth_loss_grad(const DifferentiableDenoiser& denoiser, const Grid& x,
                            const Grid& x_pr, const Eigen::VectorXd& cond,
                            const Eigen::VectorXd& cond_pr, int t, int t_prime, const Grid& eps,
                            const Grid& eps_prime, double lambda, const NoiseSchedule& schedule,
                            Eigen::VectorXd& grad_params, const std::optional<Grid>& recon_mask) {
  check_inputs(x, x_pr, t, t_prime, eps, eps_prime, schedule, recon_mask);
  grad_params = Eigen::VectorXd::Zero(denoiser.params().size());

  Grid noisy = schedule.alphas[t] * x + schedule.sigmas[t] * eps;
  Grid residual = denoiser.predict(noisy, cond) - x;
  if (recon_mask) residual = residual.cwiseProduct(*recon_mask);
  double loss = schedule.weights[t] * residual.squaredNorm();
  Grid upstream = 2.0 * schedule.weights[t] * residual;
  if (recon_mask) upstream = upstream.cwiseProduct(*recon_mask);
  denoiser.accumulate_param_vjp(noisy, cond, upstream, grad_params);

  Grid noisy_pr = schedule.alphas[t_prime] * x_pr + schedule.sigmas[t_prime] * eps_prime;
  Grid residual_pr = denoiser.predict(noisy_pr, cond_pr) - x_pr;
  loss += lambda * schedule.weights[t_prime] * residual_pr.squaredNorm();
  Grid upstream_pr = 2.0 * lambda * schedule.weights[t_prime] * residual_pr;
  denoiser.accumulate_param_vjp(noisy_pr, cond_pr, upstream_pr, grad_params);
  return loss;
}

LinearDenoiser::LinearDenoiser(int grid_size, int cond_size, uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  m_ = Eigen::MatrixXd::NullaryExpr(grid_size, grid_size, [&] { return normal(rng) * 0.2; });
  c_ = Eigen::MatrixXd::NullaryExpr(grid_size, cond_size, [&] { return normal(rng) * 0.2; });
  b_ = Eigen::VectorXd::NullaryExpr(grid_size, [&] { return normal(rng) * 0.1; });
}

Grid LinearDenoiser::predict(const Grid& noisy, const Eigen::VectorXd& cond) const {
  if (noisy.size() != m_.cols() || cond.size() != c_.cols()) {
    raise(ErrorCode::ShapeMismatch, "LinearDenoiser input sizes");
  }
  return m_ * noisy + c_ * cond + b_;
}

Eigen::VectorXd LinearDenoiser::params() const {
  Eigen::VectorXd theta(param_count());
  theta << Eigen::Map<const Eigen::VectorXd>(m_.data(), m_.size()),
      Eigen::Map<const Eigen::VectorXd>(c_.data(), c_.size()), b_;
  return theta;
}

void LinearDenoiser::set_params(const Eigen::VectorXd& theta) {
  if (theta.size() != param_count()) raise(ErrorCode::ShapeMismatch, "LinearDenoiser param size");
  Eigen::Index offset = 0;
  Eigen::Map<Eigen::VectorXd>(m_.data(), m_.size()) = theta.segment(offset, m_.size());
  offset += m_.size();
  Eigen::Map<Eigen::VectorXd>(c_.data(), c_.size()) = theta.segment(offset, c_.size());
  offset += c_.size();
  b_ = theta.segment(offset, b_.size());
}

void LinearDenoiser::accumulate_param_vjp(const Grid& noisy, const Eigen::VectorXd& cond,
                                          const Grid& upstream, Eigen::VectorXd& grad) const {
  // d(u . (M noisy + C cond + b)) / dM = u noisy^T, / dC = u cond^T, / db = u.
  Eigen::MatrixXd dm = upstream * noisy.transpose();
  Eigen::MatrixXd dc = upstream * cond.transpose();
  Eigen::Index offset = 0;
  grad.segment(offset, dm.size()) += Eigen::Map<Eigen::VectorXd>(dm.data(), dm.size());
  offset += dm.size();
  grad.segment(offset, dc.size()) += Eigen::Map<Eigen::VectorXd>(dc.data(), dc.size());
  offset += dc.size();
  grad.segment(offset, b_.size()) += upstream;
}

}  // namespace persrep
